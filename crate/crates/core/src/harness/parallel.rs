use rayon::prelude::*;

use crate::error::{Error, Result};

/// Worker-thread count for cell-level parallelism. Unset means sequential.
pub const THREADS_ENV: &str = "MUON_THREADS";

pub fn worker_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Maps `f` over `items`, preserving order. Results never depend on `threads`.
pub fn run_cells<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let items: Vec<u64> = (0..50).collect();
        let seq = run_cells(&items, 1, |x| Ok(x * x)).unwrap();
        let par = run_cells(&items, 4, |x| Ok(x * x)).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn first_error_propagates() {
        let items = [1, 2, 3];
        let r: Result<Vec<i32>> = run_cells(&items, 2, |&x| {
            if x == 2 {
                Err(Error::Range("two".into()))
            } else {
                Ok(x)
            }
        });
        assert!(r.is_err());
    }
}
