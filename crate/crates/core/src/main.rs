use clap::Parser;

fn main() {
    let cli = muon_core::cli::Cli::parse();
    std::process::exit(muon_core::cli::run(&cli));
}
