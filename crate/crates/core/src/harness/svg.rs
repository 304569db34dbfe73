//! Minimal self-contained SVG line plots.

use std::fmt::Write;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const TICKS: usize = 5;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Debug, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn render_panel(out: &mut String, panel: &Panel, y0: f64) {
    let finite: Vec<(f64, f64)> = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (x_lo, x_hi) = bounds(finite.iter().map(|p| p.0));
    let (y_lo, y_hi) = bounds(finite.iter().map(|p| p.1));
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| y0 + MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        y0 + 22.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444"/>"##,
        y0 + MARGIN_T
    );
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            px(xv),
            y0 + MARGIN_T + plot_h + 14.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            py(yv) + 3.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        y0 + PANEL_H - 10.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        y0 + MARGIN_T + plot_h / 2.0,
        y0 + MARGIN_T + plot_h / 2.0,
        escape(&panel.y_label)
    );

    for (k, s) in panel.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let label = escape(&s.label);
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-label="{label}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        if pts.len() == 1 {
            let (x, y) = pts[0].split_once(',').expect("pair");
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let ly = y0 + MARGIN_T + 14.0 + 18.0 * k as f64;
        let lx = PANEL_W - MARGIN_R + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{label}</text>"#,
            lx + 24.0,
            ly + 4.0
        );
    }
}

/// Stacks `panels` vertically; `notes` are printed as text lines below them.
pub fn render(panels: &[Panel], notes: &[String]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64 + 16.0 * notes.len() as f64 + 10.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PANEL_H * i as f64);
    }
    let base = PANEL_H * panels.len().max(1) as f64;
    for (i, n) in notes.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="10" y="{:.1}" font-size="11">{}</text>"#,
            base + 14.0 * (i + 1) as f64,
            escape(n)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_series_embedded() {
        let p = Panel {
            title: "loss <vs> tokens".into(),
            x_label: "tokens".into(),
            y_label: "loss".into(),
            series: vec![
                Series {
                    label: "muon".into(),
                    points: vec![(0.0, 3.0), (10.0, 1.0), (20.0, f64::NAN)],
                },
                Series {
                    label: "adamw".into(),
                    points: vec![(0.0, 3.0), (10.0, 2.0)],
                },
            ],
        };
        let svg = render(&[p], &["note".into()]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("class=\"series\"").count(), 2);
        assert!(svg.contains(">muon<") && svg.contains(">adamw<"));
        assert!(svg.contains("&lt;vs&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn degenerate_ranges() {
        let p = Panel {
            series: vec![Series {
                label: "flat".into(),
                points: vec![(1.0, 2.0)],
            }],
            ..Default::default()
        };
        let svg = render(&[p], &[]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        let empty = render(&[Panel::default()], &[]);
        assert!(empty.contains("</svg>"));
    }
}
