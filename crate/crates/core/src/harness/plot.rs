//! Rejection-rate curves as SVG, always next to the CSV table they show.

use super::csv_io::write_records_path;
use super::experiment::RateRow;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Type1,
    Power,
}

impl PlotKind {
    /// Power tables are keyed by `delta`, Type I tables by `n` or `d`.
    pub fn infer(rows: &[RateRow]) -> PlotKind {
        if rows.first().is_some_and(|r| r.variable == "delta") {
            PlotKind::Power
        } else {
            PlotKind::Type1
        }
    }

    /// Methods drawn: naive has no error control, so power plots skip it.
    pub fn methods(self) -> &'static [&'static str] {
        match self {
            PlotKind::Type1 => &["proposed", "wopp", "naive", "bonferroni"],
            PlotKind::Power => &["proposed", "wopp", "bonferroni"],
        }
    }
}

fn rate(r: &RateRow, method: &str) -> f64 {
    match method {
        "proposed" => r.proposed,
        "wopp" => r.wopp,
        "naive" => r.naive,
        "bonferroni" => r.bonferroni,
        _ => unreachable!("unknown method {method}"),
    }
}

const COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#7f7f7f", "#2ca02c"];

/// Render the curves; one `<polyline>` per method.
pub fn render_svg(rows: &[RateRow], kind: PlotKind, alpha: f64) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidData("nothing to plot: empty table".into()));
    }
    let (w, h, m) = (480.0, 320.0, 50.0);
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (x0, x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let ymax = match kind {
        PlotKind::Power => 1.0,
        PlotKind::Type1 => {
            let top = rows
                .iter()
                .flat_map(|r| kind.methods().iter().map(move |&mm| rate(r, mm)))
                .fold(alpha, f64::max);
            (top * 1.1).clamp(2.0 * alpha, 1.0)
        }
    };
    let px = |v: f64| m + (v - x0) / span * (w - 2.0 * m);
    let py = |v: f64| h - m - v / ymax * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {} L{m} {} L{} {}" stroke="black" fill="none"/>"#,
        m,
        h - m,
        w - m,
        h - m
    );
    for &v in &xs {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{v}</text>"#, px(v), h - m + 15.0);
    }
    for t in 0..=4 {
        let v = ymax * t as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, m - 5.0, py(v) + 4.0);
    }
    let xlabel = &rows[0].variable;
    let ylabel = match kind {
        PlotKind::Type1 => "Type I error rate",
        PlotKind::Power => "power",
    };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{ylabel}</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(
        s,
        r#"<line class="alpha" x1="{m}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="black" stroke-dasharray="4 3"/>"#,
        py(alpha),
        w - m,
        py(alpha)
    );
    for (c, &method) in kind.methods().iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", px(r.value), py(rate(r, method))))
            .collect();
        let color = COLORS[c % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<polyline class="curve" data-method="{method}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = m + 14.0 * c as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - m - 95.0, w - m - 75.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{method}</text>"#, w - m - 70.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Write `<stem>.csv` and `<stem>.svg` into `dir`; returns both paths.
pub fn emit_plots(rows: &[RateRow], kind: PlotKind, alpha: f64, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let svg = render_svg(rows, kind, alpha)?;
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let fig = dir.join(format!("{stem}.svg"));
    write_records_path(&csv, rows)?;
    std::fs::write(&fig, svg)?;
    Ok((csv, fig))
}

/// Read a table written by [`emit_plots`].
pub fn read_table(path: &Path) -> Result<Vec<RateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<RateRow>, _>>()?;
    Ok(rows)
}
