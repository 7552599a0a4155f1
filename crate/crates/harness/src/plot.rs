//! SVG line charts of Monte Carlo summaries: one panel per scheme, sample
//! size on the horizontal axis, one line per (estimator, eta).

use std::fmt::Write;
use std::path::{Path, PathBuf};

use lcshift::{McSummary, Scheme};

use crate::error::{HarnessError, Result};
use crate::output::read_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Efficiency,
    ScaledMse,
    Coverage,
    CiWidth,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Efficiency,
        Metric::ScaledMse,
        Metric::Coverage,
        Metric::CiWidth,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Metric::Efficiency => "efficiency.svg",
            Metric::ScaledMse => "scaled_mse.svg",
            Metric::Coverage => "coverage.svg",
            Metric::CiWidth => "ci_width.svg",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::Efficiency => "Efficiency relative to the parametric MLE",
            Metric::ScaledMse => "Scaled MSE (mn/N times MSE)",
            Metric::Coverage => "Confidence interval coverage",
            Metric::CiWidth => "Mean confidence interval width",
        }
    }

    pub fn value(self, row: &McSummary) -> f64 {
        match self {
            Metric::Efficiency => row.efficiency,
            Metric::ScaledMse => row.scaled_mse,
            Metric::Coverage => row.coverage,
            Metric::CiWidth => row.mean_ci_width,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 60.0;
const MARGIN_B: f64 = 45.0;
const CELL_W: f64 = MARGIN_L + PANEL_W + MARGIN_R;
const CELL_H: f64 = MARGIN_T + PANEL_H + MARGIN_B;

/// Linear map from data to panel coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub lo: f64,
    pub hi: f64,
    pub px_lo: f64,
    pub px_hi: f64,
}

impl Scale {
    fn covering(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64, pad: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            let half = 0.5 * lo.abs().max(1e-3);
            (lo, hi) = (lo - half, hi + half);
        }
        let extra = pad * (hi - lo);
        Scale {
            lo: lo - extra,
            hi: hi + extra,
            px_lo,
            px_hi,
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn series_label(row: &McSummary) -> String {
    match row.eta {
        Some(eta) => format!("{} (eta = {eta})", row.estimator),
        None => row.estimator.clone(),
    }
}

/// Distinct series labels in order of first appearance.
fn series(rows: &[McSummary]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in rows {
        let l = series_label(r);
        if !labels.contains(&l) {
            labels.push(l);
        }
    }
    labels
}

/// Renders one chart; `level` draws the nominal line on coverage panels.
pub fn render_svg(rows: &[McSummary], metric: Metric, level: f64) -> String {
    let labels = series(rows);
    let legend_rows = labels.len().div_ceil(2);
    let width = 2.0 * CELL_W;
    let height = 2.0 * CELL_H + 20.0 * legend_rows as f64 + 20.0;
    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        width / 2.0,
        escape(metric.title())
    );

    for (p, scheme) in Scheme::ALL.iter().enumerate() {
        let ox = (p % 2) as f64 * CELL_W + MARGIN_L;
        let oy = (p / 2) as f64 * CELL_H + MARGIN_T;
        let panel: Vec<&McSummary> = rows.iter().filter(|r| r.scheme == scheme.id()).collect();
        render_panel(w, scheme.id(), &panel, &labels, metric, level, ox, oy);
    }

    let legend_y = 2.0 * CELL_H + 10.0;
    for (i, label) in labels.iter().enumerate() {
        let x = MARGIN_L + (i % 2) as f64 * CELL_W;
        let y = legend_y + 20.0 * (i / 2) as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            w,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[allow(clippy::too_many_arguments)]
fn render_panel(
    w: &mut String,
    scheme: &str,
    rows: &[&McSummary],
    labels: &[String],
    metric: Metric,
    level: f64,
    ox: f64,
    oy: f64,
) {
    let reference = (metric == Metric::Coverage).then_some(level);
    let xs = Scale::covering(rows.iter().map(|r| r.n as f64), ox, ox + PANEL_W, 0.05);
    let ys = Scale::covering(
        rows.iter().map(|r| metric.value(r)).chain(reference),
        oy + PANEL_H,
        oy,
        0.08,
    );
    let _ = writeln!(
        w,
        r#"<g class="panel" data-scheme="{scheme}"><text x="{}" y="{}" text-anchor="middle" font-size="14">{scheme}</text>"#,
        ox + PANEL_W / 2.0,
        oy - 10.0
    );
    let _ = writeln!(
        w,
        r##"<rect class="frame" x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );

    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    for n in &sizes {
        let x = xs.apply(*n as f64);
        let _ = writeln!(
            w,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#444"/><text x="{x}" y="{}" text-anchor="middle">{n}</text>"##,
            oy + PANEL_H,
            oy + PANEL_H + 5.0,
            oy + PANEL_H + 18.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#,
        ox + PANEL_W / 2.0,
        oy + PANEL_H + 36.0
    );
    for i in 0..=4 {
        let v = ys.lo + (ys.hi - ys.lo) * i as f64 / 4.0;
        let y = ys.apply(v);
        let _ = writeln!(
            w,
            r##"<line x1="{}" y1="{y}" x2="{ox}" y2="{y}" stroke="#444"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            ox - 5.0,
            ox - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    if rows.is_empty() {
        let _ = writeln!(
            w,
            r##"<text x="{}" y="{}" text-anchor="middle" fill="#888">no data</text>"##,
            ox + PANEL_W / 2.0,
            oy + PANEL_H / 2.0
        );
    }
    if let Some(level) = reference {
        let y = ys.apply(level);
        let _ = writeln!(
            w,
            r##"<line class="reference" x1="{ox}" y1="{y}" x2="{}" y2="{y}" stroke="#000" stroke-dasharray="6,4"/>"##,
            ox + PANEL_W
        );
    }

    for (i, label) in labels.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &series_label(r) == label)
            .map(|r| (r.n as f64, metric.value(r)))
            .filter(|(_, v)| v.is_finite())
            .collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", xs.apply(*x), ys.apply(*y)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline class="series" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(label),
            coords.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                xs.apply(*x),
                ys.apply(*y)
            );
        }
    }
    w.push_str("</g>\n");
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Writes the four charts for `csv_path` into `out_dir`.
pub fn emit_plots(csv_path: &Path, out_dir: &Path, level: f64) -> Result<Vec<PathBuf>> {
    let rows = read_csv(csv_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    Metric::ALL
        .iter()
        .map(|metric| {
            let path = out_dir.join(metric.file_name());
            std::fs::write(&path, render_svg(&rows, *metric, level))
                .map_err(|e| HarnessError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
