//! Run directories and on-disk artifacts.
//!
//! Every experiment run lands in its own directory `<name>-<unix-seconds>`
//! holding `report.json` (the full typed report, including the complete
//! configuration needed to re-run it) and `raw.csv` (one row per trial).
//! Timestamps appear only in directory names, never inside the files, so
//! re-running from a report reproduces `raw.csv` byte for byte. All CSV
//! output uses 17 significant digits, `.` as the decimal separator, and
//! `\n` line endings.

use crate::cell::CellSolution;
use crate::eigensolve::EigenResult;
use crate::error::Result;
use crate::experiments::{ExperimentReport, ProbabilityRecord};
use crate::sparse::Csr;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Creates `<root>/<name>-<unixsecs>`, appending `-2`, `-3`, … on
/// collision, and returns the created path.
pub fn run_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let base = root.join(format!("{name}-{secs}"));
    let mut candidate = base.clone();
    let mut suffix = 2u32;
    loop {
        match std::fs::create_dir_all(candidate.parent().unwrap_or(root)) {
            Ok(()) => {}
            Err(e) => return Err(e.into()),
        }
        match std::fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                candidate = PathBuf::from(format!("{}-{suffix}", base.display()));
                suffix += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// Writes `report.json` and `raw.csv` into `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("raw.csv"), report.raw_csv())?;
    Ok(())
}

/// Reads a report back from a `report.json` path (or a run directory).
pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(file)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a symmetric sparse matrix as `row col value` triples, one per
/// line, suitable for external inspection.
pub fn write_matrix(path: &Path, matrix: &Csr) -> Result<()> {
    let mut out = String::new();
    for row in 0..matrix.n() {
        let (cols, values) = matrix.row(row);
        for (col, value) in cols.iter().zip(values) {
            out.push_str(&format!("{row} {col} {}\n", fmt(*value)));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a coupling sweep as `eta,lambda_eta,residual` rows.
pub fn write_cell_sweep(path: &Path, solutions: &[CellSolution]) -> Result<()> {
    let mut out = String::from("eta,lambda_eta,residual\n");
    for s in solutions {
        out.push_str(&format!("{},{},{}\n", fmt(s.eta), fmt(s.lambda_eta), fmt(s.residual)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes eigenpairs as `index,eigenvalue,residual` rows.
pub fn write_eigenpairs(path: &Path, result: &EigenResult) -> Result<()> {
    let mut out = String::from("index,eigenvalue,residual\n");
    for (i, (lam, res)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
        out.push_str(&format!("{i},{},{}\n", fmt(*lam), fmt(*res)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// plotting

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 840.0;
const PANEL_H: f64 = 320.0;
const ML: f64 = 70.0;
const MR: f64 = 180.0;
const MT: f64 = 34.0;
const MB: f64 = 44.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    top: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0).max(1e-300) * (W - ML - MR)
    }
    fn sy(&self, y: f64) -> f64 {
        self.top + MT + (self.y1 - y) / (self.y1 - self.y0).max(1e-300) * (PANEL_H - MT - MB)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = (hi - lo).abs().max(1e-12 * (1.0 + hi.abs()));
    (lo - 0.06 * span, hi + 0.06 * span)
}

fn axis(svg: &mut String, f: &Frame, title: &str) {
    let (left, right) = (f.sx(f.x0), f.sx(f.x1));
    let (bottom, top) = (f.sy(f.y0), f.sy(f.y1));
    svg.push_str(&format!(
        "<rect x='{left:.1}' y='{top:.1}' width='{:.1}' height='{:.1}' fill='none' stroke='#888'/>\n",
        right - left,
        bottom - top
    ));
    svg.push_str(&format!(
        "<text x='{:.1}' y='{:.1}' font-size='15' text-anchor='middle' fill='#222'>{}</text>\n",
        (left + right) / 2.0,
        f.top + 20.0,
        xml_escape(title)
    ));
    for frac in [0.0, 0.5, 1.0] {
        let xv = f.x0 + frac * (f.x1 - f.x0);
        let yv = f.y0 + frac * (f.y1 - f.y0);
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='middle' fill='#555'>{xv:.3}</text>\n",
            f.sx(xv),
            bottom + 16.0
        ));
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='11' text-anchor='end' fill='#555'>{yv:.3}</text>\n",
            left - 6.0,
            f.sy(yv) + 4.0
        ));
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn probability_panel(svg: &mut String, probs: &[ProbabilityRecord], top: f64) {
    // x-axis: the varied quantity (parameter when it varies, box size
    // otherwise); one colored series per box size
    let by_parameter = probs.iter().any(|p| p.parameter != probs[0].parameter);
    let xs: Vec<f64> = probs
        .iter()
        .map(|p| if by_parameter { p.parameter } else { p.n_cells as f64 })
        .collect();
    let (x0, x1) = padded(
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let hi = probs.iter().map(|p| p.p.upper).fold(0.0_f64, f64::max);
    let (y0, y1) = padded(0.0, hi.max(1e-3));
    let f = Frame { x0, x1, y0, y1, top };
    axis(svg, &f, if by_parameter { "event probability vs parameter" } else { "event probability vs box size" });

    let mut sizes: Vec<usize> = probs.iter().map(|p| p.n_cells).collect();
    sizes.sort_unstable();
    sizes.dedup();
    for (si, &n) in sizes.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let series: Vec<&ProbabilityRecord> =
            probs.iter().filter(|p| p.n_cells == n).collect();
        for p in &series {
            let x = f.sx(if by_parameter { p.parameter } else { p.n_cells as f64 });
            svg.push_str(&format!(
                "<line x1='{x:.1}' y1='{:.1}' x2='{x:.1}' y2='{:.1}' stroke='{color}' stroke-width='1.4'/>\n",
                f.sy(p.p.lower),
                f.sy(p.p.upper)
            ));
            svg.push_str(&format!(
                "<circle cx='{x:.1}' cy='{:.1}' r='3.4' fill='{color}'/>\n",
                f.sy(p.p.estimate)
            ));
        }
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='12' fill='{color}'>N = {n}</text>\n",
            W - MR + 12.0,
            top + MT + 16.0 * (si as f64 + 1.0)
        ));
    }
}

fn curve_panel(svg: &mut String, report: &ExperimentReport, top: f64) {
    let curves = &report.curves;
    let all_x: Vec<f64> = curves.iter().flat_map(|c| c.x.iter().copied()).collect();
    let all_y: Vec<f64> = curves.iter().flat_map(|c| c.y.iter().copied()).collect();
    let (x0, x1) = padded(
        all_x.iter().copied().fold(f64::INFINITY, f64::min),
        all_x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        all_y.iter().copied().fold(f64::INFINITY, f64::min),
        all_y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let f = Frame { x0, x1, y0, y1, top };
    axis(svg, &f, "recorded curves");
    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let pts: Vec<String> = c
            .x
            .iter()
            .zip(&c.y)
            .map(|(&x, &y)| format!("{:.1},{:.1}", f.sx(x), f.sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points='{}' fill='none' stroke='{color}' stroke-width='1.6'/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='12' fill='{color}'>{}</text>\n",
            W - MR + 12.0,
            top + MT + 16.0 * (ci as f64 + 1.0),
            xml_escape(&c.label)
        ));
    }
}

/// Renders `plot.svg` into `dir`: Wilson-interval probability estimates on
/// top (when present) and the report's curves below.
pub fn write_plot(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let mut panels: Vec<Box<dyn Fn(&mut String, f64)>> = Vec::new();
    if !report.probabilities.is_empty() {
        let probs = report.probabilities.clone();
        panels.push(Box::new(move |svg, top| probability_panel(svg, &probs, top)));
    }
    if !report.curves.is_empty() {
        let rep = report.clone();
        panels.push(Box::new(move |svg, top| curve_panel(svg, &rep, top)));
    }
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut svg = format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{W}' height='{height}' viewBox='0 0 {W} {height}'>\n<rect width='100%' height='100%' fill='white'/>\n"
    );
    if panels.is_empty() {
        svg.push_str("<text x='20' y='40' font-size='14'>nothing to plot</text>\n");
    }
    for (i, panel) in panels.iter().enumerate() {
        panel(&mut svg, i as f64 * PANEL_H);
    }
    svg.push_str("</svg>\n");
    std::fs::write(dir.join("plot.svg"), svg)?;
    Ok(())
}
