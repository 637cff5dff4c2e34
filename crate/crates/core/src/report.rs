//! Result artifacts: per-run records, the RMSE and penalty tables, and SVG
//! plots of Pareto fronts and partial dependence.
//!
//! Everything here is a pure function of its inputs; no timestamps or
//! hash-ordered collections reach the output bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{predict_cart, CartTree};
use crate::dataset::{TestData, TrainingData};
use crate::error::{Error, Result};
use crate::evaluation::{rmse, Objectives};
use crate::gam::{FittedGam, PartialDependence, PointFit, TermKind, GRID_SIZE};
use crate::genome::Chromosome;
use crate::nsga2::Individual;
use crate::pareto::FrontSelection;

pub const RMSE_TABLE: &str = "rmse_table.csv";
pub const PENALTY_TABLE: &str = "penalty_table.csv";
pub const RESULTS_JSON: &str = "results.json";

/// Anything that maps feature rows to predictions.
pub trait Predictor {
    fn predict_rows(&self, features: &DMatrix<f64>) -> Result<DVector<f64>>;
}

impl Predictor for FittedGam {
    fn predict_rows(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predict(features)
    }
}

impl Predictor for PointFit {
    fn predict_rows(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predict(features)
    }
}

impl Predictor for CartTree {
    fn predict_rows(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(predict_cart(self, features))
    }
}

/// Test RMSE of a model refit on `train`. Fails if the partitions share a
/// row.
pub fn score_on_test(model: &impl Predictor, train: &TrainingData, test: &TestData) -> Result<f64> {
    if test.overlaps(train) {
        return Err(Error::PartitionOverlap);
    }
    let pred = model.predict_rows(test.data().features())?;
    rmse(pred.as_slice(), test.data().target().as_slice())
}

/// Settings that, with the data file, determine a run completely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: String,
    pub target: String,
    pub seed: u64,
    pub population_size: usize,
    pub generations: usize,
    pub k_folds: usize,
    pub test_fraction: f64,
    pub crossover_prob: f64,
}

/// One named representative: its structure, cross-validated objectives,
/// and test RMSE after a refit on all train+val rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub chromosome: Chromosome,
    pub key: String,
    pub cv: Objectives,
    pub test_rmse: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub gam_test_rmse: f64,
    pub gam_penalty: f64,
    pub cart_test_rmse: f64,
    pub cart_leaves: usize,
    pub cart_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub key: String,
    pub rmse: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub config: RunConfig,
    pub feature_names: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub knee: ModelRecord,
    pub best_by_rmse: ModelRecord,
    pub best_by_penalty: ModelRecord,
    pub baseline: BaselineRecord,
    pub front: Vec<FrontPoint>,
    pub evaluations: usize,
}

fn cell(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes `rmse_table.csv`, `penalty_table.csv` and `results.json`.
pub fn emit_tables(records: &[RunRecord], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write_csv = |name: &str, header: [&str; 6], rows: Vec<Vec<String>>| -> Result<()> {
        let path = out_dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        let header: Vec<&str> = header.into_iter().filter(|h| !h.is_empty()).collect();
        w.write_record(&header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write_csv(
        RMSE_TABLE,
        ["seed", "gam_rmse", "gam_knee", "gam_penalty", "cart", "baseline_gam"],
        records
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    cell(r.best_by_rmse.test_rmse),
                    cell(r.knee.test_rmse),
                    cell(r.best_by_penalty.test_rmse),
                    cell(r.baseline.cart_test_rmse),
                    cell(r.baseline.gam_test_rmse),
                ]
            })
            .collect(),
    )?;
    write_csv(
        PENALTY_TABLE,
        ["seed", "baseline", "knee", "best_by_rmse", "best_by_penalty", ""],
        records
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    cell(r.baseline.gam_penalty),
                    cell(r.knee.penalty),
                    cell(r.best_by_rmse.penalty),
                    cell(r.best_by_penalty.penalty),
                ]
            })
            .collect(),
    )?;
    write_json(&out_dir.join(RESULTS_JSON), &records)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Data range padded by 5% on each side (a flat range gets a small
/// symmetric window).
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if lo > hi {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { 0.05 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, svg: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(svg, r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
            let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, y1 + 18.0, tick(xv));
            let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, tick(yv));
        }
        let _ = writeln!(svg, r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(x_label));
        let _ = writeln!(svg, r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0, escape(y_label));
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Scatter of the front in (penalty, RMSE) with the three representatives
/// highlighted.
pub fn render_pareto_svg(front: &[Individual], selection: &FrontSelection, title: &str) -> String {
    let pts: Vec<(f64, f64)> = front.iter().map(|i| (i.objectives.penalty, i.objectives.rmse)).collect();
    let frame = Frame {
        x: padded_range(pts.iter().map(|p| p.0)),
        y: padded_range(pts.iter().map(|p| p.1)),
    };
    let mut svg = open_svg();
    frame.axes(&mut svg, title, "complexity penalty", "cross-validated RMSE");
    for &(x, y) in &pts {
        let _ = writeln!(svg, r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="#4c72b0"/>"##, frame.px(x), frame.py(y));
    }
    let marks = [
        ("knee", &selection.knee, "#dd8452"),
        ("best_by_rmse", &selection.best_by_rmse, "#55a868"),
        ("best_by_penalty", &selection.best_by_penalty, "#c44e52"),
    ];
    for (name, ind, color) in marks {
        let (x, y) = (frame.px(ind.objectives.penalty), frame.py(ind.objectives.rmse));
        let _ = writeln!(
            svg,
            r#"<rect class="highlight {name}" x="{:.2}" y="{:.2}" width="12" height="12" fill="none" stroke="{color}" stroke-width="2"/>"#,
            x - 6.0,
            y - 6.0
        );
    }
    for (i, (name, _, color)) in marks.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT - 130.0;
        let _ = writeln!(svg, r#"<rect x="{x}" y="{:.2}" width="10" height="10" fill="none" stroke="{color}" stroke-width="2"/>"#, y - 9.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y:.2}" font-size="11">{name}</text>"#, x + 16.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Effect curve with its shaded 95% band; `None` draws the inactive panel.
pub fn render_pd_svg(pd: Option<&PartialDependence>, feature_name: &str, title: &str) -> String {
    let mut svg = open_svg();
    let Some(pd) = pd else {
        let frame = Frame { x: (0.0, 1.0), y: (0.0, 1.0) };
        frame.axes(&mut svg, title, feature_name, "effect");
        let _ = writeln!(
            svg,
            r#"<text class="inactive" x="{:.2}" y="{:.2}" font-size="28" text-anchor="middle" fill="gray">Inactive</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    };
    let frame = Frame {
        x: padded_range(pd.grid.iter().copied()),
        y: padded_range(pd.lower.iter().chain(&pd.upper).copied()),
    };
    frame.axes(&mut svg, title, feature_name, "effect");
    let mut band = String::new();
    for (x, u) in pd.grid.iter().zip(&pd.upper) {
        let _ = write!(band, "{:.2},{:.2} ", frame.px(*x), frame.py(*u));
    }
    for (x, l) in pd.grid.iter().zip(&pd.lower).rev() {
        let _ = write!(band, "{:.2},{:.2} ", frame.px(*x), frame.py(*l));
    }
    let _ = writeln!(svg, r##"<polygon class="band" points="{}" fill="#4c72b0" fill-opacity="0.25" stroke="none"/>"##, band.trim_end());
    let curve: Vec<usize> = if pd.kind == TermKind::Linear && pd.grid.len() >= 2 {
        vec![0, pd.grid.len() - 1]
    } else {
        (0..pd.grid.len()).collect()
    };
    let mut line = String::new();
    for i in curve {
        let _ = write!(line, "{:.2},{:.2} ", frame.px(pd.grid[i]), frame.py(pd.effect[i]));
    }
    let _ = writeln!(svg, r##"<polyline class="effect" points="{}" fill="none" stroke="#4c72b0" stroke-width="2"/>"##, line.trim_end());
    svg.push_str("</svg>\n");
    svg
}

fn write_text(path: &Path, s: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn emit_pareto_plot(front: &[Individual], selection: &FrontSelection, title: &str, out_path: &Path) -> Result<()> {
    write_text(out_path, &render_pareto_svg(front, selection, title))
}

pub fn emit_partial_dependence_plot(
    model: &FittedGam,
    feature: usize,
    feature_name: &str,
    title: &str,
    out_path: &Path,
) -> Result<()> {
    let pd = match model.partial_dependence(feature, GRID_SIZE) {
        Ok(pd) => Some(pd),
        Err(Error::InactiveTerm(_)) => None,
        Err(e) => return Err(e),
    };
    write_text(out_path, &render_pd_svg(pd.as_ref(), feature_name, title))
}
