//! Sweep manifests, CSV tables, Pareto reports and SVG charts.
//!
//! Every writer produces the same bytes for the same input. Numbers in CSV
//! use six decimals, `.` as separator and LF line endings. Charts are drawn
//! on a fixed 800x600 canvas: the trade-off scatter marks frontier recipes
//! with squares (`class="point frontier"`), near-frontier recipes with
//! diamonds (`class="point near"`) and everything else with circles
//! (`class="point"`). The trajectory chart plots both scores against the
//! merge weight, one polyline per (method, score) series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merge::{MergeMethod, MergeRecipe};
use crate::pareto::ParetoResult;
use crate::sweep::{EvalPoint, SweepEntry, SweepStatus};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("no points to plot")]
    Empty,
}

type Result<T> = std::result::Result<T, ReportError>;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<SweepEntry>,
}

pub fn manifest_json(entries: &[SweepEntry]) -> String {
    let manifest = Manifest {
        entries: entries.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn write_manifest(entries: &[SweepEntry], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), manifest_json(entries).as_bytes())
}

pub fn parse_manifest(text: &str) -> Result<Vec<SweepEntry>> {
    let manifest: Manifest = serde_json::from_str(text)?;
    Ok(manifest.entries)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SweepEntry>> {
    parse_manifest(&read_file(path.as_ref())?)
}

pub const CSV_COLUMNS: [&str; 5] = ["method", "weight", "instruction_score", "medical_avg", "status"];

fn fixed6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for e in entries {
        let status = match e.status {
            SweepStatus::Ok => "ok",
            SweepStatus::Failed => "failed",
        };
        w.write_record([
            e.recipe.method.as_str().to_string(),
            fixed6(e.recipe.weight),
            e.instruction_score.map(fixed6).unwrap_or_default(),
            e.medical_avg.map(fixed6).unwrap_or_default(),
            status.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

pub fn write_sweep_csv(entries: &[SweepEntry], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), sweep_csv(entries).as_bytes())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    method: MergeMethod,
    weight: f64,
    instruction_score: Option<f64>,
    medical_avg: Option<f64>,
    status: SweepStatus,
}

fn checked_score(what: &str, row: usize, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ReportError::Malformed(format!("row {row}: {what} {v} is outside [0, 1]")))
    }
}

/// Successful rows of a sweep CSV as points; failed rows are skipped.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<EvalPoint>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(ReportError::Malformed(format!(
            "expected columns {}, found {}",
            CSV_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    for (i, row) in r.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        let line = i + 1;
        if row.status == SweepStatus::Failed {
            continue;
        }
        let (Some(ins), Some(med)) = (row.instruction_score, row.medical_avg) else {
            return Err(ReportError::Malformed(format!("row {line}: ok row without scores")));
        };
        let recipe = MergeRecipe::new(row.method, row.weight)
            .map_err(|e| ReportError::Malformed(format!("row {line}: {e}")))?;
        points.push(EvalPoint {
            recipe,
            instruction_score: checked_score("instruction_score", line, ins)?,
            medical_avg: checked_score("medical_avg", line, med)?,
            per_benchmark: BTreeMap::new(),
            checkpoint_path: None,
        });
    }
    Ok(points)
}

/// Points from either a sweep manifest (JSON) or a sweep CSV, chosen by the
/// first non-blank character.
pub fn parse_points(text: &str) -> Result<Vec<EvalPoint>> {
    if text.trim_start().starts_with('{') {
        let entries = parse_manifest(text)?;
        entries
            .iter()
            .filter(|e| e.status == SweepStatus::Ok)
            .map(|e| {
                e.point()
                    .ok_or_else(|| ReportError::Malformed(format!("entry `{}` is ok but has no scores", e.name)))
            })
            .collect()
    } else {
        parse_sweep_csv(text)
    }
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<EvalPoint>> {
    parse_points(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedRecipe {
    pub index: usize,
    pub name: String,
    pub method: MergeMethod,
    pub weight: f64,
    pub instruction_score: f64,
    pub medical_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub epsilon: f64,
    pub frontier: Vec<ReportedRecipe>,
    pub near_frontier: Vec<ReportedRecipe>,
}

impl ParetoReport {
    pub fn new(points: &[EvalPoint], result: &ParetoResult) -> Self {
        let describe = |&i: &usize| {
            let p = &points[i];
            ReportedRecipe {
                index: i,
                name: p.recipe.checkpoint_name(),
                method: p.recipe.method,
                weight: p.recipe.weight,
                instruction_score: p.instruction_score,
                medical_avg: p.medical_avg,
            }
        };
        ParetoReport {
            epsilon: result.epsilon,
            frontier: result.frontier.iter().map(describe).collect(),
            near_frontier: result.near_frontier.iter().map(describe).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

/// A linear axis over a sub-range of [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    /// Tightest tenth-aligned range covering `values`, clamped to [0, 1].
    fn fit(values: impl IntoIterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = v.clamp(0.0, 1.0);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        // work in whole tenths so bounds are exact decimals
        let mut lo_t = ((lo * 10.0 + 1e-9).floor() as i32).max(0);
        let mut hi_t = ((hi * 10.0 - 1e-9).ceil() as i32).min(10);
        if hi_t <= lo_t {
            if lo_t < 10 {
                hi_t = lo_t + 1;
            } else {
                lo_t = hi_t - 1;
            }
        }
        let (lo, hi) = (lo_t as f64 / 10.0, hi_t as f64 / 10.0);
        Axis { lo, hi }
    }

    fn unit() -> Axis {
        Axis { lo: 0.0, hi: 1.0 }
    }

    fn frac(&self, v: f64) -> f64 {
        (v.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) * 10.0).round() as usize;
        let (steps, per) = if n <= 2 { (n * 5, 0.02) } else { (n, 0.1) };
        (0..=steps).map(|k| self.lo + k as f64 * per).collect()
    }
}

fn px(axis: &Axis, v: f64) -> f64 {
    LEFT + axis.frac(v) * (WIDTH - LEFT - RIGHT)
}

fn py(axis: &Axis, v: f64) -> f64 {
    HEIGHT - BOTTOM - axis.frac(v) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open_svg(out: &mut String, title: &str, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    out.push_str("</g>\n");
    let _ = writeln!(out, r#"<g class="ticks" font-size="11">"#);
    for t in x.ticks() {
        let tx = px(x, t);
        let _ = writeln!(
            out,
            r#"<line x1="{tx:.2}" y1="{y0:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{t:.2}</text>"#,
            y0 + 5.0,
            y0 + 20.0
        );
    }
    for t in y.ticks() {
        let ty = py(y, t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{x0:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            ty + 4.0
        );
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let cy = (y0 + y1) / 2.0;
    let _ = writeln!(
        out,
        r#"<text class="y-label" x="22" y="{cy:.2}" text-anchor="middle" font-size="14" transform="rotate(-90 22 {cy:.2})">{}</text>"#,
        escape(y_label)
    );
}

pub const INSTRUCTION_AXIS: &str = "Instruction Following";
pub const MEDICAL_AXIS: &str = "Medical Avg";

/// Trade-off scatter: instruction following on x, medical average on y.
pub fn tradeoff_svg(points: &[EvalPoint], result: &ParetoResult) -> Result<String> {
    if points.is_empty() {
        return Err(ReportError::Empty);
    }
    if let Some(&i) = result.near_frontier.iter().chain(&result.frontier).find(|&&i| i >= points.len()) {
        return Err(ReportError::Malformed(format!("frontier index {i} out of range")));
    }
    let x = Axis::fit(points.iter().map(|p| p.instruction_score));
    let y = Axis::fit(points.iter().map(|p| p.medical_avg));
    let mut out = String::new();
    open_svg(&mut out, "Merge trade-off", &x, &y, INSTRUCTION_AXIS, MEDICAL_AXIS);

    out.push_str("<g class=\"points\">\n");
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = (px(&x, p.instruction_score), py(&y, p.medical_avg));
        let name = escape(&p.recipe.checkpoint_name());
        if result.frontier.contains(&i) {
            let _ = writeln!(
                out,
                r##"<rect class="point frontier" data-index="{i}" data-name="{name}" x="{:.2}" y="{:.2}" width="10" height="10" fill="#d62728" stroke="black"/>"##,
                cx - 5.0,
                cy - 5.0
            );
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10">{name}</text>"#, cx + 8.0, cy - 8.0);
        } else if result.near_frontier.contains(&i) {
            let _ = writeln!(
                out,
                r##"<path class="point near" data-index="{i}" data-name="{name}" d="M {cx:.2} {:.2} L {:.2} {cy:.2} L {cx:.2} {:.2} L {:.2} {cy:.2} Z" fill="#ff7f0e" stroke="black"/>"##,
                cy - 6.0,
                cx + 6.0,
                cy + 6.0,
                cx - 6.0
            );
        } else {
            let _ = writeln!(
                out,
                r##"<circle class="point" data-index="{i}" data-name="{name}" cx="{cx:.2}" cy="{cy:.2}" r="4" fill="#1f77b4"/>"##
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// (metric key, label, color, accessor)
type Series = (&'static str, &'static str, &'static str, fn(&EvalPoint) -> f64);

const SERIES_COLORS: [(MergeMethod, &str, &str); 2] = [
    (MergeMethod::Linear, "#1f77b4", "#aec7e8"),
    (MergeMethod::Slerp, "#d62728", "#ff9896"),
];

/// Scores against merge weight: a medical and an instruction series for each
/// method present.
pub fn trajectory_svg(points: &[EvalPoint]) -> Result<String> {
    if points.is_empty() {
        return Err(ReportError::Empty);
    }
    let x = Axis::unit();
    let y = Axis::fit(points.iter().flat_map(|p| [p.instruction_score, p.medical_avg]));
    let mut out = String::new();
    open_svg(&mut out, "Scores along the merge path", &x, &y, "Merge Weight", "Score");

    let mut legend = Vec::new();
    for (method, med_color, ins_color) in SERIES_COLORS {
        let mut pts: Vec<&EvalPoint> = points.iter().filter(|p| p.recipe.method == method).collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.recipe.weight.total_cmp(&b.recipe.weight));
        let series: [Series; 2] = [
            ("medical_avg", MEDICAL_AXIS, med_color, |p| p.medical_avg),
            ("instruction_score", INSTRUCTION_AXIS, ins_color, |p| p.instruction_score),
        ];
        for (metric, label, color, get) in series {
            let coords: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(&x, p.recipe.weight), py(&y, get(p))))
                .collect();
            let _ = writeln!(
                out,
                r#"<g class="series" data-method="{method}" data-metric="{metric}" stroke="{color}" fill="{color}">"#
            );
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke-width="2" points="{}"/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').expect("formatted pair");
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3"/>"#);
            }
            out.push_str("</g>\n");
            legend.push((format!("{method} {label}"), color));
        }
    }
    out.push_str("<g class=\"legend\">\n");
    for (k, (label, color)) in legend.iter().enumerate() {
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT - 190.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Companion trajectory chart path: `<stem>.trajectory.svg` beside `path`.
pub fn trajectory_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.trajectory.svg"))
}

/// Writes the trade-off scatter to `path` and the trajectory chart beside
/// it; returns the trajectory chart's path.
pub fn emit_tradeoff_svg(points: &[EvalPoint], result: &ParetoResult, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let scatter = tradeoff_svg(points, result)?;
    let trajectory = trajectory_svg(points)?;
    write_file(path, scatter.as_bytes())?;
    let companion = trajectory_path(path);
    write_file(&companion, trajectory.as_bytes())?;
    Ok(companion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::select;

    fn point(method: MergeMethod, weight: f64, ins: f64, med: f64) -> EvalPoint {
        EvalPoint {
            recipe: MergeRecipe::new(method, weight).unwrap(),
            instruction_score: ins,
            medical_avg: med,
            per_benchmark: BTreeMap::from([("medical".to_string(), med)]),
            checkpoint_path: None,
        }
    }

    fn entry(method: MergeMethod, weight: f64, scores: Option<(f64, f64)>) -> SweepEntry {
        let recipe = MergeRecipe::new(method, weight).unwrap();
        SweepEntry {
            name: recipe.checkpoint_name(),
            recipe,
            status: if scores.is_some() { SweepStatus::Ok } else { SweepStatus::Failed },
            instruction_score: scores.map(|s| s.0),
            medical_avg: scores.map(|s| s.1),
            per_benchmark: scores
                .map(|s| BTreeMap::from([("medical".to_string(), s.1)]))
                .unwrap_or_default(),
            checkpoint_path: None,
            error: scores.is_none().then(|| "no scores".to_string()),
        }
    }

    fn reported_points() -> Vec<EvalPoint> {
        vec![
            point(MergeMethod::Linear, 0.0, 0.2244, 0.6896),
            point(MergeMethod::Linear, 1.0, 0.5253, 0.6845),
            point(MergeMethod::Slerp, 0.7, 0.5166, 0.6969),
        ]
    }

    #[test]
    fn csv_layout() {
        let rows = [
            entry(MergeMethod::Linear, 0.1, Some((0.25, 0.5))),
            entry(MergeMethod::Slerp, 0.35, None),
        ];
        assert_eq!(
            sweep_csv(&rows),
            "method,weight,instruction_score,medical_avg,status\n\
             linear,0.100000,0.250000,0.500000,ok\n\
             slerp,0.350000,,,failed\n"
        );
    }

    #[test]
    fn csv_round_trip_skips_failures() {
        let rows = [
            entry(MergeMethod::Linear, 0.1, Some((0.25, 0.5))),
            entry(MergeMethod::Slerp, 0.35, None),
            entry(MergeMethod::Slerp, 0.7, Some((0.5166, 0.6969))),
        ];
        let pts = parse_points(&sweep_csv(&rows)).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].recipe.method, MergeMethod::Slerp);
        assert_eq!(pts[1].recipe.weight, 0.7);
        assert_eq!(pts[1].instruction_score, 0.5166);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(parse_sweep_csv("a,b\n1,2\n").is_err());
        let head = "method,weight,instruction_score,medical_avg,status\n";
        assert!(parse_sweep_csv(&format!("{head}linear,0.5,1.5,0.5,ok\n")).is_err());
        assert!(parse_sweep_csv(&format!("{head}linear,1.5,0.5,0.5,ok\n")).is_err());
        assert!(parse_sweep_csv(&format!("{head}linear,0.5,,0.5,ok\n")).is_err());
        assert!(parse_sweep_csv(&format!("{head}cubic,0.5,0.5,0.5,ok\n")).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let rows = vec![
            entry(MergeMethod::Linear, 0.1, Some((0.25, 0.5))),
            entry(MergeMethod::Slerp, 0.35, None),
        ];
        let text = manifest_json(&rows);
        assert!(text.ends_with("}\n"));
        assert_eq!(parse_manifest(&text).unwrap(), rows);
        let pts = parse_points(&text).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].per_benchmark["medical"], 0.5);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let first = &v["entries"][0];
        for key in ["method", "weight", "instruction_score", "medical_avg", "per_benchmark", "checkpoint_path", "status"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert!(parse_manifest("{\"rows\": []}").is_err());
    }

    #[test]
    fn pareto_report_lists_recipes() {
        let pts = reported_points();
        let report = ParetoReport::new(&pts, &select(&pts, 0.005));
        let names: Vec<&str> = report.frontier.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["slerp-0.7", "linear-1.0"]);
        assert_eq!(report.epsilon, 0.005);
        let back: ParetoReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn axis_fitting() {
        assert_eq!(Axis::fit([0.2244, 0.5253]), Axis { lo: 0.2, hi: 0.6 });
        assert_eq!(Axis::fit([0.6896, 0.6969]), Axis { lo: 0.6, hi: 0.7 });
        assert_eq!(Axis::fit([0.7, 0.7]), Axis { lo: 0.7, hi: 0.8 });
        assert_eq!(Axis::fit([1.0]), Axis { lo: 0.9, hi: 1.0 });
        assert_eq!(Axis::fit([-0.5, 2.0]), Axis::unit());
        assert_eq!(Axis::fit(std::iter::empty()), Axis::unit());
        assert_eq!(Axis { lo: 0.6, hi: 0.7 }.ticks().len(), 6);
        assert_eq!(Axis::unit().ticks().len(), 11);
    }

    fn count(doc: &roxmltree::Document, class: &str) -> usize {
        doc.descendants()
            .filter(|n| n.attribute("class").is_some_and(|c| c.split(' ').any(|w| w == class)))
            .count()
    }

    #[test]
    fn tradeoff_markers() {
        let pts = reported_points();
        let result = select(&pts, 0.005);
        let svg = tradeoff_svg(&pts, &result).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count(&doc, "point"), 3);
        assert_eq!(count(&doc, "frontier"), 2);
        assert!(svg.contains(INSTRUCTION_AXIS) && svg.contains(MEDICAL_AXIS));
        assert_eq!(doc.root_element().attribute("width"), Some("800"));
        assert_eq!(svg, tradeoff_svg(&pts, &result).unwrap());
    }

    #[test]
    fn near_markers_distinct() {
        let pts = vec![
            point(MergeMethod::Linear, 0.0, 0.5, 0.7),
            point(MergeMethod::Linear, 0.5, 0.495, 0.697),
            point(MergeMethod::Linear, 1.0, 0.1, 0.1),
        ];
        let svg = tradeoff_svg(&pts, &select(&pts, 0.01)).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count(&doc, "point"), 3);
        assert_eq!(count(&doc, "frontier"), 1);
        assert_eq!(count(&doc, "near"), 1);
    }

    #[test]
    fn bad_inputs() {
        let empty = ParetoResult { frontier: vec![], near_frontier: vec![], epsilon: 0.0 };
        assert!(matches!(tradeoff_svg(&[], &empty), Err(ReportError::Empty)));
        assert!(matches!(trajectory_svg(&[]), Err(ReportError::Empty)));
        let bogus = ParetoResult { frontier: vec![7], near_frontier: vec![7], epsilon: 0.0 };
        assert!(tradeoff_svg(&reported_points(), &bogus).is_err());
    }

    #[test]
    fn trajectory_series() {
        let mut pts: Vec<EvalPoint> = (0..=10)
            .map(|k| point(MergeMethod::Linear, k as f64 / 10.0, k as f64 / 10.0, 1.0 - k as f64 / 10.0))
            .collect();
        let svg = trajectory_svg(&pts).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count(&doc, "series"), 2);
        let line = doc.descendants().find(|n| n.has_tag_name("polyline")).unwrap();
        assert_eq!(line.attribute("points").unwrap().split(' ').count(), 11);
        pts.push(point(MergeMethod::Slerp, 0.5, 0.5, 0.5));
        let doc_text = trajectory_svg(&pts).unwrap();
        let doc = roxmltree::Document::parse(&doc_text).unwrap();
        assert_eq!(count(&doc, "series"), 4);
    }

    #[test]
    fn names_are_escaped() {
        assert_eq!(escape(r#"a<b>&"c""#), "a&lt;b&gt;&amp;&quot;c&quot;");
    }

    #[test]
    fn emit_writes_both_charts() {
        let dir = tempfile::tempdir().unwrap();
        let pts = reported_points();
        let path = dir.path().join("tradeoff.svg");
        let companion = emit_tradeoff_svg(&pts, &select(&pts, 0.005), &path).unwrap();
        assert_eq!(companion, dir.path().join("tradeoff.trajectory.svg"));
        roxmltree::Document::parse(&fs::read_to_string(&path).unwrap()).unwrap();
        roxmltree::Document::parse(&fs::read_to_string(&companion).unwrap()).unwrap();
    }
}
