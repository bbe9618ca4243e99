//! Run comparison: aligns the observable series of two runs on the common
//! part of their time ranges, linearly interpolating each onto the union of
//! sample times, and reports per-component and overall sup and RMS
//! differences.

use crate::error::{runtime, CliError, CliResult};
use crate::runner::{Manifest, OBSERVABLES_NAME};
use fplearn_core::series::{Block, ObservableSeries};
use serde::{Deserialize, Serialize};
use std::io::BufReader;
use std::path::Path;

pub const REPORT_NAME: &str = "compare_report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Lambda,
    MeanBr,
    MeanPrior,
}

impl Metric {
    pub fn parse(name: &str) -> CliResult<Metric> {
        match name {
            "lambda" => Ok(Metric::Lambda),
            "mean_br" => Ok(Metric::MeanBr),
            "mean_prior" => Ok(Metric::MeanPrior),
            other => Err(CliError::Validation(format!(
                "unknown metric `{other}`; choose one of lambda, mean_br, mean_prior"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Lambda => "lambda",
            Metric::MeanBr => "mean_br",
            Metric::MeanPrior => "mean_prior",
        }
    }

    fn block(self) -> Block {
        match self {
            Metric::Lambda => Block::Lambda,
            Metric::MeanBr => Block::MeanBr,
            Metric::MeanPrior => Block::MeanPrior,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentDiff {
    pub sup: f64,
    pub rms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub metric: String,
    pub components: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub aligned_times: usize,
    pub per_component: Vec<ComponentDiff>,
    pub sup: f64,
    pub rms: f64,
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "metric {} over t in [{}, {}], {} aligned times\n",
            self.metric, self.t_lo, self.t_hi, self.aligned_times
        );
        for (k, c) in self.per_component.iter().enumerate() {
            out.push_str(&format!(
                "  component {}: sup {:.6e}  rms {:.6e}\n",
                k + 1,
                c.sup,
                c.rms
            ));
        }
        out.push_str(&format!("  overall: sup {:.6e}  rms {:.6e}\n", self.sup, self.rms));
        out
    }
}

/// Reads the manifest at `path` and loads the observables CSV it lists.
pub fn load_observables(path: &Path) -> CliResult<ObservableSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("manifest parse error: {e} (in {})", path.display())))?;
    if manifest.file(OBSERVABLES_NAME).is_none() {
        return Err(CliError::Validation(format!(
            "manifest {} lists no {OBSERVABLES_NAME}; the `{}` engine records no observable series",
            path.display(),
            manifest.engine
        )));
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let csv = dir.join(OBSERVABLES_NAME);
    let file = std::fs::File::open(&csv)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", csv.display())))?;
    ObservableSeries::read_csv(BufReader::new(file)).map_err(runtime)
}

/// Sup and RMS differences of one metric between two series, evaluated on
/// the union of their sample times restricted to the overlap window.
pub fn compare_series(
    a: &ObservableSeries,
    b: &ObservableSeries,
    metric: Metric,
) -> CliResult<CompareReport> {
    if a.n() != b.n() {
        return Err(CliError::Validation(format!(
            "metric `{}` has {} components in one run and {} in the other",
            metric.name(),
            a.n(),
            b.n()
        )));
    }
    let n = a.n();
    let t_lo = a.time(0).max(b.time(0));
    let t_hi = a.time(a.len() - 1).min(b.time(b.len() - 1));
    if t_lo > t_hi {
        return Err(CliError::Validation(format!(
            "disjoint time ranges: [{}, {}] and [{}, {}]",
            a.time(0),
            a.time(a.len() - 1),
            b.time(0),
            b.time(b.len() - 1)
        )));
    }

    let mut grid: Vec<f64> = a
        .times()
        .iter()
        .chain(b.times().iter())
        .copied()
        .filter(|&t| t >= t_lo && t <= t_hi)
        .collect();
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup();

    let block = metric.block();
    let mut sup = vec![0.0f64; n];
    let mut sq = vec![0.0f64; n];
    for &t in &grid {
        let ya = a.interp(block, t).ok_or_else(|| {
            CliError::Runtime(format!("time {t} fell outside the first run's range"))
        })?;
        let yb = b.interp(block, t).ok_or_else(|| {
            CliError::Runtime(format!("time {t} fell outside the second run's range"))
        })?;
        for k in 0..n {
            let d = (ya[k] - yb[k]).abs();
            if d > sup[k] {
                sup[k] = d;
            }
            sq[k] += d * d;
        }
    }

    let m = grid.len() as f64;
    let per_component: Vec<ComponentDiff> = (0..n)
        .map(|k| ComponentDiff { sup: sup[k], rms: (sq[k] / m).sqrt() })
        .collect();
    let overall_sup = sup.iter().cloned().fold(0.0, f64::max);
    let overall_rms = (sq.iter().sum::<f64>() / (m * n as f64)).sqrt();
    Ok(CompareReport {
        metric: metric.name().to_string(),
        components: n,
        t_lo,
        t_hi,
        aligned_times: grid.len(),
        per_component,
        sup: overall_sup,
        rms: overall_rms,
    })
}

/// Full compare flow: load both manifests, diff the metric, write the JSON
/// report into `report_dir`, and return (report, rendered text).
pub fn compare_runs(
    manifest_a: &Path,
    manifest_b: &Path,
    metric: Metric,
    report_dir: &Path,
) -> CliResult<(CompareReport, String)> {
    let a = load_observables(manifest_a)?;
    let b = load_observables(manifest_b)?;
    let report = compare_series(&a, &b, metric)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(runtime)?;
    text.push('\n');
    let path = report_dir.join(REPORT_NAME);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    let rendered = report.render();
    Ok((report, rendered))
}
