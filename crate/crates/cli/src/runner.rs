//! Experiment execution: dispatches a validated configuration to its
//! engine, writes the artifacts (observables CSV, final-state CSV, solution
//! CSV, scatter SVG), and records every file with its content hash in a
//! manifest. Identical configuration and seed produce identical bytes. On
//! failure, files already written for the run are removed.

use crate::config::{EngineSpec, ExperimentConfig};
use crate::error::{runtime, CliError, CliResult};
use crate::svg::{render_scatter, Overlay};
use fplearn_core::abm::{init_population, plays_for_time, run_abm, Population};
use fplearn_core::game::{best_response_prior, Game};
use fplearn_core::init::InitialDistribution;
use fplearn_core::meanfield::{init_ensemble, run_meanfield, Ensemble};
use fplearn_core::odes::{
    box_mean_belief, box_mean_br_2x2, integrate_box_center, integrate_brd, integrate_meanbr_2x2,
    OdeMethod, OdeSolution, SquareBox,
};
use fplearn_core::series::{fmt_g17, ObservableSeries};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const OBSERVABLES_NAME: &str = "observables.csv";
pub const SOLUTION_NAME: &str = "solution.csv";
pub const FINAL_STATE_NAME: &str = "final_state.csv";
pub const SCATTER_NAME: &str = "scatter.svg";

/// Quadrature resolution for the box engine's mean-belief observable.
const BELIEF_CELLS: usize = 64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_events: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub engine: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    pub stats: RunSummary,
}

impl Manifest {
    pub fn file(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

struct ArtifactSink {
    dir: PathBuf,
    files: Vec<FileEntry>,
    written: Vec<PathBuf>,
}

impl ArtifactSink {
    fn new(dir: &Path) -> Self {
        ArtifactSink { dir: dir.to_path_buf(), files: Vec::new(), written: Vec::new() }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let digest = hasher.finalize();
        let sha256 = digest.iter().fold(String::with_capacity(64), |mut acc, b| {
            let _ = write!(acc, "{b:02x}");
            acc
        });
        self.files.push(FileEntry { name: name.to_string(), sha256, bytes: bytes.len() as u64 });
        Ok(())
    }

    fn cleanup(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Runs the experiment and writes all artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult<RunArtifacts> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut sink = ArtifactSink::new(out_dir);
    match dispatch(cfg, &mut sink).and_then(|stats| finish(cfg, stats, &mut sink)) {
        Ok(artifacts) => Ok(artifacts),
        Err(e) => {
            sink.cleanup();
            Err(e)
        }
    }
}

fn finish(cfg: &ExperimentConfig, stats: RunSummary, sink: &mut ArtifactSink) -> CliResult<RunArtifacts> {
    let manifest = Manifest {
        schema: crate::config::SCHEMA_VERSION,
        engine: cfg.engine.name().to_string(),
        seed: cfg.seed,
        files: sink.files.clone(),
        stats,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    text.push('\n');
    let manifest_path = sink.dir.join(MANIFEST_NAME);
    std::fs::write(&manifest_path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", manifest_path.display())))?;
    sink.written.push(manifest_path.clone());
    Ok(RunArtifacts { dir: sink.dir.clone(), manifest_path, manifest })
}

fn dispatch(cfg: &ExperimentConfig, sink: &mut ArtifactSink) -> CliResult<RunSummary> {
    match &cfg.spec {
        EngineSpec::Abm { n_agents, params, dist, horizon_t, sample_every } => run_abm_engine(
            cfg,
            *n_agents,
            params,
            dist,
            *horizon_t,
            *sample_every,
            sink,
        ),
        EngineSpec::MeanField { particles, params, dist } => {
            run_meanfield_engine(cfg, *particles, params, dist, sink)
        }
        EngineSpec::BoxModel { box0, dt, horizon_t, sample_every, method } => {
            run_box_engine(cfg, box0, *dt, *horizon_t, *sample_every, *method, sink)
        }
        EngineSpec::Brd { lambda0, sum0, mu, dt, horizon_t, sample_every, method } => {
            run_brd_engine(cfg, lambda0, *sum0, *mu, *dt, *horizon_t, *sample_every, *method, sink)
        }
        EngineSpec::MeanBr { br0, overlap, dt, horizon_t, method } => {
            run_meanbr_engine(cfg, br0, *overlap, *dt, *horizon_t, *method, sink)
        }
    }
}

fn series_csv(series: &ObservableSeries) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).map_err(runtime)?;
    Ok(buf)
}

fn solution_csv(sol: &OdeSolution) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    sol.write_csv(&mut buf).map_err(runtime)?;
    Ok(buf)
}

/// Overlays for a population scatter: the diagonal, the initial support
/// box, and, in the memoryless case where transport moves rigidly, the
/// box-model prediction of the final support.
fn population_overlays(
    game: &Game,
    dist: &InitialDistribution,
    mu: f64,
    dt: f64,
    horizon_t: f64,
) -> CliResult<Vec<Overlay>> {
    let mut overlays = vec![Overlay::Diagonal];
    if let InitialDistribution::UniformBox { lo, hi } = dist {
        if lo.len() == 2 {
            overlays.push(Overlay::BoxOutline { lo: [lo[0], lo[1]], hi: [hi[0], hi[1]] });
            let sides = [hi[0] - lo[0], hi[1] - lo[1]];
            if mu == 0.0 && (sides[0] - sides[1]).abs() <= 1e-9 * sides[0].max(1.0) {
                let center = vec![0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
                let box0 = SquareBox::new(center, sides[0]).map_err(runtime)?;
                let sol = integrate_box_center(&box0, game, dt, horizon_t, OdeMethod::Euler)
                    .map_err(runtime)?;
                let c = sol.last_state();
                let r = 0.5 * sides[0];
                overlays.push(Overlay::BoxOutline {
                    lo: [c[0] - r, c[1] - r],
                    hi: [c[0] + r, c[1] + r],
                });
            }
        }
    }
    Ok(overlays)
}

fn run_abm_engine(
    cfg: &ExperimentConfig,
    n_agents: usize,
    params: &fplearn_core::abm::LearningParams,
    dist: &InitialDistribution,
    horizon_t: f64,
    sample_every: f64,
    sink: &mut ArtifactSink,
) -> CliResult<RunSummary> {
    let mut pop = init_population(n_agents, cfg.game.n(), dist, cfg.seed).map_err(runtime)?;
    let series =
        run_abm(&mut pop, &cfg.game, params, horizon_t, sample_every, cfg.tie).map_err(runtime)?;
    sink.write(OBSERVABLES_NAME, &series_csv(&series)?)?;

    if cfg.final_state {
        sink.write(FINAL_STATE_NAME, population_csv(&pop).as_bytes())?;
    }
    if cfg.svg {
        let points: Vec<[f64; 2]> =
            (0..pop.n_agents()).map(|i| [pop.prior(i)[0], pop.prior(i)[1]]).collect();
        let overlays = population_overlays(&cfg.game, dist, params.mu(), 1e-3, horizon_t)?;
        let svg = render_scatter(&points, &overlays, "x_1", "x_2");
        sink.write(SCATTER_NAME, svg.as_bytes())?;
    }
    let rounds = plays_for_time(horizon_t, n_agents, params.h()).map_err(runtime)?;
    Ok(RunSummary { rounds: Some(rounds), steps: None, clip_events: None })
}

fn population_csv(pop: &Population) -> String {
    let n = pop.prior(0).len();
    let mut out = String::new();
    out.push_str("agent_id");
    for k in 1..=n {
        let _ = write!(out, ",x_{k}");
    }
    out.push('\n');
    for i in 0..pop.n_agents() {
        let _ = write!(out, "{i}");
        for v in pop.prior(i) {
            let _ = write!(out, ",{}", fmt_g17(*v));
        }
        out.push('\n');
    }
    out
}

fn run_meanfield_engine(
    cfg: &ExperimentConfig,
    particles: usize,
    params: &fplearn_core::meanfield::MeanFieldParams,
    dist: &InitialDistribution,
    sink: &mut ArtifactSink,
) -> CliResult<RunSummary> {
    let mut ens = init_ensemble(dist, particles, cfg.seed).map_err(runtime)?;
    let (series, stats) = run_meanfield(&mut ens, &cfg.game, params, cfg.tie).map_err(runtime)?;
    sink.write(OBSERVABLES_NAME, &series_csv(&series)?)?;

    if cfg.final_state {
        sink.write(FINAL_STATE_NAME, ensemble_csv(&ens).as_bytes())?;
    }
    if cfg.svg {
        let points: Vec<[f64; 2]> =
            ens.positions().chunks(2).map(|x| [x[0], x[1]]).collect();
        let overlays =
            population_overlays(&cfg.game, dist, params.mu, params.dt, params.horizon_t)?;
        let svg = render_scatter(&points, &overlays, "x_1", "x_2");
        sink.write(SCATTER_NAME, svg.as_bytes())?;
    }
    Ok(RunSummary { rounds: None, steps: Some(stats.steps), clip_events: Some(stats.clip_events) })
}

fn ensemble_csv(ens: &Ensemble) -> String {
    let n = ens.n();
    let mut out = String::new();
    out.push_str("particle_id,weight");
    for k in 1..=n {
        let _ = write!(out, ",x_{k}");
    }
    out.push('\n');
    for (i, x) in ens.positions().chunks(n).enumerate() {
        let _ = write!(out, "{i},{}", fmt_g17(ens.weight(i)));
        for v in x {
            let _ = write!(out, ",{}", fmt_g17(*v));
        }
        out.push('\n');
    }
    out
}

/// Indices of the solution rows landing on the observable sampling grid:
/// every `sample_every` of time, plus the final row.
fn sample_indices(sol: &OdeSolution, sample_every: f64) -> Vec<usize> {
    let stride = ((sample_every / sol.dt()).round() as usize).max(1);
    let mut idx: Vec<usize> = (0..sol.len()).step_by(stride).collect();
    if *idx.last().unwrap() != sol.len() - 1 {
        idx.push(sol.len() - 1);
    }
    idx
}

fn run_box_engine(
    cfg: &ExperimentConfig,
    box0: &SquareBox,
    dt: f64,
    horizon_t: f64,
    sample_every: f64,
    method: OdeMethod,
    sink: &mut ArtifactSink,
) -> CliResult<RunSummary> {
    let sol = integrate_box_center(box0, &cfg.game, dt, horizon_t, method).map_err(runtime)?;
    sink.write(SOLUTION_NAME, &solution_csv(&sol)?)?;

    let side = box0.side();
    let mut series = ObservableSeries::new(2);
    let mut points = Vec::new();
    for i in sample_indices(&sol, sample_every) {
        let c = sol.state(i);
        let bx = SquareBox::new(c.to_vec(), side).map_err(runtime)?;
        let lambda = box_mean_belief(&bx, BELIEF_CELLS).map_err(runtime)?;
        let brbar = box_mean_br_2x2(&bx, &cfg.game).map_err(runtime)?;
        let r = 0.5 * side;
        series
            .push_row(
                sol.time(i),
                &lambda,
                brbar.as_slice(),
                c,
                &[c[0] - r, c[1] - r],
                &[c[0] + r, c[1] + r],
            )
            .map_err(runtime)?;
        points.push([c[0], c[1]]);
    }
    sink.write(OBSERVABLES_NAME, &series_csv(&series)?)?;

    if cfg.svg {
        let r = 0.5 * side;
        let first = sol.state(0);
        let last = sol.last_state();
        let overlays = vec![
            Overlay::Diagonal,
            Overlay::BoxOutline {
                lo: [first[0] - r, first[1] - r],
                hi: [first[0] + r, first[1] + r],
            },
            Overlay::BoxOutline { lo: [last[0] - r, last[1] - r], hi: [last[0] + r, last[1] + r] },
        ];
        let svg = render_scatter(&points, &overlays, "x_1", "x_2");
        sink.write(SCATTER_NAME, svg.as_bytes())?;
    }
    Ok(RunSummary { rounds: None, steps: Some(sol.len() as u64 - 1), clip_events: None })
}

#[allow(clippy::too_many_arguments)]
fn run_brd_engine(
    cfg: &ExperimentConfig,
    lambda0: &fplearn_core::game::Belief,
    sum0: f64,
    mu: f64,
    dt: f64,
    horizon_t: f64,
    sample_every: f64,
    method: OdeMethod,
    sink: &mut ArtifactSink,
) -> CliResult<RunSummary> {
    let sol = integrate_brd(lambda0, sum0, mu, &cfg.game, cfg.tie, dt, horizon_t, method)
        .map_err(runtime)?;
    sink.write(SOLUTION_NAME, &solution_csv(&sol)?)?;

    let n = cfg.game.n();
    let mut series = ObservableSeries::new(n);
    let mut points = Vec::new();
    for i in sample_indices(&sol, sample_every) {
        let y = sol.state(i);
        let (lambda, s) = y.split_at(n);
        let idx = best_response_prior(&cfg.game, lambda, cfg.tie);
        let brbar: Vec<f64> = (0..n).map(|k| if k == idx { 1.0 } else { 0.0 }).collect();
        let mean_prior: Vec<f64> = lambda.iter().map(|l| l * s[0]).collect();
        series
            .push_row(sol.time(i), lambda, &brbar, &mean_prior, &mean_prior, &mean_prior)
            .map_err(runtime)?;
        if n == 2 {
            points.push([mean_prior[0], mean_prior[1]]);
        }
    }
    sink.write(OBSERVABLES_NAME, &series_csv(&series)?)?;

    if cfg.svg {
        let svg = render_scatter(&points, &[Overlay::Diagonal], "x_1", "x_2");
        sink.write(SCATTER_NAME, svg.as_bytes())?;
    }
    Ok(RunSummary { rounds: None, steps: Some(sol.len() as u64 - 1), clip_events: None })
}

fn run_meanbr_engine(
    cfg: &ExperimentConfig,
    br0: &fplearn_core::meanfield::MeanBR,
    overlap: f64,
    dt: f64,
    horizon_t: f64,
    method: OdeMethod,
    sink: &mut ArtifactSink,
) -> CliResult<RunSummary> {
    let sol =
        integrate_meanbr_2x2(br0, |_| overlap, dt, horizon_t, method).map_err(runtime)?;
    sink.write(SOLUTION_NAME, &solution_csv(&sol)?)?;

    if cfg.svg {
        let stride = (sol.len() / 500).max(1);
        let mut points: Vec<[f64; 2]> = (0..sol.len())
            .step_by(stride)
            .map(|i| [sol.state(i)[0], sol.state(i)[1]])
            .collect();
        let last = sol.last_state();
        if points.last() != Some(&[last[0], last[1]]) {
            points.push([last[0], last[1]]);
        }
        let svg = render_scatter(&points, &[Overlay::Diagonal], "br_1", "br_2");
        sink.write(SCATTER_NAME, svg.as_bytes())?;
    }
    Ok(RunSummary { rounds: None, steps: Some(sol.len() as u64 - 1), clip_events: None })
}
