//! Experiment configuration: a single versioned JSON document that selects
//! an engine, a game, an initial condition, and the run parameters.
//!
//! Parsing is strict: unknown keys are rejected, and every engine checks
//! that exactly its own parameters are present, so a typo or a leftover key
//! fails before any run starts.

use crate::error::{CliError, CliResult};
use fplearn_core::abm::LearningParams;
use fplearn_core::game::{Belief, Game, TieRule};
use fplearn_core::init::InitialDistribution;
use fplearn_core::meanfield::{MeanBR, MeanFieldParams};
use fplearn_core::odes::{OdeMethod, SquareBox};
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Abm,
    Meanfield,
    Box,
    Brd,
    Meanbr2x2,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Abm => "abm",
            EngineKind::Meanfield => "meanfield",
            EngineKind::Box => "box",
            EngineKind::Brd => "brd",
            EngineKind::Meanbr2x2 => "meanbr2x2",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameConfig {
    payoff: Vec<Vec<f64>>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TieConfig {
    #[default]
    LowestIndex,
    Uniform { seed: u64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum InitConfig {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    PointMass { x: Vec<f64> },
    Lattice { lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize> },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MethodConfig {
    Euler,
    Rk4,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsConfig {
    n_agents: Option<usize>,
    particles: Option<usize>,
    h: Option<f64>,
    mu: Option<f64>,
    dt: Option<f64>,
    horizon_t: Option<f64>,
    sample_every: Option<f64>,
    diffusion: Option<bool>,
    method: Option<MethodConfig>,
    lambda0: Option<Vec<f64>>,
    sum0: Option<f64>,
    br0: Option<Vec<f64>>,
    overlap: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    #[serde(default)]
    dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    final_state: bool,
    #[serde(default = "default_true")]
    svg: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, final_state: true, svg: true }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: u32,
    engine: EngineKind,
    game: GameConfig,
    #[serde(default)]
    params: ParamsConfig,
    #[serde(default)]
    init: Option<InitConfig>,
    seed: u64,
    #[serde(default)]
    tie: TieConfig,
    #[serde(default)]
    output: OutputConfig,
}

/// Fully validated experiment, ready to run.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub engine: EngineKind,
    pub game: Game,
    pub tie: TieRule,
    pub seed: u64,
    pub spec: EngineSpec,
    pub out_dir: Option<PathBuf>,
    pub final_state: bool,
    pub svg: bool,
}

#[derive(Clone, Debug)]
pub enum EngineSpec {
    Abm {
        n_agents: usize,
        params: LearningParams,
        dist: InitialDistribution,
        horizon_t: f64,
        sample_every: f64,
    },
    MeanField {
        particles: usize,
        params: MeanFieldParams,
        dist: InitialDistribution,
    },
    BoxModel {
        box0: SquareBox,
        dt: f64,
        horizon_t: f64,
        sample_every: f64,
        method: OdeMethod,
    },
    Brd {
        lambda0: Belief,
        sum0: f64,
        mu: f64,
        dt: f64,
        horizon_t: f64,
        sample_every: f64,
        method: OdeMethod,
    },
    MeanBr {
        br0: MeanBR,
        overlap: f64,
        dt: f64,
        horizon_t: f64,
        method: OdeMethod,
    },
}

impl ExperimentConfig {
    /// Replaces the seed everywhere it flows, including the diffusion
    /// noise seed of a mean-field run.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let EngineSpec::MeanField { params, .. } = &mut self.spec {
            params.seed = seed;
        }
        self
    }
}

/// Reads and validates a configuration document from disk.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| e.with_context(&format!("in {}", path.display())))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let file: ConfigFile = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
    validate(file)
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("key `{key}`: {msg}"))
}

fn require<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| invalid(key, "required by this engine but missing"))
}

fn forbid<T>(v: &Option<T>, key: &str, engine: EngineKind) -> CliResult<()> {
    if v.is_some() {
        return Err(invalid(key, format!("not used by engine `{}`", engine.name())));
    }
    Ok(())
}

struct TakenParams(ParamsConfig);

fn validate(file: ConfigFile) -> CliResult<ExperimentConfig> {
    if file.schema != SCHEMA_VERSION {
        return Err(invalid(
            "schema",
            format!("version {} is not supported (expected {SCHEMA_VERSION})", file.schema),
        ));
    }

    let game = build_game(file.game)?;
    let tie = match file.tie {
        TieConfig::LowestIndex => TieRule::LowestIndex,
        TieConfig::Uniform { seed } => TieRule::Uniform { seed },
    };
    let engine = file.engine;
    let p = TakenParams(file.params);
    let spec = match engine {
        EngineKind::Abm => build_abm(p, file.init, &game, engine)?,
        EngineKind::Meanfield => build_meanfield(p, file.init, &game, engine, file.seed)?,
        EngineKind::Box => build_box(p, file.init, &game, engine)?,
        EngineKind::Brd => build_brd(p, file.init, &game, engine)?,
        EngineKind::Meanbr2x2 => build_meanbr(p, file.init, &game, engine)?,
    };
    if file.output.svg && game.n() != 2 {
        return Err(invalid(
            "output.svg",
            "scatter output needs a 2-action game; set it to false",
        ));
    }

    Ok(ExperimentConfig {
        engine,
        game,
        tie,
        seed: file.seed,
        spec,
        out_dir: file.output.dir,
        final_state: file.output.final_state,
        svg: file.output.svg,
    })
}

fn build_game(cfg: GameConfig) -> CliResult<Game> {
    let game = match cfg.labels {
        Some(labels) => Game::with_labels(cfg.payoff, labels),
        None => Game::new(cfg.payoff),
    };
    game.map_err(|e| invalid("game.payoff", e))
}

fn build_dist(init: Option<InitConfig>, game_n: usize) -> CliResult<InitialDistribution> {
    let init = require(init, "init")?;
    let dist = match init {
        InitConfig::UniformBox { lo, hi } => InitialDistribution::UniformBox { lo, hi },
        InitConfig::PointMass { x } => InitialDistribution::PointMass { x },
        InitConfig::Lattice { lo, hi, counts } => InitialDistribution::Lattice { lo, hi, counts },
    };
    dist.validate().map_err(|e| invalid("init", e))?;
    if dist.dim() != game_n {
        return Err(invalid(
            "init",
            format!("dimension {} does not match the {game_n}-action game", dist.dim()),
        ));
    }
    Ok(dist)
}

fn positive(v: f64, key: &str) -> CliResult<f64> {
    if !v.is_finite() || v <= 0.0 {
        return Err(invalid(key, format!("{v} must be positive and finite")));
    }
    Ok(v)
}

fn check_memory_factor(mu: f64, h: f64) -> CliResult<()> {
    if !(0.0..=1.0).contains(&(mu * h)) {
        return Err(invalid(
            "params.mu",
            format!("memory factor mu*h = {} must lie in [0, 1]", mu * h),
        ));
    }
    Ok(())
}

fn method_of(m: Option<MethodConfig>) -> OdeMethod {
    match m.unwrap_or(MethodConfig::Euler) {
        MethodConfig::Euler => OdeMethod::Euler,
        MethodConfig::Rk4 => OdeMethod::Rk4,
    }
}

fn build_abm(
    p: TakenParams,
    init: Option<InitConfig>,
    game: &Game,
    engine: EngineKind,
) -> CliResult<EngineSpec> {
    let p = p.0;
    forbid(&p.particles, "params.particles", engine)?;
    forbid(&p.dt, "params.dt", engine)?;
    forbid(&p.diffusion, "params.diffusion", engine)?;
    forbid(&p.method, "params.method", engine)?;
    forbid(&p.lambda0, "params.lambda0", engine)?;
    forbid(&p.sum0, "params.sum0", engine)?;
    forbid(&p.br0, "params.br0", engine)?;
    forbid(&p.overlap, "params.overlap", engine)?;

    let n_agents = require(p.n_agents, "params.n_agents")?;
    let h = positive(require(p.h, "params.h")?, "params.h")?;
    let mu = p.mu.unwrap_or(0.0);
    if !mu.is_finite() || mu < 0.0 {
        return Err(invalid("params.mu", format!("{mu} must be nonnegative")));
    }
    check_memory_factor(mu, h)?;
    let params = LearningParams::new(h, mu).map_err(|e| invalid("params", e))?;
    let horizon_t = positive(require(p.horizon_t, "params.horizon_t")?, "params.horizon_t")?;
    let sample_every =
        positive(require(p.sample_every, "params.sample_every")?, "params.sample_every")?;
    let dist = build_dist(init, game.n())?;
    Ok(EngineSpec::Abm { n_agents, params, dist, horizon_t, sample_every })
}

fn build_meanfield(
    p: TakenParams,
    init: Option<InitConfig>,
    game: &Game,
    engine: EngineKind,
    seed: u64,
) -> CliResult<EngineSpec> {
    let p = p.0;
    forbid(&p.n_agents, "params.n_agents", engine)?;
    forbid(&p.method, "params.method", engine)?;
    forbid(&p.lambda0, "params.lambda0", engine)?;
    forbid(&p.sum0, "params.sum0", engine)?;
    forbid(&p.br0, "params.br0", engine)?;
    forbid(&p.overlap, "params.overlap", engine)?;

    let particles = require(p.particles, "params.particles")?;
    let diffusion = p.diffusion.unwrap_or(false);
    let h = match (diffusion, p.h) {
        (true, Some(h)) => positive(h, "params.h")?,
        (true, None) => return Err(invalid("params.h", "required when diffusion is on")),
        (false, Some(_)) => {
            return Err(invalid("params.h", "set but params.diffusion is off; remove one"))
        }
        (false, None) => 0.0,
    };
    let mu = p.mu.unwrap_or(0.0);
    if !mu.is_finite() || mu < 0.0 {
        return Err(invalid("params.mu", format!("{mu} must be nonnegative")));
    }
    let dt = positive(require(p.dt, "params.dt")?, "params.dt")?;
    let horizon_t = positive(require(p.horizon_t, "params.horizon_t")?, "params.horizon_t")?;
    let sample_every =
        positive(require(p.sample_every, "params.sample_every")?, "params.sample_every")?;
    let dist = build_dist(init, game.n())?;
    let params =
        MeanFieldParams { mu, h, dt, horizon_t, sample_every, diffusion, seed };
    Ok(EngineSpec::MeanField { particles, params, dist })
}

fn build_box(
    p: TakenParams,
    init: Option<InitConfig>,
    game: &Game,
    engine: EngineKind,
) -> CliResult<EngineSpec> {
    let p = p.0;
    forbid(&p.n_agents, "params.n_agents", engine)?;
    forbid(&p.particles, "params.particles", engine)?;
    forbid(&p.h, "params.h", engine)?;
    forbid(&p.mu, "params.mu", engine)?;
    forbid(&p.diffusion, "params.diffusion", engine)?;
    forbid(&p.lambda0, "params.lambda0", engine)?;
    forbid(&p.sum0, "params.sum0", engine)?;
    forbid(&p.br0, "params.br0", engine)?;
    forbid(&p.overlap, "params.overlap", engine)?;

    if game.n() != 2 {
        return Err(invalid("game.payoff", "the box engine needs a 2-action game"));
    }
    let init = require(init, "init")?;
    let box0 = match init {
        InitConfig::UniformBox { lo, hi } => {
            if lo.len() != 2 || hi.len() != 2 {
                return Err(invalid("init", "the box engine needs a 2-dimensional box"));
            }
            let sides = [hi[0] - lo[0], hi[1] - lo[1]];
            if (sides[0] - sides[1]).abs() > 1e-12 * sides[0].abs().max(1.0) {
                return Err(invalid(
                    "init",
                    format!("box sides {} and {} differ; the box model moves a square", sides[0], sides[1]),
                ));
            }
            let center = vec![0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            SquareBox::new(center, sides[0]).map_err(|e| invalid("init", e))?
        }
        _ => return Err(invalid("init", "the box engine needs a uniform_box initial condition")),
    };
    let dt = positive(require(p.dt, "params.dt")?, "params.dt")?;
    let horizon_t = positive(require(p.horizon_t, "params.horizon_t")?, "params.horizon_t")?;
    let sample_every =
        positive(require(p.sample_every, "params.sample_every")?, "params.sample_every")?;
    Ok(EngineSpec::BoxModel { box0, dt, horizon_t, sample_every, method: method_of(p.method) })
}

fn build_brd(
    p: TakenParams,
    init: Option<InitConfig>,
    game: &Game,
    engine: EngineKind,
) -> CliResult<EngineSpec> {
    let p = p.0;
    if init.is_some() {
        return Err(invalid("init", format!("not used by engine `{}`", engine.name())));
    }
    forbid(&p.n_agents, "params.n_agents", engine)?;
    forbid(&p.particles, "params.particles", engine)?;
    forbid(&p.h, "params.h", engine)?;
    forbid(&p.diffusion, "params.diffusion", engine)?;
    forbid(&p.br0, "params.br0", engine)?;
    forbid(&p.overlap, "params.overlap", engine)?;

    let lambda0 = require(p.lambda0, "params.lambda0")?;
    let lambda0 = Belief::new(lambda0).map_err(|e| invalid("params.lambda0", e))?;
    if lambda0.len() != game.n() {
        return Err(invalid(
            "params.lambda0",
            format!("has {} entries for a {}-action game", lambda0.len(), game.n()),
        ));
    }
    let sum0 = positive(require(p.sum0, "params.sum0")?, "params.sum0")?;
    let mu = p.mu.unwrap_or(0.0);
    if !mu.is_finite() || mu < 0.0 {
        return Err(invalid("params.mu", format!("{mu} must be nonnegative")));
    }
    let dt = positive(require(p.dt, "params.dt")?, "params.dt")?;
    let horizon_t = positive(require(p.horizon_t, "params.horizon_t")?, "params.horizon_t")?;
    let sample_every =
        positive(require(p.sample_every, "params.sample_every")?, "params.sample_every")?;
    Ok(EngineSpec::Brd {
        lambda0,
        sum0,
        mu,
        dt,
        horizon_t,
        sample_every,
        method: method_of(p.method),
    })
}

fn build_meanbr(
    p: TakenParams,
    init: Option<InitConfig>,
    game: &Game,
    engine: EngineKind,
) -> CliResult<EngineSpec> {
    let p = p.0;
    if init.is_some() {
        return Err(invalid("init", format!("not used by engine `{}`", engine.name())));
    }
    forbid(&p.n_agents, "params.n_agents", engine)?;
    forbid(&p.particles, "params.particles", engine)?;
    forbid(&p.h, "params.h", engine)?;
    forbid(&p.mu, "params.mu", engine)?;
    forbid(&p.diffusion, "params.diffusion", engine)?;
    forbid(&p.lambda0, "params.lambda0", engine)?;
    forbid(&p.sum0, "params.sum0", engine)?;
    forbid(&p.sample_every, "params.sample_every", engine)?;

    if game.n() != 2 {
        return Err(invalid("game.payoff", "the mean-BR equation is for 2-action games"));
    }
    let br0 = require(p.br0, "params.br0")?;
    let br0 = MeanBR::new(br0).map_err(|e| invalid("params.br0", e))?;
    let overlap = require(p.overlap, "params.overlap")?;
    if !overlap.is_finite() || overlap < 0.0 {
        return Err(invalid("params.overlap", format!("{overlap} must be nonnegative")));
    }
    let dt = positive(require(p.dt, "params.dt")?, "params.dt")?;
    let horizon_t = positive(require(p.horizon_t, "params.horizon_t")?, "params.horizon_t")?;
    Ok(EngineSpec::MeanBr { br0, overlap, dt, horizon_t, method: method_of(p.method) })
}
