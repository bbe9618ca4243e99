//! The exact agent-based process.
//!
//! `N` agents each hold a prior `x` of decayed opponent-action counts. Each
//! round one uniformly random ordered pair plays: both sides best respond to
//! their own normalized prior and then update with the action the opponent
//! actually took,
//!
//! ```text
//! x  <-  (1 - mu h) x + h e_a,      a = opponent's action,
//! ```
//!
//! with learning rate `h > 0` and memory factor `mu h` in `[0, 1]`. One
//! round advances macroscopic time by `delta = 2h / N`, so both agents'
//! updates together contribute one unit of mass per `h` of time.

use crate::error::{Error, Result};
use crate::exec::{self, Backend};
use crate::game::{best_response_prior, Game, TieRule};
use crate::init::InitialDistribution;
use crate::rng::{substream, SimRng, Stream};
use crate::series::ObservableSeries;
use rand::Rng;

/// Learning rate and memory factor, validated together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningParams {
    h: f64,
    mu: f64,
}

impl LearningParams {
    /// Requires `h > 0`, `mu >= 0`, and `mu * h <= 1` so the decayed prior
    /// can never turn negative.
    pub fn new(h: f64, mu: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::InvalidParams(format!("learning rate h = {h} must be positive")));
        }
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParams(format!("memory rate mu = {mu} must be nonnegative")));
        }
        let mu_h = mu * h;
        if mu_h > 1.0 {
            return Err(Error::InvalidParams(format!(
                "memory factor mu * h = {mu_h} is outside [0, 1]"
            )));
        }
        Ok(LearningParams { h, mu })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The per-update decay `1 - mu h`.
    pub fn decay(&self) -> f64 {
        1.0 - self.mu * self.h
    }
}

/// One agent's vector of decayed opponent-action counts.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorVector(Vec<f64>);

impl PriorVector {
    /// Entries must be finite and nonnegative with positive sum.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidPrior(format!("need at least 2 entries, got {}", x.len())));
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "entry {i} = {v} is not a finite nonnegative count"
                )));
            }
        }
        if x.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidPrior("counts sum to zero".into()));
        }
        Ok(PriorVector(x))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Decays all counts and credits the opponent's action: the in-place form of
/// the prior update rule.
#[inline]
pub(crate) fn decay_and_bump(x: &mut [f64], action: usize, decay: f64, h: f64) {
    for v in x.iter_mut() {
        *v *= decay;
    }
    x[action] += h;
}

/// The prior update rule `x <- (1 - mu h) x + h e_a`.
pub fn update_prior(x: &PriorVector, opponent_action: usize, params: &LearningParams) -> Result<PriorVector> {
    if opponent_action >= x.as_slice().len() {
        return Err(Error::InvalidParams(format!(
            "action {opponent_action} out of range for {} actions",
            x.as_slice().len()
        )));
    }
    let mut y = x.as_slice().to_vec();
    decay_and_bump(&mut y, opponent_action, params.decay(), params.h());
    PriorVector::new(y)
}

/// A finite population of learning agents.
#[derive(Clone, Debug)]
pub struct Population {
    n_actions: usize,
    counts: Vec<f64>,
    play_count: u64,
    pairing_rng: SimRng,
    seed: u64,
}

impl Population {
    pub fn n_agents(&self) -> usize {
        self.counts.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Rounds played so far.
    pub fn play_count(&self) -> u64 {
        self.play_count
    }

    /// Master seed the population was initialized with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Prior of agent `i`.
    pub fn prior(&self, i: usize) -> &[f64] {
        &self.counts[i * self.n_actions..(i + 1) * self.n_actions]
    }

    /// All priors, one agent at a time.
    pub fn priors(&self) -> impl Iterator<Item = &[f64]> {
        self.counts.chunks(self.n_actions)
    }

    fn priors_pair_mut(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert_ne!(i, j);
        let n = self.n_actions;
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (head, tail) = self.counts.split_at_mut(hi * n);
        let first = &mut head[lo * n..(lo + 1) * n];
        let second = &mut tail[..n];
        if i < j {
            (first, second)
        } else {
            (second, first)
        }
    }
}

/// Draws `n_agents` initial priors from `dist` using the population-init
/// sub-stream of `seed`. A `Lattice` distribution is a deterministic point
/// set, so agents are assigned its points round-robin instead of sampling.
pub fn init_population(
    n_agents: usize,
    n_actions: usize,
    dist: &InitialDistribution,
    seed: u64,
) -> Result<Population> {
    if n_agents < 2 {
        return Err(Error::PopulationTooSmall(n_agents));
    }
    if dist.dim() != n_actions {
        return Err(Error::DimensionMismatch { expected: n_actions, got: dist.dim() });
    }
    dist.validate()?;

    let mut counts = vec![0.0; n_agents * n_actions];
    if let Some(points) = dist.lattice_points() {
        let size = points.len() / n_actions;
        for agent in 0..n_agents {
            let p = agent % size;
            counts[agent * n_actions..(agent + 1) * n_actions]
                .copy_from_slice(&points[p * n_actions..(p + 1) * n_actions]);
        }
    } else {
        let mut rng = substream(seed, Stream::PopulationInit);
        for chunk in counts.chunks_mut(n_actions) {
            dist.sample_into(&mut rng, chunk);
        }
    }

    Ok(Population {
        n_actions,
        counts,
        play_count: 0,
        pairing_rng: substream(seed, Stream::Pairing),
        seed,
    })
}

/// Number of rounds corresponding to macroscopic time `t`: `round(t N / 2h)`.
pub fn plays_for_time(t: f64, n_agents: usize, h: f64) -> Result<u64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParams(format!("time t = {t} must be nonnegative")));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParams(format!("learning rate h = {h} must be positive")));
    }
    if n_agents < 2 {
        return Err(Error::PopulationTooSmall(n_agents));
    }
    let raw = (t * n_agents as f64 / (2.0 * h)).round();
    if raw >= u64::MAX as f64 {
        return Err(Error::InvalidParams(format!("round count {raw} overflows")));
    }
    Ok(raw as u64)
}

/// Plays one round: a uniformly random ordered pair of distinct agents best
/// respond to their priors and both update with the opponent's action.
///
/// The round loop is inherently sequential (every round mutates the shared
/// population the next round samples from), so this consumes the pairing
/// stream in program order and there is no parallel variant.
pub fn play_round(pop: &mut Population, game: &Game, params: &LearningParams, tie: TieRule) -> Result<()> {
    let n_agents = pop.n_agents();
    if n_agents < 2 {
        return Err(Error::PopulationTooSmall(n_agents));
    }
    if pop.n_actions != game.n() {
        return Err(Error::DimensionMismatch { expected: game.n(), got: pop.n_actions });
    }

    let i = pop.pairing_rng.gen_range(0..n_agents);
    let mut j = pop.pairing_rng.gen_range(0..n_agents - 1);
    if j >= i {
        j += 1;
    }

    let decay = params.decay();
    let h = params.h();
    let (xi, xj) = pop.priors_pair_mut(i, j);
    let act_i = best_response_prior(game, xi, tie);
    let act_j = best_response_prior(game, xj, tie);
    decay_and_bump(xi, act_j, decay, h);
    decay_and_bump(xj, act_i, decay, h);
    pop.play_count += 1;
    Ok(())
}

/// Instantaneous population observables.
#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    /// Mean normalized prior (the population's mean belief).
    pub lambda: Vec<f64>,
    /// Fraction of agents best responding with each action.
    pub mean_br: Vec<f64>,
    /// Mean raw prior.
    pub mean_prior: Vec<f64>,
    /// Coordinatewise prior minima.
    pub bbox_lo: Vec<f64>,
    /// Coordinatewise prior maxima.
    pub bbox_hi: Vec<f64>,
}

/// Computes [`Observables`] on the default backend.
pub fn observables(pop: &Population, game: &Game, tie: TieRule) -> Result<Observables> {
    observables_with(Backend::default(), pop, game, tie)
}

/// Computes [`Observables`] by a chunked reduction over agents; the result
/// is bit-identical across backends.
pub fn observables_with(
    backend: Backend,
    pop: &Population,
    game: &Game,
    tie: TieRule,
) -> Result<Observables> {
    let n = pop.n_actions;
    if n != game.n() {
        return Err(Error::DimensionMismatch { expected: game.n(), got: n });
    }

    struct Partial {
        belief: Vec<f64>,
        br: Vec<f64>,
        prior: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    }

    let partials: Vec<Result<Partial>> = exec::map_chunks(backend, &pop.counts, n, |_, chunk| {
        let mut p = Partial {
            belief: vec![0.0; n],
            br: vec![0.0; n],
            prior: vec![0.0; n],
            lo: vec![f64::INFINITY; n],
            hi: vec![f64::NEG_INFINITY; n],
        };
        for x in chunk.chunks(n) {
            let sum: f64 = x.iter().sum();
            if x.iter().any(|v| !v.is_finite()) || sum <= 0.0 {
                return Err(Error::InvalidPrior(format!("agent prior {x:?} left the state space")));
            }
            for (k, &v) in x.iter().enumerate() {
                p.belief[k] += v / sum;
                p.prior[k] += v;
                p.lo[k] = p.lo[k].min(x[k]);
                p.hi[k] = p.hi[k].max(x[k]);
            }
            p.br[best_response_prior(game, x, tie)] += 1.0;
        }
        Ok(p)
    });

    let n_agents = pop.n_agents() as f64;
    let mut lambda = vec![0.0; n];
    let mut mean_br = vec![0.0; n];
    let mut mean_prior = vec![0.0; n];
    let mut bbox_lo = vec![f64::INFINITY; n];
    let mut bbox_hi = vec![f64::NEG_INFINITY; n];
    for partial in partials {
        let p = partial?;
        for k in 0..n {
            lambda[k] += p.belief[k];
            mean_br[k] += p.br[k];
            mean_prior[k] += p.prior[k];
            bbox_lo[k] = bbox_lo[k].min(p.lo[k]);
            bbox_hi[k] = bbox_hi[k].max(p.hi[k]);
        }
    }
    for k in 0..n {
        lambda[k] /= n_agents;
        mean_br[k] /= n_agents;
        mean_prior[k] /= n_agents;
    }
    Ok(Observables { lambda, mean_br, mean_prior, bbox_lo, bbox_hi })
}

/// Runs the process to macroscopic time `horizon_t`, recording observables
/// at `t = 0`, every multiple of `sample_every`, and the final round.
pub fn run_abm(
    pop: &mut Population,
    game: &Game,
    params: &LearningParams,
    horizon_t: f64,
    sample_every: f64,
    tie: TieRule,
) -> Result<ObservableSeries> {
    run_abm_with(Backend::default(), pop, game, params, horizon_t, sample_every, tie)
}

/// Sample rounds for the grid `m * sample_every` over `[0, horizon]`, plus
/// the final round, strictly increasing.
fn sample_rounds(horizon: f64, sample_every: f64, delta: f64, total: u64) -> Vec<u64> {
    let mut rounds = Vec::new();
    let mut m = 0u64;
    loop {
        let tau = m as f64 * sample_every;
        if tau > horizon * (1.0 + 1e-12) {
            break;
        }
        let k = ((tau / delta - 1e-9).ceil().max(0.0) as u64).min(total);
        if rounds.last() != Some(&k) {
            rounds.push(k);
        }
        m += 1;
    }
    if rounds.last() != Some(&total) {
        rounds.push(total);
    }
    rounds
}

/// As [`run_abm`] with an explicit backend for the observable reductions.
pub fn run_abm_with(
    backend: Backend,
    pop: &mut Population,
    game: &Game,
    params: &LearningParams,
    horizon_t: f64,
    sample_every: f64,
    tie: TieRule,
) -> Result<ObservableSeries> {
    if !sample_every.is_finite() || sample_every <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "sample interval {sample_every} must be positive"
        )));
    }
    let n_agents = pop.n_agents();
    let delta = 2.0 * params.h() / n_agents as f64;
    let total = plays_for_time(horizon_t, n_agents, params.h())?;
    let rounds = sample_rounds(horizon_t, sample_every, delta, total);

    let mut series = ObservableSeries::new(pop.n_actions);
    let record = |pop: &Population, k: u64, series: &mut ObservableSeries| -> Result<()> {
        let obs = observables_with(backend, pop, game, tie)?;
        series.push_row(
            k as f64 * delta,
            &obs.lambda,
            &obs.mean_br,
            &obs.mean_prior,
            &obs.bbox_lo,
            &obs.bbox_hi,
        )
    };

    let mut next = rounds.iter().copied().peekable();
    if next.peek() == Some(&0) {
        record(pop, 0, &mut series)?;
        next.next();
    }
    for k in 1..=total {
        play_round(pop, game, params, tie)?;
        if next.peek() == Some(&k) {
            record(pop, k, &mut series)?;
            next.next();
        }
    }
    Ok(series)
}
