//! Mean-field particle approximation.
//!
//! In the large-population limit the empirical measure of priors follows a
//! transport equation: every point of the density moves with velocity
//!
//! ```text
//! u(x, t) = BRbar(t) - mu x,
//! ```
//!
//! where `BRbar(t)` is the population's mean best response. This module
//! discretizes the density by weighted particles moved along exact
//! characteristics of that affine flow, with the coupling term `BRbar`
//! frozen over each step. An optional second-order correction reintroduces
//! the finite-population play-by-play variance as a diffusion term and
//! integrates the resulting SDE by Euler-Maruyama.

use crate::error::{Error, Result};
use crate::exec::{self, Backend, CHUNK};
use crate::game::{best_response_prior, Game, TieRule};
use crate::init::InitialDistribution;
use crate::linalg::psd_sqrt;
use crate::rng::{particle_rng, substream, Stream};
use crate::series::ObservableSeries;
use rand::Rng;
use rand_distr::StandardNormal;

/// Weighted particle discretization of the population density.
#[derive(Clone, Debug)]
pub struct Ensemble {
    n: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    time: f64,
}

impl Ensemble {
    /// Builds an ensemble from flat row-major positions and one weight per
    /// particle. Weights must be positive and sum to one within `1e-12`.
    pub fn new(n: usize, positions: Vec<f64>, weights: Vec<f64>, time: f64) -> Result<Self> {
        let ens = Ensemble { n, positions, weights, time };
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidEnsemble(format!("dimension {} is below 2", self.n)));
        }
        if !self.positions.len().is_multiple_of(self.n) {
            return Err(Error::InvalidEnsemble(format!(
                "{} coordinates do not tile dimension {}",
                self.positions.len(),
                self.n
            )));
        }
        let m = self.positions.len() / self.n;
        if m == 0 {
            return Err(Error::InvalidEnsemble("no particles".into()));
        }
        if self.weights.len() != m {
            return Err(Error::InvalidEnsemble(format!(
                "{} weights for {m} particles",
                self.weights.len()
            )));
        }
        if self.positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEnsemble("non-finite particle position".into()));
        }
        if self.weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::InvalidEnsemble("weights must be positive and finite".into()));
        }
        let mass = exec::neumaier_sum(&self.weights);
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!("weights sum to {mass}, expected 1")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_particles(&self) -> usize {
        self.weights.len()
    }

    /// Position of particle `i`.
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Current simulation time. Step functions advance it by `dt`.
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }
}

/// Population mean best response: a probability vector over actions.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanBR(Vec<f64>);

impl MeanBR {
    /// Entries must be finite, nonnegative within `1e-12` (then clamped),
    /// and sum to one within `1e-12`.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InvalidBelief(format!("need at least 2 entries, got {}", v.len())));
        }
        let mut v = v;
        for (i, x) in v.iter_mut().enumerate() {
            if !x.is_finite() || *x < -1e-12 {
                return Err(Error::InvalidBelief(format!("mean BR entry {i} = {x}")));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBelief(format!("mean BR sums to {sum}, expected 1")));
        }
        Ok(MeanBR(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Samples `m` particles from `dist` with uniform weights `1/m`.
///
/// A `Lattice` distribution is used as a quadrature rule: `m` must equal its
/// point count and the particles are exactly its points.
pub fn init_ensemble(dist: &InitialDistribution, m: usize, seed: u64) -> Result<Ensemble> {
    if m == 0 {
        return Err(Error::InvalidEnsemble("no particles".into()));
    }
    dist.validate()?;
    let n = dist.dim();
    let positions = if let Some(points) = dist.lattice_points() {
        let size = points.len() / n;
        if m != size {
            return Err(Error::InvalidEnsemble(format!(
                "lattice has {size} points but {m} particles were requested"
            )));
        }
        points
    } else {
        let mut rng = substream(seed, Stream::PopulationInit);
        let mut positions = vec![0.0; m * n];
        for chunk in positions.chunks_mut(n) {
            dist.sample_into(&mut rng, chunk);
        }
        positions
    };
    Ensemble::new(n, positions, vec![1.0 / m as f64; m], 0.0)
}

/// Weighted fraction of particles best responding with each action.
pub fn mean_br(ens: &Ensemble, game: &Game, tie: TieRule) -> Result<MeanBR> {
    mean_br_with(Backend::default(), ens, game, tie)
}

/// As [`mean_br`] on an explicit backend; bit-identical across backends.
pub fn mean_br_with(backend: Backend, ens: &Ensemble, game: &Game, tie: TieRule) -> Result<MeanBR> {
    let n = ens.n();
    if n != game.n() {
        return Err(Error::DimensionMismatch { expected: game.n(), got: n });
    }
    let weights = ens.weights();
    let partials: Vec<Result<Vec<f64>>> =
        exec::map_chunks(backend, ens.positions(), n, |c, chunk| {
            let mut hist = vec![0.0; n];
            let base = c * CHUNK;
            for (p, x) in chunk.chunks(n).enumerate() {
                if x.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidEnsemble(format!(
                        "particle {} has zero total mass; its belief is undefined",
                        base + p
                    )));
                }
                hist[best_response_prior(game, x, tie)] += weights[base + p];
            }
            Ok(hist)
        });
    let mut hist = vec![0.0; n];
    for partial in partials {
        for (h, p) in hist.iter_mut().zip(partial?) {
            *h += p;
        }
    }
    MeanBR::new(hist)
}

/// Moves every particle along the exact characteristic of the affine flow
/// `dx/dt = br - mu x` for one step of length `dt`, holding `br` frozen:
///
/// ```text
/// x  <-  exp(-mu dt) x + (1 - exp(-mu dt)) / mu * br,
/// ```
///
/// and `x <- x + dt br` in the memoryless limit `mu = 0`. Advances the
/// ensemble clock by `dt`.
pub fn transport_step(ens: &mut Ensemble, br: &MeanBR, mu: f64, dt: f64) -> Result<()> {
    transport_step_with(Backend::default(), ens, br, mu, dt)
}

/// As [`transport_step`] on an explicit backend.
pub fn transport_step_with(
    backend: Backend,
    ens: &mut Ensemble,
    br: &MeanBR,
    mu: f64,
    dt: f64,
) -> Result<()> {
    check_step_args(ens, br.len(), mu, dt)?;
    let n = ens.n();
    let br = br.as_slice();
    if mu == 0.0 {
        let add: Vec<f64> = br.iter().map(|b| b * dt).collect();
        exec::for_each_chunk_mut(backend, &mut ens.positions, n, |_, chunk| {
            for x in chunk.chunks_mut(n) {
                for (v, a) in x.iter_mut().zip(&add) {
                    *v += a;
                }
            }
        });
    } else {
        let shrink = (-mu * dt).exp();
        let add: Vec<f64> = br.iter().map(|b| b * (1.0 - shrink) / mu).collect();
        exec::for_each_chunk_mut(backend, &mut ens.positions, n, |_, chunk| {
            for x in chunk.chunks_mut(n) {
                for (v, a) in x.iter_mut().zip(&add) {
                    *v = shrink * *v + a;
                }
            }
        });
    }
    ens.time += dt;
    Ok(())
}

/// Play-by-play covariance of the prior update at `x` under mean response
/// `br`: `D = sum_i br_i (mu x - e_i)(mu x - e_i)^T`.
pub fn diffusion_matrix(x: &[f64], br: &MeanBR, mu: f64) -> DiffusionMatrix {
    let n = x.len();
    debug_assert_eq!(br.len(), n);
    let mut d = vec![0.0; n * n];
    let mut v = vec![0.0; n];
    for (i, &w) in br.as_slice().iter().enumerate() {
        for (k, &xk) in x.iter().enumerate() {
            v[k] = mu * xk;
        }
        v[i] -= 1.0;
        // Accumulate the upper triangle only and mirror it afterwards, so
        // the result is bitwise symmetric.
        for r in 0..n {
            let wv = w * v[r];
            for c in r..n {
                d[r * n + c] += wv * v[c];
            }
        }
    }
    for r in 1..n {
        for c in 0..r {
            d[r * n + c] = d[c * n + r];
        }
    }
    DiffusionMatrix { n, d }
}

/// Symmetric positive semidefinite covariance of one prior update.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DiffusionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.entry(i, i)).sum()
    }
}

/// One Euler-Maruyama step of the second-order model
///
/// ```text
/// x  <-  x + (br - mu x) dt + B xi sqrt(dt),      B B^T = 2 h D(x),
/// ```
///
/// with `xi` standard normal per particle, seeded by `(noise_seed, step,
/// particle)` so the noise does not depend on scheduling. Coordinates pushed
/// below zero are clipped to zero; the return value counts clipped
/// coordinates. Advances the ensemble clock by `dt`.
pub fn sde_step(
    ens: &mut Ensemble,
    br: &MeanBR,
    mu: f64,
    h: f64,
    dt: f64,
    noise_seed: u64,
    step: u64,
) -> Result<u64> {
    sde_step_with(Backend::default(), ens, br, mu, h, dt, noise_seed, step)
}

/// As [`sde_step`] on an explicit backend; bit-identical across backends.
#[allow(clippy::too_many_arguments)]
pub fn sde_step_with(
    backend: Backend,
    ens: &mut Ensemble,
    br: &MeanBR,
    mu: f64,
    h: f64,
    dt: f64,
    noise_seed: u64,
    step: u64,
) -> Result<u64> {
    check_step_args(ens, br.len(), mu, dt)?;
    if !h.is_finite() || h < 0.0 {
        return Err(Error::InvalidParams(format!("learning rate h = {h} must be nonnegative")));
    }
    let n = ens.n();
    let sqrt_dt = dt.sqrt();
    let br_slice = br.as_slice();

    let clips: Vec<u64> = {
        let positions = &mut ens.positions;
        let f = |c: usize, chunk: &mut [f64]| -> u64 {
            let mut clipped = 0u64;
            let mut b = vec![0.0; n * n];
            let mut xi = vec![0.0; n];
            let base = c * CHUNK;
            for (p, x) in chunk.chunks_mut(n).enumerate() {
                let d2h = {
                    let mut d = diffusion_matrix(x, br, mu);
                    for v in d.d.iter_mut() {
                        *v *= 2.0 * h;
                    }
                    d
                };
                psd_sqrt(n, d2h.as_slice(), &mut b);
                let mut rng = particle_rng(noise_seed, step, (base + p) as u64);
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for k in 0..n {
                    let noise: f64 = (0..n).map(|j| b[k * n + j] * xi[j]).sum();
                    x[k] += (br_slice[k] - mu * x[k]) * dt + noise * sqrt_dt;
                    if x[k] < 0.0 {
                        x[k] = 0.0;
                        clipped += 1;
                    }
                }
            }
            clipped
        };
        // Reuse the chunk-mapped mutation but collect per-chunk clip counts.
        let mut counts = vec![0u64; positions.len().div_ceil(CHUNK * n)];
        match backend {
            Backend::Sequential => {
                for (c, chunk) in positions.chunks_mut(CHUNK * n).enumerate() {
                    counts[c] = f(c, chunk);
                }
            }
            #[cfg(feature = "parallel")]
            Backend::Rayon => {
                use rayon::prelude::*;
                counts = positions
                    .par_chunks_mut(CHUNK * n)
                    .enumerate()
                    .map(|(c, chunk)| f(c, chunk))
                    .collect();
            }
        }
        counts
    };

    ens.time += dt;
    Ok(clips.iter().sum())
}

fn check_step_args(ens: &Ensemble, br_len: usize, mu: f64, dt: f64) -> Result<()> {
    if br_len != ens.n() {
        return Err(Error::DimensionMismatch { expected: ens.n(), got: br_len });
    }
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidParams(format!("memory rate mu = {mu} must be nonnegative")));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParams(format!("step dt = {dt} must be positive")));
    }
    Ok(())
}

/// Parameters of a mean-field run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldParams {
    pub mu: f64,
    pub h: f64,
    pub dt: f64,
    pub horizon_t: f64,
    pub sample_every: f64,
    /// Integrate the second-order SDE instead of pure transport.
    pub diffusion: bool,
    /// Master seed for the diffusion noise.
    pub seed: u64,
}

impl MeanFieldParams {
    fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::InvalidParams(format!("memory rate mu = {} must be nonnegative", self.mu)));
        }
        if !self.h.is_finite() || self.h < 0.0 {
            return Err(Error::InvalidParams(format!("learning rate h = {} must be nonnegative", self.h)));
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidParams(format!("step dt = {} must be positive", self.dt)));
        }
        if !self.horizon_t.is_finite() || self.horizon_t < 0.0 {
            return Err(Error::InvalidParams(format!(
                "horizon {} must be nonnegative",
                self.horizon_t
            )));
        }
        if !self.sample_every.is_finite() || self.sample_every <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sample interval {} must be positive",
                self.sample_every
            )));
        }
        Ok(())
    }
}

/// Counters accumulated over a mean-field run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub steps: u64,
    pub clip_events: u64,
}

/// Integrates the ensemble to `horizon_t` with the coupling `BRbar` frozen
/// over each step, recording observables at `t = 0`, every multiple of
/// `sample_every`, and the final step.
pub fn run_meanfield(
    ens: &mut Ensemble,
    game: &Game,
    params: &MeanFieldParams,
    tie: TieRule,
) -> Result<(ObservableSeries, RunStats)> {
    run_meanfield_with(Backend::default(), ens, game, params, tie)
}

/// As [`run_meanfield`] on an explicit backend; bit-identical across
/// backends.
pub fn run_meanfield_with(
    backend: Backend,
    ens: &mut Ensemble,
    game: &Game,
    params: &MeanFieldParams,
    tie: TieRule,
) -> Result<(ObservableSeries, RunStats)> {
    params.validate()?;
    ens.validate()?;
    if ens.n() != game.n() {
        return Err(Error::DimensionMismatch { expected: game.n(), got: ens.n() });
    }

    let steps = (params.horizon_t / params.dt).round() as u64;
    let sample_steps = sample_step_set(params.horizon_t, params.sample_every, params.dt, steps);

    let mut series = ObservableSeries::new(ens.n());
    let mut stats = RunStats::default();

    let record = |ens: &Ensemble, series: &mut ObservableSeries| -> Result<()> {
        let br = mean_br_with(backend, ens, game, tie)?;
        let sm = support_metrics(ens)?;
        series.push_row(ens.time(), &sm.lambda, br.as_slice(), &sm.mean_position, &sm.bbox_lo, &sm.bbox_hi)
    };

    let mut next = sample_steps.iter().copied().peekable();
    if next.peek() == Some(&0) {
        record(ens, &mut series)?;
        next.next();
    }
    for k in 1..=steps {
        let br = mean_br_with(backend, ens, game, tie)?;
        if params.diffusion {
            stats.clip_events +=
                sde_step_with(backend, ens, &br, params.mu, params.h, params.dt, params.seed, k - 1)?;
        } else {
            transport_step_with(backend, ens, &br, params.mu, params.dt)?;
        }
        ens.set_time(k as f64 * params.dt);
        stats.steps += 1;
        if next.peek() == Some(&k) {
            record(ens, &mut series)?;
            next.next();
        }
    }
    Ok((series, stats))
}

fn sample_step_set(horizon: f64, sample_every: f64, dt: f64, steps: u64) -> Vec<u64> {
    let mut set = Vec::new();
    let mut m = 0u64;
    loop {
        let tau = m as f64 * sample_every;
        if tau > horizon * (1.0 + 1e-12) {
            break;
        }
        let k = ((tau / dt - 1e-9).ceil().max(0.0) as u64).min(steps);
        if set.last() != Some(&k) {
            set.push(k);
        }
        m += 1;
    }
    if set.last() != Some(&steps) {
        set.push(steps);
    }
    set
}

/// How [`support_metrics`] measured the diameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiameterMethod {
    /// All pairwise distances.
    Exact,
    /// Pairwise distances between convex hull vertices (still exact).
    ConvexHull,
    /// Pairwise distances over a deterministic subsample (lower bound).
    Subsampled,
}

impl DiameterMethod {
    pub fn name(self) -> &'static str {
        match self {
            DiameterMethod::Exact => "exact",
            DiameterMethod::ConvexHull => "convex_hull",
            DiameterMethod::Subsampled => "subsampled",
        }
    }
}

/// Spatial summary of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMetrics {
    /// Weighted mean normalized position (the mean belief).
    pub lambda: Vec<f64>,
    /// Weighted mean position.
    pub mean_position: Vec<f64>,
    pub bbox_lo: Vec<f64>,
    pub bbox_hi: Vec<f64>,
    /// Largest pairwise distance; see `diameter_method`.
    pub diameter: f64,
    pub diameter_method: DiameterMethod,
}

const DIAMETER_BRUTE_LIMIT: usize = 2048;

/// Computes the weighted means, bounding box, and support diameter.
pub fn support_metrics(ens: &Ensemble) -> Result<SupportMetrics> {
    ens.validate()?;
    let n = ens.n();
    let m = ens.n_particles();
    let mut lambda = vec![0.0; n];
    let mut mean_position = vec![0.0; n];
    let mut bbox_lo = vec![f64::INFINITY; n];
    let mut bbox_hi = vec![f64::NEG_INFINITY; n];
    for (i, x) in ens.positions().chunks(n).enumerate() {
        let w = ens.weight(i);
        let sum: f64 = x.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidEnsemble(format!(
                "particle {i} has zero total mass; its belief is undefined"
            )));
        }
        for k in 0..n {
            lambda[k] += w * x[k] / sum;
            mean_position[k] += w * x[k];
            bbox_lo[k] = bbox_lo[k].min(x[k]);
            bbox_hi[k] = bbox_hi[k].max(x[k]);
        }
    }

    let (diameter, diameter_method) = if m <= DIAMETER_BRUTE_LIMIT {
        (brute_diameter(ens.positions(), n), DiameterMethod::Exact)
    } else if n == 2 {
        let hull = convex_hull_2d(ens.positions());
        (brute_diameter(&hull, 2), DiameterMethod::ConvexHull)
    } else {
        let stride = m.div_ceil(DIAMETER_BRUTE_LIMIT);
        let sub: Vec<f64> = ens
            .positions()
            .chunks(n)
            .step_by(stride)
            .flat_map(|x| x.iter().copied())
            .collect();
        (brute_diameter(&sub, n), DiameterMethod::Subsampled)
    };

    Ok(SupportMetrics { lambda, mean_position, bbox_lo, bbox_hi, diameter, diameter_method })
}

fn brute_diameter(points: &[f64], n: usize) -> f64 {
    let m = points.len() / n;
    let mut best = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let d2: f64 = (0..n)
                .map(|k| {
                    let d = points[i * n + k] - points[j * n + k];
                    d * d
                })
                .sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Convex hull of 2-d points (monotone chain), returned as flat coordinates.
/// The diameter of a point set equals the diameter of its hull vertices.
fn convex_hull_2d(points: &[f64]) -> Vec<f64> {
    let mut pts: Vec<(f64, f64)> = points.chunks(2).map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts.into_iter().flat_map(|(x, y)| [x, y]).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.into_iter().flat_map(|(x, y)| [x, y]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Miscoordination game: mixed equilibrium (1/2, 1/2), best responses
    /// switch on the diagonal x1 = x2.
    fn miscoordination_game() -> Game {
        Game::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    /// Skewed variant: mixed equilibrium (1/3, 2/3), best responses switch
    /// on the ray x2 = 2 x1.
    fn skewed_game() -> Game {
        Game::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap()
    }

    fn unit_square_lattice(per_axis: usize) -> InitialDistribution {
        InitialDistribution::Lattice {
            lo: vec![3.0, 3.0],
            hi: vec![4.0, 4.0],
            counts: vec![per_axis, per_axis],
        }
    }

    #[test]
    fn init_ensemble_modes() {
        let lat = unit_square_lattice(10);
        let ens = init_ensemble(&lat, 100, 1).unwrap();
        assert_eq!(ens.n_particles(), 100);
        assert_eq!(ens.weight(0), 0.01);
        assert_eq!(ens.position(0), &[3.05, 3.05]);
        assert!(init_ensemble(&lat, 99, 1).is_err());

        let boxy = InitialDistribution::UniformBox { lo: vec![3.0, 3.0], hi: vec![4.0, 4.0] };
        let a = init_ensemble(&boxy, 500, 2).unwrap();
        let b = init_ensemble(&boxy, 500, 2).unwrap();
        assert_eq!(a.positions(), b.positions());
        let c = init_ensemble(&boxy, 500, 3).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn ensemble_validation() {
        assert!(Ensemble::new(2, vec![1.0, 2.0], vec![1.0], 0.0).is_ok());
        assert!(Ensemble::new(2, vec![1.0, 2.0, 3.0], vec![1.0], 0.0).is_err());
        assert!(Ensemble::new(2, vec![1.0, 2.0], vec![0.5], 0.0).is_err());
        assert!(Ensemble::new(2, vec![1.0, 2.0], vec![1.0, 1.0], 0.0).is_err());
        assert!(Ensemble::new(2, vec![1.0, f64::NAN], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn mean_br_on_known_ensembles() {
        let game = skewed_game();
        // Everything below the ray x2 = 2 x1 best responds with action 2.
        let below = Ensemble::new(2, vec![1.0, 0.5, 2.0, 1.0], vec![0.5, 0.5], 0.0).unwrap();
        let br = mean_br(&below, &game, TieRule::LowestIndex).unwrap();
        assert_eq!(br.as_slice(), &[0.0, 1.0]);

        // A pair straddling the ray splits the histogram by weight.
        let split = Ensemble::new(2, vec![1.0, 0.5, 1.0, 4.0], vec![0.25, 0.75], 0.0).unwrap();
        let br = mean_br(&split, &game, TieRule::LowestIndex).unwrap();
        assert_eq!(br.as_slice(), &[0.75, 0.25]);

        // A particle that decays to zero mass has no belief.
        let mut bad = Ensemble::new(2, vec![1.0, 1.0], vec![1.0], 0.0).unwrap();
        bad.positions[0] = 0.0;
        bad.positions[1] = 0.0;
        assert!(mean_br(&bad, &game, TieRule::LowestIndex).is_err());
    }

    #[test]
    fn mean_br_matches_the_area_fraction() {
        // Unit box centered at (3.6, 3.5): the fraction above the diagonal
        // is int_{3.1}^{4} (4 - x1) dx1 = 0.405 exactly.
        let game = miscoordination_game();
        let lat = InitialDistribution::Lattice {
            lo: vec![3.1, 3.0],
            hi: vec![4.1, 4.0],
            counts: vec![1000, 1000],
        };
        let ens = init_ensemble(&lat, 1_000_000, 1).unwrap();
        let br = mean_br(&ens, &game, TieRule::LowestIndex).unwrap();
        let expect = 0.405;
        assert!(
            (br.as_slice()[0] - expect).abs() < 2e-3,
            "BR fraction {} vs {expect}",
            br.as_slice()[0]
        );
    }

    #[test]
    fn transport_flows_along_exact_characteristics() {
        // mu = 0: straight translation by dt * br.
        let mut ens = Ensemble::new(2, vec![1.0, 2.0], vec![1.0], 0.0).unwrap();
        let br = MeanBR::new(vec![0.25, 0.75]).unwrap();
        transport_step(&mut ens, &br, 0.0, 0.5).unwrap();
        assert_eq!(ens.position(0), &[1.125, 2.375]);
        assert_eq!(ens.time(), 0.5);

        // mu = 1, dt = ln 2 from the origin-adjacent point.
        let mut ens = Ensemble::new(2, vec![0.0, 1.0], vec![1.0], 0.0).unwrap();
        let br = MeanBR::new(vec![1.0, 0.0]).unwrap();
        transport_step(&mut ens, &br, 1.0, std::f64::consts::LN_2).unwrap();
        let x = ens.position(0);
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((x[1] - 0.5).abs() < 1e-15);

        // The fixed point br / mu is preserved to machine precision.
        let mut ens = Ensemble::new(2, vec![0.5, 0.0], vec![1.0], 0.0).unwrap();
        let br = MeanBR::new(vec![1.0, 0.0]).unwrap();
        transport_step(&mut ens, &br, 2.0, 0.125).unwrap();
        let x = ens.position(0);
        assert!((x[0] - 0.5).abs() < 1e-16);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn transport_contracts_by_exp_minus_mu_dt() {
        let mut ens =
            Ensemble::new(2, vec![1.0, 1.0, 3.0, 2.0], vec![0.5, 0.5], 0.0).unwrap();
        let br = MeanBR::new(vec![0.5, 0.5]).unwrap();
        let mu = 0.7;
        let dt = 0.3;
        let gap0: Vec<f64> = (0..2).map(|k| ens.position(1)[k] - ens.position(0)[k]).collect();
        transport_step(&mut ens, &br, mu, dt).unwrap();
        let factor = (-mu * dt).exp();
        for (k, &g0) in gap0.iter().enumerate() {
            let gap = ens.position(1)[k] - ens.position(0)[k];
            assert!((gap - factor * g0).abs() < 1e-15);
        }
    }

    #[test]
    fn diffusion_matrix_examples() {
        // Pure vertex response at the origin: D = e_1 e_1^T.
        let br = MeanBR::new(vec![1.0, 0.0]).unwrap();
        let d = diffusion_matrix(&[0.0, 0.0], &br, 1.0);
        assert_eq!(d.as_slice(), &[1.0, 0.0, 0.0, 0.0]);

        // Mixed response at the origin: D = diag(br) and trace 1.
        let br = MeanBR::new(vec![0.25, 0.75]).unwrap();
        let d = diffusion_matrix(&[0.0, 0.0], &br, 2.0);
        assert_eq!(d.as_slice(), &[0.25, 0.0, 0.0, 0.75]);

        // Hand-expanded 2x2 case with mu x = (0.5, 1.0):
        // D = 0.5 (-0.5,1)(-0.5,1)^T + 0.5 (0.5,0)(0.5,0)^T.
        let br = MeanBR::new(vec![0.5, 0.5]).unwrap();
        let d = diffusion_matrix(&[1.0, 2.0], &br, 0.5);
        assert!((d.entry(0, 0) - 0.25).abs() < 1e-15);
        assert!((d.entry(0, 1) + 0.25).abs() < 1e-15);
        assert!((d.entry(1, 0) + 0.25).abs() < 1e-15);
        assert!((d.entry(1, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diffusion_trace_identity() {
        // trace D = sum_i br_i |mu x - e_i|^2.
        let br = MeanBR::new(vec![0.3, 0.2, 0.5]).unwrap();
        let x = [0.5, 1.5, 0.25];
        let mu = 0.8;
        let d = diffusion_matrix(&x, &br, mu);
        let mut expect = 0.0;
        for i in 0..3 {
            let mut norm2 = 0.0;
            for (k, &xk) in x.iter().enumerate() {
                let v = mu * xk - if k == i { 1.0 } else { 0.0 };
                norm2 += v * v;
            }
            expect += br.as_slice()[i] * norm2;
        }
        assert!((d.trace() - expect).abs() < 1e-12);
    }

    #[test]
    fn sde_with_zero_h_is_euler_drift() {
        let br = MeanBR::new(vec![0.25, 0.75]).unwrap();
        let mut with_sde = Ensemble::new(2, vec![1.0, 2.0, 0.5, 0.25], vec![0.5, 0.5], 0.0).unwrap();
        let mut by_hand = with_sde.clone();
        sde_step(&mut with_sde, &br, 0.5, 0.0, 0.25, 9, 0).unwrap();
        for x in by_hand.positions.chunks_mut(2) {
            for (k, v) in x.iter_mut().enumerate() {
                *v += (br.as_slice()[k] - 0.5 * *v) * 0.25;
            }
        }
        assert_eq!(with_sde.positions(), by_hand.positions());
    }

    #[test]
    fn sde_noise_is_reproducible_and_step_dependent() {
        let br = MeanBR::new(vec![1.0, 0.0]).unwrap();
        let start = Ensemble::new(2, vec![1.0, 1.0, 2.0, 2.0], vec![0.5, 0.5], 0.0).unwrap();
        let mut a = start.clone();
        let mut b = start.clone();
        let mut c = start.clone();
        sde_step(&mut a, &br, 0.0, 0.01, 0.1, 5, 0).unwrap();
        sde_step(&mut b, &br, 0.0, 0.01, 0.1, 5, 0).unwrap();
        sde_step(&mut c, &br, 0.0, 0.01, 0.1, 5, 1).unwrap();
        assert_eq!(a.positions(), b.positions());
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn sde_clips_into_the_positive_orthant() {
        // Strong noise at a point on the boundary forces clips.
        let br = MeanBR::new(vec![0.0, 1.0]).unwrap();
        let mut ens = Ensemble::new(
            2,
            (0..256).flat_map(|_| [0.0, 1e-9]).collect(),
            vec![1.0 / 256.0; 256],
            0.0,
        )
        .unwrap();
        let clips = sde_step(&mut ens, &br, 0.0, 10.0, 0.01, 7, 0).unwrap();
        assert!(clips > 0, "expected at least one clipped coordinate");
        assert!(ens.positions().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn run_meanfield_point_mass_matches_the_ode() {
        // A point mass starting below the switching ray keeps br frozen at
        // e_2 until it crosses, which happens after the horizon.
        let game = skewed_game();
        let dist = InitialDistribution::PointMass { x: vec![1.0, 0.5] };
        let mut ens = init_ensemble(&dist, 1, 0).unwrap();
        let params = MeanFieldParams {
            mu: 0.0,
            h: 0.0,
            dt: 0.25,
            horizon_t: 1.0,
            sample_every: 0.25,
            diffusion: false,
            seed: 0,
        };
        let (series, stats) = run_meanfield(&mut ens, &game, &params, TieRule::LowestIndex).unwrap();
        assert_eq!(stats.steps, 4);
        assert_eq!(stats.clip_events, 0);
        assert_eq!(series.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        // x(t) = (1, 0.5 + t) while x2 < 2 x1 keeps br = e_2; the crossing
        // happens at t = 1.5, after the horizon.
        assert_eq!(ens.position(0), &[1.0, 1.5]);
    }

    #[test]
    fn run_meanfield_reruns_bitwise_identically() {
        let game = skewed_game();
        let dist = InitialDistribution::UniformBox { lo: vec![3.0, 3.0], hi: vec![4.0, 4.0] };
        let params = MeanFieldParams {
            mu: 0.0,
            h: 0.001,
            dt: 0.05,
            horizon_t: 1.0,
            sample_every: 0.25,
            diffusion: true,
            seed: 13,
        };
        let run = || {
            let mut ens = init_ensemble(&dist, 300, 13).unwrap();
            run_meanfield(&mut ens, &game, &params, TieRule::LowestIndex).unwrap()
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert!(a.bitwise_eq(&b));
        assert_eq!(sa, sb);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn meanfield_backends_agree_bitwise() {
        let game = skewed_game();
        let dist = InitialDistribution::UniformBox { lo: vec![3.0, 3.0], hi: vec![4.0, 4.0] };
        let params = MeanFieldParams {
            mu: 0.2,
            h: 0.01,
            dt: 0.1,
            horizon_t: 2.0,
            sample_every: 0.5,
            diffusion: true,
            seed: 3,
        };
        let run = |backend| {
            let mut ens = init_ensemble(&dist, 3000, 3).unwrap();
            run_meanfield_with(backend, &mut ens, &game, &params, TieRule::LowestIndex).unwrap()
        };
        let (seq, s_seq) = run(Backend::Sequential);
        let (par, s_par) = run(Backend::Rayon);
        assert!(seq.bitwise_eq(&par));
        assert_eq!(s_seq, s_par);
    }

    #[test]
    fn support_metrics_on_small_sets() {
        let ens = Ensemble::new(2, vec![1.0, 1.0], vec![1.0], 0.0).unwrap();
        let sm = support_metrics(&ens).unwrap();
        assert_eq!(sm.diameter, 0.0);
        assert_eq!(sm.lambda, vec![0.5, 0.5]);
        assert_eq!(sm.diameter_method, DiameterMethod::Exact);

        let pair = Ensemble::new(2, vec![1.0, 1.0, 2.0, 2.0], vec![0.5, 0.5], 0.0).unwrap();
        let sm = support_metrics(&pair).unwrap();
        assert!((sm.diameter - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(sm.bbox_lo, vec![1.0, 1.0]);
        assert_eq!(sm.bbox_hi, vec![2.0, 2.0]);
        assert_eq!(sm.mean_position, vec![1.5, 1.5]);
    }

    #[test]
    fn hull_diameter_matches_brute_force() {
        // 5000 points force the hull path; check against brute force on the
        // same set.
        let dist = InitialDistribution::UniformBox { lo: vec![1.0, 2.0], hi: vec![5.0, 3.0] };
        let ens = init_ensemble(&dist, 5000, 17).unwrap();
        let sm = support_metrics(&ens).unwrap();
        assert_eq!(sm.diameter_method, DiameterMethod::ConvexHull);
        let brute = brute_diameter(ens.positions(), 2);
        assert!((sm.diameter - brute).abs() < 1e-12, "{} vs {brute}", sm.diameter);
    }

    #[test]
    fn subsampled_diameter_reports_its_method() {
        let dist = InitialDistribution::UniformBox {
            lo: vec![1.0, 1.0, 1.0],
            hi: vec![2.0, 2.0, 2.0],
        };
        let ens = init_ensemble(&dist, 4000, 2).unwrap();
        let sm = support_metrics(&ens).unwrap();
        assert_eq!(sm.diameter_method, DiameterMethod::Subsampled);
        assert!(sm.diameter > 0.0);
    }
}
