//! Reduced ODE descriptions of the learning dynamics.
//!
//! Three collapses of the transport equation, in decreasing order of detail:
//!
//! * Box model: with `mu = 0` the flow translates rigidly, so a uniform
//!   density on a square stays one; only the center moves, with velocity
//!   equal to the box's area-weighted mean best response.
//! * Best-response dynamics: the mean belief of a point-supported density
//!   obeys `dL/dt = (BR(L) - L) / sum x`.
//! * Mean-BR equation: for a generic 2x2 game the mean best response itself
//!   obeys a linear system driven by the overlap length between the support
//!   and the indifference line, with eigenvalues 0 and -2 after rescaling
//!   time by that length.
//!
//! All integrators are fixed-step (explicit Euler or classical RK4) for
//! reproducibility.

use crate::error::{Error, Result};
use crate::game::{best_response_prior, best_response_vertex, mixed_ne_2x2, Belief, Game, TieRule};
use crate::meanfield::{Ensemble, MeanBR};
use crate::series::fmt_g17;
use std::io::{self, Write};

/// Fixed-step integration scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OdeMethod {
    Euler,
    Rk4,
}

impl OdeMethod {
    pub fn name(self) -> &'static str {
        match self {
            OdeMethod::Euler => "euler",
            OdeMethod::Rk4 => "rk4",
        }
    }
}

/// Dense output of a fixed-step integration: states at `t = k dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSolution {
    method: OdeMethod,
    dt: f64,
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl OdeSolution {
    pub fn method(&self) -> OdeMethod {
        self.method
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Linear interpolation at `t`; `None` outside the integrated range.
    pub fn interp(&self, t: f64) -> Option<Vec<f64>> {
        if self.times.is_empty() || t < self.times[0] || t > self.last_time() {
            return None;
        }
        let hi = self.times.partition_point(|&s| s < t);
        if hi == 0 || self.times[hi] == t {
            return Some(self.state(hi).to_vec());
        }
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        let a = self.state(lo);
        let b = self.state(hi);
        Some(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
    }

    /// Writes rows `t, y_1..y_dim` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "t")?;
        for k in 1..=self.dim {
            write!(w, ",y_{k}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{}", fmt_g17(self.time(i)))?;
            for v in self.state(i) {
                write!(w, ",{}", fmt_g17(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrates `dy/dt = rhs(t, y)` from `y0` to `horizon_t` with fixed step
/// `dt`, recording every step. Aborts with a diagnostic if the state stops
/// being finite.
pub fn integrate_generic<F>(
    mut rhs: F,
    y0: &[f64],
    dt: f64,
    horizon_t: f64,
    method: OdeMethod,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParams(format!("step dt = {dt} must be positive")));
    }
    if !horizon_t.is_finite() || horizon_t < 0.0 {
        return Err(Error::InvalidParams(format!("horizon {horizon_t} must be nonnegative")));
    }
    let dim = y0.len();
    if dim == 0 {
        return Err(Error::InvalidParams("empty initial state".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite initial state".into()));
    }

    let steps = (horizon_t / dt).round() as u64;
    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut states = Vec::with_capacity((steps as usize + 1) * dim);
    times.push(0.0);
    states.extend_from_slice(y0);

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        match method {
            OdeMethod::Euler => {
                rhs(t, &y, &mut k1)?;
                for (v, k) in y.iter_mut().zip(&k1) {
                    *v += dt * k;
                }
            }
            OdeMethod::Rk4 => {
                rhs(t, &y, &mut k1)?;
                for i in 0..dim {
                    stage[i] = y[i] + 0.5 * dt * k1[i];
                }
                rhs(t + 0.5 * dt, &stage, &mut k2)?;
                for i in 0..dim {
                    stage[i] = y[i] + 0.5 * dt * k2[i];
                }
                rhs(t + 0.5 * dt, &stage, &mut k3)?;
                for i in 0..dim {
                    stage[i] = y[i] + dt * k3[i];
                }
                rhs(t + dt, &stage, &mut k4)?;
                for i in 0..dim {
                    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let t_next = step as f64 * dt;
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: t_next,
                step,
                what: format!("state component {bad} = {}", y[bad]),
            });
        }
        times.push(t_next);
        states.extend_from_slice(&y);
    }

    Ok(OdeSolution { method, dt, dim, times, states })
}

/// An axis-aligned square region of prior space.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareBox {
    center: Vec<f64>,
    side: f64,
}

impl SquareBox {
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "box center needs at least 2 coordinates, got {}",
                center.len()
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("box center is not finite".into()));
        }
        if !side.is_finite() || side <= 0.0 {
            return Err(Error::InvalidParams(format!("box side {side} must be positive")));
        }
        Ok(SquareBox { center, side })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn lo(&self, k: usize) -> f64 {
        self.center[k] - 0.5 * self.side
    }

    pub fn hi(&self, k: usize) -> f64 {
        self.center[k] + 0.5 * self.side
    }

    /// The box must sit in the closed positive quadrant and keep the origin
    /// (where beliefs are undefined) off its boundary.
    fn check_quadrant_2d(&self) -> Result<()> {
        if self.lo(0) < 0.0 || self.lo(1) < 0.0 {
            return Err(Error::InvalidParams(format!(
                "box [{}, {}] x [{}, {}] leaves the positive quadrant",
                self.lo(0),
                self.hi(0),
                self.lo(1),
                self.hi(1)
            )));
        }
        if self.lo(0) + self.lo(1) <= 0.0 {
            return Err(Error::InvalidParams("box touches the origin".into()));
        }
        Ok(())
    }
}

/// Area fractions of the box on each side of the best-response switching
/// ray, computed exactly by clipping the box against the half-plane.
///
/// For a generic 2x2 game with interior equilibrium `p*`, the first action
/// is the best response exactly when `p2* x1 < p1* x2`, the region left of
/// the ray through `p*`.
pub fn box_mean_br_2x2(bx: &SquareBox, game: &Game) -> Result<MeanBR> {
    if bx.center.len() != 2 || game.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: if game.n() != 2 { game.n() } else { bx.center.len() },
        });
    }
    bx.check_quadrant_2d()?;
    let ne = mixed_ne_2x2(game)?;
    let (p1, p2) = (ne.as_slice()[0], ne.as_slice()[1]);

    // Half-plane w . x <= 0 is the BR = first-action side.
    let w = [p2, -p1];
    let corners = [
        [bx.lo(0), bx.lo(1)],
        [bx.hi(0), bx.lo(1)],
        [bx.hi(0), bx.hi(1)],
        [bx.lo(0), bx.hi(1)],
    ];
    let clipped = clip_polygon(&corners, w);
    let area = polygon_area(&clipped);
    let frac = (area / (bx.side * bx.side)).clamp(0.0, 1.0);
    MeanBR::new(vec![frac, 1.0 - frac])
}

/// Sutherland-Hodgman clip of a convex polygon against `w . x <= 0`.
fn clip_polygon(poly: &[[f64; 2]], w: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for (i, &p) in poly.iter().enumerate() {
        let q = poly[(i + 1) % poly.len()];
        let dp = w[0] * p[0] + w[1] * p[1];
        let dq = w[0] * q[0] + w[1] * q[1];
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq <= 0.0) {
            let s = dp / (dp - dq);
            out.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
        }
    }
    out
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let mut twice = 0.0;
    for (i, &p) in poly.iter().enumerate() {
        let q = poly[(i + 1) % poly.len()];
        twice += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * twice.abs()
}

/// Mean belief of the uniform density on the box, by midpoint quadrature
/// with `cells x cells` panels.
pub fn box_mean_belief(bx: &SquareBox, cells: usize) -> Result<Vec<f64>> {
    if bx.center.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: bx.center.len() });
    }
    bx.check_quadrant_2d()?;
    if cells == 0 {
        return Err(Error::InvalidParams("need at least one quadrature cell".into()));
    }
    let step = bx.side / cells as f64;
    let mut acc = [0.0f64; 2];
    for i in 0..cells {
        let x1 = bx.lo(0) + (i as f64 + 0.5) * step;
        for j in 0..cells {
            let x2 = bx.lo(1) + (j as f64 + 0.5) * step;
            let sum = x1 + x2;
            acc[0] += x1 / sum;
            acc[1] += x2 / sum;
        }
    }
    let total = (cells * cells) as f64;
    Ok(vec![acc[0] / total, acc[1] / total])
}

/// Integrates the box-model center `dc/dt = box_mean_br_2x2(Box(c, side))`.
/// Valid in the memoryless regime, where transport preserves shape.
pub fn integrate_box_center(
    box0: &SquareBox,
    game: &Game,
    dt: f64,
    horizon_t: f64,
    method: OdeMethod,
) -> Result<OdeSolution> {
    let side = box0.side();
    box_mean_br_2x2(box0, game)?;
    integrate_generic(
        |_t, c, out| {
            let bx = SquareBox::new(c.to_vec(), side)?;
            let br = box_mean_br_2x2(&bx, game)?;
            out.copy_from_slice(br.as_slice());
            Ok(())
        },
        box0.center(),
        dt,
        horizon_t,
        method,
    )
}

/// Best-response dynamics right-hand side `(BR(lambda) - lambda) / sum_priors`.
pub fn brd_rhs(lambda: &Belief, sum_priors: f64, game: &Game, tie: TieRule) -> Result<Vec<f64>> {
    if !sum_priors.is_finite() || sum_priors <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "total prior mass {sum_priors} must be positive"
        )));
    }
    let br = best_response_vertex(game, lambda, tie)?;
    Ok(br
        .iter()
        .zip(lambda.as_slice())
        .map(|(b, l)| (b - l) / sum_priors)
        .collect())
}

/// Right-hand side of the mean-belief equation evaluated on a particle
/// ensemble: the weighted average of `(br_i - x_i / sum x) / sum x`.
pub fn lambda_rhs_ensemble(ens: &Ensemble, br: &MeanBR) -> Result<Vec<f64>> {
    let n = ens.n();
    if br.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: br.len() });
    }
    let mut acc = vec![0.0; n];
    for (i, x) in ens.positions().chunks(n).enumerate() {
        let sum: f64 = x.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidEnsemble(format!(
                "particle {i} has zero total mass; its belief is undefined"
            )));
        }
        let w = ens.weight(i);
        for k in 0..n {
            acc[k] += w * (br.as_slice()[k] - x[k] / sum) / sum;
        }
    }
    Ok(acc)
}

/// Integrates best-response dynamics in the state `(lambda, S)` where `S`
/// is the total prior mass: `dlambda/dt = (BR(lambda) - lambda) / S` and
/// `dS/dt = 1 - mu S`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_brd(
    lambda0: &Belief,
    sum0: f64,
    mu: f64,
    game: &Game,
    tie: TieRule,
    dt: f64,
    horizon_t: f64,
    method: OdeMethod,
) -> Result<OdeSolution> {
    let n = game.n();
    if lambda0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: lambda0.len() });
    }
    if !sum0.is_finite() || sum0 <= 0.0 {
        return Err(Error::InvalidParams(format!("total prior mass {sum0} must be positive")));
    }
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidParams(format!("memory rate mu = {mu} must be nonnegative")));
    }
    let mut y0 = lambda0.as_slice().to_vec();
    y0.push(sum0);
    integrate_generic(
        |_t, y, out| {
            let (lambda, s) = y.split_at(n);
            let s = s[0];
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidParams(format!("total prior mass {s} must stay positive")));
            }
            // Scale invariance of the best response lets lambda act as its
            // own count vector even when integrator stages drift slightly
            // off the simplex.
            let idx = best_response_prior(game, lambda, tie);
            for k in 0..n {
                let br = if k == idx { 1.0 } else { 0.0 };
                out[k] = (br - lambda[k]) / s;
            }
            out[n] = 1.0 - mu * s;
            Ok(())
        },
        &y0,
        dt,
        horizon_t,
        method,
    )
}

/// Length of the intersection of the box with the indifference line
/// `x1 = x2`: `sqrt(2) (side - delta)` for center offset `delta = |c1 - c2|`
/// inside the box, zero otherwise.
pub fn overlap_length(bx: &SquareBox) -> Result<f64> {
    if bx.center.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: bx.center.len() });
    }
    let delta = (bx.center[0] - bx.center[1]).abs();
    if delta < bx.side {
        Ok(std::f64::consts::SQRT_2 * (bx.side - delta))
    } else {
        Ok(0.0)
    }
}

/// Right-hand side of the mean-BR equation for a symmetric 2x2 game with
/// overlap length `l`: `l [[-1, 1], [1, -1]] br`.
pub fn meanbr_ode_rhs_2x2(br: &[f64], l: f64) -> Result<Vec<f64>> {
    if br.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: br.len() });
    }
    if !l.is_finite() || l < 0.0 {
        return Err(Error::InvalidParams(format!("overlap length {l} must be nonnegative")));
    }
    let diff = br[0] - br[1];
    Ok(vec![-l * diff, l * diff])
}

/// Integrates the mean-BR equation under a time-dependent overlap length.
/// With `l` constant the deviation from `(1/2, 1/2)` decays like
/// `exp(-2 l t)` while the component sum is conserved.
pub fn integrate_meanbr_2x2<L>(
    br0: &MeanBR,
    l_schedule: L,
    dt: f64,
    horizon_t: f64,
    method: OdeMethod,
) -> Result<OdeSolution>
where
    L: Fn(f64) -> f64,
{
    if br0.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: br0.len() });
    }
    integrate_generic(
        |t, y, out| {
            let l = l_schedule(t);
            let rhs = meanbr_ode_rhs_2x2(y, l)?;
            out.copy_from_slice(&rhs);
            Ok(())
        },
        br0.as_slice(),
        dt,
        horizon_t,
        method,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn miscoordination_game() -> Game {
        Game::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn skewed_game() -> Game {
        Game::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap()
    }

    #[test]
    fn integrator_examples() {
        // Zero field: constant solution.
        let sol = integrate_generic(
            |_, _, out| {
                out.fill(0.0);
                Ok(())
            },
            &[1.5, -2.5],
            0.1,
            1.0,
            OdeMethod::Rk4,
        )
        .unwrap();
        assert_eq!(sol.len(), 11);
        assert_eq!(sol.last_state(), &[1.5, -2.5]);

        // Exponential decay: RK4 is tight, Euler within first order.
        let decay = |_: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -y[0];
            Ok(())
        };
        let rk = integrate_generic(decay, &[1.0], 0.01, 1.0, OdeMethod::Rk4).unwrap();
        assert!((rk.last_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
        let eu = integrate_generic(decay, &[1.0], 0.01, 1.0, OdeMethod::Euler).unwrap();
        assert!((eu.last_state()[0] - (-1.0f64).exp()).abs() < 1e-2);
    }

    #[test]
    fn rk4_shows_fourth_order_on_a_linear_problem() {
        let decay = |_: f64, y: &[f64], out: &mut [f64]| {
            out[0] = -y[0];
            Ok(())
        };
        let exact = (-1.0f64).exp();
        let err = |dt: f64| {
            let sol = integrate_generic(decay, &[1.0], dt, 1.0, OdeMethod::Rk4).unwrap();
            (sol.last_state()[0] - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((10.0..24.0).contains(&ratio), "error ratio {ratio} is not fourth order");
    }

    #[test]
    fn integrator_aborts_on_non_finite_states() {
        let blowup = |t: f64, _: &[f64], out: &mut [f64]| {
            out[0] = if t > 0.5 { f64::NAN } else { 1.0 };
            Ok(())
        };
        let err = integrate_generic(blowup, &[0.0], 0.1, 1.0, OdeMethod::Euler).unwrap_err();
        match err {
            Error::NonFinite { step, .. } => assert!(step > 5),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(integrate_generic(blowup, &[0.0], -0.1, 1.0, OdeMethod::Euler).is_err());
        assert!(integrate_generic(blowup, &[f64::NAN], 0.1, 1.0, OdeMethod::Euler).is_err());
    }

    #[test]
    fn solution_csv_has_generic_headers() {
        let sol = integrate_generic(
            |_, _, out| {
                out.fill(0.0);
                Ok(())
            },
            &[1.0, 2.0],
            0.5,
            1.0,
            OdeMethod::Euler,
        )
        .unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y_1,y_2\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn box_mean_br_examples() {
        let game = miscoordination_game();
        // Entirely above the diagonal: everyone plays the first action.
        let all_first = SquareBox::new(vec![0.5, 3.5], 1.0).unwrap();
        let br = box_mean_br_2x2(&all_first, &game).unwrap();
        assert_eq!(br.as_slice(), &[1.0, 0.0]);

        // Centered on the diagonal: symmetric split.
        let centered = SquareBox::new(vec![3.5, 3.5], 1.0).unwrap();
        let br = box_mean_br_2x2(&centered, &game).unwrap();
        assert!((br.as_slice()[0] - 0.5).abs() < 1e-12);

        // Offset by 0.1: the diagonal cuts a right triangle with legs 0.9,
        // leaving area 0.405 above it.
        let offset = SquareBox::new(vec![3.6, 3.5], 1.0).unwrap();
        let br = box_mean_br_2x2(&offset, &game).unwrap();
        assert!((br.as_slice()[0] - 0.405).abs() < 1e-12);
        assert!((br.as_slice()[1] - 0.595).abs() < 1e-12);
    }

    #[test]
    fn box_mean_br_on_the_skewed_ray() {
        // The switching ray x2 = 2 x1 lies entirely above this box, so the
        // second action wins everywhere.
        let game = skewed_game();
        let bx = SquareBox::new(vec![3.5, 3.5], 1.0).unwrap();
        let br = box_mean_br_2x2(&bx, &game).unwrap();
        assert_eq!(br.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn box_quadrant_validation() {
        let game = miscoordination_game();
        let negative = SquareBox::new(vec![0.25, 3.5], 1.0).unwrap();
        assert!(box_mean_br_2x2(&negative, &game).is_err());
        let origin = SquareBox::new(vec![0.5, 0.5], 1.0).unwrap();
        assert!(box_mean_br_2x2(&origin, &game).is_err());
        assert!(SquareBox::new(vec![1.0, 1.0], 0.0).is_err());
        assert!(SquareBox::new(vec![1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn diagonal_box_grows_at_rate_half() {
        let game = miscoordination_game();
        let box0 = SquareBox::new(vec![3.5, 3.5], 1.0).unwrap();
        let sol = integrate_box_center(&box0, &game, 1e-3, 2.0, OdeMethod::Euler).unwrap();
        let end = sol.last_state();
        assert!((end[0] - end[1]).abs() < 1e-9, "center left the diagonal: {end:?}");
        assert!((end[0] - 4.5).abs() < 1e-6, "growth rate is not 0.5: {end:?}");
    }

    #[test]
    fn halving_dt_moves_the_center_by_first_order() {
        let game = miscoordination_game();
        let box0 = SquareBox::new(vec![0.5, 3.5], 1.0).unwrap();
        let coarse = integrate_box_center(&box0, &game, 2e-3, 20.0, OdeMethod::Euler).unwrap();
        let fine = integrate_box_center(&box0, &game, 1e-3, 20.0, OdeMethod::Euler).unwrap();
        for k in 0..2 {
            let gap = (coarse.last_state()[k] - fine.last_state()[k]).abs();
            assert!(gap < 0.02, "coordinate {k} moved by {gap}");
        }
    }

    #[test]
    fn brd_rhs_examples() {
        let game = miscoordination_game();
        let lambda = Belief::new(vec![0.3, 0.7]).unwrap();
        let rhs = brd_rhs(&lambda, 10.0, &game, TieRule::LowestIndex).unwrap();
        assert!((rhs[0] - 0.07).abs() < 1e-16);
        assert!((rhs[1] + 0.07).abs() < 1e-16);
        assert_eq!(rhs[0] + rhs[1], 0.0);

        // Rest point of a dominant game.
        let dominant = Game::new(vec![vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let at_vertex = Belief::new(vec![1.0, 0.0]).unwrap();
        let rhs = brd_rhs(&at_vertex, 5.0, &dominant, TieRule::LowestIndex).unwrap();
        assert_eq!(rhs, vec![0.0, 0.0]);

        // Doubling the mass halves the velocity, exactly.
        let slow = brd_rhs(&lambda, 20.0, &game, TieRule::LowestIndex).unwrap();
        let fast = brd_rhs(&lambda, 10.0, &game, TieRule::LowestIndex).unwrap();
        for k in 0..2 {
            assert_eq!(slow[k], fast[k] / 2.0);
        }

        assert!(brd_rhs(&lambda, 0.0, &game, TieRule::LowestIndex).is_err());
        assert!(brd_rhs(&lambda, -1.0, &game, TieRule::LowestIndex).is_err());
    }

    #[test]
    fn lambda_rhs_examples() {
        // Belief already at the mean response: no motion.
        let ens = Ensemble::new(2, vec![1.0, 1.0], vec![1.0], 0.0).unwrap();
        let br = MeanBR::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(lambda_rhs_ensemble(&ens, &br).unwrap(), vec![0.0, 0.0]);

        // Single particle, hand-evaluated integrand.
        let ens = Ensemble::new(2, vec![1.0, 3.0], vec![1.0], 0.0).unwrap();
        let br = MeanBR::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(lambda_rhs_ensemble(&ens, &br).unwrap(), vec![0.1875, -0.1875]);

        // Components sum to zero across a mixed ensemble.
        let ens = Ensemble::new(
            2,
            vec![1.0, 3.0, 2.0, 0.5, 4.0, 4.0],
            vec![0.25, 0.5, 0.25],
            0.0,
        )
        .unwrap();
        let br = MeanBR::new(vec![0.75, 0.25]).unwrap();
        let rhs = lambda_rhs_ensemble(&ens, &br).unwrap();
        assert!((rhs[0] + rhs[1]).abs() < 1e-15);
    }

    #[test]
    fn brd_integration_stays_on_the_simplex_and_converges() {
        let game = miscoordination_game();
        let lambda0 = Belief::new(vec![0.3, 0.7]).unwrap();
        let sol = integrate_brd(
            &lambda0,
            4.0,
            0.0,
            &game,
            TieRule::LowestIndex,
            1e-3,
            20.0,
            OdeMethod::Rk4,
        )
        .unwrap();
        for i in (0..sol.len()).step_by(500) {
            let y = sol.state(i);
            assert!((y[0] + y[1] - 1.0).abs() <= 1e-9 * (1.0 + sol.time(i)));
        }
        let end = sol.last_state();
        assert!((end[0] - 0.5).abs() < 0.05, "lambda did not approach the equilibrium: {end:?}");
        // Mass grows linearly when mu = 0.
        assert!((end[2] - 24.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_length_examples() {
        let on_diag = SquareBox::new(vec![3.5, 3.5], 1.0).unwrap();
        assert!((overlap_length(&on_diag).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-15);

        let offset = SquareBox::new(vec![3.5, 3.2], 1.0).unwrap();
        let expect = std::f64::consts::SQRT_2 * 0.7;
        assert!((overlap_length(&offset).unwrap() - expect).abs() < 1e-12);

        let disjoint = SquareBox::new(vec![5.0, 3.0], 1.0).unwrap();
        assert_eq!(overlap_length(&disjoint).unwrap(), 0.0);
    }

    #[test]
    fn meanbr_rhs_examples() {
        let rest = meanbr_ode_rhs_2x2(&[0.5, 0.5], 3.0).unwrap();
        assert_eq!(rest, vec![0.0, 0.0]);

        let corner = meanbr_ode_rhs_2x2(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(corner, vec![-1.0, 1.0]);
        assert_eq!(corner[0] + corner[1], 0.0);

        assert!(meanbr_ode_rhs_2x2(&[1.0, 0.0], -1.0).is_err());
        assert!(meanbr_ode_rhs_2x2(&[1.0], 1.0).is_err());
    }

    #[test]
    fn meanbr_integration_matches_the_closed_form() {
        let br0 = MeanBR::new(vec![1.0, 0.0]).unwrap();
        let sol = integrate_meanbr_2x2(&br0, |_| 1.0, 1e-3, 1.0, OdeMethod::Rk4).unwrap();
        // Half-life of the deviation: e^{-2t} = 1/2.
        let t_half = 0.5 * std::f64::consts::LN_2;
        let y = sol.interp(t_half).unwrap();
        assert!((y[0] - 0.75).abs() < 1e-6, "got {y:?}");
        assert!((y[1] - 0.25).abs() < 1e-6);
        // Conservation of the component sum.
        for i in 0..sol.len() {
            let s = sol.state(i);
            assert!((s[0] + s[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn meanbr_rest_point_is_bitwise_stationary() {
        let br0 = MeanBR::new(vec![0.5, 0.5]).unwrap();
        let sol = integrate_meanbr_2x2(&br0, |_| 1.0, 0.1, 1.0, OdeMethod::Euler).unwrap();
        for i in 0..sol.len() {
            assert_eq!(sol.state(i), &[0.5, 0.5]);
        }
    }

    #[test]
    fn meanbr_decay_rate_is_two() {
        let br0 = MeanBR::new(vec![1.0, 0.0]).unwrap();
        let sol = integrate_meanbr_2x2(&br0, |_| 1.0, 0.01, 5.0, OdeMethod::Rk4).unwrap();
        // Least-squares slope of ln |br - (0.5, 0.5)| over t in [1, 5].
        let mut pts = Vec::new();
        for i in 0..sol.len() {
            let t = sol.time(i);
            if t < 1.0 {
                continue;
            }
            let s = sol.state(i);
            let dev = ((s[0] - 0.5).powi(2) + (s[1] - 0.5).powi(2)).sqrt();
            pts.push((t, dev.ln()));
        }
        let rate = -fit_slope(&pts);
        assert!((1.9..=2.1).contains(&rate), "fitted decay rate {rate}");
    }

    fn fit_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        cov / var
    }

    #[test]
    fn box_mean_belief_quadrature_converges() {
        // On a diagonal box the mean belief is exactly (1/2, 1/2).
        let bx = SquareBox::new(vec![3.5, 3.5], 1.0).unwrap();
        let lambda = box_mean_belief(&bx, 64).unwrap();
        assert!((lambda[0] - 0.5).abs() < 1e-12);
        // Refining the grid changes the off-diagonal case only slightly.
        let bx = SquareBox::new(vec![0.5, 3.5], 1.0).unwrap();
        let coarse = box_mean_belief(&bx, 32).unwrap();
        let fine = box_mean_belief(&bx, 128).unwrap();
        assert!((coarse[0] - fine[0]).abs() < 1e-4);
    }
}
