//! Symmetric finite games, beliefs, and best responses.
//!
//! A game is an `n x n` payoff matrix `A`: `A[i][j]` is the payoff for
//! playing action `i` against an opponent playing action `j`. Against a
//! mixed opponent `p` the expected payoffs are `A p`, and a best response
//! maximizes that vector. Ties are resolved by an explicit [`TieRule`] so
//! every engine is deterministic.

use crate::error::{Error, Result};
use crate::rng::mix64;

/// Entry tolerance for simplex membership checks.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A symmetric finite game given by its payoff matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    n: usize,
    payoff: Vec<f64>,
    labels: Vec<String>,
}

impl Game {
    /// Builds a game from payoff rows. Requires a square matrix with at
    /// least two actions and finite entries.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidGame(format!("need at least 2 actions, got {n}")));
        }
        let mut payoff = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGame(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidGame(format!("payoff[{i}][{j}] = {x} is not finite")));
                }
                payoff.push(x);
            }
        }
        let labels = (1..=n).map(|i| format!("a{i}")).collect();
        Ok(Game { n, payoff, labels })
    }

    /// As [`Game::new`] with one label per action.
    pub fn with_labels(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let mut game = Game::new(rows)?;
        if labels.len() != game.n {
            return Err(Error::InvalidGame(format!(
                "{} labels for {} actions",
                labels.len(),
                game.n
            )));
        }
        game.labels = labels;
        Ok(game)
    }

    /// Number of actions.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Payoff for action `i` against action `j`.
    pub fn payoff(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.n + j]
    }

    /// Row `i` of the payoff matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.payoff[i * self.n..(i + 1) * self.n]
    }

    /// Flat row-major payoff matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.payoff
    }

    /// Label of action `i`.
    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    p: Vec<f64>,
}

impl Belief {
    /// Validates and stores a probability vector: entries finite and
    /// nonnegative (within [`SIMPLEX_TOL`], then clamped), sum within
    /// [`SIMPLEX_TOL`] of one.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidBelief(format!("need at least 2 entries, got {}", p.len())));
        }
        let mut p = p;
        for (i, x) in p.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidBelief(format!("entry {i} = {x} is not finite")));
            }
            if *x < -SIMPLEX_TOL {
                return Err(Error::InvalidBelief(format!("entry {i} = {x} is negative")));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}, expected 1")));
        }
        Ok(Belief { p })
    }

    /// Normalizes a nonnegative count vector with positive total mass.
    pub fn from_counts(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidBelief(format!("need at least 2 entries, got {}", x.len())));
        }
        let mut sum = 0.0;
        for (i, &c) in x.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidBelief(format!("count {i} = {c} is not a finite nonnegative value")));
            }
            sum += c;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidBelief("counts sum to zero".into()));
        }
        Ok(Belief { p: x.iter().map(|&c| c / sum).collect() })
    }

    /// Uniform belief over `n` actions.
    pub fn uniform(n: usize) -> Self {
        Belief { p: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

/// How exact payoff ties are resolved.
///
/// `Uniform` picks among the tied actions by a stateless keyed hash of the
/// belief bits, so it is a pure function of (seed, belief) and can be
/// evaluated concurrently without shared state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieRule {
    #[default]
    LowestIndex,
    Uniform { seed: u64 },
}

fn tie_pick(seed: u64, belief: &[f64], tied: &[usize]) -> usize {
    let mut h = mix64(seed ^ (belief.len() as u64));
    for &x in belief {
        h = mix64(h ^ x.to_bits());
    }
    tied[(h % tied.len() as u64) as usize]
}

/// Expected payoff of each action against the mixed opponent `p`: `A p`.
pub fn expected_payoffs(game: &Game, p: &Belief) -> Result<Vec<f64>> {
    if p.len() != game.n() {
        return Err(Error::DimensionMismatch { expected: game.n(), got: p.len() });
    }
    let p = p.as_slice();
    Ok((0..game.n())
        .map(|i| game.row(i).iter().zip(p).map(|(a, q)| a * q).sum())
        .collect())
}

fn argmax_with_ties(values: &[f64], belief_for_tie: &[f64], tie: TieRule) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    match tie {
        TieRule::LowestIndex => {
            // The scan above already keeps the lowest index on exact ties.
            best
        }
        TieRule::Uniform { seed } => {
            let top = values[best];
            let tied: Vec<usize> =
                values.iter().enumerate().filter(|(_, &v)| v == top).map(|(i, _)| i).collect();
            if tied.len() == 1 {
                best
            } else {
                tie_pick(seed, belief_for_tie, &tied)
            }
        }
    }
}

/// Index of a payoff-maximizing action against `p`. Exact float ties go to
/// the tie rule.
pub fn best_response(game: &Game, p: &Belief, tie: TieRule) -> Result<usize> {
    let values = expected_payoffs(game, p)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBelief("expected payoffs are not finite".into()));
    }
    Ok(argmax_with_ties(&values, p.as_slice(), tie))
}

/// Best response as a simplex vertex.
pub fn best_response_vertex(game: &Game, p: &Belief, tie: TieRule) -> Result<Vec<f64>> {
    let idx = best_response(game, p, tie)?;
    let mut e = vec![0.0; game.n()];
    e[idx] = 1.0;
    Ok(e)
}

/// Best response to the belief induced by an unnormalized prior `x` with
/// positive total mass.
///
/// `argmax A(x / sum x) = argmax A x`, so the hot engine loops skip the
/// normalization entirely. The uniform tie rule still hashes the normalized
/// belief, to agree with [`best_response`] on which action a tied state maps
/// to regardless of scaling.
pub fn best_response_prior(game: &Game, x: &[f64], tie: TieRule) -> usize {
    debug_assert_eq!(x.len(), game.n());
    debug_assert!(x.iter().sum::<f64>() > 0.0);
    let n = game.n();
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..n {
        let v: f64 = game.row(i).iter().zip(x).map(|(a, q)| a * q).sum();
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    if let TieRule::Uniform { seed } = tie {
        let mut tied = Vec::new();
        for i in 0..n {
            let v: f64 = game.row(i).iter().zip(x).map(|(a, q)| a * q).sum();
            if v == best_v {
                tied.push(i);
            }
        }
        if tied.len() > 1 {
            let sum: f64 = x.iter().sum();
            let belief: Vec<f64> = x.iter().map(|&c| c / sum).collect();
            return tie_pick(seed, &belief, &tied);
        }
    }
    best
}

/// Interior mixed Nash equilibrium of a 2-action game.
///
/// Writing the payoffs as rows `[a, d; c, b]`, an interior equilibrium with
/// both actions indifferent exists and attracts best-response dynamics
/// exactly when each action beats itself being mirrored, `c > a` and
/// `d > b`. Then `p* = ((d - b), (c - a)) / ((d - b) + (c - a))`.
pub fn mixed_ne_2x2(game: &Game) -> Result<Belief> {
    if game.n() != 2 {
        return Err(Error::NoMixedEquilibrium(format!("game has {} actions, expected 2", game.n())));
    }
    let a = game.payoff(0, 0);
    let d = game.payoff(0, 1);
    let c = game.payoff(1, 0);
    let b = game.payoff(1, 1);
    if c <= a || d <= b {
        return Err(Error::NoMixedEquilibrium(format!(
            "need payoff(1,0) > payoff(0,0) and payoff(0,1) > payoff(1,1), got [[{a}, {d}], [{c}, {b}]]"
        )));
    }
    let denom = (d - b) + (c - a);
    Belief::new(vec![(d - b) / denom, (c - a) / denom])
}

/// Whether `v . (A + A^T) v < 0` for every nonzero `v` with zero component
/// sum, i.e. the mean payoff functional is strictly concave along the
/// simplex.
///
/// The tangent space `{sum v = 0}` is spanned by an orthonormal Helmert
/// basis `H`; the condition holds iff every eigenvalue of `H^T (A + A^T) H`
/// is below `-1e-10`.
pub fn is_strictly_concave_payoff(game: &Game) -> bool {
    let n = game.n();
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sym[i * n + j] = game.payoff(i, j) + game.payoff(j, i);
        }
    }

    // Helmert column k (1-based): k entries 1/sqrt(k(k+1)), then -k/sqrt(k(k+1)).
    let m = n - 1;
    let mut basis = vec![0.0; n * m];
    for k in 1..n {
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            basis[i * m + (k - 1)] = norm;
        }
        basis[k * m + (k - 1)] = -(k as f64) * norm;
    }

    let mut projected = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += basis[i * m + r] * sym[i * n + j] * basis[j * m + c];
                }
            }
            projected[r * m + c] = acc;
        }
    }

    crate::linalg::sym_eigenvalues(m, &projected).iter().all(|&l| l < -1e-10)
}
