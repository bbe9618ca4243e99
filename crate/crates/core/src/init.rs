//! Initial distributions over prior space.
//!
//! Priors live in the closed positive orthant minus the origin's face
//! `{sum x = 0}`, where beliefs are undefined. Every distribution validates
//! that its support stays clear of that face.

use crate::error::{Error, Result};
use crate::rng::SimRng;
use rand::Rng;

/// Where agents' priors / particles' positions start.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDistribution {
    /// Independent uniform draws from the axis-aligned box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Everyone starts at `x`.
    PointMass { x: Vec<f64> },
    /// A regular midpoint grid over `[lo, hi]` with `counts[k]` cells per
    /// axis. Used as a quadrature rule: the point set is deterministic.
    Lattice { lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize> },
}

impl InitialDistribution {
    /// Dimension of the sampled vectors.
    pub fn dim(&self) -> usize {
        match self {
            InitialDistribution::UniformBox { lo, .. } => lo.len(),
            InitialDistribution::PointMass { x } => x.len(),
            InitialDistribution::Lattice { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialDistribution::UniformBox { lo, hi } => {
                check_box(lo, hi)?;
                if lo.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidDistribution(
                        "uniform box support touches {sum x = 0}; need sum(lo) > 0".into(),
                    ));
                }
                Ok(())
            }
            InitialDistribution::PointMass { x } => {
                check_nonneg_finite(x)?;
                if x.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidDistribution("point mass has zero total mass".into()));
                }
                Ok(())
            }
            InitialDistribution::Lattice { lo, hi, counts } => {
                check_box(lo, hi)?;
                if counts.len() != lo.len() {
                    return Err(Error::InvalidDistribution(format!(
                        "{} axis counts for dimension {}",
                        counts.len(),
                        lo.len()
                    )));
                }
                if counts.contains(&0) {
                    return Err(Error::InvalidDistribution("lattice counts must be positive".into()));
                }
                // The support is the finite point set; only its lowest
                // corner point has to clear {sum x = 0}.
                let min_sum: f64 = lo
                    .iter()
                    .zip(hi)
                    .zip(counts)
                    .map(|((&l, &h), &c)| l + 0.5 * (h - l) / c as f64)
                    .sum();
                if min_sum <= 0.0 {
                    return Err(Error::InvalidDistribution(
                        "lattice support touches {sum x = 0}".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Number of points when the distribution is a deterministic point set.
    pub fn lattice_size(&self) -> Option<usize> {
        match self {
            InitialDistribution::Lattice { counts, .. } => Some(counts.iter().product()),
            _ => None,
        }
    }

    /// The full lattice point set, row-major points, first axis slowest.
    pub fn lattice_points(&self) -> Option<Vec<f64>> {
        let InitialDistribution::Lattice { lo, hi, counts } = self else {
            return None;
        };
        let dim = lo.len();
        let total: usize = counts.iter().product();
        let mut points = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            for k in 0..dim {
                let step = (hi[k] - lo[k]) / counts[k] as f64;
                points.push(lo[k] + (idx[k] as f64 + 0.5) * step);
            }
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Some(points)
    }

    /// Draws one point into `out`. For `Lattice` the draw is a uniformly
    /// random lattice point.
    pub fn sample_into(&self, rng: &mut SimRng, out: &mut [f64]) {
        match self {
            InitialDistribution::UniformBox { lo, hi } => {
                for ((o, &l), &h) in out.iter_mut().zip(lo).zip(hi) {
                    let u: f64 = rng.gen();
                    *o = l + u * (h - l);
                }
            }
            InitialDistribution::PointMass { x } => out.copy_from_slice(x),
            InitialDistribution::Lattice { lo, hi, counts } => {
                for (((o, &l), &h), &c) in out.iter_mut().zip(lo).zip(hi).zip(counts) {
                    let cell = rng.gen_range(0..c);
                    let step = (h - l) / c as f64;
                    *o = l + (cell as f64 + 0.5) * step;
                }
            }
        }
    }
}

fn check_nonneg_finite(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidDistribution(format!("dimension {} is below 2", x.len())));
    }
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "coordinate {i} = {v} is outside the positive orthant"
            )));
        }
    }
    Ok(())
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    check_nonneg_finite(lo)?;
    if hi.len() != lo.len() {
        return Err(Error::InvalidDistribution(format!(
            "lo has dimension {}, hi has {}",
            lo.len(),
            hi.len()
        )));
    }
    for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if !h.is_finite() || h <= l {
            return Err(Error::InvalidDistribution(format!(
                "axis {i}: need lo < hi, got [{l}, {h}]"
            )));
        }
    }
    Ok(())
}
