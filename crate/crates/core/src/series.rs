//! Time series of population observables and their CSV form.
//!
//! One row per sample time: mean belief (lambda), mean best response, mean
//! prior, and the coordinatewise bounding box of the population. The CSV
//! schema is `t, lambda_1..n, brbar_1..n, mean_prior_1..n, bbox_lo_1..n,
//! bbox_hi_1..n` with every value printed to 17 significant digits, so a
//! written file parses back bit for bit.

use crate::error::{Error, Result};
use std::io::{self, BufRead, Write};

/// Column blocks of the series, each `n` wide.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Lambda,
    MeanBr,
    MeanPrior,
    BboxLo,
    BboxHi,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::Lambda, Block::MeanBr, Block::MeanPrior, Block::BboxLo, Block::BboxHi];

    /// Column-name prefix in the CSV header.
    pub fn prefix(self) -> &'static str {
        match self {
            Block::Lambda => "lambda",
            Block::MeanBr => "brbar",
            Block::MeanPrior => "mean_prior",
            Block::BboxLo => "bbox_lo",
            Block::BboxHi => "bbox_hi",
        }
    }
}

/// Sampled observables of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    n: usize,
    times: Vec<f64>,
    lambda: Vec<f64>,
    mean_br: Vec<f64>,
    mean_prior: Vec<f64>,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
}

/// Formats to 17 significant digits; parsing the result recovers the exact
/// bit pattern.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

impl ObservableSeries {
    pub fn new(n: usize) -> Self {
        ObservableSeries {
            n,
            times: Vec::new(),
            lambda: Vec::new(),
            mean_br: Vec::new(),
            mean_prior: Vec::new(),
            bbox_lo: Vec::new(),
            bbox_hi: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
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

    /// Appends one sample. Times must be strictly increasing, all values
    /// finite, the simplex blocks close to unit mass, and the box ordered.
    pub fn push_row(
        &mut self,
        t: f64,
        lambda: &[f64],
        mean_br: &[f64],
        mean_prior: &[f64],
        bbox_lo: &[f64],
        bbox_hi: &[f64],
    ) -> Result<()> {
        let n = self.n;
        for (name, block) in [
            ("lambda", lambda),
            ("brbar", mean_br),
            ("mean_prior", mean_prior),
            ("bbox_lo", bbox_lo),
            ("bbox_hi", bbox_hi),
        ] {
            if block.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: block.len() });
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSeries(format!("{name} has a non-finite entry at t = {t}")));
            }
        }
        if !t.is_finite() {
            return Err(Error::InvalidSeries(format!("non-finite time {t}")));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::InvalidSeries(format!("time {t} does not increase past {last}")));
            }
        }
        for (name, block) in [("lambda", lambda), ("brbar", mean_br)] {
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || block.iter().any(|&v| v < -1e-9) {
                return Err(Error::InvalidSeries(format!(
                    "{name} at t = {t} is not a probability vector (sum = {sum})"
                )));
            }
        }
        if bbox_lo.iter().zip(bbox_hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidSeries(format!("bounding box inverted at t = {t}")));
        }

        self.times.push(t);
        self.lambda.extend_from_slice(lambda);
        self.mean_br.extend_from_slice(mean_br);
        self.mean_prior.extend_from_slice(mean_prior);
        self.bbox_lo.extend_from_slice(bbox_lo);
        self.bbox_hi.extend_from_slice(bbox_hi);
        Ok(())
    }

    fn block(&self, which: Block) -> &[f64] {
        match which {
            Block::Lambda => &self.lambda,
            Block::MeanBr => &self.mean_br,
            Block::MeanPrior => &self.mean_prior,
            Block::BboxLo => &self.bbox_lo,
            Block::BboxHi => &self.bbox_hi,
        }
    }

    /// Row `i` of one column block.
    pub fn row(&self, which: Block, i: usize) -> &[f64] {
        &self.block(which)[i * self.n..(i + 1) * self.n]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Linear interpolation of a block at time `t`; `None` outside the
    /// sampled range.
    pub fn interp(&self, which: Block, t: f64) -> Option<Vec<f64>> {
        if self.times.is_empty() || t < self.times[0] || t > *self.times.last().unwrap() {
            return None;
        }
        let hi = self.times.partition_point(|&s| s < t);
        if hi == 0 {
            return Some(self.row(which, 0).to_vec());
        }
        if (self.times[hi] - t).abs() == 0.0 {
            return Some(self.row(which, hi).to_vec());
        }
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        let a = self.row(which, lo);
        let b = self.row(which, hi);
        Some(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect())
    }

    /// Writes the CSV representation.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "t")?;
        for block in Block::ALL {
            for k in 1..=self.n {
                write!(w, ",{}_{k}", block.prefix())?;
            }
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{}", fmt_g17(self.times[i]))?;
            for block in Block::ALL {
                for v in self.row(block, i) {
                    write!(w, ",{}", fmt_g17(*v))?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parses a CSV previously produced by [`ObservableSeries::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidSeries("empty file".into()))?
            .map_err(|e| Error::InvalidSeries(format!("read failed: {e}")))?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 6 || !(cols.len() - 1).is_multiple_of(5) {
            return Err(Error::InvalidSeries(format!("unexpected column count {}", cols.len())));
        }
        let n = (cols.len() - 1) / 5;
        if cols[0] != "t" {
            return Err(Error::InvalidSeries(format!("first column is '{}', expected 't'", cols[0])));
        }
        for (b, block) in Block::ALL.iter().enumerate() {
            for k in 0..n {
                let got = cols[1 + b * n + k];
                let want = format!("{}_{}", block.prefix(), k + 1);
                if got != want {
                    return Err(Error::InvalidSeries(format!("column '{got}', expected '{want}'")));
                }
            }
        }

        let mut series = ObservableSeries::new(n);
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::InvalidSeries(format!("read failed: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut values = Vec::with_capacity(1 + 5 * n);
            for field in line.trim_end().split(',') {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidSeries(format!("line {}: bad number '{field}'", lineno + 2))
                })?;
                values.push(v);
            }
            if values.len() != 1 + 5 * n {
                return Err(Error::InvalidSeries(format!(
                    "line {}: {} fields, expected {}",
                    lineno + 2,
                    values.len(),
                    1 + 5 * n
                )));
            }
            let (t, rest) = values.split_first().unwrap();
            series.push_row(
                *t,
                &rest[0..n],
                &rest[n..2 * n],
                &rest[2 * n..3 * n],
                &rest[3 * n..4 * n],
                &rest[4 * n..5 * n],
            )?;
        }
        Ok(series)
    }

    /// Bit-level equality of all stored values.
    pub fn bitwise_eq(&self, other: &ObservableSeries) -> bool {
        let eq = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        };
        self.n == other.n
            && eq(&self.times, &other.times)
            && Block::ALL.iter().all(|&b| eq(self.block(b), other.block(b)))
    }
}
