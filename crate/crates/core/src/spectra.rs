//! Eigenvalue sequences of the input Hamiltonians.
//!
//! A [`SpectralSequence`] is a validated, strictly increasing list of
//! eigenvalues `ε_0 < ε_1 < ...` truncated at `D` levels. Coherent-state
//! coefficients need the ground-shifted values `ε̃_n = ε_n - ε_0` and their
//! running products `ε̃_n! = ε̃_1 ⋯ ε̃_n`, which live in [`ShiftedSequence`]
//! and [`FactorialCache`].
//!
//! Two regimes exist. Constructions built on a zero ground level
//! ([`Regime::GroundAtZero`]) require `ε_0 = 0`; the shifted constructions
//! ([`Regime::Shifted`]) accept any `ε_0 >= 0` and subtract it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute gap below which two eigenvalues count as coincident.
pub const EDS_TOLERANCE: f64 = 1e-9;

/// Linear products above this magnitude are only kept in log form.
const LINEAR_LIMIT: f64 = 1e300;

/// Which ground-level convention a construction works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `ε_0 = 0` is required; no shift is applied.
    GroundAtZero,
    /// `ε_0 >= 0`; constructions subtract `ε_0`.
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSequence {
    values: Vec<f64>,
    omega: f64,
}

impl SpectralSequence {
    pub fn new(values: Vec<f64>, omega: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                min: 2,
                got: values.len(),
            });
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::BadScale(omega));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        for (index, w) in values.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NonMonotone {
                    index: index + 1,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        if values[0] < 0.0 {
            return Err(Error::NegativeGround(values[0]));
        }
        Ok(Self { values, omega })
    }

    /// `ε_n = ω n + offset` for `n < len`.
    pub fn linear(omega: f64, offset: f64, len: usize) -> Result<Self> {
        let values = (0..len).map(|n| omega * n as f64 + offset).collect();
        Self::new(values, omega)
    }

    /// Quon numbers scaled by `ω`: `ε_n = ω [n]_q`, with `[0]_q = 0` and
    /// `[n+1]_q = 1 + q [n]_q`.
    pub fn quon(q: f64, omega: f64, len: usize) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::BadDeformation(q));
        }
        let values = q_numbers(q, len).into_iter().map(|v| omega * v).collect();
        Self::new(values, omega)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn ground(&self) -> f64 {
        self.values[0]
    }

    /// Checks that the sequence is usable in `regime`.
    pub fn require_regime(&self, regime: Regime) -> Result<()> {
        match regime {
            Regime::GroundAtZero if self.values[0] != 0.0 => Err(Error::RegimeError(format!(
                "ground value {} must be exactly zero",
                self.values[0]
            ))),
            _ => Ok(()),
        }
    }

    /// First `len` values as a new sequence.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len > self.len() {
            return Err(Error::LengthMismatch(format!(
                "cannot truncate {} values to {len}",
                self.len()
            )));
        }
        Self::new(self.values[..len].to_vec(), self.omega)
    }
}

/// `[n]_q` for `n < len`; `q = 1` gives `n`.
pub fn q_numbers(q: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut cur = 0.0;
    for _ in 0..len {
        out.push(cur);
        cur = 1.0 + q * cur;
    }
    out
}

/// A sequence together with its ground-shifted values `ε̃_n = ε_n - ε_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSequence {
    base: SpectralSequence,
    shifted: Vec<f64>,
}

impl ShiftedSequence {
    pub fn base(&self) -> &SpectralSequence {
        &self.base
    }

    pub fn shift(&self) -> f64 {
        self.base.ground()
    }

    /// `ε̃_n`; the first entry is exactly zero.
    pub fn values(&self) -> &[f64] {
        &self.shifted
    }

    /// Unshifted `ε_n`, used for phases.
    pub fn energies(&self) -> &[f64] {
        self.base.values()
    }

    pub fn len(&self) -> usize {
        self.shifted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifted.is_empty()
    }

    /// The shifted values as a sequence of their own (zero ground).
    pub fn as_sequence(&self) -> SpectralSequence {
        SpectralSequence {
            values: self.shifted.clone(),
            omega: self.base.omega,
        }
    }
}

pub fn shift(s: &SpectralSequence) -> ShiftedSequence {
    let e0 = s.ground();
    let shifted = s.values.iter().map(|&v| v - e0).collect();
    ShiftedSequence {
        base: s.clone(),
        shifted,
    }
}

/// Running products `ε̃_n!`, kept in linear and log form.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialCache {
    logs: Vec<f64>,
    linear: Vec<f64>,
}

impl FactorialCache {
    /// `ln ε̃_n!`; authoritative for every `n`.
    pub fn ln(&self, n: usize) -> f64 {
        self.logs[n]
    }

    pub fn logs(&self) -> &[f64] {
        &self.logs
    }

    /// Linear products; fails once the product passes `1e300`.
    pub fn products(&self) -> Result<&[f64]> {
        match self.linear.iter().position(|p| !(p.is_finite() && *p <= LINEAR_LIMIT)) {
            Some(index) => Err(Error::Overflow { index }),
            None => Ok(&self.linear),
        }
    }

    pub fn get(&self, n: usize) -> Result<f64> {
        let p = self.linear[n];
        if p.is_finite() && p <= LINEAR_LIMIT {
            Ok(p)
        } else {
            Err(Error::Overflow { index: n })
        }
    }

    pub fn len(&self) -> usize {
        self.logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logs.is_empty()
    }
}

pub fn factorials(s: &ShiftedSequence) -> FactorialCache {
    let vals = s.values();
    let mut logs = Vec::with_capacity(vals.len());
    let mut linear = Vec::with_capacity(vals.len());
    let (mut lp, mut p) = (0.0_f64, 1.0_f64);
    logs.push(lp);
    linear.push(p);
    for &v in &vals[1..] {
        lp += v.ln();
        p *= v;
        logs.push(lp);
        linear.push(p);
    }
    FactorialCache { logs, linear }
}

/// Outcome of the pairwise disjointness scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdsReport {
    pub disjoint: bool,
    /// Indices `(n, m)` of the closest pair `ε_n^(1)`, `ε_m^(2)`.
    pub nearest: (usize, usize),
    pub gap: f64,
}

pub fn eds_check(s1: &SpectralSequence, s2: &SpectralSequence, tol: f64) -> EdsReport {
    let mut best = (0, 0, f64::INFINITY);
    for (n, a) in s1.values.iter().enumerate() {
        for (m, b) in s2.values.iter().enumerate() {
            let gap = (a - b).abs();
            if gap < best.2 {
                best = (n, m, gap);
            }
        }
    }
    EdsReport {
        disjoint: best.2 > tol,
        nearest: (best.0, best.1),
        gap: best.2,
    }
}

/// Pairwise disjointness over every pair of sectors.
pub fn eds_check_all(seqs: &[SpectralSequence], tol: f64) -> Result<()> {
    for i in 0..seqs.len() {
        for k in i + 1..seqs.len() {
            let r = eds_check(&seqs[i], &seqs[k], tol);
            if !r.disjoint {
                return Err(Error::NotEds {
                    n: r.nearest.0,
                    m: r.nearest.1,
                    gap: r.gap,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "flag", rename_all = "kebab-case")]
pub enum RadiusFlag {
    Divergent,
    BoundedSuspect { limit: f64 },
    InsufficientData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusEstimate {
    pub last: f64,
    pub flag: RadiusFlag,
}

impl RadiusEstimate {
    /// Radius to test `J` against; infinite unless the tail looks bounded.
    pub fn radius(&self) -> f64 {
        match self.flag {
            RadiusFlag::BoundedSuspect { limit } => limit,
            _ => f64::INFINITY,
        }
    }
}

/// Increments decaying at least this fast (ratio) count as a convergent tail.
const GEOMETRIC_RATIO: f64 = 0.98;

/// Advisory guess at `lim ε_n` from the last quartile of increments.
///
/// Geometrically shrinking increments are extrapolated to a finite limit;
/// anything else is reported as divergent.
pub fn radius_estimate(s: &SpectralSequence) -> RadiusEstimate {
    let v = &s.values;
    let last = v[v.len() - 1];
    if v.len() < 4 {
        return RadiusEstimate {
            last,
            flag: RadiusFlag::InsufficientData,
        };
    }
    let inc: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let start = (inc.len() * 3 / 4).min(inc.len() - 2);
    let tail = &inc[start..];
    let max_ratio = tail.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);
    let flag = if max_ratio < GEOMETRIC_RATIO {
        let d = tail[tail.len() - 1];
        RadiusFlag::BoundedSuspect {
            limit: last + d * max_ratio / (1.0 - max_ratio),
        }
    } else {
        RadiusFlag::Divergent
    };
    RadiusEstimate { last, flag }
}

/// Closed-form or explicit description of a spectrum, as read from configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumSpec {
    /// `ε_n = ω n + offset`.
    Linear {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `ε_n = ω [n]_q + offset`.
    Quon {
        q: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `ε_n = ω n^2 + offset`.
    Quadratic {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    Values {
        values: Vec<f64>,
        #[serde(default = "one")]
        omega: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl SpectrumSpec {
    pub fn build(&self, len: usize) -> Result<SpectralSequence> {
        match self {
            Self::Linear { omega, offset } => SpectralSequence::linear(*omega, *offset, len),
            Self::Quon { q, omega, offset } => {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(Error::BadDeformation(*q));
                }
                let values = q_numbers(*q, len).into_iter().map(|v| omega * v + offset).collect();
                SpectralSequence::new(values, *omega)
            }
            Self::Quadratic { omega, offset } => {
                let values = (0..len).map(|n| omega * (n * n) as f64 + offset).collect();
                SpectralSequence::new(values, *omega)
            }
            Self::Values { values, omega } => {
                if values.len() < len {
                    return Err(Error::LengthMismatch(format!(
                        "explicit spectrum has {} values, need {len}",
                        values.len()
                    )));
                }
                SpectralSequence::new(values[..len].to_vec(), *omega)
            }
        }
    }
}
