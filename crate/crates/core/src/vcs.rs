//! Vector Gazeau-Klauder coherent states on `C^N ⊗ H_D`.
//!
//! Two families are built here:
//!
//! * the δ-family on two sectors with zero ground levels, coefficients
//!   `J_1^{n/2} e^{-i(ε_n+δ)γ} / sqrt(ε_n! N)` in the first sector and
//!   `J_2^{n/2} e^{+i(ε_n+δ)γ} / sqrt(ε_n! N)` in the second;
//! * the EDS family on any number of sectors with pairwise disjoint spectra,
//!   coefficients `J_j^{n/2} e^{-iε_n γ} / sqrt(ε̃_n! Ñ)` with the same sign in
//!   every sector.
//!
//! `N = Σ_j M_j(J_j)` with `M_j(J) = Σ_k J^k / ε̃_k!`. Series are summed up to
//! the truncation `D`, so every state is normalized exactly on the truncated
//! space; the discarded mass is tracked separately as a tail bound.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{delta_evolution, hamiltonian, matrix_exponential, BlockOperator, SectorSpace, SusyVector};
use crate::linalg::CVector;
use crate::spectra::{
    eds_check_all, factorials, radius_estimate, shift, Regime, ShiftedSequence, SpectralSequence, EDS_TOLERANCE,
};

/// Largest truncation mass accepted for a coherent state.
pub const MAX_TAIL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Delta { delta: f64 },
    Eds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VcsParams {
    /// One intensity per sector.
    pub j: Vec<f64>,
    pub gamma: f64,
}

impl VcsParams {
    pub fn new(j: Vec<f64>, gamma: f64) -> Self {
        Self { j, gamma }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            j: self.j.clone(),
            gamma,
        }
    }
}

/// Partial sum `Σ_{k<D} J^k / ε̃_k!` and a bound on the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    pub value: f64,
    /// Bound on `Σ_{k>=D} J^k / ε̃_k!`.
    pub tail: f64,
    /// The last retained term `J^{D-1} / ε̃_{D-1}!`.
    pub last: f64,
}

/// Sums `M̃(J)` over the whole sequence.
///
/// The remainder is bounded by the geometric series with ratio
/// `J / ε̃_{D-1}`, valid because the sequence keeps increasing.
pub fn series_norm(seq: &ShiftedSequence, j: f64) -> Result<SeriesSum> {
    if !(j.is_finite() && j >= 0.0) {
        return Err(Error::BadParameter(format!("J = {j} must be finite and nonnegative")));
    }
    let radius = radius_estimate(&seq.as_sequence()).radius();
    if j >= radius {
        return Err(Error::OutOfDisc { j, radius });
    }
    let sum = series_sum(seq, j);
    if sum.tail / sum.value > MAX_TAIL {
        return Err(Error::TailTooLarge {
            bound: sum.tail / sum.value,
            limit: MAX_TAIL,
        });
    }
    Ok(sum)
}

fn series_sum(seq: &ShiftedSequence, j: f64) -> SeriesSum {
    let terms = series_terms(seq, j);
    let value: f64 = terms.iter().sum();
    let last = *terms.last().unwrap();
    let ratio = j / seq.values()[seq.len() - 1];
    let tail = if j == 0.0 {
        0.0
    } else if ratio >= 1.0 {
        f64::INFINITY
    } else {
        last * ratio / (1.0 - ratio)
    };
    SeriesSum { value, tail, last }
}

/// `J^k / ε̃_k!` for `k < D`, evaluated in log form.
fn series_terms(seq: &ShiftedSequence, j: f64) -> Vec<f64> {
    let fact = factorials(seq);
    (0..seq.len())
        .map(|k| {
            if k == 0 {
                1.0
            } else if j == 0.0 {
                0.0
            } else {
                (k as f64 * j.ln() - fact.ln(k)).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CoherentState {
    pub vector: SusyVector,
    /// `N(J)` or `Ñ(J)`.
    pub norm_const: f64,
    /// Bound on the mass carried by the truncation edge: the last retained
    /// level and everything beyond it.
    pub tail_bound: f64,
    pub family: Family,
    pub params: VcsParams,
    pub series: Vec<SeriesSum>,
}

impl CoherentState {
    pub fn space(&self) -> SectorSpace {
        self.vector.space()
    }

    /// Writes `sector,level,re,im` rows.
    pub fn write_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "sector,level,re,im")?;
        let space = self.space();
        for j in 0..space.sectors() {
            for (n, z) in self.vector.block(j).iter().enumerate() {
                writeln!(out, "{j},{n},{:e},{:e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Phase frequency of every basis component: the coefficient of level `n`
/// in sector `j` carries `e^{-i f γ}`.
pub fn phase_frequencies(family: Family, seqs: &[SpectralSequence], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(seqs.len() * dim);
    for (j, s) in seqs.iter().enumerate() {
        for &e in &s.values()[..dim] {
            out.push(match family {
                Family::Eds => e,
                Family::Delta { delta } if j == 0 => e + delta,
                Family::Delta { delta } => -(e + delta),
            });
        }
    }
    out
}

fn truncate_all(seqs: &[SpectralSequence], dim: usize) -> Result<Vec<SpectralSequence>> {
    seqs.iter().map(|s| s.truncated(dim)).collect()
}

fn assemble(
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    p: &VcsParams,
    checked: bool,
) -> Result<CoherentState> {
    if p.j.len() != seqs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} intensities for {} sectors",
            p.j.len(),
            seqs.len()
        )));
    }
    if !p.gamma.is_finite() {
        return Err(Error::BadParameter(format!("gamma = {}", p.gamma)));
    }
    let seqs = truncate_all(seqs, dim)?;
    let space = SectorSpace::new(seqs.len(), dim)?;
    let shifted: Vec<ShiftedSequence> = seqs.iter().map(shift).collect();
    let series = if checked {
        shifted
            .iter()
            .zip(&p.j)
            .map(|(s, &j)| series_norm(s, j))
            .collect::<Result<Vec<_>>>()?
    } else {
        if let Some(&j) = p.j.iter().find(|j| !(j.is_finite() && **j >= 0.0)) {
            return Err(Error::BadParameter(format!("J = {j} must be finite and nonnegative")));
        }
        shifted.iter().zip(&p.j).map(|(s, &j)| series_sum(s, j)).collect()
    };
    let norm_const: f64 = series.iter().map(|s| s.value).sum();
    let tail_bound = series.iter().map(|s| s.last + s.tail).sum::<f64>() / norm_const;
    if checked && tail_bound > MAX_TAIL {
        return Err(Error::TailTooLarge {
            bound: tail_bound,
            limit: MAX_TAIL,
        });
    }
    let freqs = phase_frequencies(family, &seqs, dim);
    let ln_norm = norm_const.ln();
    let mut data = CVector::zeros(space.total());
    for (jx, s) in shifted.iter().enumerate() {
        let fact = factorials(s);
        let j = p.j[jx];
        for n in 0..dim {
            let modulus = if n == 0 {
                (-0.5 * ln_norm).exp()
            } else if j == 0.0 {
                0.0
            } else {
                (0.5 * (n as f64 * j.ln() - fact.ln(n) - ln_norm)).exp()
            };
            let k = jx * dim + n;
            data[k] = Complex64::from_polar(modulus, -freqs[k] * p.gamma);
        }
    }
    Ok(CoherentState {
        vector: SusyVector::from_vector(space, data)?,
        norm_const,
        tail_bound,
        family,
        params: p.clone(),
        series,
    })
}

/// δ-family state on two sectors; both ground levels must be zero.
pub fn build_psi_delta(seqs: &[SpectralSequence], dim: usize, delta: f64, p: &VcsParams) -> Result<CoherentState> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveDelta(delta));
    }
    build_psi_delta_any(seqs, dim, delta, p)
}

/// δ-family state without the `δ > 0` requirement; the `δ = 0` member is
/// what the resolution-of-identity failure demonstration needs.
pub(crate) fn build_psi_delta_any(
    seqs: &[SpectralSequence],
    dim: usize,
    delta: f64,
    p: &VcsParams,
) -> Result<CoherentState> {
    if seqs.len() != 2 {
        return Err(Error::BadSpace("the δ-family needs two sectors".into()));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveDelta(delta));
    }
    for s in seqs {
        s.require_regime(Regime::GroundAtZero)?;
    }
    assemble(Family::Delta { delta }, seqs, dim, p, true)
}

/// EDS-family state; ground levels must be positive and the spectra
/// pairwise disjoint.
pub fn build_psi(seqs: &[SpectralSequence], dim: usize, p: &VcsParams) -> Result<CoherentState> {
    if let Some(s) = seqs.iter().find(|s| s.ground() <= 0.0) {
        return Err(Error::RegimeError(format!(
            "EDS family needs positive ground levels, got {}",
            s.ground()
        )));
    }
    let truncated = truncate_all(seqs, dim)?;
    eds_check_all(&truncated, EDS_TOLERANCE)?;
    assemble(Family::Eds, seqs, dim, p, true)
}

pub fn build(family: Family, seqs: &[SpectralSequence], dim: usize, p: &VcsParams) -> Result<CoherentState> {
    match family {
        Family::Delta { delta } => build_psi_delta(seqs, dim, delta, p),
        Family::Eds => build_psi(seqs, dim, p),
    }
}

/// Coefficients of the truncated state without the disc and tail checks.
///
/// Quadrature rules sample `J` far outside the region where a truncated
/// state is a faithful coherent state; each truncated coefficient is still
/// exact there, which is all an entrywise resolution-of-identity assembly
/// needs. Regime requirements are not checked either.
pub(crate) fn build_unchecked(
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    p: &VcsParams,
) -> Result<CoherentState> {
    assemble(family, seqs, dim, p, false)
}

/// `|⟨Ψ, H Ψ⟩ − Σ J_j M_j / Σ M_j|`.
///
/// Pass `H_τ` for the EDS family and `H` for the δ-family (the two coincide
/// there since the ground levels vanish).
pub fn action_identity_check(state: &CoherentState, op: &BlockOperator) -> Result<f64> {
    if op.space() != state.space() {
        return Err(Error::DimensionMismatch(
            "operator and state live in different spaces".into(),
        ));
    }
    let lhs = state.vector.inner(&op.apply(&state.vector)?);
    let num: f64 = state.series.iter().zip(&state.params.j).map(|(s, j)| j * s.value).sum();
    let rhs = num / state.norm_const;
    Ok((lhs - Complex64::new(rhs, 0.0)).norm())
}

/// The operator a state family is temporally stable under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evolution {
    /// `e^{-iHt}`.
    Physical,
    /// `diag(e^{-i(h_1+δ)t}, e^{+i(h_2+δ)t})`.
    DeltaAdHoc,
}

/// Evolution natural to each family.
pub fn natural_evolution(family: Family) -> Evolution {
    match family {
        Family::Eds => Evolution::Physical,
        Family::Delta { .. } => Evolution::DeltaAdHoc,
    }
}

/// `‖U(t) Ψ(J, γ) − Ψ(J, γ + t)‖` with the family's natural evolution.
pub fn temporal_stability_check(
    seqs: &[SpectralSequence],
    dim: usize,
    family: Family,
    p: &VcsParams,
    t: f64,
) -> Result<f64> {
    temporal_residual_with(seqs, dim, family, p, t, natural_evolution(family))
}

/// Same as [`temporal_stability_check`] with an explicit evolution operator.
pub fn temporal_residual_with(
    seqs: &[SpectralSequence],
    dim: usize,
    family: Family,
    p: &VcsParams,
    t: f64,
    evolution: Evolution,
) -> Result<f64> {
    let psi = build(family, seqs, dim, p)?;
    let later = build(family, seqs, dim, &p.with_gamma(p.gamma + t))?;
    let truncated = truncate_all(seqs, dim)?;
    let space = psi.space();
    let u = match (evolution, family) {
        (Evolution::Physical, _) => matrix_exponential(&hamiltonian(space, &truncated)?, t)?,
        (Evolution::DeltaAdHoc, Family::Delta { delta }) => delta_evolution(space, &truncated, delta, t)?,
        (Evolution::DeltaAdHoc, Family::Eds) => {
            return Err(Error::RegimeError(
                "the ad hoc evolution belongs to the δ-family".into(),
            ))
        }
    };
    Ok(u.apply(&psi.vector)?.distance(&later.vector))
}

/// `‖A Ψ − J^{1/2} Ψ‖`, with `J^{1/2}` acting as `sqrt(J_j)` on sector `j`.
///
/// A lowering operator built at a different γ than the state is allowed and
/// simply gives a large residual.
pub fn eigenstate_check(state: &CoherentState, lowering: &BlockOperator) -> Result<f64> {
    if lowering.space() != state.space() {
        return Err(Error::DimensionMismatch(
            "operator and state live in different spaces".into(),
        ));
    }
    let applied = lowering.apply(&state.vector)?;
    let space = state.space();
    let d = space.dim();
    let mut scaled = state.vector.as_vector().clone();
    for (j, jj) in state.params.j.iter().enumerate() {
        let r = jj.sqrt();
        for n in 0..d {
            scaled[j * d + n] *= r;
        }
    }
    Ok((applied.as_vector() - scaled).norm())
}
