//! Moment weights and numerical resolution-of-identity checks.
//!
//! The operator `Î = ∫ dν(J̲,γ) |Ψ⟩⟨Ψ|` is assembled entrywise. Each entry
//! factorizes into a `J` part, integrated with a Gauss rule matched to the
//! weight, and a phase part `e^{-i(f_a − f_b)γ}` whose finite-horizon Cesàro
//! mean is evaluated as a uniform trapezoid sum in closed form.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{eds_check_all, factorials, shift, Regime, ShiftedSequence, SpectralSequence, EDS_TOLERANCE};
use crate::vcs::{build_unchecked, phase_frequencies, Family, VcsParams};

/// Relative tolerance of the moment condition.
pub const MOMENT_TOL: f64 = 1e-8;

/// Largest Gauss-Laguerre order supported before the weights underflow.
pub const MAX_GAUSS_NODES: usize = 160;

/// Nodes and weights of a quadrature rule for `∫ ρ(u) g(u) du`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// `L_n(x)` and `L_{n-1}(x)` by the three-term recurrence.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Gauss-Laguerre rule for `∫_0^∞ e^{-x} g(x) dx`.
///
/// Golub-Welsch eigenvalues as starting points, polished by Newton on `L_n`,
/// weights from `x / ((n+1)² L_{n+1}(x)²)`.
pub fn gauss_laguerre(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_GAUSS_NODES {
        return Err(Error::BadParameter(format!(
            "Gauss-Laguerre order {n} outside 1..={MAX_GAUSS_NODES}"
        )));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + 1.0
        } else if i.abs_diff(j) == 1 {
            i.max(j) as f64
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let nf = n as f64;
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (ln, lm) = laguerre_pair(n, *x);
            // x L_n' = n (L_n − L_{n−1})
            let d = nf * (ln - lm) / *x;
            let step = ln / d;
            *x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (l1, _) = laguerre_pair(n + 1, x);
            x / ((nf + 1.0).powi(2) * l1 * l1)
        })
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableRule {
    Trapezoid,
    Simpson,
}

/// A nonnegative density `ρ` with `∫ ρ(u) u^k du = ε̃_k!`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MomentWeight {
    /// `ρ(u) = e^{-u/ω}/ω` on `[0, ∞)`, moments `ω^k k!`.
    Gamma { omega: f64 },
    /// Samples on a uniform grid starting at 0. `support` is the right end
    /// `R̃` of a bounded support; `None` means `[0, ∞)`.
    Tabulated {
        u: Vec<f64>,
        rho: Vec<f64>,
        rule: TableRule,
        #[serde(default)]
        support: Option<f64>,
    },
}

impl MomentWeight {
    /// Weight matched to `ε̃_n = ω n`.
    pub fn gamma(omega: f64) -> Self {
        Self::Gamma { omega }
    }

    /// Quadrature rule of `n` nodes; tabulated weights ignore `n`.
    pub fn rule(&self, n: usize) -> Result<QuadratureRule> {
        match self {
            Self::Gamma { omega } => {
                if !(*omega > 0.0 && omega.is_finite()) {
                    return Err(Error::BadScale(*omega));
                }
                let mut r = gauss_laguerre(n)?;
                r.nodes.iter_mut().for_each(|x| *x *= omega);
                Ok(r)
            }
            Self::Tabulated { u, rho, rule, .. } => tabulated_rule(u, rho, *rule),
        }
    }

    fn check_coverage(&self, seq: &ShiftedSequence, k: usize) -> Result<()> {
        let Self::Tabulated { u, rho, support, .. } = self else {
            return Ok(());
        };
        if u.first().copied() != Some(0.0) {
            return Err(Error::UnverifiableWeight("table must start at u = 0".into()));
        }
        let last = *u.last().unwrap();
        match support {
            Some(r) => {
                if last < r * (1.0 - 1e-12) {
                    return Err(Error::UnverifiableWeight(format!(
                        "table ends at {last}, support extends to {r}"
                    )));
                }
            }
            None => {
                // Remaining mass of u^k ρ beyond the table, estimated by one
                // more grid cell at the last sample.
                let fact = factorials(seq);
                let edge = rho.last().unwrap() * last.powi(k as i32 + 1);
                if edge > 1e-10 * fact.ln(k).exp() {
                    return Err(Error::UnverifiableWeight(format!(
                        "density not decayed at the end of the table (u = {last})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn tabulated_rule(u: &[f64], rho: &[f64], rule: TableRule) -> Result<QuadratureRule> {
    if u.len() != rho.len() {
        return Err(Error::LengthMismatch(format!(
            "{} nodes, {} densities",
            u.len(),
            rho.len()
        )));
    }
    if u.len() < 3 {
        return Err(Error::UnverifiableWeight("table needs at least 3 samples".into()));
    }
    if let Some(i) = rho.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::UnverifiableWeight(format!(
            "negative or non-finite density at sample {i}"
        )));
    }
    let h = u[1] - u[0];
    let uniform = u
        .windows(2)
        .all(|p| ((p[1] - p[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    if !(h > 0.0) || !uniform {
        return Err(Error::UnverifiableWeight("table must be uniform and increasing".into()));
    }
    let n = u.len();
    let base: Vec<f64> = match rule {
        TableRule::Trapezoid => (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect(),
        TableRule::Simpson => {
            if n.is_multiple_of(2) {
                return Err(Error::UnverifiableWeight(
                    "Simpson rule needs an odd sample count".into(),
                ));
            }
            (0..n)
                .map(|i| {
                    let c = if i == 0 || i == n - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * h / 3.0
                })
                .collect()
        }
    };
    Ok(QuadratureRule {
        nodes: u.to_vec(),
        weights: base.iter().zip(rho).map(|(w, r)| w * r).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    /// `|∫ρu^k − ε̃_k!| / ε̃_k!` for `k = 0..=K`.
    pub errors: Vec<f64>,
    pub nodes: usize,
    pub passed: bool,
}

impl MomentCheck {
    pub fn worst(&self) -> f64 {
        self.errors.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Smallest Gauss order integrating `u^k` exactly for `k ≤ order`.
pub fn min_nodes(order: usize) -> usize {
    order / 2 + 1
}

pub fn verify_moments(w: &MomentWeight, seq: &ShiftedSequence, order: usize) -> Result<MomentCheck> {
    verify_moments_with(w, seq, order, min_nodes(order))
}

pub fn verify_moments_with(w: &MomentWeight, seq: &ShiftedSequence, order: usize, nodes: usize) -> Result<MomentCheck> {
    if order >= seq.len() {
        return Err(Error::BadParameter(format!(
            "moment order {order} needs a sequence longer than {}",
            seq.len()
        )));
    }
    w.check_coverage(seq, order)?;
    let rule = w.rule(nodes)?;
    let fact = factorials(seq);
    let errors: Vec<f64> = (0..=order)
        .map(|k| {
            let target = fact.ln(k);
            // Compare in the log domain scale so large orders stay finite.
            let m = rule.integrate(|u| {
                if k == 0 {
                    1.0
                } else {
                    (k as f64 * u.ln() - target).exp()
                }
            });
            (m - 1.0).abs()
        })
        .collect();
    let passed = errors.iter().all(|&e| e <= MOMENT_TOL);
    Ok(MomentCheck {
        errors,
        nodes: rule.len(),
        passed,
    })
}

/// Quadrature used for resolution checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Gauss nodes per sector.
    pub nodes: usize,
    /// Cesàro horizon `Γ`; the phase mean runs over `[−Γ, Γ]`.
    pub big_gamma: f64,
    /// Highest moment order verified before assembly.
    pub k_check: usize,
}

impl QuadratureSpec {
    /// Enough nodes to integrate every diagonal entry at truncation `dim`
    /// exactly, `Γ = 1e4`, and all moments below `dim` checked.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            nodes: min_nodes(dim - 1) + 1,
            big_gamma: 1e4,
            k_check: dim - 1,
        }
    }

    pub fn with_gamma(self, big_gamma: f64) -> Self {
        Self { big_gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < min_nodes(self.k_check) {
            return Err(Error::BadParameter(format!(
                "{} nodes cannot verify moments up to order {}",
                self.nodes, self.k_check
            )));
        }
        if !(self.big_gamma > 0.0 && self.big_gamma.is_finite()) {
            return Err(Error::BadParameter(format!("horizon Γ = {}", self.big_gamma)));
        }
        Ok(())
    }
}

/// Uniform `γ` grid on `[−Γ, Γ]` with step at most `π / (8 f_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub big_gamma: f64,
    pub intervals: u64,
    pub step: f64,
}

impl PhaseGrid {
    pub fn new(big_gamma: f64, f_max: f64) -> Self {
        let max_step = std::f64::consts::PI / (8.0 * f_max.max(1e-300));
        let intervals = ((2.0 * big_gamma / max_step).ceil() as u64).max(1);
        Self {
            big_gamma,
            intervals,
            step: 2.0 * big_gamma / intervals as f64,
        }
    }

    pub fn samples(&self) -> u64 {
        self.intervals + 1
    }

    /// Trapezoid mean of `e^{-iθγ}` over the grid; real by symmetry.
    pub fn cesaro(&self, theta: f64) -> f64 {
        cesaro_trapezoid(theta, self.big_gamma, self.intervals)
    }
}

/// `(1/2Γ) · trapezoid ∫_{−Γ}^{Γ} e^{-iθγ} dγ` on `m` uniform intervals:
/// `(Δ/2Γ) [sin((m+1)θΔ/2) / sin(θΔ/2) − cos(θΓ)]`.
pub fn cesaro_trapezoid(theta: f64, big_gamma: f64, m: u64) -> f64 {
    let step = 2.0 * big_gamma / m as f64;
    let half = 0.5 * theta * step;
    let s = half.sin();
    if theta == 0.0 || s == 0.0 {
        // Full aliasing; every sample equals ±1 with the same sign pattern.
        let sign = if theta == 0.0 { 1.0 } else { (theta * big_gamma).cos() };
        return sign;
    }
    let dirichlet = ((m + 1) as f64 * half).sin() / s;
    step / (2.0 * big_gamma) * (dirichlet - (theta * big_gamma).cos())
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionReport {
    pub family: Family,
    pub dim: usize,
    pub window_keep: usize,
    pub grid: PhaseGrid,
    pub gauss_nodes: usize,
    /// `max |Î_aa − 1|` on the window.
    pub diagonal_error: f64,
    /// `max |Î_ab|`, `a ≠ b`, on the window.
    pub off_diagonal_error: f64,
    /// `‖Î − 1‖_max` on the window.
    pub window_residual: f64,
    /// `‖Î − 1‖_max` on the whole truncated space.
    pub full_residual: f64,
    pub hermiticity: f64,
    /// Worst verified moment error over all sectors.
    pub moment_error: f64,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

impl ResolutionReport {
    /// `Γ · off_diagonal_error`.
    pub fn decay_constant(&self) -> f64 {
        self.grid.big_gamma * self.off_diagonal_error
    }
}

/// `Σ_nodes Ñ w u uᵀ` at `γ = 0`: the `J` part of every entry of `Î`.
fn j_integrals(
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    rules: &[QuadratureRule],
) -> Result<DMatrix<f64>> {
    let n_sec = seqs.len();
    let total = n_sec * dim;
    let per: Vec<usize> = rules.iter().map(QuadratureRule::len).collect();
    let inner: usize = per[1..].iter().product();
    // One partial sum per node of the first sector; the order of the final
    // reduction does not depend on the thread count.
    let partials = (0..per[0])
        .into_par_iter()
        .map(|i0| -> Result<DMatrix<f64>> {
            let mut acc = DMatrix::<f64>::zeros(total, total);
            let mut idx = vec![0usize; n_sec];
            idx[0] = i0;
            for flat in 0..inner {
                let mut rest = flat;
                for s in 1..n_sec {
                    idx[s] = rest % per[s];
                    rest /= per[s];
                }
                let j: Vec<f64> = (0..n_sec).map(|s| rules[s].nodes[idx[s]]).collect();
                let w: f64 = (0..n_sec).map(|s| rules[s].weights[idx[s]]).product();
                let st = build_unchecked(family, seqs, dim, &VcsParams::new(j, 0.0))?;
                let u: DVector<f64> = st.vector.as_vector().map(|z| z.re);
                acc.ger(w * st.norm_const, &u, &u, 1.0);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(partials))
}

fn pairwise_sum(mut items: Vec<DMatrix<f64>>) -> DMatrix<f64> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a + b,
                None => a,
            });
        }
        items = next;
    }
    items.pop().unwrap()
}

fn check_weights(
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
) -> Result<(Vec<QuadratureRule>, f64)> {
    if weights.len() != seqs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights for {} sectors",
            weights.len(),
            seqs.len()
        )));
    }
    quad.validate()?;
    let mut worst: f64 = 0.0;
    let mut rules = Vec::with_capacity(seqs.len());
    for (s, w) in seqs.iter().zip(weights) {
        let shifted = shift(&s.truncated(dim)?);
        let check = verify_moments_with(w, &shifted, quad.k_check.min(dim - 1), quad.nodes)?;
        if !check.passed {
            let (order, error) = check
                .errors
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (k, &e)| if e > acc.1 { (k, e) } else { acc });
            return Err(Error::MomentMismatch { order, error });
        }
        worst = worst.max(check.worst());
        rules.push(w.rule(quad.nodes)?);
    }
    Ok((rules, worst))
}

fn assemble(
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>, PhaseGrid, f64)> {
    let (rules, moment_error) = check_weights(seqs, dim, weights, quad)?;
    let a = j_integrals(family, seqs, dim, &rules)?;
    let truncated: Vec<SpectralSequence> = seqs.iter().map(|s| s.truncated(dim)).collect::<Result<_>>()?;
    let freqs = phase_frequencies(family, &truncated, dim);
    let f_max = freqs.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let grid = PhaseGrid::new(quad.big_gamma, f_max);
    let n = freqs.len();
    let k = DMatrix::from_fn(n, n, |i, j| grid.cesaro(freqs[i] - freqs[j]));
    let full = a.component_mul(&k);
    Ok((full, a, grid, moment_error))
}

fn validate_family(family: Family, seqs: &[SpectralSequence], dim: usize) -> Result<()> {
    match family {
        Family::Delta { delta } => {
            if !(delta > 0.0) {
                return Err(Error::NonPositiveDelta(delta));
            }
            if seqs.len() != 2 {
                return Err(Error::BadSpace("the δ-family needs two sectors".into()));
            }
            seqs.iter().try_for_each(|s| s.require_regime(Regime::GroundAtZero))
        }
        Family::Eds => {
            let t: Vec<SpectralSequence> = seqs.iter().map(|s| s.truncated(dim)).collect::<Result<_>>()?;
            eds_check_all(&t, EDS_TOLERANCE)
        }
    }
}

/// Resolution-of-identity residuals on the window of the top two levels
/// removed from every sector.
pub fn resolution_check(
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
) -> Result<ResolutionReport> {
    validate_family(family, seqs, dim)?;
    let (m, _, grid, moment_error) = assemble(family, seqs, dim, weights, quad)?;
    let keep = dim.saturating_sub(2).max(1);
    let in_window = |i: usize| i % dim < keep;
    let n = m.nrows();
    let (mut diag, mut off, mut full, mut herm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let dev = if i == j {
                (m[(i, j)] - 1.0).abs()
            } else {
                m[(i, j)].abs()
            };
            full = full.max(dev);
            herm = herm.max((m[(i, j)] - m[(j, i)]).abs());
            if in_window(i) && in_window(j) {
                if i == j {
                    diag = diag.max(dev);
                } else {
                    off = off.max(dev);
                }
            }
        }
    }
    Ok(ResolutionReport {
        family,
        dim,
        window_keep: keep,
        grid,
        gauss_nodes: quad.nodes,
        diagonal_error: diag,
        off_diagonal_error: off,
        window_residual: diag.max(off),
        full_residual: full,
        hermiticity: herm,
        moment_error,
        matrix: m,
    })
}

/// The `(b,0)-(f,0)` entry of the δ-family `Î` and its two factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossEntry {
    pub delta: f64,
    pub big_gamma: f64,
    pub value: f64,
    /// δ-independent `J` integral.
    pub j_integral: f64,
    /// Cesàro mean of `e^{-2iδγ}`.
    pub cesaro: f64,
}

/// Cross entry of the δ-family operator at any `δ ≥ 0`.
pub fn cross_entry(
    seqs: &[SpectralSequence],
    dim: usize,
    delta: f64,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
) -> Result<CrossEntry> {
    if seqs.len() != 2 {
        return Err(Error::BadSpace("the δ-family needs two sectors".into()));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveDelta(delta));
    }
    for s in seqs {
        s.require_regime(Regime::GroundAtZero)?;
    }
    let (m, a, grid, _) = assemble(Family::Delta { delta }, seqs, dim, weights, quad)?;
    Ok(CrossEntry {
        delta,
        big_gamma: quad.big_gamma,
        value: m[(0, dim)],
        j_integral: a[(0, dim)],
        cesaro: grid.cesaro(2.0 * delta),
    })
}

/// The δ = 0 assembly, whose cross entry does not average out.
pub fn delta_zero_failure(
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
) -> Result<CrossEntry> {
    cross_entry(seqs, dim, 0.0, weights, quad)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionSweep {
    pub rows: Vec<ResolutionReport>,
    /// Fitted exponent of `off_diagonal_error ∝ Γ^slope`.
    pub off_diagonal_slope: f64,
}

impl ResolutionSweep {
    pub fn write_table(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "big_gamma,diagonal_error,off_diagonal_error,window_residual,full_residual"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                r.grid.big_gamma, r.diagonal_error, r.off_diagonal_error, r.window_residual, r.full_residual
            )?;
        }
        Ok(())
    }
}

pub fn resolution_sweep(
    family: Family,
    seqs: &[SpectralSequence],
    dim: usize,
    weights: &[MomentWeight],
    quad: &QuadratureSpec,
    horizons: &[f64],
) -> Result<ResolutionSweep> {
    let rows = horizons
        .iter()
        .map(|&g| resolution_check(family, seqs, dim, weights, &quad.with_gamma(g)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.grid.big_gamma).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.off_diagonal_error).collect();
    Ok(ResolutionSweep {
        off_diagonal_slope: log_log_slope(&xs, &ys),
        rows,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::vcs::build_unchecked;
    use proptest::prelude::*;

    fn ln_fact(k: usize) -> f64 {
        (1..=k).map(|i| (i as f64).ln()).sum()
    }

    #[test]
    fn laguerre_rule_small_orders() {
        // Two-point rule: nodes 2 ∓ √2, weights (2 ± √2)/4.
        let r = gauss_laguerre(2).unwrap();
        let s = 2f64.sqrt();
        assert!((r.nodes[0] - (2.0 - s)).abs() < 1e-15);
        assert!((r.nodes[1] - (2.0 + s)).abs() < 1e-14);
        assert!((r.weights[0] - (2.0 + s) / 4.0).abs() < 1e-15);
        assert!((r.weights[1] - (2.0 - s) / 4.0).abs() < 1e-15);
        assert!(gauss_laguerre(0).is_err());
    }

    #[test]
    fn gamma_weight_moments_exact() {
        let s1 = shift(&SpectralSequence::linear(1.0, 0.0, 30).unwrap());
        let c = verify_moments(&MomentWeight::gamma(1.0), &s1, 20).unwrap();
        assert!(c.passed);
        assert!(c.worst() <= 1e-12, "{}", c.worst());
        assert!(c.errors[0] < 1e-13);

        let s2 = shift(&SpectralSequence::linear(2.0, 0.0, 30).unwrap());
        let c = verify_moments(&MomentWeight::gamma(2.0), &s2, 20).unwrap();
        assert!(c.worst() <= 1e-12, "{}", c.worst());

        // Mismatched scale fails at order one already.
        let c = verify_moments(&MomentWeight::gamma(1.0), &s2, 5).unwrap();
        assert!(!c.passed);
        assert!((c.errors[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn direct_moment_oracle() {
        // Σ w x^k against k! for the plain Laguerre rule.
        let r = gauss_laguerre(12).unwrap();
        for k in 0..=23 {
            let m: f64 = r.integrate(|x| x.powi(k as i32));
            assert!((m / ln_fact(k).exp() - 1.0).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn moment_order_must_fit() {
        let s = shift(&SpectralSequence::linear(1.0, 0.0, 5).unwrap());
        assert!(verify_moments(&MomentWeight::gamma(1.0), &s, 5).is_err());
    }

    #[test]
    fn tabulated_weights() {
        let s = shift(&SpectralSequence::linear(1.0, 0.0, 10).unwrap());
        let h = 0.005;
        let u: Vec<f64> = (0..=16000).map(|i| i as f64 * h).collect();
        let rho: Vec<f64> = u.iter().map(|x| (-x).exp()).collect();
        let w = MomentWeight::Tabulated {
            u: u.clone(),
            rho: rho.clone(),
            rule: TableRule::Simpson,
            support: None,
        };
        let c = verify_moments(&w, &s, 4).unwrap();
        assert!(c.passed, "{:?}", c.errors);

        // Truncated table: density still large at the end.
        let short = MomentWeight::Tabulated {
            u: u[..2001].to_vec(),
            rho: rho[..2001].to_vec(),
            rule: TableRule::Simpson,
            support: None,
        };
        assert!(matches!(
            verify_moments(&short, &s, 4),
            Err(Error::UnverifiableWeight(_))
        ));

        let offset = MomentWeight::Tabulated {
            u: u.iter().map(|x| x + 1.0).collect(),
            rho,
            rule: TableRule::Trapezoid,
            support: None,
        };
        assert!(matches!(
            verify_moments(&offset, &s, 2),
            Err(Error::UnverifiableWeight(_))
        ));

        let bounded = MomentWeight::Tabulated {
            u: vec![0.0, 0.5, 1.0],
            rho: vec![1.0, 1.0, 1.0],
            rule: TableRule::Trapezoid,
            support: Some(2.0),
        };
        assert!(matches!(
            verify_moments(&bounded, &s, 1),
            Err(Error::UnverifiableWeight(_))
        ));
    }

    fn sampled_cesaro(theta: f64, big_gamma: f64, m: u64) -> f64 {
        let step = 2.0 * big_gamma / m as f64;
        let mut re = 0.0;
        for s in 0..=m {
            let w = if s == 0 || s == m { 0.5 } else { 1.0 };
            re += w * (theta * (-big_gamma + s as f64 * step)).cos();
        }
        re * step / (2.0 * big_gamma)
    }

    #[test]
    fn cesaro_closed_form_matches_sampling() {
        for &theta in &[0.0, 1e-6, 0.3, 1.0, 2.0f64.sqrt(), 7.5] {
            for &(g, m) in &[(10.0, 400u64), (37.0, 2001)] {
                let a = cesaro_trapezoid(theta, g, m);
                let b = sampled_cesaro(theta, g, m);
                assert!((a - b).abs() < 1e-12, "θ = {theta}: {a} vs {b}");
            }
        }
        // Continuous limit sin(θΓ)/(θΓ).
        let g = PhaseGrid::new(100.0, 4.0);
        let th = 0.77;
        assert!((g.cesaro(th) - (th * 100.0).sin() / (th * 100.0)).abs() < 1e-4);
        assert_eq!(cesaro_trapezoid(0.0, 5.0, 10), 1.0);
    }

    fn eds_setup(dim: usize) -> (Vec<SpectralSequence>, Vec<MomentWeight>) {
        let s2 = 2f64.sqrt();
        let seqs = vec![
            SpectralSequence::linear(1.0, 0.3, dim).unwrap(),
            SpectralSequence::linear(s2, 0.5 * s2, dim).unwrap(),
        ];
        (seqs, vec![MomentWeight::gamma(1.0), MomentWeight::gamma(s2)])
    }

    #[test]
    fn factorized_assembly_matches_brute_force() {
        // Sum |Ψ⟩⟨Ψ| over the full product of J nodes and γ samples.
        let dim = 4;
        let (seqs, weights) = eds_setup(dim);
        let quad = QuadratureSpec {
            nodes: 4,
            big_gamma: 3.0,
            k_check: 3,
        };
        let rep = resolution_check(Family::Eds, &seqs, dim, &weights, &quad).unwrap();
        let r: Vec<QuadratureRule> = weights.iter().map(|w| w.rule(quad.nodes).unwrap()).collect();
        let grid = rep.grid;
        let n = 2 * dim;
        let mut brute = CMatrix::zeros(n, n);
        for (&j1, &w1) in r[0].nodes.iter().zip(&r[0].weights) {
            for (&j2, &w2) in r[1].nodes.iter().zip(&r[1].weights) {
                for s in 0..=grid.intervals {
                    let g = -grid.big_gamma + s as f64 * grid.step;
                    let tw = if s == 0 || s == grid.intervals { 0.5 } else { 1.0 };
                    let st = build_unchecked(Family::Eds, &seqs, dim, &VcsParams::new(vec![j1, j2], g)).unwrap();
                    let v = st.vector.as_vector();
                    let scale = w1 * w2 * st.norm_const * tw * grid.step / (2.0 * grid.big_gamma);
                    brute += (v * v.adjoint()).scale(scale);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!(brute[(i, j)].im.abs() < 1e-12);
                assert!((brute[(i, j)].re - rep.matrix[(i, j)]).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn eds_resolution_decays() {
        let dim = 12;
        let (seqs, weights) = eds_setup(dim);
        let quad = QuadratureSpec::for_dim(dim);
        let sweep = resolution_sweep(Family::Eds, &seqs, dim, &weights, &quad, &[1e2, 1e3, 1e4]).unwrap();
        for r in &sweep.rows {
            assert!(r.diagonal_error <= 1e-10, "{}", r.diagonal_error);
            assert!(r.hermiticity <= 1e-12);
        }
        assert!(
            (-1.2..=-0.8).contains(&sweep.off_diagonal_slope),
            "{}",
            sweep.off_diagonal_slope
        );
        let mut buf = Vec::new();
        sweep.write_table(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn single_mode_decay_within_sector() {
        // Entry between levels n and m of one sector is the J integral times
        // sin(θΓ)/(θΓ)-like factor with θ = ε_n − ε_m.
        let dim = 10;
        let (seqs, weights) = eds_setup(dim);
        let quad = QuadratureSpec::for_dim(dim).with_gamma(500.0);
        let rep = resolution_check(Family::Eds, &seqs, dim, &weights, &quad).unwrap();
        let r0 = weights[0].rule(quad.nodes).unwrap();
        let (n, m) = (1usize, 4usize);
        let a = r0.integrate(|j| (0.5 * ((n + m) as f64 * j.ln() - ln_fact(n) - ln_fact(m))).exp());
        let expect = a * rep.grid.cesaro((n as f64) - (m as f64));
        assert!((rep.matrix[(n, m)] - expect).abs() < 1e-13);
        assert!(rep.matrix[(n, m)].abs() <= a / (500.0 * 3.0) * 1.01);
    }

    #[test]
    fn family_preconditions() {
        let dim = 8;
        let lin = SpectralSequence::linear(1.0, 0.0, dim).unwrap();
        let w = vec![MomentWeight::gamma(1.0); 2];
        let quad = QuadratureSpec::for_dim(dim);
        assert!(matches!(
            resolution_check(
                Family::Delta { delta: 0.0 },
                &[lin.clone(), lin.clone()],
                dim,
                &w,
                &quad
            ),
            Err(Error::NonPositiveDelta(_))
        ));
        let a = SpectralSequence::linear(1.0, 0.5, dim).unwrap();
        assert!(matches!(
            resolution_check(Family::Eds, &[a.clone(), a], dim, &w, &quad),
            Err(Error::NotEds { .. })
        ));
        let bad = QuadratureSpec { nodes: 2, ..quad };
        assert!(resolution_check(Family::Delta { delta: 0.5 }, &[lin.clone(), lin], dim, &w, &bad).is_err());
    }

    #[test]
    fn delta_dichotomy() {
        let dim = 10;
        let lin = SpectralSequence::linear(1.0, 0.0, dim).unwrap();
        let seqs = vec![lin.clone(), lin];
        let w = vec![MomentWeight::gamma(1.0); 2];
        let quad = QuadratureSpec::for_dim(dim);
        let z2 = delta_zero_failure(&seqs, dim, &w, &quad.with_gamma(1e2)).unwrap();
        let z4 = delta_zero_failure(&seqs, dim, &w, &quad.with_gamma(1e4)).unwrap();
        assert!(z2.value.abs() > 0.5);
        assert!(((z4.value - z2.value) / z2.value).abs() < 0.05);

        let d2 = cross_entry(&seqs, dim, 0.5, &w, &quad.with_gamma(1e2)).unwrap();
        let d4 = cross_entry(&seqs, dim, 0.5, &w, &quad.with_gamma(1e4)).unwrap();
        let ratio = d2.value.abs() / d4.value.abs();
        assert!((50.0..=200.0).contains(&ratio), "{ratio}");
        // Factorization and δ-independence of the J integral.
        assert!((d2.value - d2.j_integral * d2.cesaro).abs() < 1e-15);
        assert!((d2.j_integral - z2.j_integral).abs() < 1e-13);
    }

    #[test]
    fn delta_resolution_within_bounds() {
        let dim = 12;
        let lin = SpectralSequence::linear(1.0, 0.0, dim).unwrap();
        let w = vec![MomentWeight::gamma(1.0); 2];
        let quad = QuadratureSpec::for_dim(dim);
        let r = resolution_check(Family::Delta { delta: 0.5 }, &[lin.clone(), lin], dim, &w, &quad).unwrap();
        assert!(r.diagonal_error <= 1e-10);
        assert!(r.decay_constant() < 10.0, "{}", r.decay_constant());
    }

    #[test]
    fn assembly_is_thread_count_independent() {
        let dim = 8;
        let (seqs, weights) = eds_setup(dim);
        let quad = QuadratureSpec::for_dim(dim);
        let a = resolution_check(Family::Eds, &seqs, dim, &weights, &quad).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| resolution_check(Family::Eds, &seqs, dim, &weights, &quad).unwrap());
        assert_eq!(a.matrix, b.matrix);
    }

    proptest! {
        #[test]
        fn cesaro_bounded(theta in -20.0f64..20.0, g in 1.0f64..200.0) {
            let grid = PhaseGrid::new(g, 25.0);
            prop_assert!(grid.cesaro(theta).abs() <= 1.0 + 1e-12);
            prop_assert!((grid.cesaro(theta) - grid.cesaro(-theta)).abs() < 1e-12);
        }
    }
}
