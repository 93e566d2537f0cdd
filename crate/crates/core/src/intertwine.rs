//! Companion Hamiltonians `H = N₁⁻¹(x† h x)` built from an intertwiner `x`.
//!
//! Everything is evaluated on the truncated space and then restricted to a
//! window of levels unaffected by the truncation. Residuals are reported in
//! absolute form and normalized by the size of the terms that cancel; the
//! pass decision uses the normalized form.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    build_b_gamma, build_grid_ladder, build_quon_ladder, shifted_hamiltonian, BlockOperator, GridSpec, SectorSpace,
    Superpotential, Window,
};
use crate::linalg::{
    c, hermiticity_defect, max_abs, max_dev, numerical_rank, scaled_dev, CMatrix, CVector, HermitianEigen,
};
use crate::moments::log_log_slope;
use crate::spectra::{q_numbers, ShiftedSequence};

pub const COMMUTANT_TOL: f64 = 1e-10;
pub const INVERTIBILITY_TOL: f64 = 1e-10;
pub const ALPHA_TOL: f64 = 1e-10;
pub const BETA_TOL: f64 = 1e-10;
pub const GAMMA_TOL: f64 = 1e-9;
/// `Φ_n` with smaller norm counts as zero.
pub const ZERO_VECTOR_TOL: f64 = 1e-12;
pub const CLOSED_FORM_TOL: f64 = 1e-11;
/// Random trial vectors used by [`commutation_probe`] besides the window basis.
pub const RANDOM_TRIALS: usize = 32;
/// Eigenvectors of `h` used by the grid comparison.
pub const GRID_EIGENVECTORS: usize = 8;

/// Real function applied to Hermitian operators through their spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectralMap {
    /// `Σ c_k t^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Exp,
}

impl SpectralMap {
    pub fn identity() -> Self {
        Self::Polynomial { coeffs: vec![0.0, 1.0] }
    }

    pub fn square() -> Self {
        Self::Polynomial {
            coeffs: vec![0.0, 0.0, 1.0],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            Self::Exp => t.exp(),
        }
    }

    /// `f(m)` for Hermitian `m`.
    pub fn apply(&self, m: &CMatrix) -> CMatrix {
        HermitianEigen::new(m).apply(|t| self.eval(t))
    }

    fn is_identity(&self) -> bool {
        matches!(self, Self::Polynomial { coeffs } if coeffs.len() == 2 && coeffs[0] == 0.0 && coeffs[1] == 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct IntertwiningProblem {
    pub h: BlockOperator,
    pub x: BlockOperator,
    pub window: Window,
}

impl IntertwiningProblem {
    /// Window excludes the top `degree + 2` levels of every sector.
    pub fn new(h: BlockOperator, x: BlockOperator, degree: usize) -> Result<Self> {
        let window = Window::for_degree(h.space(), degree)?;
        Self::with_window(h, x, window)
    }

    pub fn with_window(h: BlockOperator, x: BlockOperator, window: Window) -> Result<Self> {
        if h.space() != x.space() || window.space() != h.space() {
            return Err(Error::DimensionMismatch("h, x and window must share one space".into()));
        }
        let defect = hermiticity_defect(h.matrix());
        if defect > 1e-12 * max_abs(h.matrix()).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { h, x, window })
    }

    /// `‖[x x†, h]‖_max` on the window.
    pub fn commutant_residual(&self) -> f64 {
        let xx = self.x.matrix() * self.x.matrix().adjoint();
        let h = self.h.matrix();
        max_abs(&self.window.restrict(&(&xx * h - h * &xx)))
    }

    /// `N₁ = x† x` restricted to the window.
    pub fn n1(&self) -> CMatrix {
        self.window.restrict(&(self.x.matrix().adjoint() * self.x.matrix()))
    }
}

/// Residuals of the three conditions. `*_scaled` divide by the magnitude of
/// the cancelling terms and decide `passed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// `‖H − H†‖_max`.
    pub alpha: f64,
    /// `‖x†(xH − hx)‖_max` on the window.
    pub beta: f64,
    /// `max_n ‖HΦ_n − λ_nΦ_n‖ / ‖Φ_n‖`.
    pub gamma: f64,
    /// `alpha / max(1, ‖H‖_max)`.
    pub alpha_scaled: f64,
    /// `beta / max(1, ‖x‖²_max ‖h‖_max)`.
    pub beta_scaled: f64,
    /// `max_n ‖HΦ_n − λ_nΦ_n‖ / (‖Φ_n‖ max(1, |λ_n|))`.
    pub gamma_scaled: f64,
    pub eigenvectors_checked: usize,
    pub eigenvectors_zero: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    /// Index of `φ̂_n` in the ascending spectrum of `h`.
    pub index: usize,
    pub value: f64,
    /// `Φ_n = x† φ̂_n` restricted to the window.
    pub phi: CVector,
}

#[derive(Debug, Clone)]
pub struct IntertwiningResult {
    /// Window-sized `H`.
    pub big_h: CMatrix,
    /// `h` or `f(h)` restricted to the window.
    pub h: CMatrix,
    pub n1: CMatrix,
    pub n1_inv: CMatrix,
    pub n1_min: f64,
    pub commutant: f64,
    pub eigenpairs: Vec<Eigenpair>,
    pub certificate: Certificate,
    pub window: Window,
}

impl IntertwiningResult {
    /// `H` as an operator on the reduced space.
    pub fn operator(&self) -> Result<BlockOperator> {
        BlockOperator::new(self.window.reduced_space(), self.big_h.clone())
    }

    /// Problem with `h ← H` and the same intertwiner cut to the window; its
    /// window shrinks by another `degree + 2` levels.
    pub fn iterate(&self, p: &IntertwiningProblem, degree: usize) -> Result<IntertwiningProblem> {
        let space = self.window.reduced_space();
        let herm = (&self.big_h + self.big_h.adjoint()).scale(0.5);
        let h = BlockOperator::hermitian(space, herm)?;
        let x = BlockOperator::new(space, self.window.restrict(p.x.matrix()))?;
        IntertwiningProblem::new(h, x, degree)
    }
}

pub fn construct_h(p: &IntertwiningProblem) -> Result<IntertwiningResult> {
    construct_with(p, &SpectralMap::identity())
}

/// `H = N₁⁻¹(x† f(h) x)` with eigenvalues checked against `f(e_n)`.
pub fn nonisospectral_construct(p: &IntertwiningProblem, f: &SpectralMap) -> Result<IntertwiningResult> {
    construct_with(p, f)
}

fn construct_with(p: &IntertwiningProblem, f: &SpectralMap) -> Result<IntertwiningResult> {
    let commutant = p.commutant_residual();
    if !(commutant < COMMUTANT_TOL) {
        return Err(Error::HypothesisViolated {
            what: "[x x†, h] = 0".into(),
            residual: commutant,
        });
    }
    let n1 = p.n1();
    let n1_eig = HermitianEigen::new(&n1);
    let n1_min = n1_eig.min();
    if !(n1_min > INVERTIBILITY_TOL) {
        return Err(Error::HypothesisViolated {
            what: "N1 = x† x invertible".into(),
            residual: n1_min,
        });
    }
    let n1_inv = n1_eig.apply(|t| 1.0 / t);

    let h_eig = HermitianEigen::new(p.h.matrix());
    let fh = if f.is_identity() {
        p.h.matrix().clone()
    } else {
        h_eig.apply(|t| f.eval(t))
    };
    let x = p.x.matrix();
    let xd = x.adjoint();
    let m = p.window.restrict(&(&xd * &fh * x));
    let big_h = &n1_inv * m;

    let alpha = hermiticity_defect(&big_h);
    let h_full = p.window.embed(&big_h);
    let beta = max_abs(&p.window.restrict(&(&xd * (x * &h_full - &fh * x))));

    // Eigenvectors of h that live inside the window.
    let idx = p.window.indices();
    let candidates: Vec<usize> = (0..h_eig.values.len())
        .filter(|&k| {
            let v = h_eig.vectors.column(k);
            let inside: f64 = idx.iter().map(|&i| v[i].norm_sqr()).sum();
            inside >= 1.0 - 1e-12
        })
        .collect();
    let checked: Vec<Option<(Eigenpair, f64, f64)>> = candidates
        .par_iter()
        .map(|&k| {
            let phi_full = &xd * h_eig.vectors.column(k);
            let norm = phi_full.norm();
            let inside = p.window.restrict_vec(&phi_full).norm();
            if norm <= ZERO_VECTOR_TOL || (norm - inside) > 1e-12 * norm {
                return None;
            }
            let phi = p.window.restrict_vec(&phi_full);
            let lambda = f.eval(h_eig.values[k]);
            let r = (&big_h * &phi - phi.scale(lambda)).norm() / norm;
            Some((
                Eigenpair {
                    index: k,
                    value: lambda,
                    phi,
                },
                r,
                r / lambda.abs().max(1.0),
            ))
        })
        .collect();
    let zero = checked.iter().filter(|e| e.is_none()).count();
    let mut eigenpairs = Vec::new();
    let (mut gamma, mut gamma_scaled) = (0.0f64, 0.0f64);
    for (e, r, rs) in checked.into_iter().flatten() {
        gamma = gamma.max(r);
        gamma_scaled = gamma_scaled.max(rs);
        eigenpairs.push(e);
    }

    let x_size = max_abs(x);
    let alpha_scaled = alpha / max_abs(&big_h).max(1.0);
    let beta_scaled = beta / (x_size * x_size * max_abs(&fh)).max(1.0);
    let certificate = Certificate {
        alpha,
        beta,
        gamma,
        alpha_scaled,
        beta_scaled,
        gamma_scaled,
        eigenvectors_checked: eigenpairs.len(),
        eigenvectors_zero: zero,
        passed: alpha_scaled <= ALPHA_TOL && beta_scaled <= BETA_TOL && gamma_scaled <= GAMMA_TOL,
    };
    Ok(IntertwiningResult {
        big_h,
        h: p.window.restrict(&fh),
        n1,
        n1_inv,
        n1_min,
        commutant,
        eigenpairs,
        certificate,
        window: p.window,
    })
}

/// Ladder degree of the intertwiner of each worked example.
pub fn example_degree(which: usize) -> Result<usize> {
    match which {
        1 | 4 => Ok(1),
        2 => Ok(2),
        3 => Ok(3),
        _ => Err(Error::BadParameter(format!("no example {which}; choose 1 to 4"))),
    }
}

/// The four worked examples on the GK ladder `B_γ`:
/// 1. `h = B†B`, `x = B†`; 2. `x = B†²`; 3. `x = B†³`;
/// 4. `h = B†²B²`, `x = B†`.
pub fn example_factory(which: usize, seqs: &[ShiftedSequence], dim: usize, gamma: f64) -> Result<IntertwiningProblem> {
    let degree = example_degree(which)?;
    let space = SectorSpace::new(seqs.len(), dim)?;
    let b = build_b_gamma(space, seqs, gamma)?;
    let bd = b.adjoint();
    let h = if which == 4 {
        bd.pow(2).compose(&b.pow(2))
    } else {
        bd.compose(&b)
    };
    let x = bd.pow(degree as u32);
    let h = BlockOperator::hermitian(space, h.into_matrix())?;
    IntertwiningProblem::new(h, x, degree)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HTauCheck {
    /// `‖H_τ − B†B‖_max`.
    pub absolute: f64,
    /// `absolute / max(1, ‖H_τ‖_max)`.
    pub relative: f64,
}

/// Compares the shifted Hamiltonian with `B_γ† B_γ` on the whole space.
pub fn h_tau_identity_check(seqs: &[ShiftedSequence], dim: usize, gamma: f64) -> Result<HTauCheck> {
    let space = SectorSpace::new(seqs.len(), dim)?;
    let h_tau = shifted_hamiltonian(space, seqs)?;
    let b = build_b_gamma(space, seqs, gamma)?;
    let absolute = max_dev(h_tau.matrix(), b.adjoint().compose(&b).matrix());
    Ok(HTauCheck {
        absolute,
        relative: absolute / max_abs(h_tau.matrix()).max(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeReport {
    /// `max_φ ‖f(H)φ − H_f φ‖ / ‖φ‖`.
    pub residual: f64,
    /// Same, divided by `max(1, ‖f(H)‖_max)`.
    pub relative: f64,
    pub trials: usize,
}

/// Window basis vectors followed by random unit vectors.
pub fn trial_vectors(len: usize, random: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<CVector> = (0..len)
        .map(|i| {
            let mut v = CVector::zeros(len);
            v[i] = c(1.0);
            v
        })
        .collect();
    for _ in 0..random {
        let v = CVector::from_fn(len, |_, _| {
            num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let n = v.norm();
        out.push(v.unscale(n));
    }
    out
}

/// Numerical evidence on whether `f(N₁⁻¹x†hx) = N₁⁻¹x†f(h)x`.
pub fn commutation_probe(p: &IntertwiningProblem, f: &SpectralMap, seed: u64) -> Result<ProbeReport> {
    let iso = construct_h(p)?;
    let non = nonisospectral_construct(p, f)?;
    let lhs = f.apply(&iso.big_h);
    let diff = &lhs - &non.big_h;
    let trials = trial_vectors(p.window.len(), RANDOM_TRIALS, seed);
    let residual = trials
        .par_iter()
        .map(|v| (&diff * v).norm() / v.norm())
        .reduce(|| 0.0, f64::max);
    Ok(ProbeReport {
        residual,
        relative: residual / max_abs(&lhs).max(1.0),
        trials: trials.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientCondition {
    /// `max_φ ‖P hˡ x φ − hˡ x φ‖ / ‖hˡ x φ‖`, `P = x N₁⁻¹ x†`, per `l`.
    pub projection: Vec<f64>,
    /// `‖[P, h]‖_max` on the window.
    pub commutant: f64,
    /// Numerical rank of each diagonal block of `x` on the window.
    pub ranks: Vec<usize>,
    /// `keep − rank` per sector.
    pub deficiency: Vec<usize>,
}

pub fn sufficient_condition_check(p: &IntertwiningProblem, l_max: usize) -> Result<SufficientCondition> {
    let res = construct_h(p)?;
    let x = p.x.matrix();
    let xd = x.adjoint();
    let h = p.h.matrix();
    let w = &p.window;
    let proj = x * w.embed(&res.n1_inv) * &xd;
    let idx = w.indices();
    let mut projection = Vec::with_capacity(l_max + 1);
    let mut hl = CMatrix::identity(h.nrows(), h.ncols());
    for _ in 0..=l_max {
        let worst = idx
            .par_iter()
            .map(|&i| {
                let v = &hl * x.column(i);
                let n = v.norm();
                if n <= ZERO_VECTOR_TOL {
                    0.0
                } else {
                    (&proj * &v - &v).norm() / n
                }
            })
            .reduce(|| 0.0, f64::max);
        projection.push(worst);
        hl = &hl * h;
    }
    let commutant = max_abs(&w.restrict(&(&proj * h - h * &proj)));
    let xw = w.restrict(x);
    let keep = w.keep();
    let ranks: Vec<usize> = (0..p.h.space().sectors())
        .map(|j| numerical_rank(&xw.view((j * keep, j * keep), (keep, keep)).into_owned(), 1e-10))
        .collect();
    let deficiency = ranks.iter().map(|r| keep - r).collect();
    Ok(SufficientCondition {
        projection,
        commutant,
        ranks,
        deficiency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormReport {
    /// Deviation of `N₁` from its closed form on the window.
    pub n1_deviation: f64,
    /// Deviation of `H` from its closed form on the window; relative to the
    /// diagonal for the exponential map.
    pub h_deviation: f64,
    pub window_keep: usize,
}

/// Single-sector quon problem with `h = a†a`, `x = (a†)²`.
pub fn quon_problem(dim: usize, q: f64) -> Result<IntertwiningProblem> {
    let ladder = build_quon_ladder(dim, q)?;
    let h = BlockOperator::hermitian(ladder.lowering.space(), ladder.number().into_matrix())?;
    IntertwiningProblem::new(h, ladder.raising().pow(2), 2)
}

fn first_offender(a: &CMatrix, b: &CMatrix) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = (a[(i, j)] - b[(i, j)]).norm();
            if d > worst.0 {
                worst = (d, i);
            }
        }
    }
    worst
}

/// Checks `N₁ = q³N² + q(1+2q)N + (1+q)` and `H = f((1+q) + q²N)` where `N`
/// has eigenvalues `[n]_q`; `f = t` gives the plain companion.
pub fn quon_closed_forms_with(dim: usize, q: f64, f: &SpectralMap) -> Result<ClosedFormReport> {
    let p = quon_problem(dim, q)?;
    let res = nonisospectral_construct(&p, f)?;
    let keep = p.window.keep();
    let qn = q_numbers(q, dim);
    let n1_expected = CMatrix::from_fn(keep, keep, |i, j| {
        if i == j {
            let n = qn[i];
            c(q.powi(3) * n * n + q * (1.0 + 2.0 * q) * n + (1.0 + q))
        } else {
            c(0.0)
        }
    });
    let h_expected = CMatrix::from_fn(keep, keep, |i, j| {
        if i == j {
            c(f.eval((1.0 + q) + q * q * qn[i]))
        } else {
            c(0.0)
        }
    });
    let (n1_dev, n1_level) = first_offender(&res.n1, &n1_expected);
    if n1_dev > CLOSED_FORM_TOL {
        return Err(Error::ClosedFormMismatch {
            what: "N1".into(),
            deviation: n1_dev,
            level: n1_level,
        });
    }
    let (h_dev, h_level) = if matches!(f, SpectralMap::Exp) {
        (scaled_dev(&res.big_h, &h_expected), 0)
    } else {
        first_offender(&res.big_h, &h_expected)
    };
    if h_dev > CLOSED_FORM_TOL {
        return Err(Error::ClosedFormMismatch {
            what: "H".into(),
            deviation: h_dev,
            level: h_level,
        });
    }
    Ok(ClosedFormReport {
        n1_deviation: n1_dev,
        h_deviation: h_dev,
        window_keep: keep,
    })
}

pub fn quon_closed_forms(dim: usize, q: f64) -> Result<ClosedFormReport> {
    quon_closed_forms_with(dim, q, &SpectralMap::identity())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SusyGridReport {
    pub points: usize,
    pub step: f64,
    /// Nodes kept after removing the boundary margin.
    pub interior_points: usize,
    /// Probe diagnostic of `[a, a†] − (2ħ/sqrt(2m)) W'`.
    pub commutator_residual: f64,
    /// `max_k ‖H ψ_k − f(a†a + (2ħ/sqrt(2m)) W') ψ_k‖` over the lowest
    /// eigenvectors of `h`, on the interior.
    pub h_residual: f64,
    pub eigenvectors: usize,
    /// Largest mass of those eigenvectors inside the margin.
    pub leakage: f64,
    pub n1_min: f64,
}

fn real_function(m: &DMatrix<f64>, f: &SpectralMap) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        e.eigenvectors[(i, j)] * f.eval(e.eigenvalues[j])
    });
    scaled * e.eigenvectors.transpose()
}

fn principal(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Grid SUSY case with `h = a†a`, `x = a†`.
///
/// On a square grid `a a†` and `a† a` share their spectrum, so `N₁` carries
/// the zero mode of `h` on a vector pinned to the grid ends. The
/// construction therefore uses the interior nodes at distance at least
/// `margin` from both ends, the grid counterpart of the level window. The
/// grid ladder is real, so everything runs in real arithmetic.
pub fn susy_grid_case(
    w: &dyn Superpotential,
    grid: GridSpec,
    margin: f64,
    hbar: f64,
    mass: f64,
    f: &SpectralMap,
) -> Result<SusyGridReport> {
    let ladder = build_grid_ladder(w, grid, hbar, mass)?;
    let xs = grid.nodes();
    let interior: Vec<usize> = (0..grid.points)
        .filter(|&i| xs[i] - grid.lo >= margin && grid.hi - xs[i] >= margin)
        .collect();
    if interior.len() < 2 * GRID_EIGENVECTORS || !(margin >= 0.0) {
        return Err(Error::BadGrid(format!(
            "margin {margin} leaves {} interior nodes",
            interior.len()
        )));
    }
    let a = ladder.lowering.matrix().map(|z| z.re);
    let ad = a.transpose();
    let h = &ad * &a;
    let xx = &ad * &a;
    let commutant = principal(&(&xx * &h - &h * &xx), &interior).amax();
    if !(commutant < COMMUTANT_TOL) {
        return Err(Error::HypothesisViolated {
            what: "[x x†, h] = 0".into(),
            residual: commutant,
        });
    }
    let n1 = principal(&(&a * &ad), &interior);
    let n1_eig = n1.clone().symmetric_eigen();
    let n1_min = n1_eig.eigenvalues.min();
    if !(n1_min > INVERTIBILITY_TOL) {
        return Err(Error::HypothesisViolated {
            what: "N1 = x† x invertible".into(),
            residual: n1_min,
        });
    }
    let inv_scaled = DMatrix::from_fn(n1.nrows(), n1.ncols(), |i, j| {
        n1_eig.eigenvectors[(i, j)] / n1_eig.eigenvalues[j]
    });
    let n1_inv = inv_scaled * n1_eig.eigenvectors.transpose();
    let fh = real_function(&h, f);
    let big_h = n1_inv * principal(&(&a * fh * &ad), &interior);

    let scale = hbar / (2.0 * mass).sqrt();
    let mut target = h.clone();
    for (i, &x) in xs.iter().enumerate() {
        target[(i, i)] += 2.0 * scale * w.derivative(x);
    }
    let target = principal(&real_function(&target, f), &interior);

    let h_eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..grid.points).collect();
    order.sort_by(|&i, &j| h_eig.eigenvalues[i].total_cmp(&h_eig.eigenvalues[j]));
    let diff = big_h - target;
    let (mut h_residual, mut leakage) = (0.0f64, 0.0f64);
    for &k in &order[..GRID_EIGENVECTORS] {
        let v = h_eig.eigenvectors.column(k);
        let vi = nalgebra::DVector::from_iterator(interior.len(), interior.iter().map(|&i| v[i]));
        let outside: f64 = (0..grid.points)
            .filter(|i| interior.binary_search(i).is_err())
            .map(|i| v[i] * v[i])
            .sum();
        leakage = leakage.max(outside.sqrt());
        h_residual = h_residual.max((&diff * vi).norm());
    }
    Ok(SusyGridReport {
        points: grid.points,
        step: grid.step(),
        interior_points: interior.len(),
        commutator_residual: ladder.commutator_residual,
        h_residual,
        eigenvectors: GRID_EIGENVECTORS,
        leakage,
        n1_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSweep {
    pub rows: Vec<SusyGridReport>,
    /// Fitted exponents of the residuals against the grid step.
    pub commutator_order: f64,
    pub h_order: f64,
}

impl GridSweep {
    pub fn write_table(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "points,step,commutator_residual,h_residual")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                r.points, r.step, r.commutator_residual, r.h_residual
            )?;
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
pub fn susy_grid_sweep(
    w: &(dyn Superpotential + Sync),
    lo: f64,
    hi: f64,
    margin: f64,
    sizes: &[usize],
    hbar: f64,
    mass: f64,
    f: &SpectralMap,
) -> Result<GridSweep> {
    let rows = sizes
        .par_iter()
        .map(|&points| susy_grid_case(w, GridSpec { lo, hi, points }, margin, hbar, mass, f))
        .collect::<Result<Vec<_>>>()?;
    let steps: Vec<f64> = rows.iter().map(|r| r.step).collect();
    let comm: Vec<f64> = rows.iter().map(|r| r.commutator_residual).collect();
    let hres: Vec<f64> = rows.iter().map(|r| r.h_residual).collect();
    Ok(GridSweep {
        commutator_order: log_log_slope(&steps, &comm),
        h_order: log_log_slope(&steps, &hres),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_boson_ladder, PolynomialSuperpotential};
    use crate::spectra::{shift, SpectralSequence};

    fn linear_pair(dim: usize) -> Vec<ShiftedSequence> {
        vec![
            shift(&SpectralSequence::linear(1.0, 0.0, dim).unwrap()),
            shift(&SpectralSequence::linear(2f64.sqrt(), 0.0, dim).unwrap()),
        ]
    }

    #[test]
    fn example1_is_susy_partner() {
        let dim = 20;
        let seqs = linear_pair(dim);
        let p = example_factory(1, &seqs, dim, 0.7).unwrap();
        let r = construct_h(&p).unwrap();
        assert!(r.certificate.passed, "{:?}", r.certificate);
        // H = B B† on the window: diag ε̃_{n+1}.
        let keep = p.window.keep();
        for j in 0..2 {
            for n in 0..keep {
                let k = j * keep + n;
                let expected = seqs[j].values()[n + 1];
                assert!((r.big_h[(k, k)].re - expected).abs() < 1e-12);
            }
        }
        // Φ_0 = B e_0 vanishes in both sectors.
        assert_eq!(r.certificate.eigenvectors_zero, 2);
    }

    #[test]
    fn example2_n1_diagonal() {
        let dim = 16;
        let seqs = linear_pair(dim);
        let p = example_factory(2, &seqs, dim, 0.3).unwrap();
        let r = construct_h(&p).unwrap();
        assert!(r.certificate.passed);
        let keep = p.window.keep();
        for j in 0..2 {
            let e = seqs[j].values();
            for n in 0..keep {
                let k = j * keep + n;
                assert!((r.n1[(k, k)].re - e[n + 1] * e[n + 2]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn example3_and_4() {
        let dim = 16;
        let seqs = linear_pair(dim);
        let r3 = construct_h(&example_factory(3, &seqs, dim, 1.1).unwrap()).unwrap();
        assert!(r3.certificate.passed);
        // B³ e_n = 0 for n < 3.
        assert_eq!(r3.certificate.eigenvectors_zero, 6);

        let p4 = example_factory(4, &seqs, dim, 1.1).unwrap();
        assert!((p4.h.matrix()[(3, 3)].re - 6.0).abs() < 1e-12);
        let r4 = construct_h(&p4).unwrap();
        assert!(r4.certificate.passed, "{:?}", r4.certificate);
        // H = B†B²B† restricted to the window.
        let space = p4.h.space();
        let b = build_b_gamma(space, &seqs, 1.1).unwrap();
        let bd = b.adjoint();
        let direct = bd.compose(&b.pow(2)).compose(&bd);
        assert!(max_dev(&p4.window.restrict(direct.matrix()), &r4.big_h) < 1e-10);
        assert!(example_factory(5, &seqs, dim, 0.0).is_err());
    }

    #[test]
    fn gamma_independence() {
        let dim = 14;
        let seqs = linear_pair(dim);
        for which in 1..=4 {
            let a = construct_h(&example_factory(which, &seqs, dim, 0.0).unwrap()).unwrap();
            let b = construct_h(&example_factory(which, &seqs, dim, 3.1).unwrap()).unwrap();
            assert!(max_dev(&a.h, &b.h) < 1e-12);
            assert!(max_dev(&a.big_h, &b.big_h) < 1e-12);
        }
    }

    #[test]
    fn identity_intertwiner() {
        let dim = 10;
        let seqs = linear_pair(dim);
        let p = example_factory(1, &seqs, dim, 0.0).unwrap();
        let id = BlockOperator::identity(p.h.space());
        let q = IntertwiningProblem::new(p.h.clone(), id, 0).unwrap();
        let r = construct_h(&q).unwrap();
        assert_eq!(r.big_h, q.window.restrict(q.h.matrix()));
        let probe = commutation_probe(&q, &SpectralMap::square(), 0).unwrap();
        assert_eq!(probe.residual, 0.0);
    }

    #[test]
    fn hypotheses_enforced() {
        let dim = 10;
        let boson = build_boson_ladder(dim).unwrap();
        let h = BlockOperator::hermitian(boson.lowering.space(), boson.number().into_matrix()).unwrap();
        // x = a + a† does not commute with N.
        let x = BlockOperator::new(h.space(), boson.lowering.matrix() + boson.raising().matrix()).unwrap();
        let p = IntertwiningProblem::new(h.clone(), x, 1).unwrap();
        assert!(matches!(construct_h(&p), Err(Error::HypothesisViolated { .. })));
        // x = a has N₁ = a†a singular at level 0.
        let p = IntertwiningProblem::new(h, boson.lowering.clone(), 1).unwrap();
        assert!(matches!(construct_h(&p), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn iteration_on_example1() {
        let dim = 20;
        let seqs = linear_pair(dim);
        let p = example_factory(1, &seqs, dim, 0.4).unwrap();
        let r1 = construct_h(&p).unwrap();
        let p2 = r1.iterate(&p, 1).unwrap();
        let r2 = construct_h(&p2).unwrap();
        assert!(r2.certificate.passed, "{:?}", r2.certificate);
        // Second companion is diag ε̃_{n+2}.
        let keep = p2.window.keep();
        for j in 0..2 {
            for n in 0..keep {
                let k = j * keep + n;
                assert!((r2.big_h[(k, k)].re - seqs[j].values()[n + 2]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_tau_factorization() {
        let seqs = linear_pair(30);
        for g in [0.0, 0.7, 3.1] {
            let r = h_tau_identity_check(&seqs, 30, g).unwrap();
            assert!(r.relative <= 1e-14, "{r:?}");
        }
        let r = h_tau_identity_check(&linear_pair(12), 12, 0.0).unwrap();
        assert!(r.absolute <= 1e-14);
    }

    #[test]
    fn quon_forms() {
        for q in [0.3, 0.5, 0.9, 1.0] {
            let r = quon_closed_forms(40, q).unwrap();
            assert!(r.n1_deviation <= CLOSED_FORM_TOL && r.h_deviation <= CLOSED_FORM_TOL);
        }
        // H at q = 0.5, level 2.
        let p = quon_problem(12, 0.5).unwrap();
        let r = construct_h(&p).unwrap();
        assert!((r.big_h[(2, 2)].re - 1.875).abs() < 1e-13);
        assert!(
            (r.n1[(3, 3)].re - {
                let n = q_numbers(0.5, 4)[3];
                0.125 * n * n + n + 1.5
            })
            .abs()
                < 1e-13
        );
    }

    #[test]
    fn boson_nonisospectral() {
        let sq = quon_closed_forms_with(30, 1.0, &SpectralMap::square()).unwrap();
        assert!(sq.h_deviation <= 1e-11);
        let ex = quon_closed_forms_with(30, 1.0, &SpectralMap::Exp).unwrap();
        assert!(ex.h_deviation <= 1e-11);
        // f = identity through the non-isospectral path matches construct_h.
        let p = quon_problem(20, 1.0).unwrap();
        let a = construct_h(&p).unwrap();
        let b = nonisospectral_construct(
            &p,
            &SpectralMap::Polynomial {
                coeffs: vec![0.0, 1.0, 0.0],
            },
        )
        .unwrap();
        assert!(max_dev(&a.big_h, &b.big_h) < 1e-12);
    }

    #[test]
    fn commutation_probe_and_sufficient_condition() {
        let dim = 30;
        let p = quon_problem(dim, 1.0).unwrap();
        let probe = commutation_probe(&p, &SpectralMap::square(), 0).unwrap();
        assert!(probe.residual <= 1e-10, "{probe:?}");
        assert_eq!(probe.trials, p.window.len() + RANDOM_TRIALS);
        let s = sufficient_condition_check(&p, 4).unwrap();
        assert!(s.projection.iter().all(|&r| r <= 1e-10), "{s:?}");
        assert_eq!(s.deficiency, vec![2]);

        let q = quon_problem(dim, 0.5).unwrap();
        let f = SpectralMap::Polynomial {
            coeffs: vec![1.0, -0.5, 0.25],
        };
        assert!(commutation_probe(&q, &f, 1).unwrap().residual <= 1e-10);

        // Invertible x = 1 + a†a.
        let boson = build_boson_ladder(dim).unwrap();
        let space = boson.lowering.space();
        let n = boson.number();
        let h = BlockOperator::hermitian(space, n.matrix().clone()).unwrap();
        let x = BlockOperator::new(space, n.matrix() + CMatrix::identity(dim, dim)).unwrap();
        let pi = IntertwiningProblem::new(h, x, 0).unwrap();
        let s = sufficient_condition_check(&pi, 4).unwrap();
        assert_eq!(s.deficiency, vec![0]);
        assert!(s.commutant <= 1e-10);
        assert!(commutation_probe(&pi, &SpectralMap::square(), 2).unwrap().residual <= 1e-10);
    }

    #[test]
    fn susy_grid_linear_converges() {
        let w = PolynomialSuperpotential { coeffs: vec![0.0, 1.0] };
        let sweep = susy_grid_sweep(&w, -10.0, 10.0, 2.0, &[256, 512], 1.0, 1.0, &SpectralMap::identity()).unwrap();
        let r = &sweep.rows[1];
        assert!(r.h_residual < 2e-2, "{r:?}");
        assert!(r.leakage < 1e-10);
        // Restricted N₁ is bounded below by about 2c W' = sqrt(2).
        assert!((r.n1_min - 2f64.sqrt()).abs() < 1e-2);
        let ratio = sweep.rows[0].h_residual / r.h_residual;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn full_grid_n1_is_singular() {
        let w = PolynomialSuperpotential { coeffs: vec![0.0, 1.0] };
        let g = GridSpec {
            lo: -10.0,
            hi: 10.0,
            points: 128,
        };
        let err = susy_grid_case(&w, g, 0.0, 1.0, 1.0, &SpectralMap::identity()).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolated { .. }));
        assert!(susy_grid_case(&w, g, 9.9, 1.0, 1.0, &SpectralMap::identity()).is_err());
    }
}
