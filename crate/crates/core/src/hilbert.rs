//! Truncated sector space `C^N ⊗ H_D`, block operators and ladder
//! realizations.
//!
//! Vectors and operators are stored densely with sector-major ordering:
//! global index `j * D + n` is level `n` of sector `j`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, CMatrix, CVector, HermitianEigen};
use crate::spectra::{Regime, ShiftedSequence, SpectralSequence};

/// Maximum hermiticity defect for an operator flagged hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorSpace {
    sectors: usize,
    dim: usize,
}

impl SectorSpace {
    pub fn new(sectors: usize, dim: usize) -> Result<Self> {
        if sectors < 1 || dim < 2 {
            return Err(Error::BadSpace(format!(
                "need N >= 1 and D >= 2, got N = {sectors}, D = {dim}"
            )));
        }
        Ok(Self { sectors, dim })
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total(&self) -> usize {
        self.sectors * self.dim
    }

    pub fn index(&self, sector: usize, level: usize) -> Result<usize> {
        if sector >= self.sectors || level >= self.dim {
            return Err(Error::IndexOutOfRange {
                sector,
                level,
                sectors: self.sectors,
                dim: self.dim,
            });
        }
        Ok(sector * self.dim + level)
    }
}

/// A vector of `C^N ⊗ H_D`; the inner product is the sum of the
/// per-sector inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct SusyVector {
    space: SectorSpace,
    data: CVector,
}

impl SusyVector {
    pub fn zeros(space: SectorSpace) -> Self {
        Self {
            space,
            data: CVector::zeros(space.total()),
        }
    }

    pub fn from_vector(space: SectorSpace, data: CVector) -> Result<Self> {
        if data.len() != space.total() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} in space of dimension {}",
                data.len(),
                space.total()
            )));
        }
        Ok(Self { space, data })
    }

    pub fn from_blocks(blocks: &[Vec<Complex64>]) -> Result<Self> {
        let dim = blocks.first().map_or(0, Vec::len);
        if blocks.iter().any(|b| b.len() != dim) {
            return Err(Error::LengthMismatch("blocks differ in length".into()));
        }
        let space = SectorSpace::new(blocks.len(), dim)?;
        let data = CVector::from_iterator(space.total(), blocks.iter().flatten().copied());
        Ok(Self { space, data })
    }

    pub fn space(&self) -> SectorSpace {
        self.space
    }

    pub fn as_vector(&self) -> &CVector {
        &self.data
    }

    pub fn into_vector(self) -> CVector {
        self.data
    }

    pub fn block(&self, sector: usize) -> &[Complex64] {
        let d = self.space.dim;
        &self.data.as_slice()[sector * d..(sector + 1) * d]
    }

    pub fn get(&self, sector: usize, level: usize) -> Complex64 {
        self.data[sector * self.space.dim + level]
    }

    pub fn inner(&self, other: &SusyVector) -> Complex64 {
        (0..self.space.sectors)
            .map(|j| {
                self.block(j)
                    .iter()
                    .zip(other.block(j))
                    .map(|(a, b)| a.conj() * b)
                    .sum::<Complex64>()
            })
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn distance(&self, other: &SusyVector) -> f64 {
        (&self.data - &other.data).norm()
    }
}

/// Unit vector at level `level` of sector `sector`.
pub fn basis_vector(space: SectorSpace, sector: usize, level: usize) -> Result<SusyVector> {
    let k = space.index(sector, level)?;
    let mut v = SusyVector::zeros(space);
    v.data[k] = c(1.0);
    Ok(v)
}

/// Dense operator on a sector space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    space: SectorSpace,
    matrix: CMatrix,
    hermitian: bool,
}

impl BlockOperator {
    pub fn new(space: SectorSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != space.total() || matrix.ncols() != space.total() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on space of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.total()
            )));
        }
        Ok(Self {
            space,
            matrix,
            hermitian: false,
        })
    }

    /// Validates and sets the hermitian flag.
    pub fn hermitian(space: SectorSpace, matrix: CMatrix) -> Result<Self> {
        let mut op = Self::new(space, matrix)?;
        let defect = hermiticity_defect(&op.matrix);
        if defect >= HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn identity(space: SectorSpace) -> Self {
        Self {
            space,
            matrix: CMatrix::identity(space.total(), space.total()),
            hermitian: true,
        }
    }

    /// Block-diagonal operator with the given `D x D` blocks.
    pub fn block_diagonal(blocks: &[CMatrix]) -> Result<Self> {
        let dim = blocks.first().map_or(0, |b| b.nrows());
        if blocks.iter().any(|b| b.nrows() != dim || b.ncols() != dim) {
            return Err(Error::LengthMismatch("blocks differ in shape".into()));
        }
        let space = SectorSpace::new(blocks.len(), dim)?;
        let mut matrix = CMatrix::zeros(space.total(), space.total());
        for (j, b) in blocks.iter().enumerate() {
            matrix.view_mut((j * dim, j * dim), (dim, dim)).copy_from(b);
        }
        let mut op = Self::new(space, matrix)?;
        op.hermitian = hermiticity_defect(&op.matrix) < HERMITIAN_TOL;
        Ok(op)
    }

    /// `diag(values)` with one list per sector.
    pub fn diagonal(space: SectorSpace, diag: &[f64]) -> Result<Self> {
        if diag.len() != space.total() {
            return Err(Error::DimensionMismatch("diagonal length".into()));
        }
        let matrix = CMatrix::from_diagonal(&CVector::from_iterator(diag.len(), diag.iter().map(|&d| c(d))));
        Ok(Self {
            space,
            matrix,
            hermitian: true,
        })
    }

    pub fn space(&self) -> SectorSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn block(&self, row: usize, col: usize) -> CMatrix {
        let d = self.space.dim;
        self.matrix.view((row * d, col * d), (d, d)).into_owned()
    }

    pub fn is_block_diagonal(&self) -> bool {
        let (n, d) = (self.space.sectors, self.space.dim);
        (0..n).all(|r| (0..n).all(|k| r == k || self.matrix.view((r * d, k * d), (d, d)).iter().all(|z| *z == c(0.0))))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        let matrix = &self.matrix * &other.matrix;
        let hermitian = hermiticity_defect(&matrix) < HERMITIAN_TOL;
        Self {
            space: self.space,
            matrix,
            hermitian,
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.space);
        for _ in 0..k {
            out = out.compose(self);
        }
        out
    }

    pub fn apply(&self, v: &SusyVector) -> Result<SusyVector> {
        if v.space != self.space {
            return Err(Error::DimensionMismatch("vector and operator spaces differ".into()));
        }
        Ok(SusyVector {
            space: self.space,
            data: &self.matrix * &v.data,
        })
    }
}

/// `e^{-iTt}` for hermitian `T`, decomposed block by block when `T` is
/// block-diagonal.
pub fn matrix_exponential(op: &BlockOperator, t: f64) -> Result<BlockOperator> {
    let defect = hermiticity_defect(op.matrix());
    if defect >= HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let phase = |lam: f64| Complex64::from_polar(1.0, -lam * t);
    let matrix = if op.is_block_diagonal() {
        let d = op.space.dim;
        let mut out = CMatrix::zeros(op.space.total(), op.space.total());
        for j in 0..op.space.sectors {
            let u = HermitianEigen::new(&op.block(j, j)).apply_complex(phase);
            out.view_mut((j * d, j * d), (d, d)).copy_from(&u);
        }
        out
    } else {
        HermitianEigen::new(op.matrix()).apply_complex(phase)
    };
    BlockOperator::new(op.space, matrix)
}

/// Contiguous low levels `0..keep` of every sector, the part of a truncated
/// space on which infinite-dimensional operator identities still hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    space: SectorSpace,
    keep: usize,
}

impl Window {
    /// Levels `n <= D - 1 - degree - 2`, the policy for identities that use
    /// `degree` raising or lowering steps.
    pub fn for_degree(space: SectorSpace, degree: usize) -> Result<Self> {
        let drop = degree + 2;
        if drop >= space.dim {
            return Err(Error::BadSpace(format!(
                "D = {} leaves no valid levels for degree {degree}",
                space.dim
            )));
        }
        Self::with_keep(space, space.dim - drop)
    }

    pub fn with_keep(space: SectorSpace, keep: usize) -> Result<Self> {
        if keep == 0 || keep > space.dim {
            return Err(Error::BadSpace(format!("window of {keep} levels in D = {}", space.dim)));
        }
        Ok(Self { space, keep })
    }

    pub fn full(space: SectorSpace) -> Self {
        Self { space, keep: space.dim }
    }

    pub fn space(&self) -> SectorSpace {
        self.space
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn len(&self) -> usize {
        self.keep * self.space.sectors
    }

    pub fn is_empty(&self) -> bool {
        self.keep == 0
    }

    /// Global indices of the window, sector-major.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.space.sectors)
            .flat_map(|j| (0..self.keep).map(move |n| j * self.space.dim + n))
            .collect()
    }

    /// Space of the restricted operators.
    pub fn reduced_space(&self) -> SectorSpace {
        SectorSpace {
            sectors: self.space.sectors,
            dim: self.keep,
        }
    }

    pub fn restrict(&self, m: &CMatrix) -> CMatrix {
        let idx = self.indices();
        CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
    }

    /// Rows in the window, all columns.
    pub fn restrict_rows(&self, m: &CMatrix) -> CMatrix {
        let idx = self.indices();
        CMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
    }

    /// All rows, columns in the window.
    pub fn restrict_cols(&self, m: &CMatrix) -> CMatrix {
        let idx = self.indices();
        CMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
    }

    pub fn restrict_vec(&self, v: &CVector) -> CVector {
        let idx = self.indices();
        CVector::from_iterator(idx.len(), idx.iter().map(|&k| v[k]))
    }

    /// Zero-pads a window-sized matrix back to the full space.
    pub fn embed(&self, m: &CMatrix) -> CMatrix {
        let idx = self.indices();
        let mut out = CMatrix::zeros(self.space.total(), self.space.total());
        for (i, &gi) in idx.iter().enumerate() {
            for (j, &gj) in idx.iter().enumerate() {
                out[(gi, gj)] = m[(i, j)];
            }
        }
        out
    }

    pub fn embed_vec(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.space.total());
        for (i, &k) in self.indices().iter().enumerate() {
            out[k] = v[i];
        }
        out
    }
}

fn check_sequences(space: SectorSpace, lens: impl Iterator<Item = usize>) -> Result<()> {
    let lens: Vec<usize> = lens.collect();
    if lens.len() != space.sectors {
        return Err(Error::LengthMismatch(format!(
            "{} sequences for {} sectors",
            lens.len(),
            space.sectors
        )));
    }
    if let Some((j, l)) = lens.iter().enumerate().find(|(_, &l)| l < space.dim) {
        return Err(Error::LengthMismatch(format!(
            "sequence {j} has {l} values, need {}",
            space.dim
        )));
    }
    Ok(())
}

/// Lowering block with `a[n-1, n] = amp(n) · e^{i sign (ε_n - ε_{n-1}) γ}`.
fn lowering_block(dim: usize, amp: impl Fn(usize) -> f64, energies: &[f64], sign: f64, gamma: f64) -> CMatrix {
    let mut b = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        let phase = sign * (energies[n] - energies[n - 1]) * gamma;
        b[(n - 1, n)] = Complex64::from_polar(amp(n), phase);
    }
    b
}

/// Block-diagonal lowering operator
/// `B_γ e_n^(j) = sqrt(ε̃_n^(j)) e^{i(ε_n^(j) - ε_{n-1}^(j))γ} e_{n-1}^(j)`.
pub fn build_b_gamma(space: SectorSpace, seqs: &[ShiftedSequence], gamma: f64) -> Result<BlockOperator> {
    check_sequences(space, seqs.iter().map(ShiftedSequence::len))?;
    let blocks: Vec<CMatrix> = seqs
        .iter()
        .map(|s| lowering_block(space.dim, |n| s.values()[n].sqrt(), s.energies(), 1.0, gamma))
        .collect();
    BlockOperator::block_diagonal(&blocks)
}

/// Two-sector lowering operator of the δ-family: the first sector carries
/// `e^{+i(ε_n - ε_{n-1})γ}`, the second `e^{-i(ε_n - ε_{n-1})γ}`, amplitudes
/// `sqrt(ε_n)` with `ε_0 = 0`.
pub fn build_a_gamma_delta_variant(space: SectorSpace, seqs: &[SpectralSequence], gamma: f64) -> Result<BlockOperator> {
    if space.sectors != 2 {
        return Err(Error::BadSpace("the δ-family operator needs two sectors".into()));
    }
    check_sequences(space, seqs.iter().map(SpectralSequence::len))?;
    for s in seqs {
        s.require_regime(Regime::GroundAtZero)?;
    }
    let blocks: Vec<CMatrix> = seqs
        .iter()
        .zip([1.0, -1.0])
        .map(|(s, sign)| lowering_block(space.dim, |n| s.values()[n].sqrt(), s.values(), sign, gamma))
        .collect();
    BlockOperator::block_diagonal(&blocks)
}

/// Two-sector lowering operator of the EDS family. Identical to
/// [`build_b_gamma`] restricted to two sectors.
pub fn build_a_tilde_gamma(space: SectorSpace, seqs: &[ShiftedSequence], gamma: f64) -> Result<BlockOperator> {
    if space.sectors != 2 {
        return Err(Error::BadSpace("the EDS-family operator needs two sectors".into()));
    }
    build_b_gamma(space, seqs, gamma)
}

/// `diag(h_1, ..., h_N)` with eigenvalues `ε_n^(j)`.
pub fn hamiltonian(space: SectorSpace, seqs: &[SpectralSequence]) -> Result<BlockOperator> {
    check_sequences(space, seqs.iter().map(SpectralSequence::len))?;
    let diag: Vec<f64> = seqs
        .iter()
        .flat_map(|s| s.values()[..space.dim].iter().copied())
        .collect();
    BlockOperator::diagonal(space, &diag)
}

/// Shifted Hamiltonian `H_τ = H - ε_0`.
pub fn shifted_hamiltonian(space: SectorSpace, seqs: &[ShiftedSequence]) -> Result<BlockOperator> {
    check_sequences(space, seqs.iter().map(ShiftedSequence::len))?;
    let diag: Vec<f64> = seqs
        .iter()
        .flat_map(|s| s.values()[..space.dim].iter().copied())
        .collect();
    BlockOperator::diagonal(space, &diag)
}

/// The δ-family evolution `diag(e^{-i(h_1+δ)t}, e^{+i(h_2+δ)t})`.
pub fn delta_evolution(space: SectorSpace, seqs: &[SpectralSequence], delta: f64, t: f64) -> Result<BlockOperator> {
    if space.sectors != 2 {
        return Err(Error::BadSpace("the δ-family evolution needs two sectors".into()));
    }
    check_sequences(space, seqs.iter().map(SpectralSequence::len))?;
    let mut diag = Vec::with_capacity(space.total());
    for (s, sign) in seqs.iter().zip([-1.0, 1.0]) {
        for &e in &s.values()[..space.dim] {
            diag.push(Complex64::from_polar(1.0, sign * (e + delta) * t));
        }
    }
    BlockOperator::new(space, CMatrix::from_diagonal(&CVector::from_vec(diag)))
}

/// Which concrete ladder a [`LadderRealization`] holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LadderKind {
    GkAbstract {
        gamma: f64,
    },
    Boson,
    Quon {
        q: f64,
    },
    GridSuperpotential {
        lo: f64,
        hi: f64,
        points: usize,
        hbar: f64,
        mass: f64,
    },
}

/// A lowering matrix on a single sector together with a diagnostic.
#[derive(Debug, Clone)]
pub struct LadderRealization {
    pub kind: LadderKind,
    pub lowering: BlockOperator,
    /// Defect of the defining commutation relation on the valid levels
    /// (for the grid ladder, on interior points applied to a smooth probe).
    pub commutator_residual: f64,
}

impl LadderRealization {
    pub fn raising(&self) -> BlockOperator {
        self.lowering.adjoint()
    }

    /// `a† a`.
    pub fn number(&self) -> BlockOperator {
        self.raising().compose(&self.lowering)
    }

    pub fn dim(&self) -> usize {
        self.lowering.space().dim()
    }
}

/// Abstract GK ladder of one shifted sequence.
pub fn build_gk_ladder(seq: &ShiftedSequence, dim: usize, gamma: f64) -> Result<LadderRealization> {
    let space = SectorSpace::new(1, dim)?;
    let lowering = build_b_gamma(space, std::slice::from_ref(seq), gamma)?;
    // a a† - a† a is diag(ε̃_{n+1} - ε̃_n)
    let comm = lowering.compose(&lowering.adjoint()).matrix() - lowering.adjoint().compose(&lowering).matrix();
    let mut residual: f64 = 0.0;
    for n in 0..dim.saturating_sub(1) {
        let expected = seq.values()[n + 1] - seq.values()[n];
        residual = residual.max((comm[(n, n)] - c(expected)).norm());
    }
    Ok(LadderRealization {
        kind: LadderKind::GkAbstract { gamma },
        lowering,
        commutator_residual: residual,
    })
}

pub fn build_boson_ladder(dim: usize) -> Result<LadderRealization> {
    let mut r = build_quon_ladder(dim, 1.0)?;
    r.kind = LadderKind::Boson;
    Ok(r)
}

/// `a|n⟩ = sqrt([n]_q)|n-1⟩`; `aa† - q a†a = 1` holds below the top level.
pub fn build_quon_ladder(dim: usize, q: f64) -> Result<LadderRealization> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::BadDeformation(q));
    }
    let space = SectorSpace::new(1, dim)?;
    let qn = crate::spectra::q_numbers(q, dim);
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c(qn[n].sqrt());
    }
    let lowering = BlockOperator::new(space, a)?;
    let rel = lowering.compose(&lowering.adjoint()).matrix() - lowering.adjoint().compose(&lowering).matrix().scale(q);
    let mut residual: f64 = 0.0;
    for i in 0..dim - 1 {
        for j in 0..dim - 1 {
            let target = if i == j { c(1.0) } else { c(0.0) };
            residual = residual.max((rel[(i, j)] - target).norm());
        }
    }
    Ok(LadderRealization {
        kind: LadderKind::Quon { q },
        lowering,
        commutator_residual: residual,
    })
}

/// Superpotential `W` with its derivative.
pub trait Superpotential {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// `W(x) = Σ c_k x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PolynomialSuperpotential {
    pub coeffs: Vec<f64>,
}

impl Superpotential for PolynomialSuperpotential {
    fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck)
    }
}

/// Uniform grid on `[lo, hi]` including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 64;

    pub fn validate(&self) -> Result<()> {
        if self.points < Self::MIN_POINTS {
            return Err(Error::BadGrid(format!(
                "{} points, need at least {}",
                self.points,
                Self::MIN_POINTS
            )));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(Error::BadGrid(format!("interval [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }
}

/// Probe used for the grid commutator diagnostic: the unit-norm Gaussian
/// `π^{-1/4} e^{-x²/2}`.
pub fn grid_probe(x: f64) -> f64 {
    std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp()
}

/// Grid realization `a = (ħ/sqrt(2m)) D + diag(W(x_i))`.
///
/// `D` is the forward difference with the grid truncated to zero beyond the
/// last node, so `a†` carries the matching backward difference and
/// `[a, a†]` approximates `(2ħ/sqrt(2m)) W'` to second order.
pub fn build_grid_ladder(w: &dyn Superpotential, grid: GridSpec, hbar: f64, mass: f64) -> Result<LadderRealization> {
    grid.validate()?;
    if !(hbar > 0.0 && mass > 0.0) {
        return Err(Error::BadParameter(format!(
            "hbar = {hbar}, m = {mass} must be positive"
        )));
    }
    let xs = grid.nodes();
    if let Some(&x) = xs.iter().find(|&&x| w.derivative(x) <= 0.0) {
        return Err(Error::NonPositiveDerivative {
            x,
            derivative: w.derivative(x),
        });
    }
    let n = grid.points;
    let h = grid.step();
    let scale = hbar / (2.0 * mass).sqrt();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = w.value(xs[i]) - scale / h;
        if i + 1 < n {
            a[(i, i + 1)] = scale / h;
        }
    }
    let space = SectorSpace::new(1, n)?;
    let lowering = BlockOperator::new(space, a.map(c))?;

    let comm = &a * a.transpose() - a.transpose() * &a;
    let probe = nalgebra::DVector::from_iterator(n, xs.iter().map(|&x| grid_probe(x)));
    let applied = &comm * &probe;
    let mut residual: f64 = 0.0;
    for i in 1..n - 1 {
        let target = 2.0 * scale * w.derivative(xs[i]) * probe[i];
        residual = residual.max((applied[i] - target).abs());
    }
    Ok(LadderRealization {
        kind: LadderKind::GridSuperpotential {
            lo: grid.lo,
            hi: grid.hi,
            points: n,
            hbar,
            mass,
        },
        lowering,
        commutator_residual: residual,
    })
}

/// Writes `rows cols` followed by one line per row of `re,im` pairs.
pub fn write_matrix(m: &CMatrix, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(' ');
            }
            let z = m[(i, j)];
            let _ = write!(line, "{:e},{:e}", z.re, z.im);
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_matrix(input: impl BufRead) -> Result<CMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header `{header}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("bad header `{header}`")));
    };
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing row {i}")))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != cols {
            return Err(Error::Parse(format!("row {i} has {} entries", entries.len())));
        }
        for (j, e) in entries.iter().enumerate() {
            let (re, im) = e.split_once(',').ok_or_else(|| Error::Parse(format!("entry `{e}`")))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("entry `{e}`")));
            m[(i, j)] = Complex64::new(parse(re)?, parse(im)?);
        }
    }
    Ok(m)
}
