//! Dense Hermitian spectral calculus for small dimensions.
//!
//! Every spectral function uses the support convention: eigenvalues below
//! `SUPPORT_RTOL * λ_max` are treated as exact zeros, `0^t = 0` for every `t`
//! (so negative powers are pseudo-inverses) and `log 0 ↦ 0`. Callers that
//! need the `+∞` branch of a divergence test support containment explicitly.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Maximum entrywise deviation `‖A − A†‖_max` accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative eigenvalue threshold defining the support of a PSD operator.
pub const SUPPORT_RTOL: f64 = 1e-9;
/// Absolute threshold for the strictly-positive eigenspace of `{A > 0}`.
pub const POSITIVE_TOL: f64 = 1e-12;
/// Trace and positivity slack for density operators.
pub const DENSITY_TOL: f64 = 1e-10;

const EIGH_MAX_SWEEPS: usize = 10_000;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |A - A^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("operator is not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("density operator has trace {trace}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("Hermitian eigensolver did not converge for a {dim}x{dim} matrix")]
    NoConvergence { dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A dense complex Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity within [`HERMITIAN_TOL`] and stores the exact
    /// Hermitian part `(A + A†)/2`.
    pub fn new(m: CMatrix) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let deviation = (&m - m.adjoint()).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if deviation > HERMITIAN_TOL || deviation.is_nan() {
            return Err(LinalgError::NotHermitian { deviation });
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Symmetrizes without validating. Used for matrices that are Hermitian
    /// by construction up to rounding.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self { m: h }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    /// `|v⟩⟨v|` for a (not necessarily normalized) vector.
    pub fn outer(v: &[C64]) -> Self {
        let d = v.len();
        let m = CMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj());
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn eigh(&self) -> Result<SpectralDecomposition, LinalgError> {
        eigh(self)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { m: &self.m * C64::new(c, 0.0) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { m: &self.m - &other.m }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }

    /// `Tr[self · other]`, real for Hermitian pairs.
    pub fn trace_product(&self, other: &Self) -> f64 {
        trace_product(&self.m, &other.m).re
    }

    /// `B A B†` for an arbitrary `B`.
    pub fn conjugate_by(&self, b: &CMatrix) -> Self {
        Self::from_matrix_unchecked(b * &self.m * b.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        spectral(self).eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *spectral(self).eigenvalues.last().unwrap()
    }
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U f(Λ) U†`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> HermitianOperator {
        let u = &self.eigenvectors;
        let d = self.dim();
        let mut scaled = u.clone();
        for j in 0..d {
            let fj = C64::new(f(self.eigenvalues[j]), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= fj;
            }
        }
        HermitianOperator::from_matrix_unchecked(scaled * u.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|x| x)
    }

    /// Eigenvalues strictly above `SUPPORT_RTOL * λ_max` (and above zero).
    pub fn support_cutoff(&self) -> f64 {
        let lmax = self.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        SUPPORT_RTOL * lmax
    }

    /// `|⟨v_i|ψ⟩|²`-style weights of `A` in this eigenbasis: `diag(U† A U)`.
    pub fn diagonal_weights(&self, a: &CMatrix) -> Vec<f64> {
        let t = self.eigenvectors.adjoint() * a * &self.eigenvectors;
        (0..self.dim()).map(|i| t[(i, i)].re).collect()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn eigh(a: &HermitianOperator) -> Result<SpectralDecomposition, LinalgError> {
    let d = a.dim();
    if d == 0 {
        return Ok(SpectralDecomposition { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) });
    }
    let se = SymmetricEigen::try_new(a.m.clone(), f64::EPSILON, EIGH_MAX_SWEEPS)
        .ok_or(LinalgError::NoConvergence { dim: d })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(d, d, |r, c| se.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// # Panics
/// If the eigensolver exceeds its iteration cap, which does not happen for
/// finite Hermitian input in practice.
pub(crate) fn spectral(a: &HermitianOperator) -> SpectralDecomposition {
    match eigh(a) {
        Ok(s) => s,
        Err(e) => panic!("spectral calculus failed: {e}"),
    }
}

/// `A^t` on the support of a PSD operator; zero eigenvalues stay zero.
pub fn frac_power(a: &HermitianOperator, t: f64) -> HermitianOperator {
    frac_power_of(&spectral(a), t)
}

pub fn frac_power_of(s: &SpectralDecomposition, t: f64) -> HermitianOperator {
    let cut = s.support_cutoff();
    s.map(|x| if x > cut && x > 0.0 { x.powf(t) } else { 0.0 })
}

/// Natural logarithm on the support; zero eigenvalues map to 0.
pub fn matrix_log(a: &HermitianOperator) -> HermitianOperator {
    let s = spectral(a);
    let cut = s.support_cutoff();
    s.map(|x| if x > cut && x > 0.0 { x.ln() } else { 0.0 })
}

/// Projector onto eigenspaces with `λ > SUPPORT_RTOL · λ_max`.
pub fn support_projector(a: &HermitianOperator) -> HermitianOperator {
    support_projector_of(&spectral(a))
}

pub fn support_projector_of(s: &SpectralDecomposition) -> HermitianOperator {
    let cut = s.support_cutoff();
    s.map(|x| if x > cut && x > 0.0 { 1.0 } else { 0.0 })
}

/// Projector `{A > 0}` onto the eigenspaces with `λ > POSITIVE_TOL`.
pub fn positive_part_projector(a: &HermitianOperator) -> HermitianOperator {
    spectral(a).map(|x| if x > POSITIVE_TOL { 1.0 } else { 0.0 })
}

/// Singular values of `G` (descending) by one-sided Jacobi rotations, accurate
/// relative to each value even when the columns of `G` are badly scaled.
pub fn singular_values_jacobi(g: &CMatrix) -> Vec<f64> {
    let mut g = g.clone();
    let cols = g.ncols();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let a = g.column(i).norm_squared();
                let b = g.column(j).norm_squared();
                let c = g.column(i).dotc(&g.column(j));
                let cn = c.norm();
                if cn == 0.0 || cn <= f64::EPSILON * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = c / cn;
                let zeta = (b - a) / (2.0 * cn);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..g.nrows() {
                    let x = g[(r, i)];
                    let y = g[(r, j)] * phase.conj();
                    g[(r, i)] = x * cs - y * sn;
                    g[(r, j)] = x * sn + y * cs;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols).map(|j| g.column(j).norm()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `‖A‖₁`, the sum of absolute eigenvalues.
pub fn trace_norm(a: &HermitianOperator) -> f64 {
    spectral(a).eigenvalues.iter().map(|x| x.abs()).sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Gradient of `X ↦ Tr[A f(X)]` at `X = U diag(λ) U†`, as the Hermitian
/// matrix `G` with `dTr[A f(X)] = Tr[G dX]`. Uses first divided differences
/// of `f` in the eigenbasis of `X`.
pub fn trace_function_gradient<F, Fp>(x: &SpectralDecomposition, a: &CMatrix, f: F, fprime: Fp) -> CMatrix
where
    F: Fn(f64) -> f64,
    Fp: Fn(f64) -> f64,
{
    let d = x.dim();
    let u = &x.eigenvectors;
    let mut t = u.adjoint() * a * u;
    let fv: Vec<f64> = x.eigenvalues.iter().map(|&l| f(l)).collect();
    for i in 0..d {
        for j in 0..d {
            let (li, lj) = (x.eigenvalues[i], x.eigenvalues[j]);
            let gap = li - lj;
            let dd = if gap.abs() <= 1e-10 * li.abs().max(lj.abs()).max(1e-300) {
                fprime(0.5 * (li + lj))
            } else {
                (fv[i] - fv[j]) / gap
            };
            t[(i, j)] *= C64::new(dd, 0.0);
        }
    }
    let g = u * t * u.adjoint();
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Reorders tensor factors: factor `k` of the input lands at position
/// `perm[k]` of the output.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> CMatrix {
    assert_eq!(dims.len(), perm.len());
    let total: usize = dims.iter().product();
    assert_eq!(m.nrows(), total);
    let k = dims.len();
    let mut out_dims = vec![0; k];
    for (i, &p) in perm.iter().enumerate() {
        out_dims[p] = dims[i];
    }
    let map: Vec<usize> = (0..total)
        .map(|idx| {
            let digits = unflatten(idx, dims);
            let mut out = vec![0; k];
            for (i, &p) in perm.iter().enumerate() {
                out[p] = digits[i];
            }
            flatten(&out, &out_dims)
        })
        .collect();
    let mut r = CMatrix::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            r[(map[i], map[j])] = m[(i, j)];
        }
    }
    r
}

/// Mixed-radix digits of `idx`, most significant first.
pub fn unflatten(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
    out
}

pub fn flatten(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// A positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    base: HermitianOperator,
}

impl DensityOperator {
    /// Validates trace and positivity within [`DENSITY_TOL`]; slightly
    /// negative eigenvalues are clamped to zero.
    pub fn new(base: HermitianOperator) -> Result<Self, LinalgError> {
        let tr = base.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(LinalgError::TraceNotOne { trace: tr });
        }
        let s = eigh(&base)?;
        let min = s.eigenvalues.first().copied().unwrap_or(0.0);
        if min < -DENSITY_TOL {
            return Err(LinalgError::NotPositive { min_eigenvalue: min });
        }
        if min < 0.0 {
            return Ok(Self { base: s.map(|x| x.max(0.0)) });
        }
        Ok(Self { base })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self, LinalgError> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Trusts the caller; only symmetrizes.
    pub(crate) fn from_hermitian_unchecked(base: HermitianOperator) -> Self {
        Self { base }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { base: HermitianOperator::identity(dim).scale(1.0 / dim as f64) }
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self, LinalgError> {
        Self::new(HermitianOperator::from_real_diagonal(probs))
    }

    /// Pure state `|ψ⟩⟨ψ|` after normalizing `ψ`.
    pub fn pure(psi: &[C64]) -> Self {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self { base: HermitianOperator::outer(&v) }
    }

    /// Qubit state from a Bloch vector with `|r| ≤ 1`.
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5 * (1.0 + r[2]), 0.0),
                C64::new(0.5 * r[0], -0.5 * r[1]),
                C64::new(0.5 * r[0], 0.5 * r[1]),
                C64::new(0.5 * (1.0 - r[2]), 0.0),
            ],
        );
        Self { base: HermitianOperator::from_matrix_unchecked(m) }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.base
    }

    pub fn matrix(&self) -> &CMatrix {
        self.base.matrix()
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { base: self.base.kron(&other.base) }
    }

    /// Convex combination `Σ w_i ρ_i`; weights must sum to one.
    pub fn mixture(weights: &[f64], states: &[&DensityOperator]) -> Self {
        assert_eq!(weights.len(), states.len());
        let d = states[0].dim();
        let mut m = CMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            m += s.matrix() * C64::new(*w, 0.0);
        }
        Self { base: HermitianOperator::from_matrix_unchecked(m) }
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        spectral(&self.base)
            .eigenvalues
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| -l * l.log2())
            .sum()
    }
}

pub mod random {
    //! Seeded random operators for tests and experiments.
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Ginibre matrix with i.i.d. standard complex Gaussian entries.
    pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
    }

    pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
        HermitianOperator::from_matrix_unchecked(ginibre(dim, dim, rng))
    }

    /// Random density operator of the given rank (induced Hilbert–Schmidt measure).
    pub fn density_of_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityOperator {
        let g = ginibre(dim, rank, rng);
        let m = &g * g.adjoint();
        let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
        DensityOperator::from_hermitian_unchecked(HermitianOperator::from_matrix_unchecked(m * C64::new(1.0 / tr, 0.0)))
    }

    pub fn density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
        density_of_rank(dim, dim, rng)
    }

    pub fn pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
        let v: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
        DensityOperator::pure(&v)
    }

    /// Random PSD operator with spectrum scaled into `[0, scale]`.
    pub fn psd<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> HermitianOperator {
        let g = ginibre(dim, dim, rng);
        let m = HermitianOperator::from_matrix_unchecked(&g * g.adjoint());
        let top = m.max_eigenvalue().max(1e-300);
        m.scale(scale / top)
    }

    /// Random orthogonal projector of the given rank.
    pub fn projector<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> HermitianOperator {
        if rank == 0 {
            return HermitianOperator::zeros(dim);
        }
        let g = ginibre(dim, rank, rng);
        let m = HermitianOperator::from_matrix_unchecked(&g * g.adjoint());
        support_projector(&m)
    }

    /// Random probability vector bounded away from zero by `floor`.
    pub fn distribution<R: Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0).ln()).collect();
        let s: f64 = raw.iter().sum();
        let scale = 1.0 - floor * k as f64;
        raw.iter().map(|r| floor + scale * r / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::new(CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])).unwrap()
    }

    fn close(a: &HermitianOperator, b: &HermitianOperator, tol: f64) -> bool {
        a.sub(b).max_norm() <= tol
    }

    #[test]
    fn eigh_examples() {
        assert_eq!(HermitianOperator::identity(2).eigh().unwrap().eigenvalues, vec![1.0, 1.0]);
        let e = HermitianOperator::from_real_diagonal(&[3.0, 1.0]).eigh().unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14 && (e.eigenvalues[1] - 3.0).abs() < 1e-14);
        let e = pauli_x().eigh().unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14 && (e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(HermitianOperator::new(m), Err(LinalgError::NotHermitian { .. })));
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(HermitianOperator::new(m), Err(LinalgError::NotSquare { .. })));
    }

    #[test]
    fn frac_power_examples() {
        let i2 = HermitianOperator::identity(2);
        assert!(close(&frac_power(&i2, 0.5), &i2, 1e-14));
        let a = HermitianOperator::from_real_diagonal(&[4.0, 0.0]);
        assert!(close(&frac_power(&a, 0.5), &HermitianOperator::from_real_diagonal(&[2.0, 0.0]), 1e-14));
        assert!(close(&frac_power(&a, -1.0), &HermitianOperator::from_real_diagonal(&[0.25, 0.0]), 1e-14));
    }

    #[test]
    fn matrix_log_examples() {
        let e = std::f64::consts::E;
        assert!(matrix_log(&HermitianOperator::identity(2)).max_norm() < 1e-14);
        let l = matrix_log(&HermitianOperator::from_real_diagonal(&[e, 1.0]));
        assert!(close(&l, &HermitianOperator::from_real_diagonal(&[1.0, 0.0]), 1e-14));
        let l = matrix_log(&HermitianOperator::from_real_diagonal(&[e * e, 0.0]));
        assert!(close(&l, &HermitianOperator::from_real_diagonal(&[2.0, 0.0]), 1e-14));
    }

    #[test]
    fn projector_examples() {
        let i2 = HermitianOperator::identity(2);
        assert!(close(&support_projector(&i2), &i2, 1e-14));
        let p = HermitianOperator::from_real_diagonal(&[1.0, 0.0]);
        assert!(close(&support_projector(&p), &p, 1e-14));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = HermitianOperator::outer(&[c(s, 0.), c(s, 0.)]);
        assert!(close(&support_projector(&plus), &plus, 1e-12));
        assert!(support_projector(&HermitianOperator::zeros(3)).max_norm() == 0.0);

        let z = HermitianOperator::from_real_diagonal(&[1.0, -1.0]);
        assert!(close(&positive_part_projector(&z), &p, 1e-14));
        assert!(positive_part_projector(&i2.scale(-1.0)).max_norm() == 0.0);
        assert!(close(&positive_part_projector(&i2), &i2, 1e-14));
    }

    #[test]
    fn eigh_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let d = 2 + trial % 15;
            let a = random::hermitian(d, &mut rng);
            let s = a.eigh().unwrap();
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let u = &s.eigenvectors;
            let orth = max_abs(&(u.adjoint() * u - CMatrix::identity(d, d)));
            assert!(orth <= 1e-9, "orthonormality {orth}");
            let err = s.reconstruct().sub(&a).max_norm();
            assert!(err <= 1e-9 * a.max_norm().max(1.0), "reconstruction {err}");
        }
    }

    #[test]
    fn power_semigroup_and_projector_commutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let d = 2 + trial % 4;
            let rank = 1 + trial % d;
            let rho = random::density_of_rank(d, rank, &mut rng);
            let a = rho.as_hermitian();
            let (s, t) = (0.3 + (trial % 7) as f64 * 0.2, -0.4 + (trial % 5) as f64 * 0.35);
            let lhs = HermitianOperator::from_matrix_unchecked(frac_power(a, s).matrix() * frac_power(a, t).matrix());
            assert!(close(&lhs, &frac_power(a, s + t), 1e-8));
            let p = support_projector(a);
            let pp = HermitianOperator::from_matrix_unchecked(p.matrix() * p.matrix());
            assert!(close(&pp, &p, 1e-9));
            let comm = p.matrix() * a.matrix() - a.matrix() * p.matrix();
            assert!(max_abs(&comm) <= 1e-8);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random::density(3, &mut rng);
        let a = random::psd(3, 1.0, &mut rng);
        let dir = random::hermitian(3, &mut rng);
        let p = 0.4;
        let f = |m: &HermitianOperator| frac_power(m, p).trace_product(&a);
        let g = trace_function_gradient(&spectral(x.as_hermitian()), a.matrix(), |l| l.powf(p), |l| p * l.powf(p - 1.0));
        let h = 1e-6;
        let fd = (f(&x.as_hermitian().add(&dir.scale(h))) - f(&x.as_hermitian().sub(&dir.scale(h)))) / (2.0 * h);
        let an = trace_product(&g, dir.matrix()).re;
        assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
    }

    #[test]
    fn subsystem_permutation_swaps_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random::density(2, &mut rng);
        let b = random::density(3, &mut rng);
        let ab = a.kron(&b);
        let ba = permute_subsystems(ab.matrix(), &[2, 3], &[1, 0]);
        assert!(max_abs(&(ba - b.kron(&a).matrix())) < 1e-14);
    }

    #[test]
    fn density_validation() {
        assert!(DensityOperator::from_diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityOperator::from_diagonal(&[1.5, -0.5]).is_err());
        let r = DensityOperator::from_diagonal(&[1.0 + 5e-11, -5e-11]).unwrap();
        assert!(r.as_hermitian().min_eigenvalue() >= 0.0);
        assert!((DensityOperator::maximally_mixed(4).entropy() - 2.0).abs() < 1e-12);
    }
}
