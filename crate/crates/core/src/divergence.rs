//! Quantum relative entropy, Petz and sandwiched Rényi divergences and
//! the classical-quantum ensembles they are evaluated on.
//!
//! Values are in bits. `+∞` is `f64::INFINITY` and propagates through
//! ordinary float arithmetic.

use crate::cqtypes::{shannon_entropy, Alphabet, TypesError};
use crate::linalg::{
    self, frac_power_of, matrix_log, singular_values_jacobi, spectral, support_projector, CMatrix, DensityOperator, HermitianOperator, LinalgError,
    SpectralDecomposition, C64, SUPPORT_RTOL,
};
use thiserror::Error;

/// Width of the window around `α = 1` delegated to the relative entropy.
pub const ALPHA_ONE_WINDOW: f64 = 1e-6;
/// Weight of `ρ` outside `supp σ` above which support containment fails.
pub const SUPPORT_LEAK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error(transparent)]
    Alphabet(#[from] TypesError),
    #[error("prior has {prior} entries but {states} states were given")]
    SizeMismatch { prior: usize, states: usize },
    #[error("prior entry {index} = {value} is not strictly positive")]
    NonPositivePrior { index: usize, value: f64 },
    #[error("prior sums to {0}, expected 1")]
    PriorNotNormalized(f64),
    #[error("state {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("state {index}: {source}")]
    InvalidState { index: usize, source: LinalgError },
}

/// A Rényi order `α > 0`, related to the Gallager parameter by `α = 1/(1+s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenyiOrder(f64);

impl RenyiOrder {
    pub fn new(alpha: f64) -> Option<Self> {
        (alpha > 0.0 && alpha.is_finite()).then_some(Self(alpha))
    }

    pub fn from_s(s: f64) -> Option<Self> {
        (s > -1.0).then(|| Self(1.0 / (1.0 + s)))
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn is_one(self) -> bool {
        (self.0 - 1.0).abs() < ALPHA_ONE_WINDOW
    }
}

/// Alphabet, strictly positive prior and states `x ↦ ρ_B^x` on a common space.
/// Also read as the c-q channel `W: x ↦ W_x`.
#[derive(Clone, Debug)]
pub struct CqEnsemble {
    alphabet: Alphabet,
    prior: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl CqEnsemble {
    pub fn new(prior: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self, EnsembleError> {
        if prior.len() != states.len() {
            return Err(EnsembleError::SizeMismatch { prior: prior.len(), states: states.len() });
        }
        let alphabet = Alphabet::new(prior.len())?;
        for (index, &value) in prior.iter().enumerate() {
            if !(value > 0.0) {
                return Err(EnsembleError::NonPositivePrior { index, value });
            }
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EnsembleError::PriorNotNormalized(total));
        }
        let d = states[0].dim();
        for (index, s) in states.iter().enumerate() {
            if s.dim() != d {
                return Err(EnsembleError::DimensionMismatch { index, expected: d, found: s.dim() });
            }
        }
        Ok(Self { alphabet, prior, states })
    }

    /// Classical side information: `ρ_x = diag(rows[x])`.
    pub fn classical(prior: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self, EnsembleError> {
        let states = rows
            .iter()
            .enumerate()
            .map(|(index, r)| DensityOperator::from_diagonal(r).map_err(|source| EnsembleError::InvalidState { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(prior, states)
    }

    /// Same states, different prior.
    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self, EnsembleError> {
        Self::new(prior, self.states.clone())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.size()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn state(&self, x: usize) -> &DensityOperator {
        &self.states[x]
    }

    /// `ρ_B^Q = Σ_x Q(x) ρ_x`.
    pub fn average_state(&self, q: &[f64]) -> DensityOperator {
        let refs: Vec<&DensityOperator> = self.states.iter().collect();
        DensityOperator::mixture(q, &refs)
    }

    /// `ρ_XB = Σ_x P(x) |x⟩⟨x| ⊗ ρ_x`, with `X` as the leading factor.
    pub fn joint_state(&self) -> DensityOperator {
        let (k, d) = (self.alphabet_size(), self.dim());
        let mut m = CMatrix::zeros(k * d, k * d);
        for x in 0..k {
            let block = self.states[x].matrix() * C64::new(self.prior[x], 0.0);
            m.view_mut((x * d, x * d), (d, d)).copy_from(&block);
        }
        DensityOperator::from_hermitian_unchecked(HermitianOperator::from_matrix_unchecked(m))
    }

    /// True when all states pairwise commute within `tol`.
    pub fn is_commuting(&self, tol: f64) -> bool {
        for a in &self.states {
            for b in &self.states {
                let c = a.matrix() * b.matrix() - b.matrix() * a.matrix();
                if linalg::max_abs(&c) > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// `Tr[ρ (I − Π_σ)] ≤ SUPPORT_LEAK_TOL`.
pub fn support_contained(rho: &DensityOperator, sigma: &DensityOperator) -> bool {
    let p = support_projector(sigma.as_hermitian());
    1.0 - rho.as_hermitian().trace_product(&p) <= SUPPORT_LEAK_TOL
}

/// `D(ρ‖σ) = Tr ρ(log ρ − log σ)`, `+∞` unless `supp ρ ⊆ supp σ`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    if !support_contained(rho, sigma) {
        return f64::INFINITY;
    }
    let diff = matrix_log(rho.as_hermitian()).sub(&matrix_log(sigma.as_hermitian()));
    (rho.as_hermitian().trace_product(&diff) / std::f64::consts::LN_2).max(0.0)
}

/// `K_α(ρ‖σ) = Tr[ρ^α σ^{1−α}]` under the support convention. At `α = 0`
/// this is `Tr[Π_ρ σ]`.
pub fn petz_k(rho: &DensityOperator, sigma: &DensityOperator, alpha: f64) -> f64 {
    // Σ_ij a_i^α b_j^{1−α} |⟨u_i|v_j⟩|²: cross terms carry squared overlaps,
    // so large negative powers of σ do not amplify rounding in ρ^α.
    let sr = spectral(rho.as_hermitian());
    let ss = spectral(sigma.as_hermitian());
    let (ir, is) = (support_columns(&sr), support_columns(&ss));
    let w = sr.eigenvectors.adjoint() * &ss.eigenvectors;
    let mut k = 0.0;
    for &i in &ir {
        let ai = (alpha * sr.eigenvalues[i].log2()).exp2();
        for &j in &is {
            k += ai * ((1.0 - alpha) * ss.eigenvalues[j].log2()).exp2() * w[(i, j)].norm_sqr();
        }
    }
    k
}

/// `D_α(ρ‖σ) = log K_α / (α − 1)`.
pub fn petz_d(rho: &DensityOperator, sigma: &DensityOperator, alpha: f64) -> f64 {
    renyi_from_k(rho, sigma, alpha, petz_k)
}

/// `K*_α(ρ‖σ) = Tr[(ρ^{1/2} σ^{(1−α)/α} ρ^{1/2})^α]`.
pub fn sandwiched_k(rho: &DensityOperator, sigma: &DensityOperator, alpha: f64) -> f64 {
    sandwiched_log_k(rho, sigma, alpha).exp2()
}

/// `log₂ K*_α` computed in the log domain, `−∞` when `K*_α = 0`.
pub fn sandwiched_log_k(rho: &DensityOperator, sigma: &DensityOperator, alpha: f64) -> f64 {
    // Eigenvalues of ρ^{1/2} σ^p ρ^{1/2} are the squared singular values of
    // G = ρ^{1/2} V D^{p/2}; Jacobi keeps the tiny ones accurate.
    let sr = spectral(rho.as_hermitian());
    let ss = spectral(sigma.as_hermitian());
    let p = (1.0 - alpha) / alpha;
    let supp_r = support_columns(&sr);
    let supp_s = support_columns(&ss);
    if supp_r.is_empty() || supp_s.is_empty() {
        return f64::NEG_INFINITY;
    }
    let half = frac_power_of(&sr, 0.5);
    let d = ss.dim();
    let scaled = CMatrix::from_fn(d, supp_s.len(), |i, j| {
        ss.eigenvectors[(i, supp_s[j])] * (0.5 * p * ss.eigenvalues[supp_s[j]].log2()).exp2()
    });
    let g = half.matrix() * scaled;
    let ur = CMatrix::from_fn(d, supp_r.len(), |i, j| sr.eigenvectors[(i, supp_r[j])]);
    let vs = CMatrix::from_fn(d, supp_s.len(), |i, j| ss.eigenvectors[(i, supp_s[j])]);
    let rank = singular_values_jacobi(&(ur.adjoint() * vs)).iter().filter(|&&c| c > SUPPORT_RTOL).count();
    let logs: Vec<f64> = singular_values_jacobi(&g)
        .iter()
        .take(rank)
        .filter(|&&v| v > 0.0)
        .map(|&v| 2.0 * alpha * v.log2())
        .collect();
    log2_sum_exp2(&logs)
}

fn support_columns(s: &SpectralDecomposition) -> Vec<usize> {
    let cut = s.support_cutoff();
    (0..s.dim()).filter(|&j| s.eigenvalues[j] > cut && s.eigenvalues[j] > 0.0).collect()
}

/// `log₂ Σ_{λ on support} λ^p` without overflow.
pub(crate) fn log2_power_trace(s: &SpectralDecomposition, p: f64) -> f64 {
    let cut = s.support_cutoff();
    let logs: Vec<f64> = s.eigenvalues.iter().filter(|&&l| l > cut && l > 0.0).map(|&l| p * l.log2()).collect();
    log2_sum_exp2(&logs)
}

pub(crate) fn log2_sum_exp2(logs: &[f64]) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|&v| (v - m).exp2()).sum::<f64>().log2()
}

pub fn sandwiched_d(rho: &DensityOperator, sigma: &DensityOperator, alpha: f64) -> f64 {
    if RenyiOrder(alpha).is_one() {
        return relative_entropy(rho, sigma);
    }
    if alpha > 1.0 && !support_contained(rho, sigma) {
        return f64::INFINITY;
    }
    let lk = sandwiched_log_k(rho, sigma, alpha);
    if lk == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    lk / (alpha - 1.0)
}

fn renyi_from_k(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    alpha: f64,
    k: fn(&DensityOperator, &DensityOperator, f64) -> f64,
) -> f64 {
    if RenyiOrder(alpha).is_one() {
        return relative_entropy(rho, sigma);
    }
    if alpha > 1.0 && !support_contained(rho, sigma) {
        return f64::INFINITY;
    }
    let kv = k(rho, sigma, alpha);
    if kv <= 0.0 {
        return f64::INFINITY;
    }
    kv.log2() / (alpha - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Petz,
    Sandwiched,
}

pub fn renyi_d(variant: Variant, rho: &DensityOperator, sigma: &DensityOperator, alpha: f64) -> f64 {
    match variant {
        Variant::Petz => petz_d(rho, sigma, alpha),
        Variant::Sandwiched => sandwiched_d(rho, sigma, alpha),
    }
}

/// `H(X|B) = H(P) + Σ P(x) H(ρ_x) − H(ρ_B)` for the ensemble's prior.
pub fn conditional_entropy(ensemble: &CqEnsemble) -> f64 {
    let p = ensemble.prior();
    let rho_b = ensemble.average_state(p);
    let inner: f64 = p.iter().zip(ensemble.states()).map(|(w, s)| w * s.entropy()).sum();
    shannon_entropy(p) + inner - rho_b.entropy()
}

/// Classical Rényi divergence `log Σ p^α q^{1−α} / (α−1)` in bits.
pub fn classical_renyi(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < ALPHA_ONE_WINDOW {
        return crate::cqtypes::kl_divergence(p, q);
    }
    let mut k = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 && b > 0.0 {
            k += a.powf(alpha) * b.powf(1.0 - alpha);
        } else if a > 0.0 && alpha > 1.0 {
            return f64::INFINITY;
        }
    }
    if k <= 0.0 {
        return f64::INFINITY;
    }
    k.log2() / (alpha - 1.0)
}

/// `Tr[Π_ρ σ]`, the `α = 0` trace functional.
pub fn support_overlap(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    support_projector(rho.as_hermitian()).trace_product(sigma.as_hermitian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket0() -> DensityOperator {
        DensityOperator::from_diagonal(&[1.0, 0.0]).unwrap()
    }
    fn ket1() -> DensityOperator {
        DensityOperator::from_diagonal(&[0.0, 1.0]).unwrap()
    }
    fn plus() -> DensityOperator {
        DensityOperator::from_bloch([1.0, 0.0, 0.0])
    }
    fn diag(a: f64, b: f64) -> DensityOperator {
        DensityOperator::from_diagonal(&[a, b]).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random::density(3, &mut rng);
        assert!(relative_entropy(&r, &r).abs() < 1e-10);
        assert_eq!(relative_entropy(&ket0(), &ket1()), f64::INFINITY);
        let v = relative_entropy(&diag(0.5, 0.5), &diag(0.75, 0.25));
        let want = 0.5 * (2.0f64 / 3.0).log2() + 0.5 * 2f64.log2();
        assert!((v - want).abs() < 1e-12 && (v - 0.2075).abs() < 1e-4);
    }

    #[test]
    fn conditional_entropy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random::density(2, &mut rng);
        let e = CqEnsemble::new(vec![0.3, 0.7], vec![r.clone(), r]).unwrap();
        assert!((conditional_entropy(&e) - shannon_entropy(&[0.3, 0.7])).abs() < 1e-10);
        let e = CqEnsemble::new(vec![0.5, 0.5], vec![ket0(), ket1()]).unwrap();
        assert!(conditional_entropy(&e).abs() < 1e-10);

        let e = CqEnsemble::new(vec![0.5, 0.5], vec![ket0(), plus()]).unwrap();
        let joint = e.joint_state();
        let by_joint = joint.entropy() - e.average_state(e.prior()).entropy();
        assert!((conditional_entropy(&e) - by_joint).abs() < 1e-10);
        // ρ_B has eigenvalues (1 ± 1/√2)/2 and H(XB) = 1.
        let l = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 2.0;
        let hb = -l * l.log2() - (1.0 - l) * (1.0 - l).log2();
        assert!((conditional_entropy(&e) - (1.0 - hb)).abs() < 1e-10);
        // Also equals −D(ρ_XB ‖ 1 ⊗ ρ_B) computed directly.
        let k = HermitianOperator::identity(2).kron(e.average_state(e.prior()).as_hermitian());
        let mixed = DensityOperator::new(k.scale(0.5)).unwrap();
        assert!((conditional_entropy(&e) - (1.0 - relative_entropy(&joint, &mixed))).abs() < 1e-9);
    }

    #[test]
    fn petz_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random::density(2, &mut rng);
        for a in [0.3, 0.5, 2.0, 3.0] {
            assert!(petz_d(&r, &r, a).abs() < 1e-10);
        }
        let want = -2.0 * ((3.0f64 / 8.0).sqrt() + (1.0f64 / 8.0).sqrt()).log2();
        assert!((petz_d(&diag(0.5, 0.5), &diag(0.75, 0.25), 0.5) - want).abs() < 1e-12);
        assert!((petz_d(&ket0(), &plus(), 0.5) - 2.0).abs() < 1e-10);
        assert_eq!(petz_d(&ket0(), &ket1(), 0.5), f64::INFINITY);
        assert_eq!(petz_d(&ket0(), &plus(), 2.0), f64::INFINITY);
    }

    #[test]
    fn sandwiched_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random::density(2, &mut rng);
        for a in [0.3, 0.5, 2.0, 3.0] {
            assert!(sandwiched_d(&r, &r, a).abs() < 1e-10);
        }
        for a in [0.2, 0.5, 1.5, 2.0, 4.0] {
            let (p, q) = (diag(0.2, 0.8), diag(0.6, 0.4));
            assert!((sandwiched_d(&p, &q, a) - petz_d(&p, &q, a)).abs() < 1e-10);
        }
        let (p, q) = (random::density(2, &mut rng), random::density(2, &mut rng));
        assert!(sandwiched_d(&p, &q, 2.0) <= petz_d(&p, &q, 2.0) + 1e-9);
    }

    #[test]
    fn alpha_one_window_delegates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (p, q) = (random::density(3, &mut rng), random::density(3, &mut rng));
        let d = relative_entropy(&p, &q);
        assert_eq!(petz_d(&p, &q, 1.0 + 5e-7), d);
        assert!((petz_d(&p, &q, 1.0 + 1e-4) - d).abs() < 1e-3);
        assert!((sandwiched_d(&p, &q, 1.0 - 1e-4) - d).abs() < 1e-3);
    }

    #[test]
    fn large_alpha_log_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (p, q) = (random::density(2, &mut rng), random::density(2, &mut rng));
        let v = sandwiched_d(&p, &q, 1e5);
        assert!(v.is_finite());
        assert!(v >= sandwiched_d(&p, &q, 50.0) - 1e-9);
    }

    #[test]
    fn ensemble_validation() {
        assert!(matches!(
            CqEnsemble::new(vec![0.5, 0.5], vec![ket0()]),
            Err(EnsembleError::SizeMismatch { .. })
        ));
        assert!(matches!(
            CqEnsemble::new(vec![1.0, 0.0], vec![ket0(), ket1()]),
            Err(EnsembleError::NonPositivePrior { .. })
        ));
        assert!(matches!(
            CqEnsemble::new(vec![0.6, 0.6], vec![ket0(), ket1()]),
            Err(EnsembleError::PriorNotNormalized(_))
        ));
        let q3 = DensityOperator::maximally_mixed(3);
        assert!(matches!(
            CqEnsemble::new(vec![0.5, 0.5], vec![ket0(), q3]),
            Err(EnsembleError::DimensionMismatch { .. })
        ));
    }
}
