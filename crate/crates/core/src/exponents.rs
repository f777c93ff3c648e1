//! Auxiliary functions `E₀ᵗ(s,Q)`, `E₀↓(s,Q)`, `E₀ᵗ(s)`, `E₀↓(s)`, the inner
//! minimization over `τ_B`, the outer optimization over `s`, the exponent
//! families and the channel/source entropic quantities.

use crate::cqtypes::shannon_entropy;
use crate::divergence::{log2_power_trace, petz_d, relative_entropy, renyi_d, CqEnsemble};
pub use crate::divergence::Variant;
use crate::linalg::{
    frac_power, spectral, support_projector, trace_function_gradient, trace_product, CMatrix, DensityOperator,
    HermitianOperator, SpectralDecomposition, C64,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Default certified accuracy of the inner `τ` minimization, in bits.
pub const DEFAULT_TAU_TOL: f64 = 1e-7;
pub const TAU_MAX_ITER: usize = 100_000;
/// Eigenvalue floor keeping mirror-descent iterates positive definite.
pub const EIGEN_FLOOR: f64 = 1e-12;
const REL_CHANGE_TOL: f64 = 1e-10;
const INIT_MIX: f64 = 1e-3;

pub const S_TOL: f64 = 1e-6;
pub const S_MAX: f64 = 64.0;
/// Slope at `S_MAX` above which a supremum over `s ≥ 0` is declared infinite.
pub const INF_SLOPE: f64 = 1e-6;
/// Lower end of the strong-converse domain `(−1, 0)`.
pub const S_NEG_FLOOR: f64 = -1.0 + 1e-6;

/// Result of `inf_τ f(τ)` by matrix mirror descent.
#[derive(Clone, Debug)]
pub struct TauOptResult {
    pub minimizer: DensityOperator,
    pub value: f64,
    pub iterations: usize,
    /// Frank–Wolfe gap `Tr[∇f τ] − λ_min(∇f)`, an upper bound on `f(τ) − inf f`.
    pub gap_estimate: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    /// `Σ_x w_x D_α(ρ_x‖τ)`.
    Average,
    /// `log Σ_x w_x K_α(ρ_x‖τ) / (α − 1)`.
    Joint,
}

struct Letter {
    weight: f64,
    /// `ln weight`, kept separately so `P(x)^α` cannot underflow.
    ln_weight: f64,
    /// `ρ^α` for Petz (the support projector when `α = 0`), `ρ^{1/2}` for sandwiched.
    op: CMatrix,
    /// `ρ^α` used for the warm start.
    warm: CMatrix,
}

/// The convex inner problem over `τ ∈ S(B)` for a fixed Rényi order.
pub struct TauProblem {
    variant: Variant,
    alpha: f64,
    mode: Mode,
    dim: usize,
    letters: Vec<Letter>,
}

impl TauProblem {
    fn build(variant: Variant, alpha: f64, mode: Mode, weights: &[f64], ln_weights: &[f64], ens: &CqEnsemble) -> Self {
        assert!(alpha >= 0.0 && (alpha - 1.0).abs() >= crate::divergence::ALPHA_ONE_WINDOW);
        let letters = weights
            .iter()
            .zip(ln_weights)
            .zip(ens.states())
            .filter(|((_, lw), _)| **lw > f64::NEG_INFINITY)
            .map(|((&weight, &ln_weight), rho)| {
                let h = rho.as_hermitian();
                let warm = frac_power(h, alpha).into_matrix();
                let op = match variant {
                    Variant::Petz => warm.clone(),
                    Variant::Sandwiched => frac_power(h, 0.5).into_matrix(),
                };
                Letter { weight, ln_weight, op, warm }
            })
            .collect();
        Self { variant, alpha, mode, dim: ens.dim(), letters }
    }

    /// `τ ↦ Σ_x Q(x) D^t_{1/(1+s)}(ρ_x‖τ)`.
    pub fn average(variant: Variant, s: f64, q: &[f64], ens: &CqEnsemble) -> Self {
        Self::build(variant, 1.0 / (1.0 + s), Mode::Average, q, &ln(q), ens)
    }

    /// `τ ↦ D^t_{1/(1+s)}(ρ_XB ‖ 1 ⊗ τ)` for the c-q state with prior `p`.
    pub fn joint(variant: Variant, s: f64, p: &[f64], ens: &CqEnsemble) -> Self {
        let alpha = 1.0 / (1.0 + s);
        let lw: Vec<f64> = ln(p).iter().map(|&v| alpha * v).collect();
        let w: Vec<f64> = lw.iter().map(|v| v.exp()).collect();
        Self::build(variant, alpha, Mode::Joint, &w, &lw, ens)
    }

    /// `τ ↦ Σ_x Q(x) D_0(ρ_x‖τ) = −Σ_x Q(x) log Tr[Π_x τ]`.
    pub fn order_zero(q: &[f64], ens: &CqEnsemble) -> Self {
        Self::build(Variant::Petz, 0.0, Mode::Average, q, &ln(q), ens)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Natural-log `ln K_x` and `∇K_x / K_x` at a positive definite `τ`.
    fn log_k_grad(&self, letter: &Letter, tau: &SpectralDecomposition) -> (f64, CMatrix) {
        let a = self.alpha;
        match self.variant {
            Variant::Petz => {
                let p = 1.0 - a;
                let w = tau.diagonal_weights(&letter.op);
                let c = tau.eigenvalues.iter().map(|&l| p * l.ln()).fold(f64::NEG_INFINITY, f64::max);
                let k: f64 = w.iter().zip(&tau.eigenvalues).map(|(wi, &l)| wi * (p * l.ln() - c).exp()).sum();
                let lk = c + k.max(f64::MIN_POSITIVE).ln();
                let g = trace_function_gradient(
                    tau,
                    &letter.op,
                    |l| (p * l.ln() - lk).exp(),
                    |l| p / l * (p * l.ln() - lk).exp(),
                );
                (lk, g)
            }
            Variant::Sandwiched => {
                let beta = (1.0 - a) / a;
                let c = tau.eigenvalues.iter().map(|&l| beta * l.ln()).fold(f64::NEG_INFINITY, f64::max);
                let scaled = tau.map(|l| (beta * l.ln() - c).exp());
                let r = &letter.op;
                let m = HermitianOperator::from_matrix_unchecked(r * scaled.matrix() * r);
                let ms = spectral(&m);
                let cut = ms.support_cutoff();
                let mu_max = ms.eigenvalues.last().copied().unwrap_or(0.0);
                let lsum = log2_power_trace(&ms, a) * LN_2;
                let lk = a * c + lsum;
                // B/K with B = α ρ^{1/2} M^{α−1} ρ^{1/2}; scaled so no power overflows.
                let mpow = ms.map(|mu| {
                    if mu > cut && mu > 0.0 {
                        ((a - 1.0) * (mu / mu_max).ln()).exp()
                    } else {
                        0.0
                    }
                });
                let shift = (a - 1.0) * mu_max.ln() - lsum;
                let b = (r * mpow.matrix() * r) * C64::new(a * shift.exp(), 0.0);
                let g = trace_function_gradient(
                    tau,
                    &b,
                    |l| (beta * l.ln() - c).exp(),
                    |l| beta / l * (beta * l.ln() - c).exp(),
                );
                (lk, g)
            }
        }
    }

    /// Objective value in bits and its gradient.
    fn value_grad(&self, tau: &SpectralDecomposition) -> (f64, CMatrix) {
        let scale = 1.0 / ((self.alpha - 1.0) * LN_2);
        let parts: Vec<(f64, CMatrix)> = self.letters.iter().map(|l| self.log_k_grad(l, tau)).collect();
        let d = self.dim;
        match self.mode {
            Mode::Average => {
                let mut v = 0.0;
                let mut g = CMatrix::zeros(d, d);
                for (l, (lk, gk)) in self.letters.iter().zip(&parts) {
                    v += l.weight * lk;
                    g += gk * C64::new(l.weight, 0.0);
                }
                (v * scale, g * C64::new(scale, 0.0))
            }
            Mode::Joint => {
                let logs: Vec<f64> = self.letters.iter().zip(&parts).map(|(l, (lk, _))| l.ln_weight + lk).collect();
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logs.iter().map(|v| (v - m).exp()).sum();
                let ls = m + z.ln();
                let mut g = CMatrix::zeros(d, d);
                for (lg, (_, gk)) in logs.iter().zip(&parts) {
                    g += gk * C64::new((lg - ls).exp(), 0.0);
                }
                (ls * scale, g * C64::new(scale, 0.0))
            }
        }
    }

    /// Objective at an arbitrary density operator (floored to full rank).
    pub fn value_at(&self, tau: &DensityOperator) -> f64 {
        self.value_grad(&floored(spectral(tau.as_hermitian()))).0
    }

    fn initial_point(&self) -> SpectralDecomposition {
        let d = self.dim;
        let mut acc = CMatrix::zeros(d, d);
        let top = self.letters.iter().map(|l| l.ln_weight).fold(f64::NEG_INFINITY, f64::max);
        for l in &self.letters {
            acc += &l.warm * C64::new((l.ln_weight - top).exp(), 0.0);
        }
        let h = HermitianOperator::from_matrix_unchecked(acc);
        let base = if self.alpha > 0.0 { frac_power(&h, 1.0 / self.alpha) } else { h };
        let tr = base.trace();
        let mixed = if tr > 0.0 && tr.is_finite() {
            base.scale((1.0 - INIT_MIX) / tr).add(&HermitianOperator::identity(d).scale(INIT_MIX / d as f64))
        } else {
            HermitianOperator::identity(d).scale(1.0 / d as f64)
        };
        floored(spectral(&mixed))
    }

    /// Minimizes over `S(B)` until the Frank–Wolfe gap is at most `tol` and the
    /// relative objective change drops below `1e-10`. Returns the best iterate.
    pub fn minimize(&self, tol: f64) -> TauOptResult {
        let mut tau = self.initial_point();
        let (mut f, mut g) = self.value_grad(&tau);
        let mut gap = fw_gap(&g, &tau);
        let mut best = (tau.clone(), f, gap);
        let mut eta = 1.0;
        let mut rel_change = f64::INFINITY;
        let mut iterations = 0;
        let mut stall = 0;
        while iterations < TAU_MAX_ITER {
            if gap <= tol && (rel_change < REL_CHANGE_TOL || gap <= 1e-3 * tol) {
                break;
            }
            iterations += 1;
            let noise = 1e-14 * f.abs().max(1.0);
            let log_tau = tau.map(|l| l.ln());
            let tau_h = tau.reconstruct();
            let mut accepted = None;
            while eta > 1e-30 {
                let y = HermitianOperator::from_matrix_unchecked(log_tau.matrix() - &g * C64::new(eta, 0.0));
                let next = exp_normalized(&spectral(&y));
                let (fn_, gn) = self.value_grad(&next);
                let diff = next.reconstruct().sub(&tau_h);
                let lin = trace_product(&g, diff.matrix()).re;
                let kl = kl_nats(&next, &log_tau);
                if fn_.is_finite() && fn_ <= f + lin + kl / eta + noise {
                    accepted = Some((next, fn_, gn));
                    break;
                }
                eta *= 0.5;
            }
            let Some((next, fn_, gn)) = accepted else { break };
            eta = (eta * 1.5).min(1e8);
            rel_change = (f - fn_).abs() / f.abs().max(1.0);
            tau = next;
            f = fn_;
            g = gn;
            gap = fw_gap(&g, &tau);
            if f < best.1 - noise || (f <= best.1 + noise && gap < best.2) {
                best = (tau.clone(), f, gap);
                stall = 0;
            } else {
                stall += 1;
                if stall > 200 {
                    break;
                }
            }
        }
        let (tau, value, gap) = best;
        TauOptResult {
            minimizer: DensityOperator::from_hermitian_unchecked(tau.reconstruct()),
            value,
            iterations,
            gap_estimate: gap,
            converged: gap <= tol,
        }
    }
}

fn ln(w: &[f64]) -> Vec<f64> {
    w.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

fn floored(mut s: SpectralDecomposition) -> SpectralDecomposition {
    for l in s.eigenvalues.iter_mut() {
        *l = l.max(EIGEN_FLOOR);
    }
    let t: f64 = s.eigenvalues.iter().sum();
    for l in s.eigenvalues.iter_mut() {
        *l /= t;
    }
    s
}

fn exp_normalized(y: &SpectralDecomposition) -> SpectralDecomposition {
    let m = y.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = y.clone();
    for l in s.eigenvalues.iter_mut() {
        *l = (*l - m).exp();
    }
    floored(s)
}

fn kl_nats(next: &SpectralDecomposition, log_prev: &HermitianOperator) -> f64 {
    let self_term: f64 = next.eigenvalues.iter().map(|&l| l * l.ln()).sum();
    let cross = next.reconstruct().trace_product(log_prev);
    (self_term - cross).max(0.0)
}

fn fw_gap(g: &CMatrix, tau: &SpectralDecomposition) -> f64 {
    let gh = HermitianOperator::from_matrix_unchecked(g.clone());
    let lin = tau.reconstruct().trace_product(&gh);
    (lin - gh.min_eigenvalue()).max(0.0)
}

/// `Σ_x Q(x) D^t_{1/(1+s)}(ρ_x‖τ)` evaluated directly by the divergence functions.
pub fn tau_objective(variant: Variant, s: f64, q: &[f64], ens: &CqEnsemble, tau: &DensityOperator) -> f64 {
    let alpha = 1.0 / (1.0 + s);
    q.iter()
        .zip(ens.states())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, rho)| {
            let d = renyi_d(variant, rho, tau, alpha);
            if d.is_infinite() {
                d
            } else {
                w * d
            }
        })
        .sum()
}

/// Minimizes `τ ↦ Σ_x Q(x) D^t_{1/(1+s)}(ρ_x‖τ)`. Inside the `α = 1` window
/// the minimizer is `ρ_Q` and the value `Σ_x Q(x) D(ρ_x‖ρ_Q)`.
pub fn minimize_over_tau(variant: Variant, s: f64, q: &[f64], ens: &CqEnsemble, tol: f64) -> TauOptResult {
    assert!(s > -1.0 && s != 0.0, "minimize_over_tau needs s > -1, s != 0");
    if in_alpha_one_window(s) {
        let rho_q = ens.average_state(q);
        let value = holevo(q, ens, &rho_q);
        return TauOptResult { minimizer: rho_q, value, iterations: 0, gap_estimate: 0.0, converged: true };
    }
    TauProblem::average(variant, s, q, ens).minimize(tol)
}

fn in_alpha_one_window(s: f64) -> bool {
    (1.0 / (1.0 + s) - 1.0).abs() < crate::divergence::ALPHA_ONE_WINDOW
}

fn holevo(q: &[f64], ens: &CqEnsemble, rho_q: &DensityOperator) -> f64 {
    q.iter()
        .zip(ens.states())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, rho)| w * relative_entropy(rho, rho_q))
        .sum()
}

/// A function value together with the inner optimizer's convergence status.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxValue {
    pub value: f64,
    pub converged: bool,
    pub gap: f64,
}

impl AuxValue {
    fn exact(value: f64) -> Self {
        Self { value, converged: true, gap: 0.0 }
    }
}

/// `E₀ᵗ(s,Q) = s[inf_τ Σ_x Q(x) D^t_{1/(1+s)}(ρ_x‖τ) − H(Q)]`.
pub fn aux_e0_type(variant: Variant, s: f64, q: &[f64], ens: &CqEnsemble, tol: f64) -> AuxValue {
    if s == 0.0 {
        return AuxValue::exact(0.0);
    }
    let r = minimize_over_tau(variant, s, q, ens, tol);
    AuxValue { value: s * (r.value - shannon_entropy(q)), converged: r.converged, gap: s.abs() * r.gap_estimate }
}

/// `E₀↓(s,Q) = s[Σ_x Q(x) D_{1−s}(ρ_x‖ρ_Q) − H(Q)]` for `s ∈ [0,1]`.
pub fn aux_e0_down_type(s: f64, q: &[f64], ens: &CqEnsemble) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let rho_q = ens.average_state(q);
    let inner: f64 = q
        .iter()
        .zip(ens.states())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, rho)| w * petz_d(rho, &rho_q, 1.0 - s))
        .sum();
    s * (inner - shannon_entropy(q))
}

/// `E₀ᵗ(s) = s inf_τ D^t_{1/(1+s)}(ρ_XB ‖ 1 ⊗ τ)` for the ensemble's prior.
/// The Petz case uses the closed form
/// `−log Tr[(Σ_x P(x)^{1/(1+s)} ρ_x^{1/(1+s)})^{1+s}]`.
pub fn aux_e0_iid(variant: Variant, s: f64, ens: &CqEnsemble, tol: f64) -> AuxValue {
    aux_e0_iid_with_prior(variant, s, ens.prior(), ens, tol)
}

pub(crate) fn aux_e0_iid_with_prior(variant: Variant, s: f64, p: &[f64], ens: &CqEnsemble, tol: f64) -> AuxValue {
    if s == 0.0 {
        return AuxValue::exact(0.0);
    }
    match variant {
        Variant::Petz => AuxValue::exact(petz_e0_iid_closed_form(s, p, ens)),
        Variant::Sandwiched => aux_e0_iid_numeric(variant, s, p, ens, tol),
    }
}

/// `E₀ᵗ(s)` through the inner optimizer in joint mode, for either variant.
pub fn aux_e0_iid_numeric(variant: Variant, s: f64, p: &[f64], ens: &CqEnsemble, tol: f64) -> AuxValue {
    if s == 0.0 {
        return AuxValue::exact(0.0);
    }
    if in_alpha_one_window(s) {
        let rho_p = ens.average_state(p);
        return AuxValue::exact(s * (holevo(p, ens, &rho_p) - shannon_entropy(p)));
    }
    let r = TauProblem::joint(variant, s, p, ens).minimize(tol);
    AuxValue { value: s * r.value, converged: r.converged, gap: s.abs() * r.gap_estimate }
}

fn petz_e0_iid_closed_form(s: f64, p: &[f64], ens: &CqEnsemble) -> f64 {
    let alpha = 1.0 / (1.0 + s);
    let d = ens.dim();
    let mut a = CMatrix::zeros(d, d);
    for (&w, rho) in p.iter().zip(ens.states()) {
        if w > 0.0 {
            a += frac_power(rho.as_hermitian(), alpha).matrix() * C64::new(w.powf(alpha), 0.0);
        }
    }
    let h = HermitianOperator::from_matrix_unchecked(a);
    -log2_power_trace(&spectral(&h), 1.0 + s)
}

/// `E₀↓(s) = s D_{1−s}(ρ_XB ‖ 1 ⊗ ρ_B) = −log Σ_x P(x)^{1−s} Tr[ρ_x^{1−s} ρ_B^s]`.
pub fn aux_e0_down_iid(s: f64, ens: &CqEnsemble) -> f64 {
    aux_e0_down_iid_with_prior(s, ens.prior(), ens)
}

pub(crate) fn aux_e0_down_iid_with_prior(s: f64, p: &[f64], ens: &CqEnsemble) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let rho_b = ens.average_state(p);
    let sigma = frac_power(rho_b.as_hermitian(), s);
    let k: f64 = p
        .iter()
        .zip(ens.states())
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, rho)| w.powf(1.0 - s) * frac_power(rho.as_hermitian(), 1.0 - s).trace_product(&sigma))
        .sum();
    -k.log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SDomain {
    /// `[0, 1]`
    Unit,
    /// `[0, ∞)`
    NonNegative,
    /// `(−1, 0)`
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SOptimum {
    pub s: f64,
    pub value: f64,
    pub infinite: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizes a concave objective over the domain by seeded golden-section
/// search. On `[0, ∞)` the supremum is reported infinite when the slope at
/// `S_MAX` exceeds `INF_SLOPE`.
pub fn optimize_over_s<F: FnMut(f64) -> f64>(mut f: F, domain: SDomain, tol: f64) -> SOptimum {
    let seeds: Vec<f64> = match domain {
        SDomain::Unit => {
            let mut v = vec![0.0];
            let mut t = tol;
            while t < 0.5 {
                v.push(t);
                t *= 2.0;
            }
            v.push(0.5);
            let mut t = 0.25;
            while t > tol {
                v.push(1.0 - t);
                t *= 0.5;
            }
            v.push(1.0);
            v
        }
        SDomain::NonNegative => {
            let mut v = vec![0.0];
            let mut t = tol;
            while t < S_MAX {
                v.push(t);
                t *= 2.0;
            }
            v.push(S_MAX);
            v
        }
        SDomain::Negative => {
            let mut v = vec![S_NEG_FLOOR];
            let mut t = 0.25;
            while t > 1e-6 {
                v.push(-1.0 + t);
                t *= 0.5;
            }
            v.sort_by(f64::total_cmp);
            let mut t = 0.5;
            while t > tol {
                v.push(-t);
                t *= 0.5;
            }
            v.push(0.0);
            v
        }
    };
    let vals: Vec<f64> = seeds.iter().map(|&s| f(s)).collect();
    if domain == SDomain::NonNegative {
        let top = *vals.last().unwrap();
        let below = f(S_MAX - 1.0);
        if top.is_infinite() || top - below > INF_SLOPE {
            return SOptimum { s: S_MAX, value: f64::INFINITY, infinite: true };
        }
    }
    let (mut best_i, mut best) = (0, vals[0]);
    for (i, &v) in vals.iter().enumerate() {
        if v > best {
            best_i = i;
            best = v;
        }
    }
    let lo = seeds[best_i.saturating_sub(1)];
    let hi = seeds[(best_i + 1).min(seeds.len() - 1)];
    let mut out = SOptimum { s: seeds[best_i], value: best, infinite: false };
    if hi > lo {
        let (s, v) = golden(&mut f, lo, hi, tol);
        if v > out.value {
            out = SOptimum { s, value: v, infinite: false };
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    RSource,
    RChannel,
    SpSource,
    SpChannel,
    ScSource,
    ScChannel,
    ScSourceIid,
    RSourceIid,
    SpSourceIid,
}

impl ExponentKind {
    pub const ALL: [ExponentKind; 9] = [
        Self::RSource,
        Self::RChannel,
        Self::SpSource,
        Self::SpChannel,
        Self::ScSource,
        Self::ScChannel,
        Self::ScSourceIid,
        Self::RSourceIid,
        Self::SpSourceIid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RSource => "r_source",
            Self::RChannel => "r_channel",
            Self::SpSource => "sp_source",
            Self::SpChannel => "sp_channel",
            Self::ScSource => "sc_source",
            Self::ScChannel => "sc_channel",
            Self::ScSourceIid => "sc_source_iid",
            Self::RSourceIid => "r_source_iid",
            Self::SpSourceIid => "sp_source_iid",
        }
    }

    pub fn is_channel(self) -> bool {
        matches!(self, Self::RChannel | Self::SpChannel | Self::ScChannel)
    }
}

impl std::str::FromStr for ExponentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown exponent kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentConfig {
    pub tau_tol: f64,
    pub s_tol: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self { tau_tol: 1e-8, s_tol: S_TOL }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentValue {
    pub value: f64,
    pub s: f64,
    pub infinite: bool,
    pub converged: bool,
}

/// Evaluates an exponent at rate `R`. For type kinds `dist` is the type `Q`
/// (or the composition `P` for channel kinds); for i.i.d. kinds it is the
/// source prior. Channel kinds go through [`renyi_information`] and the code
/// rate directly, not through the source auxiliary functions.
pub fn exponent(kind: ExponentKind, rate: f64, dist: &[f64], ens: &CqEnsemble, cfg: &ExponentConfig) -> ExponentValue {
    if kind.is_channel() {
        return channel_exponent(kind, rate, dist, ens, cfg);
    }
    let mut converged = true;
    let tol = cfg.tau_tol;
    let opt = match kind {
        ExponentKind::RSource => optimize_over_s(|s| aux_e0_down_type(s, dist, ens) + s * rate, SDomain::Unit, cfg.s_tol),
        ExponentKind::RSourceIid => {
            optimize_over_s(|s| aux_e0_down_iid_with_prior(s, dist, ens) + s * rate, SDomain::Unit, cfg.s_tol)
        }
        ExponentKind::SpSource => optimize_over_s(
            |s| {
                let a = aux_e0_type(Variant::Petz, s, dist, ens, tol);
                converged &= a.converged;
                a.value + s * rate
            },
            SDomain::NonNegative,
            cfg.s_tol,
        ),
        ExponentKind::SpSourceIid => optimize_over_s(
            |s| aux_e0_iid_with_prior(Variant::Petz, s, dist, ens, tol).value + s * rate,
            SDomain::NonNegative,
            cfg.s_tol,
        ),
        ExponentKind::ScSource => optimize_over_s(
            |s| {
                let a = aux_e0_type(Variant::Sandwiched, s, dist, ens, tol);
                converged &= a.converged;
                a.value + s * rate
            },
            SDomain::Negative,
            cfg.s_tol,
        ),
        ExponentKind::ScSourceIid => optimize_over_s(
            |s| {
                let a = aux_e0_iid_with_prior(Variant::Sandwiched, s, dist, ens, tol);
                converged &= a.converged;
                a.value + s * rate
            },
            SDomain::Negative,
            cfg.s_tol,
        ),
        ExponentKind::RChannel | ExponentKind::SpChannel | ExponentKind::ScChannel => unreachable!(),
    };
    ExponentValue { value: opt.value, s: opt.s, infinite: opt.infinite, converged }
}

/// `inf_σ Σ_x P(x) D^t_{1/(1+s)}(W_x‖σ)`, the Rényi information of order `1/(1+s)`.
pub fn renyi_information(variant: Variant, s: f64, p: &[f64], ens: &CqEnsemble, tol: f64) -> AuxValue {
    let r = minimize_over_tau(variant, s, p, ens, tol);
    AuxValue { value: r.value, converged: r.converged, gap: r.gap_estimate }
}

/// Channel exponents written with the Rényi information and the code rate:
/// `sup_s s(I_{1/(1+s)}(P,W) − R)`, and `sup_{0≤s≤1} s(Σ_x P(x) D_{1−s}(W_x‖PW) − R)`
/// for the random-coding kind.
fn channel_exponent(kind: ExponentKind, rate: f64, p: &[f64], ens: &CqEnsemble, cfg: &ExponentConfig) -> ExponentValue {
    let mut converged = true;
    let tol = cfg.tau_tol;
    let mut info = |variant: Variant, s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let i = renyi_information(variant, s, p, ens, tol);
        converged &= i.converged;
        s * (i.value - rate)
    };
    let opt = match kind {
        ExponentKind::RChannel => {
            let pw = ens.average_state(p);
            let f = |s: f64| {
                if s == 0.0 {
                    return 0.0;
                }
                let inner: f64 = p
                    .iter()
                    .zip(ens.states())
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, rho)| w * petz_d(rho, &pw, 1.0 - s))
                    .sum();
                s * (inner - rate)
            };
            optimize_over_s(f, SDomain::Unit, cfg.s_tol)
        }
        ExponentKind::SpChannel => optimize_over_s(|s| info(Variant::Petz, s), SDomain::NonNegative, cfg.s_tol),
        ExponentKind::ScChannel => optimize_over_s(|s| info(Variant::Sandwiched, s), SDomain::Negative, cfg.s_tol),
        _ => unreachable!(),
    };
    ExponentValue { value: opt.value, s: opt.s, infinite: opt.infinite, converged }
}

/// `sup_{½≤α≤1} ((1−α)/α)(Σ_x P(x) D_{2−1/α}(W_x‖PW) − R)`.
pub fn r_channel_alpha_form(rate: f64, p: &[f64], ens: &CqEnsemble) -> f64 {
    let pw = ens.average_state(p);
    let mut f = |alpha: f64| {
        if alpha >= 1.0 {
            return 0.0;
        }
        let order = 2.0 - 1.0 / alpha;
        let inner: f64 = p
            .iter()
            .zip(ens.states())
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, rho)| w * petz_d(rho, &pw, order))
            .sum();
        (1.0 - alpha) / alpha * (inner - rate)
    };
    let (lo, hi) = (f(0.5), f(1.0));
    let (_, mid) = golden(&mut f, 0.5, 1.0, S_TOL * 0.25);
    mid.max(lo).max(hi)
}

/// Sampled `(R, E(R))` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub kind: ExponentKind,
    pub rate_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub optimizer_s: Vec<f64>,
    pub infinite: Vec<bool>,
    pub converged: Vec<bool>,
}

/// Evaluates an exponent on a rate grid in parallel; output order follows the grid.
pub fn exponent_curve(kind: ExponentKind, rates: &[f64], dist: &[f64], ens: &CqEnsemble, cfg: &ExponentConfig) -> ExponentCurve {
    let vals: Vec<ExponentValue> = rates.par_iter().map(|&r| exponent(kind, r, dist, ens, cfg)).collect();
    ExponentCurve {
        kind,
        rate_grid: rates.to_vec(),
        values: vals.iter().map(|v| v.value).collect(),
        optimizer_s: vals.iter().map(|v| v.s).collect(),
        infinite: vals.iter().map(|v| v.infinite).collect(),
        converged: vals.iter().map(|v| v.converged).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelQuantities {
    /// `I(Q,W) = Σ_x Q(x) D(W_x‖QW)`
    pub mutual_information: f64,
    /// `I₀(Q,W) = −sup_τ Σ_x Q(x) log Tr[Π_x τ]`
    pub i0: f64,
    /// `H(Q|B) = H(Q) − I(Q,W)`
    pub conditional_entropy: f64,
    /// `Ĥ₀(Q|B) = H(Q) − I₀(Q,W)`
    pub h0_hat: f64,
    /// `H₀↑(X|B) = log λ_max(Σ_{x: Q(x)>0} Π_x)`
    pub h0_up: f64,
    pub converged: bool,
}

pub fn channel_quantities(q: &[f64], ens: &CqEnsemble, tol: f64) -> ChannelQuantities {
    let mi = holevo(q, ens, &ens.average_state(q));
    let r = TauProblem::order_zero(q, ens).minimize(tol);
    let i0 = r.value.max(0.0);
    let d = ens.dim();
    let mut sum = HermitianOperator::zeros(d);
    for (&w, rho) in q.iter().zip(ens.states()) {
        if w > 0.0 {
            sum = sum.add(&support_projector(rho.as_hermitian()));
        }
    }
    let h = shannon_entropy(q);
    ChannelQuantities {
        mutual_information: mi,
        i0,
        conditional_entropy: h - mi,
        h0_hat: h - i0,
        h0_up: sum.max_eigenvalue().log2(),
        converged: r.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_pair(seed: u64) -> CqEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random::distribution(2, 0.1, &mut rng);
        CqEnsemble::new(p, vec![random::density(2, &mut rng), random::density(2, &mut rng)]).unwrap()
    }

    fn orthogonal() -> CqEnsemble {
        CqEnsemble::classical(vec![0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ens = qubit_pair(3);
        for (variant, s) in [(Variant::Petz, 0.7), (Variant::Petz, -0.4), (Variant::Sandwiched, -0.6), (Variant::Sandwiched, 1.5)] {
            for prob in [TauProblem::average(variant, s, &[0.3, 0.7], &ens), TauProblem::joint(variant, s, &[0.3, 0.7], &ens)] {
                let tau = random::density(2, &mut rng);
                let dir = random::hermitian(2, &mut rng);
                let at = |t: f64| {
                    let m = tau.as_hermitian().add(&dir.scale(t));
                    prob.value_grad(&spectral(&m)).0
                };
                let h = 1e-6;
                let fd = (at(h) - at(-h)) / (2.0 * h);
                let (_, g) = prob.value_grad(&spectral(tau.as_hermitian()));
                let an = trace_product(&g, dir.matrix()).re;
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{variant:?} {s}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn internal_value_matches_divergence_module() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ens = qubit_pair(8);
        let q = [0.4, 0.6];
        for variant in [Variant::Petz, Variant::Sandwiched] {
            for s in [-0.5, 0.3, 2.0] {
                let tau = random::density(2, &mut rng);
                let prob = TauProblem::average(variant, s, &q, &ens);
                let direct = tau_objective(variant, s, &q, &ens, &tau);
                assert!((prob.value_at(&tau) - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tau_objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::density(2, &mut rng);
        let same = CqEnsemble::new(vec![0.5, 0.5], vec![rho.clone(), rho.clone()]).unwrap();
        assert!(tau_objective(Variant::Petz, 1.0, &[0.5, 0.5], &same, &rho).abs() < 1e-10);
        let ens = qubit_pair(2);
        let mm = DensityOperator::maximally_mixed(2);
        let single = tau_objective(Variant::Sandwiched, 0.5, &[1.0, 0.0], &ens, &mm);
        assert!((single - crate::divergence::sandwiched_d(ens.state(0), &mm, 1.0 / 1.5)).abs() < 1e-12);
        assert!(tau_objective(Variant::Petz, 1.0, &[0.5, 0.5], &ens, &mm).is_finite());
    }

    #[test]
    fn minimizer_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random::density(2, &mut rng);
        let single = CqEnsemble::new(vec![1.0], vec![rho.clone()]).unwrap();
        for variant in [Variant::Petz, Variant::Sandwiched] {
            for s in [-0.5, 1.0] {
                let r = minimize_over_tau(variant, s, &[1.0], &single, 1e-8);
                assert!(r.converged);
                assert!(r.value.abs() < 1e-8, "{variant:?} {s} {}", r.value);
                assert!(r.minimizer.as_hermitian().sub(rho.as_hermitian()).max_norm() < 1e-3);
            }
        }
        let same = CqEnsemble::new(vec![0.5, 0.5], vec![rho.clone(), rho.clone()]).unwrap();
        let r = minimize_over_tau(Variant::Petz, 2.0, &[0.5, 0.5], &same, 1e-9);
        assert!(r.value.abs() < 1e-8);
    }

    #[test]
    fn orthogonal_pure_states_e0() {
        // inf_τ ½D_α(|0⟩⟨0|‖τ) + ½D_α(|1⟩⟨1|‖τ) = 1 at τ = I/2, so E₀(s,Q) = s(1 − 1) = 0.
        let ens = orthogonal();
        for s in [0.5, 1.0, 2.0] {
            let v = aux_e0_type(Variant::Petz, s, &[0.5, 0.5], &ens, 1e-10);
            assert!(v.value.abs() < 1e-7, "{}", v.value);
        }
    }

    #[test]
    fn aux_type_examples() {
        let ens = qubit_pair(4);
        assert_eq!(aux_e0_type(Variant::Petz, 0.0, &[0.5, 0.5], &ens, 1e-8).value, 0.0);
        let v = aux_e0_type(Variant::Petz, 1.3, &[0.0, 1.0], &ens, 1e-10);
        assert!(v.value.abs() < 1e-7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random::density(2, &mut rng);
        let same = CqEnsemble::new(vec![0.5, 0.5], vec![rho.clone(), rho]).unwrap();
        let q = [0.3, 0.7];
        for s in [0.5, 2.0] {
            let v = aux_e0_type(Variant::Petz, s, &q, &same, 1e-10);
            assert!((v.value + s * shannon_entropy(&q)).abs() < 1e-7);
        }
    }

    #[test]
    fn aux_down_examples() {
        let ens = qubit_pair(5);
        assert_eq!(aux_e0_down_type(0.0, &[0.5, 0.5], &ens), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random::density(2, &mut rng);
        let same = CqEnsemble::new(vec![0.5, 0.5], vec![rho.clone(), rho]).unwrap();
        let q = [0.2, 0.8];
        assert!((aux_e0_down_type(0.6, &q, &same) + 0.6 * shannon_entropy(&q)).abs() < 1e-10);
        // Binary symmetric classical pair.
        let e = 0.1;
        let bsc = CqEnsemble::classical(vec![0.5, 0.5], &[vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap();
        let s = 0.4;
        let d = crate::divergence::classical_renyi(&[1.0 - e, e], &[0.5, 0.5], 1.0 - s);
        assert!((aux_e0_down_type(s, &[0.5, 0.5], &bsc) - s * (d - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn iid_closed_form_matches_optimizer() {
        for seed in 0..5 {
            let ens = qubit_pair(seed);
            for s in [-0.5, 0.25, 1.0, 3.0] {
                let closed = aux_e0_iid(Variant::Petz, s, &ens, 1e-10).value;
                let num = aux_e0_iid_numeric(Variant::Petz, s, ens.prior(), &ens, 1e-11);
                assert!((closed - num.value).abs() < 1e-8, "seed {seed} s {s}: {closed} vs {}", num.value);
            }
        }
    }

    #[test]
    fn iid_classical_gallager() {
        let (p, w) = ([0.3, 0.7], [vec![0.8, 0.2], vec![0.25, 0.75]]);
        let ens = CqEnsemble::classical(p.to_vec(), &w).unwrap();
        for s in [0.5, 1.0, 2.0] {
            let a = 1.0 / (1.0 + s);
            let mut total = 0.0;
            for y in 0..2 {
                let inner: f64 = (0..2).map(|x| (p[x] * w[x][y]).powf(a)).sum();
                total += inner.powf(1.0 + s);
            }
            let want = -total.log2();
            assert!((aux_e0_iid(Variant::Petz, s, &ens, 1e-10).value - want).abs() < 1e-12);
            let sw = aux_e0_iid(Variant::Sandwiched, s, &ens, 1e-11).value;
            assert!((sw - want).abs() < 1e-8);
        }
        for s in [0.3, 0.9] {
            let mut k = 0.0;
            let rb = [p[0] * w[0][0] + p[1] * w[1][0], p[0] * w[0][1] + p[1] * w[1][1]];
            for x in 0..2 {
                for y in 0..2 {
                    k += (p[x] * w[x][y]).powf(1.0 - s) * rb[y].powf(s);
                }
            }
            assert!((aux_e0_down_iid(s, &ens) + k.log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_letter_iid_reduces_to_type() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ens = CqEnsemble::new(vec![1.0], vec![random::density(2, &mut rng)]).unwrap();
        for s in [0.5, -0.5] {
            for variant in [Variant::Petz, Variant::Sandwiched] {
                let iid = aux_e0_iid_numeric(variant, s, &[1.0], &ens, 1e-10).value;
                let ty = aux_e0_type(variant, s, &[1.0], &ens, 1e-10).value;
                assert!((iid - ty).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn optimize_over_s_examples() {
        let r = optimize_over_s(|s| -s * s, SDomain::Unit, S_TOL);
        assert!(r.s.abs() < 1e-6 && r.value.abs() < 1e-12);
        let r = optimize_over_s(|s| s * (1.0 - s), SDomain::Unit, S_TOL);
        assert!((r.s - 0.5).abs() < 1e-6);
        let r = optimize_over_s(|s| 0.01 * s, SDomain::NonNegative, S_TOL);
        assert!(r.infinite && r.value.is_infinite());
        let r = optimize_over_s(|s| s * (3.0 - s), SDomain::NonNegative, S_TOL);
        assert!((r.s - 1.5).abs() < 1e-6 && !r.infinite);
        let r = optimize_over_s(|s| -(s + 0.3) * (s + 0.3), SDomain::Negative, S_TOL);
        assert!((r.s + 0.3).abs() < 1e-6);
        let r = optimize_over_s(|s| 1e-4 * s, SDomain::Negative, S_TOL);
        assert!(r.s > -1e-6);
    }

    #[test]
    fn concavity_in_s() {
        for seed in 0..10 {
            let ens = qubit_pair(100 + seed);
            let q = [0.35, 0.65];
            let f = |s: f64| aux_e0_type(Variant::Petz, s, &q, &ens, 1e-10).value;
            for (a, b) in [(0.0, 4.0), (0.5, 1.5), (1.0, 3.0)] {
                assert!(f((a + b) / 2.0) >= (f(a) + f(b)) / 2.0 - 1e-7);
            }
            let g = |s: f64| aux_e0_type(Variant::Sandwiched, s, &q, &ens, 1e-10).value;
            for (a, b) in [(-0.9, -0.1), (-0.6, -0.2)] {
                assert!(g((a + b) / 2.0) >= (g(a) + g(b)) / 2.0 - 1e-7);
            }
        }
    }

    #[test]
    fn exponent_examples() {
        let ens = qubit_pair(31);
        let q = [0.5, 0.5];
        let cfg = ExponentConfig::default();
        let cq = channel_quantities(&q, &ens, 1e-10);
        assert!(cq.conditional_entropy > 0.0);
        let r0 = exponent(ExponentKind::RSource, 0.0, &q, &ens, &cfg);
        assert!(r0.value.abs() < 1e-9 && r0.s < 1e-5);
        let sp = exponent(ExponentKind::SpSource, cq.conditional_entropy - 0.05, &q, &ens, &cfg);
        assert!(sp.value.abs() < 1e-9 && !sp.infinite);
        let spc = exponent(ExponentKind::SpChannel, cq.mutual_information + 0.05, &q, &ens, &cfg);
        assert!(spc.value.abs() < 1e-9);
    }

    #[test]
    fn channel_quantity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random::density(2, &mut rng);
        let same = CqEnsemble::new(vec![0.5, 0.5], vec![rho.clone(), rho]).unwrap();
        let q = [0.3, 0.7];
        let c = channel_quantities(&q, &same, 1e-10);
        assert!(c.mutual_information.abs() < 1e-10);
        assert!((c.conditional_entropy - shannon_entropy(&q)).abs() < 1e-10);
        assert!(c.i0.abs() < 1e-9);
        let c = channel_quantities(&[0.5, 0.5], &orthogonal(), 1e-10);
        assert!((c.mutual_information - 1.0).abs() < 1e-10);
        assert!(c.conditional_entropy.abs() < 1e-10);
        assert!((c.i0 - 1.0).abs() < 1e-8);
        assert!(c.h0_up.abs() < 1e-12);
        let pure = CqEnsemble::new(vec![0.5, 0.5], vec![DensityOperator::from_bloch([0.0, 0.0, 1.0]), DensityOperator::from_bloch([1.0, 0.0, 0.0])]).unwrap();
        let c = channel_quantities(&[0.5, 0.5], &pure, 1e-10);
        let want = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.h0_up - want.log2()).abs() < 1e-10);
        assert!(c.i0 > 0.0 && c.i0 < c.mutual_information + 1e-12);
    }

    #[test]
    fn alpha_form_matches_s_form() {
        let cfg = ExponentConfig::default();
        for seed in 0..5 {
            let ens = qubit_pair(50 + seed);
            let p = ens.prior().to_vec();
            let i = channel_quantities(&p, &ens, 1e-10).mutual_information;
            for r in [0.0, 0.5 * i, 0.9 * i, 2.0 * i] {
                let a = r_channel_alpha_form(r, &p, &ens);
                let b = exponent(ExponentKind::RChannel, r, &p, &ens, &cfg).value;
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
        assert_eq!(r_channel_alpha_form(100.0, &[0.5, 0.5], &qubit_pair(1)), 0.0);
    }

    #[test]
    fn joint_weights_survive_large_orders() {
        // s near −1 puts α near 10⁶, where P(x)^α underflows.
        let ens = qubit_pair(5);
        let p = ens.prior().to_vec();
        let v = aux_e0_iid(Variant::Sandwiched, -1.0 + 1e-6, &ens, 1e-8).value;
        assert!(v.is_finite(), "{v}");
        let cfg = ExponentConfig::default();
        let iid = exponent(ExponentKind::ScSourceIid, 0.0, &p, &ens, &cfg);
        assert!(iid.value.is_finite() && iid.value > 0.0, "{iid:?}");
    }
}
