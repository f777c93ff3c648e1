//! Finite-blocklength codes: exact error evaluation at tiny blocklengths, the
//! covering and expurgation construction of source codes from
//! constant-composition channel codes, the pigeonhole extraction of channel
//! codes from source codes, random coding with the square-root decoder and a
//! few exact oracles for small instances.
//!
//! Decoders built from a permuted codebook are never materialized as
//! `V Λ V†` on the main path: `Tr[V_π Λ V_π† ρ^x] = Tr[Λ ρ^{π⁻¹x}]` is
//! evaluated by permuting the sequence.

use crate::cqtypes::{
    apply_permutation, enumerate_sequences, enumerate_type_class, log2_type_class_size, sequence_probability,
    shannon_entropy, slack, type_class_probability, type_of, Alphabet, Permutation, Sequence, TypeDistribution,
    TypesError,
};
use crate::divergence::{petz_d, CqEnsemble};
use crate::linalg::{
    frac_power, permute_subsystems, positive_part_projector, trace_norm, CMatrix, DensityOperator, HermitianOperator,
    C64,
};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

/// Largest `d^n` (channel side) or `(|X|d)^n` (joint states) evaluated densely.
pub const DIM_BUDGET: u64 = 4096;
/// Largest number of encoder functions enumerated by the brute-force oracle.
pub const BRUTE_FORCE_BUDGET: u64 = 10_000_000;
/// Sub-POVM and PSD tolerance for decoders.
pub const POVM_TOL: f64 = 1e-9;
/// Slack for inequalities that hold exactly in real arithmetic.
pub const EXACT_SLACK: f64 = 1e-12;
const MAX_FAILED_BATCHES: usize = 16;
const GREEDY_RANDOM_CANDIDATES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodesError {
    #[error("{what}: {needed} exceeds budget {limit}")]
    Budget { what: &'static str, needed: String, limit: u64 },
    #[error(transparent)]
    Types(#[from] TypesError),
    #[error("invalid code: {0}")]
    Invalid(String),
    #[error("side information states do not commute")]
    NonCommuting,
}

impl CodesError {
    pub fn is_budget(&self) -> bool {
        matches!(self, CodesError::Budget { .. } | CodesError::Types(TypesError::BudgetExceeded { .. }))
    }
}

fn check_budget(what: &'static str, base: usize, n: usize) -> Result<usize, CodesError> {
    match (base as u64).checked_pow(n as u32) {
        Some(v) if v <= DIM_BUDGET => Ok(v as usize),
        _ => Err(CodesError::Budget { what, needed: format!("{base}^{n}"), limit: DIM_BUDGET }),
    }
}

/// Derives an independent per-trial seed from a master seed (splitmix64).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `ρ^{x₁} ⊗ … ⊗ ρ^{xₙ}`.
pub fn tensor_state(x: &Sequence, ens: &CqEnsemble) -> Result<DensityOperator, CodesError> {
    check_budget("tensor dimension", ens.dim(), x.len())?;
    if let Some(l) = x.letters().find(|&l| l >= ens.alphabet_size()) {
        return Err(TypesError::LetterOutOfRange { letter: l, size: ens.alphabet_size() }.into());
    }
    let mut letters = x.letters();
    let mut acc = ens.state(letters.next().expect("nonempty sequence")).clone();
    for l in letters {
        acc = acc.kron(ens.state(l));
    }
    Ok(acc)
}

/// `σ^{⊗n}`.
pub fn tensor_power(sigma: &DensityOperator, n: usize) -> Result<DensityOperator, CodesError> {
    check_budget("tensor dimension", sigma.dim(), n)?;
    let mut acc = sigma.clone();
    for _ in 1..n {
        acc = acc.kron(sigma);
    }
    Ok(acc)
}

/// `V_π Λ V_π†`, the operator with tensor factor `k` moved to position `π(k)`.
pub fn permute_operator(op: &HermitianOperator, pi: &Permutation, d: usize) -> HermitianOperator {
    let dims = vec![d; pi.len()];
    HermitianOperator::from_matrix_unchecked(permute_subsystems(op.matrix(), &dims, pi.images()))
}

/// Explicit permutation unitary `V_π` on `(C^d)^{⊗n}`.
pub fn permutation_unitary(pi: &Permutation, d: usize) -> CMatrix {
    let dims = vec![d; pi.len()];
    let total: usize = dims.iter().product();
    let id = CMatrix::identity(total, total);
    // Columns of V are V|e_j⟩; permuting the factors of |e_j⟩⟨e_j| would lose phases, so
    // map basis vectors directly.
    let mut v = CMatrix::zeros(total, total);
    for j in 0..total {
        let digits = crate::linalg::unflatten(j, &dims);
        let mut out = vec![0; dims.len()];
        for (k, &p) in pi.images().iter().enumerate() {
            out[p] = digits[k];
        }
        let i = crate::linalg::flatten(&out, &dims);
        v[(i, j)] = id[(j, j)];
    }
    v
}

fn psd_violation(ops: &[HermitianOperator]) -> (f64, f64) {
    let d = ops.first().map(|o| o.dim()).unwrap_or(1);
    let min_eig = ops.iter().map(|o| o.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    let sum = ops.iter().fold(HermitianOperator::zeros(d), |acc, o| acc.add(o));
    (min_eig, sum.max_eigenvalue() - 1.0)
}

/// A channel code with codebook `ℰ(m)` and sub-POVM decoder `{Λ_m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelCode {
    n: usize,
    codebook: Vec<Sequence>,
    decoder: Vec<HermitianOperator>,
    composition: Option<TypeDistribution>,
}

impl ChannelCode {
    /// Validates PSD elements, `Σ Λ_m ≤ I + POVM_TOL` and the claimed composition.
    pub fn new(
        codebook: Vec<Sequence>,
        decoder: Vec<HermitianOperator>,
        composition: Option<TypeDistribution>,
    ) -> Result<Self, CodesError> {
        if codebook.is_empty() {
            return Err(CodesError::Invalid("empty codebook".into()));
        }
        if codebook.len() != decoder.len() {
            return Err(CodesError::Invalid(format!("{} codewords but {} decoder elements", codebook.len(), decoder.len())));
        }
        let n = codebook[0].len();
        if codebook.iter().any(|c| c.len() != n) {
            return Err(CodesError::Invalid("codewords of different lengths".into()));
        }
        let dim = decoder[0].dim();
        if decoder.iter().any(|o| o.dim() != dim) {
            return Err(CodesError::Invalid("decoder elements of different dimensions".into()));
        }
        let (min_eig, excess) = psd_violation(&decoder);
        if min_eig < -POVM_TOL {
            return Err(CodesError::Invalid(format!("decoder element with eigenvalue {min_eig}")));
        }
        if excess > POVM_TOL {
            return Err(CodesError::Invalid(format!("decoder sums above identity by {excess}")));
        }
        if let Some(q) = &composition {
            for c in &codebook {
                if &type_of(c, q.alphabet())? != q {
                    return Err(CodesError::Invalid("codeword outside the claimed type class".into()));
                }
            }
        }
        Ok(Self { n, codebook, decoder, composition })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_messages(&self) -> usize {
        self.codebook.len()
    }

    pub fn codebook(&self) -> &[Sequence] {
        &self.codebook
    }

    pub fn decoder(&self) -> &[HermitianOperator] {
        &self.decoder
    }

    pub fn composition(&self) -> Option<&TypeDistribution> {
        self.composition.as_ref()
    }

    pub fn rate(&self) -> f64 {
        (self.num_messages() as f64).log2() / self.n as f64
    }

    /// `λ_max(Σ Λ_m) − 1`.
    pub fn povm_excess(&self) -> f64 {
        psd_violation(&self.decoder).1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelErrors {
    pub avg: f64,
    pub max: f64,
    pub per_message: Vec<f64>,
}

/// Per-message `1 − Tr[Λ_m ρ^{ℰ(m)}]` with average and maximum.
pub fn channel_error(code: &ChannelCode, ens: &CqEnsemble) -> Result<ChannelErrors, CodesError> {
    check_budget("tensor dimension", ens.dim(), code.n)?;
    let per_message: Vec<f64> = code
        .codebook
        .par_iter()
        .zip(code.decoder.par_iter())
        .map(|(x, lam)| tensor_state(x, ens).map(|rho| 1.0 - lam.trace_product(rho.as_hermitian())))
        .collect::<Result<_, _>>()?;
    let avg = per_message.iter().sum::<f64>() / per_message.len() as f64;
    let max = per_message.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ChannelErrors { avg, max, per_message })
}

/// Keeps the `⌊M/2⌋` messages with the smallest error, ties broken by index.
/// Returns the new code and the kept message indices in increasing order.
pub fn expurgate(code: &ChannelCode, ens: &CqEnsemble) -> Result<(ChannelCode, Vec<usize>), CodesError> {
    let m = code.num_messages();
    if m < 2 {
        return Err(CodesError::Invalid("expurgation needs at least two messages".into()));
    }
    let errs = channel_error(code, ens)?.per_message;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| errs[a].total_cmp(&errs[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..m / 2].to_vec();
    kept.sort_unstable();
    let out = ChannelCode {
        n: code.n,
        codebook: kept.iter().map(|&i| code.codebook[i].clone()).collect(),
        decoder: kept.iter().map(|&i| code.decoder[i].clone()).collect(),
        composition: code.composition.clone(),
    };
    Ok((out, kept))
}

/// `S^{-1/2} A_m S^{-1/2}` with `S = Σ A_i`, the inverse taken on the support.
pub fn square_root_measurement(ops: &[HermitianOperator]) -> Vec<HermitianOperator> {
    let d = ops[0].dim();
    let s = ops.iter().fold(HermitianOperator::zeros(d), |acc, o| acc.add(o));
    let s_inv_half = frac_power(&s, -0.5);
    ops.par_iter().map(|o| o.conjugate_by(s_inv_half.matrix())).collect()
}

/// Pretty-good measurement for the weighted states `{w_m ρ_m}`.
pub fn pretty_good_measurement(weights: &[f64], states: &[DensityOperator]) -> Vec<HermitianOperator> {
    let ops: Vec<HermitianOperator> = weights.iter().zip(states).map(|(w, s)| s.as_hermitian().scale(*w)).collect();
    square_root_measurement(&ops)
}

/// `Λ_m = {ρ^{x_m} − γ σ > 0}` followed by the square-root normalization.
pub fn threshold_square_root_decoder(
    codebook: &[Sequence],
    sigma_n: &DensityOperator,
    gamma: f64,
    ens: &CqEnsemble,
) -> Result<Vec<HermitianOperator>, CodesError> {
    let lambdas: Vec<HermitianOperator> = codebook
        .par_iter()
        .map(|x| {
            tensor_state(x, ens).map(|rho| positive_part_projector(&rho.as_hermitian().sub(&sigma_n.as_hermitian().scale(gamma))))
        })
        .collect::<Result<_, _>>()?;
    Ok(square_root_measurement(&lambdas))
}

/// Default decoder for a user codebook: the threshold square-root decoder with
/// `γ = (M−1)/P(B)`. A constant-composition codebook of type `Q` uses
/// `P = Q` and `B = T_Q^n`; otherwise `P` is the ensemble prior and `B = X^n`.
pub fn default_decoder(codebook: &[Sequence], ens: &CqEnsemble) -> Result<Vec<HermitianOperator>, CodesError> {
    let n = codebook[0].len();
    let t0 = type_of(&codebook[0], ens.alphabet())?;
    let constant = codebook.iter().all(|c| type_of(c, ens.alphabet()).map(|t| t == t0).unwrap_or(false));
    let (p, p_b) = if constant {
        let q = t0.probabilities();
        let pb = type_class_probability(&t0, &q);
        (q, pb)
    } else {
        (ens.prior().to_vec(), 1.0)
    };
    let sigma = tensor_power(&ens.average_state(&p), n)?;
    let gamma = (codebook.len() as f64 - 1.0) / p_b;
    threshold_square_root_decoder(codebook, &sigma, gamma, ens)
}

/// Binary discrimination: `½(1 − ‖p₀ρ₀ − p₁ρ₁‖₁)`.
pub fn helstrom_error(rho0: &DensityOperator, rho1: &DensityOperator, p0: f64) -> f64 {
    let diff = rho0.as_hermitian().scale(p0).sub(&rho1.as_hermitian().scale(1.0 - p0));
    0.5 * (1.0 - trace_norm(&diff))
}

/// `[{p₀ρ₀ − p₁ρ₁ > 0}, I − {p₀ρ₀ − p₁ρ₁ > 0}]`.
pub fn helstrom_decoder(rho0: &DensityOperator, rho1: &DensityOperator, p0: f64) -> [HermitianOperator; 2] {
    let diff = rho0.as_hermitian().scale(p0).sub(&rho1.as_hermitian().scale(1.0 - p0));
    let p = positive_part_projector(&diff);
    let q = HermitianOperator::identity(p.dim()).sub(&p);
    [p, q]
}

/// Where the source sequences come from.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceModel {
    /// `x ~ P^n` on `X^n`.
    Iid { prior: Vec<f64>, n: usize },
    /// `x` uniform on `T_Q^n`.
    ConstantType(TypeDistribution),
}

impl SourceModel {
    pub fn n(&self) -> usize {
        match self {
            SourceModel::Iid { n, .. } => *n,
            SourceModel::ConstantType(q) => q.n(),
        }
    }

    /// Support in lexicographic order.
    pub fn domain(&self) -> Result<Vec<Sequence>, CodesError> {
        Ok(match self {
            SourceModel::Iid { prior, n } => enumerate_sequences(*n, Alphabet::new(prior.len())?)?,
            SourceModel::ConstantType(q) => enumerate_type_class(q)?,
        })
    }

    pub fn weight(&self, x: &Sequence) -> f64 {
        match self {
            SourceModel::Iid { prior, .. } => sequence_probability(x, prior),
            SourceModel::ConstantType(q) => match type_of(x, q.alphabet()) {
                Ok(t) if &t == q => (-log2_type_class_size(q)).exp2(),
                _ => 0.0,
            },
        }
    }
}

/// Decoder of a source code. For block `z` only the elements `Π_x^{(z)}`
/// with `ℰ(x) = z` are stored; all others are zero.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceDecoder {
    /// `Π_x^{(ℰ(x))}` indexed like the domain.
    Explicit(Vec<HermitianOperator>),
    /// `Π_x^{(i)} = V_{π_i} Λ_m V_{π_i}†` for `x = π_i u_m`.
    Permuted {
        channel_decoder: Vec<HermitianOperator>,
        codebook: Vec<Sequence>,
        permutations: Vec<Permutation>,
        /// Message `m` with `x = π_{ℰ(x)} u_m`, per domain element.
        messages: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceCode {
    n: usize,
    domain: Vec<Sequence>,
    encoder: Vec<usize>,
    num_blocks: usize,
    decoder: SourceDecoder,
}

impl SourceCode {
    pub fn new(domain: Vec<Sequence>, encoder: Vec<usize>, num_blocks: usize, decoder: SourceDecoder) -> Result<Self, CodesError> {
        if domain.is_empty() || domain.len() != encoder.len() {
            return Err(CodesError::Invalid("encoder must be total on a nonempty domain".into()));
        }
        if encoder.iter().any(|&z| z >= num_blocks) {
            return Err(CodesError::Invalid("encoder output outside the compressed alphabet".into()));
        }
        let n = domain[0].len();
        match &decoder {
            SourceDecoder::Explicit(ops) if ops.len() != domain.len() => {
                return Err(CodesError::Invalid("one decoder element per domain sequence required".into()))
            }
            SourceDecoder::Permuted { channel_decoder, codebook, permutations, messages } => {
                if messages.len() != domain.len() || channel_decoder.len() != codebook.len() {
                    return Err(CodesError::Invalid("inconsistent permuted decoder".into()));
                }
                for (k, x) in domain.iter().enumerate() {
                    let pi = &permutations[encoder[k]];
                    if apply_permutation(pi, &codebook[messages[k]])? != *x {
                        return Err(CodesError::Invalid("permuted decoder does not realize its block".into()));
                    }
                }
            }
            _ => {}
        }
        let code = Self { n, domain, encoder, num_blocks, decoder };
        if let SourceDecoder::Explicit(ops) = &code.decoder {
            let min_eig = ops.iter().map(|o| o.min_eigenvalue()).fold(f64::INFINITY, f64::min);
            if min_eig < -POVM_TOL {
                return Err(CodesError::Invalid(format!("decoder element with eigenvalue {min_eig}")));
            }
        }
        let excess = code.povm_excess();
        if excess > POVM_TOL {
            return Err(CodesError::Invalid(format!("block decoder sums above identity by {excess}")));
        }
        Ok(code)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &[Sequence] {
        &self.domain
    }

    pub fn encoder(&self) -> &[usize] {
        &self.encoder
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn decoder(&self) -> &SourceDecoder {
        &self.decoder
    }

    pub fn rate(&self) -> f64 {
        (self.num_blocks as f64).log2() / self.n as f64
    }

    /// Domain indices of `S_z = ℰ⁻¹(z)`.
    pub fn block(&self, z: usize) -> Vec<usize> {
        (0..self.domain.len()).filter(|&k| self.encoder[k] == z).collect()
    }

    /// `Π_x^{(ℰ(x))}` for the domain element `k`, materialized.
    pub fn element(&self, k: usize) -> HermitianOperator {
        match &self.decoder {
            SourceDecoder::Explicit(ops) => ops[k].clone(),
            SourceDecoder::Permuted { channel_decoder, permutations, messages, .. } => {
                let op = &channel_decoder[messages[k]];
                let d = (op.dim() as f64).powf(1.0 / self.n as f64).round() as usize;
                permute_operator(op, &permutations[self.encoder[k]], d)
            }
        }
    }

    /// `Tr[Π_x^{(ℰ(x))} ρ^x]`; permuted decoders evaluate `Tr[Λ_m ρ^{π⁻¹x}]`.
    pub fn success(&self, k: usize, ens: &CqEnsemble) -> Result<f64, CodesError> {
        let x = &self.domain[k];
        match &self.decoder {
            SourceDecoder::Explicit(ops) => Ok(ops[k].trace_product(tensor_state(x, ens)?.as_hermitian())),
            SourceDecoder::Permuted { channel_decoder, permutations, messages, .. } => {
                let back = apply_permutation(&permutations[self.encoder[k]].inverse(), x)?;
                Ok(channel_decoder[messages[k]].trace_product(tensor_state(&back, ens)?.as_hermitian()))
            }
        }
    }

    /// `max_z λ_max(Σ_{x∈S_z} Π_x^{(z)}) − 1`.
    pub fn povm_excess(&self) -> f64 {
        (0..self.num_blocks)
            .map(|z| {
                let ks = self.block(z);
                if ks.is_empty() {
                    return -1.0;
                }
                let ops: Vec<HermitianOperator> = match &self.decoder {
                    SourceDecoder::Explicit(ops) => ks.iter().map(|&k| ops[k].clone()).collect(),
                    // Conjugation by V_π preserves the spectrum.
                    SourceDecoder::Permuted { channel_decoder, messages, .. } => {
                        ks.iter().map(|&k| channel_decoder[messages[k]].clone()).collect()
                    }
                };
                psd_violation(&ops).1
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn per_element_errors(code: &SourceCode, ens: &CqEnsemble) -> Result<Vec<f64>, CodesError> {
    check_budget("tensor dimension", ens.dim(), code.n)?;
    (0..code.domain.len()).into_par_iter().map(|k| code.success(k, ens).map(|s| 1.0 - s)).collect()
}

fn model_weights(code: &SourceCode, model: &SourceModel) -> Result<Vec<f64>, CodesError> {
    if model.n() != code.n {
        return Err(CodesError::Invalid("source blocklength differs from the code".into()));
    }
    let w: Vec<f64> = code.domain.iter().map(|x| model.weight(x)).collect();
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CodesError::Invalid(format!("encoder domain carries source mass {total}, not 1")));
    }
    Ok(w)
}

/// `1 − Σ_x p(x) Tr[Π_x^{(ℰ(x))} ρ^x]`.
pub fn source_error(code: &SourceCode, model: &SourceModel, ens: &CqEnsemble) -> Result<f64, CodesError> {
    let w = model_weights(code, model)?;
    let errs = per_element_errors(code, ens)?;
    Ok(w.iter().zip(&errs).map(|(a, b)| a * b).sum())
}

/// Error of a randomized encoder given as a mixture of deterministic codes,
/// with the smallest component error.
pub fn randomized_source_error(
    codes: &[SourceCode],
    mix: &[f64],
    model: &SourceModel,
    ens: &CqEnsemble,
) -> Result<(f64, f64), CodesError> {
    let errs: Vec<f64> = codes.iter().map(|c| source_error(c, model, ens)).collect::<Result<_, _>>()?;
    let mixture = errs.iter().zip(mix).map(|(e, w)| e * w).sum();
    Ok((mixture, errs.iter().cloned().fold(f64::INFINITY, f64::min)))
}

/// A source code with a random encoder onto `num_blocks` blocks and a
/// pretty-good measurement on each block.
pub fn random_source_code(model: &SourceModel, num_blocks: usize, ens: &CqEnsemble, seed: u64) -> Result<SourceCode, CodesError> {
    let domain = model.domain()?;
    check_budget("tensor dimension", ens.dim(), model.n())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder: Vec<usize> = domain.iter().map(|_| rng.gen_range(0..num_blocks)).collect();
    pgm_source_code(model, domain, encoder, num_blocks, ens)
}

/// Source code with the given encoder and a pretty-good measurement per block.
pub fn pgm_source_code(
    model: &SourceModel,
    domain: Vec<Sequence>,
    encoder: Vec<usize>,
    num_blocks: usize,
    ens: &CqEnsemble,
) -> Result<SourceCode, CodesError> {
    let states: Vec<DensityOperator> = domain.iter().map(|x| tensor_state(x, ens)).collect::<Result<_, _>>()?;
    let d = states[0].dim();
    let mut ops = vec![HermitianOperator::zeros(d); domain.len()];
    for z in 0..num_blocks {
        let ks: Vec<usize> = (0..domain.len()).filter(|&k| encoder[k] == z).collect();
        if ks.is_empty() {
            continue;
        }
        let w: Vec<f64> = ks.iter().map(|&k| model.weight(&domain[k])).collect();
        let st: Vec<DensityOperator> = ks.iter().map(|&k| states[k].clone()).collect();
        for (k, op) in ks.iter().zip(pretty_good_measurement(&w, &st)) {
            ops[*k] = op;
        }
    }
    SourceCode::new(domain, encoder, num_blocks, SourceDecoder::Explicit(ops))
}

/// `⌈|T| log₂|T| / |U|⌉`, at least one.
pub fn covering_number(type_class_size: usize, u_size: usize) -> u64 {
    let t = type_class_size as f64;
    ((t * t.log2() / u_size as f64).ceil() as u64).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringResult {
    pub permutations: Vec<Vec<usize>>,
    pub batches_drawn: usize,
    pub l_q: u64,
    pub covered: bool,
    /// The greedy fallback produced the cover after the random batches failed.
    pub fallback: bool,
}

impl CoveringResult {
    pub fn perms(&self) -> Vec<Permutation> {
        self.permutations.iter().map(|p| Permutation::new(p.clone()).expect("stored permutation")).collect()
    }
}

/// `⋃_i π_i U`.
pub fn covered_sequences(perms: &[Permutation], u: &[Sequence]) -> HashSet<Sequence> {
    let mut s = HashSet::new();
    for pi in perms {
        for x in u {
            s.insert(apply_permutation(pi, x).expect("lengths match"));
        }
    }
    s
}

/// A permutation with `π u = x` for two sequences of the same type.
pub fn permutation_between(u: &Sequence, x: &Sequence) -> Permutation {
    let mut pos_x: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, l) in x.letters().enumerate() {
        pos_x.entry(l).or_default().push(k);
    }
    for v in pos_x.values_mut() {
        v.reverse();
    }
    let images: Vec<usize> = u.letters().map(|l| pos_x.get_mut(&l).and_then(|v| v.pop()).expect("same type")).collect();
    Permutation::new(images).expect("bijection")
}

/// Covers `T_Q^n` by permutations of `U`: batches of `2L_Q` uniform random
/// permutations until one batch covers, then a greedy fallback after
/// [`MAX_FAILED_BATCHES`] failures.
pub fn cover_type_class(u: &[Sequence], seed: u64) -> Result<CoveringResult, CodesError> {
    if u.is_empty() {
        return Err(CodesError::Invalid("empty subset".into()));
    }
    let q = type_of(&u[0], Alphabet::new(u[0].letters().max().unwrap_or(0) + 1)?)?;
    for x in u {
        if type_of(x, q.alphabet())? != q {
            return Err(CodesError::Invalid("subset is not inside one type class".into()));
        }
    }
    let uniq: Vec<Sequence> = {
        let mut seen = HashSet::new();
        u.iter().filter(|x| seen.insert((*x).clone())).cloned().collect()
    };
    let t = enumerate_type_class(&q)?;
    let n = q.n();
    let l_q = covering_number(t.len(), uniq.len());
    let batch = 2 * l_q as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for b in 0..MAX_FAILED_BATCHES {
        let perms: Vec<Permutation> = (0..batch).map(|_| Permutation::random(n, &mut rng)).collect();
        if covered_sequences(&perms, &uniq).len() == t.len() {
            return Ok(CoveringResult {
                permutations: perms.iter().map(|p| p.images().to_vec()).collect(),
                batches_drawn: b + 1,
                l_q,
                covered: true,
                fallback: false,
            });
        }
    }
    let mut uncovered: HashSet<Sequence> = t.iter().cloned().collect();
    let mut chosen: Vec<Permutation> = Vec::new();
    while !uncovered.is_empty() {
        let target = t.iter().find(|x| uncovered.contains(*x)).expect("nonempty");
        let mut cands: Vec<Permutation> = (0..GREEDY_RANDOM_CANDIDATES).map(|_| Permutation::random(n, &mut rng)).collect();
        cands.extend(uniq.iter().map(|v| permutation_between(v, target)));
        let gain = |p: &Permutation| uniq.iter().filter(|v| uncovered.contains(&apply_permutation(p, v).unwrap())).count();
        let mut best = cands.len() - 1;
        let mut best_gain = gain(&cands[best]);
        for (i, c) in cands.iter().enumerate() {
            let g = gain(c);
            if g > best_gain {
                best = i;
                best_gain = g;
            }
        }
        for v in &uniq {
            uncovered.remove(&apply_permutation(&cands[best], v).unwrap());
        }
        chosen.push(cands.swap_remove(best));
    }
    Ok(CoveringResult {
        permutations: chosen.iter().map(|p| p.images().to_vec()).collect(),
        batches_drawn: MAX_FAILED_BATCHES,
        l_q,
        covered: true,
        fallback: true,
    })
}

/// One checked inequality `lhs ≤ rhs + tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityRecord {
    pub fn le(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), lhs, rhs, tolerance, pass: lhs <= rhs + tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceFromChannelReport {
    pub n: usize,
    pub messages: usize,
    pub expurgated_messages: usize,
    pub channel_avg_error: f64,
    pub expurgated_max_error: f64,
    pub source_error: f64,
    pub l_q: u64,
    pub num_blocks: usize,
    pub batches_drawn: usize,
    pub fallback: bool,
    pub channel_rate: f64,
    /// `R = H(Q) − log₂M / n`.
    pub source_rate_parameter: f64,
    pub source_rate: f64,
    pub delta_n: f64,
    pub inequalities: Vec<InequalityRecord>,
}

impl SourceFromChannelReport {
    pub fn pass(&self) -> bool {
        self.inequalities.iter().all(|i| i.pass)
    }
}

fn code_type(code: &ChannelCode, ens: &CqEnsemble) -> Result<TypeDistribution, CodesError> {
    let q = match code.composition() {
        Some(q) => q.clone(),
        None => type_of(&code.codebook[0], ens.alphabet())?,
    };
    for c in &code.codebook {
        if type_of(c, ens.alphabet())? != q {
            return Err(CodesError::Invalid("channel code is not constant composition".into()));
        }
    }
    Ok(q)
}

/// Source code for the constant-type source from a constant-composition
/// channel code: expurgation, a permutation cover of `T_Q^n` by the kept
/// codewords, the partition `S_i = π_i U − ⋃_{ι<i} π_ι U` and the permuted
/// channel decoder on each block. Permutations with empty `S_i` are dropped.
/// A single-message code is used without expurgation.
pub fn source_from_channel(code: &ChannelCode, ens: &CqEnsemble, seed: u64) -> Result<(SourceCode, SourceFromChannelReport), CodesError> {
    let q = code_type(code, ens)?;
    let n = code.n;
    let errors = channel_error(code, ens)?;
    let (exp, kept) = if code.num_messages() >= 2 {
        expurgate(code, ens)?
    } else {
        (code.clone(), vec![0])
    };
    let exp_max = kept.iter().map(|&i| errors.per_message[i]).fold(f64::NEG_INFINITY, f64::max);
    // Repeated codewords keep their first message.
    let mut seen = HashSet::new();
    let uniq: Vec<usize> = (0..exp.num_messages()).filter(|&m| seen.insert(exp.codebook[m].clone())).collect();
    let u: Vec<Sequence> = uniq.iter().map(|&m| exp.codebook[m].clone()).collect();
    let cover = cover_type_class(&u, seed)?;
    let perms = cover.perms();
    let domain = enumerate_type_class(&q)?;
    let index: HashMap<Sequence, usize> = domain.iter().cloned().enumerate().map(|(k, x)| (x, k)).collect();
    let mut assign: Vec<Option<(usize, usize)>> = vec![None; domain.len()];
    let mut used_perms: Vec<Permutation> = Vec::new();
    for pi in &perms {
        let block = used_perms.len();
        let mut any = false;
        for (j, x) in u.iter().enumerate() {
            let y = apply_permutation(pi, x)?;
            let k = index[&y];
            if assign[k].is_none() {
                assign[k] = Some((block, uniq[j]));
                any = true;
            }
        }
        if any {
            used_perms.push(pi.clone());
        }
    }
    let encoder: Vec<usize> = assign.iter().map(|a| a.expect("cover is complete").0).collect();
    let messages: Vec<usize> = assign.iter().map(|a| a.unwrap().1).collect();
    let num_blocks = used_perms.len();
    let source = SourceCode::new(
        domain,
        encoder,
        num_blocks,
        SourceDecoder::Permuted {
            channel_decoder: exp.decoder.clone(),
            codebook: exp.codebook.clone(),
            permutations: used_perms,
            messages,
        },
    )?;
    let model = SourceModel::ConstantType(q.clone());
    let pe_s = source_error(&source, &model, ens)?;
    let h = q.entropy();
    let r = h - code.rate();
    let sl = slack(n, q.alphabet());
    let budget = (n as f64 * (r + sl.delta_n)).exp2();
    let l_q = covering_number(source.domain.len(), exp.num_messages());
    let inequalities = vec![
        InequalityRecord::le("source_error <= 2 * channel_avg_error", pe_s, 2.0 * errors.avg, EXACT_SLACK),
        InequalityRecord::le("source_error <= expurgated_max_error", pe_s, exp_max, EXACT_SLACK),
        InequalityRecord::le("expurgated_max_error <= 2 * channel_avg_error", exp_max, 2.0 * errors.avg, EXACT_SLACK),
        InequalityRecord::le("L_Q <= 2^(n(R + delta_n))", l_q as f64, budget, 0.0),
        InequalityRecord::le("num_blocks <= 2^(n(R + delta_n))", num_blocks as f64, budget, 0.0),
        InequalityRecord::le("block decoder sum - I", source.povm_excess(), 0.0, POVM_TOL),
    ];
    let report = SourceFromChannelReport {
        n,
        messages: code.num_messages(),
        expurgated_messages: exp.num_messages(),
        channel_avg_error: errors.avg,
        expurgated_max_error: exp_max,
        source_error: pe_s,
        l_q,
        num_blocks,
        batches_drawn: cover.batches_drawn,
        fallback: cover.fallback,
        channel_rate: code.rate(),
        source_rate_parameter: r,
        source_rate: source.rate(),
        delta_n: sl.delta_n,
        inequalities,
    };
    Ok((source, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFromSourceReport {
    pub n: usize,
    pub m: usize,
    pub type_class_size: usize,
    pub num_blocks: usize,
    pub block_sizes: Vec<usize>,
    pub z_tilde: Vec<usize>,
    pub selected_block: usize,
    /// The selection rule found no block and the best ratio was taken.
    pub selection_fallback: bool,
    pub source_error: f64,
    pub channel_avg_error: f64,
    pub channel_rate: f64,
    pub source_rate: f64,
    pub delta_n_prime: f64,
    pub inequalities: Vec<InequalityRecord>,
}

impl ChannelFromSourceReport {
    pub fn pass(&self) -> bool {
        self.inequalities.iter().all(|i| i.pass)
    }
}

/// Constant-composition channel code from a source code on `T_Q^n` by the
/// pigeonhole selection of a block `S_j`: `|S_j| ≥ |T|/(m|Z|)` and
/// `Q_j ≤ m/(m−1) |S_j|/|T|`, smallest such `j`.
pub fn channel_from_source(code: &SourceCode, ens: &CqEnsemble, m: usize) -> Result<(ChannelCode, ChannelFromSourceReport), CodesError> {
    if m < 2 {
        return Err(CodesError::Invalid("pigeonhole parameter m must exceed 1".into()));
    }
    let q = type_of(&code.domain[0], ens.alphabet())?;
    let t = enumerate_type_class(&q)?;
    if t.len() != code.domain.len() || code.domain.iter().any(|x| type_of(x, ens.alphabet()).map(|y| y != q).unwrap_or(true)) {
        return Err(CodesError::Invalid("source code domain must be a full type class".into()));
    }
    let n = code.n;
    let t_size = t.len() as f64;
    let z = code.num_blocks;
    let mf = m as f64;
    let errs = per_element_errors(code, ens)?;
    let total: f64 = errs.iter().sum();
    let sizes: Vec<usize> = (0..z).map(|j| code.block(j).len()).collect();
    let block_err: Vec<f64> = (0..z).map(|j| code.block(j).iter().map(|&k| errs[k]).sum()).collect();
    let z_tilde: Vec<usize> = (0..z).filter(|&j| sizes[j] as f64 * mf * z as f64 >= t_size && sizes[j] > 0).collect();
    let cond2_lhs: usize = z_tilde.iter().map(|&j| sizes[j]).sum();
    let mut selection_fallback = false;
    let selected = if total <= 0.0 {
        z_tilde[0]
    } else {
        // Q_j ≤ m/(m−1)·|S_j|/|T| in cross-multiplied form.
        match z_tilde.iter().find(|&&j| block_err[j] * t_size * (mf - 1.0) <= mf * sizes[j] as f64 * total) {
            Some(&j) => j,
            None => {
                selection_fallback = true;
                *z_tilde
                    .iter()
                    .min_by(|&&a, &&b| (block_err[a] / sizes[a] as f64).total_cmp(&(block_err[b] / sizes[b] as f64)))
                    .expect("nonempty")
            }
        }
    };
    let ks = code.block(selected);
    let codebook: Vec<Sequence> = ks.iter().map(|&k| code.domain[k].clone()).collect();
    let decoder: Vec<HermitianOperator> = ks.iter().map(|&k| code.element(k)).collect();
    let chan = ChannelCode::new(codebook, decoder, Some(q.clone()))?;
    let ce = channel_error(&chan, ens)?;
    let pe_s = total / t_size;
    let sl = slack(n, q.alphabet());
    let r = code.rate();
    let rate_floor = q.entropy() - r - mf.log2() / n as f64 - q.alphabet().size() as f64 * (n as f64 + 1.0).log2() / n as f64;
    let inequalities = vec![
        InequalityRecord::le("|T|/(m|Z|) <= |S_j|", t_size / (mf * z as f64), ks.len() as f64, 0.0),
        InequalityRecord::le("(m-1)/m |T| <= sum over Z~ of |S_j|", (mf - 1.0) / mf * t_size, cond2_lhs as f64, 0.0),
        InequalityRecord::le("channel_avg_error <= m/(m-1) * source_error", ce.avg, mf / (mf - 1.0) * pe_s, EXACT_SLACK),
        InequalityRecord::le("H(Q) - R - log(m)/n - |X|log(n+1)/n <= channel_rate", rate_floor, chan.rate(), EXACT_SLACK),
    ];
    let report = ChannelFromSourceReport {
        n,
        m,
        type_class_size: t.len(),
        num_blocks: z,
        block_sizes: sizes,
        z_tilde,
        selected_block: selected,
        selection_fallback,
        source_error: pe_s,
        channel_avg_error: ce.avg,
        channel_rate: chan.rate(),
        source_rate: r,
        delta_n_prime: sl.delta_n_prime,
        inequalities,
    };
    Ok((chan, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub source: SourceFromChannelReport,
    pub channel: ChannelFromSourceReport,
    pub original_rate: f64,
    pub final_rate: f64,
    pub original_error: f64,
    pub final_error: f64,
    pub inequalities: Vec<InequalityRecord>,
}

impl RoundTripReport {
    pub fn pass(&self) -> bool {
        self.source.pass() && self.channel.pass() && self.inequalities.iter().all(|i| i.pass)
    }
}

/// `channel_from_source(source_from_channel(C), n+1)`.
pub fn round_trip(code: &ChannelCode, ens: &CqEnsemble, seed: u64) -> Result<(ChannelCode, RoundTripReport), CodesError> {
    let n = code.n;
    let (src, rs) = source_from_channel(code, ens, seed)?;
    let (chan, rc) = channel_from_source(&src, ens, n + 1)?;
    let nf = n as f64;
    let inequalities = vec![
        InequalityRecord::le(
            "original_rate - delta_n - delta_n' <= final_rate",
            code.rate() - rs.delta_n - rc.delta_n_prime,
            chan.rate(),
            EXACT_SLACK,
        ),
        InequalityRecord::le(
            "final_error <= 2(1 + 1/n) original_error",
            rc.channel_avg_error,
            2.0 * (1.0 + 1.0 / nf) * rs.channel_avg_error,
            EXACT_SLACK,
        ),
    ];
    let report = RoundTripReport {
        original_rate: code.rate(),
        final_rate: chan.rate(),
        original_error: rs.channel_avg_error,
        final_error: rc.channel_avg_error,
        source: rs,
        channel: rc,
        inequalities,
    };
    Ok((chan, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotBound {
    /// `Γ(α)` at the optimizing order of the displayed bound.
    pub gamma: f64,
    pub p_b: f64,
    /// `min_α 2^{((α−1)/α)[Γ − log(M−1) + log(P(B)/6)]}`.
    pub display_bound: f64,
    pub display_alpha: f64,
    /// `min_α min(1, 6 ((M−1)/P(B))^{1−t} 2^{(t−1)Γ})`, `t = 2 − 1/α`, the
    /// bound the random-coding argument establishes.
    pub proof_bound: f64,
    pub proof_alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomCodeReport {
    pub n: usize,
    pub messages: usize,
    pub gamma_threshold: f64,
    pub errors: ChannelErrors,
    pub bound: OneShotBound,
}

const ALPHA_GRID: usize = 2000;

/// Bound of the one-shot random-coding argument over `α ∈ [½, 1]`, with
/// `D_t(W^{⊗n}_x ‖ (PW)^{⊗n}) = Σ_k D_t(W_{x_k} ‖ PW)` by additivity.
pub fn one_shot_bound(ens: &CqEnsemble, b: &[Sequence], m: usize) -> OneShotBound {
    let p = ens.prior();
    let pw = ens.average_state(p);
    let p_b: f64 = b.iter().map(|x| sequence_probability(x, p)).sum();
    let letters: Vec<usize> = {
        let mut s: Vec<usize> = b.iter().flat_map(|x| x.to_vec()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let gamma_at = |t: f64| {
        let mut d = vec![0.0; ens.alphabet_size()];
        for &x in &letters {
            d[x] = petz_d(ens.state(x), &pw, t);
        }
        b.iter().map(|x| x.letters().map(|l| d[l]).sum::<f64>()).fold(f64::INFINITY, f64::min)
    };
    let log_m1 = if m > 1 { ((m - 1) as f64).log2() } else { f64::NEG_INFINITY };
    let mut best = OneShotBound {
        gamma: gamma_at(1.0),
        p_b,
        display_bound: 1.0,
        display_alpha: 1.0,
        proof_bound: 1.0,
        proof_alpha: 1.0,
    };
    for i in 0..ALPHA_GRID {
        let alpha = 0.5 + 0.5 * i as f64 / ALPHA_GRID as f64;
        let t = 2.0 - 1.0 / alpha;
        let g = gamma_at(t);
        let c = (alpha - 1.0) / alpha;
        let display = if m == 1 { 0.0 } else { (c * (g - log_m1 + (p_b / 6.0).log2())).exp2() };
        let proof = if m == 1 { 0.0 } else { (6.0f64.log2() + (1.0 - t) * (log_m1 - p_b.log2() - g)).exp2().min(1.0) };
        if display < best.display_bound {
            best.display_bound = display;
            best.display_alpha = alpha;
            best.gamma = g;
        }
        if proof < best.proof_bound {
            best.proof_bound = proof;
            best.proof_alpha = alpha;
        }
    }
    best
}

/// Codewords i.i.d. from `P_B`, `Λ_m = {W^{⊗n}_{x_m} − γ (PW)^{⊗n} > 0}` with
/// `γ = (M−1)/P(B)` and the square-root normalization.
pub fn random_channel_code(ens: &CqEnsemble, b: &[Sequence], m: usize, seed: u64) -> Result<(ChannelCode, RandomCodeReport), CodesError> {
    if b.is_empty() || m == 0 {
        return Err(CodesError::Invalid("need a nonempty codeword set and at least one message".into()));
    }
    let n = b[0].len();
    check_budget("tensor dimension", ens.dim(), n)?;
    let p = ens.prior();
    let w: Vec<f64> = b.iter().map(|x| sequence_probability(x, p)).collect();
    let p_b: f64 = w.iter().sum();
    if p_b <= 0.0 {
        return Err(CodesError::Invalid("codeword set has zero probability".into()));
    }
    let dist = WeightedIndex::new(&w).map_err(|e| CodesError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codebook: Vec<Sequence> = (0..m).map(|_| b[dist.sample(&mut rng)].clone()).collect();
    let gamma = (m as f64 - 1.0) / p_b;
    let sigma = tensor_power(&ens.average_state(p), n)?;
    let decoder = threshold_square_root_decoder(&codebook, &sigma, gamma, ens)?;
    let code = ChannelCode::new(codebook, decoder, None)?;
    let errors = channel_error(&code, ens)?;
    let bound = one_shot_bound(ens, b, m);
    Ok((code, RandomCodeReport { n, messages: m, gamma_threshold: gamma, errors, bound }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneShotExperiment {
    pub trials: usize,
    pub mean_error: f64,
    pub min_error: f64,
    pub errors: Vec<f64>,
    pub bound: OneShotBound,
    pub mean_below_display: bool,
    pub any_below_display: bool,
    pub mean_below_proof: bool,
}

/// Mean error of `trials` seeded random codes against the one-shot bounds.
pub fn one_shot_experiment(ens: &CqEnsemble, b: &[Sequence], m: usize, trials: usize, seed: u64) -> Result<OneShotExperiment, CodesError> {
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| random_channel_code(ens, b, m, trial_seed(seed, i as u64)).map(|(_, r)| r.errors.avg))
        .collect::<Result<_, _>>()?;
    let mean = errors.iter().sum::<f64>() / trials as f64;
    let min = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let bound = one_shot_bound(ens, b, m);
    Ok(OneShotExperiment {
        trials,
        mean_error: mean,
        min_error: min,
        mean_below_display: mean <= bound.display_bound + EXACT_SLACK,
        any_below_display: min <= bound.display_bound + EXACT_SLACK,
        mean_below_proof: mean <= bound.proof_bound + EXACT_SLACK,
        errors,
        bound,
    })
}

/// Common eigenbasis of commuting side-information states with the
/// per-letter outcome distributions `p(y|x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonBasis {
    pub basis: CMatrix,
    pub rows: Vec<Vec<f64>>,
}

pub fn common_eigenbasis(ens: &CqEnsemble) -> Result<CommonBasis, CodesError> {
    if !ens.is_commuting(1e-9) {
        return Err(CodesError::NonCommuting);
    }
    let d = ens.dim();
    // A generic combination separates every joint eigenspace.
    let mut mix = HermitianOperator::zeros(d);
    for (x, s) in ens.states().iter().enumerate() {
        let c = 1.0 + ((x as f64 + 1.0) * std::f64::consts::SQRT_2).fract() + (x as f64) * 0.7548776662466927;
        mix = mix.add(&s.as_hermitian().scale(c));
    }
    let spec = mix.eigh().map_err(|e| CodesError::Invalid(e.to_string()))?;
    let u = spec.eigenvectors.clone();
    let mut rows = Vec::new();
    for s in ens.states() {
        let m = u.adjoint() * s.matrix() * &u;
        for i in 0..d {
            for j in 0..d {
                if i != j && m[(i, j)].norm() > 1e-8 {
                    return Err(CodesError::NonCommuting);
                }
            }
        }
        rows.push((0..d).map(|i| m[(i, i)].re.max(0.0)).collect());
    }
    Ok(CommonBasis { basis: u, rows })
}

fn joint_table(basis: &CommonBasis, domain: &[Sequence], weights: &[f64]) -> Result<(Vec<Vec<f64>>, usize), CodesError> {
    let d = basis.rows[0].len();
    let n = domain[0].len();
    let y_count = check_budget("outcome count", d, n)?;
    let dims = vec![d; n];
    let table = domain
        .iter()
        .zip(weights)
        .map(|(x, &w)| {
            (0..y_count)
                .map(|y| {
                    let ys = crate::linalg::unflatten(y, &dims);
                    w * x.letters().zip(&ys).map(|(l, &yk)| basis.rows[l][yk]).product::<f64>()
                })
                .collect()
        })
        .collect();
    Ok((table, y_count))
}

fn map_error_from_table(table: &[Vec<f64>], encoder: &[usize], num_blocks: usize, y_count: usize) -> f64 {
    let mut best = vec![0.0; num_blocks * y_count];
    for (k, row) in table.iter().enumerate() {
        let z = encoder[k];
        for (y, &v) in row.iter().enumerate() {
            let b = &mut best[z * y_count + y];
            if v > *b {
                *b = v;
            }
        }
    }
    let total: f64 = table.iter().flatten().sum();
    total - best.iter().sum::<f64>()
}

/// Exact minimal error for a given encoder with commuting side information:
/// MAP decoding on each block.
pub fn map_oracle(ens: &CqEnsemble, domain: &[Sequence], weights: &[f64], encoder: &[usize]) -> Result<f64, CodesError> {
    let basis = common_eigenbasis(ens)?;
    let (table, y_count) = joint_table(&basis, domain, weights)?;
    let blocks = encoder.iter().max().map_or(1, |m| m + 1);
    Ok(map_error_from_table(&table, encoder, blocks, y_count))
}

/// Source code with MAP projectors in the common eigenbasis; ties go to the
/// smallest domain index.
pub fn map_source_code(
    ens: &CqEnsemble,
    model: &SourceModel,
    domain: Vec<Sequence>,
    encoder: Vec<usize>,
    num_blocks: usize,
) -> Result<SourceCode, CodesError> {
    let basis = common_eigenbasis(ens)?;
    let weights: Vec<f64> = domain.iter().map(|x| model.weight(x)).collect();
    let (table, y_count) = joint_table(&basis, &domain, &weights)?;
    let n = domain[0].len();
    let mut u_n = basis.basis.clone();
    for _ in 1..n {
        u_n = u_n.kronecker(&basis.basis);
    }
    let mut diag = vec![vec![0.0; y_count]; domain.len()];
    for z in 0..num_blocks {
        let ks: Vec<usize> = (0..domain.len()).filter(|&k| encoder[k] == z).collect();
        for y in 0..y_count {
            let mut arg: Option<usize> = None;
            for &k in &ks {
                if arg.is_none_or(|a| table[k][y] > table[a][y]) {
                    arg = Some(k);
                }
            }
            if let Some(k) = arg {
                diag[k][y] = 1.0;
            }
        }
    }
    let ops = diag.iter().map(|dg| HermitianOperator::from_real_diagonal(dg).conjugate_by(&u_n)).collect();
    SourceCode::new(domain, encoder, num_blocks, SourceDecoder::Explicit(ops))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub error: f64,
    pub encoder: Vec<usize>,
    pub encoders_searched: u64,
}

/// `|Z| = max(1, ⌊2^{nR}⌋)`.
pub fn blocks_for_rate(n: usize, rate: f64) -> usize {
    ((n as f64 * rate).exp2() + 1e-9).floor().max(1.0) as usize
}

/// Exhaustive minimum of [`map_oracle`] over all encoders onto `num_blocks`
/// blocks; ties go to the smallest encoder in base-`|Z|` order.
pub fn brute_force_optimal_source_error(ens: &CqEnsemble, model: &SourceModel, num_blocks: usize) -> Result<BruteForceResult, CodesError> {
    if model.n() > 3 {
        return Err(CodesError::Budget { what: "brute-force blocklength", needed: model.n().to_string(), limit: 3 });
    }
    let domain = model.domain()?;
    let z = num_blocks.max(1) as u64;
    let count = z.checked_pow(domain.len() as u32).filter(|&c| c <= BRUTE_FORCE_BUDGET).ok_or(CodesError::Budget {
        what: "encoder functions",
        needed: format!("{z}^{}", domain.len()),
        limit: BRUTE_FORCE_BUDGET,
    })?;
    let basis = common_eigenbasis(ens)?;
    let weights: Vec<f64> = domain.iter().map(|x| model.weight(x)).collect();
    let (table, y_count) = joint_table(&basis, &domain, &weights)?;
    let decode = |mut idx: u64| -> Vec<usize> {
        let mut e = vec![0; domain.len()];
        for v in e.iter_mut().rev() {
            *v = (idx % z) as usize;
            idx /= z;
        }
        e
    };
    let (error, idx) = (0..count)
        .into_par_iter()
        .map(|i| (map_error_from_table(&table, &decode(i), z as usize, y_count), i))
        .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok(BruteForceResult { error, encoder: decode(idx), encoders_searched: count })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorInequalityReport {
    pub trials: usize,
    pub hayashi_nagaoka_min_slack: f64,
    pub audenaert_min_slack: f64,
    pub hayashi_nagaoka_pass: bool,
    pub audenaert_pass: bool,
}

pub const HN_SLACK: f64 = 1e-9;
pub const AUDENAERT_SLACK: f64 = 1e-10;

/// Minimum eigenvalue of `2(I − Λ_m) + 4 Σ_{i≠m} Λ_i − (I − Π_m)` over `m`.
pub fn hayashi_nagaoka_slack(lambdas: &[HermitianOperator]) -> f64 {
    let d = lambdas[0].dim();
    let id = HermitianOperator::identity(d);
    let pis = square_root_measurement(lambdas);
    let total = lambdas.iter().fold(HermitianOperator::zeros(d), |acc, l| acc.add(l));
    (0..lambdas.len())
        .map(|m| {
            let others = total.sub(&lambdas[m]);
            let rhs = id.sub(&lambdas[m]).scale(2.0).add(&others.scale(4.0));
            rhs.sub(&id.sub(&pis[m])).min_eigenvalue()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `Tr[A^t B^{1−t}] − (Tr[A{A−B≤0}] + Tr[B{A−B>0}])`.
pub fn audenaert_slack(a: &HermitianOperator, b: &HermitianOperator, t: f64) -> f64 {
    let p = positive_part_projector(&a.sub(b));
    let id = HermitianOperator::identity(a.dim());
    let lhs = a.trace_product(&id.sub(&p)) + b.trace_product(&p);
    frac_power(a, t).trace_product(&frac_power(b, 1.0 - t)) - lhs
}

/// Random instances with `d ∈ {2,3,4}`: random projectors for the
/// Hayashi–Nagaoka inequality and random PSD pairs (some rank deficient) on a
/// `t` grid of step 0.05 for Audenaert's inequality.
pub fn operator_inequality_checks(seed: u64, trials: usize) -> OperatorInequalityReport {
    use crate::linalg::random;
    let (hn, au): (Vec<f64>, Vec<f64>) = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i as u64));
            let d = 2 + i % 3;
            let k = rng.gen_range(2..=4);
            let lambdas: Vec<HermitianOperator> =
                (0..k).map(|_| {
                    let r = rng.gen_range(0..=d);
                    random::projector(d, r, &mut rng)
                }).collect();
            let hn = hayashi_nagaoka_slack(&lambdas);
            let ra = rng.gen_range(1..=d);
            let rb = rng.gen_range(1..=d);
            let a = random::density_of_rank(d, ra, &mut rng).as_hermitian().scale(rng.gen_range(0.1..3.0));
            let b = random::density_of_rank(d, rb, &mut rng).as_hermitian().scale(rng.gen_range(0.1..3.0));
            let au = (0..=20).map(|j| audenaert_slack(&a, &b, j as f64 / 20.0)).fold(f64::INFINITY, f64::min);
            (hn, au)
        })
        .unzip();
    let hn_min = hn.iter().cloned().fold(f64::INFINITY, f64::min);
    let au_min = au.iter().cloned().fold(f64::INFINITY, f64::min);
    OperatorInequalityReport {
        trials,
        hayashi_nagaoka_min_slack: hn_min,
        audenaert_min_slack: au_min,
        hayashi_nagaoka_pass: hn_min >= -HN_SLACK,
        audenaert_pass: au_min >= -AUDENAERT_SLACK,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeDecompositionReport {
    pub n: usize,
    pub types: usize,
    pub max_norm_difference: f64,
    pub pass: bool,
}

pub const TYPE_DECOMPOSITION_TOL: f64 = 1e-9;

/// `ρ_XB^{⊗n}` (reordered to `X^n B^n`) against
/// `Σ_Q Pr[x ∈ T_Q] (1/|T_Q|) Σ_{x∈T_Q} |x⟩⟨x| ⊗ ρ^x`.
pub fn type_decomposition_check(ens: &CqEnsemble, n: usize) -> Result<TypeDecompositionReport, CodesError> {
    let k = ens.alphabet_size();
    let d = ens.dim();
    let total = check_budget("joint dimension", k * d, n)?;
    let joint = ens.joint_state();
    let mut lhs = joint.matrix().clone();
    for _ in 1..n {
        lhs = lhs.kronecker(joint.matrix());
    }
    let dims: Vec<usize> = (0..2 * n).map(|i| if i % 2 == 0 { k } else { d }).collect();
    let perm: Vec<usize> = (0..2 * n).map(|i| if i % 2 == 0 { i / 2 } else { n + i / 2 }).collect();
    let lhs = permute_subsystems(&lhs, &dims, &perm);
    let alphabet = ens.alphabet();
    let types = crate::cqtypes::enumerate_types(n, alphabet)?;
    let bdim = total / k.pow(n as u32);
    let mut rhs = CMatrix::zeros(total, total);
    for q in &types {
        let pr = type_class_probability(q, ens.prior());
        let class = enumerate_type_class(q)?;
        let c = pr / class.len() as f64;
        for x in &class {
            let rho = tensor_state(x, ens)?;
            let i = x.index(alphabet);
            let block = rho.matrix() * C64::new(c, 0.0);
            let mut view = rhs.view_mut((i * bdim, i * bdim), (bdim, bdim));
            view += block;
        }
    }
    let diff = crate::linalg::max_abs(&(lhs - rhs));
    Ok(TypeDecompositionReport { n, types: types.len(), max_norm_difference: diff, pass: diff <= TYPE_DECOMPOSITION_TOL })
}

/// Largest deviation between the index-permutation evaluation of a permuted
/// source decoder and explicit conjugation by `V_π`, together with
/// `‖V_π ρ^u V_π† − ρ^{πu}‖_max`. Requires `n ≤ 3`.
pub fn permutation_realization_check(code: &SourceCode, ens: &CqEnsemble) -> Result<f64, CodesError> {
    if code.n > 3 {
        return Err(CodesError::Budget { what: "explicit permutation unitaries", needed: code.n.to_string(), limit: 3 });
    }
    let SourceDecoder::Permuted { channel_decoder, codebook, permutations, messages } = &code.decoder else {
        return Err(CodesError::Invalid("decoder is not permutation based".into()));
    };
    let d = ens.dim();
    let mut worst: f64 = 0.0;
    for (k, x) in code.domain.iter().enumerate() {
        let pi = &permutations[code.encoder[k]];
        let v = permutation_unitary(pi, d);
        let lam = channel_decoder[messages[k]].conjugate_by(&v);
        let rho_x = tensor_state(x, ens)?;
        worst = worst.max((lam.trace_product(rho_x.as_hermitian()) - code.success(k, ens)?).abs());
        let rho_u = tensor_state(&codebook[messages[k]], ens)?;
        let moved = rho_u.as_hermitian().conjugate_by(&v);
        worst = worst.max(crate::linalg::max_abs(&(moved.matrix() - rho_x.matrix())));
        worst = worst.max(crate::linalg::max_abs(&(lam.matrix() - code.element(k).matrix())));
    }
    Ok(worst)
}

/// `k` distinct sequences drawn uniformly from `T_Q^n`.
pub fn random_type_class_subset(q: &TypeDistribution, k: usize, seed: u64) -> Result<Vec<Sequence>, CodesError> {
    let mut class = enumerate_type_class(q)?;
    if k == 0 || k > class.len() {
        return Err(CodesError::Invalid(format!("need 1 <= k <= |T_Q^n| = {}", class.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    class.shuffle(&mut rng);
    class.truncate(k);
    Ok(class)
}

/// A constant-composition channel code with `M` distinct codewords drawn
/// uniformly from `T_Q^n` and the default decoder.
pub fn random_constant_composition_code(
    q: &TypeDistribution,
    m: usize,
    ens: &CqEnsemble,
    seed: u64,
) -> Result<ChannelCode, CodesError> {
    let class = random_type_class_subset(q, m, seed)?;
    let decoder = default_decoder(&class, ens)?;
    ChannelCode::new(class, decoder, Some(q.clone()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityTrial {
    pub seed: u64,
    pub channel_messages: usize,
    pub source_blocks: usize,
    pub inequalities: Vec<InequalityRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityExperimentReport {
    pub n: usize,
    pub rate: f64,
    pub type_counts: Vec<usize>,
    pub classical: bool,
    pub trials: Vec<DualityTrial>,
    pub pass: bool,
}

/// Checks both building-block inequalities of the operational duality on
/// concrete codes. The channel side uses random constant-composition codes of
/// rate `H(Q) − R` with the default decoder; the source side uses random
/// encoders onto `⌊2^{nR}⌋` blocks with pretty-good measurements. For
/// commuting side information the optimal errors are replaced by
/// brute-force and MAP values.
pub fn duality_inequality_experiment(
    ens: &CqEnsemble,
    q: &TypeDistribution,
    rate: f64,
    seeds: usize,
    master_seed: u64,
) -> Result<DualityExperimentReport, CodesError> {
    let n = q.n();
    let t = enumerate_type_class(q)?;
    let h = q.entropy();
    let classical = ens.is_commuting(1e-9);
    let model = SourceModel::ConstantType(q.clone());
    let m_chan = (((n as f64) * (h - rate)).exp2() + 1e-9).floor().clamp(1.0, t.len() as f64) as usize;
    let z_src = blocks_for_rate(n, rate).min(t.len());
    let nf = n as f64;
    let trials = (0..seeds)
        .into_par_iter()
        .map(|i| -> Result<DualityTrial, CodesError> {
            let seed = trial_seed(master_seed, i as u64);
            let mut ineq = Vec::new();
            let cc = random_constant_composition_code(q, m_chan, ens, seed)?;
            let pe_c = channel_error(&cc, ens)?.avg;
            let (cs, rs) = source_from_channel(&cc, ens, seed)?;
            ineq.extend(rs.inequalities.iter().cloned());
            if classical {
                let bf = brute_force_optimal_source_error(ens, &model, cs.num_blocks())?;
                ineq.push(InequalityRecord::le("brute_force_source_error <= 2 * channel_avg_error", bf.error, 2.0 * pe_c, EXACT_SLACK));
            }
            let src = random_source_code(&model, z_src, ens, seed ^ 0x5eed)?;
            let (_, rc) = channel_from_source(&src, ens, n + 1)?;
            ineq.extend(rc.inequalities.iter().cloned());
            if classical {
                let bf = brute_force_optimal_source_error(ens, &model, z_src)?;
                let opt = map_source_code(ens, &model, model.domain()?, bf.encoder.clone(), z_src)?;
                let (cc_opt, r_opt) = channel_from_source(&opt, ens, n + 1)?;
                ineq.extend(r_opt.inequalities.iter().cloned());
                let uni = vec![1.0 / cc_opt.num_messages() as f64; cc_opt.num_messages()];
                let enc = vec![0; cc_opt.num_messages()];
                let map_c = map_oracle(ens, cc_opt.codebook(), &uni, &enc)?;
                ineq.push(InequalityRecord::le(
                    "map_channel_error <= (1 + 1/n) * brute_force_source_error",
                    map_c,
                    (1.0 + 1.0 / nf) * bf.error,
                    EXACT_SLACK,
                ));
            }
            Ok(DualityTrial { seed, channel_messages: m_chan, source_blocks: z_src, inequalities: ineq })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pass = trials.iter().all(|t| t.inequalities.iter().all(|i| i.pass));
    Ok(DualityExperimentReport { n, rate, type_counts: q.counts().to_vec(), classical, trials, pass })
}

/// `H(Q)` of the empirical distribution of a codebook's first codeword.
pub fn codebook_entropy(code: &ChannelCode, alphabet: Alphabet) -> Result<f64, CodesError> {
    Ok(shannon_entropy(&type_of(&code.codebook[0], alphabet)?.probabilities()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random;

    fn seq(v: &[usize], k: usize) -> Sequence {
        Sequence::new(v.to_vec(), Alphabet::new(k).unwrap()).unwrap()
    }

    fn qubit_ensemble(seed: u64, pure: bool) -> CqEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = (0..2).map(|_| if pure { random::pure(2, &mut rng) } else { random::density(2, &mut rng) }).collect();
        CqEnsemble::new(vec![0.5, 0.5], states).unwrap()
    }

    fn basis_ensemble() -> CqEnsemble {
        CqEnsemble::classical(vec![0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn tensor_state_examples() {
        let ens = basis_ensemble();
        let r = tensor_state(&seq(&[0, 0, 0], 2), &ens).unwrap();
        assert!((r.matrix()[(0, 0)].re - 1.0).abs() < 1e-15 && (r.as_hermitian().trace() - 1.0).abs() < 1e-15);
        let q = qubit_ensemble(1, false);
        let single = tensor_state(&seq(&[1], 2), &q).unwrap();
        assert_eq!(single.matrix(), q.state(1).matrix());
        let pi = Permutation::new(vec![2, 0, 1]).unwrap();
        let x = seq(&[0, 1, 1], 2);
        let moved = permute_operator(tensor_state(&x, &q).unwrap().as_hermitian(), &pi, 2);
        let direct = tensor_state(&apply_permutation(&pi, &x).unwrap(), &q).unwrap();
        assert!(crate::linalg::max_abs(&(moved.matrix() - direct.matrix())) < 1e-14);
        let big = CqEnsemble::classical(vec![1.0], &[vec![0.5, 0.5]]).unwrap();
        assert!(tensor_state(&seq(&[0; 13], 1), &big).unwrap_err().is_budget());
    }

    #[test]
    fn channel_error_examples() {
        let ens = basis_ensemble();
        let book = vec![seq(&[0], 2), seq(&[1], 2)];
        let proj = vec![HermitianOperator::from_real_diagonal(&[1.0, 0.0]), HermitianOperator::from_real_diagonal(&[0.0, 1.0])];
        let c = ChannelCode::new(book.clone(), proj, None).unwrap();
        assert_eq!(channel_error(&c, &ens).unwrap().avg, 0.0);
        let zero = ChannelCode::new(book.clone(), vec![HermitianOperator::zeros(2); 2], None).unwrap();
        assert_eq!(channel_error(&zero, &ens).unwrap().avg, 1.0);
        let q = qubit_ensemble(2, false);
        let hel = helstrom_decoder(q.state(0), q.state(1), 0.5);
        let c = ChannelCode::new(book, hel.to_vec(), None).unwrap();
        let expected = 0.5 * (1.0 - 0.5 * trace_norm(&q.state(0).as_hermitian().sub(q.state(1).as_hermitian())));
        assert!((channel_error(&c, &q).unwrap().avg - expected).abs() < 1e-12);
        assert!((helstrom_error(q.state(0), q.state(1), 0.5) - expected).abs() < 1e-12);
        let over = vec![HermitianOperator::identity(2), HermitianOperator::identity(2)];
        assert!(ChannelCode::new(vec![seq(&[0], 2), seq(&[1], 2)], over, None).is_err());
    }

    #[test]
    fn expurgation_examples() {
        let ens = basis_ensemble();
        let book = vec![seq(&[0], 2), seq(&[1], 2)];
        let dec = vec![HermitianOperator::from_real_diagonal(&[1.0, 0.0]), HermitianOperator::zeros(2)];
        let c = ChannelCode::new(book, dec, None).unwrap();
        let (e, kept) = expurgate(&c, &ens).unwrap();
        assert_eq!(kept, vec![0]);
        assert_eq!(channel_error(&e, &ens).unwrap().max, 0.0);
        let one = ChannelCode::new(vec![seq(&[0], 2)], vec![HermitianOperator::identity(2)], None).unwrap();
        assert!(expurgate(&one, &ens).is_err());
        let q = TypeDistribution::new(vec![2, 2]).unwrap();
        let ens = qubit_ensemble(3, true);
        let code = random_constant_composition_code(&q, 5, &ens, 7).unwrap();
        let errs = channel_error(&code, &ens).unwrap();
        let (e, _) = expurgate(&code, &ens).unwrap();
        assert_eq!(e.num_messages(), 2);
        assert!(channel_error(&e, &ens).unwrap().max <= 2.0 * errs.avg + EXACT_SLACK);
        assert_eq!(e.composition(), Some(&q));
    }

    #[test]
    fn covering_examples() {
        let q = TypeDistribution::new(vec![2, 2]).unwrap();
        let t = enumerate_type_class(&q).unwrap();
        let full = cover_type_class(&t, 1).unwrap();
        assert!(full.covered && full.batches_drawn == 1);
        assert_eq!(full.l_q, (6f64.log2()).ceil() as u64);
        let single = cover_type_class(&t[..1], 2).unwrap();
        assert_eq!(single.l_q, (6.0 * 6f64.log2()).ceil() as u64);
        let perms = single.perms();
        assert_eq!(covered_sequences(&perms, &t[..1]).len(), 6);
        let x = seq(&[1, 0, 0, 1], 2);
        let p = permutation_between(&t[0], &x);
        assert_eq!(apply_permutation(&p, &t[0]).unwrap(), x);
    }

    #[test]
    fn source_error_examples() {
        let ens = basis_ensemble();
        let model = SourceModel::Iid { prior: vec![0.5, 0.5], n: 1 };
        let domain = model.domain().unwrap();
        let ops = vec![HermitianOperator::from_real_diagonal(&[1.0, 0.0]), HermitianOperator::from_real_diagonal(&[0.0, 1.0])];
        let code = SourceCode::new(domain.clone(), vec![0, 0], 1, SourceDecoder::Explicit(ops)).unwrap();
        assert_eq!(source_error(&code, &model, &ens).unwrap(), 0.0);
        let zero = SourceCode::new(domain, vec![0, 1], 2, SourceDecoder::Explicit(vec![HermitianOperator::zeros(2); 2])).unwrap();
        assert_eq!(source_error(&zero, &model, &ens).unwrap(), 1.0);
    }

    #[test]
    fn source_from_channel_perfect_and_exhaustive() {
        let ens = basis_ensemble();
        let q = TypeDistribution::new(vec![2, 1]).unwrap();
        let t = enumerate_type_class(&q).unwrap();
        let ops: Vec<HermitianOperator> = t
            .iter()
            .map(|x| {
                let r = tensor_state(x, &ens).unwrap();
                r.as_hermitian().clone()
            })
            .collect();
        let code = ChannelCode::new(t.clone(), ops, Some(q.clone())).unwrap();
        let (src, rep) = source_from_channel(&code, &ens, 3).unwrap();
        assert_eq!(rep.source_error, 0.0);
        assert!(rep.pass(), "{rep:?}");
        assert!(permutation_realization_check(&src, &ens).unwrap() < 1e-12);
        let qens = qubit_ensemble(5, false);
        let code = random_constant_composition_code(&q, 3, &qens, 1).unwrap();
        let (src, rep) = source_from_channel(&code, &qens, 4).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!(permutation_realization_check(&src, &qens).unwrap() < 1e-12);
    }

    #[test]
    fn source_from_channel_n4() {
        let ens = qubit_ensemble(11, true);
        let q = TypeDistribution::new(vec![2, 2]).unwrap();
        let code = random_constant_composition_code(&q, 4, &ens, 9).unwrap();
        let (src, rep) = source_from_channel(&code, &ens, 10).unwrap();
        assert!(rep.pass(), "{rep:?}");
        let (_, rc) = channel_from_source(&src, &ens, 5).unwrap();
        assert!(rc.pass(), "{rc:?}");
        let (_, rt) = round_trip(&code, &ens, 10).unwrap();
        assert!(rt.pass(), "{rt:?}");
    }

    #[test]
    fn channel_from_source_single_block() {
        let ens = qubit_ensemble(12, false);
        let q = TypeDistribution::new(vec![1, 2]).unwrap();
        let model = SourceModel::ConstantType(q.clone());
        let src = random_source_code(&model, 1, &ens, 3).unwrap();
        let (chan, rep) = channel_from_source(&src, &ens, 4).unwrap();
        assert_eq!(chan.num_messages(), 3);
        assert!(rep.pass());
        assert!((rep.channel_avg_error - rep.source_error).abs() < 1e-12);
    }

    #[test]
    fn random_code_single_message() {
        let ens = qubit_ensemble(13, false);
        let b = enumerate_sequences(2, Alphabet::new(2).unwrap()).unwrap();
        let (_, rep) = random_channel_code(&ens, &b, 1, 0).unwrap();
        assert!(rep.errors.avg.abs() < 1e-12);
        let ortho = basis_ensemble();
        let q = TypeDistribution::new(vec![1, 1]).unwrap();
        let t = enumerate_type_class(&q).unwrap();
        let (_, rep) = random_channel_code(&ortho, &t, 2, 5).unwrap();
        assert!(rep.errors.per_message.iter().all(|e| e.abs() < 1e-12 || (e - 1.0).abs() < 1e-12));
    }

    #[test]
    fn map_oracle_examples() {
        let ens = basis_ensemble();
        let model = SourceModel::Iid { prior: vec![0.5, 0.5], n: 2 };
        let domain = model.domain().unwrap();
        let w: Vec<f64> = domain.iter().map(|x| model.weight(x)).collect();
        assert_eq!(map_oracle(&ens, &domain, &w, &[0, 0, 0, 0]).unwrap(), 0.0);
        let flat = CqEnsemble::classical(vec![0.5, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((map_oracle(&flat, &domain, &w, &[0, 0, 1, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((map_oracle(&flat, &domain, &w, &[0, 0, 0, 0]).unwrap() - 0.75).abs() < 1e-15);
        let q = qubit_ensemble(1, false);
        assert_eq!(map_oracle(&q, &domain, &w, &[0, 0, 0, 0]), Err(CodesError::NonCommuting));
    }

    #[test]
    fn map_code_matches_oracle() {
        let ens = CqEnsemble::classical(vec![0.3, 0.7], &[vec![0.8, 0.2], vec![0.35, 0.65]]).unwrap();
        let model = SourceModel::Iid { prior: vec![0.3, 0.7], n: 2 };
        let domain = model.domain().unwrap();
        let w: Vec<f64> = domain.iter().map(|x| model.weight(x)).collect();
        let enc = vec![0, 1, 1, 0];
        let code = map_source_code(&ens, &model, domain.clone(), enc.clone(), 2).unwrap();
        let a = source_error(&code, &model, &ens).unwrap();
        let b = map_oracle(&ens, &domain, &w, &enc).unwrap();
        assert!((a - b).abs() < 1e-12);
        // Exhaustive decoders over a block of two sequences and four outcomes.
        let basis = common_eigenbasis(&ens).unwrap();
        let (table, _) = joint_table(&basis, &domain, &w).unwrap();
        let mut best = f64::INFINITY;
        for assign in 0..(1u32 << 8) {
            let mut succ = 0.0;
            for y in 0..4 {
                for (z, pair) in [[0usize, 3usize], [1, 2]].iter().enumerate() {
                    let pick = pair[((assign >> (2 * y + z)) & 1) as usize];
                    succ += table[pick][y];
                }
            }
            best = best.min(1.0 - succ);
        }
        assert!((best - b).abs() < 1e-12);
    }

    #[test]
    fn brute_force_examples() {
        let ens = CqEnsemble::classical(vec![0.5, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let model = SourceModel::Iid { prior: vec![0.5, 0.5], n: 2 };
        assert!(brute_force_optimal_source_error(&ens, &model, 4).unwrap().error.abs() < 1e-15);
        assert!((brute_force_optimal_source_error(&ens, &model, 1).unwrap().error - 0.75).abs() < 1e-15);
        assert_eq!(blocks_for_rate(2, 1.0), 4);
        let big = SourceModel::Iid { prior: vec![0.5, 0.5], n: 3 };
        assert!(brute_force_optimal_source_error(&ens, &big, 8).unwrap_err().is_budget());
    }

    #[test]
    fn operator_inequalities_hold() {
        let r = operator_inequality_checks(1, 60);
        assert!(r.hayashi_nagaoka_pass && r.audenaert_pass, "{r:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random::psd(3, 1.0, &mut rng);
        assert!(audenaert_slack(&a, &a, 0.3) > -1e-12);
        let a = HermitianOperator::from_real_diagonal(&[0.2, 0.9]);
        let b = HermitianOperator::from_real_diagonal(&[0.5, 0.1]);
        let t = 0.4f64;
        let classical = 0.2f64.powf(t) * 0.5f64.powf(1.0 - t) + 0.9f64.powf(t) * 0.1f64.powf(1.0 - t) - (0.2 + 0.1);
        assert!((audenaert_slack(&a, &b, t) - classical).abs() < 1e-12);
    }

    #[test]
    fn type_decomposition_small() {
        let ens = CqEnsemble::new(vec![0.3, 0.7], qubit_ensemble(4, false).states().to_vec()).unwrap();
        for n in 1..=3 {
            let r = type_decomposition_check(&ens, n).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn permutation_unitary_conjugation() {
        let ens = qubit_ensemble(6, false);
        let pi = Permutation::new(vec![1, 2, 0]).unwrap();
        let x = seq(&[0, 0, 1], 2);
        let v = permutation_unitary(&pi, 2);
        let moved = tensor_state(&x, &ens).unwrap().as_hermitian().conjugate_by(&v);
        let direct = tensor_state(&apply_permutation(&pi, &x).unwrap(), &ens).unwrap();
        assert!(crate::linalg::max_abs(&(moved.matrix() - direct.matrix())) < 1e-14);
    }

    #[test]
    fn randomized_encoder_mixture() {
        let ens = qubit_ensemble(7, false);
        let q = TypeDistribution::new(vec![1, 1]).unwrap();
        let model = SourceModel::ConstantType(q);
        let a = random_source_code(&model, 1, &ens, 1).unwrap();
        let b = random_source_code(&model, 2, &ens, 2).unwrap();
        let (mix, min) = randomized_source_error(&[a, b], &[0.4, 0.6], &model, &ens).unwrap();
        assert!(min <= mix + 1e-15);
    }

    #[test]
    fn duality_experiment_classical_n2() {
        let ens = CqEnsemble::classical(vec![0.5, 0.5], &[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let q = TypeDistribution::new(vec![1, 1]).unwrap();
        let r = duality_inequality_experiment(&ens, &q, 0.5, 3, 1).unwrap();
        assert!(r.classical && r.pass, "{r:?}");
        let r = duality_inequality_experiment(&ens, &q, 1.0, 2, 1).unwrap();
        assert!(r.pass);
    }
}
