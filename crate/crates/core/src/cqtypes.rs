//! Method-of-types combinatorics over a finite alphabet `{0, …, |X|−1}`.
//!
//! Logarithms are base 2 throughout.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

pub const MAX_ALPHABET: usize = 16;
pub const TYPE_BUDGET: u64 = 10_000_000;
pub const SEQUENCE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypesError {
    #[error("alphabet size {0} outside 1..={MAX_ALPHABET}")]
    InvalidAlphabet(usize),
    #[error("blocklength must be at least 1")]
    EmptyBlock,
    #[error("letter {letter} outside alphabet of size {size}")]
    LetterOutOfRange { letter: usize, size: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("{what}: {needed} exceeds budget {limit}")]
    BudgetExceeded { what: &'static str, needed: String, limit: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self, TypesError> {
        if size == 0 || size > MAX_ALPHABET {
            return Err(TypesError::InvalidAlphabet(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// A sequence `x = (x₁, …, x_n)` over the alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence {
    letters: Vec<u8>,
}

impl Sequence {
    pub fn new(letters: Vec<usize>, alphabet: Alphabet) -> Result<Self, TypesError> {
        if let Some(&letter) = letters.iter().find(|&&l| l >= alphabet.size()) {
            return Err(TypesError::LetterOutOfRange { letter, size: alphabet.size() });
        }
        Ok(Self { letters: letters.into_iter().map(|l| l as u8).collect() })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letter(&self, k: usize) -> usize {
        self.letters[k] as usize
    }

    pub fn letters(&self) -> impl Iterator<Item = usize> + '_ {
        self.letters.iter().map(|&l| l as usize)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.letters().collect()
    }

    /// Base-|X| index with the first letter most significant.
    pub fn index(&self, alphabet: Alphabet) -> usize {
        self.letters().fold(0, |acc, l| acc * alphabet.size() + l)
    }
}

/// A bijection of `{0, …, n−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, TypesError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(TypesError::NotAPermutation(n));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self { images: (0..n).collect() }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn image(&self, k: usize) -> usize {
        self.images[k]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (k, &p) in self.images.iter().enumerate() {
            inv[p] = k;
        }
        Self { images: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self { images: other.images.iter().map(|&k| self.images[k]).collect() }
    }
}

/// `y = πx` with `y_{π(k)} = x_k`.
pub fn apply_permutation(pi: &Permutation, x: &Sequence) -> Result<Sequence, TypesError> {
    if pi.len() != x.len() {
        return Err(TypesError::LengthMismatch { expected: pi.len(), found: x.len() });
    }
    let mut y = vec![0u8; x.len()];
    for (k, &l) in x.letters.iter().enumerate() {
        y[pi.images[k]] = l;
    }
    Ok(Sequence { letters: y })
}

/// A type `Q ∈ 𝒫_n(X)` stored by its letter counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeDistribution {
    counts: Vec<usize>,
}

impl TypeDistribution {
    pub fn new(counts: Vec<usize>) -> Result<Self, TypesError> {
        Alphabet::new(counts.len())?;
        if counts.iter().sum::<usize>() == 0 {
            return Err(TypesError::EmptyBlock);
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet { size: self.counts.len() }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probabilities())
    }

    /// The lexicographically first sequence of this type.
    pub fn first_sequence(&self) -> Sequence {
        let mut letters = Vec::with_capacity(self.n());
        for (x, &c) in self.counts.iter().enumerate() {
            letters.extend(std::iter::repeat_n(x as u8, c));
        }
        Sequence { letters }
    }
}

/// `H(P) = −Σ P log₂ P` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

/// `D(Q‖P)` in bits, `+∞` when `Q` is not absolutely continuous w.r.t. `P`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in q.iter().zip(p) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).log2();
        }
    }
    acc
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    r
}

/// `|𝒫_n(X)| = C(n+|X|−1, |X|−1)`.
pub fn type_count(n: usize, alphabet: Alphabet) -> BigUint {
    binomial((n + alphabet.size() - 1) as u64, (alphabet.size() - 1) as u64)
}

fn check_budget(what: &'static str, needed: &BigUint, limit: u64) -> Result<(), TypesError> {
    if *needed > BigUint::from(limit) {
        return Err(TypesError::BudgetExceeded { what, needed: needed.to_string(), limit });
    }
    Ok(())
}

/// All types with denominator `n`, in decreasing lexicographic order of
/// counts: `(n,0,…), …, (…,0,n)`.
pub fn enumerate_types(n: usize, alphabet: Alphabet) -> Result<Vec<TypeDistribution>, TypesError> {
    if n == 0 {
        return Err(TypesError::EmptyBlock);
    }
    check_budget("type enumeration", &type_count(n, alphabet), TYPE_BUDGET)?;
    let k = alphabet.size();
    let mut out = Vec::new();
    let mut counts = vec![0usize; k];
    fn rec(pos: usize, remaining: usize, counts: &mut Vec<usize>, out: &mut Vec<TypeDistribution>) {
        let k = counts.len();
        if pos == k - 1 {
            counts[pos] = remaining;
            out.push(TypeDistribution { counts: counts.clone() });
            return;
        }
        for c in (0..=remaining).rev() {
            counts[pos] = c;
            rec(pos + 1, remaining - c, counts, out);
        }
    }
    rec(0, n, &mut counts, &mut out);
    Ok(out)
}

pub fn type_of(x: &Sequence, alphabet: Alphabet) -> Result<TypeDistribution, TypesError> {
    if x.is_empty() {
        return Err(TypesError::EmptyBlock);
    }
    let mut counts = vec![0usize; alphabet.size()];
    for l in x.letters() {
        if l >= alphabet.size() {
            return Err(TypesError::LetterOutOfRange { letter: l, size: alphabet.size() });
        }
        counts[l] += 1;
    }
    Ok(TypeDistribution { counts })
}

/// Multinomial coefficient `n!/∏ counts!`.
pub fn type_class_size(q: &TypeDistribution) -> BigUint {
    let mut r = BigUint::one();
    let mut placed = 0u64;
    for &c in &q.counts {
        for i in 1..=c as u64 {
            placed += 1;
            r = r * BigUint::from(placed) / BigUint::from(i);
        }
    }
    r
}

/// `log₂ |T_Q^n|` via log-factorials.
pub fn log2_type_class_size(q: &TypeDistribution) -> f64 {
    let lf = |m: usize| (1..=m).map(|i| (i as f64).log2()).sum::<f64>();
    lf(q.n()) - q.counts.iter().map(|&c| lf(c)).sum::<f64>()
}

/// All sequences of type `Q`, in increasing lexicographic order.
pub fn enumerate_type_class(q: &TypeDistribution) -> Result<Vec<Sequence>, TypesError> {
    check_budget("type class enumeration", &type_class_size(q), SEQUENCE_BUDGET)?;
    let mut cur = q.first_sequence().letters;
    let mut out = vec![Sequence { letters: cur.clone() }];
    while next_permutation(&mut cur) {
        out.push(Sequence { letters: cur.clone() });
    }
    Ok(out)
}

fn next_permutation(v: &mut [u8]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All of `X^n` in lexicographic order.
pub fn enumerate_sequences(n: usize, alphabet: Alphabet) -> Result<Vec<Sequence>, TypesError> {
    if n == 0 {
        return Err(TypesError::EmptyBlock);
    }
    let total = BigUint::from(alphabet.size()).pow(n as u32);
    check_budget("sequence enumeration", &total, SEQUENCE_BUDGET)?;
    let total = total.to_usize().unwrap();
    let k = alphabet.size();
    Ok((0..total)
        .map(|mut idx| {
            let mut letters = vec![0u8; n];
            for slot in letters.iter_mut().rev() {
                *slot = (idx % k) as u8;
                idx /= k;
            }
            Sequence { letters }
        })
        .collect())
}

/// `Pr[x ∈ T_Q^n] = |T_Q^n| ∏ P(x)^{counts(x)}` under `P^{⊗n}`.
pub fn type_class_probability(q: &TypeDistribution, p: &[f64]) -> f64 {
    let mut log2 = log2_type_class_size(q);
    for (&c, &px) in q.counts.iter().zip(p) {
        if c > 0 {
            if px <= 0.0 {
                return 0.0;
            }
            log2 += c as f64 * px.log2();
        }
    }
    log2.exp2()
}

/// `P^{⊗n}(x)`.
pub fn sequence_probability(x: &Sequence, p: &[f64]) -> f64 {
    x.letters().map(|l| p[l]).product()
}

/// The slack terms `δ_n = log₂(2n log₂|X| + 1)/n` and
/// `δ'_n = (|X|+1) log₂(n+1)/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlocklengthSlack {
    pub delta_n: f64,
    pub delta_n_prime: f64,
}

pub fn slack(n: usize, alphabet: Alphabet) -> BlocklengthSlack {
    let nf = n as f64;
    let x = alphabet.size() as f64;
    BlocklengthSlack {
        delta_n: (2.0 * nf * x.log2() + 1.0).log2() / nf,
        delta_n_prime: (x + 1.0) * (nf + 1.0).log2() / nf,
    }
}

/// Exact integer checks of `(n+1)^{−|X|} 2^{nH(Q)} ≤ |T_Q^n| ≤ 2^{nH(Q)}`,
/// using `2^{nH(Q)} = n^n / ∏ c^c`. Returns `(lower_holds, upper_holds)`.
pub fn size_bounds_exact(q: &TypeDistribution) -> (bool, bool) {
    let n = q.n() as u64;
    let nn = BigUint::from(n).pow(n as u32);
    let prod_cc = q
        .counts
        .iter()
        .fold(BigUint::one(), |acc, &c| acc * BigUint::from(c as u64).pow(c as u32));
    let t = type_class_size(q);
    let lhs = &t * &prod_cc;
    let lower = nn <= &lhs * BigUint::from(n + 1).pow(q.counts.len() as u32);
    let upper = lhs <= nn;
    (lower, upper)
}

/// Exact check of `|𝒫_n(X)| ≤ (n+1)^{|X|}`.
pub fn count_bound_exact(n: usize, alphabet: Alphabet) -> bool {
    type_count(n, alphabet) <= BigUint::from(n as u64 + 1).pow(alphabet.size() as u32)
}
