use cqdual::codes::{
    channel_error, cover_type_class, covered_sequences, default_decoder, pretty_good_measurement, random_constant_composition_code,
    source_from_channel, trial_seed, ChannelCode,
};
use cqdual::cqtypes::{enumerate_type_class, type_class_size, type_of, Alphabet, Sequence, TypeDistribution};
use cqdual::divergence::{classical_renyi, relative_entropy, renyi_d, CqEnsemble, Variant};
use cqdual::exponents::{exponent, ExponentConfig, ExponentKind};
use cqdual::linalg::{random, singular_values_jacobi, DensityOperator, HermitianOperator};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, d: usize) -> (DensityOperator, DensityOperator) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (random::density(d, &mut r), random::density(d, &mut r))
}

fn ensemble(seed: u64, pure: bool) -> CqEnsemble {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let prior = random::distribution(2, 0.1, &mut r);
    let states = (0..2).map(|_| if pure { random::pure(2, &mut r) } else { random::density(2, &mut r) }).collect();
    CqEnsemble::new(prior, states).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergences_are_nonnegative_and_ordered(seed in any::<u64>(), d in 2usize..4, alpha in 0.05f64..6.0) {
        let (rho, sigma) = pair(seed, d);
        let p = renyi_d(Variant::Petz, &rho, &sigma, alpha);
        let s = renyi_d(Variant::Sandwiched, &rho, &sigma, alpha);
        prop_assert!(p >= -1e-12 && s >= -1e-12);
        prop_assert!(s <= p + 1e-10, "D* {s} > D {p}");
        if alpha > 1.0 {
            prop_assert!(p + 1e-10 >= relative_entropy(&rho, &sigma));
        }
    }

    #[test]
    fn unitary_invariance(seed in any::<u64>(), alpha in 0.2f64..4.0) {
        let (rho, sigma) = pair(seed, 2);
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let g = random::ginibre(2, 2, &mut r);
        let u = g.qr().q();
        let conj = |x: &DensityOperator| DensityOperator::from_matrix(&u * x.matrix() * u.adjoint()).unwrap();
        for v in [Variant::Petz, Variant::Sandwiched] {
            let a = renyi_d(v, &rho, &sigma, alpha);
            let b = renyi_d(v, &conj(&rho), &conj(&sigma), alpha);
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn commuting_states_reduce_to_classical(seed in any::<u64>(), alpha in 0.1f64..5.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let p = random::distribution(3, 0.01, &mut r);
        let q = random::distribution(3, 0.01, &mut r);
        let dp = DensityOperator::from_diagonal(&p).unwrap();
        let dq = DensityOperator::from_diagonal(&q).unwrap();
        let c = classical_renyi(&p, &q, alpha);
        for v in [Variant::Petz, Variant::Sandwiched] {
            prop_assert!((renyi_d(v, &dp, &dq, alpha) - c).abs() <= 1e-9);
        }
    }

    #[test]
    fn jacobi_matches_eigenvalues(seed in any::<u64>(), d in 1usize..6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = random::ginibre(d, d, &mut r);
        let sv = singular_values_jacobi(&g);
        let gram = HermitianOperator::new(g.adjoint() * &g).unwrap();
        let mut ev = gram.eigh().unwrap().eigenvalues;
        ev.reverse();
        for (s, e) in sv.iter().zip(&ev) {
            prop_assert!((s * s - e).abs() <= 1e-10 * (1.0 + e));
        }
    }

    #[test]
    fn type_classes_partition_and_match_sizes(counts in prop::collection::vec(0usize..4, 1..4)) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let q = TypeDistribution::new(counts.clone()).unwrap();
        let class = enumerate_type_class(&q).unwrap();
        prop_assert_eq!(BigUint::from(class.len()), type_class_size(&q));
        let a = Alphabet::new(counts.len()).unwrap();
        for x in &class {
            prop_assert_eq!(&type_of(x, a).unwrap(), &q);
        }
    }

    #[test]
    fn covers_are_complete(seed in any::<u64>(), k in 1usize..4) {
        let q = TypeDistribution::new(vec![3, 3]).unwrap();
        let class = enumerate_type_class(&q).unwrap();
        let u: Vec<Sequence> = class.iter().step_by(7).take(k).cloned().collect();
        let cover = cover_type_class(&u, seed).unwrap();
        prop_assert!(cover.covered);
        prop_assert_eq!(covered_sequences(&cover.perms(), &u).len(), class.len());
    }

    #[test]
    fn source_from_channel_inequalities(seed in 0u64..1000, m in 1usize..6) {
        let ens = ensemble(seed, seed % 2 == 0);
        let q = TypeDistribution::new(vec![2, 2]).unwrap();
        let code = random_constant_composition_code(&q, m, &ens, trial_seed(seed, 1)).unwrap();
        let (_, rep) = source_from_channel(&code, &ens, trial_seed(seed, 2)).unwrap();
        prop_assert!(rep.pass(), "{:?}", rep.inequalities);
    }
}

#[test]
fn exponents_vanish_at_the_critical_rates() {
    let ens = ensemble(3, false);
    let p = ens.prior().to_vec();
    let cfg = ExponentConfig::default();
    let h = cqdual::divergence::conditional_entropy(&ens);
    let e = exponent(ExponentKind::RSourceIid, h - 1e-3, &p, &ens, &cfg);
    assert!(e.value.abs() <= 1e-12);
    let e = exponent(ExponentKind::RSourceIid, h + 0.2, &p, &ens, &cfg);
    assert!(e.value > 0.0);
}

#[test]
fn orthogonal_codewords_decode_perfectly() {
    let ens = CqEnsemble::classical(vec![0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let a = Alphabet::new(2).unwrap();
    let codebook = vec![Sequence::new(vec![0, 1], a).unwrap(), Sequence::new(vec![1, 0], a).unwrap()];
    let decoder = default_decoder(&codebook, &ens).unwrap();
    let code = ChannelCode::new(codebook, decoder, None).unwrap();
    let e = channel_error(&code, &ens).unwrap();
    assert!(e.max <= 1e-12);
}

#[test]
fn pgm_is_a_povm_on_the_support() {
    let ens = ensemble(9, false);
    let pgm = pretty_good_measurement(ens.prior(), ens.states());
    let mut sum = HermitianOperator::zeros(2);
    for e in &pgm {
        assert!(e.min_eigenvalue() >= -1e-12);
        sum = sum.add(e);
    }
    assert!(sum.sub(&HermitianOperator::identity(2)).max_norm() <= 1e-9);
}
