//! Cross-module invariants as property tests over random states and seeds.

use proptest::prelude::*;

use locq::ensemble::{enumerate_ensemble, localizable_quantumness, BasisAssignment, LqMethod};
use locq::estimator::{median_of_means, mom_parameters, MoMParameters};
use locq::freeset::{
    complexity_fidelity_bound, separable_fidelity, stabilizer_dictionary, stabilizer_fidelity,
    FidelityOracle,
};
use locq::models::{depolarize_matrix, haar_state};
use locq::protocol::{analytic_eta_depolarized, run_certification, CertificationConfig};
use locq::qstate::{
    apply_unitary_pure, entanglement_entropy, gates, reduced_purity, schmidt_spectrum, Bipartition,
    Pauli,
};
use locq::rng::stream;

fn pauli(i: usize) -> Pauli {
    [Pauli::X, Pauli::Y, Pauli::Z][i % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projected_probabilities_sum_to_one(seed in any::<u64>(), n in 2usize..6, bases in proptest::collection::vec(0usize..3, 5)) {
        let psi = haar_state(n, &mut stream(seed, 0));
        let part = Bipartition::leading(n, 1);
        let b: Vec<Pauli> = bases[..n - 1].iter().map(|&i| pauli(i)).collect();
        let ens = enumerate_ensemble(&psi, &part, &BasisAssignment::Fixed(b)).unwrap();
        prop_assert!((ens.total_probability() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn schmidt_spectrum_matches_purity(seed in any::<u64>(), n in 2usize..7, k in 1usize..6) {
        let k = k.min(n - 1);
        let psi = haar_state(n, &mut stream(seed, 0));
        let cut = Bipartition::leading(n, k);
        let s2: f64 = schmidt_spectrum(&psi, &cut).iter().map(|l| l * l).sum();
        prop_assert!((s2 - reduced_purity(&psi, &cut.a)).abs() < 1e-9);
        let e = entanglement_entropy(&psi, &cut);
        prop_assert!((e - entanglement_entropy(&psi, &cut.swapped())).abs() < 1e-9);
    }

    #[test]
    fn lq_lies_in_unit_interval(seed in any::<u64>(), n in 3usize..6, random in any::<bool>()) {
        let psi = haar_state(n, &mut stream(seed, 0));
        let part = Bipartition::leading(n, 2);
        let basis = if random { BasisAssignment::Random } else { BasisAssignment::FixedZ };
        for oracle in [FidelityOracle::separable(vec![0]), FidelityOracle::stabilizer(2).unwrap()] {
            let v = localizable_quantumness(&psi, &part, &oracle, &basis, LqMethod::Exact).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn forced_z_assignment_equals_fixed_z(seed in any::<u64>(), n in 3usize..6) {
        let psi = haar_state(n, &mut stream(seed, 0));
        let part = Bipartition::leading(n, 2);
        let oracle = FidelityOracle::separable(vec![0]);
        let a = localizable_quantumness(&psi, &part, &oracle, &BasisAssignment::FixedZ, LqMethod::Exact).unwrap().value;
        let forced = BasisAssignment::Fixed(vec![Pauli::Z; n - 2]);
        let b = localizable_quantumness(&psi, &part, &oracle, &forced, LqMethod::Exact).unwrap().value;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn separable_fidelity_lower_bound(seed in any::<u64>(), n in 2usize..6, k in 1usize..5) {
        let k = k.min(n - 1);
        let phi = haar_state(n, &mut stream(seed, 0));
        let cut = Bipartition::leading(n, k);
        let floor = 2f64.powi(-(k.min(n - k) as i32));
        prop_assert!(separable_fidelity(&phi, &cut) >= floor - 1e-12);
    }

    #[test]
    fn stabilizer_fidelity_bound_and_clifford_invariance(seed in any::<u64>(), n in 1usize..4, q in 0usize..3, use_h in any::<bool>()) {
        let dict = stabilizer_dictionary(n).unwrap();
        let phi = haar_state(n, &mut stream(seed, 0));
        let f = stabilizer_fidelity(&phi, &dict).unwrap();
        prop_assert!(f >= 2f64.powi(-(n as i32)) - 1e-12);
        let g = if use_h { gates::h() } else { gates::s() };
        let moved = apply_unitary_pure(&phi, &g, &[q % n]).unwrap();
        prop_assert!((stabilizer_fidelity(&moved, &dict).unwrap() - f).abs() < 1e-10);
    }

    #[test]
    fn complexity_bound_decreases_with_entanglement(w in 1usize..4, d in 1usize..3, e in 0.0f64..200.0, step in 0.0f64..20.0) {
        prop_assert!(complexity_fidelity_bound(e + step, w, d) <= complexity_fidelity_bound(e, w, d) + 1e-15);
    }

    #[test]
    fn measurement_on_the_far_side_does_not_raise_entanglement(seed in any::<u64>(), q in 2usize..5, basis in 0usize..3) {
        // L = {0, 1}; measuring a qubit on the other side is local to it.
        let n = 5;
        let psi = haar_state(n, &mut stream(seed, 0));
        let before = entanglement_entropy(&psi, &Bipartition::leading(n, 2));
        let part = Bipartition::complement(n, &(0..n).filter(|&x| x != q).collect::<Vec<_>>()).unwrap();
        let ens = enumerate_ensemble(&psi, &part, &BasisAssignment::Fixed(vec![pauli(basis)])).unwrap();
        let after: f64 = ens.entries.iter().map(|e| e.p * entanglement_entropy(&e.state, &Bipartition::leading(n - 1, 2))).sum();
        prop_assert!(after <= before + 1e-9, "{} > {}", after, before);
    }

    #[test]
    fn mom_layout_meets_formula(sigma2 in 0.5f64..300.0, eps in 0.01f64..1.0, delta in 0.001f64..0.5) {
        let MoMParameters { b, k } = mom_parameters(sigma2, eps, delta).unwrap();
        prop_assert!((b * k) as f64 >= 27.0 * (1.0 / delta).ln() * sigma2 / (eps * eps) * (1.0 - 1e-12));
    }

    #[test]
    fn median_of_means_within_range(values in proptest::collection::vec(-10.0f64..10.0, 6..60), k in 1usize..6) {
        let b = values.len() / k;
        prop_assume!(b >= 1);
        let m = median_of_means(&values[..b * k], MoMParameters { b, k }).unwrap();
        let lo = values[..b * k].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values[..b * k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
    }

    #[test]
    fn analytic_depolarized_eta_matches_density_matrix(seed in any::<u64>(), n in 3usize..6, p in 0.0f64..1.0) {
        let psi = haar_state(n, &mut stream(seed, 0));
        let part = Bipartition::leading(n, 2);
        let oracle = FidelityOracle::separable(vec![0]);
        let basis = BasisAssignment::FixedZ;
        let exact = locq::ensemble::exact_conditional_fidelity(&depolarize_matrix(&psi, p).into(), &psi, &part, &oracle, &basis).unwrap();
        let closed = analytic_eta_depolarized(&psi, &part, &oracle, &basis, p).unwrap();
        prop_assert!((exact - closed).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn protocol_records_independent_of_pool_size(seed in any::<u64>()) {
        let psi = haar_state(3, &mut stream(seed, 1));
        let mut cfg = CertificationConfig::new(psi.clone(), psi, Bipartition::leading(3, 1), FidelityOracle::stabilizer(1).unwrap());
        cfg.seed = seed;
        cfg.trials = Some(400);
        cfg.gap = Some(0.3);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_certification(&cfg).unwrap())
        };
        let (a, b) = (run(1), run(3));
        prop_assert_eq!(&a.trials, &b.trials);
        prop_assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        prop_assert_eq!(a.verdict, b.verdict);
    }
}
