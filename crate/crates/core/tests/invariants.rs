use proptest::prelude::*;

use qrecover::channels::{default_swivel_grid, petz_map, random_channel};
use qrecover::extend::{build_k_extension, symmetry_residual, ExtensionStrategy};
use qrecover::info::{conditional_mutual_information, entropy, trace_distance};
use qrecover::io::{state_from_str, state_to_string};
use qrecover::linalg::max_abs;
use qrecover::measures::{entanglement_of_formation, entanglement_of_formation_with, OptimizerConfig, Witness};
use qrecover::rng::rng_from_seed;
use qrecover::states::{random_state, Ensemble, StateEnsembleSpec};

fn ensemble() -> impl Strategy<Value = Ensemble> {
    prop_oneof![
        Just(Ensemble::HaarPure),
        Just(Ensemble::HilbertSchmidtMixed),
        Just(Ensemble::BuresMixed),
        (1usize..4).prop_map(Ensemble::RankLimited),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn document_round_trip_is_exact(seed in any::<u64>(), e in ensemble(), da in 1usize..4, db in 1usize..4) {
        let rho = random_state(&StateEnsembleSpec::new(e, &[da, db], seed)).unwrap();
        let back = state_from_str(&state_to_string(&rho)).unwrap();
        prop_assert_eq!(back.matrix(), rho.matrix());
        prop_assert_eq!(back.labels(), rho.labels());
    }

    #[test]
    fn marginals_are_states_and_commute(seed in any::<u64>(), e in ensemble()) {
        let rho = random_state(&StateEnsembleSpec::new(e, &[2, 3, 2], seed)).unwrap();
        let direct = rho.marginal(&["A"]).unwrap();
        let nested = rho.marginal(&["A", "B"]).unwrap().marginal(&["A"]).unwrap();
        prop_assert!(max_abs(&(direct.matrix() - nested.matrix())) < 1e-12);
        prop_assert!((direct.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(direct.eigenvalues().unwrap().iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn cmi_within_entropy_bounds(seed in any::<u64>(), e in ensemble()) {
        let rho = random_state(&StateEnsembleSpec::tripartite(e, [2, 2, 2], seed)).unwrap();
        let i = conditional_mutual_information(&rho, &["A"], &["B"], &["E"]).unwrap();
        let sa = entropy(&rho, &["A"]).unwrap();
        prop_assert!(i >= -1e-9);
        prop_assert!(i <= 2.0 * sa + 1e-9);
    }

    #[test]
    fn channels_contract_and_petz_recovers_anchor(seed in any::<u64>(), kraus in 1usize..4) {
        let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], seed)).unwrap();
        let sigma = random_state(&StateEnsembleSpec::new(Ensemble::BuresMixed, &[2, 2], seed ^ 1)).unwrap();
        let mut rng = rng_from_seed(seed);
        let out = qrecover::linalg::SubsystemLayout::new(["C"], &[2]).unwrap();
        let t = random_channel(&mut rng, rho.layout(), &out, kraus + 1).unwrap();
        prop_assert!(t.trace_preservation_deviation() < 1e-10);
        let before = trace_distance(&rho, &sigma).unwrap();
        let after = trace_distance(&t.apply(&rho).unwrap(), &t.apply(&sigma).unwrap()).unwrap();
        prop_assert!(after <= before + 1e-10);
        let r = petz_map(&t, &sigma).unwrap();
        prop_assert!(r.anchor_deviation().unwrap() < 1e-8);
    }

    #[test]
    fn extensions_are_symmetric(seed in any::<u64>(), k in 2usize..4) {
        let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], seed)).unwrap();
        let ext = build_k_extension(&rho, &["A"], &["B"], k, &ExtensionStrategy::Purification, &default_swivel_grid()).unwrap();
        prop_assert_eq!(ext.b_copies.len(), k);
        prop_assert!(symmetry_residual(&ext.omega, &ext.b_copies).unwrap() < 1e-8);
        prop_assert!(ext.report.measured_bound_holds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn formation_witness_reproduces_state(seed in any::<u64>()) {
        let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], seed)).unwrap();
        let cfg = OptimizerConfig { seed, restarts: 2, steps: 200, ..OptimizerConfig::default() };
        let est = entanglement_of_formation_with(&rho, &["A"], &["B"], 4, &cfg).unwrap();
        let Witness::Decomposition(dec) = &est.witness else { panic!("no decomposition") };
        prop_assert!(max_abs(&(dec.matrix() - rho.matrix())) < 1e-9);
        prop_assert!((dec.average_entanglement().unwrap() - est.value).abs() < 1e-9);
        prop_assert!(est.value >= -1e-9 && est.value <= 1.0 + 1e-9);
    }
}

#[test]
fn pure_state_formation_is_marginal_entropy() {
    let rho = random_state(&StateEnsembleSpec::new(Ensemble::HaarPure, &[2, 3], 17)).unwrap();
    let est = entanglement_of_formation(&rho, &["A"], &["B"], 2, 1).unwrap();
    assert!((est.value - entropy(&rho, &["A"]).unwrap()).abs() < 1e-8);
}
