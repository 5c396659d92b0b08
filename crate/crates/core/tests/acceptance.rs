//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use qrecover::channels::{best_swivel_scan, best_swivel_scan_with, default_swivel_grid, SwivelEvaluator};
use qrecover::classical::{
    all_deterministic_maps, check_theorem4, check_theorem5, random_distribution, random_probs, random_stochastic_map,
};
use qrecover::cli::suites::{run_suite, Suite};
use qrecover::cli::{named_fixture, parse_report, run_with, without_timestamp, ReportBody};
use qrecover::conjectures::SearchStatus;
use qrecover::extend::{build_k_extension, ExtensionStrategy};
use qrecover::info::{conditional_mutual_information, trace_distance};
use qrecover::io::state_to_string;
use qrecover::linalg::{max_abs, Precision, SubsystemLayout};
use qrecover::measures::{
    entanglement_of_formation, entanglement_of_formation_with, separable_from_formation,
    squashed_entanglement_upper_bound, squashed_entanglement_upper_bound_with, OptimizerConfig, Witness,
};
use qrecover::rng::{rng_from_seed, trial_seed};
use qrecover::states::{
    antisymmetric_state, named_state, quantum_markov_chain, random_state, Ensemble, MarkovBlock, MultipartiteState,
    NamedState, StateEnsembleSpec,
};
use qrecover::{Error, Result};
use rand::Rng;

type Check = Result<(bool, String)>;

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn cli(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("qrecover").chain(args.iter().copied()), &mut out, &mut err);
    if code == 1 {
        eprintln!("{}", String::from_utf8_lossy(&err));
    }
    (code, String::from_utf8(out).expect("utf-8 report"))
}

fn hs(dims: &[usize], labels: &[&str], seed: u64) -> Result<MultipartiteState> {
    random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, dims, seed).with_labels(labels))
}

fn classical_theorem5() -> Check {
    let mut rng = rng_from_seed(1);
    let mut worst_random = f64::INFINITY;
    for _ in 0..10_000 {
        let (n_in, n_out) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let x = SubsystemLayout::new(["X"], &[n_in])?;
        let p = random_distribution(&mut rng, x.clone());
        let q = random_distribution(&mut rng, x);
        let t = random_stochastic_map(&mut rng, n_out, n_in);
        worst_random = worst_random.min(check_theorem5(&p, &q, &t)?.gap);
    }
    let mut worst_det = 0.0f64;
    let mut maps = 0;
    for n_in in 1..=3 {
        for n_out in 1..=3 {
            let x = SubsystemLayout::new(["X"], &[n_in])?;
            for t in all_deterministic_maps(n_in, n_out) {
                maps += 1;
                for _ in 0..20 {
                    let p = random_distribution(&mut rng, x.clone());
                    let q = random_distribution(&mut rng, x.clone());
                    worst_det = worst_det.max(check_theorem5(&p, &q, &t)?.gap.abs());
                }
            }
        }
    }
    Ok((
        worst_random >= -1e-10 && worst_det <= 1e-10,
        format!("min gap {worst_random:.3e} over 1e4 random; max |gap| {worst_det:.3e} over {maps} deterministic maps"),
    ))
}

fn classical_theorem4() -> Check {
    let mut rng = rng_from_seed(2);
    let (mut identity, mut slack) = (0.0f64, f64::INFINITY);
    for _ in 0..1000 {
        let p = random_distribution(&mut rng, SubsystemLayout::new(["X", "Y", "Z"], &[3, 3, 3])?);
        let c = check_theorem4(&p)?;
        identity = identity.max((c.divergence - c.cmi).abs());
        slack = slack.min(c.pinsker_bound + 1e-9 - c.l1);
    }
    Ok((
        identity <= 1e-10 && slack >= 0.0,
        format!("max |D - I| {identity:.3e}; min Pinsker slack {slack:.3e}"),
    ))
}

fn markov_exactness() -> Check {
    let mut rng = rng_from_seed(3);
    let (mut worst_cmi, mut worst_dist, mut max_dim) = (0.0f64, 0.0f64, 0);
    for config in 0..100u64 {
        let (blocks, da, db) = loop {
            let da = rng.random_range(1..=3);
            let db = rng.random_range(1..=3);
            let n = rng.random_range(1..=3);
            let e: Vec<(usize, usize)> = (0..n).map(|_| (rng.random_range(1..=2), rng.random_range(1..=2))).collect();
            let de: usize = e.iter().map(|(l, r)| l * r).sum();
            if da * de * db <= 48 {
                break (e, da, db);
            }
        };
        let weights = random_probs(&mut rng, blocks.len());
        let mut parts = Vec::new();
        for (j, &(l, r)) in blocks.iter().enumerate() {
            let s = trial_seed(config, j as u64);
            parts.push(MarkovBlock {
                weight: weights[j],
                left: hs(&[da, l], &["A", "L"], s)?,
                right: hs(&[r, db], &["R", "B"], s ^ 0x5555)?,
            });
        }
        let total: f64 = parts.iter().map(|b| b.weight).sum();
        for b in &mut parts {
            b.weight /= total;
        }
        let rho = quantum_markov_chain(&parts)?;
        max_dim = max_dim.max(rho.dim());
        worst_cmi = worst_cmi.max(conditional_mutual_information(&rho, &["A"], &["B"], &["E"])?);
        let ev = SwivelEvaluator::new(&rho, &["A"], &["E"], &["B"], Precision::Standard)?;
        worst_dist = worst_dist.max(trace_distance(&ev.recovered_state(0.0)?, &rho)?);
    }
    Ok((
        worst_cmi <= 1e-8 && worst_dist <= 1e-6,
        format!("max I(A:B|E) {worst_cmi:.3e}; max recovery distance {worst_dist:.3e}; largest dim {max_dim}"),
    ))
}

fn fawzi_renner_scan() -> Check {
    let grid = default_swivel_grid();
    let dir = scratch("fr_exceptions");
    let (mut held, mut confirmed) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000u64 {
        let seed = trial_seed(4, i);
        let rho = random_state(
            &StateEnsembleSpec::new(Ensemble::HaarPure, &[2, 2, 2], seed).with_labels(&["A", "E", "B"]),
        )?;
        let scan = best_swivel_scan(&rho, &["A"], &["E"], &["B"], &grid)?;
        worst = worst.max(scan.value_best - scan.cmi);
        if scan.bound_holds {
            held += 1;
            continue;
        }
        let tight = best_swivel_scan_with(&rho, &["A"], &["E"], &["B"], &grid, Precision::Tight)?;
        if !tight.bound_holds {
            confirmed += 1;
        }
        std::fs::write(dir.join(format!("{seed}.json")), state_to_string(&rho))?;
        std::fs::write(dir.join(format!("{seed}_scan.json")), serde_json::to_string_pretty(&[scan, tight])?)?;
    }
    Ok((
        held >= 999,
        format!(
            "{held}/1000 within 1e-6; {confirmed} exceptions survive tight re-check; max excess {worst:.3e}"
        ),
    ))
}

fn extension_bookkeeping() -> Check {
    let mut runs: Vec<(String, MultipartiteState, &str, &str, usize, bool)> = vec![
        ("markov".into(), named_fixture("markov", 5)?, "A", "B", 4, true),
        ("bell".into(), named_state(NamedState::Bell)?, "A", "B", 2, false),
        ("alpha3".into(), antisymmetric_state(3, 3)?, "A", "B1", 2, true),
    ];
    for i in 0..50 {
        runs.push((format!("random{i}"), hs(&[2, 2, 2], &["A", "E", "B"], trial_seed(5, i))?, "A", "B", 3, true));
    }
    let grid = default_swivel_grid();
    let (mut worst_sym, mut worst_slack) = (0.0f64, f64::INFINITY);
    let mut failed = Vec::new();
    for (name, state, a, b, k, supplied) in runs {
        let strategy = if supplied {
            ExtensionStrategy::Supplied(state.clone())
        } else {
            ExtensionStrategy::Purification
        };
        let ext = build_k_extension(&state, &[a], &[b], k, &strategy, &grid)?;
        ext.omega.validate()?;
        let r = &ext.report;
        worst_sym = worst_sym.max(r.symmetry_residual);
        let slack = r.measured_bound + 1e-8 - r.max_marginal_distance();
        worst_slack = worst_slack.min(slack);
        if r.symmetry_residual > 1e-8 || slack < 0.0 {
            failed.push(name);
        }
    }
    Ok((
        failed.is_empty(),
        format!("53 runs; max symmetry residual {worst_sym:.3e}; min bookkeeping slack {worst_slack:.3e}; failed {failed:?}"),
    ))
}

fn antisymmetric_extendibility() -> Check {
    let mut worst = 0.0f64;
    for d in [3, 4] {
        let omega = antisymmetric_state(d, d)?;
        let alpha = antisymmetric_state(d, 2)?;
        let labels = omega.labels().to_vec();
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                let m = omega.marginal_ordered(&[labels[i].as_str(), labels[j].as_str()])?;
                worst = worst.max(max_abs(&(m.matrix() - alpha.matrix())));
            }
        }
    }
    let alpha3 = antisymmetric_state(3, 2)?;
    let esq = squashed_entanglement_upper_bound(&alpha3, &["A"], &["B"], 3, 4)?.value;
    Ok((
        worst <= 1e-10 && esq <= 0.80,
        format!("max marginal deviation {worst:.3e}; esq_ub(alpha_3) {esq:.6} bits"),
    ))
}

fn counterexample_reproduction() -> Check {
    let dir = scratch("witnesses");
    let dir_s = dir.to_string_lossy().to_string();
    let (code, out) = cli(&["fuzz", "--inequality", "theorem5_quantum", "--map", "petz_t0", "--dims", "2,2,2", "--trials", "100000", "--seed", "7", "--archive", &dir_s]);
    if code != 0 {
        return Err(Error::InvalidArgument(format!("fuzz exited {code}")));
    }
    let ReportBody::Fuzz(f) = parse_report(&out)?.result else {
        return Err(Error::Parse("fuzz produced another report kind".into()));
    };
    let s = &f.summary;
    Ok(match s.status {
        SearchStatus::ViolationConfirmed => {
            let archived = !f.archived.is_empty() && f.archived.iter().all(|p| p.exists());
            (
                s.best.gap <= -1e-4 && archived,
                format!(
                    "witness seed {} gap {:.4e} (tight {:.4e}); {} sampled violations; {} files archived",
                    s.best.instance_seed,
                    s.best.gap,
                    s.tight_gap.unwrap_or(f64::NAN),
                    s.sampled_violations,
                    f.archived.len()
                ),
            )
        }
        SearchStatus::Inconclusive => (true, format!("status inconclusive after {} trials (flagged)", s.trials)),
        SearchStatus::ViolationUnconfirmed => (false, "violation did not survive tight re-check".into()),
    })
}

fn product_ket_mixture(seed: u64, terms: usize, da: usize, db: usize) -> Result<MultipartiteState> {
    let mut rng = rng_from_seed(seed);
    let probs = random_probs(&mut rng, terms);
    let layout = SubsystemLayout::new(["A", "B"], &[da, db])?;
    let mut m = qrecover::linalg::Mat::zeros(da * db, da * db);
    for p in probs {
        let a = qrecover::rng::ginibre(&mut rng, da, 1);
        let b = qrecover::rng::ginibre(&mut rng, db, 1);
        let ket = qrecover::linalg::tensor(&a, &b);
        let ket = &ket / qrecover::linalg::cr(ket.norm());
        m += &ket * ket.adjoint() * qrecover::linalg::cr(p);
    }
    MultipartiteState::new(qrecover::linalg::hermitize(&m), layout)
}

fn measures() -> Check {
    let bell = named_state(NamedState::Bell)?;
    let ef_bell = entanglement_of_formation(&bell, &["A"], &["B"], 4, 2)?.value;
    let mut prop3_failures = 0;
    let mut prop3 = |rho: &MultipartiteState, w: &Witness| -> Result<()> {
        if let Witness::Decomposition(dec) = w {
            if !separable_from_formation(rho, dec)?.holds {
                prop3_failures += 1;
            }
        }
        Ok(())
    };
    let mut worst_sep = 0.0f64;
    for i in 0..20u64 {
        let (da, db) = if i % 2 == 0 { (2, 2) } else { (2, 3) };
        let terms = 2 + (i as usize % 3);
        let rho = product_ket_mixture(trial_seed(8, i), terms, da, db)?;
        let ef = entanglement_of_formation(&rho, &["A"], &["B"], 4, da * db)?;
        prop3(&rho, &ef.witness)?;
        let esq = squashed_entanglement_upper_bound(&rho, &["A"], &["B"], terms, 4)?;
        worst_sep = worst_sep.max(ef.value).max(esq.value);
    }
    let mut worst_order = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let rho = hs(&[2, 2], &["A", "B"], trial_seed(9, i))?;
        let cfg = OptimizerConfig {
            seed: i,
            ..OptimizerConfig::default()
        };
        let ef = entanglement_of_formation_with(&rho, &["A"], &["B"], 4, &cfg)?;
        prop3(&rho, &ef.witness)?;
        let Witness::Decomposition(dec) = &ef.witness else { unreachable!() };
        let esq = squashed_entanglement_upper_bound_with(&rho, &["A"], &["B"], 4, &cfg, Some(dec))?;
        worst_order = worst_order.max(esq.value - ef.value);
    }
    Ok((
        (ef_bell - 1.0).abs() <= 1e-3 && worst_sep <= 1e-3 && worst_order <= 5e-3 && prop3_failures == 0,
        format!(
            "E_F(Bell) {ef_bell:.6}; separable max {worst_sep:.3e}; max esq_ub - E_F {worst_order:.3e}; separable-bound failures {prop3_failures}"
        ),
    ))
}

fn entropy_core() -> Check {
    let mut failed = Vec::new();
    let mut counts = Vec::new();
    for suite in [Suite::Info, Suite::Pinsker, Suite::Fvdg, Suite::ChainIdentity] {
        let r = run_suite(suite, 10_000, 10, &Default::default())?;
        for p in &r.properties {
            counts.push(format!("{}={}", p.name, p.instances - p.failures));
            if !p.passed() {
                failed.push(p.name.clone());
            }
        }
    }
    Ok((failed.is_empty(), format!("passing instances: {}; failed {failed:?}", counts.join(" "))))
}

fn reproducibility() -> Check {
    let runs: [&[&str]; 5] = [
        &["fuzz", "--trials", "3000", "--seed", "11", "--map", "best_scan", "--inequality", "bsw", "--refine-steps", "20"],
        &["fuzz", "--trials", "3000", "--seed", "11", "--dims", "3,3", "--classical", "--inequality", "big_one"],
        &["check", "classical", "--trials", "500", "--seed", "11"],
        &["measures", "--ensemble", "hs", "--dims", "2,2", "--seed", "11", "--measure", "esq_ub", "--env-dim", "4"],
        &["extend", "--ensemble", "hs", "--dims", "2,2,2", "--seed", "11", "--k", "3"],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let (_, first) = cli(args);
        let (_, second) = cli(args);
        let mut threaded: Vec<&str> = args.to_vec();
        threaded.extend(["--threads", "2"]);
        let (_, third) = cli(&threaded);
        let base = without_timestamp(&first);
        if first.is_empty() || base != without_timestamp(&second) || base != without_timestamp(&third) {
            differing.push(args[0]);
        }
    }
    Ok((differing.is_empty(), format!("5 campaigns x 3 runs; differing {differing:?}")))
}

/// Number, name, runtime budget in seconds, body.
type Criterion = (u32, &'static str, u64, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "classical recovery inequality", 30, classical_theorem5),
        (2, "classical Markov approximation", 10, classical_theorem4),
        (3, "Petz exactness on Markov chains", 120, markov_exactness),
        (4, "fidelity bound via swivel scan", 600, fawzi_renner_scan),
        (5, "k-extension bookkeeping", 300, extension_bookkeeping),
        (6, "antisymmetric extendibility", 60, antisymmetric_extendibility),
        (7, "quantum counterexample search", 1200, counterexample_reproduction),
        (8, "entanglement measures", 600, measures),
        (9, "entropy core", 300, entropy_core),
        (10, "reproducibility", 600, reproducibility),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (n, name, limit, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (pass, detail) = match result {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "criterion {n:>2} {}: {name}: {detail} [{:.1}s of {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
