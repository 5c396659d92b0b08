//! Invariant batteries behind `qrecover check`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use clap::ValueEnum;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{channel_from_isometry, classical_channel};
use crate::classical::{
    all_deterministic_maps, check_theorem4, check_theorem5, kl_divergence, l1_distance, random_distribution,
    random_probs, random_stochastic_map, Distribution,
};
use crate::conjectures::{
    check_functoriality, check_ordering_chain, evaluate, regenerate_instance, Axiom, FunctorialityInstance,
    InequalityId, Instance, MapVariant, SearchConfig,
};
use crate::error::{Error, Result};
use crate::info::{
    check_fuchs_van_de_graaf, conditional_multi_information, conditional_multi_information_chain,
    conditional_mutual_information, entropy, fidelity, matrix_relative_entropy, relative_entropy, trace_distance,
};
use crate::io::extended_float;
use crate::linalg::{isometry_from, Precision, SubsystemLayout};
use crate::rng::{ginibre, rng_from_seed, trial_seed, TrialRng};
use crate::states::{random_state, state_from_factor, Ensemble, MultipartiteState, StateEnsembleSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Info,
    Classical,
    Functoriality,
    Fvdg,
    Pinsker,
    ChainIdentity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Largest violation amount seen; the property fails above `tolerance`.
    #[serde(with = "extended_float")]
    pub worst_deviation: f64,
    pub tolerance: f64,
    /// Reported-only properties never fail.
    pub asserted: bool,
    pub first_failure_seed: Option<u64>,
    pub first_error: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        !self.asserted || self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
}

/// `(instance index, instance seed) -> deviation`.
type Eval = Box<dyn Fn(u64, u64) -> Result<f64> + Sync>;

struct Property {
    name: &'static str,
    tolerance: f64,
    asserted: bool,
    /// Instance count as a function of `trials`.
    count: fn(usize) -> usize,
    eval: Eval,
}

impl Property {
    fn new(name: &'static str, tolerance: f64, eval: impl Fn(u64, u64) -> Result<f64> + Sync + 'static) -> Self {
        Property {
            name,
            tolerance,
            asserted: true,
            count: |n| n,
            eval: Box::new(eval),
        }
    }

    fn reported(mut self) -> Self {
        self.asserted = false;
        self
    }

    fn count(mut self, f: fn(usize) -> usize) -> Self {
        self.count = f;
        self
    }
}

/// Tolerance keys each suite understands.
pub fn tolerance_keys(suite: Suite) -> Vec<&'static str> {
    properties(suite).iter().map(|p| p.name).collect()
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64, overrides: &BTreeMap<String, f64>) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let props = properties(suite);
    for key in overrides.keys() {
        if !props.iter().any(|p| p.name == key) {
            return Err(Error::InvalidArgument(format!(
                "suite {suite:?} has no property `{key}` (known: {})",
                tolerance_keys(suite).join(", ")
            )));
        }
    }
    let results: Vec<PropertyResult> = props
        .iter()
        .map(|p| run_property(p, trials, seed, overrides.get(p.name).copied()))
        .collect();
    let passed = results.iter().all(PropertyResult::passed);
    Ok(SuiteReport {
        suite,
        seed,
        trials,
        properties: results,
        passed,
    })
}

fn run_property(p: &Property, trials: usize, seed: u64, tol: Option<f64>) -> PropertyResult {
    let tolerance = tol.unwrap_or(p.tolerance);
    let n = (p.count)(trials);
    let outcomes: Vec<(u64, Result<f64>)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            (s, (p.eval)(i, s))
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let mut first_failure_seed = None;
    let mut first_error = None;
    for (s, r) in outcomes {
        let failed = match r {
            Ok(dev) => {
                worst = worst.max(dev);
                dev.is_nan() || dev > tolerance
            }
            Err(e) => {
                first_error.get_or_insert_with(|| e.to_string());
                true
            }
        };
        if failed {
            failures += 1;
            first_failure_seed.get_or_insert(s);
        }
    }
    PropertyResult {
        name: p.name.to_string(),
        instances: n,
        failures,
        worst_deviation: worst,
        tolerance,
        asserted: p.asserted,
        first_failure_seed,
        first_error,
    }
}

fn hs_state(dims: &[usize], labels: &[&str], seed: u64) -> Result<MultipartiteState> {
    random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, dims, seed).with_labels(labels))
}

fn aeb(seed: u64) -> Result<MultipartiteState> {
    hs_state(&[2, 2, 2], &["A", "E", "B"], seed)
}

fn random_pair(seed: u64) -> Result<(MultipartiteState, MultipartiteState)> {
    let a = hs_state(&[4], &["X"], seed)?;
    let b = hs_state(&[4], &["X"], seed.wrapping_add(1 << 32))?;
    Ok((a, b))
}

fn random_channel_state(rng: &mut TrialRng, input: &str, output: &str) -> Result<(crate::channels::QuantumChannel, MultipartiteState)> {
    let in_layout = SubsystemLayout::new([input], &[2])?;
    let v = isometry_from(&ginibre(rng, 8, 2))?;
    let ch = channel_from_isometry(&v, &in_layout, &SubsystemLayout::new([output], &[2])?)?;
    Ok((ch, state_from_factor(&ginibre(rng, 2, 2), in_layout)))
}

fn classical_pair(rng: &mut TrialRng, n: usize) -> Result<(Distribution, Distribution)> {
    let layout = SubsystemLayout::new(["X"], &[n])?;
    Ok((random_distribution(rng, layout.clone()), random_distribution(rng, layout)))
}

/// `Σ_{a,b ≤ 3} b^a` functions between alphabets of size at most 3.
const DETERMINISTIC_CASES: usize = 56;

fn deterministic_cases() -> Vec<(usize, usize, usize)> {
    let mut cases = Vec::new();
    for n_in in 1..=3 {
        for n_out in 1..=3usize {
            for m in 0..n_out.pow(n_in as u32) {
                cases.push((n_in, n_out, m));
            }
        }
    }
    cases
}

fn properties(suite: Suite) -> Vec<Property> {
    match suite {
        Suite::Info => vec![
            Property::new("ssa", 1e-8, |_, s| {
                Ok(-conditional_mutual_information(&aeb(s)?, &["A"], &["B"], &["E"])?)
            }),
            Property::new("cmi_relative_entropy", 1e-8, |_, s| {
                let rho = aeb(s)?;
                let ra = rho.marginal(&["A"])?;
                let joint = relative_entropy(&rho, &ra.tensor(&rho.marginal(&["E", "B"])?)?)?;
                let part = relative_entropy(&rho.marginal(&["A", "E"])?, &ra.tensor(&rho.marginal(&["E"])?)?)?;
                Ok((conditional_mutual_information(&rho, &["A"], &["B"], &["E"])? - (joint - part)).abs())
            }),
            Property::new("entropy_bounds", 1e-10, |_, s| {
                let rho = aeb(s)?;
                let v = entropy(&rho, &["A", "E", "B"])?;
                Ok((-v).max(v - 3.0))
            }),
            Property::new("data_processing", 1e-8, |_, s| {
                let inst = regenerate_instance(&SearchConfig::new(&[2, 2], 1, s), s)?;
                Ok(-evaluate(InequalityId::BigOne, &inst, MapVariant::PetzT0)?.lhs)
            }),
        ],
        Suite::Classical => vec![
            Property::new("theorem5_random", 1e-10, |_, s| {
                let mut rng = rng_from_seed(s);
                let (n_in, n_out) = (rng.random_range(2..=8), rng.random_range(2..=8));
                let (p, q) = classical_pair(&mut rng, n_in)?;
                let t = random_stochastic_map(&mut rng, n_out, n_in);
                Ok(-check_theorem5(&p, &q, &t)?.gap)
            }),
            Property::new("theorem5_deterministic", 1e-10, |i, s| {
                let cases = deterministic_cases();
                let (n_in, n_out, m) = cases[i as usize % cases.len()];
                let mut rng = rng_from_seed(s);
                let (p, q) = classical_pair(&mut rng, n_in)?;
                let t = &all_deterministic_maps(n_in, n_out)[m];
                Ok(check_theorem5(&p, &q, t)?.gap.abs())
            })
            // every map at least once, whole rounds only
            .count(|n| n.max(1).div_ceil(DETERMINISTIC_CASES) * DETERMINISTIC_CASES),
            Property::new("theorem4_identity", 1e-10, |_, s| {
                let p = random_distribution(&mut rng_from_seed(s), SubsystemLayout::new(["X", "Y", "Z"], &[3, 3, 3])?);
                let c = check_theorem4(&p)?;
                Ok((c.divergence - c.cmi).abs())
            }),
            Property::new("theorem4_pinsker", 1e-9, |_, s| {
                let p = random_distribution(&mut rng_from_seed(s), SubsystemLayout::new(["X", "Y", "Z"], &[3, 3, 3])?);
                let c = check_theorem4(&p)?;
                Ok(c.l1 - c.pinsker_bound)
            }),
            Property::new("embedded_inequalities", 1e-10, |_, s| {
                let triple = regenerate_instance(&SearchConfig::new(&[3, 3], 1, s).classical(), s)?;
                let tri = regenerate_instance(&SearchConfig::new(&[2, 2, 2], 1, s).classical(), s)?;
                let mut worst = f64::NEG_INFINITY;
                for id in InequalityId::ALL.into_iter().filter(|id| !id.ratio_only()) {
                    let inst: &Instance = if id.is_cmi_form() { &tri } else { &triple };
                    worst = worst.max(-evaluate(id, inst, MapVariant::PetzT0)?.gap);
                    if !id.is_cmi_form() {
                        worst = worst.max(-evaluate(id, &tri, MapVariant::PetzT0)?.gap);
                    }
                }
                Ok(worst)
            }),
        ],
        Suite::Functoriality => vec![
            Property::new("normalization", 1e-8, |_, s| {
                let mut rng = rng_from_seed(s);
                let d = rng.random_range(2..=4);
                let tau = state_from_factor(&ginibre(&mut rng, d, d), SubsystemLayout::new(["X"], &[d])?);
                Ok(check_functoriality(Axiom::Normalization, &[FunctorialityInstance::Normalization { tau }], 3, s)?.deviation)
            }),
            Property::new("tensor", 1e-8, |_, s| {
                let mut rng = rng_from_seed(s);
                let first = random_channel_state(&mut rng, "X", "U")?;
                let second = random_channel_state(&mut rng, "Y", "V")?;
                Ok(check_functoriality(Axiom::Tensor, &[FunctorialityInstance::Tensor { first, second }], 3, s)?.deviation)
            }),
            Property::new("composition_classical", 1e-10, |_, s| {
                let mut rng = rng_from_seed(s);
                let x = SubsystemLayout::new(["X"], &[3])?;
                let y = SubsystemLayout::new(["Y"], &[3])?;
                let z = SubsystemLayout::new(["Z"], &[2])?;
                let column_stochastic = |rng: &mut TrialRng, rows: usize, cols: usize| {
                    let cols: Vec<Vec<f64>> = (0..cols).map(|_| random_probs(rng, rows)).collect();
                    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
                };
                let first = classical_channel(&column_stochastic(&mut rng, 3, 3), &x, &y)?;
                let second = classical_channel(&column_stochastic(&mut rng, 2, 3), &y, &z)?;
                let sigma = MultipartiteState::diagonal(&random_probs(&mut rng, 3), x)?;
                let inst = [FunctorialityInstance::Composition { first, second, sigma }];
                Ok(check_functoriality(Axiom::Composition, &inst, 3, s)?.deviation)
            }),
            Property::new("composition_quantum", 1e-8, |_, s| {
                let mut rng = rng_from_seed(s);
                let (first, sigma) = random_channel_state(&mut rng, "X", "Y")?;
                let (second, _) = random_channel_state(&mut rng, "Y", "Z")?;
                let inst = [FunctorialityInstance::Composition { first, second, sigma }];
                Ok(check_functoriality(Axiom::Composition, &inst, 3, s)?.deviation)
            })
            .reported(),
        ],
        Suite::Fvdg => vec![
            Property::new("fvdg", 1e-9, |_, s| {
                let (a, b) = random_pair(s)?;
                let c = check_fuchs_van_de_graaf(&a, &b)?;
                Ok((c.lhs - c.mid).max(c.mid - c.rhs))
            }),
            Property::new("fidelity_over_trace_norm", 1e-9, |_, s| {
                let c = check_ordering_chain(&Instance::tripartite(&aeb(s)?)?, MapVariant::PetzT0)?;
                Ok(c.trace_norm_floor - c.neg_log_fidelity_sq)
            }),
            Property::new("fidelity_form_implies_trace_norm_form", 0.0, |_, s| {
                let c = check_ordering_chain(&Instance::tripartite(&aeb(s)?)?, MapVariant::PetzT0)?;
                Ok(if c.implication_holds { 0.0 } else { 1.0 })
            }),
        ],
        Suite::Pinsker => vec![
            Property::new("pinsker_quantum", 1e-9, |_, s| {
                let (a, b) = random_pair(s)?;
                let t = trace_distance(&a, &b)?;
                Ok(t * t / (2.0 * LN_2) - relative_entropy(&a, &b)?)
            }),
            Property::new("pinsker_classical", 1e-10, |_, s| {
                let (p, q) = classical_pair(&mut rng_from_seed(s), 6)?;
                let t = l1_distance(&p, &q)?;
                Ok(t * t / (2.0 * LN_2) - kl_divergence(&p, &q)?)
            }),
            Property::new("divergence_over_fidelity", 1e-9, |_, s| {
                let (a, b) = random_pair(s)?;
                let f = fidelity(&a, &b)?;
                let d = matrix_relative_entropy(a.matrix(), b.matrix(), Precision::Standard)?;
                Ok(-2.0 * f.log2() - d)
            }),
        ],
        Suite::ChainIdentity => vec![
            Property::new("multi_information_three", 1e-9, |_, s| {
                let rho = hs_state(&[2, 2, 2, 2], &["A1", "A2", "A3", "E"], s)?;
                let parts = [vec!["A1"], vec!["A2"], vec!["A3"]];
                let direct = conditional_multi_information(&rho, &parts, &["E"])?;
                Ok((direct - conditional_multi_information_chain(&rho, &parts, &["E"])?).abs())
            }),
            Property::new("multi_information_four", 1e-9, |_, s| {
                let rho = hs_state(&[2, 2, 2, 2, 2], &["A1", "A2", "A3", "A4", "E"], s)?;
                let parts = [vec!["A1"], vec!["A2"], vec!["A3"], vec!["A4"]];
                let direct = conditional_multi_information(&rho, &parts, &["E"])?;
                Ok((direct - conditional_multi_information_chain(&rho, &parts, &["E"])?).abs())
            })
        ],
    }
}
