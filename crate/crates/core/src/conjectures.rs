//! Gap evaluations for the recovery inequalities, a counterexample search
//! over random instances, and functoriality checks for the Petz construction.
//!
//! Every inequality reads `lhs ≥ rhs` and reports `gap = lhs − rhs`. The
//! left side is `I(A:B|E)` for the conditional forms and
//! `D(ρ‖σ) − D(Tρ‖Tσ)` for the channel forms. The right side compares the
//! target with its recovery `ω = R_t T ρ` through the squared trace norm,
//! `−log₂ F²` or the relative entropy.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    channel_from_isometry, classical_channel, compose, default_swivel_grid, identity_channel, petz_map_with,
    scan_minimum, swivelled_petz_map_with, tensor_channels, QuantumChannel, SwivelEvaluator,
};
use crate::error::{Error, Result};
use crate::info::{
    conditional_mutual_information_with, matrix_fidelity, matrix_relative_entropy, matrix_trace_distance,
};
use crate::io::{channel_to_string, extended_float, state_to_string};
use crate::linalg::{cr, hermitize, isometry_from, Mat, Precision, SubsystemLayout};
use crate::rng::{ginibre, rng_from_seed, trial_seed, TrialRng};
use crate::states::{ensemble_factor, state_from_factor, Ensemble, MultipartiteState};

/// A gap below `−VIOLATION_TOL` counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-7;

/// Normalization and tensor deviations above this fail.
pub const FUNCTORIALITY_TOL: f64 = 1e-8;

const ORDERING_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    /// `I(A:B|E) ≥ −log F(ρ, (id ⊗ R)ρ^{AE})²` for some recovery of `E`.
    FrFidelity,
    /// `I(A:B|E) ≥ Ω(‖ρ − (id ⊗ R)ρ^{AE}‖₁²)`.
    Kim,
    /// `D(ρ‖σ) − D(Tρ‖Tσ) ≥ Ω(‖ρ − RTρ‖₁²)`.
    Zhang,
    /// `I(A:B|E) ≥ −log F(ρ, (id ⊗ R)ρ^{AE})²`.
    Bsw,
    /// `D(ρ‖σ) − D(Tρ‖Tσ) ≥ −log F(ρ, RTρ)²`.
    Sbw,
    /// `I(A:B|E) ≥ D(ρ ‖ (id ⊗ R)ρ^{AE})`.
    KeWinter,
    /// `D(ρ‖σ) − D(Tρ‖Tσ) ≥ D(ρ ‖ RTρ)`.
    BigOne,
    /// As `BigOne`, always with the plain Petz map.
    Theorem5Quantum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RhsKind {
    TraceNormSq,
    NegLogFidelitySq,
    RelativeEntropy,
}

impl InequalityId {
    pub const ALL: [InequalityId; 8] = [
        InequalityId::FrFidelity,
        InequalityId::Kim,
        InequalityId::Zhang,
        InequalityId::Bsw,
        InequalityId::Sbw,
        InequalityId::KeWinter,
        InequalityId::BigOne,
        InequalityId::Theorem5Quantum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InequalityId::FrFidelity => "fr_fidelity",
            InequalityId::Kim => "kim",
            InequalityId::Zhang => "zhang",
            InequalityId::Bsw => "bsw",
            InequalityId::Sbw => "sbw",
            InequalityId::KeWinter => "ke_winter",
            InequalityId::BigOne => "big_one",
            InequalityId::Theorem5Quantum => "theorem5_quantum",
        }
    }

    /// Left side `I(A:B|E)`, which needs a tripartite instance.
    pub fn is_cmi_form(self) -> bool {
        matches!(
            self,
            InequalityId::FrFidelity | InequalityId::Kim | InequalityId::Bsw | InequalityId::KeWinter
        )
    }

    /// Unspecified constant: only `lhs / rhs` is reported, never a violation.
    pub fn ratio_only(self) -> bool {
        matches!(self, InequalityId::Kim | InequalityId::Zhang)
    }

    fn rhs_kind(self) -> RhsKind {
        match self {
            InequalityId::Kim | InequalityId::Zhang => RhsKind::TraceNormSq,
            InequalityId::FrFidelity | InequalityId::Bsw | InequalityId::Sbw => RhsKind::NegLogFidelitySq,
            InequalityId::KeWinter | InequalityId::BigOne | InequalityId::Theorem5Quantum => RhsKind::RelativeEntropy,
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        InequalityId::ALL
            .into_iter()
            .find(|id| id.name() == key || id.name().replace('_', "") == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown inequality `{s}`")))
    }
}

/// Which recovery map stands in for `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapVariant {
    PetzT0,
    Swivelled { t: f64 },
    /// `R_t` with `t` minimizing the right side over the default grid.
    BestScan,
}

impl fmt::Display for MapVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapVariant::PetzT0 => f.write_str("petz_t0"),
            MapVariant::Swivelled { t } => write!(f, "swivelled({t})"),
            MapVariant::BestScan => f.write_str("best_scan"),
        }
    }
}

impl FromStr for MapVariant {
    type Err = Error;

    /// `petz_t0`, `best_scan`, `swivelled(t)` or `swivelled:t`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        match key.replace('-', "_").as_str() {
            "petz_t0" | "petz" => return Ok(MapVariant::PetzT0),
            "best_scan" | "scan" => return Ok(MapVariant::BestScan),
            _ => {}
        }
        let arg = key
            .strip_prefix("swivelled(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| key.strip_prefix("swivelled:"));
        match arg.map(str::parse::<f64>) {
            Some(Ok(t)) if t.is_finite() => Ok(MapVariant::Swivelled { t }),
            _ => Err(Error::InvalidArgument(format!("unknown map variant `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Instance {
    /// `ρ^{AEB}` on subsystems labeled `A`, `E`, `B`. Channel forms use
    /// `T = tr_B` and `σ = ρ^A ⊗ ρ^{EB}`.
    Tripartite(MultipartiteState),
    Triple {
        rho: MultipartiteState,
        sigma: MultipartiteState,
        channel: QuantumChannel,
    },
}

const TRIPARTITE: [&str; 3] = ["A", "E", "B"];

impl Instance {
    /// Reorders `state` to `A E B`; other subsystems are traced out.
    pub fn tripartite(state: &MultipartiteState) -> Result<Self> {
        Ok(Instance::Tripartite(state.marginal_ordered(&TRIPARTITE)?))
    }

    pub fn triple(rho: MultipartiteState, sigma: MultipartiteState, channel: QuantumChannel) -> Result<Self> {
        if rho.layout().dims() != sigma.layout().dims() || rho.layout().dims() != channel.in_layout().dims() {
            return Err(Error::DimensionMismatch(format!(
                "rho {:?}, sigma {:?} and channel input {:?} must agree",
                rho.layout().dims(),
                sigma.layout().dims(),
                channel.in_layout().dims()
            )));
        }
        Ok(Instance::Triple { rho, sigma, channel })
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Instance::Tripartite(s) => s.layout().dims().to_vec(),
            Instance::Triple { rho, channel, .. } => {
                let mut d = rho.layout().dims().to_vec();
                d.extend_from_slice(channel.out_layout().dims());
                d
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub dims: Vec<usize>,
    pub ensemble: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality: InequalityId,
    pub map_variant: MapVariant,
    #[serde(with = "extended_float")]
    pub lhs: f64,
    #[serde(with = "extended_float")]
    pub rhs: f64,
    #[serde(with = "extended_float")]
    pub gap: f64,
    /// `lhs / rhs`, for the ratio-only inequalities.
    #[serde(with = "extended_float::option")]
    pub ratio: Option<f64>,
    #[serde(with = "extended_float::option")]
    pub t_used: Option<f64>,
    pub instance_seed: u64,
    pub instance_descriptor: InstanceDescriptor,
    pub tolerance: f64,
    pub violation: bool,
}

impl InequalityReport {
    pub fn with_origin(mut self, seed: u64, descriptor: InstanceDescriptor) -> Self {
        self.instance_seed = seed;
        self.instance_descriptor = descriptor;
        self
    }
}

/// Target state, left side and a way to produce `ω_t`.
struct Prepared<'a> {
    target: Mat,
    lhs: f64,
    recover: Box<dyn Fn(f64) -> Result<Mat> + 'a>,
}

fn relative_entropy_difference(
    rho: &Mat,
    sigma: &Mat,
    t_rho: &Mat,
    t_sigma: &Mat,
    precision: Precision,
) -> Result<f64> {
    Ok(matrix_relative_entropy(rho, sigma, precision)? - matrix_relative_entropy(t_rho, t_sigma, precision)?)
}

fn prepare<'a>(id: InequalityId, instance: &'a Instance, precision: Precision) -> Result<Prepared<'a>> {
    match instance {
        Instance::Tripartite(state) => {
            let rho = state.marginal_ordered(&TRIPARTITE)?;
            let lhs = if id.is_cmi_form() {
                conditional_mutual_information_with(&rho, &["A"], &["B"], &["E"], precision)?
            } else {
                let ra = rho.marginal(&["A"])?;
                let sigma = ra.tensor(&rho.marginal(&["E", "B"])?)?;
                let t_sigma = ra.tensor(&rho.marginal(&["E"])?)?;
                let rho_ae = rho.marginal(&["A", "E"])?;
                relative_entropy_difference(rho.matrix(), sigma.matrix(), rho_ae.matrix(), t_sigma.matrix(), precision)?
            };
            let ev = SwivelEvaluator::new(&rho, &["A"], &["E"], &["B"], precision)?;
            Ok(Prepared {
                target: rho.matrix().clone(),
                lhs,
                recover: Box::new(move |t| Ok(hermitize(&ev.recovered(t)))),
            })
        }
        Instance::Triple { rho, sigma, channel } => {
            if id.is_cmi_form() {
                return Err(Error::InvalidArgument(format!(
                    "{id} compares I(A:B|E) and needs a tripartite instance"
                )));
            }
            let t_rho = channel.apply_matrix(rho.matrix())?;
            let t_sigma = channel.apply_matrix(sigma.matrix())?;
            let lhs = relative_entropy_difference(rho.matrix(), sigma.matrix(), &t_rho, &t_sigma, precision)?;
            Ok(Prepared {
                target: rho.matrix().clone(),
                lhs,
                recover: Box::new(move |t| {
                    let r = if t == 0.0 {
                        petz_map_with(channel, sigma, precision)?
                    } else {
                        swivelled_petz_map_with(channel, sigma, t, precision)?
                    };
                    Ok(hermitize(&r.channel.apply_matrix(&t_rho)?))
                }),
            })
        }
    }
}

fn rhs_value(kind: RhsKind, target: &Mat, omega: &Mat, precision: Precision) -> Result<f64> {
    Ok(match kind {
        RhsKind::TraceNormSq => matrix_trace_distance(target, omega, precision)?.powi(2),
        RhsKind::NegLogFidelitySq => {
            let f = matrix_fidelity(target, omega, precision)?;
            if f > 0.0 {
                -2.0 * f.log2()
            } else {
                f64::INFINITY
            }
        }
        RhsKind::RelativeEntropy => matrix_relative_entropy(target, omega, precision)?,
    })
}

/// The swivel parameter the variant calls for, and the right side there.
fn choose_t(id: InequalityId, variant: MapVariant, prep: &Prepared, precision: Precision) -> Result<(MapVariant, f64, f64)> {
    let kind = id.rhs_kind();
    let rhs_at = |t: f64| rhs_value(kind, &prep.target, &(prep.recover)(t)?, precision);
    let variant = if id == InequalityId::Theorem5Quantum {
        MapVariant::PetzT0
    } else {
        variant
    };
    Ok(match variant {
        MapVariant::PetzT0 => (variant, 0.0, rhs_at(0.0)?),
        MapVariant::Swivelled { t } => (variant, t, rhs_at(t)?),
        MapVariant::BestScan => {
            let (t, v, _) = scan_minimum(rhs_at, &default_swivel_grid())?;
            (variant, t, v)
        }
    })
}

pub fn evaluate(id: InequalityId, instance: &Instance, variant: MapVariant) -> Result<InequalityReport> {
    evaluate_with(id, instance, variant, VIOLATION_TOL, Precision::Standard)
}

pub fn evaluate_with(
    id: InequalityId,
    instance: &Instance,
    variant: MapVariant,
    tolerance: f64,
    precision: Precision,
) -> Result<InequalityReport> {
    let prep = prepare(id, instance, precision)?;
    let (variant, t, rhs) = choose_t(id, variant, &prep, precision)?;
    let lhs = prep.lhs;
    let gap = lhs - rhs;
    let ratio = (id.ratio_only() && rhs > 0.0).then(|| lhs / rhs);
    Ok(InequalityReport {
        inequality: id,
        map_variant: variant,
        lhs,
        rhs,
        gap,
        ratio,
        t_used: Some(t),
        instance_seed: 0,
        instance_descriptor: InstanceDescriptor {
            dims: instance.dims(),
            ensemble: "supplied".into(),
        },
        tolerance,
        violation: !id.ratio_only() && gap < -tolerance,
    })
}

/// Per-instance check that the fidelity form implies the trace-norm form:
/// `½‖ρ−ω‖₁ ≤ √(1−F²)` gives `−log₂ F² ≥ ‖ρ−ω‖₁² / (4 ln 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub lhs: f64,
    #[serde(with = "extended_float")]
    pub neg_log_fidelity_sq: f64,
    pub trace_norm: f64,
    /// `‖ρ−ω‖₁² / (4 ln 2)`.
    pub trace_norm_floor: f64,
    pub fvdg_holds: bool,
    pub fidelity_form_holds: bool,
    pub trace_norm_form_holds: bool,
    pub implication_holds: bool,
}

/// Uses the channel form (`Sbw`) with the map picked by `variant`.
pub fn check_ordering_chain(instance: &Instance, variant: MapVariant) -> Result<OrderingCheck> {
    let precision = Precision::Standard;
    let prep = prepare(InequalityId::Sbw, instance, precision)?;
    let (_, t, nlf) = choose_t(InequalityId::Sbw, variant, &prep, precision)?;
    let omega = (prep.recover)(t)?;
    let trace_norm = matrix_trace_distance(&prep.target, &omega, precision)?;
    let floor = trace_norm * trace_norm / (4.0 * std::f64::consts::LN_2);
    let fidelity_form_holds = prep.lhs >= nlf - VIOLATION_TOL;
    let trace_norm_form_holds = prep.lhs >= floor - VIOLATION_TOL;
    Ok(OrderingCheck {
        lhs: prep.lhs,
        neg_log_fidelity_sq: nlf,
        trace_norm,
        trace_norm_floor: floor,
        fvdg_holds: nlf >= floor - ORDERING_SLACK,
        fidelity_form_holds,
        trace_norm_form_holds,
        implication_holds: !fidelity_form_holds || trace_norm_form_holds,
    })
}

// ---------------------------------------------------------------------------
// counterexample search

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchSpace {
    Quantum,
    /// Diagonal states and classical channels.
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceForm {
    /// `ρ^{AEB}` with `dims = [A, E, B]`.
    Tripartite,
    /// `(ρ, σ, T)` with `dims = [in, out]`.
    Triple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub trials: usize,
    pub refine_steps: usize,
    pub perturbation_scale: f64,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub space: SearchSpace,
    pub form: InstanceForm,
    /// Ensemble of sampled quantum states.
    pub ensemble: Ensemble,
    pub tolerance: f64,
    /// How many of the lowest sampled objectives to list.
    pub keep_worst: usize,
}

impl SearchConfig {
    pub fn new(dims: &[usize], trials: usize, seed: u64) -> Self {
        SearchConfig {
            trials,
            refine_steps: 200,
            perturbation_scale: 0.05,
            dims: dims.to_vec(),
            seed,
            space: SearchSpace::Quantum,
            form: if dims.len() == 2 {
                InstanceForm::Triple
            } else {
                InstanceForm::Tripartite
            },
            ensemble: Ensemble::HilbertSchmidtMixed,
            tolerance: VIOLATION_TOL,
            keep_worst: 10,
        }
    }

    pub fn classical(mut self) -> Self {
        self.space = SearchSpace::Classical;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let want = match self.form {
            InstanceForm::Tripartite => 3,
            InstanceForm::Triple => 2,
        };
        if self.dims.len() != want || self.dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "{:?} instances need {want} positive dims, got {:?}",
                self.form, self.dims
            )));
        }
        if !(self.perturbation_scale > 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("perturbation scale and tolerance must be positive".into()));
        }
        Ok(())
    }

    fn descriptor(&self, refined: bool) -> InstanceDescriptor {
        let base = match self.space {
            SearchSpace::Classical => "classical".to_string(),
            SearchSpace::Quantum => serde_json::to_value(self.ensemble)
                .ok()
                .map(|v| match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                })
                .unwrap_or_default(),
        };
        InstanceDescriptor {
            dims: self.dims.clone(),
            ensemble: if refined { format!("{base}+refined") } else { base },
        }
    }
}

/// Search coordinates: state factors `G` (`ρ = GG†/tr`) and, for channels,
/// an isometry whose row blocks are Kraus operators. Classical instances
/// read probabilities off `|G_x|²` and transition weights off `|V|²`.
#[derive(Clone, Debug)]
enum Params {
    Tripartite { g: Mat },
    Triple { g_rho: Mat, g_sigma: Mat, v: Mat },
}

fn channel_rows(din: usize, dout: usize) -> usize {
    din * dout * dout
}

fn sample(config: &SearchConfig, seed: u64) -> Result<Params> {
    let mut rng = rng_from_seed(seed);
    let d: usize = config.dims.iter().product();
    let factor = |rng: &mut TrialRng, d: usize| -> Result<Mat> {
        match config.space {
            SearchSpace::Quantum => ensemble_factor(config.ensemble, d, rng),
            SearchSpace::Classical => Ok(ginibre(rng, d, 1)),
        }
    };
    Ok(match config.form {
        InstanceForm::Tripartite => Params::Tripartite { g: factor(&mut rng, d)? },
        InstanceForm::Triple => {
            let (din, dout) = (config.dims[0], config.dims[1]);
            let g_rho = factor(&mut rng, din)?;
            let g_sigma = factor(&mut rng, din)?;
            let v = isometry_from(&ginibre(&mut rng, channel_rows(din, dout), din))?;
            Params::Triple { g_rho, g_sigma, v }
        }
    })
}

fn probabilities(g: &Mat) -> Vec<f64> {
    let w: Vec<f64> = g.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn build_instance(config: &SearchConfig, params: &Params) -> Result<Instance> {
    let state = |g: &Mat, layout: SubsystemLayout| -> Result<MultipartiteState> {
        match config.space {
            SearchSpace::Quantum => Ok(state_from_factor(g, layout)),
            SearchSpace::Classical => MultipartiteState::diagonal(&probabilities(g), layout),
        }
    };
    match params {
        Params::Tripartite { g } => {
            let layout = SubsystemLayout::new(TRIPARTITE, &config.dims)?;
            Ok(Instance::Tripartite(state(g, layout)?))
        }
        Params::Triple { g_rho, g_sigma, v } => {
            let in_layout = SubsystemLayout::new(["X"], &config.dims[..1])?;
            let out_layout = SubsystemLayout::new(["U"], &config.dims[1..])?;
            let channel = match config.space {
                SearchSpace::Quantum => channel_from_isometry(v, &in_layout, &out_layout)?,
                SearchSpace::Classical => {
                    let (din, dout) = (config.dims[0], config.dims[1]);
                    let t = DMatrix::from_fn(dout, din, |u, x| {
                        (0..v.nrows() / dout).map(|k| v[(k * dout + u, x)].norm_sqr()).sum::<f64>()
                    });
                    classical_channel(&t, &in_layout, &out_layout)?
                }
            };
            Instance::triple(state(g_rho, in_layout.clone())?, state(g_sigma, in_layout)?, channel)
        }
    }
}

fn perturb(params: &Params, rng: &mut TrialRng, scale: f64) -> Result<Params> {
    let nudge = |m: &Mat, rng: &mut TrialRng| -> Mat {
        let rms = m.norm() / ((m.nrows() * m.ncols()) as f64).sqrt();
        m + ginibre(rng, m.nrows(), m.ncols()) * cr(scale * rms)
    };
    Ok(match params {
        Params::Tripartite { g } => Params::Tripartite { g: nudge(g, rng) },
        Params::Triple { g_rho, g_sigma, v } => Params::Triple {
            g_rho: nudge(g_rho, rng),
            g_sigma: nudge(g_sigma, rng),
            v: isometry_from(&nudge(v, rng))?,
        },
    })
}

/// The instance a campaign draws for `seed`.
pub fn regenerate_instance(config: &SearchConfig, seed: u64) -> Result<Instance> {
    config.validate()?;
    build_instance(config, &sample(config, seed)?)
}

fn objective(report: &InequalityReport) -> f64 {
    let v = if report.inequality.ratio_only() {
        report.ratio.unwrap_or(f64::INFINITY)
    } else {
        report.gap
    };
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// Gap below `−tolerance`, confirmed at `Precision::Tight`.
    ViolationConfirmed,
    /// Gap below `−tolerance` that did not survive the tight re-evaluation.
    ViolationUnconfirmed,
    /// No violation within the budget. Not a proof of anything.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub seed: u64,
    /// The gap, or the ratio for ratio-only inequalities.
    #[serde(with = "extended_float")]
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub best: InequalityReport,
    pub status: SearchStatus,
    #[serde(with = "extended_float::option")]
    pub tight_gap: Option<f64>,
    pub trials: usize,
    /// Sampled trials (before refinement) flagged as violations.
    pub sampled_violations: usize,
    /// Trials skipped because evaluation raised a numerical error.
    pub failed_trials: usize,
    pub worst: Vec<TrialScore>,
    pub refine_steps: usize,
    pub refine_accepted: usize,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub summary: SearchSummary,
    pub witness: Instance,
}

/// Samples `config.trials` instances, hill-climbs from the lowest one and
/// re-checks any violation at tight precision.
pub fn search_counterexample(id: InequalityId, variant: MapVariant, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    if id.is_cmi_form() && config.form == InstanceForm::Triple {
        return Err(Error::InvalidArgument(format!("{id} needs tripartite instances")));
    }
    let run = |params: &Params| -> Result<InequalityReport> {
        evaluate_with(id, &build_instance(config, params)?, variant, config.tolerance, Precision::Standard)
    };
    let scores: Vec<Option<(TrialScore, bool)>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(config.seed, i);
            let report = sample(config, seed).and_then(|p| run(&p)).ok()?;
            Some((
                TrialScore {
                    seed,
                    objective: objective(&report),
                },
                report.violation,
            ))
        })
        .collect();
    let failed_trials = scores.iter().filter(|s| s.is_none()).count();
    let sampled_violations = scores.iter().flatten().filter(|s| s.1).count();
    let mut ranked: Vec<TrialScore> = scores.into_iter().flatten().map(|s| s.0).collect();
    ranked.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.seed.cmp(&b.seed)));
    let start = *ranked
        .first()
        .ok_or_else(|| Error::InvalidArgument("every trial failed to evaluate".into()))?;
    ranked.truncate(config.keep_worst);

    let mut params = sample(config, start.seed)?;
    let mut best = run(&params)?;
    let mut best_obj = objective(&best);
    let mut rng = rng_from_seed(trial_seed(config.seed, config.trials as u64));
    let mut accepted = 0;
    for _ in 0..config.refine_steps {
        let cand = perturb(&params, &mut rng, config.perturbation_scale)?;
        if let Ok(report) = run(&cand) {
            let obj = objective(&report);
            if obj < best_obj {
                params = cand;
                best = report;
                best_obj = obj;
                accepted += 1;
            }
        }
    }
    let witness = build_instance(config, &params)?;
    let best = best.with_origin(start.seed, config.descriptor(accepted > 0));
    let (status, tight_gap) = if best.violation {
        let tight = evaluate_with(id, &witness, variant, config.tolerance, Precision::Tight)?;
        let status = if tight.gap < -config.tolerance {
            SearchStatus::ViolationConfirmed
        } else {
            SearchStatus::ViolationUnconfirmed
        };
        (status, Some(tight.gap))
    } else {
        (SearchStatus::Inconclusive, None)
    };
    Ok(SearchOutcome {
        summary: SearchSummary {
            best,
            status,
            tight_gap,
            trials: config.trials,
            sampled_violations,
            failed_trials,
            worst: ranked,
            refine_steps: config.refine_steps,
            refine_accepted: accepted,
        },
        witness,
    })
}

fn write_new(path: &Path, contents: &str) -> Result<()> {
    use std::io::Write;
    match std::fs::OpenOptions::new().write(true).create_new(true).open(path) {
        Ok(mut f) => Ok(f.write_all(contents.as_bytes())?),
        // append-only: an existing record for this id and seed is kept
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(()),
        Err(e) => Err(e.into()),
    }
}

/// Writes `{id}_{seed}.json` (the state), `{id}_{seed}_report.json` and, for
/// channel instances, `{id}_{seed}_sigma.json` and `{id}_{seed}_channel.json`
/// into `dir`. Existing files are left untouched.
pub fn archive_witness(outcome: &SearchOutcome, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", outcome.summary.best.inequality, outcome.summary.best.instance_seed);
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    match &outcome.witness {
        Instance::Tripartite(rho) => files.push((dir.join(format!("{stem}.json")), state_to_string(rho))),
        Instance::Triple { rho, sigma, channel } => {
            files.push((dir.join(format!("{stem}.json")), state_to_string(rho)));
            files.push((dir.join(format!("{stem}_sigma.json")), state_to_string(sigma)));
            files.push((dir.join(format!("{stem}_channel.json")), channel_to_string(channel)));
        }
    }
    let mut report = serde_json::to_string_pretty(&outcome.summary)?;
    report.push('\n');
    files.push((dir.join(format!("{stem}_report.json")), report));
    for (path, text) in &files {
        write_new(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

// ---------------------------------------------------------------------------
// functoriality

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// `R(id, τ) = id`.
    Normalization,
    /// `R(T₁⊗T₂, σ₁⊗σ₂) = R(T₁,σ₁) ⊗ R(T₂,σ₂)`.
    Tensor,
    /// `R(T₂∘T₁, σ) = R(T₁,σ) ∘ R(T₂, T₁σ)`.
    Composition,
}

#[derive(Clone, Debug)]
pub enum FunctorialityInstance {
    Normalization {
        tau: MultipartiteState,
    },
    Tensor {
        first: (QuantumChannel, MultipartiteState),
        second: (QuantumChannel, MultipartiteState),
    },
    Composition {
        first: QuantumChannel,
        second: QuantumChannel,
        sigma: MultipartiteState,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctorialityReport {
    pub axiom: Axiom,
    /// Max over instances and probes of `‖lhs(ξ) − rhs(ξ)‖₁`.
    pub deviation: f64,
    pub instances: usize,
    pub probes: usize,
    /// Normalization and tensor are asserted; composition is only measured.
    pub asserted: bool,
    pub holds: bool,
}

/// Maximally mixed state, then `count` random mixed and pure states.
fn probe_states(dim: usize, count: usize, rng: &mut TrialRng) -> Vec<Mat> {
    let mut probes = vec![Mat::identity(dim, dim).unscale(dim as f64)];
    for i in 0..count {
        let g = if i % 2 == 0 { ginibre(rng, dim, dim) } else { ginibre(rng, dim, 1) };
        let m = &g * g.adjoint();
        let t = m.trace().re;
        probes.push(m.unscale(t));
    }
    probes
}

fn max_deviation(a: &QuantumChannel, b: &QuantumChannel, probes: &[Mat]) -> Result<f64> {
    let mut dev = 0.0f64;
    for p in probes {
        let x = hermitize(&a.apply_matrix(p)?);
        let y = hermitize(&b.apply_matrix(p)?);
        dev = dev.max(matrix_trace_distance(&x, &y, Precision::Standard)?);
    }
    Ok(dev)
}

/// Compares both sides of `axiom` on `probes` random inputs per instance
/// (plus the maximally mixed state). Instances of another axiom are rejected.
pub fn check_functoriality(
    axiom: Axiom,
    instances: &[FunctorialityInstance],
    probes: usize,
    seed: u64,
) -> Result<FunctorialityReport> {
    let mut rng = rng_from_seed(seed);
    let mut deviation = 0.0f64;
    let mut probe_count = 0;
    for inst in instances {
        let (lhs, rhs) = match (axiom, inst) {
            (Axiom::Normalization, FunctorialityInstance::Normalization { tau }) => {
                let id = identity_channel(tau.layout());
                (petz_map_with(&id, tau, Precision::Standard)?.channel, id)
            }
            (Axiom::Tensor, FunctorialityInstance::Tensor { first, second }) => {
                let joint = tensor_channels(&first.0, &second.0)?;
                let sigma = first.1.tensor(&second.1)?;
                let lhs = petz_map_with(&joint, &sigma, Precision::Standard)?.channel;
                let r1 = petz_map_with(&first.0, &first.1, Precision::Standard)?.channel;
                let r2 = petz_map_with(&second.0, &second.1, Precision::Standard)?.channel;
                (lhs, tensor_channels(&r1, &r2)?)
            }
            (Axiom::Composition, FunctorialityInstance::Composition { first, second, sigma }) => {
                let joint = compose(first, second)?;
                let lhs = petz_map_with(&joint, sigma, Precision::Standard)?.channel;
                let r1 = petz_map_with(first, sigma, Precision::Standard)?.channel;
                let mid = first.apply(sigma)?;
                let r2 = petz_map_with(second, &mid, Precision::Standard)?.channel;
                (lhs, compose(&r2, &r1)?)
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "instance does not match the {axiom:?} axiom"
                )))
            }
        };
        let p = probe_states(lhs.in_dim(), probes, &mut rng);
        probe_count += p.len();
        deviation = deviation.max(max_deviation(&lhs, &rhs, &p)?);
    }
    let asserted = axiom != Axiom::Composition;
    Ok(FunctorialityReport {
        axiom,
        deviation,
        instances: instances.len(),
        probes: probe_count,
        asserted,
        holds: !asserted || deviation <= FUNCTORIALITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{depolarizing_channel, partial_trace_channel};
    use crate::states::{quantum_markov_chain, random_state, MarkovBlock, StateEnsembleSpec};

    fn random_tripartite(seed: u64) -> Instance {
        let s = random_state(&StateEnsembleSpec::tripartite(Ensemble::HilbertSchmidtMixed, [2, 2, 2], seed)).unwrap();
        Instance::tripartite(&s).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for id in InequalityId::ALL {
            assert_eq!(id.name().parse::<InequalityId>().unwrap(), id);
        }
        assert!("nope".parse::<InequalityId>().is_err());
        for v in [MapVariant::PetzT0, MapVariant::BestScan, MapVariant::Swivelled { t: -0.25 }] {
            assert_eq!(v.to_string().parse::<MapVariant>().unwrap(), v);
        }
    }

    #[test]
    fn markov_chain_has_vanishing_sides() {
        let pair = |seed| random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], seed)).unwrap();
        let blocks: Vec<MarkovBlock> = (0..2)
            .map(|j| MarkovBlock {
                weight: 0.5,
                left: pair(2 * j),
                right: pair(2 * j + 1),
            })
            .collect();
        let inst = Instance::tripartite(&quantum_markov_chain(&blocks).unwrap()).unwrap();
        for id in InequalityId::ALL {
            let r = evaluate(id, &inst, MapVariant::PetzT0).unwrap();
            assert!(r.lhs.abs() < 1e-8, "{id}: lhs {}", r.lhs);
            assert!(r.rhs.abs() < 1e-6, "{id}: rhs {}", r.rhs);
            assert!(!r.violation);
        }
    }

    #[test]
    fn cmi_form_rejects_triples() {
        let layout = SubsystemLayout::new(["X"], &[2]).unwrap();
        let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2], 3))
            .unwrap()
            .relabel(&["X"])
            .unwrap();
        let sigma = MultipartiteState::maximally_mixed(layout.clone());
        let ch = depolarizing_channel(&layout, 0.3).unwrap();
        let inst = Instance::triple(rho, sigma, ch).unwrap();
        assert!(matches!(
            evaluate(InequalityId::Bsw, &inst, MapVariant::PetzT0),
            Err(Error::InvalidArgument(_))
        ));
        let r = evaluate(InequalityId::BigOne, &inst, MapVariant::BestScan).unwrap();
        assert!(r.lhs >= -1e-10);
    }

    #[test]
    fn partial_trace_triple_matches_tripartite_channel_form() {
        let Instance::Tripartite(s) = random_tripartite(5) else { unreachable!() };
        let ra = s.marginal(&["A"]).unwrap();
        let sigma = ra.tensor(&s.marginal(&["E", "B"]).unwrap()).unwrap();
        let ch = partial_trace_channel(s.layout(), &["A", "E"]).unwrap();
        let triple = Instance::triple(s.clone(), sigma, ch).unwrap();
        let tri = Instance::Tripartite(s);
        for id in [InequalityId::Sbw, InequalityId::BigOne] {
            let a = evaluate(id, &tri, MapVariant::Swivelled { t: 0.3 }).unwrap();
            let b = evaluate(id, &triple, MapVariant::Swivelled { t: 0.3 }).unwrap();
            assert!((a.lhs - b.lhs).abs() < 1e-9, "{id}: {} vs {}", a.lhs, b.lhs);
            assert!((a.rhs - b.rhs).abs() < 1e-7, "{id}: {} vs {}", a.rhs, b.rhs);
        }
    }

    #[test]
    fn fidelity_forms_hold_on_random_states() {
        for seed in 0..4 {
            let inst = random_tripartite(seed);
            for id in [InequalityId::FrFidelity, InequalityId::Sbw] {
                let r = evaluate(id, &inst, MapVariant::BestScan).unwrap();
                assert!(!r.violation, "{id} seed {seed}: gap {}", r.gap);
            }
            let k = evaluate(InequalityId::Kim, &inst, MapVariant::PetzT0).unwrap();
            assert!(k.ratio.is_some() && !k.violation);
            let c = check_ordering_chain(&inst, MapVariant::BestScan).unwrap();
            assert!(c.fvdg_holds && c.implication_holds, "{c:?}");
        }
    }

    #[test]
    fn classical_relative_entropy_form_holds() {
        let mut cfg = SearchConfig::new(&[3, 3], 40, 11).classical();
        cfg.refine_steps = 20;
        let out = search_counterexample(InequalityId::BigOne, MapVariant::PetzT0, &cfg).unwrap();
        assert!(out.summary.best.gap >= -1e-10, "{:?}", out.summary.best);
        assert_eq!(out.summary.status, SearchStatus::Inconclusive);
        assert_eq!(out.summary.sampled_violations, 0);
    }

    #[test]
    fn plain_petz_relative_entropy_form_fails() {
        let mut cfg = SearchConfig::new(&[2, 2, 2], 200, 1);
        cfg.refine_steps = 50;
        let out = search_counterexample(InequalityId::Theorem5Quantum, MapVariant::BestScan, &cfg).unwrap();
        assert_eq!(out.summary.best.map_variant, MapVariant::PetzT0);
        assert!(out.summary.best.gap < -1e-4, "{:?}", out.summary.best);
        assert_eq!(out.summary.status, SearchStatus::ViolationConfirmed);
    }

    #[test]
    fn search_is_deterministic_and_regenerable() {
        let mut cfg = SearchConfig::new(&[2, 2, 2], 12, 99);
        cfg.refine_steps = 5;
        let a = search_counterexample(InequalityId::Bsw, MapVariant::PetzT0, &cfg).unwrap();
        let b = search_counterexample(InequalityId::Bsw, MapVariant::PetzT0, &cfg).unwrap();
        assert_eq!(a.summary, b.summary);
        cfg.refine_steps = 0;
        let c = search_counterexample(InequalityId::Bsw, MapVariant::PetzT0, &cfg).unwrap();
        let inst = regenerate_instance(&cfg, c.summary.best.instance_seed).unwrap();
        let r = evaluate(InequalityId::Bsw, &inst, MapVariant::PetzT0).unwrap();
        assert_eq!(r.gap.to_bits(), c.summary.best.gap.to_bits());
        assert_eq!(c.summary.worst[0].seed, c.summary.best.instance_seed);
    }

    #[test]
    fn archive_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = SearchConfig::new(&[2, 2], 4, 7);
        cfg.refine_steps = 0;
        let out = search_counterexample(InequalityId::BigOne, MapVariant::PetzT0, &cfg).unwrap();
        let files = archive_witness(&out, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let before = std::fs::read_to_string(&files[3]).unwrap();
        let back: SearchSummary = serde_json::from_str(&before).unwrap();
        assert_eq!(back.best.instance_seed, out.summary.best.instance_seed);
        let mut other = out.clone();
        other.summary.trials = 1234;
        archive_witness(&other, dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(&files[3]).unwrap(), before);
    }

    #[test]
    fn report_with_infinite_rhs_round_trips() {
        let inst = random_tripartite(2);
        let mut r = evaluate(InequalityId::KeWinter, &inst, MapVariant::PetzT0).unwrap();
        r.rhs = f64::INFINITY;
        r.gap = f64::NEG_INFINITY;
        let text = serde_json::to_string(&r).unwrap();
        let back: InequalityReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn petz_normalization_and_tensor_hold() {
        let mut rng = rng_from_seed(4);
        let st = |d: usize, rng: &mut TrialRng, label: &str| {
            state_from_factor(&ginibre(rng, d, d), SubsystemLayout::new([label], &[d]).unwrap())
        };
        let norm: Vec<_> = (0..3)
            .map(|_| FunctorialityInstance::Normalization { tau: st(3, &mut rng, "X") })
            .collect();
        let r = check_functoriality(Axiom::Normalization, &norm, 4, 1).unwrap();
        assert!(r.holds && r.deviation <= FUNCTORIALITY_TOL, "{r:?}");

        let chan = |rng: &mut TrialRng, label: &str, out: &str| {
            let v = isometry_from(&ginibre(rng, 8, 2)).unwrap();
            channel_from_isometry(
                &v,
                &SubsystemLayout::new([label], &[2]).unwrap(),
                &SubsystemLayout::new([out], &[2]).unwrap(),
            )
            .unwrap()
        };
        let tensor: Vec<_> = (0..2)
            .map(|_| FunctorialityInstance::Tensor {
                first: (chan(&mut rng, "X", "U"), st(2, &mut rng, "X")),
                second: (chan(&mut rng, "Y", "V"), st(2, &mut rng, "Y")),
            })
            .collect();
        let r = check_functoriality(Axiom::Tensor, &tensor, 4, 2).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(check_functoriality(Axiom::Composition, &norm, 1, 0).is_err());
    }

    #[test]
    fn classical_composition_is_exact() {
        let mut rng = rng_from_seed(8);
        let x = SubsystemLayout::new(["X"], &[3]).unwrap();
        let y = SubsystemLayout::new(["Y"], &[3]).unwrap();
        let z = SubsystemLayout::new(["Z"], &[2]).unwrap();
        let stochastic = |rng: &mut TrialRng, rows: usize, cols: usize| {
            let w = ginibre(rng, rows, cols).map(|z| z.norm_sqr());
            let sums = w.row_sum();
            DMatrix::from_fn(rows, cols, |i, j| w[(i, j)] / sums[j])
        };
        let first = classical_channel(&stochastic(&mut rng, 3, 3), &x, &y).unwrap();
        let second = classical_channel(&stochastic(&mut rng, 2, 3), &y, &z).unwrap();
        let p: Vec<f64> = (0..3).map(|_| 0.2 + ginibre(&mut rng, 1, 1)[(0, 0)].norm_sqr()).collect();
        let total: f64 = p.iter().sum();
        let sigma = MultipartiteState::diagonal(&p.iter().map(|v| v / total).collect::<Vec<_>>(), x).unwrap();
        let inst = [FunctorialityInstance::Composition { first, second, sigma }];
        let r = check_functoriality(Axiom::Composition, &inst, 3, 0).unwrap();
        assert!(!r.asserted && r.holds);
        assert!(r.deviation < 1e-10, "{r:?}");
    }
}
