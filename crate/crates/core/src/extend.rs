//! k-extensions by iterated recovery.
//!
//! Starting from an extension `ρ^{AEB}` of `ρ^{AB}`, the same recovery map
//! `E → E B` is applied `k − 1` times to the current `E`, producing copies
//! `B_1 … B_k`. Tracing out `E` and averaging over permutations of the `B`
//! copies gives a `k`-extendible state whose `A B_i` marginals are within
//! `(k − 1) t / 2` of `ρ^{AB}`, where `t = ‖ρ^{AEB} − (id ⊗ R) ρ^{AE}‖₁`.

use serde::{Deserialize, Serialize};

use crate::channels::{apply_on_subsystem, best_swivel_scan, cmi_swivelled_petz_map, RecoveryMap};
use crate::error::{Error, Result};
use crate::info::{conditional_mutual_information, trace_distance};
use crate::linalg::max_abs;
use crate::states::{purify_compact, MultipartiteState, DEFAULT_DIMENSION_CAP};

pub const MAX_SYMMETRIZED_FACTORS: usize = 8;
pub const BOOKKEEPING_SLACK: f64 = 1e-8;

/// `B` → `B1`, `B2`, ...
pub fn copy_label(base: &str, i: usize) -> String {
    format!("{base}{i}")
}

fn owned<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    labels.iter().map(|l| l.as_ref().to_string()).collect()
}

/// Applies `recovery` (mapping `E` to `E B`) `k − 1` times to `rho`, which
/// must contain the recovery's `E` and `B` subsystems. The `B` subsystems
/// become `B1` (the original) through `Bk`. Output order: everything else
/// first, then `E`, then the copies.
pub fn iterate_recovery(rho: &MultipartiteState, recovery: &RecoveryMap, k: usize) -> Result<MultipartiteState> {
    iterate_recovery_capped(rho, recovery, k, DEFAULT_DIMENSION_CAP)
}

pub fn iterate_recovery_capped(
    rho: &MultipartiteState,
    recovery: &RecoveryMap,
    k: usize,
    cap: usize,
) -> Result<MultipartiteState> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let e = owned(recovery.channel.in_layout().labels());
    let out = recovery.channel.out_layout().labels();
    let b: Vec<String> = out.iter().filter(|l| !e.contains(l)).cloned().collect();
    let d_b = rho.layout().dim_of_all(&b)?;
    let total = rho.dim().saturating_mul(d_b.checked_pow(k as u32 - 1).unwrap_or(usize::MAX));
    if total > cap {
        return Err(Error::DimensionCap { dim: total, cap });
    }
    let rest: Vec<String> = rho
        .labels()
        .iter()
        .filter(|l| !e.contains(l) && !b.contains(l))
        .cloned()
        .collect();
    let copies = |i: usize| -> Vec<String> { b.iter().map(|l| copy_label(l, i)).collect() };
    let mut omega = rho.clone();
    for l in &b {
        omega = omega.rename(l, &copy_label(l, 1))?;
    }
    let order = |upto: usize| -> Vec<String> {
        rest.iter()
            .chain(e.iter())
            .cloned()
            .chain((1..=upto).flat_map(copies))
            .collect()
    };
    omega = omega.reorder(&order(1))?;
    for i in 2..=k {
        let out_labels: Vec<String> = e.iter().cloned().chain(copies(i)).collect();
        let step = recovery.channel.clone().with_out_labels(&out_labels)?;
        omega = apply_on_subsystem(&step, &omega, &e)?.reorder(&order(i))?;
    }
    Ok(omega)
}

/// `Ω = (1/k!) Σ_π U^π ω U^π†` over permutations of the `b_labels` factors,
/// evaluated through `S_k = T_2 ⋯ T_k` with `T_j = {e, (1 j), …, (j−1 j)}`.
pub fn symmetrize<S: AsRef<str>>(omega: &MultipartiteState, b_labels: &[S]) -> Result<MultipartiteState> {
    let k = b_labels.len();
    if k > MAX_SYMMETRIZED_FACTORS {
        return Err(Error::TooManyFactors(k));
    }
    let pos = omega.layout().positions(b_labels)?;
    let dims = omega.layout().dims();
    if pos.iter().any(|&p| dims[p] != dims[pos[0]]) {
        return Err(Error::DimensionMismatch("symmetrized factors differ in dimension".into()));
    }
    let mut cur = omega.clone();
    for j in (1..k).rev() {
        let mut acc = cur.matrix().clone();
        for i in 0..j {
            let mut perm: Vec<usize> = (0..k).collect();
            perm.swap(i, j);
            acc += cur.permute_contents(&pos, &perm)?.matrix();
        }
        cur = MultipartiteState::from_trusted(acc.unscale((j + 1) as f64), omega.layout().clone())?;
    }
    Ok(cur)
}

/// Largest trace-norm change under a transposition of adjacent factors.
pub fn symmetry_residual<S: AsRef<str>>(omega: &MultipartiteState, b_labels: &[S]) -> Result<f64> {
    let pos = omega.layout().positions(b_labels)?;
    let k = pos.len();
    let mut worst = 0.0f64;
    for i in 0..k.saturating_sub(1) {
        let mut perm: Vec<usize> = (0..k).collect();
        perm.swap(i, i + 1);
        let swapped = omega.permute_contents(&pos, &perm)?;
        worst = worst.max(trace_distance(&swapped, omega)?);
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub enum ExtensionStrategy {
    /// `E` is a purifying system of `ρ^{AB}` (dimension `rank ρ`).
    Purification,
    /// A given extension `ρ^{ABE}`; every subsystem not in `A ∪ B` is `E`.
    Supplied(MultipartiteState),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub k: usize,
    /// `‖ω^{AB_i} − ω^{AB_{i−1}}‖₁`, `i = 2..k`.
    pub step_distances: Vec<f64>,
    /// `‖ω^{AB_i} − ρ^{AB}‖₁` before symmetrization.
    pub chain_distances: Vec<f64>,
    /// `‖Ω^{AB_i} − ρ^{AB}‖₁`.
    pub marginal_distances: Vec<f64>,
    /// `(k − 1) √(2 ln 2) √(I/2)`.
    pub theorem_bound: f64,
    /// `(k − 1) t_measured / 2`.
    pub measured_bound: f64,
    pub t_measured: f64,
    pub cmi_used: f64,
    pub swivel_t: f64,
    /// `−log₂ F² ≤ I(A:B|E)` held for the chosen map.
    pub fidelity_bound_holds: bool,
    pub symmetry_residual: f64,
    pub measured_bound_holds: bool,
    /// Informational: the step bound needs the fidelity inequality for the
    /// scanned map.
    pub theorem_bound_holds: bool,
    pub env_dim: usize,
}

impl ExtensionReport {
    pub fn max_marginal_distance(&self) -> f64 {
        self.marginal_distances.iter().copied().fold(0.0, f64::max)
    }

    /// `I/2`.
    pub fn epsilon(&self) -> f64 {
        (self.cmi_used / 2.0).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct KExtension {
    pub report: ExtensionReport,
    /// `Ω` on `A, B1, …, Bk`.
    pub omega: MultipartiteState,
    pub b_copies: Vec<String>,
}

/// Full pipeline: extension, CMI, swivel scan, iterated recovery, partial
/// trace over `E`, symmetrization.
pub fn build_k_extension<S: AsRef<str>>(
    rho_ab: &MultipartiteState,
    a: &[S],
    b: &[S],
    k: usize,
    strategy: &ExtensionStrategy,
    swivel_grid: &[f64],
) -> Result<KExtension> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    if b.len() != 1 {
        return Err(Error::InvalidArgument("B must be a single subsystem".into()));
    }
    let (a, b) = (owned(a), owned(b));
    let ab: Vec<String> = a.iter().chain(b.iter()).cloned().collect();
    let target = rho_ab.marginal_ordered(&ab)?;
    let (ext, e) = match strategy {
        ExtensionStrategy::Purification => {
            let mut name = "E".to_string();
            while ab.contains(&name) {
                name.push('\'');
            }
            (purify_compact(&target, &name)?, vec![name])
        }
        ExtensionStrategy::Supplied(x) => {
            let back = x.marginal_ordered(&ab)?;
            let dev = trace_distance(&back, &target)?;
            if dev > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "supplied extension has AB marginal {dev:e} away from the state"
                )));
            }
            let e: Vec<String> = x.labels().iter().filter(|l| !ab.contains(l)).cloned().collect();
            if e.is_empty() {
                return Err(Error::InvalidArgument("supplied extension has no E subsystem".into()));
            }
            (x.clone(), e)
        }
    };
    let order: Vec<String> = a.iter().chain(e.iter()).chain(b.iter()).cloned().collect();
    let aeb = ext.reorder(&order)?;
    let env_dim = aeb.layout().dim_of_all(&e)?;
    let cmi = conditional_mutual_information(&aeb, &a, &b, &e)?;
    let scan = best_swivel_scan(&aeb, &a, &e, &b, swivel_grid)?;
    let recovery = cmi_swivelled_petz_map(&aeb, &e, &b, scan.t_best)?;

    let ae: Vec<String> = a.iter().chain(e.iter()).cloned().collect();
    let recovered = apply_on_subsystem(&recovery.channel, &aeb.marginal_ordered(&ae)?, &e)?.reorder(&order)?;
    let t_measured = trace_distance(&aeb, &recovered)?;

    let omega = iterate_recovery(&aeb, &recovery, k)?;
    let copies: Vec<String> = (1..=k).map(|i| copy_label(&b[0], i)).collect();
    let keep: Vec<String> = a.iter().chain(copies.iter()).cloned().collect();
    let omega_ab = omega.marginal_ordered(&keep)?;
    let big_omega = symmetrize(&omega_ab, &copies)?;

    let reference = target.relabel(&keep[..a.len() + 1])?;
    let pair = |state: &MultipartiteState, i: usize| -> Result<MultipartiteState> {
        let labels: Vec<String> = a.iter().cloned().chain([copies[i].clone()]).collect();
        state.marginal_ordered(&labels)?.relabel(reference.labels())
    };
    let mut chain_distances = Vec::with_capacity(k);
    let mut step_distances = Vec::with_capacity(k - 1);
    let mut marginal_distances = Vec::with_capacity(k);
    let mut prev: Option<MultipartiteState> = None;
    for i in 0..k {
        let m = pair(&omega_ab, i)?;
        chain_distances.push(trace_distance(&m, &reference)?);
        if let Some(p) = &prev {
            step_distances.push(trace_distance(&m, p)?);
        }
        prev = Some(m);
        marginal_distances.push(trace_distance(&pair(&big_omega, i)?, &reference)?);
    }
    let measured_bound = (k as f64 - 1.0) / 2.0 * t_measured;
    let theorem_bound = (k as f64 - 1.0) * (2.0 * std::f64::consts::LN_2).sqrt() * (cmi.max(0.0) / 2.0).sqrt();
    let symmetry_residual = symmetry_residual(&big_omega, &copies)?;
    let max_marg = marginal_distances.iter().copied().fold(0.0, f64::max);
    let report = ExtensionReport {
        k,
        step_distances,
        chain_distances,
        marginal_distances,
        theorem_bound,
        measured_bound,
        t_measured,
        cmi_used: cmi,
        swivel_t: scan.t_best,
        fidelity_bound_holds: scan.bound_holds,
        symmetry_residual,
        measured_bound_holds: max_marg <= measured_bound + BOOKKEEPING_SLACK,
        theorem_bound_holds: max_marg <= theorem_bound + BOOKKEEPING_SLACK,
        env_dim,
    };
    Ok(KExtension {
        report,
        omega: big_omega,
        b_copies: copies,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KChoice {
    pub k: usize,
    /// The formula gave 0; `k` was raised to 1.
    pub clamped: bool,
}

/// `k = ⌊(2/ln 2)^{1/4} |B| / ε^{1/4}⌋`, at least 1.
pub fn corollary_k_choice(eps: f64, dim_b: usize) -> Result<KChoice> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::DomainError(format!("eps must be positive, got {eps}")));
    }
    if dim_b < 2 {
        return Err(Error::DomainError(format!("dim B must be at least 2, got {dim_b}")));
    }
    let raw = (dim_b as f64 * ((2.0 / std::f64::consts::LN_2) / eps).powf(0.25)).floor();
    let k = if raw >= usize::MAX as f64 { usize::MAX } else { raw as usize };
    Ok(KChoice {
        k: k.max(1),
        clamped: k == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityCertificate {
    /// `measured_bound + 2|B|²/k`.
    pub certificate: f64,
    /// `3.1 |B| ε^{1/4}` with `ε = I/2`.
    pub headline: f64,
}

pub fn separable_distance_bound(report: &ExtensionReport, dim_b: usize) -> SeparabilityCertificate {
    let d = dim_b as f64;
    SeparabilityCertificate {
        certificate: report.measured_bound + 2.0 * d * d / report.k as f64,
        headline: 3.1 * d * report.epsilon().powf(0.25),
    }
}

/// One `‖ρ^{A_1…A_n} − Ω^{A_1 A_2^{j_2} … A_n^{j_n}}‖₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleDistance {
    /// `(j_2, …, j_n)`, 1-based.
    pub tuple: Vec<usize>,
    pub distance: f64,
    /// At most one `j_i ≠ 1`: the case where the triangle-inequality
    /// argument applies.
    pub single_deviation: bool,
}

/// Multi-party variant: from `ρ^{A_1…A_n E}`, extract `k` copies of each of
/// `A_2 … A_n` with separate Petz maps `E → E A_i` and measure every tuple
/// marginal after tracing out `E`. No bound is asserted.
pub fn multipartite_tuple_distances<S: AsRef<str>>(
    rho: &MultipartiteState,
    parts: &[S],
    e: &[S],
    k: usize,
) -> Result<Vec<TupleDistance>> {
    if parts.len() < 2 || k < 1 {
        return Err(Error::InvalidArgument("need at least two parties and k >= 1".into()));
    }
    let parts = owned(parts);
    let e = owned(e);
    let mut omega = rho.marginal_ordered(&parts.iter().chain(e.iter()).cloned().collect::<Vec<_>>())?;
    for p in &parts[1..] {
        let rec = cmi_swivelled_petz_map(rho, &e, std::slice::from_ref(p), 0.0)?;
        omega = iterate_recovery(&omega, &rec, k)?;
    }
    let mut keep: Vec<String> = vec![parts[0].clone()];
    for p in &parts[1..] {
        keep.extend((1..=k).map(|i| copy_label(p, i)));
    }
    let omega = omega.marginal_ordered(&keep)?;
    let reference = rho.marginal_ordered(&parts)?;
    let n = parts.len() - 1;
    let mut out = Vec::new();
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        let tuple: Vec<usize> = (0..n)
            .map(|_| {
                let j = c % k + 1;
                c /= k;
                j
            })
            .collect();
        let labels: Vec<String> = std::iter::once(parts[0].clone())
            .chain(parts[1..].iter().zip(&tuple).map(|(p, &j)| copy_label(p, j)))
            .collect();
        let m = omega.marginal_ordered(&labels)?.relabel(&parts)?;
        out.push(TupleDistance {
            single_deviation: tuple.iter().filter(|&&j| j != 1).count() <= 1,
            distance: trace_distance(&m, &reference)?,
            tuple,
        });
    }
    Ok(out)
}

/// `max_abs` distance between two states' matrices; used by tests and
/// examples as a cheap equality check.
pub fn max_entry_deviation(a: &MultipartiteState, b: &MultipartiteState) -> f64 {
    max_abs(&(a.matrix() - b.matrix()))
}
