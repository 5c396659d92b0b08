//! Entropies, relative entropy, fidelity and trace distance. Everything is
//! in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig_with, nuclear_norm, psd_function, Mat, Precision};
use crate::states::MultipartiteState;

/// Support test for relative entropy: `ρ`-mass outside `supp σ` above this
/// makes `D(ρ‖σ)` infinite.
pub const SUPPORT_MASS_TOL: f64 = 1e-9;

/// Slack for the Fuchs–van de Graaf check.
pub const FVDG_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub value: f64,
    pub support_rank: usize,
    pub cutoff_used: f64,
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Von Neumann entropy of a PSD matrix.
pub fn matrix_entropy(m: &Mat, precision: Precision) -> Result<EntropyReport> {
    let eig = hermitian_eig_with(m, precision)?;
    let cut = eig.cutoff(precision.relative_cutoff());
    let kept: Vec<f64> = eig.values.iter().copied().filter(|&l| l > cut).collect();
    Ok(EntropyReport {
        value: -kept.iter().map(|&l| xlog2x(l)).sum::<f64>(),
        support_rank: kept.len(),
        cutoff_used: cut,
    })
}

/// `S(X)` of the marginal on `subsystems`. The empty set has entropy 0.
pub fn entropy<S: AsRef<str>>(rho: &MultipartiteState, subsystems: &[S]) -> Result<f64> {
    entropy_with(rho, subsystems, Precision::Standard)
}

pub fn entropy_with<S: AsRef<str>>(rho: &MultipartiteState, subsystems: &[S], precision: Precision) -> Result<f64> {
    Ok(entropy_report(rho, subsystems, precision)?.value)
}

pub fn entropy_report<S: AsRef<str>>(
    rho: &MultipartiteState,
    subsystems: &[S],
    precision: Precision,
) -> Result<EntropyReport> {
    if subsystems.is_empty() {
        rho.layout().positions(subsystems)?;
        return Ok(EntropyReport {
            value: 0.0,
            support_rank: 1,
            cutoff_used: 0.0,
        });
    }
    let marg = rho.marginal(subsystems)?;
    matrix_entropy(marg.matrix(), precision)
}

fn check_disjoint(groups: &[&[String]]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for g in groups {
        for l in g.iter() {
            if !seen.insert(l.as_str()) {
                return Err(Error::OverlappingLabels(l.clone()));
            }
        }
    }
    Ok(())
}

fn owned<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    labels.iter().map(|l| l.as_ref().to_string()).collect()
}

fn union(groups: &[&[String]]) -> Vec<String> {
    groups.iter().flat_map(|g| g.iter().cloned()).collect()
}

/// `I(A:B|E) = S(AE) + S(BE) − S(E) − S(ABE)`, returned raw (it can dip a
/// hair below zero from rounding; see [`clamp_cmi`]).
pub fn conditional_mutual_information<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    e: &[S],
) -> Result<f64> {
    conditional_mutual_information_with(rho, a, b, e, Precision::Standard)
}

pub fn conditional_mutual_information_with<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    e: &[S],
    precision: Precision,
) -> Result<f64> {
    let (a, b, e) = (owned(a), owned(b), owned(e));
    check_disjoint(&[&a, &b, &e])?;
    let s = |labels: Vec<String>| entropy_with(rho, &labels, precision);
    Ok(s(union(&[&a, &e]))? + s(union(&[&b, &e]))? - s(e.clone())? - s(union(&[&a, &b, &e]))?)
}

/// `I(A:B) = S(A) + S(B) − S(AB)`.
pub fn mutual_information<S: AsRef<str>>(rho: &MultipartiteState, a: &[S], b: &[S]) -> Result<f64> {
    conditional_mutual_information::<S>(rho, a, b, &[])
}

/// Reporting convention: values in `[-1e-8, 0)` print as 0.
pub fn clamp_cmi(raw: f64) -> f64 {
    if (-1e-8..0.0).contains(&raw) {
        0.0
    } else {
        raw
    }
}

/// `Σ_i S(A_i|E) − S(A_1…A_n|E)`.
pub fn conditional_multi_information<S: AsRef<str>>(
    rho: &MultipartiteState,
    parts: &[Vec<S>],
    e: &[S],
) -> Result<f64> {
    let parts: Vec<Vec<String>> = parts.iter().map(|p| owned(p)).collect();
    let e = owned(e);
    let mut groups: Vec<&[String]> = parts.iter().map(|p| p.as_slice()).collect();
    groups.push(&e);
    check_disjoint(&groups)?;
    let s_e = entropy(rho, &e)?;
    let mut total = 0.0;
    for p in &parts {
        total += entropy(rho, &union(&[p, &e]))? - s_e;
    }
    Ok(total - (entropy(rho, &union(&groups))? - s_e))
}

/// `Σ_{i<n} I(A_i : A_{i+1}…A_n | E)`, the chain-rule form of the same quantity.
pub fn conditional_multi_information_chain<S: AsRef<str>>(
    rho: &MultipartiteState,
    parts: &[Vec<S>],
    e: &[S],
) -> Result<f64> {
    let parts: Vec<Vec<String>> = parts.iter().map(|p| owned(p)).collect();
    let e = owned(e);
    let mut groups: Vec<&[String]> = parts.iter().map(|p| p.as_slice()).collect();
    groups.push(&e);
    check_disjoint(&groups)?;
    let mut total = 0.0;
    for i in 0..parts.len().saturating_sub(1) {
        let rest: Vec<String> = parts[i + 1..].iter().flatten().cloned().collect();
        total += conditional_mutual_information(rho, &parts[i], &rest, &e)?;
    }
    Ok(total)
}

/// `D(ρ‖σ) = tr ρ (log ρ − log σ)` for PSD matrices, `+∞` when the support
/// of `ρ` is not inside that of `σ`.
pub fn matrix_relative_entropy(rho: &Mat, sigma: &Mat, precision: Precision) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy of {:?} against {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    let es = hermitian_eig_with(sigma, precision)?;
    let cut = es.cutoff(precision.relative_cutoff());
    // diagonal of ρ in σ's eigenbasis
    let w = es.vectors.adjoint() * rho * &es.vectors;
    let mut cross = 0.0;
    let mut outside = 0.0;
    for (j, &l) in es.values.iter().enumerate() {
        let mass = w[(j, j)].re;
        if l > cut {
            cross += mass * l.log2();
        } else {
            outside += mass;
        }
    }
    if outside > SUPPORT_MASS_TOL {
        return Ok(f64::INFINITY);
    }
    let s = matrix_entropy(rho, precision)?.value;
    Ok(-s - cross)
}

pub fn relative_entropy(rho: &MultipartiteState, sigma: &MultipartiteState) -> Result<f64> {
    matrix_relative_entropy(rho.matrix(), sigma.matrix(), Precision::Standard)
}

/// `F(α,β) = ‖√α √β‖₁`, clipped to `[0, 1]`.
pub fn matrix_fidelity(alpha: &Mat, beta: &Mat, precision: Precision) -> Result<f64> {
    if alpha.shape() != beta.shape() {
        return Err(Error::DimensionMismatch("fidelity of operators of different size".into()));
    }
    let ra = psd_function(alpha, f64::sqrt, precision)?;
    let rb = psd_function(beta, f64::sqrt, precision)?;
    Ok(nuclear_norm(&(ra * rb)).clamp(0.0, 1.0))
}

pub fn fidelity(alpha: &MultipartiteState, beta: &MultipartiteState) -> Result<f64> {
    matrix_fidelity(alpha.matrix(), beta.matrix(), Precision::Standard)
}

/// `‖α − β‖₁` (not halved), in `[0, 2]` for states.
pub fn matrix_trace_distance(alpha: &Mat, beta: &Mat, precision: Precision) -> Result<f64> {
    if alpha.shape() != beta.shape() {
        return Err(Error::DimensionMismatch("trace distance of operators of different size".into()));
    }
    let eig = hermitian_eig_with(&(alpha - beta), precision)?;
    Ok(eig.values.iter().map(|v| v.abs()).sum())
}

pub fn trace_distance(alpha: &MultipartiteState, beta: &MultipartiteState) -> Result<f64> {
    matrix_trace_distance(alpha.matrix(), beta.matrix(), Precision::Standard)
}

/// `1 − F ≤ ½‖α−β‖₁ ≤ √(1 − F²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvdgCheck {
    pub lhs: f64,
    pub mid: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_fuchs_van_de_graaf(alpha: &MultipartiteState, beta: &MultipartiteState) -> Result<FvdgCheck> {
    let f = fidelity(alpha, beta)?;
    let mid = 0.5 * trace_distance(alpha, beta)?;
    let lhs = 1.0 - f;
    let rhs = (1.0 - f * f).max(0.0).sqrt();
    Ok(FvdgCheck {
        lhs,
        mid,
        rhs,
        holds: lhs <= mid + FVDG_SLACK && mid <= rhs + FVDG_SLACK,
    })
}

fn unit_interval(x: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::DomainError(format!("{what} = {x} is outside [0, 1]")));
    }
    Ok(())
}

/// `H₂(x) = −x log x − (1−x) log(1−x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    unit_interval(x, "x")?;
    Ok(-xlog2x(x) - xlog2x(1.0 - x))
}

/// `8 ε log|A| + 4 H₂(ε)`.
pub fn alicki_fannes_bound(eps: f64, dim_a: usize) -> Result<f64> {
    unit_interval(eps, "eps")?;
    if dim_a == 0 {
        return Err(Error::DomainError("dimension must be positive".into()));
    }
    Ok(8.0 * eps * (dim_a as f64).log2() + 4.0 * binary_entropy(eps)?)
}
