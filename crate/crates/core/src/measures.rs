//! Entanglement of formation and squashed-entanglement upper bounds by
//! restart-based local search, and the separable state built from a
//! pure-state decomposition.
//!
//! Both searches run over isometries acting on the purifying system of
//! `ρ^{AB} = Σ_j λ_j |v_j⟩⟨v_j|`. A decomposition is `√p_i |φ_i⟩ = Σ_j U_ij √λ_j |v_j⟩`
//! for an isometry `U` (`m × r`), and an extension is `tr_F` of `V|ψ⟩` for an
//! isometry `V : R → E ⊗ F` on the compact purification `|ψ⟩^{ABR}`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{conditional_mutual_information, matrix_entropy, matrix_trace_distance};
use crate::linalg::{cr, hermitian_eig, hermitize, isometry_from, max_abs, partial_trace_positions, CVec, Mat, Precision, SubsystemLayout};
use crate::rng::{ginibre, rng_from_seed, trial_seed};
use crate::states::{MultipartiteState, DEFAULT_DIMENSION_CAP};

/// A decomposition must reproduce its state entrywise to this tolerance.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

/// Slack on the separable-approximation inequality.
pub const SEPARABLE_SLACK: f64 = 1e-8;

/// Improvement over the last quarter of a run below which it counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    UpperBound,
    HeuristicMin,
}

/// Pure-state ensemble `{p_i, φ_i}` on a bipartite layout whose first
/// `split` subsystems form `A`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub probs: Vec<f64>,
    pub kets: Vec<CVec>,
    pub layout: SubsystemLayout,
    pub split: usize,
}

impl Decomposition {
    pub fn new(probs: Vec<f64>, kets: Vec<CVec>, layout: SubsystemLayout, split: usize) -> Result<Self> {
        if probs.len() != kets.len() || probs.is_empty() {
            return Err(Error::BadDecomposition(format!(
                "{} weights for {} kets",
                probs.len(),
                kets.len()
            )));
        }
        if split == 0 || split >= layout.len() {
            return Err(Error::InvalidArgument(format!("split {split} leaves an empty side")));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p.is_nan() || p < 0.0) || (total - 1.0).abs() > DECOMPOSITION_TOL {
            return Err(Error::BadDecomposition(format!("weights sum to {total}")));
        }
        let n = layout.total_dim();
        let mut normalized = Vec::with_capacity(kets.len());
        for k in kets {
            if k.len() != n {
                return Err(Error::DimensionMismatch(format!("ket of length {} on dimension {n}", k.len())));
            }
            let norm = k.norm();
            if norm == 0.0 {
                return Err(Error::BadDecomposition("zero ket".into()));
            }
            normalized.push(k.unscale(norm));
        }
        Ok(Decomposition {
            probs,
            kets: normalized,
            layout,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn a_labels(&self) -> &[String] {
        &self.layout.labels()[..self.split]
    }

    pub fn b_labels(&self) -> &[String] {
        &self.layout.labels()[self.split..]
    }

    fn side_dims(&self) -> (usize, usize) {
        let da: usize = self.layout.dims()[..self.split].iter().product();
        (da, self.layout.total_dim() / da)
    }

    /// `Σ p_i |φ_i⟩⟨φ_i|`.
    pub fn matrix(&self) -> Mat {
        let n = self.layout.total_dim();
        let mut m = Mat::zeros(n, n);
        for (p, k) in self.probs.iter().zip(&self.kets) {
            m += k * k.adjoint() * cr(*p);
        }
        m
    }

    /// `Σ p_i S(φ_i^A)`.
    pub fn average_entanglement(&self) -> Result<f64> {
        let (da, db) = self.side_dims();
        let mut total = 0.0;
        for (p, k) in self.probs.iter().zip(&self.kets) {
            total += p * ket_entropy(k.as_slice(), da, db)?.1;
        }
        Ok(total)
    }

    fn check_against(&self, rho: &MultipartiteState) -> Result<MultipartiteState> {
        let ordered = rho.marginal_ordered(self.layout.labels())?;
        if ordered.layout() != &self.layout || ordered.dim() != rho.dim() {
            return Err(Error::BadDecomposition("layout does not match the state".into()));
        }
        let dev = max_abs(&(self.matrix() - ordered.matrix()));
        if dev > DECOMPOSITION_TOL {
            return Err(Error::BadDecomposition(format!("reconstruction off by {dev:e}")));
        }
        Ok(ordered)
    }
}

#[derive(Clone, Debug)]
pub enum Witness {
    Decomposition(Decomposition),
    /// Extension `ρ^{ABE}`, environment last.
    Extension(MultipartiteState),
}

#[derive(Clone, Debug)]
pub struct MeasureEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub restarts: usize,
    pub converged: bool,
    pub witness: Witness,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub restarts: usize,
    pub steps: usize,
    /// Frobenius size of the first perturbation.
    pub initial_step: f64,
    /// Factor applied to the perturbation size after a rejected move.
    pub decay: f64,
    /// Factor applied after an accepted move, capped at `initial_step`.
    pub growth: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed: 0,
            restarts: 4,
            steps: 2000,
            initial_step: 0.5,
            decay: 0.9,
            growth: 1.5,
        }
    }
}

impl OptimizerConfig {
    pub fn with_restarts(restarts: usize) -> Self {
        OptimizerConfig {
            restarts,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) || !(self.growth >= 1.0) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument("step schedule needs 0 < decay < 1 <= growth and a positive first step".into()));
        }
        Ok(())
    }
}

/// `ρ^{AB}` reordered to `A B`, with its support eigenvectors scaled by `√λ`.
struct Bipartite {
    rho: MultipartiteState,
    split: usize,
    da: usize,
    db: usize,
    /// `n × r`, column `j` is `√λ_j |v_j⟩`.
    weighted: Mat,
}

impl Bipartite {
    fn new<S: AsRef<str>>(rho: &MultipartiteState, a: &[S], b: &[S]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument("both sides need at least one subsystem".into()));
        }
        for x in a {
            if b.iter().any(|y| y.as_ref() == x.as_ref()) {
                return Err(Error::OverlappingLabels(x.as_ref().to_string()));
            }
        }
        let order: Vec<&str> = a.iter().chain(b.iter()).map(|s| s.as_ref()).collect();
        let rho = rho.marginal_ordered(&order)?;
        let da = rho.layout().dim_of_all(a)?;
        let db = rho.dim() / da;
        let eig = hermitian_eig(rho.matrix())?;
        let cut = eig.cutoff(Precision::Standard.relative_cutoff());
        let kept: Vec<usize> = (0..eig.values.len()).filter(|&j| eig.values[j] > cut).collect();
        let n = rho.dim();
        let weighted = Mat::from_fn(n, kept.len(), |s, col| eig.vectors[(s, kept[col])] * eig.values[kept[col]].sqrt());
        Ok(Bipartite {
            rho,
            split: a.len(),
            da,
            db,
            weighted,
        })
    }

    fn rank(&self) -> usize {
        self.weighted.ncols()
    }

    /// Columns `√p_i |φ_i⟩` for the isometry `u` (`m × r`).
    fn ensemble(&self, u: &Mat) -> Mat {
        &self.weighted * u.transpose()
    }

    fn average_entropy(&self, u: &Mat) -> Result<f64> {
        let psi = self.ensemble(u);
        let mut total = 0.0;
        for i in 0..psi.ncols() {
            let (p, s) = ket_entropy(psi.column(i).as_slice(), self.da, self.db)?;
            total += p * s;
        }
        Ok(total)
    }

    /// Gradient of `average_entropy` with respect to `ū` (nats, up to a constant factor).
    fn entropy_gradient(&self, u: &Mat) -> Result<Mat> {
        let psi = self.ensemble(u);
        let mut h = Mat::zeros(psi.nrows(), psi.ncols());
        for i in 0..psi.ncols() {
            let m = Mat::from_fn(self.da, self.db, |x, y| psi[(x * self.db + y, i)]);
            let red = hermitize(&(&m * m.adjoint()));
            let p = red.trace().re;
            if p <= 0.0 {
                continue;
            }
            let eig = hermitian_eig(&red)?;
            let floor = 1e-300_f64.max(p * 1e-30);
            let g = eig.reconstruct_with(|l| cr(if l > floor { (p / l).ln() } else { 0.0 }));
            let gm = g * m;
            for x in 0..self.da {
                for y in 0..self.db {
                    h[(x * self.db + y, i)] = gm[(x, y)];
                }
            }
        }
        Ok((self.weighted.adjoint() * h).transpose())
    }

    fn decomposition(&self, u: &Mat) -> Result<Decomposition> {
        let psi = self.ensemble(u);
        let mut probs = Vec::new();
        let mut kets = Vec::new();
        for i in 0..psi.ncols() {
            let col = psi.column(i).into_owned();
            let p = col.norm_squared();
            if p > 1e-15 {
                probs.push(p);
                kets.push(col);
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Decomposition::new(probs, kets, self.rho.layout().clone(), self.split)
    }

    /// `U_ij = ⟨v_j|ψ̃_i⟩ / √λ_j`, the isometry behind a decomposition of this state.
    fn isometry_of(&self, dec: &Decomposition) -> Mat {
        let r = self.rank();
        Mat::from_fn(dec.len(), r, |i, j| {
            let col = self.weighted.column(j);
            let lambda = col.norm_squared();
            col.dotc(&dec.kets[i]) * cr(dec.probs[i].sqrt() / lambda)
        })
    }
}

/// `(‖ψ‖², S(ψ^A/‖ψ‖²))` for a ket laid out row-major on `da × db`.
fn ket_entropy(ket: &[nalgebra::Complex<f64>], da: usize, db: usize) -> Result<(f64, f64)> {
    let m = Mat::from_fn(da, db, |x, y| ket[x * db + y]);
    let red = if da <= db { &m * m.adjoint() } else { m.adjoint() * &m };
    let p = red.trace().re;
    if p <= 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((p, matrix_entropy(&hermitize(&red.unscale(p)), Precision::Standard)?.value))
}

/// Entropy of the squared singular values of `m`, normalized, with no cutoff.
fn schmidt_entropy(m: &Mat) -> f64 {
    let sv = m.singular_values();
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return 0.0;
    }
    sv.iter()
        .map(|s| s * s / total)
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum()
}

type Objective<'a> = dyn Fn(&Mat) -> Result<f64> + Sync + 'a;
type Gradient<'a> = dyn Fn(&Mat) -> Result<Mat> + Sync + 'a;

struct SearchResult {
    point: Mat,
    value: f64,
    converged: bool,
}

/// Accept-if-better random walk on isometries with geometrically shrinking steps.
fn local_search(
    start: Mat,
    cfg: &OptimizerConfig,
    rng: &mut impl Rng,
    f: &Objective<'_>,
) -> Result<SearchResult> {
    let (rows, cols) = start.shape();
    let scale = 1.0 / ((2 * rows * cols) as f64).sqrt();
    let mut x = start;
    let mut fx = f(&x)?;
    let mut step = cfg.initial_step;
    let tail = cfg.steps - cfg.steps / 4;
    let mut mark = fx;
    for s in 0..cfg.steps {
        if s == tail {
            mark = fx;
        }
        let g = ginibre(rng, rows, cols);
        let cand = isometry_from(&(&x + g * cr(step * scale)))?;
        let fc = f(&cand)?;
        if fc < fx {
            x = cand;
            fx = fc;
            step = (step * cfg.growth).min(cfg.initial_step);
        } else {
            step *= cfg.decay;
        }
    }
    Ok(SearchResult {
        point: x,
        value: fx,
        converged: mark - fx < CONVERGENCE_TOL,
    })
}

/// Runs every restart and keeps the lowest value; ties go to the earlier restart.
/// Backtracking descent along the projected gradient, retracting onto
/// isometries. Only improving moves are taken.
fn gradient_polish(
    start: SearchResult,
    steps: usize,
    f: &Objective<'_>,
    grad: &Gradient<'_>,
) -> Result<SearchResult> {
    let mut x = start.point;
    let mut fx = start.value;
    let mut eta = 0.1;
    let mut moved = 0;
    for _ in 0..steps {
        let g = grad(&x)?;
        let sym = x.adjoint() * &g;
        let g = &g - &x * ((&sym + sym.adjoint()) * cr(0.5));
        if g.norm() < 1e-14 {
            break;
        }
        let cand = isometry_from(&(&x - &g * cr(eta)))?;
        let fc = f(&cand)?;
        if fc < fx {
            x = cand;
            fx = fc;
            eta *= 2.0;
            moved += 1;
        } else {
            eta *= 0.25;
            if eta < 1e-16 {
                break;
            }
        }
    }
    Ok(SearchResult {
        point: x,
        value: fx,
        converged: start.converged || moved == 0,
    })
}

fn run_restarts(
    starts: &[Option<Mat>],
    shape: (usize, usize),
    cfg: &OptimizerConfig,
    f: &Objective<'_>,
    grad: Option<&Gradient<'_>>,
) -> Result<SearchResult> {
    let results: Vec<Result<SearchResult>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(trial_seed(cfg.seed, i as u64));
            let start = match starts.get(i) {
                Some(Some(m)) => m.clone(),
                _ => isometry_from(&ginibre(&mut rng, shape.0, shape.1))?,
            };
            let walk = local_search(start, cfg, &mut rng, f)?;
            match grad {
                Some(g) => gradient_polish(walk, cfg.steps, f, g),
                None => Ok(walk),
            }
        })
        .collect();
    let mut best: Option<SearchResult> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// `E_F` by local search over decompositions with `ensemble_size` members.
/// The value is the best average entanglement found, an upper bound on
/// the true minimum.
pub fn entanglement_of_formation<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    restarts: usize,
    ensemble_size: usize,
) -> Result<MeasureEstimate> {
    entanglement_of_formation_with(rho, a, b, ensemble_size, &OptimizerConfig::with_restarts(restarts))
}

pub fn entanglement_of_formation_with<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    ensemble_size: usize,
    cfg: &OptimizerConfig,
) -> Result<MeasureEstimate> {
    cfg.validate()?;
    let bp = Bipartite::new(rho, a, b)?;
    let r = bp.rank();
    if ensemble_size < r {
        return Err(Error::InvalidArgument(format!("ensemble size {ensemble_size} is below the rank {r}")));
    }
    // first restart starts from the eigendecomposition itself
    let eigen_start = Mat::from_fn(ensemble_size, r, |i, j| cr(if i == j { 1.0 } else { 0.0 }));
    let f = |u: &Mat| bp.average_entropy(u);
    // the walk stalls near product kets where the entropy is not Lipschitz,
    // so every restart ends with a gradient descent
    let grad = |u: &Mat| bp.entropy_gradient(u);
    let best = run_restarts(&[Some(eigen_start)], (ensemble_size, r), cfg, &f, Some(&grad))?;
    Ok(MeasureEstimate {
        value: best.value,
        kind: EstimateKind::HeuristicMin,
        restarts: cfg.restarts,
        converged: best.converged,
        witness: Witness::Decomposition(bp.decomposition(&best.point)?),
    })
}

/// Label for the environment that does not collide with `layout`.
fn fresh_label(layout: &SubsystemLayout, base: &str) -> String {
    let mut label = base.to_string();
    while layout.contains(&label) {
        label.push('\'');
    }
    label
}

struct ExtensionSearch<'a> {
    bp: &'a Bipartite,
    de: usize,
    df: usize,
}

impl ExtensionSearch<'_> {
    /// `ρ^{ABE} = M M†` with `M[(s, e), f] = Σ_j W[s, j] V[(e, f), j]`.
    fn factor(&self, v: &Mat) -> Mat {
        let w = &self.bp.weighted;
        let n = w.nrows();
        let wv = w * v.transpose(); // n × (de·df)
        Mat::from_fn(n * self.de, self.df, |row, f| {
            let (s, e) = (row / self.de, row % self.de);
            wv[(s, e * self.df + f)]
        })
    }

    fn half_cmi(&self, v: &Mat) -> Result<f64> {
        let m = self.factor(v);
        let rho = &m * m.adjoint();
        let dims = [self.bp.da, self.bp.db, self.de];
        let s = |kept: &[usize], traced: &[usize]| -> Result<f64> {
            let red = partial_trace_positions(&rho, &dims, kept, traced);
            Ok(matrix_entropy(&hermitize(&red), Precision::Standard)?.value)
        };
        let gram = m.adjoint() * &m;
        let s_abe = matrix_entropy(&hermitize(&gram), Precision::Standard)?.value;
        let cmi = s(&[0, 2], &[1])? + s(&[1, 2], &[0])? - s(&[2], &[0, 1])? - s_abe;
        Ok(0.5 * cmi)
    }

    fn extension(&self, v: &Mat, rho_layout: &SubsystemLayout) -> Result<MultipartiteState> {
        let m = self.factor(v);
        let env = fresh_label(rho_layout, "E");
        let layout = rho_layout.concat(&SubsystemLayout::new([env], &[self.de])?)?;
        MultipartiteState::from_trusted(&m * m.adjoint(), layout)
    }
}

/// Upper bound on `E_sq` from extensions with an environment of dimension
/// `env_dim`. When `env_dim ≥ rank ρ` an `E_F` search of ensemble size
/// `env_dim` runs first and its flagged extension seeds one restart.
pub fn squashed_entanglement_upper_bound<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    env_dim: usize,
    restarts: usize,
) -> Result<MeasureEstimate> {
    squashed_entanglement_upper_bound_seeded(rho, a, b, env_dim, &OptimizerConfig::with_restarts(restarts))
}

/// As [`squashed_entanglement_upper_bound`] with explicit optimizer settings.
pub fn squashed_entanglement_upper_bound_seeded<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    env_dim: usize,
    cfg: &OptimizerConfig,
) -> Result<MeasureEstimate> {
    let formation = if env_dim >= Bipartite::new(rho, a, b)?.rank() {
        match entanglement_of_formation_with(rho, a, b, env_dim, cfg)?.witness {
            Witness::Decomposition(d) => Some(d),
            Witness::Extension(_) => None,
        }
    } else {
        None
    };
    squashed_entanglement_upper_bound_with(rho, a, b, env_dim, cfg, formation.as_ref())
}

/// Number of eigenvalues of `ρ^{AB}` above the support cutoff.
pub fn bipartite_rank<S: AsRef<str>>(rho: &MultipartiteState, a: &[S], b: &[S]) -> Result<usize> {
    Ok(Bipartite::new(rho, a, b)?.rank())
}

/// Restart 0 starts from the purification (when `env_dim ≥ rank ρ`),
/// restart 1 from the flagged extension of `formation` (when it fits), the
/// rest from random isometries.
pub fn squashed_entanglement_upper_bound_with<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    b: &[S],
    env_dim: usize,
    cfg: &OptimizerConfig,
    formation: Option<&Decomposition>,
) -> Result<MeasureEstimate> {
    cfg.validate()?;
    if env_dim == 0 {
        return Err(Error::InvalidArgument("environment dimension must be at least 1".into()));
    }
    let bp = Bipartite::new(rho, a, b)?;
    let r = bp.rank();
    let n = bp.rho.dim();
    let cap = DEFAULT_DIMENSION_CAP;
    if n * env_dim > cap {
        return Err(Error::DimensionCap { dim: n * env_dim, cap });
    }
    let search = ExtensionSearch {
        bp: &bp,
        de: env_dim,
        df: r * env_dim,
    };
    let rows = search.de * search.df;
    let mut starts: Vec<Option<Mat>> = vec![None, None];
    if env_dim >= r {
        // V|j⟩ = |j⟩_E |0⟩_F
        starts[0] = Some(Mat::from_fn(rows, r, |row, j| cr(if row == j * search.df { 1.0 } else { 0.0 })));
    }
    if let Some(dec) = formation {
        dec.check_against(&bp.rho)?;
        if dec.len() <= env_dim {
            // V = Σ_i |i⟩_E |i⟩_F ⟨w_i|, ⟨w_i|j⟩ = U_ij
            let u = bp.isometry_of(dec);
            let mut v = Mat::zeros(rows, r);
            for i in 0..dec.len() {
                for j in 0..r {
                    v[(i * search.df + i, j)] = u[(i, j)];
                }
            }
            starts[1] = Some(isometry_from(&v)?);
        }
    }
    let f = |v: &Mat| search.half_cmi(v);
    let best = run_restarts(&starts, (rows, r), cfg, &f, None)?;
    Ok(MeasureEstimate {
        value: best.value,
        kind: EstimateKind::UpperBound,
        restarts: cfg.restarts,
        converged: best.converged,
        witness: Witness::Extension(search.extension(&best.point, bp.rho.layout())?),
    })
}

/// Builds `Σ_i p_i |φ_i⟩⟨φ_i| ⊗ |i⟩⟨i|^E` and returns `½ I(A:B|E)` on it.
pub fn formation_extension_cmi(rho: &MultipartiteState, dec: &Decomposition) -> Result<f64> {
    dec.check_against(rho)?;
    let n = dec.layout.total_dim();
    let m = dec.len();
    let mut ext = Mat::zeros(n * m, n * m);
    for (i, (p, k)) in dec.probs.iter().zip(&dec.kets).enumerate() {
        for s in 0..n {
            for t in 0..n {
                ext[(s * m + i, t * m + i)] += k[s] * k[t].conj() * cr(*p);
            }
        }
    }
    let env = fresh_label(&dec.layout, "E");
    let layout = dec.layout.concat(&SubsystemLayout::new([env.as_str()], &[m])?)?;
    let ext = MultipartiteState::from_trusted(ext, layout)?;
    Ok(0.5 * conditional_mutual_information(&ext, dec.a_labels(), dec.b_labels(), std::slice::from_ref(&env))?)
}

#[derive(Clone, Debug)]
pub struct SeparableApproximation {
    /// `Σ p_i φ_i^A ⊗ φ_i^B`.
    pub sigma: MultipartiteState,
    /// `‖ρ − σ‖₁`.
    pub distance: f64,
    /// `√(4 ln 2) √ε`, `ε = Σ p_i ½ I(A:B)_{φ_i}`.
    pub bound: f64,
    pub epsilon: f64,
    pub holds: bool,
}

pub fn separable_from_formation(rho: &MultipartiteState, dec: &Decomposition) -> Result<SeparableApproximation> {
    let ordered = dec.check_against(rho)?;
    let (da, db) = dec.side_dims();
    let n = da * db;
    let mut sigma = Mat::zeros(n, n);
    let mut epsilon = 0.0;
    for (p, k) in dec.probs.iter().zip(&dec.kets) {
        let m = Mat::from_fn(da, db, |x, y| k[x * db + y]);
        let ra = &m * m.adjoint();
        let rb = (m.adjoint() * &m).transpose();
        sigma += crate::linalg::tensor(&ra, &rb) * cr(*p);
        // pure: ½ I(A:B) = S(A)
        epsilon += p * schmidt_entropy(&m);
    }
    let distance = matrix_trace_distance(ordered.matrix(), &sigma, Precision::Standard)?;
    let bound = (4.0 * std::f64::consts::LN_2).sqrt() * epsilon.max(0.0).sqrt();
    Ok(SeparableApproximation {
        sigma: MultipartiteState::from_trusted(sigma, dec.layout.clone())?,
        distance,
        bound,
        epsilon,
        holds: distance <= bound + SEPARABLE_SLACK,
    })
}

/// `5 log(|A||B|) √δ + √δ log δ` for `0 < δ ≤ e⁻²`.
pub fn nielsen_bound(delta: f64, dim_a: usize, dim_b: usize) -> Result<f64> {
    let max = (-2.0f64).exp();
    if !(delta > 0.0 && delta <= max) {
        return Err(Error::DomainError(format!("delta = {delta} is outside (0, e^-2]")));
    }
    if dim_a == 0 || dim_b == 0 {
        return Err(Error::DomainError("dimensions must be positive".into()));
    }
    let r = delta.sqrt();
    Ok(5.0 * ((dim_a * dim_b) as f64).log2() * r + r * delta.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::entropy;
    use crate::linalg::tensor;
    use crate::states::{
        antisymmetric_state, named_state, quantum_markov_chain, random_state, Ensemble, MarkovBlock, NamedState,
        StateEnsembleSpec,
    };

    fn ab() -> SubsystemLayout {
        SubsystemLayout::from_pairs(&[("A", 2), ("B", 2)]).unwrap()
    }

    fn product_mixture(seed: u64, terms: usize) -> MultipartiteState {
        let mut rng = rng_from_seed(seed);
        let mut m = Mat::zeros(4, 4);
        for _ in 0..terms {
            let a = isometry_from(&ginibre(&mut rng, 2, 1)).unwrap();
            let b = isometry_from(&ginibre(&mut rng, 2, 1)).unwrap();
            let k = tensor(&a, &b);
            m += &k * k.adjoint() * cr(1.0 / terms as f64);
        }
        MultipartiteState::new(m, ab()).unwrap()
    }

    fn decomposition_of(est: &MeasureEstimate) -> &Decomposition {
        match &est.witness {
            Witness::Decomposition(d) => d,
            Witness::Extension(_) => panic!("expected a decomposition"),
        }
    }

    #[test]
    fn bell_formation_and_squashed_bounds() {
        let bell = named_state(NamedState::Bell).unwrap();
        let ef = entanglement_of_formation(&bell, &["A"], &["B"], 2, 1).unwrap();
        assert!((ef.value - 1.0).abs() < 1e-3);
        assert_eq!(ef.kind, EstimateKind::HeuristicMin);
        let esq = squashed_entanglement_upper_bound(&bell, &["A"], &["B"], 2, 2).unwrap();
        assert!((esq.value - 1.0).abs() < 1e-2);
        assert_eq!(esq.kind, EstimateKind::UpperBound);
        match esq.witness {
            Witness::Extension(x) => assert_eq!(x.labels(), &["A", "B", "E"]),
            Witness::Decomposition(_) => panic!("expected an extension"),
        }
    }

    #[test]
    fn separable_mixtures_have_vanishing_formation() {
        for seed in 0..3 {
            let rho = product_mixture(seed, 3);
            let est = entanglement_of_formation(&rho, &["A"], &["B"], 4, 3).unwrap();
            assert!(est.value <= 1e-3, "seed {seed}: {}", est.value);
            let dec = decomposition_of(&est);
            assert!(max_abs(&(dec.matrix() - rho.matrix())) < 1e-9);
        }
    }

    #[test]
    fn markov_chain_marginal_has_small_squashed_bound() {
        let block = |s: u64| MarkovBlock {
            weight: 0.5,
            left: random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 1], s))
                .unwrap()
                .relabel(&["A", "L"])
                .unwrap(),
            right: random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[1, 2], s + 1)).unwrap(),
        };
        let chain = quantum_markov_chain(&[block(3), block(8)]).unwrap();
        let rho = chain.marginal(&["A", "B"]).unwrap();
        let rank = rho.eigenvalues().unwrap().iter().filter(|&&l| l > 1e-12).count();
        let est = squashed_entanglement_upper_bound(&rho, &["A"], &["B"], 2 * rank, 4).unwrap();
        assert!(est.value <= 1e-3, "{}", est.value);
    }

    #[test]
    fn antisymmetric_state_starts_from_its_extension() {
        let alpha = antisymmetric_state(3, 2).unwrap();
        let est = squashed_entanglement_upper_bound(&alpha, &["A"], &["B"], 3, 2).unwrap();
        assert!(est.value <= 0.5 * 3f64.log2() + 1e-2, "{}", est.value);
        assert!(est.value <= 0.80);
    }

    #[test]
    fn squashed_bound_never_exceeds_formation_start() {
        for seed in 0..3 {
            let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], seed)).unwrap();
            let cfg = OptimizerConfig {
                seed,
                ..OptimizerConfig::with_restarts(2)
            };
            let ef = entanglement_of_formation_with(&rho, &["A"], &["B"], 4, &cfg).unwrap();
            let dec = decomposition_of(&ef);
            let esq = squashed_entanglement_upper_bound_with(&rho, &["A"], &["B"], 4, &cfg, Some(dec)).unwrap();
            assert!(esq.value <= ef.value + 5e-3);
            assert!(esq.value >= -1e-9);
        }
    }

    #[test]
    fn same_seed_same_estimate() {
        let rho = random_state(&StateEnsembleSpec::new(Ensemble::BuresMixed, &[2, 2], 9)).unwrap();
        let cfg = OptimizerConfig {
            seed: 17,
            steps: 300,
            ..OptimizerConfig::with_restarts(3)
        };
        let x = entanglement_of_formation_with(&rho, &["A"], &["B"], 5, &cfg).unwrap();
        let y = entanglement_of_formation_with(&rho, &["A"], &["B"], 5, &cfg).unwrap();
        assert_eq!(x.value.to_bits(), y.value.to_bits());
    }

    #[test]
    fn ensemble_below_rank_is_rejected() {
        let rho = named_state(NamedState::MaximallyMixed(4)).unwrap().relabel(&["A"]).unwrap();
        let rho = MultipartiteState::new(rho.matrix().clone(), ab()).unwrap();
        assert!(matches!(
            entanglement_of_formation(&rho, &["A"], &["B"], 1, 3),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            entanglement_of_formation(&rho, &["A"], &["A"], 1, 4),
            Err(Error::OverlappingLabels(_))
        ));
    }

    #[test]
    fn formation_extension_two_paths() {
        let pure = random_state(&StateEnsembleSpec::new(Ensemble::HaarPure, &[2, 3], 2)).unwrap();
        let ket = crate::states::compact_purification_ket(&pure).unwrap();
        let dec = Decomposition::new(vec![1.0], vec![ket], pure.layout().clone(), 1).unwrap();
        let half = formation_extension_cmi(&pure, &dec).unwrap();
        assert!((half - entropy(&pure, &["A"]).unwrap()).abs() < 1e-8);

        let rho = random_state(&StateEnsembleSpec::new(Ensemble::HilbertSchmidtMixed, &[2, 2], 4)).unwrap();
        let bp = Bipartite::new(&rho, &["A"], &["B"]).unwrap();
        let mut rng = rng_from_seed(5);
        for _ in 0..5 {
            let u = isometry_from(&ginibre(&mut rng, 6, bp.rank())).unwrap();
            let dec = bp.decomposition(&u).unwrap();
            let direct = dec.average_entanglement().unwrap();
            assert!((formation_extension_cmi(&rho, &dec).unwrap() - direct).abs() < 1e-8);
            assert!((bp.average_entropy(&u).unwrap() - direct).abs() < 1e-10);
            assert!(max_abs(&(bp.isometry_of(&dec) - &u)) < 1e-8);
        }
    }

    #[test]
    fn bad_decompositions_are_rejected() {
        let bell = named_state(NamedState::Bell).unwrap();
        let wrong = Decomposition::new(vec![1.0], vec![CVec::from_fn(4, |i, _| cr(if i == 0 { 1.0 } else { 0.0 }))], ab(), 1)
            .unwrap();
        assert!(matches!(formation_extension_cmi(&bell, &wrong), Err(Error::BadDecomposition(_))));
        assert!(matches!(separable_from_formation(&bell, &wrong), Err(Error::BadDecomposition(_))));
        assert!(Decomposition::new(vec![0.4, 0.4], vec![CVec::zeros(4), CVec::zeros(4)], ab(), 1).is_err());
    }

    #[test]
    fn separable_approximation() {
        let bell = named_state(NamedState::Bell).unwrap();
        let ket = crate::states::compact_purification_ket(&bell).unwrap();
        let dec = Decomposition::new(vec![1.0], vec![ket], ab(), 1).unwrap();
        let s = separable_from_formation(&bell, &dec).unwrap();
        assert!((s.distance - 1.5).abs() < 1e-10);
        assert!((s.bound - (4.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-10);
        assert!(s.holds);

        let rho = product_mixture(1, 2);
        let est = entanglement_of_formation(&rho, &["A"], &["B"], 2, 2).unwrap();
        let s = separable_from_formation(&rho, decomposition_of(&est)).unwrap();
        assert!(s.holds);
        assert!(s.distance < 0.05);

        let prod = product_mixture(2, 1);
        let dec = Decomposition::new(vec![1.0], vec![crate::states::compact_purification_ket(&prod).unwrap()], ab(), 1)
            .unwrap();
        assert!(separable_from_formation(&prod, &dec).unwrap().distance < 1e-10);
    }

    #[test]
    fn nielsen_formula() {
        let max = (-2.0f64).exp();
        let v = nielsen_bound(max, 2, 2).unwrap();
        let expected = 5.0 * 2.0 * (-1.0f64).exp() + (-1.0f64).exp() * max.log2();
        assert!((v - expected).abs() < 1e-12);
        assert!(nielsen_bound(1e-12, 2, 2).unwrap().abs() < 1e-4);
        assert!(nielsen_bound(0.05, 2, 3).unwrap() > nielsen_bound(0.05, 2, 2).unwrap());
        assert!(matches!(nielsen_bound(0.2, 2, 2), Err(Error::DomainError(_))));
        assert!(matches!(nielsen_bound(0.0, 2, 2), Err(Error::DomainError(_))));
    }
}
