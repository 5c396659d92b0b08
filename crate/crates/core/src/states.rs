//! Multipartite density matrices: validation, named fixtures, purifications,
//! random ensembles and block-structured Markov states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, cr, hermitian_eig, hermitize, hermiticity_deviation, max_abs, partial_trace, permute_positions,
    permute_subsystems, signed_permutations, CVec, Mat, SubsystemLayout, HERMITIAN_TOL,
};
use crate::rng::{ginibre, haar_unitary, rng_from_seed, TrialRng};

/// Cap on the total Hilbert-space dimension of generated states.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Trace and eigenvalue tolerance of the state invariants.
pub const STATE_TOL: f64 = 1e-10;

/// A density matrix together with the subsystem layout it lives on.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipartiteState {
    matrix: Mat,
    layout: SubsystemLayout,
}

impl MultipartiteState {
    /// Validates Hermiticity, unit trace and positivity (all within `1e-10`).
    /// Small Hermiticity drift is symmetrized away.
    pub fn new(matrix: Mat, layout: SubsystemLayout) -> Result<Self> {
        let state = Self::from_trusted(matrix, layout)?;
        state.validate()?;
        Ok(state)
    }

    /// Skips the spectral check. For outputs of maps already known to be
    /// completely positive and trace preserving.
    pub fn from_trusted(matrix: Mat, layout: SubsystemLayout) -> Result<Self> {
        layout.check_matrix(&matrix)?;
        let dev = hermiticity_deviation(&matrix);
        if !(dev <= HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian: max |m - m†| = {dev:e}")));
        }
        Ok(Self {
            matrix: hermitize(&matrix),
            layout,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {} + {}i, expected 1", tr.re, tr.im)));
        }
        let eig = hermitian_eig(&self.matrix)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn pure(ket: &CVec, layout: SubsystemLayout) -> Result<Self> {
        let norm = ket.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("ket has norm {norm}")));
        }
        Self::from_trusted(linalg::projector(ket), layout)
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(probs: &[f64], layout: SubsystemLayout) -> Result<Self> {
        Self::new(linalg::diagonal(probs), layout)
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            matrix: Mat::identity(d, d).scale(1.0 / d as f64),
            layout,
        }
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn labels(&self) -> &[String] {
        self.layout.labels()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn into_parts(self) -> (Mat, SubsystemLayout) {
        (self.matrix, self.layout)
    }

    /// Reduced state on `keep`, in layout order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let (m, l) = partial_trace(&self.matrix, &self.layout, keep)?;
        Ok(Self { matrix: m, layout: l })
    }

    /// Reduced state on `keep`, in the order given.
    pub fn marginal_ordered<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        self.marginal(keep)?.reorder(keep)
    }

    pub fn reorder<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let (m, l) = permute_subsystems(&self.matrix, &self.layout, order)?;
        Ok(Self { matrix: m, layout: l })
    }

    pub fn relabel<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.clone(),
            layout: self.layout.relabeled(labels)?,
        })
    }

    /// Renames one subsystem.
    pub fn rename(&self, from: &str, to: &str) -> Result<Self> {
        let pos = self.layout.position(from)?;
        let mut labels: Vec<String> = self.labels().to_vec();
        labels[pos] = to.to_string();
        self.relabel(&labels)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            matrix: linalg::tensor(&self.matrix, &other.matrix),
            layout: self.layout.concat(&other.layout)?,
        })
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_inner(&self.matrix, &self.matrix).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eig(&self.matrix)?.values)
    }

    /// Conjugation by the permutation that sends subsystem `perm[i]` to slot
    /// `i`, keeping the labels in place. Only meaningful when the moved
    /// subsystems share a dimension.
    pub(crate) fn permute_contents(&self, positions: &[usize], perm: &[usize]) -> Result<Self> {
        let mut full: Vec<usize> = (0..self.layout.len()).collect();
        for (slot, &src) in positions.iter().zip(perm.iter()) {
            full[*slot] = positions[src];
        }
        let dims = self.layout.dims();
        if full.iter().enumerate().any(|(i, &p)| dims[i] != dims[p]) {
            return Err(Error::DimensionMismatch(
                "permutation moves subsystems of different dimension".into(),
            ));
        }
        Ok(Self {
            matrix: permute_positions(&self.matrix, dims, &full),
            layout: self.layout.clone(),
        })
    }
}

/// Random-state ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Normalized complex Gaussian ket.
    HaarPure,
    /// `G G† / tr(G G†)` with `G` a square Ginibre matrix.
    HilbertSchmidtMixed,
    /// `(1+U) G G† (1+U)† / tr(...)`, `U` Haar.
    BuresMixed,
    /// `G G† / tr(G G†)` with `G` of shape `d × r`.
    RankLimited(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEnsembleSpec {
    pub ensemble: Ensemble,
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub seed: u64,
    pub dimension_cap: usize,
}

/// `A, B, C, ...` for up to 26 subsystems, `S0, S1, ...` beyond.
pub fn default_labels(n: usize) -> Vec<String> {
    if n <= 26 {
        (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
    } else {
        (0..n).map(|i| format!("S{i}")).collect()
    }
}

impl StateEnsembleSpec {
    pub fn new(ensemble: Ensemble, dims: &[usize], seed: u64) -> Self {
        Self {
            ensemble,
            dims: dims.to_vec(),
            labels: default_labels(dims.len()),
            seed,
            dimension_cap: DEFAULT_DIMENSION_CAP,
        }
    }

    /// Three-party spec labeled `A, E, B`.
    pub fn tripartite(ensemble: Ensemble, dims: [usize; 3], seed: u64) -> Self {
        Self::new(ensemble, &dims, seed).with_labels(&["A", "E", "B"])
    }

    pub fn with_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Self {
        self.labels = labels.iter().map(|l| l.as_ref().to_string()).collect();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub fn random_state(spec: &StateEnsembleSpec) -> Result<MultipartiteState> {
    if spec.dims.is_empty() {
        return Err(Error::InvalidArgument("ensemble spec has no subsystems".into()));
    }
    let layout = SubsystemLayout::new(spec.labels.iter().cloned(), &spec.dims)?;
    let d = layout.total_dim();
    if d > spec.dimension_cap {
        return Err(Error::DimensionCap {
            dim: d,
            cap: spec.dimension_cap,
        });
    }
    let factor = ensemble_factor(spec.ensemble, d, &mut rng_from_seed(spec.seed))?;
    Ok(state_from_factor(&factor, layout))
}

/// The factor `G` of a draw `G G† / tr(G G†)` from `ensemble` on dimension `d`.
pub(crate) fn ensemble_factor(ensemble: Ensemble, d: usize, rng: &mut TrialRng) -> Result<Mat> {
    Ok(match ensemble {
        Ensemble::HaarPure => ginibre(rng, d, 1),
        Ensemble::HilbertSchmidtMixed => ginibre(rng, d, d),
        Ensemble::BuresMixed => {
            let u = haar_unitary(rng, d);
            let g = ginibre(rng, d, d);
            (Mat::identity(d, d) + u) * g
        }
        Ensemble::RankLimited(r) => {
            if r == 0 {
                return Err(Error::InvalidArgument("rank_limited requires r >= 1".into()));
            }
            ginibre(rng, d, r)
        }
    })
}

/// `G G† / tr(G G†)`.
pub fn state_from_factor(g: &Mat, layout: SubsystemLayout) -> MultipartiteState {
    let m = g * g.adjoint();
    let t = m.trace().re;
    MultipartiteState {
        matrix: hermitize(&m.unscale(t)),
        layout,
    }
}

/// Canonical purification `(√ρ ⊗ 1)|Φ⟩`, `|Φ⟩ = Σ_i |i⟩|i⟩`. The purifier has
/// the full dimension of `rho` and is appended last.
pub fn purify(rho: &MultipartiteState, purifier_label: &str) -> Result<MultipartiteState> {
    let d = rho.dim();
    let root = linalg::matrix_function_on_support(rho.matrix(), f64::sqrt, None)?;
    let mut ket = CVec::zeros(d * d);
    for s in 0..d {
        for p in 0..d {
            ket[s * d + p] = root[(s, p)];
        }
    }
    let ket = ket.normalize();
    let layout = rho.layout().concat(&SubsystemLayout::new([purifier_label], &[d])?)?;
    MultipartiteState::pure(&ket, layout)
}

/// Purification on a purifier of dimension `rank(ρ)`: `Σ_j √λ_j |v_j⟩|j⟩`.
pub fn purify_compact(rho: &MultipartiteState, purifier_label: &str) -> Result<MultipartiteState> {
    let ket = compact_purification_ket(rho)?;
    let r = ket.len() / rho.dim();
    let layout = rho.layout().concat(&SubsystemLayout::new([purifier_label], &[r])?)?;
    MultipartiteState::pure(&ket, layout)
}

pub(crate) fn compact_purification_ket(rho: &MultipartiteState) -> Result<CVec> {
    let eig = hermitian_eig(rho.matrix())?;
    let cut = eig.cutoff(1e-12);
    let kept: Vec<usize> = (0..eig.values.len()).filter(|&j| eig.values[j] > cut).collect();
    let r = kept.len();
    let d = rho.dim();
    let mut ket = CVec::zeros(d * r);
    for (col, &j) in kept.iter().enumerate() {
        let w = eig.values[j].sqrt();
        for s in 0..d {
            ket[s * r + col] = eig.vectors[(s, j)] * w;
        }
    }
    Ok(ket.normalize())
}

fn max_exchange_deviation(omega: &MultipartiteState, positions: &[usize]) -> Result<f64> {
    let k = positions.len();
    let mut dev = 0.0f64;
    for i in 0..k.saturating_sub(1) {
        let mut perm: Vec<usize> = (0..k).collect();
        perm.swap(i, i + 1);
        let swapped = omega.permute_contents(positions, &perm)?;
        dev = dev.max(max_abs(&(swapped.matrix() - omega.matrix())));
    }
    Ok(dev)
}

/// `Ψ = (√Ω ⊗ 1)|Φ⟩^{AA'}|Φ⟩^{B₁B₁'}⋯|Φ⟩^{B_kB_k'}`. Every subsystem `L` of
/// `omega` is followed by its primed copy `L'`, so the output reads
/// `A A' B1 B1' ... Bk Bk'`.
pub fn permutation_invariant_purification<S: AsRef<str>>(
    omega: &MultipartiteState,
    b_labels: &[S],
) -> Result<MultipartiteState> {
    let positions = omega.layout().positions(b_labels)?;
    let dev = max_exchange_deviation(omega, &positions)?;
    if dev > 1e-8 {
        return Err(Error::NotSymmetric(dev));
    }
    let psi = purify(omega, "__purifier")?;
    // replace the single purifier by one primed copy per subsystem
    let primed: Vec<String> = omega.labels().iter().map(|l| format!("{l}'")).collect();
    let mut labels: Vec<String> = omega.labels().to_vec();
    labels.extend(primed.iter().cloned());
    let mut dims: Vec<usize> = omega.layout().dims().to_vec();
    dims.extend_from_slice(omega.layout().dims());
    let split = SubsystemLayout::new(labels, &dims)?;
    let (m, _) = psi.into_parts();
    let expanded = MultipartiteState::from_trusted(m, split)?;
    let order: Vec<String> = omega
        .labels()
        .iter()
        .zip(primed.iter())
        .flat_map(|(l, p)| [l.clone(), p.clone()])
        .collect();
    expanded.reorder(&order)
}

/// Normalized projector onto the antisymmetric subspace of `(C^d)^{⊗copies}`.
/// Labels are `A, B` for two copies and `A, B1, ..., B{copies-1}` otherwise.
pub fn antisymmetric_state(d: usize, copies: usize) -> Result<MultipartiteState> {
    if copies < 2 {
        return Err(Error::InvalidArgument("antisymmetric_state needs at least 2 copies".into()));
    }
    if copies > d {
        return Err(Error::TooManyCopies { dim: d, copies });
    }
    let total = d.checked_pow(copies as u32).unwrap_or(usize::MAX);
    if total > DEFAULT_DIMENSION_CAP {
        return Err(Error::DimensionCap {
            dim: total,
            cap: DEFAULT_DIMENSION_CAP,
        });
    }
    let perms = signed_permutations(copies);
    let norm = 1.0 / (perms.len() as f64).sqrt();
    let mut m = Mat::zeros(total, total);
    let mut rank = 0usize;
    for combo in increasing_tuples(d, copies) {
        let mut ket = CVec::zeros(total);
        for (perm, sign) in &perms {
            let idx = perm.iter().fold(0, |acc, &p| acc * d + combo[p]);
            ket[idx] += cr(norm * *sign as f64);
        }
        m += linalg::projector(&ket);
        rank += 1;
    }
    let labels: Vec<String> = if copies == 2 {
        vec!["A".into(), "B".into()]
    } else {
        std::iter::once("A".to_string())
            .chain((1..copies).map(|i| format!("B{i}")))
            .collect()
    };
    let layout = SubsystemLayout::new(labels, &vec![d; copies])?;
    MultipartiteState::from_trusted(m.unscale(rank as f64), layout)
}

fn increasing_tuples(d: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, n, &mut Vec::new(), &mut out);
    out
}

/// One block `p_j σ_j^{A e_j^L} ⊗ τ_j^{e_j^R B}` of a quantum Markov chain.
#[derive(Clone, Debug)]
pub struct MarkovBlock {
    pub weight: f64,
    /// Two subsystems: `A` then `e^L`.
    pub left: MultipartiteState,
    /// Two subsystems: `e^R` then `B`.
    pub right: MultipartiteState,
}

/// `⊕_j p_j σ_j ⊗ τ_j` on `A ⊗ E ⊗ B` with `E = ⊕_j e_j^L ⊗ e_j^R`. Blocks
/// occupy consecutive ranges of `E` in input order, `e_j^L` more significant
/// than `e_j^R` inside each block.
pub fn quantum_markov_chain(blocks: &[MarkovBlock]) -> Result<MultipartiteState> {
    if blocks.is_empty() {
        return Err(Error::BlockMismatch("no blocks".into()));
    }
    let total_weight: f64 = blocks.iter().map(|b| b.weight).sum();
    if blocks.iter().any(|b| b.weight < 0.0) || (total_weight - 1.0).abs() > 1e-12 {
        return Err(Error::BlockMismatch(format!(
            "weights must be nonnegative and sum to 1 (sum {total_weight})"
        )));
    }
    for (j, b) in blocks.iter().enumerate() {
        if b.left.layout().len() != 2 || b.right.layout().len() != 2 {
            return Err(Error::BlockMismatch(format!("block {j}: factors must be bipartite")));
        }
    }
    let d_a = blocks[0].left.layout().dims()[0];
    let d_b = blocks[0].right.layout().dims()[1];
    if blocks
        .iter()
        .any(|b| b.left.layout().dims()[0] != d_a || b.right.layout().dims()[1] != d_b)
    {
        return Err(Error::BlockMismatch("A and B dimensions differ between blocks".into()));
    }
    let d_e: usize = blocks
        .iter()
        .map(|b| b.left.layout().dims()[1] * b.right.layout().dims()[0])
        .sum();
    let total = d_a * d_e * d_b;
    if total > DEFAULT_DIMENSION_CAP {
        return Err(Error::DimensionCap {
            dim: total,
            cap: DEFAULT_DIMENSION_CAP,
        });
    }
    let mut m = Mat::zeros(total, total);
    let mut offset = 0usize;
    for b in blocks {
        let d_l = b.left.layout().dims()[1];
        let d_r = b.right.layout().dims()[0];
        let prod = linalg::tensor(b.left.matrix(), b.right.matrix());
        let mut map = Vec::with_capacity(prod.nrows());
        for a in 0..d_a {
            for l in 0..d_l {
                for r in 0..d_r {
                    for bb in 0..d_b {
                        map.push((a * d_e + offset + l * d_r + r) * d_b + bb);
                    }
                }
            }
        }
        for (x, &bx) in map.iter().enumerate() {
            for (y, &by) in map.iter().enumerate() {
                m[(bx, by)] += prod[(x, y)] * b.weight;
            }
        }
        offset += d_l * d_r;
    }
    let layout = SubsystemLayout::from_pairs(&[("A", d_a), ("E", d_e), ("B", d_b)])?;
    MultipartiteState::from_trusted(m, layout)
}

/// Standard fixtures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    /// `(|00⟩ + |11⟩)/√2` on `A, B`.
    Bell,
    /// `(|0…0⟩ + |1…1⟩)/√2` on `A, B, C, …`.
    Ghz(usize),
    /// `1/d` on `A`.
    MaximallyMixed(usize),
    /// `(1/d) Σ_i |ii⟩⟨ii|` on `A, B`.
    ClassicalCopy(usize),
}

pub fn named_state(name: NamedState) -> Result<MultipartiteState> {
    match name {
        NamedState::Bell => ghz_on(default_labels(2)),
        NamedState::Ghz(n) => {
            if n < 2 {
                return Err(Error::InvalidArgument("ghz needs at least 2 parties".into()));
            }
            ghz_on(default_labels(n))
        }
        NamedState::MaximallyMixed(d) => {
            if d == 0 {
                return Err(Error::InvalidArgument("dimension must be positive".into()));
            }
            Ok(MultipartiteState::maximally_mixed(SubsystemLayout::new(["A"], &[d])?))
        }
        NamedState::ClassicalCopy(d) => {
            if d == 0 {
                return Err(Error::InvalidArgument("dimension must be positive".into()));
            }
            let mut probs = vec![0.0; d * d];
            for i in 0..d {
                probs[i * d + i] = 1.0 / d as f64;
            }
            MultipartiteState::diagonal(&probs, SubsystemLayout::new(["A", "B"], &[d, d])?)
        }
    }
}

fn ghz_on(labels: Vec<String>) -> Result<MultipartiteState> {
    let n = labels.len();
    let d = 1usize << n;
    let mut ket = CVec::zeros(d);
    ket[0] = cr(std::f64::consts::FRAC_1_SQRT_2);
    ket[d - 1] = cr(std::f64::consts::FRAC_1_SQRT_2);
    MultipartiteState::pure(&ket, SubsystemLayout::new(labels, &vec![2; n])?)
}
