//! Probability vectors, column-stochastic maps and the classical transpose
//! channel `R(x|u) = T(u|x) Q(x) / (TQ)(u)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SubsystemLayout;
use crate::states::MultipartiteState;

pub const PROB_TOL: f64 = 1e-12;
pub const THEOREM5_TOL: f64 = 1e-10;

/// Joint distribution over the variables of `layout`, row-major with the
/// first variable most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
    layout: SubsystemLayout,
}

impl Distribution {
    pub fn new(probs: Vec<f64>, layout: SubsystemLayout) -> Result<Self> {
        if probs.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for alphabet size {}",
                probs.len(),
                layout.total_dim()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidState(format!("invalid probability {p}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {s}")));
        }
        Ok(Self { probs, layout })
    }

    /// Single variable `X`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let n = probs.len();
        Self::new(probs, SubsystemLayout::new(["X"], &[n])?)
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: &[f64], layout: SubsystemLayout) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidState("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / s).collect(), layout)
    }

    pub fn uniform(layout: SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self {
            probs: vec![1.0 / n as f64; n],
            layout,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Marginal on `keep`, in layout order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let mut kept = self.layout.positions(keep)?;
        kept.sort_unstable();
        let dims = self.layout.dims();
        let out_layout = self.layout.select(&kept);
        let mut out = vec![0.0; out_layout.total_dim()];
        for (flat, &p) in self.probs.iter().enumerate() {
            let digits = digits_of(flat, dims);
            let idx = kept.iter().fold(0, |acc, &k| acc * dims[k] + digits[k]);
            out[idx] += p;
        }
        Ok(Self {
            probs: out,
            layout: out_layout,
        })
    }

    /// `Σ_x p_x |x⟩⟨x|` on the same layout.
    pub fn diagonal_embedding(&self) -> Result<MultipartiteState> {
        MultipartiteState::diagonal(&self.probs, self.layout.clone())
    }
}

fn digits_of(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        d[i] = flat % dims[i];
        flat /= dims[i];
    }
    d
}

/// `T = [t_{ux}]`, rows indexed by outputs `u`, columns by inputs `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMap {
    matrix: DMatrix<f64>,
    out_layout: SubsystemLayout,
}

impl StochasticMap {
    pub fn new(matrix: DMatrix<f64>, out_layout: SubsystemLayout) -> Result<Self> {
        if matrix.nrows() != out_layout.total_dim() {
            return Err(Error::DimensionMismatch("output layout does not match matrix rows".into()));
        }
        if matrix.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument("transition probabilities must be finite and nonnegative".into()));
        }
        for (x, col) in matrix.column_iter().enumerate() {
            let s: f64 = col.sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidArgument(format!("column {x} sums to {s}")));
            }
        }
        Ok(Self { matrix, out_layout })
    }

    /// Output variable labeled `U`.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, SubsystemLayout::new(["U"], &[n])?)
    }

    pub fn identity(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self {
            matrix: DMatrix::identity(n, n),
            out_layout: layout.clone(),
        }
    }

    /// `x ↦ f(x)`.
    pub fn deterministic(f: &[usize], out_layout: SubsystemLayout) -> Result<Self> {
        let n_out = out_layout.total_dim();
        let mut m = DMatrix::zeros(n_out, f.len());
        for (x, &u) in f.iter().enumerate() {
            if u >= n_out {
                return Err(Error::InvalidArgument(format!("f({x}) = {u} is out of range")));
            }
            m[(u, x)] = 1.0;
        }
        Self::new(m, out_layout)
    }

    /// Marginalization onto `keep`.
    pub fn marginalization<S: AsRef<str>>(layout: &SubsystemLayout, keep: &[S]) -> Result<Self> {
        let mut kept = layout.positions(keep)?;
        kept.sort_unstable();
        let dims = layout.dims();
        let f: Vec<usize> = (0..layout.total_dim())
            .map(|flat| {
                let d = digits_of(flat, dims);
                kept.iter().fold(0, |acc, &k| acc * dims[k] + d[k])
            })
            .collect();
        Self::deterministic(&f, layout.select(&kept))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn out_layout(&self) -> &SubsystemLayout {
        &self.out_layout
    }

    pub fn in_size(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn out_size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Every column has one entry `≥ 1 − 1e-12`.
    pub fn is_deterministic(&self) -> bool {
        self.matrix
            .column_iter()
            .all(|c| c.iter().filter(|&&t| t >= 1.0 - PROB_TOL).count() == 1)
    }

    /// `T ∘ self`.
    pub fn then(&self, t: &StochasticMap) -> Result<StochasticMap> {
        if t.in_size() != self.out_size() {
            return Err(Error::DimensionMismatch("composition sizes differ".into()));
        }
        Ok(StochasticMap {
            matrix: &t.matrix * &self.matrix,
            out_layout: t.out_layout.clone(),
        })
    }
}

/// `TP = (Σ_x t_{ux} p_x)_u`.
pub fn push(t: &StochasticMap, p: &Distribution) -> Result<Distribution> {
    if t.in_size() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "map takes {} symbols, distribution has {}",
            t.in_size(),
            p.len()
        )));
    }
    let probs: Vec<f64> = (0..t.out_size())
        .map(|u| (0..p.len()).map(|x| t.matrix[(u, x)] * p.probs[x]).sum())
        .collect();
    Ok(Distribution {
        probs,
        layout: t.out_layout.clone(),
    })
}

/// Bayes inverse of `T` with prior `Q`. Columns `u` with `(TQ)(u) = 0` are set
/// to `Q`.
pub fn transpose_channel(t: &StochasticMap, q: &Distribution) -> Result<StochasticMap> {
    let tq = push(t, q)?;
    let mut r = DMatrix::zeros(q.len(), t.out_size());
    for u in 0..t.out_size() {
        let denom = tq.probs[u];
        for x in 0..q.len() {
            r[(x, u)] = if denom > 0.0 {
                t.matrix[(u, x)] * q.probs[x] / denom
            } else {
                q.probs[x]
            };
        }
    }
    // columns are exact up to rounding; renormalize so the invariant is tight
    for mut col in r.column_iter_mut() {
        let s: f64 = col.sum();
        col /= s;
    }
    StochasticMap::new(r, q.layout.clone())
}

pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

/// `D(P‖Q)` in bits, `+∞` when `P` has mass where `Q` has none.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch("distributions of different size".into()));
    }
    let mut d = 0.0;
    for (&a, &b) in p.probs.iter().zip(q.probs.iter()) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += a * (a / b).log2();
        }
    }
    Ok(d)
}

pub fn l1_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch("distributions of different size".into()));
    }
    Ok(p.probs.iter().zip(q.probs.iter()).map(|(a, b)| (a - b).abs()).sum())
}

/// `D(P‖Q) − D(TP‖TQ) ≥ D(P‖RTP)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Check {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub deterministic: bool,
    pub equality: bool,
}

pub fn check_theorem5(p: &Distribution, q: &Distribution, t: &StochasticMap) -> Result<Theorem5Check> {
    let tp = push(t, p)?;
    let tq = push(t, q)?;
    let d_pq = kl_divergence(p, q)?;
    let lhs = if d_pq.is_infinite() {
        f64::INFINITY
    } else {
        d_pq - kl_divergence(&tp, &tq)?
    };
    let r = transpose_channel(t, q)?;
    let rtp = push(&r, &tp)?;
    let rhs = kl_divergence(p, &rtp)?;
    let gap = if lhs.is_infinite() { f64::INFINITY } else { lhs - rhs };
    Ok(Theorem5Check {
        lhs,
        rhs,
        gap,
        deterministic: t.is_deterministic(),
        equality: gap.abs() <= THEOREM5_TOL,
    })
}

fn three_vars(p: &Distribution) -> Result<[usize; 3]> {
    match p.layout.dims() {
        &[x, y, z] => Ok([x, y, z]),
        d => Err(Error::InvalidArgument(format!(
            "expected a joint distribution of three variables, got {} variables",
            d.len()
        ))),
    }
}

/// `Q(xyz) = P(xy) P(z|y)`; `P(z|y)` is uniform when `P(y) = 0`.
pub fn markov_projection(p: &Distribution) -> Result<Distribution> {
    let [nx, ny, nz] = three_vars(p)?;
    let at = |x: usize, y: usize, z: usize| p.probs[(x * ny + y) * nz + z];
    let mut pxy = vec![0.0; nx * ny];
    let mut pyz = vec![0.0; ny * nz];
    let mut py = vec![0.0; ny];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let v = at(x, y, z);
                pxy[x * ny + y] += v;
                pyz[y * nz + z] += v;
                py[y] += v;
            }
        }
    }
    let mut q = vec![0.0; p.len()];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let cond = if py[y] > 0.0 { pyz[y * nz + z] / py[y] } else { 1.0 / nz as f64 };
                q[(x * ny + y) * nz + z] = pxy[x * ny + y] * cond;
            }
        }
    }
    Ok(Distribution {
        probs: q,
        layout: p.layout.clone(),
    })
}

/// `I(X:Z|Y) = H(XY) + H(YZ) − H(Y) − H(XYZ)` for a three-variable joint
/// ordered `X, Y, Z`.
pub fn classical_conditional_mutual_information(p: &Distribution) -> Result<f64> {
    three_vars(p)?;
    let l = p.layout.labels().to_vec();
    let h = |keep: &[&String]| -> Result<f64> { Ok(shannon_entropy(&p.marginal(keep)?.probs)) };
    Ok(h(&[&l[0], &l[1]])? + h(&[&l[1], &l[2]])? - h(&[&l[1]])? - shannon_entropy(&p.probs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Check {
    pub cmi: f64,
    pub divergence: f64,
    pub l1: f64,
    pub pinsker_bound: f64,
    pub holds: bool,
}

/// `D(P‖Q) = I(X:Z|Y)` and `‖P − Q‖₁ ≤ √(2 ln 2) √I` for the Markov
/// projection `Q`.
pub fn check_theorem4(p: &Distribution) -> Result<Theorem4Check> {
    let q = markov_projection(p)?;
    let cmi = classical_conditional_mutual_information(p)?;
    let divergence = kl_divergence(p, &q)?;
    let l1 = l1_distance(p, &q)?;
    let pinsker_bound = (2.0 * std::f64::consts::LN_2).sqrt() * cmi.max(0.0).sqrt();
    Ok(Theorem4Check {
        cmi,
        divergence,
        l1,
        pinsker_bound,
        holds: (divergence - cmi).abs() <= 1e-10 && l1 <= pinsker_bound + 1e-9,
    })
}

/// Flat Dirichlet sample on `n` symbols.
pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn random_distribution(rng: &mut impl Rng, layout: SubsystemLayout) -> Distribution {
    Distribution {
        probs: random_probs(rng, layout.total_dim()),
        layout,
    }
}

/// Independent flat Dirichlet columns.
pub fn random_stochastic_map(rng: &mut impl Rng, n_out: usize, n_in: usize) -> StochasticMap {
    let mut m = DMatrix::zeros(n_out, n_in);
    for x in 0..n_in {
        let col = random_probs(rng, n_out);
        for u in 0..n_out {
            m[(u, x)] = col[u];
        }
    }
    StochasticMap {
        matrix: m,
        out_layout: SubsystemLayout::new(["U"], &[n_out]).expect("nonzero size"),
    }
}

/// All `n_out^{n_in}` functions `x ↦ u`.
pub fn all_deterministic_maps(n_in: usize, n_out: usize) -> Vec<StochasticMap> {
    let layout = SubsystemLayout::new(["U"], &[n_out]).expect("nonzero size");
    let count = n_out.pow(n_in as u32);
    (0..count)
        .map(|mut code| {
            let f: Vec<usize> = (0..n_in)
                .map(|_| {
                    let u = code % n_out;
                    code /= n_out;
                    u
                })
                .collect();
            StochasticMap::deterministic(&f, layout.clone()).expect("in range")
        })
        .collect()
}
