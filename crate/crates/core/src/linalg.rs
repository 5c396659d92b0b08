//! Dense complex linear algebra on multipartite operators.
//!
//! Index convention: row-major Kronecker order, the first subsystem of a
//! [`SubsystemLayout`] is the most significant digit of a flat index.

use std::collections::HashSet;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Mat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Largest `|m - m†|` entry accepted (and then symmetrized away).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `-NEGATIVE_EIG_TOL` are a hard PSD failure.
pub const NEGATIVE_EIG_TOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Ordered subsystem names with their local dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemLayout {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>, dims: &[usize]) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != dims.len() {
            return Err(Error::InvalidLayout(format!(
                "{} labels for {} dimensions",
                labels.len(),
                dims.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidLayout("no subsystems".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLayout(format!("duplicate label `{l}`")));
            }
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidLayout(format!("subsystem `{}` has dimension 0", labels[pos])));
        }
        Ok(Self {
            labels,
            dims: dims.to_vec(),
        })
    }

    /// Layout from `(label, dim)` pairs.
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self> {
        let dims: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        Self::new(pairs.iter().map(|p| p.0), &dims)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Product of the dimensions of `labels`.
    pub fn dim_of_all<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        labels.iter().try_fold(1, |acc, l| Ok(acc * self.dim_of(l.as_ref())?))
    }

    /// Positions of `labels`, in the order given.
    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l.as_ref())?;
            if out.contains(&p) {
                return Err(Error::OverlappingLabels(l.as_ref().to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Layout made of the subsystems at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        }
    }

    /// Same dimensions under new names.
    pub fn relabeled<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        Self::new(labels.iter().map(|l| l.as_ref().to_string()), &self.dims)
    }

    /// Concatenation; labels must be disjoint.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let labels = self.labels.iter().chain(other.labels.iter()).cloned();
        let dims: Vec<usize> = self.dims.iter().chain(other.dims.iter()).copied().collect();
        Self::new(labels, &dims)
    }

    pub(crate) fn check_matrix(&self, m: &Mat) -> Result<()> {
        let d = self.total_dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "layout of total dimension {d} attached to a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }
}

/// Numerical settings for spectral computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    /// Single eigendecomposition, support cutoff `1e-12 * λ_max`.
    #[default]
    Standard,
    /// Jacobi-polished eigendecomposition, support cutoff `1e-14 * λ_max`.
    Tight,
}

impl Precision {
    pub fn relative_cutoff(self) -> f64 {
        match self {
            Precision::Standard => 1e-12,
            Precision::Tight => 1e-14,
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl Eigen {
    /// Support cutoff `rel * λ_max` (zero when the matrix has no positive eigenvalue).
    pub fn cutoff(&self, rel: f64) -> f64 {
        rel * self.values.first().copied().unwrap_or(0.0).max(0.0)
    }

    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> C64) -> Mat {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-abs entry of `m - m†`.
pub fn hermiticity_deviation(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(m + m†)/2`.
pub fn hermitize(m: &Mat) -> Mat {
    (m + m.adjoint()).scale(0.5)
}

fn check_hermitian(m: &Mat) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NoConvergence);
    }
    let dev = hermiticity_deviation(m);
    if dev > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(hermitize(m))
}

pub fn hermitian_eig(m: &Mat) -> Result<Eigen> {
    hermitian_eig_with(m, Precision::Standard)
}

pub fn hermitian_eig_with(m: &Mat, precision: Precision) -> Result<Eigen> {
    let h = check_hermitian(m)?;
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut vectors = eig.eigenvectors;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence);
    }
    if precision == Precision::Tight {
        let rotated = hermitize(&(vectors.adjoint() * &h * &vectors));
        let (vals, rot) = jacobi_eigen(&rotated, 1e-15, 60)?;
        values = vals;
        vectors = &vectors * rot;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = Mat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(Eigen {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// Cyclic complex Jacobi eigensolver. Returns unsorted eigenvalues and the
/// accumulated unitary. Slow but independent of the main solver; used for
/// polishing and as a test oracle.
pub fn jacobi_eigen(m: &Mat, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, Mat)> {
    let mut a = check_hermitian(m)?;
    let n = a.nrows();
    let mut v = Mat::identity(n, n);
    let scale = max_abs(&a).max(f64::MIN_POSITIVE);
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm())
            .fold(0.0, f64::max);
        if off <= tol * scale {
            let vals = (0..n).map(|i| a[(i, i)].re).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * r).atan2(aqq - app);
                let (s, co) = theta.sin_cos();
                // U = diag(1, conj(phase)) * [[co, s], [-s, co]]
                let u_pp = cr(co);
                let u_pq = cr(s);
                let u_qp = -phase.conj() * s;
                let u_qq = phase.conj() * co;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = cr(0.0);
                a[(q, p)] = cr(0.0);
            }
        }
    }
    Err(Error::NoConvergence)
}

/// Applies `f` to the eigenvalues of a PSD matrix, mapping the kernel
/// (eigenvalues at or below the cutoff) to zero. The default cutoff is
/// `1e-12 * λ_max`.
pub fn matrix_function_on_support(m: &Mat, f: impl Fn(f64) -> f64, support_cutoff: Option<f64>) -> Result<Mat> {
    let eig = hermitian_eig(m)?;
    psd_function_from_eig(&eig, f, support_cutoff.unwrap_or_else(|| eig.cutoff(1e-12)))
}

/// [`matrix_function_on_support`] with the cutoff taken from `precision`.
pub fn psd_function(m: &Mat, f: impl Fn(f64) -> f64, precision: Precision) -> Result<Mat> {
    let eig = hermitian_eig_with(m, precision)?;
    let cut = eig.cutoff(precision.relative_cutoff());
    psd_function_from_eig(&eig, f, cut)
}

pub(crate) fn psd_function_from_eig(eig: &Eigen, f: impl Fn(f64) -> f64, cutoff: f64) -> Result<Mat> {
    if let Some(&min) = eig.values.last() {
        if min < -NEGATIVE_EIG_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    Ok(eig.reconstruct_with(|l| if l > cutoff { cr(f(l)) } else { cr(0.0) }))
}

/// `σ^{is} = exp(i s ln σ)` on the support of a PSD matrix, identity on its kernel.
pub fn modular_unitary(m: &Mat, s: f64, precision: Precision) -> Result<Mat> {
    let eig = hermitian_eig_with(m, precision)?;
    let cut = eig.cutoff(precision.relative_cutoff());
    if let Some(&min) = eig.values.last() {
        if min < -NEGATIVE_EIG_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    Ok(eig.reconstruct_with(|l| {
        if l > cut {
            let phase = s * l.ln();
            c(phase.cos(), phase.sin())
        } else {
            cr(1.0)
        }
    }))
}

/// Kronecker product, first factor most significant.
pub fn tensor(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Flat indices enumerated over the digits at `positions` (first listed is
/// most significant), all other digits zero.
pub(crate) fn digit_offsets(dims: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &base in &out {
            for k in 0..dims[p] {
                next.push(base + k * strides[p]);
            }
        }
        out = next;
    }
    out
}

/// Traces out every subsystem not in `keep`. The result keeps the original
/// subsystem order.
pub fn partial_trace<S: AsRef<str>>(m: &Mat, layout: &SubsystemLayout, keep: &[S]) -> Result<(Mat, SubsystemLayout)> {
    layout.check_matrix(m)?;
    let mut kept = layout.positions(keep)?;
    kept.sort_unstable();
    let traced: Vec<usize> = (0..layout.len()).filter(|p| !kept.contains(p)).collect();
    Ok((partial_trace_positions(m, layout.dims(), &kept, &traced), layout.select(&kept)))
}

pub(crate) fn partial_trace_positions(m: &Mat, dims: &[usize], kept: &[usize], traced: &[usize]) -> Mat {
    let ok = digit_offsets(dims, kept);
    let ot = digit_offsets(dims, traced);
    let dk = ok.len();
    Mat::from_fn(dk, dk, |r, col| {
        let (br, bc) = (ok[r], ok[col]);
        ot.iter().map(|&t| m[(br + t, bc + t)]).sum()
    })
}

/// Reorders subsystems so that the result's layout lists `order`, which
/// must be a permutation of the layout labels.
pub fn permute_subsystems<S: AsRef<str>>(m: &Mat, layout: &SubsystemLayout, order: &[S]) -> Result<(Mat, SubsystemLayout)> {
    layout.check_matrix(m)?;
    if order.len() != layout.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation lists {} labels, layout has {}",
            order.len(),
            layout.len()
        )));
    }
    let perm = layout.positions(order)?;
    Ok((permute_positions(m, layout.dims(), &perm), layout.select(&perm)))
}

/// New subsystem `i` is old subsystem `perm[i]`.
pub(crate) fn permute_positions(m: &Mat, dims: &[usize], perm: &[usize]) -> Mat {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return m.clone();
    }
    let map = digit_offsets(dims, perm);
    let d = map.len();
    Mat::from_fn(d, d, |r, col| m[(map[r], map[col])])
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &Mat) -> Result<f64> {
    let eig = hermitian_eig(m)?;
    Ok(eig.values.iter().map(|v| v.abs()).sum())
}

/// Sum of singular values of an arbitrary matrix.
pub fn nuclear_norm(m: &Mat) -> f64 {
    m.clone().singular_values().iter().sum()
}

pub fn trace(m: &Mat) -> C64 {
    m.trace()
}

/// Hilbert–Schmidt inner product `tr(a† b)`.
pub fn hs_inner(a: &Mat, b: &Mat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn projector(v: &CVec) -> Mat {
    v * v.adjoint()
}

pub fn basis_vector(dim: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[i] = cr(1.0);
    v
}

pub fn diagonal(values: &[f64]) -> Mat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { cr(values[i]) } else { cr(0.0) })
}

/// Orthonormalizes the columns of a tall matrix (polar factor `A (A†A)^{-1/2}`).
/// Falls back to QR when `A†A` is singular.
pub fn isometry_from(a: &Mat) -> Result<Mat> {
    let gram = a.adjoint() * a;
    let eig = hermitian_eig(&gram)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min > 1e-10 * eig.values[0] {
        let inv_sqrt = eig.reconstruct_with(|l| cr(1.0 / l.sqrt()));
        return Ok(a * inv_sqrt);
    }
    let qr = a.clone().qr();
    Ok(qr.q())
}

/// All permutations of `0..n` with their signs (+1 / -1), in lexicographic order.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, i8)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, i8)>) {
        let n = used.len();
        if prefix.len() == n {
            let inversions = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|&(i, j)| prefix[i] > prefix[j])
                .count();
            out.push((prefix.clone(), if inversions % 2 == 0 { 1 } else { -1 }));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        hermitize(&g)
    }

    fn random_state(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &g * g.adjoint();
        let t = m.trace();
        m / t
    }

    // Index-by-index partial trace oracle, written without offset tables.
    fn naive_partial_trace(m: &Mat, dims: &[usize], keep: &[usize]) -> Mat {
        let n = dims.len();
        let total: usize = dims.iter().product();
        let digits = |mut idx: usize| {
            let mut d = vec![0; n];
            for i in (0..n).rev() {
                d[i] = idx % dims[i];
                idx /= dims[i];
            }
            d
        };
        let dk: usize = keep.iter().map(|&p| dims[p]).product();
        let mut out = Mat::zeros(dk, dk);
        for r in 0..total {
            for col in 0..total {
                let (dr, dc) = (digits(r), digits(col));
                let traced_equal = (0..n).filter(|p| !keep.contains(p)).all(|p| dr[p] == dc[p]);
                if !traced_equal {
                    continue;
                }
                let flat = |d: &[usize]| keep.iter().fold(0, |acc, &p| acc * dims[p] + d[p]);
                out[(flat(&dr), flat(&dc))] += m[(r, col)];
            }
        }
        out
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = hermitian_eig(&Mat::identity(2, 2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let e = hermitian_eig(&diagonal(&[1.0, 3.0])).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        for (seed, precision) in [(1, Precision::Standard), (2, Precision::Tight)] {
            let m = random_hermitian(6, seed);
            let e = hermitian_eig_with(&m, precision).unwrap();
            let rec = e.reconstruct_with(cr);
            assert!(max_abs(&(rec - &m)) <= 1e-9);
            let u = e.vectors.adjoint() * &e.vectors - Mat::identity(6, 6);
            assert!(max_abs(&u) <= 1e-9);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn jacobi_agrees_with_main_solver() {
        let m = random_hermitian(7, 9);
        let (mut vals, v) = jacobi_eigen(&m, 1e-15, 60).unwrap();
        vals.sort_by(|a, b| b.total_cmp(a));
        let main = hermitian_eig(&m).unwrap();
        for (a, b) in vals.iter().zip(main.values.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let u = v.adjoint() * &v - Mat::identity(7, 7);
        assert!(max_abs(&u) < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = Mat::identity(2, 2);
        m[(0, 1)] = cr(1.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn support_functions() {
        let m = diagonal(&[4.0, 0.0]);
        let s = matrix_function_on_support(&m, f64::sqrt, None).unwrap();
        assert!(max_abs(&(s - diagonal(&[2.0, 0.0]))) < 1e-15);
        let s = matrix_function_on_support(&m, |x| x.powf(-0.5), None).unwrap();
        assert!(max_abs(&(s - diagonal(&[0.5, 0.0]))) < 1e-15);
        let s = matrix_function_on_support(&diagonal(&[0.5, 0.5]), f64::log2, None).unwrap();
        assert!(max_abs(&(s - diagonal(&[-1.0, -1.0]))) < 1e-15);
        assert!(matches!(
            matrix_function_on_support(&diagonal(&[1.0, -1e-6]), f64::sqrt, None),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn sqrt_squares_back() {
        let m = random_state(5, 4);
        let s = matrix_function_on_support(&m, f64::sqrt, None).unwrap();
        assert!(max_abs(&(&s * &s - &m)) < 1e-9);
        let id = matrix_function_on_support(&m, |x| x, None).unwrap();
        assert!(max_abs(&(id - &m)) < 1e-12);
    }

    #[test]
    fn tensor_convention() {
        let p = tensor(&Mat::identity(2, 2), &Mat::identity(3, 3));
        assert_eq!(p, Mat::identity(6, 6));
        let p = tensor(&diagonal(&[1.0, 0.0]), &diagonal(&[0.0, 1.0]));
        assert_eq!(p, diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_factorizes_on_product_vectors() {
        let x = random_hermitian(2, 5);
        let y = random_hermitian(3, 6);
        let u = CVec::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.7)]);
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, -0.5), c(0.25, 0.25)]);
        let lhs = tensor(&x, &y) * u.kronecker(&v);
        let rhs = (&x * &u).kronecker(&(&y * &v));
        assert!(lhs.iter().zip(rhs.iter()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn partial_trace_bell_and_product() {
        let mut bell = Mat::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            bell[(i, j)] = cr(0.5);
        }
        let layout = SubsystemLayout::from_pairs(&[("A", 2), ("B", 2)]).unwrap();
        let (r, l) = partial_trace(&bell, &layout, &["A"]).unwrap();
        assert_eq!(l.labels(), &["A".to_string()]);
        assert!(max_abs(&(r - Mat::identity(2, 2).scale(0.5))) < 1e-15);

        let ra = random_state(2, 7);
        let re = random_state(3, 8);
        let layout = SubsystemLayout::from_pairs(&[("A", 2), ("E", 3)]).unwrap();
        let (r, _) = partial_trace(&tensor(&ra, &re), &layout, &["A"]).unwrap();
        assert!(max_abs(&(r - ra)) < 1e-14);
    }

    #[test]
    fn partial_trace_matches_naive_oracle_and_composes() {
        let dims = [2, 2, 2];
        let layout = SubsystemLayout::from_pairs(&[("A", 2), ("B1", 2), ("B2", 2)]).unwrap();
        for seed in 0..5 {
            let m = random_state(8, 100 + seed);
            let (fast, _) = partial_trace(&m, &layout, &["A"]).unwrap();
            assert!(max_abs(&(&fast - naive_partial_trace(&m, &dims, &[0]))) < 1e-14);
            let (step, l2) = partial_trace(&m, &layout, &["A", "B1"]).unwrap();
            let (two_step, _) = partial_trace(&step, &l2, &["A"]).unwrap();
            assert!(max_abs(&(&fast - two_step)) < 1e-12);
            let (step, l2) = partial_trace(&m, &layout, &["A", "B2"]).unwrap();
            let (other_order, _) = partial_trace(&step, &l2, &["A"]).unwrap();
            assert!(max_abs(&(&fast - other_order)) < 1e-12);
            assert!((m.trace() - partial_trace(&m, &layout, &["B2"]).unwrap().0.trace()).norm() < 1e-12);
            let (mid, _) = partial_trace(&m, &layout, &["B1"]).unwrap();
            assert!(max_abs(&(mid - naive_partial_trace(&m, &dims, &[1]))) < 1e-14);
        }
    }

    #[test]
    fn partial_trace_unknown_label() {
        let layout = SubsystemLayout::from_pairs(&[("A", 2)]).unwrap();
        assert!(matches!(
            partial_trace(&Mat::identity(2, 2), &layout, &["Z"]),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn permutation_swap_and_inverse() {
        let r = random_state(2, 11);
        let s = random_state(3, 12);
        let layout = SubsystemLayout::from_pairs(&[("A", 2), ("B", 3)]).unwrap();
        let (swapped, l) = permute_subsystems(&tensor(&r, &s), &layout, &["B", "A"]).unwrap();
        assert_eq!(l.dims(), &[3, 2]);
        assert!(max_abs(&(&swapped - tensor(&s, &r))) < 1e-15);
        let (same, _) = permute_subsystems(&tensor(&r, &s), &layout, &["A", "B"]).unwrap();
        assert_eq!(same, tensor(&r, &s));

        let m = random_state(12, 13);
        let layout = SubsystemLayout::from_pairs(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let (p, l) = permute_subsystems(&m, &layout, &["C", "A", "B"]).unwrap();
        let (back, l2) = permute_subsystems(&p, &l, &["A", "B", "C"]).unwrap();
        assert_eq!(l2, layout);
        assert!(max_abs(&(back - &m)) < 1e-15);
        let e1 = hermitian_eig(&m).unwrap().values;
        let e2 = hermitian_eig(&p).unwrap().values;
        assert!(e1.iter().zip(e2.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn permutation_signs() {
        let p = signed_permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p.iter().map(|x| x.1 as i32).sum::<i32>(), 0);
        assert_eq!(p[1], (vec![0, 2, 1], -1));
    }

    #[test]
    fn layout_validation() {
        assert!(SubsystemLayout::new(["A", "A"], &[2, 2]).is_err());
        assert!(SubsystemLayout::new(["A"], &[0]).is_err());
        assert!(SubsystemLayout::new(["A", "B"], &[2]).is_err());
        let l = SubsystemLayout::new(["A", "B"], &[2, 3]).unwrap();
        assert!(l.check_matrix(&Mat::identity(5, 5)).is_err());
    }

    #[test]
    fn modular_unitary_is_unitary() {
        let m = random_state(4, 21);
        let u = modular_unitary(&m, 0.7, Precision::Standard).unwrap();
        assert!(max_abs(&(u.adjoint() * &u - Mat::identity(4, 4))) < 1e-12);
        let u0 = modular_unitary(&m, 0.0, Precision::Standard).unwrap();
        assert!(max_abs(&(u0 - Mat::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn isometry_columns_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Mat::from_fn(6, 3, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>()));
        let v = isometry_from(&a).unwrap();
        assert!(max_abs(&(v.adjoint() * &v - Mat::identity(3, 3))) < 1e-12);
    }
}
