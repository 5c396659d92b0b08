//! Channels in Kraus form, Petz recovery maps and their swivelled family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::matrix_fidelity;
use crate::linalg::{
    cr, hermitian_eig_with, max_abs, modular_unitary, permute_subsystems, psd_function, Eigen, Mat,
    Precision, SubsystemLayout,
};
use crate::states::MultipartiteState;

/// `Σ K†K = 1` tolerance.
pub const TP_TOL: f64 = 1e-9;

/// Kraus operators of a linear map that need not preserve the trace.
#[derive(Clone, Debug)]
pub struct KrausMap {
    pub kraus: Vec<Mat>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl KrausMap {
    pub fn apply(&self, x: &Mat) -> Mat {
        let mut out = Mat::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// `Σ K†K`.
    pub fn kraus_gram(&self) -> Mat {
        let mut s = Mat::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        s
    }

    /// `Σ K K†`, the image of the identity.
    pub fn image_of_identity(&self) -> Mat {
        let mut s = Mat::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            s += k * k.adjoint();
        }
        s
    }
}

/// Completely positive, trace-preserving map `ρ ↦ Σ K ρ K†`.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    kraus: Vec<Mat>,
    in_layout: SubsystemLayout,
    out_layout: SubsystemLayout,
    id: String,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<Mat>, in_layout: SubsystemLayout, out_layout: SubsystemLayout, id: impl Into<String>) -> Result<Self> {
        let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
        if kraus.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one Kraus operator".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.shape() != (dout, din)) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {:?}, expected {:?}",
                k.shape(),
                (dout, din)
            )));
        }
        let ch = Self {
            kraus,
            in_layout,
            out_layout,
            id: id.into(),
        };
        let dev = ch.trace_preservation_deviation();
        if !(dev <= TP_TOL) {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(ch)
    }

    pub fn kraus(&self) -> &[Mat] {
        &self.kraus
    }

    pub fn in_layout(&self) -> &SubsystemLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &SubsystemLayout {
        &self.out_layout
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn in_dim(&self) -> usize {
        self.in_layout.total_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.out_layout.total_dim()
    }

    pub fn trace_preservation_deviation(&self) -> f64 {
        let mut s = -Mat::identity(self.in_dim(), self.in_dim());
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        max_abs(&s)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_in_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        self.in_layout = self.in_layout.relabeled(labels)?;
        Ok(self)
    }

    pub fn with_out_labels<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        self.out_layout = self.out_layout.relabeled(labels)?;
        Ok(self)
    }

    /// `T*`: Kraus operators daggered. Unital, not trace preserving.
    pub fn adjoint(&self) -> KrausMap {
        KrausMap {
            kraus: self.kraus.iter().map(|k| k.adjoint()).collect(),
            in_dim: self.out_dim(),
            out_dim: self.in_dim(),
        }
    }

    pub fn as_kraus_map(&self) -> KrausMap {
        KrausMap {
            kraus: self.kraus.clone(),
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
        }
    }

    pub fn apply_matrix(&self, x: &Mat) -> Result<Mat> {
        if x.shape() != (self.in_dim(), self.in_dim()) {
            return Err(Error::DimensionMismatch(format!(
                "channel `{}` takes {}-dimensional input, got {:?}",
                self.id,
                self.in_dim(),
                x.shape()
            )));
        }
        let mut out = Mat::zeros(self.out_dim(), self.out_dim());
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        Ok(out)
    }

    /// Whole-state application; output carries the channel's output layout.
    pub fn apply(&self, rho: &MultipartiteState) -> Result<MultipartiteState> {
        if rho.layout().dims() != self.in_layout.dims() {
            return Err(Error::DimensionMismatch(format!(
                "channel `{}` expects dims {:?}, state has {:?}",
                self.id,
                self.in_layout.dims(),
                rho.layout().dims()
            )));
        }
        MultipartiteState::from_trusted(self.apply_matrix(rho.matrix())?, self.out_layout.clone())
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ T(|i⟩⟨j|)`, input factor first.
    pub fn choi(&self) -> Mat {
        choi_from_kraus(&self.kraus, self.in_dim(), self.out_dim())
    }

    /// Same map, Kraus operators replaced by the Choi eigenvectors.
    pub fn canonical(&self) -> Result<Self> {
        let kraus = kraus_from_choi(&self.choi(), self.in_dim(), self.out_dim())?;
        Ok(Self {
            kraus,
            in_layout: self.in_layout.clone(),
            out_layout: self.out_layout.clone(),
            id: self.id.clone(),
        })
    }
}

pub fn choi_from_kraus(kraus: &[Mat], din: usize, dout: usize) -> Mat {
    let n = din * dout;
    let mut j = Mat::zeros(n, n);
    for k in kraus {
        // vec index i * dout + o  <->  K[o, i]
        let v = Mat::from_fn(n, 1, |r, _| k[(r % dout, r / dout)]);
        j += &v * v.adjoint();
    }
    j
}

pub fn kraus_from_choi(choi: &Mat, din: usize, dout: usize) -> Result<Vec<Mat>> {
    let eig = hermitian_eig_with(choi, Precision::Standard)?;
    let cut = eig.cutoff(1e-13);
    let mut out = Vec::new();
    for (idx, &l) in eig.values.iter().enumerate() {
        if l <= cut {
            break;
        }
        let w = l.sqrt();
        out.push(Mat::from_fn(dout, din, |o, i| eig.vectors[(i * dout + o, idx)] * w));
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("Choi matrix is zero".into()));
    }
    Ok(out)
}

pub fn identity_channel(layout: &SubsystemLayout) -> QuantumChannel {
    let d = layout.total_dim();
    QuantumChannel {
        kraus: vec![Mat::identity(d, d)],
        in_layout: layout.clone(),
        out_layout: layout.clone(),
        id: "identity".into(),
    }
}

pub fn unitary_channel(u: &Mat, layout: &SubsystemLayout) -> Result<QuantumChannel> {
    QuantumChannel::new(vec![u.clone()], layout.clone(), layout.clone(), "unitary")
}

/// `tr_{rest}`: keeps `keep`, in layout order.
pub fn partial_trace_channel<S: AsRef<str>>(layout: &SubsystemLayout, keep: &[S]) -> Result<QuantumChannel> {
    let mut kept = layout.positions(keep)?;
    kept.sort_unstable();
    let traced: Vec<usize> = (0..layout.len()).filter(|p| !kept.contains(p)).collect();
    let dims = layout.dims();
    let din = layout.total_dim();
    let dk: usize = kept.iter().map(|&p| dims[p]).product();
    let dt: usize = traced.iter().map(|&p| dims[p]).product();
    // input index of (kept multi-index, traced multi-index)
    let strides: Vec<usize> = (0..dims.len()).map(|p| dims[p + 1..].iter().product()).collect();
    let offset = |positions: &[usize], mut flat: usize| -> usize {
        let mut idx = 0;
        for &p in positions.iter().rev() {
            idx += (flat % dims[p]) * strides[p];
            flat /= dims[p];
        }
        idx
    };
    let mut kraus = Vec::with_capacity(dt);
    for t in 0..dt {
        let base = offset(&traced, t);
        let mut k = Mat::zeros(dk, din);
        for o in 0..dk {
            k[(o, base + offset(&kept, o))] = cr(1.0);
        }
        kraus.push(k);
    }
    let out_layout = layout.select(&kept);
    QuantumChannel::new(kraus, layout.clone(), out_layout, "partial_trace")
}

/// `ρ ↦ (1−p) ρ + p tr(ρ) 1/d`.
pub fn depolarizing_channel(layout: &SubsystemLayout, p: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("depolarizing parameter {p} outside [0, 1]")));
    }
    let d = layout.total_dim();
    let mut kraus = vec![Mat::identity(d, d).scale((1.0 - p).sqrt())];
    let w = (p / d as f64).sqrt();
    for i in 0..d {
        for j in 0..d {
            let mut k = Mat::zeros(d, d);
            k[(i, j)] = cr(w);
            kraus.push(k);
        }
    }
    QuantumChannel::new(kraus, layout.clone(), layout.clone(), "depolarizing")
}

/// Measure in the computational basis, then apply the column-stochastic
/// matrix `t[(u, x)]`.
pub fn classical_channel(t: &nalgebra::DMatrix<f64>, in_layout: &SubsystemLayout, out_layout: &SubsystemLayout) -> Result<QuantumChannel> {
    if t.shape() != (out_layout.total_dim(), in_layout.total_dim()) {
        return Err(Error::DimensionMismatch("stochastic matrix does not match layouts".into()));
    }
    let mut kraus = Vec::new();
    for u in 0..t.nrows() {
        for x in 0..t.ncols() {
            if t[(u, x)] < 0.0 {
                return Err(Error::InvalidArgument("negative transition probability".into()));
            }
            if t[(u, x)] > 0.0 {
                let mut k = Mat::zeros(t.nrows(), t.ncols());
                k[(u, x)] = cr(t[(u, x)].sqrt());
                kraus.push(k);
            }
        }
    }
    QuantumChannel::new(kraus, in_layout.clone(), out_layout.clone(), "classical")
}

/// Channel with Kraus operators `K_k[(u, x)] = V[(k·d_out + u, x)]` for an
/// isometry `V` of shape `(n·d_out) × d_in`.
pub fn channel_from_isometry(v: &Mat, in_layout: &SubsystemLayout, out_layout: &SubsystemLayout) -> Result<QuantumChannel> {
    let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
    if v.ncols() != din || !v.nrows().is_multiple_of(dout) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} isometry for a {din} -> {dout} channel",
            v.nrows(),
            v.ncols()
        )));
    }
    let kraus = (0..v.nrows() / dout).map(|k| v.rows(k * dout, dout).into_owned()).collect();
    QuantumChannel::new(kraus, in_layout.clone(), out_layout.clone(), "isometry")
}

/// Random channel with `kraus_count` Kraus operators from the polar part of
/// a Ginibre matrix.
pub fn random_channel(
    rng: &mut impl rand::Rng,
    in_layout: &SubsystemLayout,
    out_layout: &SubsystemLayout,
    kraus_count: usize,
) -> Result<QuantumChannel> {
    if kraus_count == 0 {
        return Err(Error::InvalidArgument("a channel needs at least one Kraus operator".into()));
    }
    if kraus_count * out_layout.total_dim() < in_layout.total_dim() {
        return Err(Error::InvalidArgument(format!(
            "{kraus_count} Kraus operators cannot form a channel from dimension {} to {}",
            in_layout.total_dim(),
            out_layout.total_dim()
        )));
    }
    let g = crate::rng::ginibre(rng, kraus_count * out_layout.total_dim(), in_layout.total_dim());
    Ok(channel_from_isometry(&crate::linalg::isometry_from(&g)?, in_layout, out_layout)?.with_id("random"))
}

pub fn tensor_channels(a: &QuantumChannel, b: &QuantumChannel) -> Result<QuantumChannel> {
    let mut kraus = Vec::with_capacity(a.kraus.len() * b.kraus.len());
    for ka in &a.kraus {
        for kb in &b.kraus {
            kraus.push(ka.kronecker(kb));
        }
    }
    Ok(QuantumChannel {
        kraus,
        in_layout: a.in_layout.concat(&b.in_layout)?,
        out_layout: a.out_layout.concat(&b.out_layout)?,
        id: format!("({})⊗({})", a.id, b.id),
    })
}

/// `second ∘ first`.
pub fn compose(first: &QuantumChannel, second: &QuantumChannel) -> Result<QuantumChannel> {
    if first.out_dim() != second.in_dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot feed {}-dimensional output into {}-dimensional input",
            first.out_dim(),
            second.in_dim()
        )));
    }
    let mut kraus = Vec::with_capacity(first.kraus.len() * second.kraus.len());
    for l in &second.kraus {
        for k in &first.kraus {
            kraus.push(l * k);
        }
    }
    let ch = QuantumChannel {
        kraus,
        in_layout: first.in_layout.clone(),
        out_layout: second.out_layout.clone(),
        id: format!("({})∘({})", second.id, first.id),
    };
    if ch.kraus.len() > ch.in_dim() * ch.out_dim() {
        return ch.canonical();
    }
    Ok(ch)
}

/// `(id ⊗ T)` on the subsystems `target` (in the order given, matching the
/// channel's input). The output subsystems take the channel's output labels
/// and sit where the first target was.
pub fn apply_on_subsystem<S: AsRef<str>>(
    channel: &QuantumChannel,
    rho: &MultipartiteState,
    target: &[S],
) -> Result<MultipartiteState> {
    let layout = rho.layout();
    let tpos = layout.positions(target)?;
    let tdims: Vec<usize> = tpos.iter().map(|&p| layout.dims()[p]).collect();
    if tdims != channel.in_layout.dims() {
        return Err(Error::DimensionMismatch(format!(
            "target dims {tdims:?} do not match channel input {:?}",
            channel.in_layout.dims()
        )));
    }
    let spectators: Vec<String> = (0..layout.len())
        .filter(|p| !tpos.contains(p))
        .map(|p| layout.labels()[p].clone())
        .collect();
    for l in channel.out_layout.labels() {
        if spectators.contains(l) {
            return Err(Error::OverlappingLabels(l.clone()));
        }
    }
    let order: Vec<String> = spectators
        .iter()
        .cloned()
        .chain(target.iter().map(|t| t.as_ref().to_string()))
        .collect();
    let (m, _) = permute_subsystems(rho.matrix(), layout, &order)?;
    let ds: usize = spectators.iter().map(|l| layout.dim_of(l).unwrap_or(1)).product();
    let out = apply_blockwise(&channel.kraus, &m, ds, channel.in_dim(), channel.out_dim());

    let spec_layout = SubsystemLayout::new(
        spectators.iter().cloned(),
        &spectators.iter().map(|l| layout.dim_of(l)).collect::<Result<Vec<_>>>()?,
    );
    let joined = match spec_layout {
        Ok(s) => s.concat(&channel.out_layout)?,
        Err(_) => channel.out_layout.clone(),
    };
    // move the output block to the first target's position
    let first = tpos[0];
    let mut final_order: Vec<String> = Vec::new();
    for p in 0..layout.len() {
        if p == first {
            final_order.extend(channel.out_layout.labels().iter().cloned());
        } else if !tpos.contains(&p) {
            final_order.push(layout.labels()[p].clone());
        }
    }
    let (m2, l2) = permute_subsystems(&out, &joined, &final_order)?;
    MultipartiteState::from_trusted(m2, l2)
}

/// `Σ_K (1_s ⊗ K) m (1_s ⊗ K)†` without forming `1 ⊗ K`.
pub(crate) fn apply_blockwise(kraus: &[Mat], m: &Mat, ds: usize, din: usize, dout: usize) -> Mat {
    let mut out = Mat::zeros(ds * dout, ds * dout);
    let mut tmp = Mat::zeros(ds * dout, ds * din);
    for k in kraus {
        for s in 0..ds {
            tmp.rows_mut(s * dout, dout).copy_from(&(k * m.rows(s * din, din)));
        }
        let kd = k.adjoint();
        for s in 0..ds {
            let block = tmp.columns(s * din, din) * &kd;
            let mut target = out.columns_mut(s * dout, dout);
            target += block;
        }
    }
    out
}

/// A recovery channel with the data it was built from.
#[derive(Clone, Debug)]
pub struct RecoveryMap {
    pub channel: QuantumChannel,
    pub source_channel_id: String,
    /// `σ`.
    pub anchor: MultipartiteState,
    /// `T(σ)`.
    pub anchor_image: Mat,
    pub swivel_t: Option<f64>,
    /// True when `T(σ)` had a kernel, whose input mass is sent to `σ`.
    pub kernel_completed: bool,
}

impl RecoveryMap {
    /// `‖R(T(σ)) − σ‖₁`-style check, max-abs entrywise.
    pub fn anchor_deviation(&self) -> Result<f64> {
        let back = self.channel.apply_matrix(&self.anchor_image)?;
        Ok(max_abs(&(back - self.anchor.matrix())))
    }
}

/// Spectral data reused by the Petz family.
struct PetzParts {
    sigma_eig: Eigen,
    image: Mat,
    image_eig: Eigen,
    kernel: Vec<usize>,
}

fn petz_parts(channel: &QuantumChannel, sigma: &MultipartiteState, precision: Precision) -> Result<PetzParts> {
    if sigma.layout().dims() != channel.in_layout.dims() {
        return Err(Error::DimensionMismatch(format!(
            "anchor dims {:?} differ from channel input {:?}",
            sigma.layout().dims(),
            channel.in_layout.dims()
        )));
    }
    let image = channel.apply_matrix(sigma.matrix())?;
    let image_eig = hermitian_eig_with(&image, precision)?;
    let cut = image_eig.cutoff(precision.relative_cutoff());
    let kernel = (0..image_eig.values.len()).filter(|&j| image_eig.values[j] <= cut).collect();
    Ok(PetzParts {
        sigma_eig: hermitian_eig_with(sigma.matrix(), precision)?,
        image,
        image_eig,
        kernel,
    })
}

fn petz_kraus(channel: &QuantumChannel, parts: &PetzParts, precision: Precision) -> Result<Vec<Mat>> {
    let sig_cut = parts.sigma_eig.cutoff(precision.relative_cutoff());
    let sqrt_sigma = parts
        .sigma_eig
        .reconstruct_with(|l| cr(if l > sig_cut { l.sqrt() } else { 0.0 }));
    let img_cut = parts.image_eig.cutoff(precision.relative_cutoff());
    let inv_sqrt = parts
        .image_eig
        .reconstruct_with(|l| cr(if l > img_cut { 1.0 / l.sqrt() } else { 0.0 }));
    let mut kraus: Vec<Mat> = channel
        .kraus
        .iter()
        .map(|k| &sqrt_sigma * k.adjoint() * &inv_sqrt)
        .collect();
    // kernel completion: ξ ↦ tr(P_ker ξ) σ
    for &kv in &parts.kernel {
        let bra = parts.image_eig.vectors.column(kv).adjoint();
        for (j, &s) in parts.sigma_eig.values.iter().enumerate() {
            if s > sig_cut {
                let ket = parts.sigma_eig.vectors.column(j) * cr(s.sqrt());
                kraus.push(&ket * &bra);
            }
        }
    }
    Ok(kraus)
}

/// Rescales Kraus operators by `(Σ K†K)^{-1/2}` when rounding has left the
/// sum slightly off the identity.
fn polish_trace_preservation(kraus: Vec<Mat>, din: usize) -> Result<Vec<Mat>> {
    let mut s = Mat::zeros(din, din);
    for k in &kraus {
        s += k.adjoint() * k;
    }
    let dev = max_abs(&(&s - Mat::identity(din, din)));
    if dev <= 1e-12 {
        return Ok(kraus);
    }
    if dev > 1e-6 {
        return Err(Error::NotTracePreserving(dev));
    }
    let fix = psd_function(&s, |l| 1.0 / l.sqrt(), Precision::Standard)?;
    Ok(kraus.into_iter().map(|k| k * &fix).collect())
}

fn build_recovery(
    channel: &QuantumChannel,
    sigma: &MultipartiteState,
    t: Option<f64>,
    precision: Precision,
) -> Result<RecoveryMap> {
    let parts = petz_parts(channel, sigma, precision)?;
    let mut kraus = petz_kraus(channel, &parts, precision)?;
    if let Some(t) = t.filter(|&t| t != 0.0) {
        let left = modular_unitary(sigma.matrix(), -t, precision)?;
        let right = modular_unitary(&parts.image, t, precision)?;
        kraus = kraus.into_iter().map(|k| &left * k * &right).collect();
    }
    let kraus = polish_trace_preservation(kraus, channel.out_dim())?;
    let id = match t {
        None => format!("petz[{}]", channel.id),
        Some(t) => format!("petz_t={t}[{}]", channel.id),
    };
    let rec = QuantumChannel::new(kraus, channel.out_layout.clone(), channel.in_layout.clone(), id)?.canonical()?;
    let rec = QuantumChannel::new(
        polish_trace_preservation(rec.kraus, channel.out_dim())?,
        rec.in_layout,
        rec.out_layout,
        rec.id,
    )?;
    Ok(RecoveryMap {
        channel: rec,
        source_channel_id: channel.id.clone(),
        anchor: sigma.clone(),
        anchor_image: parts.image,
        swivel_t: t,
        kernel_completed: !parts.kernel.is_empty(),
    })
}

/// `R(ξ) = √σ T*((Tσ)^{-1/2} ξ (Tσ)^{-1/2}) √σ`, completed on the kernel of
/// `T(σ)` by `ξ ↦ tr(P_ker ξ) σ`.
pub fn petz_map(channel: &QuantumChannel, sigma: &MultipartiteState) -> Result<RecoveryMap> {
    build_recovery(channel, sigma, None, Precision::Standard)
}

pub fn petz_map_with(channel: &QuantumChannel, sigma: &MultipartiteState, precision: Precision) -> Result<RecoveryMap> {
    build_recovery(channel, sigma, None, precision)
}

/// `R_t(ξ) = σ^{-it} R((Tσ)^{it} ξ (Tσ)^{-it}) σ^{it}`; `t = 0` is [`petz_map`].
pub fn swivelled_petz_map(channel: &QuantumChannel, sigma: &MultipartiteState, t: f64) -> Result<RecoveryMap> {
    build_recovery(channel, sigma, Some(t), Precision::Standard)
}

pub fn swivelled_petz_map_with(
    channel: &QuantumChannel,
    sigma: &MultipartiteState,
    t: f64,
    precision: Precision,
) -> Result<RecoveryMap> {
    build_recovery(channel, sigma, Some(t), precision)
}

fn eb_marginal<S: AsRef<str>>(rho: &MultipartiteState, e: &[S], b: &[S]) -> Result<MultipartiteState> {
    let order: Vec<String> = e.iter().chain(b.iter()).map(|l| l.as_ref().to_string()).collect();
    rho.marginal_ordered(&order)
}

/// `R(ξ) = √ρ^{EB} (ρ_E^{-1/2} ξ ρ_E^{-1/2} ⊗ 1_B) √ρ^{EB}`, mapping `E` to `E B`.
/// `rho` may carry extra subsystems; only the `E B` marginal is used.
pub fn cmi_petz_map<S: AsRef<str>>(rho: &MultipartiteState, e: &[S], b: &[S]) -> Result<RecoveryMap> {
    cmi_swivelled_petz_map(rho, e, b, 0.0)
}

pub fn cmi_swivelled_petz_map<S: AsRef<str>>(rho: &MultipartiteState, e: &[S], b: &[S], t: f64) -> Result<RecoveryMap> {
    let eb = eb_marginal(rho, e, b)?;
    let tr_b = partial_trace_channel(eb.layout(), e)?.with_id("tr_B");
    let t = if t == 0.0 { None } else { Some(t) };
    build_recovery(&tr_b, &eb, t, Precision::Standard)
}

/// `−log₂ F(ρ^{AEB}, (id_A ⊗ R_t)ρ^{AE})²` over a grid of `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwivelScan {
    pub t_best: f64,
    pub fidelity_best: f64,
    /// `−log₂ F²` at `t_best`.
    pub value_best: f64,
    pub cmi: f64,
    pub bound_holds: bool,
    pub evaluations: usize,
}

pub const SWIVEL_BOUND_SLACK: f64 = 1e-6;

/// `−10, −9.9, …, 10`.
pub fn default_swivel_grid() -> Vec<f64> {
    (-100..=100).map(|i| i as f64 / 10.0).collect()
}

/// Evaluates `(id_A ⊗ R_t) ρ^{AE}` for many `t` from one set of spectral
/// data. Uses `R_t = id_A ⊗ [Ad(ρ_EB^{-it}) ∘ R ∘ Ad(ρ_E^{it})]`.
pub struct SwivelEvaluator {
    target: Mat,
    sqrt_target: Mat,
    rho_ae: Mat,
    d_a: usize,
    d_e: usize,
    d_eb: usize,
    petz: Vec<Mat>,
    e_eig: Eigen,
    e_cut: f64,
    eb_eig: Eigen,
    eb_cut: f64,
    precision: Precision,
    layout: SubsystemLayout,
}

impl SwivelEvaluator {
    /// `rho` is reordered to `A E B` internally.
    pub fn new<S: AsRef<str>>(rho: &MultipartiteState, a: &[S], e: &[S], b: &[S], precision: Precision) -> Result<Self> {
        let order: Vec<String> = a.iter().chain(e).chain(b).map(|l| l.as_ref().to_string()).collect();
        let aeb = rho.marginal_ordered(&order)?;
        let layout = aeb.layout().clone();
        let d_a = layout.dim_of_all(a)?;
        let d_e = layout.dim_of_all(e)?;
        let d_b = layout.dim_of_all(b)?;
        let ae_labels: Vec<String> = a.iter().chain(e).map(|l| l.as_ref().to_string()).collect();
        let rho_ae = aeb.marginal_ordered(&ae_labels)?.into_parts().0;
        let eb = eb_marginal(&aeb, e, b)?;
        let tr_b = partial_trace_channel(eb.layout(), e)?;
        let parts = petz_parts(&tr_b, &eb, precision)?;
        let petz = petz_kraus(&tr_b, &parts, precision)?;
        let e_cut = parts.image_eig.cutoff(precision.relative_cutoff());
        let eb_cut = parts.sigma_eig.cutoff(precision.relative_cutoff());
        let sqrt_target = psd_function(aeb.matrix(), f64::sqrt, precision)?;
        Ok(Self {
            target: aeb.matrix().clone(),
            sqrt_target,
            rho_ae,
            d_a,
            d_e,
            d_eb: d_e * d_b,
            petz,
            e_eig: parts.image_eig,
            e_cut,
            eb_eig: parts.sigma_eig,
            eb_cut,
            precision,
            layout,
        })
    }

    fn unitary(eig: &Eigen, cut: f64, s: f64) -> Mat {
        eig.reconstruct_with(|l| {
            if l > cut {
                let ph = s * l.ln();
                crate::linalg::c(ph.cos(), ph.sin())
            } else {
                cr(1.0)
            }
        })
    }

    /// `(id_A ⊗ R_t) ρ^{AE}` on `A E B`.
    pub fn recovered(&self, t: f64) -> Mat {
        let kraus: Vec<Mat> = if t == 0.0 {
            self.petz.clone()
        } else {
            let left = Self::unitary(&self.eb_eig, self.eb_cut, -t);
            let right = Self::unitary(&self.e_eig, self.e_cut, t);
            self.petz.iter().map(|k| &left * k * &right).collect()
        };
        apply_blockwise(&kraus, &self.rho_ae, self.d_a, self.d_e, self.d_eb)
    }

    pub fn recovered_state(&self, t: f64) -> Result<MultipartiteState> {
        MultipartiteState::from_trusted(crate::linalg::hermitize(&self.recovered(t)), self.layout.clone())
    }

    pub fn target(&self) -> &Mat {
        &self.target
    }

    pub fn fidelity(&self, t: f64) -> Result<f64> {
        let rec = crate::linalg::hermitize(&self.recovered(t));
        let root = psd_function(&rec, f64::sqrt, self.precision)?;
        Ok(crate::linalg::nuclear_norm(&(&self.sqrt_target * root)).clamp(0.0, 1.0))
    }

    /// `−log₂ F²`, `+∞` at zero fidelity.
    pub fn neg_log_fidelity_sq(&self, t: f64) -> Result<f64> {
        let f = self.fidelity(t)?;
        Ok(if f > 0.0 { -2.0 * f.log2() } else { f64::INFINITY })
    }
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    // (t, value): smaller value, then smaller |t|, then smaller t
    if a.1 != b.1 {
        return a.1 < b.1;
    }
    if a.0.abs() != b.0.abs() {
        return a.0.abs() < b.0.abs();
    }
    a.0 < b.0
}

/// Coarse scan over `grid`, then golden-section refinement on the bracket
/// around the coarse minimum.
pub fn best_swivel_scan<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    e: &[S],
    b: &[S],
    grid: &[f64],
) -> Result<SwivelScan> {
    best_swivel_scan_with(rho, a, e, b, grid, Precision::Standard)
}

pub fn best_swivel_scan_with<S: AsRef<str>>(
    rho: &MultipartiteState,
    a: &[S],
    e: &[S],
    b: &[S],
    grid: &[f64],
    precision: Precision,
) -> Result<SwivelScan> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("swivel grid is empty".into()));
    }
    let ev = SwivelEvaluator::new(rho, a, e, b, precision)?;
    let cmi = crate::info::conditional_mutual_information_with(rho, a, b, e, precision)?;
    let (t, value, mut evaluations) = scan_minimum(|t| ev.neg_log_fidelity_sq(t), grid)?;
    let best = (t, value);
    let fidelity_best = ev.fidelity(best.0)?;
    evaluations += 1;
    Ok(SwivelScan {
        t_best: best.0,
        fidelity_best,
        value_best: best.1,
        cmi,
        bound_holds: best.1 <= cmi + SWIVEL_BOUND_SLACK,
        evaluations,
    })
}

/// Coarse scan of `f` over `grid`, then golden-section refinement on the
/// bracket around the coarse minimum. Returns `(t, f(t), evaluations)`.
pub(crate) fn scan_minimum(f: impl Fn(f64) -> Result<f64>, grid: &[f64]) -> Result<(f64, f64, usize)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("swivel grid is empty".into()));
    }
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|x, y| x.total_cmp(y));
    sorted.dedup();
    let values: Vec<f64> = sorted.iter().map(|&t| f(t)).collect::<Result<_>>()?;
    let mut evaluations = values.len();
    let mut best_i = 0;
    for i in 1..sorted.len() {
        if better((sorted[i], values[i]), (sorted[best_i], values[best_i])) {
            best_i = i;
        }
    }
    let mut best = (sorted[best_i], values[best_i]);
    if sorted.len() >= 2 {
        let lo = sorted[best_i.saturating_sub(1)];
        let hi = sorted[(best_i + 1).min(sorted.len() - 1)];
        let (t, v, n) = golden_section(&f, lo, hi, 1e-6, 60)?;
        evaluations += n;
        if better((t, v), best) {
            best = (t, v);
        }
    }
    Ok((best.0, best.1, evaluations))
}

/// Minimizes `f` on `[lo, hi]`; returns `(t, f(t), evaluations)`.
pub(crate) fn golden_section(
    f: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64, usize)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut n = 2;
    while (hi - lo) > tol && n < max_iter {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
        n += 1;
    }
    Ok(if f1 <= f2 { (x1, f1, n) } else { (x2, f2, n) })
}

/// `F` between a target state and its recovery.
pub fn recovery_fidelity(target: &MultipartiteState, recovered: &MultipartiteState) -> Result<f64> {
    matrix_fidelity(target.matrix(), recovered.matrix(), Precision::Standard)
}
