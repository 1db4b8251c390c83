//! Single-level 1D/2D DWT and IDWT over truncated analysis/synthesis
//! operators, plus their exact vector-Jacobian products.
//!
//! For a signal of length `n` the operators are `⌊n/2⌋ × n`; row `k` holds the
//! filter starting at column `2k`, and taps past the end are dropped (zero
//! extension). Reconstruction is therefore exact away from the boundaries
//! only, except for Haar on even lengths where it is exact everywhere.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::filterbank::WaveletSpec;
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor};

/// A `⌊n/2⌋ × n` operator whose row `k` is `taps` placed at column `2k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOperator<T> {
    rows: usize,
    cols: usize,
    taps: Vec<T>,
}

impl<T: Scalar> BandedOperator<T> {
    pub fn new(taps: &[f64], n: usize) -> Self {
        Self {
            rows: n / 2,
            cols: n,
            taps: taps.iter().map(|&t| T::of(t)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    /// Taps of row `k` that land inside the matrix.
    #[inline]
    fn row_taps(&self, k: usize) -> &[T] {
        let start = 2 * k;
        let end = (start + self.taps.len()).min(self.cols);
        &self.taps[..end - start]
    }

    /// Number of structurally nonzero entries (truncation-aware).
    pub fn nnz(&self) -> usize {
        (0..self.rows).map(|k| self.row_taps(k).iter().filter(|t| !t.is_zero()).count()).sum()
    }

    /// `out = A · x`, reading `x` and writing `out` with the given strides.
    #[inline]
    pub fn apply_strided(&self, x: &[T], xs: usize, out: &mut [T], os: usize) {
        for k in 0..self.rows {
            let base = 2 * k;
            let mut acc = T::zero();
            for (j, &t) in self.row_taps(k).iter().enumerate() {
                acc += t * x[(base + j) * xs];
            }
            out[k * os] = acc;
        }
    }

    /// `out += Aᵀ · y`.
    #[inline]
    pub fn apply_transpose_add_strided(&self, y: &[T], ys: usize, out: &mut [T], os: usize) {
        for k in 0..self.rows {
            let base = 2 * k;
            let v = y[k * ys];
            for (j, &t) in self.row_taps(k).iter().enumerate() {
                out[(base + j) * os] += t * v;
            }
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.apply_strided(x, 1, &mut out, 1);
        out
    }

    pub fn apply_transpose(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        self.apply_transpose_add_strided(y, 1, &mut out, 1);
        out
    }

    /// Materialized matrix, the reference for the matrix-free kernels.
    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for k in 0..self.rows {
            for (j, &t) in self.row_taps(k).iter().enumerate() {
                m.set(k, 2 * k + j, t);
            }
        }
        m
    }
}

/// The four truncated operators of one wavelet at one signal length.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOperator<T> {
    wavelet: String,
    signal_length: usize,
    low: BandedOperator<T>,
    high: BandedOperator<T>,
    low_syn: BandedOperator<T>,
    high_syn: BandedOperator<T>,
}

impl<T: Scalar> AnalysisOperator<T> {
    pub fn wavelet(&self) -> &str {
        &self.wavelet
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    pub fn half_length(&self) -> usize {
        self.signal_length / 2
    }

    /// Low-pass analysis operator `L`.
    pub fn low(&self) -> &BandedOperator<T> {
        &self.low
    }

    /// High-pass analysis operator `H`.
    pub fn high(&self) -> &BandedOperator<T> {
        &self.high
    }

    pub fn low_syn(&self) -> &BandedOperator<T> {
        &self.low_syn
    }

    pub fn high_syn(&self) -> &BandedOperator<T> {
        &self.high_syn
    }

    /// Dense `L_synᵀ·L + H_synᵀ·H`; the identity wherever reconstruction is exact.
    pub fn reconstruction_matrix(&self) -> Matrix<T> {
        let l = self.low.to_dense();
        let h = self.high.to_dense();
        let ls = self.low_syn.to_dense();
        let hs = self.high_syn.to_dense();
        let a = ls.transpose().matmul(&l).expect("conformant");
        let b = hs.transpose().matmul(&h).expect("conformant");
        a.add(&b).expect("conformant")
    }
}

/// Builds a fresh (uncached) operator.
pub fn build_operator<T: Scalar>(spec: &WaveletSpec, n: usize) -> Result<AnalysisOperator<T>> {
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    Ok(AnalysisOperator {
        wavelet: spec.name.clone(),
        signal_length: n,
        low: BandedOperator::new(&spec.analysis_low, n),
        high: BandedOperator::new(&spec.analysis_high, n),
        low_syn: BandedOperator::new(&spec.synthesis_low, n),
        high_syn: BandedOperator::new(&spec.synthesis_high, n),
    })
}

type CacheKey = (String, u64, usize, TypeId);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<dyn Any + Send + Sync>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<dyn Any + Send + Sync>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn fingerprint(spec: &WaveletSpec) -> u64 {
    let mut hasher = DefaultHasher::new();
    for filt in [&spec.analysis_low, &spec.analysis_high, &spec.synthesis_low, &spec.synthesis_high] {
        filt.len().hash(&mut hasher);
        for c in filt.iter() {
            c.to_bits().hash(&mut hasher);
        }
    }
    hasher.finish()
}

/// Cached operator for `(wavelet, n, element type)`. The key includes a
/// fingerprint of the coefficients, so edited specs never alias registry ones.
pub fn operator<T: Scalar>(spec: &WaveletSpec, n: usize) -> Result<Arc<AnalysisOperator<T>>> {
    let key = (spec.name.clone(), fingerprint(spec), n, TypeId::of::<T>());
    if let Ok(map) = cache().read() {
        if let Some(op) = map.get(&key).and_then(|a| a.clone().downcast::<AnalysisOperator<T>>().ok()) {
            return Ok(op);
        }
    }
    let op = Arc::new(build_operator::<T>(spec, n)?);
    if let Ok(mut map) = cache().write() {
        map.entry(key).or_insert_with(|| op.clone());
    }
    Ok(op)
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 {
        Err(Error::TooShort { len, min: 2 })
    } else {
        Ok(())
    }
}

/// One analysis step: `(L·s, H·s)`.
pub fn dwt1d<T: Scalar>(signal: &[T], spec: &WaveletSpec) -> Result<(Vec<T>, Vec<T>)> {
    check_len(signal.len())?;
    let op = operator::<T>(spec, signal.len())?;
    Ok((op.low.apply(signal), op.high.apply(signal)))
}

/// `L_synᵀ·low + H_synᵀ·high`, of length `n`.
pub fn idwt1d<T: Scalar>(low: &[T], high: &[T], spec: &WaveletSpec, n: usize) -> Result<Vec<T>> {
    check_len(n)?;
    if low.len() != n / 2 || high.len() != n / 2 {
        return Err(Error::shape(format!(
            "subbands of length {}/{} do not match target length {n}",
            low.len(),
            high.len()
        )));
    }
    let op = operator::<T>(spec, n)?;
    let mut out = vec![T::zero(); n];
    op.low_syn.apply_transpose_add_strided(low, 1, &mut out, 1);
    op.high_syn.apply_transpose_add_strided(high, 1, &mut out, 1);
    Ok(out)
}

/// Gradient of [`dwt1d`] with respect to its input: `Lᵀ·g_low + Hᵀ·g_high`.
pub fn dwt1d_vjp<T: Scalar>(upstream_low: &[T], upstream_high: &[T], spec: &WaveletSpec, n: usize) -> Result<Vec<T>> {
    check_len(n)?;
    if upstream_low.len() != n / 2 || upstream_high.len() != n / 2 {
        return Err(Error::shape(format!(
            "upstream gradients of length {}/{} do not match signal length {n}",
            upstream_low.len(),
            upstream_high.len()
        )));
    }
    let op = operator::<T>(spec, n)?;
    let mut out = vec![T::zero(); n];
    op.low.apply_transpose_add_strided(upstream_low, 1, &mut out, 1);
    op.high.apply_transpose_add_strided(upstream_high, 1, &mut out, 1);
    Ok(out)
}

/// Gradient of [`idwt1d`] with respect to both subbands: `(L_syn·g, H_syn·g)`.
pub fn idwt1d_vjp<T: Scalar>(upstream: &[T], spec: &WaveletSpec) -> Result<(Vec<T>, Vec<T>)> {
    check_len(upstream.len())?;
    let op = operator::<T>(spec, upstream.len())?;
    Ok((op.low_syn.apply(upstream), op.high_syn.apply(upstream)))
}

/// Four equally shaped subbands of one 2D plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition2D<T> {
    pub ll: Matrix<T>,
    pub lh: Matrix<T>,
    pub hl: Matrix<T>,
    pub hh: Matrix<T>,
    pub original_shape: (usize, usize),
}

impl<T: Scalar> Decomposition2D<T> {
    pub fn zeros(original_shape: (usize, usize)) -> Self {
        let (m, n) = original_shape;
        let z = Matrix::zeros(m / 2, n / 2);
        Self {
            ll: z.clone(),
            lh: z.clone(),
            hl: z.clone(),
            hh: z,
            original_shape,
        }
    }

    pub fn subbands(&self) -> [&Matrix<T>; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }

    pub fn subbands_mut(&mut self) -> [&mut Matrix<T>; 4] {
        [&mut self.ll, &mut self.lh, &mut self.hl, &mut self.hh]
    }

    fn validate(&self) -> Result<()> {
        let (m, n) = self.original_shape;
        check_len(m)?;
        check_len(n)?;
        let want = (m / 2, n / 2);
        for (name, band) in ["ll", "lh", "hl", "hh"].iter().zip(self.subbands()) {
            if band.shape() != want {
                return Err(Error::shape(format!(
                    "subband {name} is {:?}, expected {want:?} for original shape {:?}",
                    band.shape(),
                    self.original_shape
                )));
            }
        }
        Ok(())
    }
}

/// Operator pair along one axis.
struct AxisOps<'a, T> {
    low: &'a BandedOperator<T>,
    high: &'a BandedOperator<T>,
}

/// `[A_r·X·A_cᵀ]` for the four (row, column) operator pairs, in the order
/// ll = (low, low), lh = (high, low), hl = (low, high), hh = (high, high).
/// `out` slices are `⌊m/2⌋ × ⌊n/2⌋`, row-major.
fn analyze_plane<T: Scalar>(x: &[T], m: usize, n: usize, rows: &AxisOps<T>, cols: &AxisOps<T>, out: [&mut [T]; 4]) {
    let (hm, hn) = (m / 2, n / 2);
    // Filter along each row: X·L_cᵀ and X·H_cᵀ, each m × hn.
    let mut xl = vec![T::zero(); m * hn];
    let mut xh = vec![T::zero(); m * hn];
    for i in 0..m {
        let row = &x[i * n..(i + 1) * n];
        cols.low.apply_strided(row, 1, &mut xl[i * hn..(i + 1) * hn], 1);
        cols.high.apply_strided(row, 1, &mut xh[i * hn..(i + 1) * hn], 1);
    }
    let [ll, lh, hl, hh] = out;
    // Then along each column.
    for j in 0..hn {
        rows.low.apply_strided(&xl[j..], hn, &mut ll[j..], hn);
        rows.high.apply_strided(&xl[j..], hn, &mut lh[j..], hn);
        rows.low.apply_strided(&xh[j..], hn, &mut hl[j..], hn);
        rows.high.apply_strided(&xh[j..], hn, &mut hh[j..], hn);
    }
    debug_assert_eq!(ll.len(), hm * hn);
}

/// `Σ A_rᵀ·B·A_c` over the four subbands, accumulated into `out` (m × n).
fn synthesize_plane<T: Scalar>(bands: [&[T]; 4], m: usize, n: usize, rows: &AxisOps<T>, cols: &AxisOps<T>, out: &mut [T]) {
    let hn = n / 2;
    let [ll, lh, hl, hh] = bands;
    // Column pass: A = L_rᵀ·ll + H_rᵀ·lh, B = L_rᵀ·hl + H_rᵀ·hh (m × hn).
    let mut a = vec![T::zero(); m * hn];
    let mut b = vec![T::zero(); m * hn];
    for j in 0..hn {
        rows.low.apply_transpose_add_strided(&ll[j..], hn, &mut a[j..], hn);
        rows.high.apply_transpose_add_strided(&lh[j..], hn, &mut a[j..], hn);
        rows.low.apply_transpose_add_strided(&hl[j..], hn, &mut b[j..], hn);
        rows.high.apply_transpose_add_strided(&hh[j..], hn, &mut b[j..], hn);
    }
    // Row pass: X = A·L_c + B·H_c.
    for i in 0..m {
        let dst = &mut out[i * n..(i + 1) * n];
        cols.low.apply_transpose_add_strided(&a[i * hn..(i + 1) * hn], 1, dst, 1);
        cols.high.apply_transpose_add_strided(&b[i * hn..(i + 1) * hn], 1, dst, 1);
    }
}

fn analysis_ops<T>(op: &AnalysisOperator<T>) -> AxisOps<'_, T> {
    AxisOps {
        low: &op.low,
        high: &op.high,
    }
}

fn synthesis_ops<T>(op: &AnalysisOperator<T>) -> AxisOps<'_, T> {
    AxisOps {
        low: &op.low_syn,
        high: &op.high_syn,
    }
}

fn analyze_matrix<T: Scalar>(x: &Matrix<T>, spec: &WaveletSpec, synthesis: bool) -> Result<Decomposition2D<T>> {
    let (m, n) = x.shape();
    check_len(m)?;
    check_len(n)?;
    let row_op = operator::<T>(spec, m)?;
    let col_op = operator::<T>(spec, n)?;
    let (rows, cols) = if synthesis {
        (synthesis_ops(&row_op), synthesis_ops(&col_op))
    } else {
        (analysis_ops(&row_op), analysis_ops(&col_op))
    };
    let mut d = Decomposition2D::zeros((m, n));
    {
        let [ll, lh, hl, hh] = d.subbands_mut();
        analyze_plane(x.data(), m, n, &rows, &cols, [ll.data_mut(), lh.data_mut(), hl.data_mut(), hh.data_mut()]);
    }
    Ok(d)
}

fn synthesize_matrix<T: Scalar>(d: &Decomposition2D<T>, spec: &WaveletSpec, synthesis: bool) -> Result<Matrix<T>> {
    d.validate()?;
    let (m, n) = d.original_shape;
    let row_op = operator::<T>(spec, m)?;
    let col_op = operator::<T>(spec, n)?;
    let (rows, cols) = if synthesis {
        (synthesis_ops(&row_op), synthesis_ops(&col_op))
    } else {
        (analysis_ops(&row_op), analysis_ops(&col_op))
    };
    let mut out = Matrix::zeros(m, n);
    synthesize_plane(
        [d.ll.data(), d.lh.data(), d.hl.data(), d.hh.data()],
        m,
        n,
        &rows,
        &cols,
        out.data_mut(),
    );
    Ok(out)
}

/// `ll = L·X·Lᵀ, lh = H·X·Lᵀ, hl = L·X·Hᵀ, hh = H·X·Hᵀ`.
pub fn dwt2d<T: Scalar>(x: &Matrix<T>, spec: &WaveletSpec) -> Result<Decomposition2D<T>> {
    analyze_matrix(x, spec, false)
}

/// `L_synᵀ·ll·L_syn + H_synᵀ·lh·L_syn + L_synᵀ·hl·H_syn + H_synᵀ·hh·H_syn`.
pub fn idwt2d<T: Scalar>(d: &Decomposition2D<T>, spec: &WaveletSpec) -> Result<Matrix<T>> {
    synthesize_matrix(d, spec, true)
}

/// Transpose of [`dwt2d`]: maps subband gradients back to the input plane.
pub fn dwt2d_vjp<T: Scalar>(upstream: &Decomposition2D<T>, spec: &WaveletSpec) -> Result<Matrix<T>> {
    synthesize_matrix(upstream, spec, false)
}

/// Transpose of [`idwt2d`]: the synthesis operators applied analysis-style.
pub fn idwt2d_vjp<T: Scalar>(upstream: &Matrix<T>, spec: &WaveletSpec) -> Result<Decomposition2D<T>> {
    analyze_matrix(upstream, spec, true)
}

/// Subbands of a `[N, C, H, W]` batch, each `[N, C, ⌊H/2⌋, ⌊W/2⌋]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandTensors<T> {
    pub ll: Tensor<T>,
    pub lh: Tensor<T>,
    pub hl: Tensor<T>,
    pub hh: Tensor<T>,
}

impl<T: Scalar> SubbandTensors<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            ll: Tensor::zeros(shape),
            lh: Tensor::zeros(shape),
            hl: Tensor::zeros(shape),
            hh: Tensor::zeros(shape),
        }
    }
}

fn batch_dims<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let (n, c, h, w) = x.dims4()?;
    check_len(h)?;
    check_len(w)?;
    Ok((n, c, h, w))
}

/// Channel-by-channel [`dwt2d`] over a `[N, C, H, W]` tensor.
pub fn dwt2d_batch<T: Scalar>(x: &Tensor<T>, spec: &WaveletSpec) -> Result<SubbandTensors<T>> {
    let (n, c, h, w) = batch_dims(x)?;
    let row_op = operator::<T>(spec, h)?;
    let col_op = operator::<T>(spec, w)?;
    let (rows, cols) = (analysis_ops(&row_op), analysis_ops(&col_op));
    let mut out = SubbandTensors::zeros(&[n, c, h / 2, w / 2]);
    for s in 0..n {
        for ch in 0..c {
            analyze_plane(
                x.plane(s, ch),
                h,
                w,
                &rows,
                &cols,
                [
                    out.ll.plane_mut(s, ch),
                    out.lh.plane_mut(s, ch),
                    out.hl.plane_mut(s, ch),
                    out.hh.plane_mut(s, ch),
                ],
            );
        }
    }
    Ok(out)
}

fn synthesize_batch<T: Scalar>(
    bands: &SubbandTensors<T>,
    spec: &WaveletSpec,
    shape: (usize, usize),
    synthesis: bool,
) -> Result<Tensor<T>> {
    let (h, w) = shape;
    check_len(h)?;
    check_len(w)?;
    let (n, c, bh, bw) = bands.ll.dims4()?;
    for t in [&bands.lh, &bands.hl, &bands.hh] {
        if t.shape() != bands.ll.shape() {
            return Err(Error::shape("subband tensors differ in shape"));
        }
    }
    if (bh, bw) != (h / 2, w / 2) {
        return Err(Error::shape(format!(
            "subbands of {bh}x{bw} do not match target {h}x{w}"
        )));
    }
    let row_op = operator::<T>(spec, h)?;
    let col_op = operator::<T>(spec, w)?;
    let (rows, cols) = if synthesis {
        (synthesis_ops(&row_op), synthesis_ops(&col_op))
    } else {
        (analysis_ops(&row_op), analysis_ops(&col_op))
    };
    let mut out = Tensor::zeros(&[n, c, h, w]);
    for s in 0..n {
        for ch in 0..c {
            synthesize_plane(
                [
                    bands.ll.plane(s, ch),
                    bands.lh.plane(s, ch),
                    bands.hl.plane(s, ch),
                    bands.hh.plane(s, ch),
                ],
                h,
                w,
                &rows,
                &cols,
                out.plane_mut(s, ch),
            );
        }
    }
    Ok(out)
}

/// Channel-by-channel [`idwt2d`] back to spatial size `shape`.
pub fn idwt2d_batch<T: Scalar>(bands: &SubbandTensors<T>, spec: &WaveletSpec, shape: (usize, usize)) -> Result<Tensor<T>> {
    synthesize_batch(bands, spec, shape, true)
}

/// Channel-by-channel [`dwt2d_vjp`].
pub fn dwt2d_batch_vjp<T: Scalar>(upstream: &SubbandTensors<T>, spec: &WaveletSpec, shape: (usize, usize)) -> Result<Tensor<T>> {
    synthesize_batch(upstream, spec, shape, false)
}

/// Only the `ll` subband of each plane; the `DWT_ll` down-sampling.
pub fn dwt2d_ll_batch<T: Scalar>(x: &Tensor<T>, spec: &WaveletSpec) -> Result<Tensor<T>> {
    let (n, c, h, w) = batch_dims(x)?;
    let row_op = operator::<T>(spec, h)?;
    let col_op = operator::<T>(spec, w)?;
    let (hh, hw) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, hh, hw]);
    let mut tmp = vec![T::zero(); h * hw];
    for s in 0..n {
        for ch in 0..c {
            let plane = x.plane(s, ch);
            for i in 0..h {
                col_op.low.apply_strided(&plane[i * w..(i + 1) * w], 1, &mut tmp[i * hw..(i + 1) * hw], 1);
            }
            let dst = out.plane_mut(s, ch);
            for j in 0..hw {
                row_op.low.apply_strided(&tmp[j..], hw, &mut dst[j..], hw);
            }
        }
    }
    Ok(out)
}

/// Gradient of [`dwt2d_ll_batch`]: `Lᵀ·G·L` per plane.
pub fn dwt2d_ll_batch_vjp<T: Scalar>(upstream: &Tensor<T>, spec: &WaveletSpec, shape: (usize, usize)) -> Result<Tensor<T>> {
    let (h, w) = shape;
    check_len(h)?;
    check_len(w)?;
    let (n, c, gh, gw) = upstream.dims4()?;
    if (gh, gw) != (h / 2, w / 2) {
        return Err(Error::shape(format!(
            "gradient of {gh}x{gw} does not match input {h}x{w}"
        )));
    }
    let row_op = operator::<T>(spec, h)?;
    let col_op = operator::<T>(spec, w)?;
    let mut out = Tensor::zeros(&[n, c, h, w]);
    let mut tmp = vec![T::zero(); h * gw];
    for s in 0..n {
        for ch in 0..c {
            tmp.iter_mut().for_each(|v| *v = T::zero());
            let g = upstream.plane(s, ch);
            for j in 0..gw {
                row_op.low.apply_transpose_add_strided(&g[j..], gw, &mut tmp[j..], gw);
            }
            let dst = out.plane_mut(s, ch);
            for i in 0..h {
                col_op
                    .low
                    .apply_transpose_add_strided(&tmp[i * gw..(i + 1) * gw], 1, &mut dst[i * w..(i + 1) * w], 1);
            }
        }
    }
    Ok(out)
}
