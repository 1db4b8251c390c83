use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use super::{DownsampleMode, Layer, Param};
use crate::error::{Error, Result};
use crate::filterbank::{get_wavelet, WaveletSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::transform::{dwt2d_batch, dwt2d_batch_vjp, dwt2d_ll_batch, dwt2d_ll_batch_vjp, SubbandTensors};

fn uniform_fan_in<T: Scalar>(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..len).map(|_| T::of(rng.random_range(-bound..bound))).collect()
}

fn missing_cache(kind: &str) -> Error {
    Error::InvalidConfig(format!("{kind}: backward called before forward"))
}

fn expect_shape<T: Scalar>(t: &Tensor<T>, want: &[usize], what: &str) -> Result<()> {
    if t.shape() != want {
        return Err(Error::shape(format!("{what}: expected {want:?}, got {:?}", t.shape())));
    }
    Ok(())
}

/// Same-padded 2D cross-correlation.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
    cache: Option<ConvCache<T>>,
}

#[derive(Debug, Clone)]
struct ConvCache<T> {
    input_shape: Vec<usize>,
    cols: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let weight = uniform_fan_in(rng, out_channels * fan_in, fan_in);
        let bias = uniform_fan_in(rng, out_channels, fan_in);
        Self::from_parts(in_channels, out_channels, kernel, stride, weight, bias)
    }

    /// Weights laid out `[out, in, k, k]`.
    pub fn from_parts(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, weight: Vec<T>, bias: Vec<T>) -> Self {
        assert_eq!(weight.len(), out_channels * in_channels * kernel * kernel);
        assert_eq!(bias.len(), out_channels);
        assert!(kernel % 2 == 1 && stride > 0, "odd kernel and positive stride required");
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weight: Param::new(weight),
            bias: Param::new(bias),
            cache: None,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) / self.stride + 1, (w - 1) / self.stride + 1)
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.in_channels {
            return Err(Error::shape(format!("conv expects {} input channels, got {c}", self.in_channels)));
        }
        Ok((n, c, h, w))
    }

    /// Unfolds one sample into `[C·k·k, Ho·Wo]` columns.
    fn im2col(&self, x: &[T], h: usize, w: usize, cols: &mut [T]) {
        let k = self.kernel;
        let pad = k / 2;
        let (ho, wo) = self.out_hw(h, w);
        let s = self.stride;
        for c in 0..self.in_channels {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * ho * wo..(row + 1) * ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - pad as isize;
                        let line = &mut dst[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h as isize {
                            line.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - pad as isize;
                            *v = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[T], h: usize, w: usize, x: &mut [T]) {
        let k = self.kernel;
        let pad = k / 2;
        let (ho, wo) = self.out_hw(h, w);
        let s = self.stride;
        for c in 0..self.in_channels {
            let plane = &mut x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * ho * wo..(row + 1) * ho * wo];
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..wo {
                            let ix = (ox * s + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                plane[iy as usize * w + ix as usize] += src[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    fn run(&self, x: &Tensor<T>, keep_cols: bool) -> Result<(Tensor<T>, Vec<T>)> {
        let (n, _, h, w) = self.dims(x)?;
        let (ho, wo) = self.out_hw(h, w);
        let ckk = self.in_channels * self.kernel * self.kernel;
        let per_in = self.in_channels * h * w;
        let mut out = Tensor::zeros(&[n, self.out_channels, ho, wo]);
        let mut all_cols = if keep_cols { vec![T::zero(); n * ckk * ho * wo] } else { Vec::new() };
        let mut scratch = vec![T::zero(); if keep_cols { 0 } else { ckk * ho * wo }];
        let per_out = self.out_channels * ho * wo;
        for s in 0..n {
            let cols: &mut [T] = if keep_cols {
                &mut all_cols[s * ckk * ho * wo..(s + 1) * ckk * ho * wo]
            } else {
                &mut scratch
            };
            self.im2col(&x.data()[s * per_in..(s + 1) * per_in], h, w, cols);
            let dst = &mut out.data_mut()[s * per_out..(s + 1) * per_out];
            for (o, chunk) in dst.chunks_mut(ho * wo).enumerate() {
                chunk.iter_mut().for_each(|v| *v = self.bias.value[o]);
            }
            gemm_nn(self.out_channels, ckk, ho * wo, &self.weight.value, cols, dst);
        }
        Ok((out, all_cols))
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn kind(&self) -> &'static str {
        "conv"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [n, c, h, w] if c == self.in_channels => {
                let (ho, wo) = self.out_hw(h, w);
                Ok(vec![n, self.out_channels, ho, wo])
            }
            _ => Err(Error::shape(format!("conv cannot take input {input:?}"))),
        }
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(x, false)?.0)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (out, cols) = self.run(x, true)?;
        self.cache = Some(ConvCache {
            input_shape: x.shape().to_vec(),
            cols,
        });
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("conv"))?;
        let shape = cache.input_shape.clone();
        let (n, h, w) = (shape[0], shape[2], shape[3]);
        let (ho, wo) = self.out_hw(h, w);
        expect_shape(grad, &[n, self.out_channels, ho, wo], "conv gradient")?;
        let ckk = self.in_channels * self.kernel * self.kernel;
        let hw = ho * wo;
        let per_in = self.in_channels * h * w;
        let mut grad_x = Tensor::zeros(&shape);
        let mut grad_cols = vec![T::zero(); ckk * hw];
        for s in 0..n {
            let g = &grad.data()[s * self.out_channels * hw..(s + 1) * self.out_channels * hw];
            let cols = &cache.cols[s * ckk * hw..(s + 1) * ckk * hw];
            for (o, chunk) in g.chunks(hw).enumerate() {
                self.bias.grad[o] += chunk.iter().copied().sum::<T>();
            }
            gemm_nt(self.out_channels, hw, ckk, g, cols, &mut self.weight.grad);
            grad_cols.iter_mut().for_each(|v| *v = T::zero());
            gemm_tn(ckk, self.out_channels, hw, &self.weight.value, g, &mut grad_cols);
            self.col2im(&grad_cols, h, w, &mut grad_x.data_mut()[s * per_in..(s + 1) * per_in]);
        }
        Ok(grad_x)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Per-channel batch normalisation over `(N, H, W)`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    momentum: f64,
    eps: f64,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub const MOMENTUM: f64 = 0.1;
    pub const EPS: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(vec![T::one(); channels]),
            beta: Param::new(vec![T::zero(); channels]),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: Self::MOMENTUM,
            eps: Self::EPS,
            cache: None,
        }
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let dims = x.dims4()?;
        if dims.1 != self.channels {
            return Err(Error::shape(format!("batch norm expects {} channels, got {}", self.channels, dims.1)));
        }
        Ok(dims)
    }
}

impl<T: Scalar> Layer<T> for BatchNorm2d<T> {
    fn kind(&self) -> &'static str {
        "batch_norm"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [_, c, _, _] if c == self.channels => Ok(input.to_vec()),
            _ => Err(Error::shape(format!("batch norm cannot take input {input:?}"))),
        }
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.check(x)?;
        let mut out = x.clone();
        let eps = T::of(self.eps);
        for s in 0..n {
            for ch in 0..c {
                let scale = self.gamma.value[ch] / (self.running_var[ch] + eps).sqrt();
                let shift = self.beta.value[ch] - self.running_mean[ch] * scale;
                out.plane_mut(s, ch).iter_mut().for_each(|v| *v = *v * scale + shift);
            }
        }
        let _ = (h, w);
        Ok(out)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.check(x)?;
        let count = n * h * w;
        let mut xhat = x.clone();
        let mut out = x.clone();
        let mut inv_std = vec![T::zero(); c];
        let eps = T::of(self.eps);
        let mom = T::of(self.momentum);
        for ch in 0..c {
            let mut mean = T::zero();
            for s in 0..n {
                mean += x.plane(s, ch).iter().copied().sum::<T>();
            }
            mean /= T::of(count as f64);
            let mut var = T::zero();
            for s in 0..n {
                var += x.plane(s, ch).iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
            }
            var /= T::of(count as f64);
            let istd = T::one() / (var + eps).sqrt();
            inv_std[ch] = istd;
            for s in 0..n {
                for (xh, &v) in xhat.plane_mut(s, ch).iter_mut().zip(x.plane(s, ch)) {
                    *xh = (v - mean) * istd;
                }
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                for (o, &xh) in out.plane_mut(s, ch).iter_mut().zip(xhat.plane(s, ch)) {
                    *o = g * xh + b;
                }
            }
            let unbiased = if count > 1 { var * T::of(count as f64 / (count - 1) as f64) } else { var };
            self.running_mean[ch] = (T::one() - mom) * self.running_mean[ch] + mom * mean;
            self.running_var[ch] = (T::one() - mom) * self.running_var[ch] + mom * unbiased;
        }
        self.cache = Some(BnCache { xhat, inv_std });
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("batch_norm"))?;
        expect_shape(grad, cache.xhat.shape(), "batch norm gradient")?;
        let (n, c, h, w) = grad.dims4()?;
        let m = T::of((n * h * w) as f64);
        let mut grad_x = Tensor::zeros(grad.shape());
        for ch in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for s in 0..n {
                for (&dy, &xh) in grad.plane(s, ch).iter().zip(cache.xhat.plane(s, ch)) {
                    sum_dy += dy;
                    sum_dy_xhat += dy * xh;
                }
            }
            self.beta.grad[ch] += sum_dy;
            self.gamma.grad[ch] += sum_dy_xhat;
            let k = self.gamma.value[ch] * cache.inv_std[ch] / m;
            for s in 0..n {
                let dst = grad_x.plane_mut(s, ch);
                for ((d, &dy), &xh) in dst.iter_mut().zip(grad.plane(s, ch)).zip(cache.xhat.plane(s, ch)) {
                    *d = k * (m * dy - sum_dy - xh * sum_dy_xhat);
                }
            }
        }
        Ok(grad_x)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&[T]> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { input: None }
    }
}

impl<T: Scalar> Layer<T> for Relu<T> {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.map(|v| v.max(T::zero())))
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("relu"))?;
        expect_shape(grad, x.shape(), "relu gradient")?;
        let data = grad
            .data()
            .iter()
            .zip(x.data())
            .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
            .collect();
        Tensor::new(grad.shape().to_vec(), data)
    }
}

/// Stride-2 spatial reduction in one of the [`DownsampleMode`]s.
#[derive(Debug, Clone)]
pub struct Downsample<T> {
    mode: DownsampleMode,
    wavelet: Option<WaveletSpec>,
    conv: Option<Conv2d<T>>,
    input_shape: Option<Vec<usize>>,
    argmax: Vec<usize>,
}

impl<T: Scalar> Downsample<T> {
    /// `channels` sizes the learnable kernel of [`DownsampleMode::StridedConv`].
    pub fn new(mode: DownsampleMode, channels: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let wavelet = mode.wavelet().map(get_wavelet).transpose()?;
        let conv = matches!(mode, DownsampleMode::StridedConv).then(|| Conv2d::new(channels, channels, 3, 2, rng));
        Ok(Self {
            mode,
            wavelet,
            conv,
            input_shape: None,
            argmax: Vec::new(),
        })
    }

    pub fn mode(&self) -> &DownsampleMode {
        &self.mode
    }

    fn spec(&self) -> &WaveletSpec {
        self.wavelet.as_ref().expect("wavelet mode carries a spec")
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::OddSpatial { h, w });
        }
        Ok((n, c, h, w))
    }

    fn pool(&self, x: &Tensor<T>, max: bool, record: Option<&mut Vec<usize>>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.dims(x)?;
        let (ho, wo) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[n, c, ho, wo]);
        let mut idx = Vec::new();
        let quarter = T::of(0.25);
        for s in 0..n {
            for ch in 0..c {
                let src = x.plane(s, ch);
                let base = (s * c + ch) * h * w;
                let dst = out.plane_mut(s, ch);
                for oy in 0..ho {
                    for ox in 0..wo {
                        let cells = [
                            (2 * oy) * w + 2 * ox,
                            (2 * oy) * w + 2 * ox + 1,
                            (2 * oy + 1) * w + 2 * ox,
                            (2 * oy + 1) * w + 2 * ox + 1,
                        ];
                        if max {
                            // First occurrence wins on ties.
                            let mut best = cells[0];
                            for &cell in &cells[1..] {
                                if src[cell] > src[best] {
                                    best = cell;
                                }
                            }
                            dst[oy * wo + ox] = src[best];
                            idx.push(base + best);
                        } else {
                            dst[oy * wo + ox] = cells.iter().map(|&i| src[i]).sum::<T>() * quarter;
                        }
                    }
                }
            }
        }
        if let Some(r) = record {
            *r = idx;
        }
        Ok(out)
    }

    fn concat(bands: &SubbandTensors<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = bands.ll.dims4()?;
        let mut out = Tensor::zeros(&[n, 4 * c, h, w]);
        for s in 0..n {
            for (b, band) in [&bands.ll, &bands.lh, &bands.hl, &bands.hh].into_iter().enumerate() {
                for ch in 0..c {
                    out.plane_mut(s, b * c + ch).copy_from_slice(band.plane(s, ch));
                }
            }
        }
        Ok(out)
    }

    fn compute(&self, x: &Tensor<T>, record: Option<&mut Vec<usize>>) -> Result<Tensor<T>> {
        self.dims(x)?;
        match &self.mode {
            DownsampleMode::MaxPool2 => self.pool(x, true, record),
            DownsampleMode::AvgPool2 => self.pool(x, false, None),
            DownsampleMode::StridedConv => self.conv.as_ref().expect("strided conv").infer(x),
            DownsampleMode::DwtLL(_) => dwt2d_ll_batch(x, self.spec()),
            DownsampleMode::DwtAvg(_) => {
                let b = dwt2d_batch(x, self.spec())?;
                let quarter = T::of(0.25);
                let data = (0..b.ll.len())
                    .map(|i| (b.ll.data()[i] + b.lh.data()[i] + b.hl.data()[i] + b.hh.data()[i]) * quarter)
                    .collect();
                Tensor::new(b.ll.shape().to_vec(), data)
            }
            DownsampleMode::DwtCat(_) => Self::concat(&dwt2d_batch(x, self.spec())?),
        }
    }
}

impl<T: Scalar> Layer<T> for Downsample<T> {
    fn kind(&self) -> &'static str {
        "downsample"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [n, c, h, w] if h % 2 == 0 && w % 2 == 0 => Ok(vec![n, c * self.mode.channel_factor(), h / 2, w / 2]),
            [_, _, h, w] => Err(Error::OddSpatial { h, w }),
            _ => Err(Error::shape(format!("down-sampling cannot take input {input:?}"))),
        }
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.compute(x, None)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.dims(x)?;
        if let Some(conv) = self.conv.as_mut() {
            self.input_shape = Some(x.shape().to_vec());
            return conv.forward(x);
        }
        let mut argmax = Vec::new();
        let out = self.compute(x, Some(&mut argmax))?;
        self.argmax = argmax;
        self.input_shape = Some(x.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.input_shape.clone().ok_or_else(|| missing_cache("downsample"))?;
        let want = self.output_shape(&shape)?;
        expect_shape(grad, &want, "down-sampling gradient")?;
        let hw = (shape[2], shape[3]);
        match &self.mode {
            DownsampleMode::MaxPool2 => {
                let mut out = Tensor::zeros(&shape);
                for (&i, &g) in self.argmax.iter().zip(grad.data()) {
                    out.data_mut()[i] += g;
                }
                Ok(out)
            }
            DownsampleMode::AvgPool2 => {
                let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
                let quarter = T::of(0.25);
                let mut out = Tensor::zeros(&shape);
                for s in 0..n {
                    for ch in 0..c {
                        let g = grad.plane(s, ch);
                        let dst = out.plane_mut(s, ch);
                        for y in 0..h {
                            for x in 0..w {
                                dst[y * w + x] = g[(y / 2) * (w / 2) + x / 2] * quarter;
                            }
                        }
                    }
                }
                Ok(out)
            }
            DownsampleMode::StridedConv => self.conv.as_mut().expect("strided conv").backward(grad),
            DownsampleMode::DwtLL(_) => dwt2d_ll_batch_vjp(grad, self.spec(), hw),
            DownsampleMode::DwtAvg(_) => {
                let g = grad.map(|v| v * T::of(0.25));
                let bands = SubbandTensors {
                    ll: g.clone(),
                    lh: g.clone(),
                    hl: g.clone(),
                    hh: g,
                };
                dwt2d_batch_vjp(&bands, self.spec(), hw)
            }
            DownsampleMode::DwtCat(_) => {
                let (n, c4, h2, w2) = grad.dims4()?;
                let c = c4 / 4;
                let mut bands = SubbandTensors::zeros(&[n, c, h2, w2]);
                for s in 0..n {
                    for ch in 0..c {
                        bands.ll.plane_mut(s, ch).copy_from_slice(grad.plane(s, ch));
                        bands.lh.plane_mut(s, ch).copy_from_slice(grad.plane(s, c + ch));
                        bands.hl.plane_mut(s, ch).copy_from_slice(grad.plane(s, 2 * c + ch));
                        bands.hh.plane_mut(s, ch).copy_from_slice(grad.plane(s, 3 * c + ch));
                    }
                }
                dwt2d_batch_vjp(&bands, self.spec(), hw)
            }
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        self.conv.as_ref().map(|c| c.params()).unwrap_or_default()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.conv.as_mut().map(|c| c.params_mut()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self { input_shape: None }
    }
}

impl<T: Scalar> Layer<T> for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input[0], input[1..].iter().product()])
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = <Self as Layer<T>>::output_shape(self, x.shape())?;
        x.clone().reshape(&shape)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.input_shape = Some(x.shape().to_vec());
        <Self as Layer<T>>::infer(self, x)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.input_shape.as_ref().ok_or_else(|| missing_cache("flatten"))?;
        grad.clone().reshape(shape)
    }
}

/// Fully connected layer, weights `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    in_features: usize,
    out_features: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        let weight = uniform_fan_in(rng, in_features * out_features, in_features);
        let bias = uniform_fan_in(rng, out_features, in_features);
        Self::from_parts(in_features, out_features, weight, bias)
    }

    pub fn from_parts(in_features: usize, out_features: usize, weight: Vec<T>, bias: Vec<T>) -> Self {
        assert_eq!(weight.len(), in_features * out_features);
        assert_eq!(bias.len(), out_features);
        Self {
            in_features,
            out_features,
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        }
    }

    fn batch(&self, x: &Tensor<T>) -> Result<usize> {
        match *x.shape() {
            [n, f] if f == self.in_features => Ok(n),
            _ => Err(Error::shape(format!("dense expects [N, {}], got {:?}", self.in_features, x.shape()))),
        }
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [n, f] if f == self.in_features => Ok(vec![n, self.out_features]),
            _ => Err(Error::shape(format!("dense cannot take input {input:?}"))),
        }
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.batch(x)?;
        let mut out = Tensor::zeros(&[n, self.out_features]);
        for row in out.data_mut().chunks_mut(self.out_features) {
            row.copy_from_slice(&self.bias.value);
        }
        gemm_nt(n, self.in_features, self.out_features, x.data(), &self.weight.value, out.data_mut());
        Ok(out)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("dense"))?;
        let n = x.shape()[0];
        expect_shape(grad, &[n, self.out_features], "dense gradient")?;
        for row in grad.data().chunks(self.out_features) {
            for (b, &g) in self.bias.grad.iter_mut().zip(row) {
                *b += g;
            }
        }
        gemm_tn(self.out_features, n, self.in_features, grad.data(), x.data(), &mut self.weight.grad);
        let mut grad_x = Tensor::zeros(&[n, self.in_features]);
        gemm_nn(n, self.out_features, self.in_features, grad.data(), &self.weight.value, grad_x.data_mut());
        Ok(grad_x)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
