//! Multiply-add accounting for wavelet transforms and whole models.
//!
//! Transform counts follow the dense matrix-product convention: a product of
//! an `a×b` and a `b×c` matrix costs `a·c·(2b − 1)`, and a 2D DWT subband is
//! evaluated as `(L·X)·Lᵀ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filterbank::get_wavelet;
use crate::nn::{DownsampleMode, LayerSpec, ModelConfig};
use crate::transform::BandedOperator;

fn positive(m: usize, n: usize, c: usize) -> Result<(u128, u128, u128)> {
    if m == 0 || n == 0 || c == 0 {
        return Err(Error::NonPositive(format!("m={m}, n={n}, c={c}")));
    }
    Ok((m as u128, n as u128, c as u128))
}

fn to_u64(v: u128) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::InvalidConfig(format!("operation count {v} overflows u64")))
}

/// `4c(m²n + mn²/2 − 3mn/4)`, evaluated exactly.
pub fn dwt2d_madds(m: usize, n: usize, c: usize) -> Result<u64> {
    let (m, n, c) = positive(m, n, c)?;
    to_u64(c * (4 * m * m * n + 2 * m * n * n - 3 * m * n))
}

/// `4c(mn² + m²n/2 − 3mn/4) + 3`, evaluated exactly.
pub fn idwt2d_madds(m: usize, n: usize, c: usize) -> Result<u64> {
    let (m, n, c) = positive(m, n, c)?;
    to_u64(c * (4 * m * n * n + 2 * m * m * n - 3 * m * n) + 3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerMadds {
    pub index: usize,
    pub kind: String,
    pub output_shape: Vec<usize>,
    pub madds: u64,
    pub wavelet: bool,
    /// Cost of a banded (sparse) implementation of a wavelet layer.
    pub banded_madds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaddsReport {
    pub input: Vec<usize>,
    /// Per-sample `[C, H, W]` the layers were traced with.
    pub traced_input: [usize; 3],
    pub layers: Vec<LayerMadds>,
    pub wavelet_madds: u64,
    pub non_wavelet_madds: u64,
    pub total_madds: u64,
    /// `100 · wavelet / total`.
    pub ratio_percent: f64,
    /// Wavelet subtotal with each `DwtLL` layer counted at a quarter of the
    /// full four-subband figure.
    pub wavelet_ll_quarter_madds: u64,
    /// Non-paper figure: wavelet subtotal under banded evaluation.
    pub wavelet_banded_madds: u64,
}

impl MaddsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,kind,output_shape,madds,wavelet,banded_madds_nonpaper\n");
        for l in &self.layers {
            let shape: Vec<String> = l.output_shape.iter().map(usize::to_string).collect();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                l.index,
                l.kind,
                shape.join("x"),
                l.madds,
                l.wavelet,
                l.banded_madds.map(|b| b.to_string()).unwrap_or_default()
            ));
        }
        s.push_str(&format!("total,wavelet,,{},,\n", self.wavelet_madds));
        s.push_str(&format!("total,non_wavelet,,{},,\n", self.non_wavelet_madds));
        s.push_str(&format!("total,all,,{},,\n", self.total_madds));
        s.push_str(&format!("ratio_percent,,,{},,\n", self.ratio_percent));
        s.push_str(&format!("wavelet_ll_quarter,,,{},,\n", self.wavelet_ll_quarter_madds));
        s.push_str(&format!("wavelet_banded_nonpaper,,,{},,\n", self.wavelet_banded_madds));
        s
    }
}

fn banded_dwt(wavelet: &str, h: usize, w: usize, ll_only: bool) -> Result<u64> {
    let spec = get_wavelet(wavelet)?;
    let nnz = |taps: &[f64], n: usize| BandedOperator::<f64>::new(taps, n).nnz() as u64;
    let (lh, lw) = (nnz(&spec.analysis_low, h), nnz(&spec.analysis_low, w));
    let (w64, h2) = (w as u64, (h / 2) as u64);
    if ll_only {
        return Ok(lh * w64 + h2 * lw);
    }
    let (hh, hw) = (nnz(&spec.analysis_high, h), nnz(&spec.analysis_high, w));
    Ok((lh + hh) * w64 + 2 * h2 * (lw + hw))
}

/// Per-layer counts for `config` run on an `[N, C, H, W]` input; counts scale
/// with `N`. An input no larger than the configured one is centre-padded to it,
/// as the data pipeline does; any other input replaces the configured shape.
pub fn model_madds(config: &ModelConfig, input: &[usize]) -> Result<MaddsReport> {
    let &[batch, c, h, w] = input else {
        return Err(Error::InvalidConfig(format!("input shape must be [N, C, H, W], got {input:?}")));
    };
    if batch == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let [c0, h0, w0] = config.input;
    let traced_input = if c == c0 && h <= h0 && w <= w0 { config.input } else { [c, h, w] };
    let cfg = ModelConfig {
        input: traced_input,
        ..config.clone()
    };
    let shapes = cfg.trace_shapes()?;
    let n = batch as u64;
    let mut layers = Vec::new();
    let mut quarter = 0u64;
    let mut banded_total = 0u64;
    for (i, spec) in cfg.expanded_layers()?.iter().enumerate() {
        let (inp, out) = (&shapes[i], &shapes[i + 1]);
        let (madds, wavelet, banded, kind) = match spec {
            LayerSpec::Conv {
                kernel,
                in_channels,
                out_channels,
                ..
            } => (
                (kernel * kernel * in_channels * out_channels * out[1] * out[2]) as u64,
                false,
                None,
                "conv".to_string(),
            ),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => ((in_features * out_features) as u64, false, None, "dense".to_string()),
            LayerSpec::Downsample { mode } => {
                let (ch, hi, wi) = (inp[0], inp[1], inp[2]);
                match mode {
                    DownsampleMode::StridedConv => ((9 * ch * ch * out[1] * out[2]) as u64, false, None, mode.to_string()),
                    DownsampleMode::MaxPool2 | DownsampleMode::AvgPool2 => (0, false, None, mode.to_string()),
                    DownsampleMode::DwtLL(wv) => {
                        let full = dwt2d_madds(hi, wi, ch)?;
                        quarter += full / 4;
                        let b = banded_dwt(wv, hi, wi, true)? * ch as u64;
                        (full, true, Some(b), mode.to_string())
                    }
                    DownsampleMode::DwtAvg(wv) | DownsampleMode::DwtCat(wv) => {
                        let full = dwt2d_madds(hi, wi, ch)?;
                        quarter += full;
                        let b = banded_dwt(wv, hi, wi, false)? * ch as u64;
                        (full, true, Some(b), mode.to_string())
                    }
                }
            }
            LayerSpec::BatchNorm { .. } => (0, false, None, "batch_norm".into()),
            LayerSpec::Relu => (0, false, None, "relu".into()),
            LayerSpec::Flatten => (0, false, None, "flatten".into()),
        };
        if let Some(b) = banded {
            banded_total += b * n;
        }
        layers.push(LayerMadds {
            index: i,
            kind,
            output_shape: out.clone(),
            madds: madds * n,
            wavelet,
            banded_madds: banded.map(|b| b * n),
        });
    }
    let wavelet_madds: u64 = layers.iter().filter(|l| l.wavelet).map(|l| l.madds).sum();
    let non_wavelet_madds: u64 = layers.iter().filter(|l| !l.wavelet).map(|l| l.madds).sum();
    let total_madds = wavelet_madds + non_wavelet_madds;
    Ok(MaddsReport {
        input: input.to_vec(),
        traced_input,
        layers,
        wavelet_madds,
        non_wavelet_madds,
        total_madds,
        ratio_percent: if total_madds == 0 {
            0.0
        } else {
            100.0 * wavelet_madds as f64 / total_madds as f64
        },
        wavelet_ll_quarter_madds: quarter * n,
        wavelet_banded_madds: banded_total,
    })
}
