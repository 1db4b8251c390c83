//! Wavelet filter banks: Haar, Daubechies 2–6 and the symmetric Cohen
//! (CDF) biorthogonal family, with the alternating-flip rule that derives
//! high-pass filters from low-pass ones.
//!
//! All filters are stored zero-based and share one phase convention: row `k`
//! of the analysis operator reads `filter[j]` at sample `2k + j`. Synthesis
//! low-pass filters are stored in that same convention, so
//! `Σ_k analysis_low[k] · synthesis_low[k + 2m] = δ_m0` holds without shifts.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};

/// Identifiers accepted by [`get_wavelet`].
pub const WAVELET_NAMES: [&str; 10] = [
    "haar", "db2", "db3", "db4", "db5", "db6", "ch2.2", "ch3.3", "ch4.4", "ch5.5",
];

/// Tolerance used by [`validate_filterbank`].
pub const FILTER_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    Orthogonal,
    Biorthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveletSpec {
    pub name: String,
    pub family: Family,
    pub analysis_low: Vec<f64>,
    pub analysis_high: Vec<f64>,
    pub synthesis_low: Vec<f64>,
    pub synthesis_high: Vec<f64>,
    /// Index of the first nonzero analysis low-pass tap.
    pub support_offset: usize,
    pub symmetric: bool,
}

impl WaveletSpec {
    /// Builds an orthogonal spec; the synthesis filters equal the analysis ones.
    pub fn orthogonal(name: &str, low: Vec<f64>, symmetric: bool) -> Result<Self> {
        let high = derive_highpass(&low, reflection_index(&low))?;
        Ok(Self {
            name: name.to_string(),
            family: Family::Orthogonal,
            support_offset: first_nonzero(&low),
            synthesis_low: low.clone(),
            synthesis_high: high.clone(),
            analysis_low: low,
            analysis_high: high,
            symmetric,
        })
    }

    /// Builds a biorthogonal spec from a primal and a dual low-pass filter of
    /// equal length, both in the shared phase convention.
    pub fn biorthogonal(name: &str, low: Vec<f64>, dual_low: Vec<f64>, symmetric: bool) -> Result<Self> {
        if low.len() != dual_low.len() {
            return Err(Error::InvalidConfig(format!(
                "{name}: primal and dual filters differ in length ({} vs {})",
                low.len(),
                dual_low.len()
            )));
        }
        let (high, dual_high) = derive_biorthogonal_highpass(&low, &dual_low, reflection_index(&low))?;
        Ok(Self {
            name: name.to_string(),
            family: Family::Biorthogonal,
            support_offset: first_nonzero(&low),
            analysis_low: low,
            analysis_high: high,
            synthesis_low: dual_low,
            synthesis_high: dual_high,
            symmetric,
        })
    }

    pub fn len(&self) -> usize {
        self.analysis_low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.analysis_low.is_empty()
    }

    /// Width of the boundary band where truncated reconstruction is inexact.
    pub fn boundary_margin(&self) -> usize {
        2 * self.len()
    }
}

fn reflection_index(low: &[f64]) -> i64 {
    low.len() as i64 - 1
}

fn first_nonzero(v: &[f64]) -> usize {
    v.iter().position(|&c| c != 0.0).unwrap_or(0)
}

/// `h[k] = (-1)^k · low[n_odd - k]` for `k` in `0..low.len()`; taps outside the
/// stored support read as zero.
pub fn derive_highpass(low: &[f64], n_odd: i64) -> Result<Vec<f64>> {
    if n_odd.rem_euclid(2) == 0 {
        return Err(Error::EvenN(n_odd));
    }
    Ok((0..low.len())
        .map(|k| {
            let idx = n_odd - k as i64;
            let tap = usize::try_from(idx)
                .ok()
                .and_then(|i| low.get(i).copied())
                .unwrap_or(0.0);
            if k % 2 == 0 {
                tap
            } else {
                -tap
            }
        })
        .collect())
}

/// Returns `(analysis_high, synthesis_high)`: the analysis high-pass reflects
/// the dual low-pass, the synthesis high-pass reflects the primal one.
pub fn derive_biorthogonal_highpass(low: &[f64], dual_low: &[f64], n_odd: i64) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((derive_highpass(dual_low, n_odd)?, derive_highpass(low, n_odd)?))
}

pub fn get_wavelet(name: &str) -> Result<WaveletSpec> {
    let r2 = SQRT_2;
    let s3 = 3f64.sqrt();
    match name {
        "haar" => WaveletSpec::orthogonal("haar", vec![std::f64::consts::FRAC_1_SQRT_2; 2], true),
        "db2" => {
            let f = 1.0 / (4.0 * r2);
            WaveletSpec::orthogonal("db2", vec![(1.0 + s3) * f, (3.0 + s3) * f, (3.0 - s3) * f, (1.0 - s3) * f], false)
        }
        "db3" => WaveletSpec::orthogonal("db3", DB3.to_vec(), false),
        "db4" => WaveletSpec::orthogonal("db4", DB4.to_vec(), false),
        "db5" => WaveletSpec::orthogonal("db5", DB5.to_vec(), false),
        "db6" => WaveletSpec::orthogonal("db6", DB6.to_vec(), false),
        "ch2.2" => {
            let a = r2 / 4.0;
            let low = vec![0.0, a, 2.0 * a, a, 0.0, 0.0];
            let b = r2 / 8.0;
            let dual = vec![0.0, -b, 2.0 * b, 6.0 * b, 2.0 * b, -b];
            WaveletSpec::biorthogonal("ch2.2", low, dual_phase(&dual), true)
        }
        "ch3.3" => {
            let a = r2 / 8.0;
            let low = vec![0.0, 0.0, a, 3.0 * a, 3.0 * a, a, 0.0, 0.0];
            let b = r2 / 64.0;
            let dual = vec![3.0 * b, -9.0 * b, -7.0 * b, 45.0 * b, 45.0 * b, -7.0 * b, -9.0 * b, 3.0 * b];
            WaveletSpec::biorthogonal("ch3.3", low, dual_phase(&dual), true)
        }
        "ch4.4" => WaveletSpec::biorthogonal("ch4.4", CH44_LOW.to_vec(), dual_phase(&CH44_DUAL), true),
        "ch5.5" => WaveletSpec::biorthogonal("ch5.5", CH55_LOW.to_vec(), dual_phase(&CH55_DUAL), true),
        other => Err(Error::UnknownWavelet(other.to_string())),
    }
}

/// The dual columns of the Cohen table are listed in convolution order;
/// reading them backwards puts them in the analysis phase convention.
fn dual_phase(table_column: &[f64]) -> Vec<f64> {
    table_column.iter().rev().copied().collect()
}

const DB3: [f64; 6] = [
    0.332670552950,
    0.806891509311,
    0.459877502118,
    -0.135011020010,
    -0.085441273882,
    0.035226291886,
];

const DB4: [f64; 8] = [
    0.230377813309,
    0.714846570553,
    0.630880767930,
    -0.027983769417,
    -0.187034811719,
    0.030841381836,
    0.032883011667,
    -0.010597401785,
];

const DB5: [f64; 10] = [
    0.160102397974,
    0.603829269797,
    0.724308528438,
    0.138428145901,
    -0.242294887066,
    -0.032244869585,
    0.077571493840,
    -0.006241490213,
    -0.012580751999,
    0.003335725285,
];

const DB6: [f64; 12] = [
    0.111540743350,
    0.494623890398,
    0.751133908021,
    0.315250351709,
    -0.226264693965,
    -0.129766867567,
    0.097501605587,
    0.027522865530,
    -0.031582039317,
    0.000553842201,
    0.004777257511,
    -0.001077301085,
];

// Cohen (4,4) and (5,5) carry irrational taps; the table prints eight
// decimals, which is not enough for the 1e-8 identities, so full double
// precision values are kept here (they round to the table entries).
const CH44_LOW: [f64; 10] = [
    0.0,
    -0.06453888262869706,
    -0.04068941760916406,
    0.41809227322161724,
    0.7884856164055829,
    0.41809227322161724,
    -0.04068941760916406,
    -0.06453888262869706,
    0.0,
    0.0,
];

const CH44_DUAL: [f64; 10] = [
    0.0,
    0.03782845550726404,
    -0.023849465019556843,
    -0.11062440441843718,
    0.37740285561283066,
    0.8526986790088938,
    0.37740285561283066,
    -0.11062440441843718,
    -0.023849465019556843,
    0.03782845550726404,
];

const CH55_LOW: [f64; 12] = [
    0.013456709459118716,
    -0.002694966880111507,
    -0.13670658466432914,
    -0.09350469740093886,
    0.47680326579848425,
    0.8995061097486484,
    0.47680326579848425,
    -0.09350469740093886,
    -0.13670658466432914,
    -0.002694966880111507,
    0.013456709459118716,
    0.0,
];

const CH55_DUAL: [f64; 12] = [
    0.0,
    0.0,
    0.03968708834740544,
    0.007948108637240322,
    -0.05446378846823691,
    0.34560528195603346,
    0.7366601814282105,
    0.34560528195603346,
    -0.05446378846823691,
    0.007948108637240322,
    0.03968708834740544,
    0.0,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub wavelet: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    fn push(&mut self, name: impl Into<String>, residual: f64) {
        self.checks.push(Check {
            name: name.into(),
            passed: residual.is_finite() && residual <= FILTER_TOLERANCE,
            residual,
        });
    }
}

/// `Σ_k a[k] · b[k + 2m]` with out-of-range taps read as zero.
pub fn shifted_inner(a: &[f64], b: &[f64], m: i64) -> f64 {
    a.iter()
        .enumerate()
        .filter_map(|(k, &ak)| {
            let j = k as i64 + 2 * m;
            usize::try_from(j).ok().and_then(|j| b.get(j)).map(|&bj| ak * bj)
        })
        .sum()
}

fn max_shift(a: &[f64], b: &[f64]) -> i64 {
    (a.len().max(b.len()) as i64 + 1) / 2
}

/// Residual of the best symmetric or antisymmetric fit around any centre of
/// the nonzero support.
fn symmetry_residual(v: &[f64]) -> f64 {
    let first = v.iter().position(|&c| c != 0.0);
    let last = v.iter().rposition(|&c| c != 0.0);
    let (Some(first), Some(last)) = (first, last) else {
        return 0.0;
    };
    let support = &v[first..=last];
    let sym = support
        .iter()
        .zip(support.iter().rev())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let anti = support
        .iter()
        .zip(support.iter().rev())
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    sym.min(anti)
}

/// Evaluates the filter-bank identities; failures are reported, never raised.
pub fn validate_filterbank(spec: &WaveletSpec) -> ValidationReport {
    let mut report = ValidationReport {
        wavelet: spec.name.clone(),
        checks: Vec::new(),
    };
    let l = &spec.analysis_low;
    let h = &spec.analysis_high;
    let ls = &spec.synthesis_low;
    let hs = &spec.synthesis_high;

    report.push("sum_rule", (l.iter().sum::<f64>() - SQRT_2).abs());
    report.push("highpass_zero_mean", h.iter().sum::<f64>().abs());

    match spec.family {
        Family::Orthogonal => {
            report.push("norm_rule", (l.iter().map(|c| c * c).sum::<f64>() - 1.0).abs());
            report.push("even_length", if l.len().is_multiple_of(2) { 0.0 } else { f64::INFINITY });
            let mut shift_res: f64 = 0.0;
            for m in 1..=max_shift(l, l) {
                shift_res = shift_res.max(shifted_inner(l, l, m).abs());
            }
            report.push("shift_orthogonality", shift_res);
            let same = l
                .iter()
                .zip(ls)
                .chain(h.iter().zip(hs))
                .map(|(a, b)| (a - b).abs())
                .fold(if l.len() == ls.len() && h.len() == hs.len() { 0.0 } else { f64::INFINITY }, f64::max);
            report.push("synthesis_equals_analysis", same);
        }
        Family::Biorthogonal => {
            report.push("dual_sum_rule", (ls.iter().sum::<f64>() - SQRT_2).abs());
            let span = max_shift(l, ls);
            let mut bi: f64 = 0.0;
            for m in -span..=span {
                let target = if m == 0 { 1.0 } else { 0.0 };
                bi = bi.max((shifted_inner(l, ls, m) - target).abs());
            }
            report.push("biorthogonality", bi);
        }
    }

    // Cross terms of the perfect-reconstruction conditions.
    let span = max_shift(l, hs).max(max_shift(h, ls));
    let mut cross: f64 = 0.0;
    for m in -span..=span {
        cross = cross.max(shifted_inner(l, hs, m).abs());
        cross = cross.max(shifted_inner(h, ls, m).abs());
    }
    report.push("highpass_cross_orthogonality", cross);

    let asym = symmetry_residual(l).max(symmetry_residual(h));
    if spec.symmetric {
        report.push("symmetry", asym);
    } else {
        // Non-symmetric filters must actually be asymmetric.
        report.push("asymmetry", if asym > FILTER_TOLERANCE { 0.0 } else { f64::INFINITY });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn haar_filters() {
        let w = get_wavelet("haar").unwrap();
        assert_eq!(w.analysis_low, vec![A, A]);
        assert_eq!(w.analysis_high, vec![A, -A]);
        assert_eq!(w.synthesis_low, w.analysis_low);
        assert!(w.symmetric);
    }

    #[test]
    fn db2_matches_closed_form() {
        let w = get_wavelet("db2").unwrap();
        let expect = [0.48296, 0.83652, 0.22414, -0.12941];
        for (a, b) in w.analysis_low.iter().zip(expect) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert!(!w.symmetric);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn cohen_2_2_columns() {
        let w = get_wavelet("ch2.2").unwrap();
        let l = [0.0, 0.35355339, 0.70710678, 0.35355339, 0.0, 0.0];
        for (a, b) in w.analysis_low.iter().zip(l) {
            assert!((a - b).abs() < 5e-9);
        }
        // Table column (convolution order) read back to front.
        let table = [0.0, -0.17677670, 0.35355339, 1.06066017, 0.35355339, -0.17677670];
        for (a, b) in w.synthesis_low.iter().zip(table.iter().rev()) {
            assert!((a - b).abs() < 5e-9);
        }
        assert_eq!(w.support_offset, 1);
    }

    #[test]
    fn full_precision_cohen_rounds_to_table() {
        let w = get_wavelet("ch4.4").unwrap();
        let table_l = [0.0, -0.06453888, -0.04068942, 0.41809227, 0.78848562];
        for (a, b) in w.analysis_low.iter().zip(table_l) {
            assert!((a - b).abs() <= 5e-9);
        }
        let w = get_wavelet("ch5.5").unwrap();
        let table_dual = [0.0, 0.0, 0.03968709, 0.00794811, -0.05446379, 0.34560528, 0.73666018];
        for (a, b) in w.synthesis_low.iter().rev().zip(table_dual) {
            assert!((a - b).abs() <= 5e-9);
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(get_wavelet("db7"), Err(Error::UnknownWavelet(n)) if n == "db7"));
    }

    #[test]
    fn highpass_examples() {
        assert_eq!(derive_highpass(&[A, A], 1).unwrap(), vec![A, -A]);
        assert_eq!(derive_highpass(&[1.0, 0.0, 0.0, 0.0], 3).unwrap(), vec![0.0, 0.0, 0.0, -1.0]);
        let db2 = get_wavelet("db2").unwrap();
        let h = derive_highpass(&db2.analysis_low, 3).unwrap();
        let l = &db2.analysis_low;
        assert_eq!(h, vec![l[3], -l[2], l[1], -l[0]]);
        assert!((h[0] + 0.12941).abs() < 1e-5 && (h[3] + 0.48296).abs() < 1e-5);
        assert!(matches!(derive_highpass(l, 2), Err(Error::EvenN(2))));
    }

    #[test]
    fn biorthogonal_highpass_examples() {
        let w = get_wavelet("ch2.2").unwrap();
        let (h, hs) = derive_biorthogonal_highpass(&w.analysis_low, &w.synthesis_low, 5).unwrap();
        for k in 0..6 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(h[k], sign * w.synthesis_low[5 - k]);
            assert_eq!(hs[k], sign * w.analysis_low[5 - k]);
        }
        let (h, hs) = derive_biorthogonal_highpass(&[A, A], &[A, A], 1).unwrap();
        assert_eq!(h, vec![A, -A]);
        assert_eq!(hs, vec![A, -A]);
        let (h, _) = derive_biorthogonal_highpass(&w.analysis_low, &[0.0; 6], 5).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(derive_biorthogonal_highpass(&[A, A], &[A, A], 0).is_err());
    }

    #[test]
    fn validation_examples() {
        let haar = validate_filterbank(&get_wavelet("haar").unwrap());
        assert!(haar.all_passed());
        assert!(haar.max_residual() < 1e-12);

        let db3 = validate_filterbank(&get_wavelet("db3").unwrap());
        assert!(db3.check("sum_rule").unwrap().residual < 1e-8);

        let mut bad = get_wavelet("db3").unwrap();
        bad.analysis_low[0] += 0.1;
        let r = validate_filterbank(&bad);
        assert!(!r.check("sum_rule").unwrap().passed);
        assert!(!r.all_passed());
    }

    #[test]
    fn registry_round_trip_and_validity() {
        for name in WAVELET_NAMES {
            let w = get_wavelet(name).unwrap();
            assert_eq!(w.name, name);
            let report = validate_filterbank(&w);
            assert!(report.all_passed(), "{name}: {report:?}");
            assert_eq!(w.symmetric, name == "haar" || name.starts_with("ch"));
        }
    }

    #[test]
    fn double_reflection_restores_lowpass() {
        for name in WAVELET_NAMES {
            let w = get_wavelet(name).unwrap();
            let n = w.len() as i64 - 1;
            let back = derive_highpass(&derive_highpass(&w.analysis_low, n).unwrap(), n).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            for (a, b) in back.iter().zip(&w.analysis_low) {
                assert_eq!(*a, sign * b);
            }
        }
    }
}
