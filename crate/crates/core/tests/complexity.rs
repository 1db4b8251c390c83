mod common;

use common::dense_operator;
use wavecnet::complexity::{dwt2d_madds, idwt2d_madds, model_madds};
use wavecnet::nn::{DownsampleMode, LayerSpec, ModelConfig};

/// Counts every scalar multiply and add while actually forming the product.
fn counted_product(a: &[Vec<f64>], b: &[Vec<f64>], ops: &mut u64) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = a[i][0] * b[0][j];
            *ops += 1;
            for p in 1..k {
                acc += a[i][p] * b[p][j];
                *ops += 2;
            }
            out[i][j] = acc;
        }
    }
    out
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Dense `(A·X)·Bᵀ` for all four subbands of every channel.
fn dense_dwt_count(m: usize, n: usize, c: usize) -> u64 {
    let taps = [[0.5, 0.5], [0.5, -0.5]];
    let x = vec![vec![1.0; n]; m];
    let mut ops = 0;
    for _ in 0..c {
        for row in &taps {
            for col in &taps {
                let a = dense_operator(row, m);
                let b = dense_operator(col, n);
                let ax = counted_product(&a, &x, &mut ops);
                counted_product(&ax, &transpose(&b), &mut ops);
            }
        }
    }
    ops
}

#[test]
fn formulas_match_the_counting_oracle() {
    for m in [2, 4, 6, 8] {
        for n in [2, 4, 6, 8] {
            for c in [1, 2] {
                assert_eq!(dwt2d_madds(m, n, c).unwrap(), dense_dwt_count(m, n, c), "dwt {m}x{n}x{c}");
                assert_eq!(idwt2d_madds(m, n, c).unwrap(), dense_dwt_count(n, m, c) + 3, "idwt {m}x{n}x{c}");
            }
        }
    }
}

#[test]
fn linear_in_channels_and_monotone() {
    for (m, n) in [(2, 2), (6, 10), (32, 16)] {
        assert_eq!(dwt2d_madds(m, n, 6).unwrap(), 2 * dwt2d_madds(m, n, 3).unwrap());
        assert!(dwt2d_madds(m + 2, n, 1).unwrap() > dwt2d_madds(m, n, 1).unwrap());
        assert!(dwt2d_madds(m, n + 2, 1).unwrap() > dwt2d_madds(m, n, 1).unwrap());
        assert!(idwt2d_madds(m + 2, n, 1).unwrap() > idwt2d_madds(m, n, 1).unwrap());
    }
    for s in [2, 8, 20] {
        assert_eq!(idwt2d_madds(s, s, 2).unwrap() - 3, dwt2d_madds(s, s, 2).unwrap());
    }
}

#[test]
fn mini_network_wavelet_subtotal() {
    let cfg = ModelConfig::wavecnet_mini(ModelConfig::MINI_SIDE, 10, DownsampleMode::DwtLL("haar".into()), 0);
    let report = model_madds(&cfg, &[1, 1, 28, 28]).unwrap();
    let shapes = cfg.trace_shapes().unwrap();
    let expected: u64 = cfg
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, LayerSpec::Downsample { .. }))
        .map(|(i, _)| dwt2d_madds(shapes[i][1], shapes[i][2], shapes[i][0]).unwrap())
        .sum();
    assert_eq!(report.wavelet_madds, expected);
    assert_eq!(report.wavelet_madds + report.non_wavelet_madds, report.total_madds);
    let ratio = 100.0 * report.wavelet_madds as f64 / report.total_madds as f64;
    assert_eq!(report.ratio_percent, ratio);
    assert!(report.wavelet_banded_madds < report.wavelet_madds);
    let batch = model_madds(&cfg, &[4, 1, 28, 28]).unwrap();
    assert_eq!(batch.total_madds, 4 * report.total_madds);
    assert!(model_madds(&cfg, &[1, 1, 30, 30]).unwrap().total_madds == report.total_madds);
    assert!(model_madds(&cfg, &[1, 1, 36, 36]).is_err());
}
