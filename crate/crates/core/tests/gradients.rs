mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wavecnet::nn::{gradcheck_layer, gradcheck_model, BatchNorm2d, Conv2d, Dense, Downsample, DownsampleMode, Flatten, GradcheckConfig, Layer, Model, ModelConfig, Relu};
use wavecnet::transform::{dwt1d, dwt1d_vjp, dwt2d, dwt2d_vjp, idwt1d, idwt1d_vjp, idwt2d, idwt2d_vjp, Decomposition2D};
use wavecnet::{get_wavelet, Matrix, Tensor, WAVELET_NAMES};

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-6;

/// Max-norm relative error between two gradient vectors.
fn rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Central differences of `x ↦ f(x)` at every coordinate of `x`.
fn numeric_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + STEP;
            let plus = f(&x);
            x[i] = orig - STEP;
            let minus = f(&x);
            x[i] = orig;
            (plus - minus) / (2.0 * STEP)
        })
        .collect()
}

fn decomposition(shape: (usize, usize), seed: u64) -> Decomposition2D<f64> {
    let mut d = Decomposition2D::zeros(shape);
    for (i, b) in d.subbands_mut().into_iter().enumerate() {
        *b = random_matrix(shape.0 / 2, shape.1 / 2, seed + i as u64);
    }
    d
}

fn flatten(d: &Decomposition2D<f64>) -> Vec<f64> {
    d.subbands().into_iter().flat_map(|b| b.data().to_vec()).collect()
}

#[test]
fn transform_vjps_match_differences() {
    for name in WAVELET_NAMES {
        let w = get_wavelet(name).unwrap();
        let n = 14;
        let (ul, uh) = (random_vec(n / 2, 1), random_vec(n / 2, 2));
        let x = random_vec(n, 3);
        let analytic = dwt1d_vjp(&ul, &uh, &w, n).unwrap();
        let numeric = numeric_gradient(&x, |x| {
            let (lo, hi) = dwt1d(x, &w).unwrap();
            dot(&lo, &ul) + dot(&hi, &uh)
        });
        assert!(rel(&analytic, &numeric) < TOL, "{name} dwt1d");

        let u = random_vec(n, 4);
        let (gl, gh) = idwt1d_vjp(&u, &w).unwrap();
        let coeffs: Vec<f64> = random_vec(n, 5);
        let numeric = numeric_gradient(&coeffs, |c| dot(&idwt1d(&c[..n / 2], &c[n / 2..], &w, n).unwrap(), &u));
        assert!(rel(&[gl, gh].concat(), &numeric) < TOL, "{name} idwt1d");

        let (m, k) = (10, 12);
        let up = decomposition((m, k), 6);
        let x = random_matrix(m, k, 7);
        let analytic = dwt2d_vjp(&up, &w).unwrap();
        let numeric = numeric_gradient(x.data(), |v| {
            let d = dwt2d(&Matrix::from_vec(m, k, v.to_vec()).unwrap(), &w).unwrap();
            dot(&flatten(&d), &flatten(&up))
        });
        assert!(rel(analytic.data(), &numeric) < TOL, "{name} dwt2d");

        let u = random_matrix(m, k, 8);
        let analytic = idwt2d_vjp(&u, &w).unwrap();
        let d0 = decomposition((m, k), 9);
        let numeric = numeric_gradient(&flatten(&d0), |v| {
            let q = v.len() / 4;
            let mut d = Decomposition2D::zeros((m, k));
            for (i, b) in d.subbands_mut().into_iter().enumerate() {
                *b = Matrix::from_vec(m / 2, k / 2, v[i * q..(i + 1) * q].to_vec()).unwrap();
            }
            dot(idwt2d(&d, &w).unwrap().data(), u.data())
        });
        assert!(rel(&flatten(&analytic), &numeric) < TOL, "{name} idwt2d");
    }
}

fn check(layer: &mut dyn Layer<f64>, x: &Tensor<f64>, what: &str) {
    let r = gradcheck_layer(layer, x, &GradcheckConfig::default()).unwrap();
    assert!(r.max_error() < TOL, "{what}: {r:?}");
}

#[test]
fn every_layer_type_passes_gradcheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_tensor(&[2, 3, 6, 6], 11);
    check(&mut Conv2d::new(3, 4, 3, 1, &mut rng), &x, "conv");
    check(&mut Conv2d::new(3, 2, 3, 2, &mut rng), &x, "strided conv");
    check(&mut BatchNorm2d::new(3), &x, "batch norm");
    check(&mut Relu::new(), &x, "relu");
    check(&mut Flatten::new(), &x, "flatten");
    check(&mut Dense::new(12, 5, &mut rng), &random_tensor(&[3, 12], 12), "dense");
    for mode in ["max_pool2", "avg_pool2", "strided_conv"] {
        check(&mut Downsample::new(mode.parse().unwrap(), 3, &mut rng).unwrap(), &x, mode);
    }
}

#[test]
fn wavelet_downsampling_passes_gradcheck_for_all_wavelets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_tensor(&[2, 2, 8, 10], 13);
    for name in WAVELET_NAMES {
        for kind in ["dwt_ll", "dwt_avg", "dwt_cat"] {
            let mode: DownsampleMode = format!("{kind}:{name}").parse().unwrap();
            check(&mut Downsample::new(mode, 2, &mut rng).unwrap(), &x, &format!("{kind}:{name}"));
        }
    }
}

#[test]
fn whole_model_gradcheck() {
    for mode in ["dwt_ll:db2", "dwt_cat:haar", "max_pool2"] {
        let cfg = ModelConfig::wavecnet_mini(8, 3, mode.parse().unwrap(), 4);
        let mut model = Model::<f64>::build(&cfg).unwrap();
        let x = random_tensor(&[3, 1, 8, 8], 14);
        let cfg = GradcheckConfig {
            max_coords: Some(40),
            ..GradcheckConfig::default()
        };
        let r = gradcheck_model(&mut model, &x, &[0, 1, 2], &cfg).unwrap();
        assert!(r.max_error() < TOL, "{mode}: {r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dwt_and_its_vjp_are_adjoint(idx in 0usize..10, m in 2usize..24, n in 2usize..24, seed in any::<u64>()) {
        let w = get_wavelet(WAVELET_NAMES[idx]).unwrap();
        let x = random_matrix(m, n, seed);
        let up = decomposition((m, n), seed ^ 0x55);
        let lhs = dot(&flatten(&dwt2d(&x, &w).unwrap()), &flatten(&up));
        let rhs = dot(x.data(), dwt2d_vjp(&up, &w).unwrap().data());
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn idwt_and_its_vjp_are_adjoint(idx in 0usize..10, m in 2usize..24, n in 2usize..24, seed in any::<u64>()) {
        let w = get_wavelet(WAVELET_NAMES[idx]).unwrap();
        let d = decomposition((m, n), seed);
        let u = random_matrix(m, n, seed ^ 0xaa);
        let lhs = dot(idwt2d(&d, &w).unwrap().data(), u.data());
        let rhs = dot(&flatten(&d), &flatten(&idwt2d_vjp(&u, &w).unwrap()));
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }
}
