use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wavecnet::denoise::{denoise_plane, soft_shrink, DenoiseConfig};
use wavecnet::{Error, Matrix};

fn reference_shrink(x: f64, l: f64) -> f64 {
    x.signum() * (x.abs() - l).max(0.0)
}

#[test]
fn soft_shrink_on_a_grid() {
    for l in [0.0, 0.05, 0.3, 1.0] {
        for i in 0..1000 {
            let x = -2.0 + 4.0 * i as f64 / 999.0;
            let got = soft_shrink(x, l).unwrap();
            assert!((got - reference_shrink(x, l)).abs() <= 1e-15, "x={x} l={l}");
            assert!(got.abs() <= x.abs());
        }
    }
    assert!(matches!(soft_shrink(1.0, -0.1), Err(Error::NegativeLambda(_))));
    assert!(soft_shrink(1.0f64, f64::NAN).is_err());
}

fn scene(side: usize) -> Matrix<f64> {
    let c = side as f64 / 2.0;
    Matrix::from_fn(side, side, |i, j| {
        let (y, x) = (i as f64, j as f64);
        let disc = if (y - c).powi(2) + (x - c * 0.8).powi(2) < (side as f64 / 4.0).powi(2) { 0.4 } else { 0.0 };
        let bar = if (40..48).contains(&j) && i > 8 { 0.25 } else { 0.0 };
        0.1 + 0.3 * x / side as f64 + disc + bar
    })
}

fn mse(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data().len() as f64
}

#[test]
fn shrinkage_reduces_noise() {
    let clean = scene(64);
    let normal = Normal::new(0.0, 0.1).unwrap();
    let cfg = DenoiseConfig::new("haar", 0.1).unwrap();
    let mut wins = 0;
    for trial in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut noisy = clean.clone();
        noisy.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        let out = denoise_plane(&noisy, &cfg).unwrap();
        if mse(&out, &clean) < mse(&noisy, &clean) {
            wins += 1;
        }
    }
    assert!(wins >= 9, "{wins}/10");
}

#[test]
fn zero_lambda_is_reconstruction() {
    let img = scene(32);
    for w in ["haar", "db2", "ch2.2"] {
        let out = denoise_plane(&img, &DenoiseConfig::new(w, 0.0).unwrap()).unwrap();
        if w == "haar" {
            assert!(out.max_abs_diff(&img) < 1e-12);
        }
        assert_eq!(out.shape(), img.shape());
    }
    assert!(DenoiseConfig::new("db3", -1.0).is_err());
    assert!(DenoiseConfig::new("nope", 0.1).is_err());
}
