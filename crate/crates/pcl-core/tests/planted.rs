//! End-to-end recovery checks on planted instances where the structural
//! function is known exactly.

use pcl_core::datagen::{gen_mastouri, linspace, ObservationSet};
use pcl_core::numkit::DenseMatrix;
use pcl_core::two_stage::{train_dfpv, DfpvArch, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

/// Unconfounded instance with the outcome proxy independent of everything
/// else. The bridge constraint then forces E_W[h(a, W)] = f(a), so the
/// structural readout through the mean proxy feature is identified and the
/// in-sample stage-2 fit targets it directly.
fn planted_data(
    m: usize,
    n: usize,
    noise_sd: f64,
    f: impl Fn(f64) -> f64,
    seed: u64,
) -> ObservationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent = Uniform::new(1.0, 2.0);
    let jitter = Normal::new(0.0, 0.02).unwrap();
    let noise = Normal::new(0.0, noise_sd).unwrap();
    let mut draw = |count: usize| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut a = Vec::with_capacity(count);
        let mut z = Vec::with_capacity(count);
        let mut w = Vec::with_capacity(count);
        let mut y = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = rng.sample(latent);
            a.push(u);
            z.push(u + jitter.sample(&mut rng));
            w.push(rng.sample(latent));
            y.push(f(u) + noise.sample(&mut rng));
        }
        (a, z, w, y)
    };
    let (a1, z1, w1, _) = draw(m);
    let (a2, z2, _, y2) = draw(n);
    let col = |v: Vec<f64>| DenseMatrix::from_vec(v.len(), 1, v).unwrap();
    ObservationSet::new(col(a1), col(z1), col(w1), col(a2), col(z2), y2).unwrap()
}

#[test]
fn constant_outcome_recovers_constant() {
    let data = planted_data(300, 300, 0.0, |_| 3.0, 11);
    let config = TrainConfig {
        lambda2: 1e-3,
        learning_rate: 0.003,
        outer_iterations: 120,
        stage2_steps: 10,
        ..TrainConfig::default()
    };
    let (model, _) = train_dfpv(&data, &DfpvArch::uniform(&[16, 8]), &config).unwrap();
    for a in linspace(1.2, 1.8, 5) {
        let f = model.predict_structural(&[a]).unwrap();
        assert!((f - 3.0).abs() <= 5e-2, "f({a}) = {f}, want 3");
    }
}

#[test]
fn planted_cubic_reaches_noise_floor() {
    let sigma = 0.05;
    let data = planted_data(400, 400, sigma, |u| 0.25 * u * u * u, 23);
    let config = TrainConfig {
        lambda1: 1e-4,
        lambda2: 1e-6,
        learning_rate: 0.01,
        outer_iterations: 60,
        stage2_steps: 10,
        ..TrainConfig::default()
    };
    let (model, report) = train_dfpv(&data, &DfpvArch::uniform(&[16, 8]), &config).unwrap();
    assert!(
        report.final_l2 <= 2.0 * sigma * sigma,
        "final stage-2 loss {} above noise floor {}",
        report.final_l2,
        sigma * sigma
    );
    let grid = linspace(1.1, 1.9, 9);
    let mse = grid
        .iter()
        .map(|&a| {
            let f = model.predict_structural(&[a]).unwrap();
            let t = 0.25 * a * a * a;
            (f - t) * (f - t)
        })
        .sum::<f64>()
        / grid.len() as f64;
    assert!(mse <= 1e-2, "structural grid MSE {mse}");
}

#[test]
fn training_is_deterministic() {
    let data = gen_mastouri(80, 80, 5).unwrap();
    let config = TrainConfig { outer_iterations: 5, ..TrainConfig::default() };
    let arch = DfpvArch::uniform(&[8, 4]);
    let (m1, r1) = train_dfpv(&data, &arch, &config).unwrap();
    let (m2, r2) = train_dfpv(&data, &arch, &config).unwrap();
    assert_eq!(m1.v().data(), m2.v().data());
    assert_eq!(m1.u(), m2.u());
    assert_eq!(m1.mu_w(), m2.mu_w());
    assert_eq!(r1.l2_trace, r2.l2_trace);
    assert_eq!(r1.outer_iterations_run, r2.outer_iterations_run);
}
