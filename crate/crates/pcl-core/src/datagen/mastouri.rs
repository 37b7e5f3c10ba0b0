//! Low-dimensional synthetic benchmark with a two-part latent confounder
//! and a closed-form structural function.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Uniform};

use crate::datagen::types::{linspace, GroundTruth, NoiseConvention, ObservationSet};
use crate::error::{invalid, Result};
use crate::numkit::DenseMatrix;
use crate::rng::stream_rng;

const STREAM_RECORDS: u64 = 0x00;
const STREAM_STAGE1: u64 = 0x01;
const STREAM_STAGE2: u64 = 0x02;
const STREAM_TRUTH: u64 = 0x10;

fn gauss(scale: f64, convention: NoiseConvention) -> Normal<f64> {
    let sd = match convention {
        NoiseConvention::Variance => libm::sqrt(scale),
        NoiseConvention::StdDev => scale,
    };
    Normal::new(0.0, sd).unwrap()
}

/// One draw from the joint law with the latent confounder exposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MastouriRecord {
    /// Unif[0, 1] minus one when the confounder falls in [0, 1].
    pub u1: f64,
    /// Latent confounder, Unif[−1, 2].
    pub u2: f64,
    pub z1: f64,
    pub z2: f64,
    pub w1: f64,
    pub w2: f64,
    pub a: f64,
    pub y: f64,
}

fn outcome(u1: f64, u2: f64, a: f64) -> f64 {
    u2 * libm::cos(2.0 * (a + 0.3 * u1 + 0.2))
}

fn draw_records(rng: &mut ChaCha8Rng, n: usize, convention: NoiseConvention) -> Vec<MastouriRecord> {
    let unif_u2 = Uniform::new(-1.0f64, 2.0);
    let unif_01 = Uniform::new(0.0f64, 1.0);
    let unif_sym = Uniform::new(-1.0f64, 1.0);
    let noise_wide = gauss(3.0, convention);
    let noise_a = gauss(0.05, convention);
    (0..n)
        .map(|_| {
            let u2: f64 = rng.sample(unif_u2);
            let u1_raw: f64 = rng.sample(unif_01);
            let u1 = u1_raw - if (0.0..=1.0).contains(&u2) { 1.0 } else { 0.0 };
            let z1 = u1 + rng.sample(unif_sym);
            let z2 = u2 + rng.sample::<f64, _>(noise_wide);
            let w1 = u1 + rng.sample::<f64, _>(noise_wide);
            let w2 = u2 + rng.sample(unif_sym);
            let a = u2 + rng.sample::<f64, _>(noise_a);
            let y = outcome(u1, u2, a);
            MastouriRecord { u1, u2, z1, z2, w1, w2, a, y }
        })
        .collect()
}

/// Raw draws with latents exposed for distributional checks.
pub fn gen_mastouri_records(n: usize, seed: u64) -> Vec<MastouriRecord> {
    draw_records(&mut stream_rng(seed, STREAM_RECORDS), n, NoiseConvention::default())
}

/// Independent stage-1 and stage-2 draws under the default variance
/// reading of the Gaussian noise scales.
pub fn gen_mastouri(n_stage1: usize, n_stage2: usize, seed: u64) -> Result<ObservationSet> {
    gen_mastouri_with(n_stage1, n_stage2, seed, NoiseConvention::default())
}

/// As [`gen_mastouri`] with an explicit noise-scale convention.
pub fn gen_mastouri_with(
    n_stage1: usize,
    n_stage2: usize,
    seed: u64,
    convention: NoiseConvention,
) -> Result<ObservationSet> {
    if n_stage1 == 0 || n_stage2 == 0 {
        return Err(invalid("both stage counts must be at least 1"));
    }
    let stage1 = draw_records(&mut stream_rng(seed, STREAM_STAGE1), n_stage1, convention);
    let stage2 = draw_records(&mut stream_rng(seed, STREAM_STAGE2), n_stage2, convention);
    let pack = |records: &[MastouriRecord]| {
        let a: Vec<f64> = records.iter().map(|r| r.a).collect();
        let z: Vec<f64> = records.iter().flat_map(|r| [r.z1, r.z2]).collect();
        let w: Vec<f64> = records.iter().flat_map(|r| [r.w1, r.w2]).collect();
        let y: Vec<f64> = records.iter().map(|r| r.y).collect();
        (a, z, w, y)
    };
    let (a1, z1, w1, y1) = pack(&stage1);
    let (a2, z2, w2, y2) = pack(&stage2);
    let m = stage1.len();
    let n = stage2.len();
    ObservationSet::new(
        DenseMatrix::from_vec(m, 1, a1)?,
        DenseMatrix::from_vec(m, 2, z1)?,
        DenseMatrix::from_vec(m, 2, w1)?,
        DenseMatrix::from_vec(n, 1, a2)?,
        DenseMatrix::from_vec(n, 2, z2)?,
        y2,
    )?
    .with_stage1_y(y1)?
    .with_stage2_w(DenseMatrix::from_vec(n, 2, w2)?)
}

/// Twenty evenly spaced treatments over [0, 1].
pub fn mastouri_grid() -> Vec<f64> {
    linspace(0.0, 1.0, 20)
}

/// Mean of cos(2a + 0.6 U + 0.4) for U ~ Unif[c, c+1].
fn cos_segment_mean(a: f64, c: f64) -> f64 {
    (libm::sin(2.0 * a + 0.6 * (c + 1.0) + 0.4) - libm::sin(2.0 * a + 0.6 * c + 0.4)) / 0.6
}

/// Closed-form structural function: conditioning on whether the U[−1, 2]
/// confounder falls in [0, 1] splits the mixture into U₁ ~ Unif[−1, 0]
/// with outcome-branch weight E[U₂; U₂∈[0,1]] = 1/6 and U₁ ~ Unif[0, 1]
/// with weight E[U₂; U₂∉[0,1]] = 1/3.
pub fn mastouri_structural(a: f64) -> f64 {
    cos_segment_mean(a, -1.0) / 6.0 + cos_segment_mean(a, 0.0) / 3.0
}

/// Closed-form truth on the standard grid (no Monte-Carlo error).
pub fn mastouri_truth() -> Result<GroundTruth> {
    let grid = mastouri_grid();
    let values: Vec<f64> = grid.iter().map(|&a| mastouri_structural(a)).collect();
    let zeros = alloc::vec![0.0; grid.len()];
    GroundTruth::new(DenseMatrix::from_vec(grid.len(), 1, grid)?, values, zeros, 0)
}

/// Monte-Carlo oracle for the structural function on the standard grid,
/// used to gate the closed form before benchmarks rely on it.
pub fn mastouri_truth_mc(n_mc: usize, seed: u64) -> Result<GroundTruth> {
    if n_mc < 10_000 {
        return Err(invalid("structural truth needs at least 1e4 draws"));
    }
    let grid = mastouri_grid();
    let mut rng = stream_rng(seed, STREAM_TRUTH);
    let unif_u2 = Uniform::new(-1.0f64, 2.0);
    let unif_01 = Uniform::new(0.0f64, 1.0);
    let mut u1s = Vec::with_capacity(n_mc);
    let mut u2s = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let u2: f64 = rng.sample(unif_u2);
        let u1_raw: f64 = rng.sample(unif_01);
        u1s.push(u1_raw - if (0.0..=1.0).contains(&u2) { 1.0 } else { 0.0 });
        u2s.push(u2);
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for &a in &grid {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for (&u1, &u2) in u1s.iter().zip(&u2s) {
            let f = outcome(u1, u2, a);
            sum += f;
            sumsq += f * f;
        }
        let nf = n_mc as f64;
        let mean = sum / nf;
        let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        values.push(mean);
        stderr.push(libm::sqrt(var / nf));
    }
    GroundTruth::new(DenseMatrix::from_vec(grid.len(), 1, grid)?, values, stderr, n_mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::mean_and_stderr;

    #[test]
    fn sample_moments_match_construction() {
        let data = gen_mastouri(4000, 4000, 17).unwrap();
        let a: Vec<f64> = (0..data.m()).map(|i| data.stage1_a().get(i, 0)).collect();
        let (mean, se) = mean_and_stderr(&a);
        assert!((mean - 0.5).abs() < 4.0 * se, "A mean {mean} vs se {se}");
        for &y in data.stage2_y() {
            assert!(y.abs() <= 2.0);
        }
    }

    #[test]
    fn negative_u1_frequency_is_one_third() {
        // U₁ < 0 iff the confounder fell in [0, 1]; check via a large draw
        // of W₂ − ... not observable, so use the latent construction through
        // records drawn directly
        let records = gen_mastouri_records(30_000, 77);
        let frac = records.iter().filter(|r| r.u1 < 0.0).count() as f64 / records.len() as f64;
        let se = (frac * (1.0 - frac) / records.len() as f64).sqrt();
        assert!((frac - 1.0 / 3.0).abs() < 4.0 * se.max(1e-3), "P(U1<0) = {frac}");
        for r in &records {
            assert!((-1.0..=1.0).contains(&r.u1));
            assert!((-1.0..=2.0).contains(&r.u2));
            assert!(r.z1.is_finite() && r.z2.is_finite() && r.w1.is_finite() && r.w2.is_finite());
        }
    }

    #[test]
    fn determinism_and_convention_sensitivity() {
        let a = gen_mastouri(30, 30, 5).unwrap();
        let b = gen_mastouri(30, 30, 5).unwrap();
        assert_eq!(a, b);
        let c = gen_mastouri_with(30, 30, 5, NoiseConvention::StdDev).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn closed_form_bounded_and_periodic() {
        for &a in &mastouri_grid() {
            let f = mastouri_structural(a);
            assert!(f.abs() <= 5.0 / 3.0 + 1e-12);
            let period = core::f64::consts::PI;
            assert!((f - mastouri_structural(a + period)).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_mc_oracle_everywhere() {
        let mc = mastouri_truth_mc(200_000, 1).unwrap();
        let closed = mastouri_truth().unwrap();
        for k in 0..closed.len() {
            let gap = (closed.values[k] - mc.values[k]).abs();
            assert!(
                gap <= 3.0 * mc.mc_stderr[k],
                "grid point {k}: closed {} vs mc {} (stderr {})",
                closed.values[k],
                mc.values[k],
                mc.mc_stderr[k]
            );
        }
    }
}
