//! High-dimensional surrogate benchmark: a seeded random-Fourier embedding
//! of four latents (scale, rotation, posX, posY) stands in for rendered
//! sprite images. posY is the hidden confounder shared by the treatment
//! embedding and the outcome proxy embedding.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Uniform};

use crate::datagen::types::{GroundTruth, NoiseConvention, ObservationSet};
use crate::error::{invalid, Result};
use crate::numkit::DenseMatrix;
use crate::rng::stream_rng;

const STREAM_EMBED: u64 = 0x20;
const STREAM_B: u64 = 0x21;
const STREAM_CALIBRATION: u64 = 0x22;
const STREAM_STAGE1: u64 = 0x23;
const STREAM_STAGE2: u64 = 0x24;

const B_ROWS: usize = 10;
const CALIBRATION_DRAWS: usize = 100_000;
const CENTER: f64 = 5000.0;
const OUTPUT_SCALE: f64 = 1000.0;

/// Latent order everywhere: [scale, rotation, posX, posY].
pub type Latents = [f64; 4];

/// Fixed per-seed embedding plus the calibrated quadratic-form matrix
/// defining the structural function (‖B·a‖² − 5000) / 1000.
#[derive(Debug, Clone, PartialEq)]
pub struct DspriteSurrogate {
    omega: DenseMatrix,
    phase: Vec<f64>,
    b: DenseMatrix,
}

impl DspriteSurrogate {
    /// Builds the embedding and calibrates B so that ‖B·embed(latents)‖²
    /// has mean 5000 over 10⁵ reference latent draws.
    pub fn new(embed_dim: usize, seed: u64) -> Result<Self> {
        if embed_dim < 8 {
            return Err(invalid("embedding dimension must be at least 8"));
        }
        let mut rng = stream_rng(seed, STREAM_EMBED);
        let norm = Normal::new(0.0f64, 1.0).unwrap();
        let unif_phase = Uniform::new(0.0f64, 2.0 * core::f64::consts::PI);
        let omega_data: Vec<f64> = (0..embed_dim * 4).map(|_| rng.sample(norm)).collect();
        let omega = DenseMatrix::from_vec(embed_dim, 4, omega_data)?;
        let phase: Vec<f64> = (0..embed_dim).map(|_| rng.sample(unif_phase)).collect();

        let mut rng_b = stream_rng(seed, STREAM_B);
        let unif_01 = Uniform::new(0.0f64, 1.0);
        let b_raw: Vec<f64> = (0..B_ROWS * embed_dim).map(|_| rng_b.sample(unif_01)).collect();
        let b0 = DenseMatrix::from_vec(B_ROWS, embed_dim, b_raw)?;

        let mut proto = DspriteSurrogate { omega, phase, b: b0 };
        let mut rng_cal = stream_rng(seed, STREAM_CALIBRATION);
        let mut acc = 0.0;
        for _ in 0..CALIBRATION_DRAWS {
            let e = proto.embed(&draw_latents(&mut rng_cal));
            acc += proto.quadratic(&e);
        }
        let mean = acc / CALIBRATION_DRAWS as f64;
        if !(mean > 0.0) {
            return Err(invalid("embedding degenerated during calibration"));
        }
        proto.b.scale(libm::sqrt(CENTER / mean));
        Ok(proto)
    }

    pub fn embed_dim(&self) -> usize {
        self.omega.rows()
    }

    /// Random-Fourier embedding √(2/d) cos(Ω·x + φ).
    pub fn embed(&self, latents: &Latents) -> Vec<f64> {
        let d = self.embed_dim();
        let gain = libm::sqrt(2.0 / d as f64);
        (0..d)
            .map(|i| {
                let row = self.omega.row(i);
                let arg: f64 =
                    row.iter().zip(latents).map(|(o, x)| o * x).sum::<f64>() + self.phase[i];
                gain * libm::cos(arg)
            })
            .collect()
    }

    fn quadratic(&self, a: &[f64]) -> f64 {
        self.b.mul_vec(a).unwrap().iter().map(|x| x * x).sum()
    }

    /// f₀(a) = (‖B·a‖² − 5000) / 1000.
    pub fn structural(&self, a: &[f64]) -> Result<f64> {
        if a.len() != self.embed_dim() {
            return Err(invalid("treatment dimension does not match the embedding"));
        }
        Ok((self.quadratic(a) - CENTER) / OUTPUT_SCALE)
    }

    /// Noise-free outcome (posY − 0.5) f₀(a) / 12; exactly zero at the
    /// centre position.
    pub fn outcome_mean(&self, pos_y: f64, a: &[f64]) -> Result<f64> {
        Ok((pos_y - 0.5) / 12.0 * self.structural(a)?)
    }

    /// Mean of ‖B·embed(latents)‖² over fresh draws, for calibration checks.
    pub fn calibration_mean(&self, n_draws: usize, seed: u64) -> f64 {
        let mut rng = stream_rng(seed, STREAM_CALIBRATION ^ 0xff);
        let mut acc = 0.0;
        for _ in 0..n_draws {
            let e = self.embed(&draw_latents(&mut rng));
            acc += self.quadratic(&e);
        }
        acc / n_draws as f64
    }
}

fn draw_latents(rng: &mut ChaCha8Rng) -> Latents {
    let scale: f64 = rng.sample(Uniform::new(0.5f64, 1.0));
    let rotation: f64 = rng.sample(Uniform::new(0.0f64, 2.0 * core::f64::consts::PI));
    let pos_x: f64 = rng.sample(Uniform::new(0.0f64, 1.0));
    let pos_y: f64 = rng.sample(Uniform::new(0.0f64, 1.0));
    [scale, rotation, pos_x, pos_y]
}

/// Deterministic 2×2×3×4 evaluation grid over the latent ranges.
pub fn dsprite_latent_grid() -> Vec<Latents> {
    let scales = [0.5, 1.0];
    let rotations = [0.0, core::f64::consts::PI];
    let xs = [0.0, 0.5, 1.0];
    let ys = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    let mut grid = Vec::with_capacity(48);
    for &s in &scales {
        for &r in &rotations {
            for &x in &xs {
                for &y in &ys {
                    grid.push([s, r, x, y]);
                }
            }
        }
    }
    grid
}

/// Generates the surrogate benchmark and its exact ground truth on the
/// 48-point latent grid.
pub fn gen_dsprite_surrogate(
    n_stage1: usize,
    n_stage2: usize,
    embed_dim: usize,
    seed: u64,
) -> Result<(ObservationSet, GroundTruth)> {
    gen_dsprite_surrogate_with(n_stage1, n_stage2, embed_dim, seed, NoiseConvention::default())
}

/// As [`gen_dsprite_surrogate`] with an explicit noise-scale convention.
pub fn gen_dsprite_surrogate_with(
    n_stage1: usize,
    n_stage2: usize,
    embed_dim: usize,
    seed: u64,
    convention: NoiseConvention,
) -> Result<(ObservationSet, GroundTruth)> {
    if n_stage1 == 0 || n_stage2 == 0 {
        return Err(invalid("both stage counts must be at least 1"));
    }
    let surrogate = DspriteSurrogate::new(embed_dim, seed)?;
    let obs_sd = match convention {
        NoiseConvention::Variance => libm::sqrt(0.1),
        NoiseConvention::StdDev => 0.1,
    };
    let y_sd = match convention {
        NoiseConvention::Variance => libm::sqrt(0.5),
        NoiseConvention::StdDev => 0.5,
    };
    let obs_noise = Normal::new(0.0, obs_sd).unwrap();
    let y_noise = Normal::new(0.0, y_sd).unwrap();

    let draw_split = |stream: u64, n: usize| -> Result<Split> {
        let mut rng = stream_rng(seed, stream);
        let d = surrogate.embed_dim();
        let mut a = Vec::with_capacity(n * d);
        let mut z = Vec::with_capacity(n * 3);
        let mut w = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let latents = draw_latents(&mut rng);
            let mut ai = surrogate.embed(&latents);
            for x in ai.iter_mut() {
                *x += rng.sample::<f64, _>(obs_noise);
            }
            let mut wi = surrogate.embed(&[0.8, 0.0, 0.5, latents[3]]);
            for x in wi.iter_mut() {
                *x += rng.sample::<f64, _>(obs_noise);
            }
            let yi = surrogate.outcome_mean(latents[3], &ai)? + rng.sample::<f64, _>(y_noise);
            z.extend_from_slice(&latents[..3]);
            a.extend(ai);
            w.extend(wi);
            y.push(yi);
        }
        Ok(Split {
            a: DenseMatrix::from_vec(n, d, a)?,
            z: DenseMatrix::from_vec(n, 3, z)?,
            w: DenseMatrix::from_vec(n, d, w)?,
            y,
        })
    };

    let s1 = draw_split(STREAM_STAGE1, n_stage1)?;
    let s2 = draw_split(STREAM_STAGE2, n_stage2)?;
    let data = ObservationSet::new(s1.a, s1.z, s1.w, s2.a, s2.z, s2.y)?
        .with_stage1_y(s1.y)?
        .with_stage2_w(s2.w)?;

    let grid_latents = dsprite_latent_grid();
    let d = surrogate.embed_dim();
    let mut grid = Vec::with_capacity(grid_latents.len() * d);
    let mut values = Vec::with_capacity(grid_latents.len());
    for latents in &grid_latents {
        let e = surrogate.embed(latents);
        values.push(surrogate.structural(&e)?);
        grid.extend(e);
    }
    let truth = GroundTruth::new(
        DenseMatrix::from_vec(grid_latents.len(), d, grid)?,
        values,
        alloc::vec![0.0; grid_latents.len()],
        0,
    )?;
    Ok((data, truth))
}

struct Split {
    a: DenseMatrix,
    z: DenseMatrix,
    w: DenseMatrix,
    y: Vec<f64>,
}
