use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::datagen::ObservationSet;
use crate::error::{invalid, Error, Result};
use crate::features::init_mlp;
use crate::numkit::{kron_vec, row_kron, DenseMatrix};
use crate::rng::stream_rng;

use super::adam::{AdamParams, AdamState};
use super::loss::{
    dfpv_stage1_loss_with_targets, dfpv_stage2_loss, stage1_loss_value, stage2_loss_value, DfpvNets,
};
use super::weights::{fit_stage1_weights, fit_stage2_weights};

/// Training settings for the deep two-stage estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub outer_iterations: usize,
    pub stage1_inner_steps: usize,
    /// Stage-2 Adam updates per outer iteration.
    pub stage2_steps: usize,
    /// None = full batch.
    pub batch_size: Option<usize>,
    /// Relative change of the stage-2 loss over 10 outer iterations below
    /// which training stops early.
    pub convergence_rtol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 0.1,
            lambda2: 0.1,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            outer_iterations: 200,
            stage1_inner_steps: 20,
            stage2_steps: 1,
            batch_size: None,
            convergence_rtol: 1e-5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0) || !(self.lambda2 >= 0.0) {
            return Err(invalid("regularization strengths must be nonnegative"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if self.outer_iterations == 0 || self.stage1_inner_steps == 0 || self.stage2_steps == 0 {
            return Err(invalid("iteration counts must be at least 1"));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch size must be at least 1"));
        }
        if !(self.convergence_rtol >= 0.0) {
            return Err(invalid("convergence tolerance must be nonnegative"));
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0)
            || !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0)
            || !(self.adam_eps > 0.0)
        {
            return Err(invalid("Adam parameters out of range"));
        }
        Ok(())
    }

    pub(crate) fn adam_params(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Hidden-and-output widths of the four feature networks; each network's
/// input width comes from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct DfpvArch {
    pub widths_a1: Vec<usize>,
    pub widths_z: Vec<usize>,
    pub widths_a2: Vec<usize>,
    pub widths_w: Vec<usize>,
}

impl Default for DfpvArch {
    fn default() -> Self {
        DfpvArch::uniform(&[32, 16, 8])
    }
}

impl DfpvArch {
    /// Same widths for all four networks.
    pub fn uniform(widths: &[usize]) -> Self {
        DfpvArch {
            widths_a1: widths.to_vec(),
            widths_z: widths.to_vec(),
            widths_a2: widths.to_vec(),
            widths_w: widths.to_vec(),
        }
    }

    /// Wider stack for high-dimensional treatments.
    pub fn wide() -> Self {
        DfpvArch::uniform(&[64, 32, 16])
    }

    fn validate(&self) -> Result<()> {
        for widths in [&self.widths_a1, &self.widths_z, &self.widths_a2, &self.widths_w] {
            if widths.is_empty() || widths.contains(&0) {
                return Err(invalid("network widths must be nonempty and positive"));
            }
        }
        Ok(())
    }
}

/// Fitted deep two-stage model.
#[derive(Debug, Clone, PartialEq)]
pub struct DfpvModel {
    nets: DfpvNets,
    v: DenseMatrix,
    u: Vec<f64>,
    mu_w: Vec<f64>,
    config: TrainConfig,
}

impl DfpvModel {
    pub fn from_parts(
        nets: DfpvNets,
        v: DenseMatrix,
        u: Vec<f64>,
        mu_w: Vec<f64>,
        config: TrainConfig,
    ) -> Result<Self> {
        let d1 = nets.phi_a1.output_dim() * nets.phi_z.output_dim();
        if v.rows() != nets.psi_w.output_dim() || v.cols() != d1 {
            return Err(invalid("stage-1 weight shape does not match the networks"));
        }
        if u.len() != nets.psi_a2.output_dim() * nets.psi_w.output_dim() {
            return Err(invalid("stage-2 weight length does not match the networks"));
        }
        if mu_w.len() != nets.psi_w.output_dim() {
            return Err(invalid("mean proxy feature length mismatch"));
        }
        Ok(DfpvModel { nets, v, u, mu_w, config })
    }

    pub fn nets(&self) -> &DfpvNets {
        &self.nets
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn mu_w(&self) -> &[f64] {
        &self.mu_w
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// f̂_struct(a) = ûᵀ(ψ_A2(a) ⊗ μ_W).
    pub fn predict_structural(&self, a: &[f64]) -> Result<f64> {
        let fa = self.nets.psi_a2.forward(a)?;
        let phi = kron_vec(&fa, &self.mu_w)?;
        Ok(dot(&self.u, &phi))
    }

    /// ĥ(a, w) = ûᵀ(ψ_A2(a) ⊗ ψ_W(w)).
    pub fn predict_bridge(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        let fa = self.nets.psi_a2.forward(a)?;
        let fw = self.nets.psi_w.forward(w)?;
        let phi = kron_vec(&fa, &fw)?;
        Ok(dot(&self.u, &phi))
    }

    /// Predicted outcome-proxy features V̂ φ₁(a, z), one row per input row.
    pub fn predict_mean_w_features(&self, a: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
        let fa = self.nets.phi_a1.forward_batch(a)?;
        let fz = self.nets.phi_z.forward_batch(z)?;
        row_kron(&fa, &fz)?.matmul_t(&self.v)
    }

    /// Out-of-sample stage-1 loss (no penalty) on held-out (a, z, w).
    pub fn oos_stage1_loss(&self, a: &DenseMatrix, z: &DenseMatrix, w: &DenseMatrix) -> Result<f64> {
        if a.rows() == 0 || a.rows() != z.rows() || a.rows() != w.rows() {
            return Err(invalid("held-out rows empty or mismatched"));
        }
        let pred = self.predict_mean_w_features(a, z)?;
        let target = self.nets.psi_w.forward_batch(w)?;
        let resid = pred.sub(&target)?;
        Ok(resid.data().iter().map(|r| r * r).sum::<f64>() / a.rows() as f64)
    }

    /// Out-of-sample stage-2 loss (no penalty) on held-out (a, z, y).
    pub fn oos_stage2_loss(&self, a: &DenseMatrix, z: &DenseMatrix, y: &[f64]) -> Result<f64> {
        if a.rows() == 0 || a.rows() != z.rows() || a.rows() != y.len() {
            return Err(invalid("held-out rows empty or mismatched"));
        }
        let ew = self.predict_mean_w_features(a, z)?;
        let fa2 = self.nets.psi_a2.forward_batch(a)?;
        let phi2 = row_kron(&fa2, &ew)?;
        let pred = phi2.mul_vec(&self.u)?;
        Ok(pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Diagnostics from one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub outer_iterations_run: usize,
    pub converged: bool,
    /// Stage losses recomputed on the full data at the final parameters.
    pub final_l1: f64,
    pub final_l2: f64,
    /// Stage-2 loss after each outer iteration (batch loss when batching).
    pub l2_trace: Vec<f64>,
}

/// Epoch-shuffled index batches without replacement; yields None when the
/// batch covers the whole set (callers then skip row selection).
struct BatchPool {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    full: bool,
    rng: ChaCha8Rng,
}

impl BatchPool {
    fn new(count: usize, batch_size: Option<usize>, rng: ChaCha8Rng) -> Self {
        let batch = batch_size.unwrap_or(count).min(count);
        BatchPool { order: (0..count).collect(), pos: count, batch, full: batch == count, rng }
    }

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.full {
            return None;
        }
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let chunk = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        Some(chunk)
    }
}

fn select_vec(xs: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| xs[i]).collect()
}

/// Alternating two-stage training: each outer iteration runs
/// `stage1_inner_steps` Adam updates of (θ_A1, θ_Z) against the stage-1
/// loss, then `stage2_steps` updates of (θ_A2, θ_W) against the stage-2
/// loss, with the closed-form ridge weights recomputed at every step.
/// Stops early once the stage-2 loss stalls. Deterministic given the
/// config seed.
pub fn train_dfpv(
    data: &ObservationSet,
    arch: &DfpvArch,
    config: &TrainConfig,
) -> Result<(DfpvModel, TrainReport)> {
    config.validate()?;
    arch.validate()?;

    let dims = |input: usize, widths: &[usize]| {
        let mut d = alloc::vec![input];
        d.extend_from_slice(widths);
        d
    };
    let mut nets = DfpvNets {
        phi_a1: init_mlp(&dims(data.stage1_a().cols(), &arch.widths_a1), stream_seed(config.seed, 1))?,
        phi_z: init_mlp(&dims(data.stage1_z().cols(), &arch.widths_z), stream_seed(config.seed, 2))?,
        psi_a2: init_mlp(&dims(data.stage1_a().cols(), &arch.widths_a2), stream_seed(config.seed, 3))?,
        psi_w: init_mlp(&dims(data.stage1_w().cols(), &arch.widths_w), stream_seed(config.seed, 4))?,
    };

    let adam = config.adam_params();
    let mut opt_a1 = AdamState::new(&nets.phi_a1);
    let mut opt_z = AdamState::new(&nets.phi_z);
    let mut opt_a2 = AdamState::new(&nets.psi_a2);
    let mut opt_w = AdamState::new(&nets.psi_w);

    let mut pool1 = BatchPool::new(data.m(), config.batch_size, stream_rng(config.seed, 5));
    let mut pool2 = BatchPool::new(data.n(), config.batch_size, stream_rng(config.seed, 6));

    let mut l2_trace: Vec<f64> = Vec::with_capacity(config.outer_iterations);
    let mut converged = false;
    let mut iterations = 0;

    let diverged = |outer: usize, trace: &[f64], e: Error| match e {
        Error::NonFinite { .. } => Error::Diverged { iteration: outer, trace: trace.to_vec() },
        other => other,
    };

    for outer in 0..config.outer_iterations {
        iterations = outer + 1;

        // θ_W is frozen for the whole inner loop, so the targets are too.
        let psi1_full = nets.psi_w.forward_batch(data.stage1_w())?;
        for _ in 0..config.stage1_inner_steps {
            let eval = match pool1.next() {
                None => dfpv_stage1_loss_with_targets(
                    &nets,
                    data.stage1_a(),
                    data.stage1_z(),
                    &psi1_full,
                    config.lambda1,
                ),
                Some(idx) => dfpv_stage1_loss_with_targets(
                    &nets,
                    &data.stage1_a().select_rows(&idx)?,
                    &data.stage1_z().select_rows(&idx)?,
                    &psi1_full.select_rows(&idx)?,
                    config.lambda1,
                ),
            }
            .map_err(|e| diverged(outer, &l2_trace, e))?;
            opt_a1.step(&mut nets.phi_a1, &eval.grad_phi_a1, &adam);
            opt_z.step(&mut nets.phi_z, &eval.grad_phi_z, &adam);
        }

        let mut last_l2 = f64::NAN;
        for _ in 0..config.stage2_steps {
            let eval = match pool2.next() {
                None => dfpv_stage2_loss(
                    &nets,
                    data.stage2_a(),
                    data.stage2_z(),
                    data.stage2_y(),
                    data.stage1_a(),
                    data.stage1_z(),
                    data.stage1_w(),
                    config.lambda1,
                    config.lambda2,
                ),
                Some(idx) => dfpv_stage2_loss(
                    &nets,
                    &data.stage2_a().select_rows(&idx)?,
                    &data.stage2_z().select_rows(&idx)?,
                    &select_vec(data.stage2_y(), &idx),
                    data.stage1_a(),
                    data.stage1_z(),
                    data.stage1_w(),
                    config.lambda1,
                    config.lambda2,
                ),
            }
            .map_err(|e| diverged(outer, &l2_trace, e))?;
            opt_a2.step(&mut nets.psi_a2, &eval.grad_psi_a2, &adam);
            opt_w.step(&mut nets.psi_w, &eval.grad_psi_w, &adam);
            last_l2 = eval.loss;
        }
        l2_trace.push(last_l2);

        if outer >= 10 {
            let prev = l2_trace[outer - 10];
            let cur = l2_trace[outer];
            if (cur - prev).abs() <= config.convergence_rtol * prev.abs().max(1e-12) {
                converged = true;
                break;
            }
        }
    }

    // Final closed-form weights at the final parameters, on the full data.
    let psi1 = nets.psi_w.forward_batch(data.stage1_w())?;
    let fa1 = nets.phi_a1.forward_batch(data.stage1_a())?;
    let fz1 = nets.phi_z.forward_batch(data.stage1_z())?;
    let phi1 = row_kron(&fa1, &fz1)?;
    let v = fit_stage1_weights(&psi1, &phi1, config.lambda1, data.m())?;

    let fa1_s2 = nets.phi_a1.forward_batch(data.stage2_a())?;
    let fz1_s2 = nets.phi_z.forward_batch(data.stage2_z())?;
    let ew = row_kron(&fa1_s2, &fz1_s2)?.matmul_t(&v)?;
    let fa2 = nets.psi_a2.forward_batch(data.stage2_a())?;
    let phi2 = row_kron(&fa2, &ew)?;
    let u = fit_stage2_weights(&phi2, data.stage2_y(), config.lambda2, data.n())?;

    let mu_w = nets.psi_w.forward_batch(data.mean_feature_w())?.mean_row()?;

    let final_l1 = stage1_loss_value(&nets, data.stage1_a(), data.stage1_z(), data.stage1_w(), config.lambda1)?;
    let final_l2 = stage2_loss_value(
        &nets,
        data.stage2_a(),
        data.stage2_z(),
        data.stage2_y(),
        data.stage1_a(),
        data.stage1_z(),
        data.stage1_w(),
        config.lambda1,
        config.lambda2,
    )?;

    let model = DfpvModel::from_parts(nets, v, u, mu_w, config.clone())?;
    let report = TrainReport { outer_iterations_run: iterations, converged, final_l1, final_l2, l2_trace };
    Ok((model, report))
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    crate::rng::mix_seed(seed, stream)
}
