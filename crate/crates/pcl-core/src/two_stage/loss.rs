use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::features::{MlpFeatureMap, MlpTapeNodes};
use crate::numkit::tape::{GradTape, Gradients};
use crate::numkit::{row_kron, solve_spd, DenseMatrix};

use super::weights::{fit_stage1_weights, fit_stage2_weights};

/// The four adaptive feature networks of the deep two-stage model.
#[derive(Debug, Clone, PartialEq)]
pub struct DfpvNets {
    pub phi_a1: MlpFeatureMap,
    pub phi_z: MlpFeatureMap,
    pub psi_a2: MlpFeatureMap,
    pub psi_w: MlpFeatureMap,
}

/// Per-layer parameter gradients for one network, shaped like the
/// network's weights (out×in) and biases (1×out).
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub w: Vec<DenseMatrix>,
    pub b: Vec<DenseMatrix>,
}

impl NetGrads {
    fn extract(grads: &Gradients, nodes: &MlpTapeNodes) -> Self {
        let w = nodes.params.iter().map(|l| grads.grad(l.w)).collect();
        let b = nodes.params.iter().map(|l| grads.grad(l.b)).collect();
        NetGrads { w, b }
    }

    pub fn all_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|m| m.all_finite())
    }
}

/// Stage-1 loss and its gradients wrt the treatment and treatment-proxy
/// networks.
#[derive(Debug, Clone)]
pub struct Stage1Eval {
    pub loss: f64,
    pub grad_phi_a1: NetGrads,
    pub grad_phi_z: NetGrads,
}

/// Stage-2 loss and its gradients wrt the second treatment network and
/// the outcome-proxy network.
#[derive(Debug, Clone)]
pub struct Stage2Eval {
    pub loss: f64,
    pub grad_psi_a2: NetGrads,
    pub grad_psi_w: NetGrads,
}

fn check_finite(loss: f64, context: &'static str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite { context })
    }
}

/// Stage-1 objective L̂₁ = (1/m)Σ‖ψ_W(wᵢ) − V̂φ₁ᵢ‖² + λ₁‖V̂‖²_F with
/// V̂ the closed-form ridge minimizer, plus gradients wrt (θ_A1, θ_Z).
///
/// V̂ minimizes the same objective, so the total derivative equals the
/// partial derivative at fixed V̂; the penalty contributes nothing to the
/// gradient and is added to the reported value as a constant.
pub fn dfpv_stage1_loss(
    nets: &DfpvNets,
    a1: &DenseMatrix,
    z1: &DenseMatrix,
    w1: &DenseMatrix,
    lambda1: f64,
) -> Result<Stage1Eval> {
    if w1.rows() != a1.rows() {
        return Err(invalid("stage-1 row counts differ"));
    }
    let psi1 = nets.psi_w.forward_batch(w1)?;
    dfpv_stage1_loss_with_targets(nets, a1, z1, &psi1, lambda1)
}

/// As `dfpv_stage1_loss`, but with the target features ψ_W(wᵢ)
/// precomputed. The training loop holds them fixed across a whole inner
/// loop since θ_W does not move there.
pub fn dfpv_stage1_loss_with_targets(
    nets: &DfpvNets,
    a1: &DenseMatrix,
    z1: &DenseMatrix,
    psi1: &DenseMatrix,
    lambda1: f64,
) -> Result<Stage1Eval> {
    let m = a1.rows();
    if m == 0 {
        return Err(invalid("stage-1 data is empty"));
    }
    if z1.rows() != m || psi1.rows() != m {
        return Err(invalid("stage-1 row counts differ"));
    }

    let mut tape = GradTape::new();
    let fa = nets.phi_a1.record_batch(&mut tape, a1)?;
    let fz = nets.phi_z.record_batch(&mut tape, z1)?;
    let phi1 = tape.row_kron(fa.output, fz.output)?;

    let v_hat = fit_stage1_weights(psi1, tape.value(phi1), lambda1, m)?;
    let pred = tape.mul_const_t(phi1, &v_hat)?;
    let fit = tape.sq_err_mean(pred, psi1)?;

    let fnorm = v_hat.frob_norm();
    let penalty = lambda1 * fnorm * fnorm;
    let loss = check_finite(tape.value(fit).get(0, 0) + penalty, "stage-1 loss")?;

    let grads = tape.backward(fit)?;
    let grad_phi_a1 = NetGrads::extract(&grads, &fa);
    let grad_phi_z = NetGrads::extract(&grads, &fz);
    if !grad_phi_a1.all_finite() || !grad_phi_z.all_finite() {
        return Err(Error::NonFinite { context: "stage-1 gradients" });
    }
    Ok(Stage1Eval { loss, grad_phi_a1, grad_phi_z })
}

/// Stage-2 objective L̂₂ = (1/n)Σ(ỹᵢ − ûᵀv₂ᵢ)² + λ₂‖û‖² with
/// v₂ᵢ = ψ_A2(ãᵢ) ⊗ (V̂ φ₁(ãᵢ, z̃ᵢ)), plus gradients wrt (θ_A2, θ_W).
///
/// û is the closed-form minimizer, so its dependence on θ drops out of
/// the gradient. θ_W enters through V̂ᵀ = (G⁻¹Φ₁ᵀ)Ψ₁(θ_W) with the
/// stage-1 networks frozen; that product is recorded on the tape as two
/// constant-matrix multiplies, so the n×m sample-by-sample influence
/// matrix is never materialized.
#[allow(clippy::too_many_arguments)]
pub fn dfpv_stage2_loss(
    nets: &DfpvNets,
    a2: &DenseMatrix,
    z2: &DenseMatrix,
    y2: &[f64],
    a1: &DenseMatrix,
    z1: &DenseMatrix,
    w1: &DenseMatrix,
    lambda1: f64,
    lambda2: f64,
) -> Result<Stage2Eval> {
    let m = a1.rows();
    let n = a2.rows();
    if m == 0 || n == 0 {
        return Err(invalid("both stages need data"));
    }
    if z2.rows() != n || y2.len() != n || z1.rows() != m || w1.rows() != m {
        return Err(invalid("stage row counts differ"));
    }

    // Frozen stage-1 plumbing: M = Φ₁G⁻¹ so that V̂(θ_W) = Ψ₁(θ_W)ᵀM.
    let fa1 = nets.phi_a1.forward_batch(a1)?;
    let fz1 = nets.phi_z.forward_batch(z1)?;
    let phi1 = row_kron(&fa1, &fz1)?;
    let mut g = phi1.gram();
    g.add_diag(m as f64 * lambda1);
    let m_t = solve_spd(&g, &phi1.transpose())?; // Mᵀ = G⁻¹Φ₁ᵀ, d₁×m

    let fa1_s2 = nets.phi_a1.forward_batch(a2)?;
    let fz1_s2 = nets.phi_z.forward_batch(z2)?;
    let phi1_s2 = row_kron(&fa1_s2, &fz1_s2)?; // stage-2 points through stage-1 maps

    let mut tape = GradTape::new();
    let psi1 = nets.psi_w.record_batch(&mut tape, w1)?;
    let v_t = tape.left_mul_const(&m_t, psi1.output)?; // V̂ᵀ(θ_W), d₁×d_W
    let ew = tape.left_mul_const(&phi1_s2, v_t)?; // E[ψ_W | ãᵢ, z̃ᵢ], n×d_W
    let fa2 = nets.psi_a2.record_batch(&mut tape, a2)?;
    let phi2 = tape.row_kron(fa2.output, ew)?;

    let u_hat = fit_stage2_weights(tape.value(phi2), y2, lambda2, n)?;
    let u_row = DenseMatrix::from_vec(1, u_hat.len(), u_hat.clone())?;
    let pred = tape.mul_const_t(phi2, &u_row)?;
    let target = DenseMatrix::from_vec(n, 1, y2.to_vec())?;
    let fit = tape.sq_err_mean(pred, &target)?;

    let penalty = lambda2 * u_hat.iter().map(|c| c * c).sum::<f64>();
    let loss = check_finite(tape.value(fit).get(0, 0) + penalty, "stage-2 loss")?;

    let grads = tape.backward(fit)?;
    let grad_psi_a2 = NetGrads::extract(&grads, &fa2);
    let grad_psi_w = NetGrads::extract(&grads, &psi1);
    if !grad_psi_a2.all_finite() || !grad_psi_w.all_finite() {
        return Err(Error::NonFinite { context: "stage-2 gradients" });
    }
    Ok(Stage2Eval { loss, grad_psi_a2, grad_psi_w })
}

/// Stage-1 loss recomputed from scratch (fresh V̂), no gradients. The
/// independent reference for finite-difference checks and convergence
/// tracking.
pub fn stage1_loss_value(
    nets: &DfpvNets,
    a1: &DenseMatrix,
    z1: &DenseMatrix,
    w1: &DenseMatrix,
    lambda1: f64,
) -> Result<f64> {
    let m = a1.rows();
    if m == 0 || z1.rows() != m || w1.rows() != m {
        return Err(invalid("stage-1 rows empty or mismatched"));
    }
    let psi1 = nets.psi_w.forward_batch(w1)?;
    let fa = nets.phi_a1.forward_batch(a1)?;
    let fz = nets.phi_z.forward_batch(z1)?;
    let phi1 = row_kron(&fa, &fz)?;
    let v_hat = fit_stage1_weights(&psi1, &phi1, lambda1, m)?;
    let resid = phi1.matmul_t(&v_hat)?.sub(&psi1)?;
    let fit = resid.data().iter().map(|r| r * r).sum::<f64>() / m as f64;
    let fnorm = v_hat.frob_norm();
    check_finite(fit + lambda1 * fnorm * fnorm, "stage-1 loss")
}

/// Stage-2 loss recomputed from scratch (fresh V̂ and û), no gradients.
#[allow(clippy::too_many_arguments)]
pub fn stage2_loss_value(
    nets: &DfpvNets,
    a2: &DenseMatrix,
    z2: &DenseMatrix,
    y2: &[f64],
    a1: &DenseMatrix,
    z1: &DenseMatrix,
    w1: &DenseMatrix,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let m = a1.rows();
    let n = a2.rows();
    if m == 0 || n == 0 || z2.rows() != n || y2.len() != n || z1.rows() != m || w1.rows() != m {
        return Err(invalid("stage rows empty or mismatched"));
    }
    let psi1 = nets.psi_w.forward_batch(w1)?;
    let fa1 = nets.phi_a1.forward_batch(a1)?;
    let fz1 = nets.phi_z.forward_batch(z1)?;
    let phi1 = row_kron(&fa1, &fz1)?;
    let v_hat = fit_stage1_weights(&psi1, &phi1, lambda1, m)?;

    let fa1_s2 = nets.phi_a1.forward_batch(a2)?;
    let fz1_s2 = nets.phi_z.forward_batch(z2)?;
    let phi1_s2 = row_kron(&fa1_s2, &fz1_s2)?;
    let ew = phi1_s2.matmul_t(&v_hat)?;
    let fa2 = nets.psi_a2.forward_batch(a2)?;
    let phi2 = row_kron(&fa2, &ew)?;
    let u_hat = fit_stage2_weights(&phi2, y2, lambda2, n)?;

    let pred = phi2.mul_vec(&u_hat)?;
    let fit = pred.iter().zip(y2).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n as f64;
    let penalty = lambda2 * u_hat.iter().map(|c| c * c).sum::<f64>();
    check_finite(fit + penalty, "stage-2 loss")
}
