use alloc::vec::Vec;

use crate::datagen::ObservationSet;
use crate::error::{invalid, Result};
use crate::features::RbfDictionary;
use crate::numkit::{kron_vec, row_kron, solve_spd, solve_spd_vec, DenseMatrix};
use crate::rng::mix_seed;

use super::weights::{fit_stage1_weights, fit_stage2_weights};

/// RBF dictionaries for the four feature roles. Both treatment roles
/// share one dictionary by default.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDictionaries {
    pub phi_a1: RbfDictionary,
    pub phi_z: RbfDictionary,
    pub psi_a2: RbfDictionary,
    pub psi_w: RbfDictionary,
}

impl FixedDictionaries {
    /// Dictionaries subsampled from the stage-1 sample, one per variable,
    /// with median-heuristic bandwidths.
    pub fn from_stage1(data: &ObservationSet, max_centers: usize, seed: u64) -> Result<Self> {
        let a = RbfDictionary::from_data(data.stage1_a(), max_centers, mix_seed(seed, 11))?;
        let z = RbfDictionary::from_data(data.stage1_z(), max_centers, mix_seed(seed, 12))?;
        let w = RbfDictionary::from_data(data.stage1_w(), max_centers, mix_seed(seed, 13))?;
        Ok(FixedDictionaries { phi_a1: a.clone(), phi_z: z, psi_a2: a, psi_w: w })
    }
}

/// Stage-1 regression in whichever parametrization was cheaper to fit.
///
/// The dual form stores R = (K₁ + mλ₁I)⁻¹Ψ₁ together with the stage-1
/// feature matrices; V̂ = RᵀΦ₁ is never materialized (its column count is
/// the product of two dictionary sizes). A deserialized model may carry
/// neither form and then cannot score stage-1 predictions.
#[derive(Debug, Clone, PartialEq)]
enum Stage1Weights {
    Primal(DenseMatrix),
    Dual { r: DenseMatrix, fa1: DenseMatrix, fz1: DenseMatrix },
    Absent,
}

/// Fixed-dictionary two-stage model, fit in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedFeatureModel {
    dicts: FixedDictionaries,
    stage1: Stage1Weights,
    u: Vec<f64>,
    mu_w: Vec<f64>,
    lambda1: f64,
    lambda2: f64,
    losses: (f64, f64),
}

impl FixedFeatureModel {
    /// Rebuild a model from serialized pieces; stage-1 weights optional.
    pub fn from_parts(
        dicts: FixedDictionaries,
        v: Option<DenseMatrix>,
        u: Vec<f64>,
        mu_w: Vec<f64>,
        lambda1: f64,
        lambda2: f64,
        losses: (f64, f64),
    ) -> Result<Self> {
        if u.len() != dicts.psi_a2.dim() * dicts.psi_w.dim() {
            return Err(invalid("stage-2 weight length does not match the dictionaries"));
        }
        if mu_w.len() != dicts.psi_w.dim() {
            return Err(invalid("mean proxy feature length mismatch"));
        }
        let stage1 = match v {
            Some(v) => {
                if v.rows() != dicts.psi_w.dim() || v.cols() != dicts.phi_a1.dim() * dicts.phi_z.dim() {
                    return Err(invalid("stage-1 weight shape does not match the dictionaries"));
                }
                Stage1Weights::Primal(v)
            }
            None => Stage1Weights::Absent,
        };
        Ok(FixedFeatureModel { dicts, stage1, u, mu_w, lambda1, lambda2, losses })
    }

    pub fn dicts(&self) -> &FixedDictionaries {
        &self.dicts
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Stage-1 weights when held in primal form.
    pub fn v(&self) -> Option<&DenseMatrix> {
        match &self.stage1 {
            Stage1Weights::Primal(v) => Some(v),
            _ => None,
        }
    }

    pub fn mu_w(&self) -> &[f64] {
        &self.mu_w
    }

    pub fn lambdas(&self) -> (f64, f64) {
        (self.lambda1, self.lambda2)
    }

    /// In-sample (stage-1, stage-2) objective values, penalties included.
    pub fn losses(&self) -> (f64, f64) {
        self.losses
    }

    /// f̂_struct(a) = ûᵀ(ψ_A2(a) ⊗ μ_W).
    pub fn predict_structural(&self, a: &[f64]) -> Result<f64> {
        let fa = self.dicts.psi_a2.features(a)?;
        let phi = kron_vec(&fa, &self.mu_w)?;
        Ok(phi.iter().zip(&self.u).map(|(x, y)| x * y).sum())
    }

    /// ĥ(a, w) = ûᵀ(ψ_A2(a) ⊗ ψ_W(w)).
    pub fn predict_bridge(&self, a: &[f64], w: &[f64]) -> Result<f64> {
        let fa = self.dicts.psi_a2.features(a)?;
        let fw = self.dicts.psi_w.features(w)?;
        let phi = kron_vec(&fa, &fw)?;
        Ok(phi.iter().zip(&self.u).map(|(x, y)| x * y).sum())
    }

    /// Predicted outcome-proxy features V̂ φ₁(a, z) per input row.
    pub fn predict_mean_w_features(&self, a: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
        let fa = self.dicts.phi_a1.features_batch(a)?;
        let fz = self.dicts.phi_z.features_batch(z)?;
        match &self.stage1 {
            Stage1Weights::Primal(v) => row_kron(&fa, &fz)?.matmul_t(v),
            Stage1Weights::Dual { r, fa1, fz1 } => {
                let k = fa.matmul_t(fa1)?.hadamard(&fz.matmul_t(fz1)?)?;
                k.matmul(r)
            }
            Stage1Weights::Absent => Err(invalid("model carries no stage-1 weights")),
        }
    }

    /// Out-of-sample stage-1 loss (no penalty) on held-out (a, z, w).
    pub fn oos_stage1_loss(&self, a: &DenseMatrix, z: &DenseMatrix, w: &DenseMatrix) -> Result<f64> {
        if a.rows() == 0 || a.rows() != z.rows() || a.rows() != w.rows() {
            return Err(invalid("held-out rows empty or mismatched"));
        }
        let pred = self.predict_mean_w_features(a, z)?;
        let target = self.dicts.psi_w.features_batch(w)?;
        let resid = pred.sub(&target)?;
        Ok(resid.data().iter().map(|r| r * r).sum::<f64>() / a.rows() as f64)
    }

    /// Out-of-sample stage-2 loss (no penalty) on held-out (a, z, y).
    pub fn oos_stage2_loss(&self, a: &DenseMatrix, z: &DenseMatrix, y: &[f64]) -> Result<f64> {
        if a.rows() == 0 || a.rows() != z.rows() || a.rows() != y.len() {
            return Err(invalid("held-out rows empty or mismatched"));
        }
        let ew = self.predict_mean_w_features(a, z)?;
        let fa2 = self.dicts.psi_a2.features_batch(a)?;
        let phi2 = row_kron(&fa2, &ew)?;
        let pred = phi2.mul_vec(&self.u)?;
        Ok(pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64)
    }
}

/// Closed-form two-stage fit with fixed dictionaries: stage-1 ridge of
/// outcome-proxy features on treatment/proxy features, then stage-2 ridge
/// of outcomes on treatment features crossed with stage-1 predictions.
///
/// Each stage solves in primal form when the Kronecker feature dimension
/// is at most the sample count, otherwise in the kernelized dual form;
/// the two are algebraically identical.
pub fn fit_fixed_feature(
    data: &ObservationSet,
    dicts: &FixedDictionaries,
    lambda1: f64,
    lambda2: f64,
) -> Result<FixedFeatureModel> {
    if !(lambda1 >= 0.0) || !(lambda2 >= 0.0) {
        return Err(invalid("regularization strengths must be nonnegative"));
    }
    let m = data.m();
    let n = data.n();

    let fa1 = dicts.phi_a1.features_batch(data.stage1_a())?;
    let fz1 = dicts.phi_z.features_batch(data.stage1_z())?;
    let psi1 = dicts.psi_w.features_batch(data.stage1_w())?;
    let d1 = dicts.phi_a1.dim() * dicts.phi_z.dim();

    let (stage1, pred1, v_norm2) = if d1 <= m {
        let phi1 = row_kron(&fa1, &fz1)?;
        let v = fit_stage1_weights(&psi1, &phi1, lambda1, m)?;
        let pred1 = phi1.matmul_t(&v)?;
        let fnorm = v.frob_norm();
        let norm2 = fnorm * fnorm;
        (Stage1Weights::Primal(v), pred1, norm2)
    } else {
        let k1 = fa1.matmul_t(&fa1)?.hadamard(&fz1.matmul_t(&fz1)?)?;
        let mut g1 = k1.clone();
        g1.add_diag(m as f64 * lambda1);
        let r = solve_spd(&g1, &psi1)?;
        let pred1 = k1.matmul(&r)?;
        // ‖V̂‖²_F = tr(RᵀK₁R) since V̂ = RᵀΦ₁
        let norm2 = pred1.data().iter().zip(r.data()).map(|(p, q)| p * q).sum();
        (Stage1Weights::Dual { r, fa1: fa1.clone(), fz1: fz1.clone() }, pred1, norm2)
    };
    let fit1 = pred1.sub(&psi1)?.data().iter().map(|x| x * x).sum::<f64>() / m as f64;
    let l1 = fit1 + lambda1 * v_norm2;

    let fa1_s2 = dicts.phi_a1.features_batch(data.stage2_a())?;
    let fz1_s2 = dicts.phi_z.features_batch(data.stage2_z())?;
    let ew = match &stage1 {
        Stage1Weights::Primal(v) => row_kron(&fa1_s2, &fz1_s2)?.matmul_t(v)?,
        Stage1Weights::Dual { r, fa1, fz1 } => {
            let k21 = fa1_s2.matmul_t(fa1)?.hadamard(&fz1_s2.matmul_t(fz1)?)?;
            k21.matmul(r)?
        }
        Stage1Weights::Absent => unreachable!(),
    };

    let fa2 = dicts.psi_a2.features_batch(data.stage2_a())?;
    let y = data.stage2_y();
    let d2 = dicts.psi_a2.dim() * dicts.psi_w.dim();

    let (u, pred2) = if d2 <= n {
        let phi2 = row_kron(&fa2, &ew)?;
        let u = fit_stage2_weights(&phi2, y, lambda2, n)?;
        let pred2 = phi2.mul_vec(&u)?;
        (u, pred2)
    } else {
        let k2 = fa2.matmul_t(&fa2)?.hadamard(&ew.matmul_t(&ew)?)?;
        let mut g2 = k2.clone();
        g2.add_diag(n as f64 * lambda2);
        let alpha = solve_spd_vec(&g2, y)?;
        // û = Φ₂ᵀα accumulated as Fa2ᵀ·diag(α)·Ew, flattened row-major to
        // match the ψ_A2 ⊗ ψ_W coordinate order.
        let mut ew_scaled = ew.clone();
        for (i, &a) in alpha.iter().enumerate() {
            for x in ew_scaled.row_mut(i) {
                *x *= a;
            }
        }
        let u = fa2.t_matmul(&ew_scaled)?.data().to_vec();
        let pred2 = k2.mul_vec(&alpha)?;
        (u, pred2)
    };
    let fit2 = pred2.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n as f64;
    let l2 = fit2 + lambda2 * u.iter().map(|c| c * c).sum::<f64>();

    let mu_w = dicts.psi_w.features_batch(data.mean_feature_w())?.mean_row()?;

    Ok(FixedFeatureModel {
        dicts: dicts.clone(),
        stage1,
        u,
        mu_w,
        lambda1,
        lambda2,
        losses: (l1, l2),
    })
}
