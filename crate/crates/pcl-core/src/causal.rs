//! Causal quantities on top of a fitted bridge model: structural-function
//! evaluation through the mean outcome-proxy feature, bridge evaluation,
//! deterministic policies, and off-policy value estimation.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::features::FeatureMap;
use crate::numkit::{kron_vec, DenseMatrix};
use crate::two_stage::{DfpvModel, FixedFeatureModel};

/// Everything needed to evaluate f̂_struct(a) = ûᵀ(ψ_A2(a) ⊗ μ_W).
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEstimate {
    u: Vec<f64>,
    psi_a2: FeatureMap,
    mu_w: Vec<f64>,
}

impl StructuralEstimate {
    pub fn new(u: Vec<f64>, psi_a2: FeatureMap, mu_w: Vec<f64>) -> Result<Self> {
        if u.len() != psi_a2.dim() * mu_w.len() {
            return Err(invalid("weight length must equal treatment dim times proxy dim"));
        }
        Ok(StructuralEstimate { u, psi_a2, mu_w })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn psi_a2(&self) -> &FeatureMap {
        &self.psi_a2
    }

    pub fn mu_w(&self) -> &[f64] {
        &self.mu_w
    }
}

/// Everything needed to evaluate ĥ(a, w) = ûᵀ(ψ_A2(a) ⊗ ψ_W(w)).
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeEstimate {
    u: Vec<f64>,
    psi_a2: FeatureMap,
    psi_w: FeatureMap,
}

impl BridgeEstimate {
    pub fn new(u: Vec<f64>, psi_a2: FeatureMap, psi_w: FeatureMap) -> Result<Self> {
        if u.len() != psi_a2.dim() * psi_w.dim() {
            return Err(invalid("weight length must equal the product of feature dims"));
        }
        Ok(BridgeEstimate { u, psi_a2, psi_w })
    }

    /// The structural view of the same weights, with the mean proxy
    /// feature taken over the given sample.
    pub fn structural_with(&self, s_w: &DenseMatrix) -> Result<StructuralEstimate> {
        let mu_w = mean_outcome_feature(&self.psi_w, s_w)?;
        StructuralEstimate::new(self.u.clone(), self.psi_a2.clone(), mu_w)
    }
}

impl DfpvModel {
    pub fn structural(&self) -> StructuralEstimate {
        StructuralEstimate {
            u: self.u().to_vec(),
            psi_a2: FeatureMap::Mlp(self.nets().psi_a2.clone()),
            mu_w: self.mu_w().to_vec(),
        }
    }

    pub fn bridge(&self) -> BridgeEstimate {
        BridgeEstimate {
            u: self.u().to_vec(),
            psi_a2: FeatureMap::Mlp(self.nets().psi_a2.clone()),
            psi_w: FeatureMap::Mlp(self.nets().psi_w.clone()),
        }
    }
}

impl FixedFeatureModel {
    pub fn structural(&self) -> StructuralEstimate {
        StructuralEstimate {
            u: self.u().to_vec(),
            psi_a2: FeatureMap::Rbf(self.dicts().psi_a2.clone()),
            mu_w: self.mu_w().to_vec(),
        }
    }

    pub fn bridge(&self) -> BridgeEstimate {
        BridgeEstimate {
            u: self.u().to_vec(),
            psi_a2: FeatureMap::Rbf(self.dicts().psi_a2.clone()),
            psi_w: FeatureMap::Rbf(self.dicts().psi_w.clone()),
        }
    }
}

/// Arithmetic mean of ψ_W(w) over the sample rows.
pub fn mean_outcome_feature(psi_w: &FeatureMap, samples: &DenseMatrix) -> Result<Vec<f64>> {
    if samples.rows() == 0 {
        return Err(invalid("mean proxy feature needs at least one sample"));
    }
    psi_w.features_batch(samples)?.mean_row()
}

/// f̂_struct(a) = ûᵀ(ψ_A2(a) ⊗ μ_W).
pub fn eval_structural(est: &StructuralEstimate, a: &[f64]) -> Result<f64> {
    let fa = est.psi_a2.features(a)?;
    let phi = kron_vec(&fa, &est.mu_w)?;
    Ok(dot(&est.u, &phi))
}

/// ĥ(a, w) = ûᵀ(ψ_A2(a) ⊗ ψ_W(w)).
pub fn eval_bridge(est: &BridgeEstimate, a: &[f64], w: &[f64]) -> Result<f64> {
    let fa = est.psi_a2.features(a)?;
    let fw = est.psi_w.features(w)?;
    let phi = kron_vec(&fa, &fw)?;
    Ok(dot(&est.u, &phi))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// π(c₁, c₂) = 23 + c₁c₂.
pub fn policy_cost(c1: f64, c2: f64) -> f64 {
    23.0 + c1 * c2
}

/// π(p) = max(0.7p, 10).
pub fn policy_price(p: f64) -> f64 {
    let x = 0.7 * p;
    if x > 10.0 {
        x
    } else {
        10.0
    }
}

/// Deterministic mapping from observed context to treatment.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Context (c₁, c₂) → 23 + c₁c₂.
    Cost,
    /// Context p → max(0.7p, 10).
    Price,
    /// Nearest-context lookup; the first row wins distance ties. A single
    /// row acts as a constant policy.
    Tabulated { contexts: DenseMatrix, actions: DenseMatrix },
}

impl Policy {
    pub fn apply(&self, c: &[f64]) -> Result<Vec<f64>> {
        if !c.iter().all(|x| x.is_finite()) {
            return Err(invalid("policy context must be finite"));
        }
        match self {
            Policy::Cost => {
                if c.len() != 2 {
                    return Err(invalid("cost policy takes a (c1, c2) context"));
                }
                Ok(alloc::vec![policy_cost(c[0], c[1])])
            }
            Policy::Price => {
                if c.len() != 1 {
                    return Err(invalid("price policy takes a scalar context"));
                }
                Ok(alloc::vec![policy_price(c[0])])
            }
            Policy::Tabulated { contexts, actions } => {
                if c.len() != contexts.cols() {
                    return Err(invalid("tabulated policy context dimension mismatch"));
                }
                if contexts.rows() == 0 || contexts.rows() != actions.rows() {
                    return Err(invalid("tabulated policy table is malformed"));
                }
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for i in 0..contexts.rows() {
                    let d: f64 = contexts
                        .row(i)
                        .iter()
                        .zip(c)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                Ok(actions.row(best).to_vec())
            }
        }
    }
}

/// v̂(π) = mean over the (c, w) sample of ĥ(π(cᵢ), wᵢ).
pub fn estimate_value(
    est: &BridgeEstimate,
    policy: &Policy,
    s3_c: &DenseMatrix,
    s3_w: &DenseMatrix,
) -> Result<f64> {
    if s3_c.rows() == 0 {
        return Err(invalid("policy evaluation sample is empty"));
    }
    if s3_c.rows() != s3_w.rows() {
        return Err(invalid("policy evaluation (c, w) row counts differ"));
    }
    let mut acc = 0.0;
    for i in 0..s3_c.rows() {
        let a = policy.apply(s3_c.row(i))?;
        acc += eval_bridge(est, &a, s3_w.row(i))?;
    }
    Ok(acc / s3_c.rows() as f64)
}
