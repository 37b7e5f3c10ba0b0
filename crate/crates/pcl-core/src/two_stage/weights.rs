use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::numkit::{solve_spd, solve_spd_vec, DenseMatrix};

/// Closed-form stage-1 weights: V̂ = Ψ₁ᵀΦ₁(Φ₁ᵀΦ₁ + mλ₁I)⁻¹.
///
/// Rows of Ψ₁ are target features ψ_W(wᵢ); rows of Φ₁ are regressor
/// features φ_A(aᵢ)⊗φ_Z(zᵢ). The unique minimizer of the multi-target
/// ridge objective (1/m)Σ‖ψ_W(wᵢ) − Vφ₁ᵢ‖² + λ₁‖V‖²_F when λ₁ > 0.
pub fn fit_stage1_weights(
    psi1: &DenseMatrix,
    phi1: &DenseMatrix,
    lambda1: f64,
    m: usize,
) -> Result<DenseMatrix> {
    if psi1.rows() != phi1.rows() {
        return Err(invalid("stage-1 target and regressor row counts differ"));
    }
    if m == 0 {
        return Err(invalid("stage-1 sample count must be positive"));
    }
    if !(lambda1 >= 0.0) || !lambda1.is_finite() {
        return Err(invalid("lambda1 must be a nonnegative finite scalar"));
    }
    let mut g = phi1.gram();
    g.add_diag(m as f64 * lambda1);
    let b = phi1.t_matmul(psi1)?;
    let vt = solve_spd(&g, &b)?;
    Ok(vt.transpose())
}

/// Closed-form stage-2 weights: û = (Φ₂ᵀΦ₂ + nλ₂I)⁻¹Φ₂ᵀy.
pub fn fit_stage2_weights(phi2: &DenseMatrix, y: &[f64], lambda2: f64, n: usize) -> Result<Vec<f64>> {
    if phi2.rows() != y.len() {
        return Err(invalid("stage-2 outcome and regressor row counts differ"));
    }
    if n == 0 {
        return Err(invalid("stage-2 sample count must be positive"));
    }
    if !(lambda2 >= 0.0) || !lambda2.is_finite() {
        return Err(invalid("lambda2 must be a nonnegative finite scalar"));
    }
    let mut g = phi2.gram();
    g.add_diag(n as f64 * lambda2);
    let b = phi2.transpose().mul_vec(y)?;
    solve_spd_vec(&g, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn stage1_scalar_hand_formula() {
        // Φ₁=[[1],[1]], Ψ₁=[[2],[4]]: V̂ = 6/(2 + 2·0.5) = 2
        let phi = DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let psi = DenseMatrix::from_vec(2, 1, vec![2.0, 4.0]).unwrap();
        let v = fit_stage1_weights(&psi, &phi, 0.5, 2).unwrap();
        assert!((v.get(0, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn stage1_self_regression_is_identity() {
        let phi = DenseMatrix::from_vec(3, 2, vec![1.0, 0.5, -0.2, 1.1, 0.7, 0.9]).unwrap();
        let v = fit_stage1_weights(&phi, &phi, 0.0, 3).unwrap();
        let eye = DenseMatrix::identity(2);
        for (a, b) in v.data().iter().zip(eye.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stage1_rank_deficient_unregularized_still_projects() {
        // duplicate columns, λ₁ = 0: weights are not unique but fitted
        // values must be the least-squares projection onto span{(1, 2)}
        let phi = DenseMatrix::from_vec(2, 2, vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let psi = DenseMatrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap();
        let v = fit_stage1_weights(&psi, &phi, 0.0, 2).unwrap();
        let fitted = phi.matmul_t(&v).unwrap();
        assert!((fitted.get(0, 0) + 0.2).abs() < 1e-8);
        assert!((fitted.get(1, 0) + 0.4).abs() < 1e-8);
    }

    #[test]
    fn stage2_unregularized_mean() {
        let phi = DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let u = fit_stage2_weights(&phi, &[3.0, 5.0], 0.0, 2).unwrap();
        assert!((u[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stage2_zero_target_gives_zero_weights() {
        let phi = DenseMatrix::from_vec(3, 2, vec![1.0, 0.2, 0.4, 1.5, -0.3, 0.8]).unwrap();
        let u = fit_stage2_weights(&phi, &[0.0; 3], 0.1, 3).unwrap();
        for c in u {
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn stage2_weight_norm_shrinks_monotonically_in_lambda() {
        let phi = DenseMatrix::from_vec(4, 2, vec![1.0, 0.2, 0.4, 1.5, -0.3, 0.8, 0.9, -1.1]).unwrap();
        let y = [1.0, -2.0, 0.5, 3.0];
        let mut last = f64::INFINITY;
        for lambda in [0.1, 1.0, 10.0, 100.0] {
            let u = fit_stage2_weights(&phi, &y, lambda, 4).unwrap();
            let norm = u.iter().map(|c| c * c).sum::<f64>();
            assert!(norm < last, "norm did not shrink at lambda={lambda}");
            last = norm;
        }
    }
}
