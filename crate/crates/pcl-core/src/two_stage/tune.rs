use alloc::vec::Vec;

use crate::datagen::ObservationSet;
use crate::error::{invalid, Result};

use super::fixed::{fit_fixed_feature, FixedDictionaries};
use super::train::{train_dfpv, DfpvArch, TrainConfig};

/// What to refit at each grid point.
#[derive(Debug, Clone, Copy)]
pub enum TuneTarget<'a> {
    FixedFeature(&'a FixedDictionaries),
    Dfpv { arch: &'a DfpvArch, config: &'a TrainConfig },
}

/// Cross-stage validation scores for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneEntry {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Stage-1 feature-prediction loss on the stage-2 split.
    pub stage1_oos: f64,
    /// Stage-2 outcome loss on the stage-1 split.
    pub stage2_oos: f64,
}

/// Default λ grid: {10⁻⁴, 10⁻³, 10⁻², 10⁻¹, 1, 10}².
pub fn default_lambda_grid() -> Vec<(f64, f64)> {
    let axis = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];
    let mut grid = Vec::with_capacity(36);
    for &l1 in &axis {
        for &l2 in &axis {
            grid.push((l1, l2));
        }
    }
    grid
}

/// Grid search over (λ₁, λ₂): each point is fit on the usual splits and
/// scored out of sample on the opposite split (stage-1 predictions on the
/// stage-2 data, stage-2 predictions on the stage-1 data). The point with
/// the smallest stage-2 score wins; exact ties break toward larger λ₂,
/// then larger λ₁.
pub fn tune_lambdas(data: &ObservationSet, target: TuneTarget, grid: &[(f64, f64)]) -> Result<(f64, f64)> {
    Ok(tune_lambdas_table(data, target, grid)?.0)
}

/// As `tune_lambdas`, also returning every grid point's scores.
pub fn tune_lambdas_table(
    data: &ObservationSet,
    target: TuneTarget,
    grid: &[(f64, f64)],
) -> Result<((f64, f64), Vec<TuneEntry>)> {
    if grid.is_empty() {
        return Err(invalid("tuning grid is empty"));
    }
    let stage1_y = data
        .stage1_y()
        .ok_or_else(|| invalid("tuning needs outcomes on the stage-1 split"))?;
    let stage2_w = data
        .stage2_w()
        .ok_or_else(|| invalid("tuning needs outcome proxies on the stage-2 split"))?;

    let mut entries = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, f64)> = None; // (score, λ₂, λ₁)
    for &(lambda1, lambda2) in grid {
        if !(lambda1 >= 0.0) || !(lambda2 >= 0.0) {
            return Err(invalid("grid regularization strengths must be nonnegative"));
        }
        let (stage1_oos, stage2_oos) = match target {
            TuneTarget::FixedFeature(dicts) => {
                let model = fit_fixed_feature(data, dicts, lambda1, lambda2)?;
                (
                    model.oos_stage1_loss(data.stage2_a(), data.stage2_z(), stage2_w)?,
                    model.oos_stage2_loss(data.stage1_a(), data.stage1_z(), stage1_y)?,
                )
            }
            TuneTarget::Dfpv { arch, config } => {
                let cfg = TrainConfig { lambda1, lambda2, ..config.clone() };
                let (model, _) = train_dfpv(data, arch, &cfg)?;
                (
                    model.oos_stage1_loss(data.stage2_a(), data.stage2_z(), stage2_w)?,
                    model.oos_stage2_loss(data.stage1_a(), data.stage1_z(), stage1_y)?,
                )
            }
        };
        entries.push(TuneEntry { lambda1, lambda2, stage1_oos, stage2_oos });
        let candidate = (stage2_oos, lambda2, lambda1);
        let wins = match best {
            None => true,
            Some((s, l2, l1)) => {
                candidate.0 < s
                    || (candidate.0 == s && (candidate.1 > l2 || (candidate.1 == l2 && candidate.2 > l1)))
            }
        };
        if wins {
            best = Some(candidate);
        }
    }
    let (_, l2, l1) = best.expect("nonempty grid");
    Ok(((l1, l2), entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::DenseMatrix;
    use alloc::vec;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn planted_data(rows: usize, noise: f64, seed: u64) -> ObservationSet {
        // u drives everything; w and z are noisy readings of u, y is a
        // smooth function of a = u plus noise.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let mut mk = |count: usize| {
            let mut a = Vec::new();
            let mut z = Vec::new();
            let mut w = Vec::new();
            let mut y = Vec::new();
            for _ in 0..count {
                let u = draw(0.5, 1.5);
                a.push(u);
                z.push(u + noise * draw(-1.0, 1.0));
                w.push(u + noise * draw(-1.0, 1.0));
                y.push(2.0 * u + noise * draw(-1.0, 1.0));
            }
            (a, z, w, y)
        };
        let (a1, z1, w1, y1) = mk(rows);
        let (a2, z2, w2, y2) = mk(rows);
        ObservationSet::new(
            DenseMatrix::from_vec(rows, 1, a1).unwrap(),
            DenseMatrix::from_vec(rows, 1, z1).unwrap(),
            DenseMatrix::from_vec(rows, 1, w1).unwrap(),
            DenseMatrix::from_vec(rows, 1, a2).unwrap(),
            DenseMatrix::from_vec(rows, 1, z2).unwrap(),
            y2,
        )
        .unwrap()
        .with_stage1_y(y1)
        .unwrap()
        .with_stage2_w(DenseMatrix::from_vec(rows, 1, w2).unwrap())
        .unwrap()
    }

    #[test]
    fn singleton_grid_returns_that_point() {
        let data = planted_data(20, 0.05, 3);
        let dicts = FixedDictionaries::from_stage1(&data, 8, 1).unwrap();
        let best = tune_lambdas(&data, TuneTarget::FixedFeature(&dicts), &[(0.3, 0.7)]).unwrap();
        assert_eq!(best, (0.3, 0.7));
    }

    #[test]
    fn duplicate_grid_entries_do_not_change_selection() {
        let data = planted_data(24, 0.05, 4);
        let dicts = FixedDictionaries::from_stage1(&data, 8, 1).unwrap();
        let grid = vec![(0.01, 0.01), (0.1, 0.1), (1.0, 1.0)];
        let mut doubled = grid.clone();
        doubled.extend_from_slice(&grid);
        let a = tune_lambdas(&data, TuneTarget::FixedFeature(&dicts), &grid).unwrap();
        let b = tune_lambdas(&data, TuneTarget::FixedFeature(&dicts), &doubled).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_grid_rejected() {
        let data = planted_data(10, 0.05, 5);
        let dicts = FixedDictionaries::from_stage1(&data, 4, 1).unwrap();
        assert!(tune_lambdas(&data, TuneTarget::FixedFeature(&dicts), &[]).is_err());
    }

    #[test]
    fn low_noise_instance_rejects_heaviest_regularization() {
        let data = planted_data(60, 0.01, 6);
        let dicts = FixedDictionaries::from_stage1(&data, 12, 1).unwrap();
        let grid = default_lambda_grid();
        let (_, l2) = tune_lambdas(&data, TuneTarget::FixedFeature(&dicts), &grid).unwrap();
        assert!(l2 < 10.0, "over-regularization was not rejected (λ₂ = {l2})");
    }

    #[test]
    fn missing_cross_stage_variables_rejected() {
        let data = planted_data(10, 0.05, 7);
        let bare = ObservationSet::new(
            data.stage1_a().clone(),
            data.stage1_z().clone(),
            data.stage1_w().clone(),
            data.stage2_a().clone(),
            data.stage2_z().clone(),
            data.stage2_y().to_vec(),
        )
        .unwrap();
        let dicts = FixedDictionaries::from_stage1(&bare, 4, 1).unwrap();
        assert!(tune_lambdas(&bare, TuneTarget::FixedFeature(&dicts), &[(0.1, 0.1)]).is_err());
    }
}
