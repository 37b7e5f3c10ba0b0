//! The estimation core: closed-form ridge weights for both stages, the
//! two training losses with envelope gradients through the closed-form
//! solutions, the alternating training loop for adaptive features, the
//! fixed-dictionary baseline, and cross-stage λ tuning.

pub mod adam;
pub mod fixed;
pub mod loss;
pub mod train;
pub mod tune;
pub mod weights;

pub use adam::AdamParams;
pub use fixed::{fit_fixed_feature, FixedDictionaries, FixedFeatureModel};
pub use loss::{
    dfpv_stage1_loss, dfpv_stage1_loss_with_targets, dfpv_stage2_loss, stage1_loss_value,
    stage2_loss_value, DfpvNets, NetGrads, Stage1Eval, Stage2Eval,
};
pub use train::{train_dfpv, DfpvArch, DfpvModel, TrainConfig, TrainReport};
pub use tune::{default_lambda_grid, tune_lambdas, tune_lambdas_table, TuneEntry, TuneTarget};
pub use weights::{fit_stage1_weights, fit_stage2_weights};
