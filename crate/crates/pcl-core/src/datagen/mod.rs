//! Seeded synthetic benchmarks and their ground-truth oracles.

mod demand;
mod dsprite;
mod mastouri;
mod types;

pub use demand::{
    demand_context_for, demand_g, demand_grid, demand_truth_mc, gen_demand, gen_demand_records,
    gen_demand_with_ope, ope_truth_mc, DemandPolicyContext, DemandRecord,
};
pub use dsprite::{
    dsprite_latent_grid, gen_dsprite_surrogate, gen_dsprite_surrogate_with, DspriteSurrogate,
    Latents,
};
pub use mastouri::{
    gen_mastouri, gen_mastouri_records, gen_mastouri_with, mastouri_grid, mastouri_structural,
    mastouri_truth, mastouri_truth_mc, MastouriRecord,
};
pub use types::{linspace, GroundTruth, NoiseConvention, ObservationSet};
