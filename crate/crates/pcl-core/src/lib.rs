//! Proxy causal learning with two-stage regression.
//!
//! Estimates structural functions and policy values from observational
//! data where confounders are unobserved but proxied: a treatment-side
//! proxy Z and an outcome-side proxy W. Stage 1 regresses outcome-proxy
//! features on treatment/proxy features; stage 2 regresses outcomes on
//! treatment features crossed with the stage-1 predictions. Feature maps
//! are either fixed dictionaries or small networks trained end to end
//! against the two ridge objectives.
//!
//! `no_std` + `alloc`; all randomness flows through explicit `u64` seeds.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod causal;
pub mod datagen;
pub mod error;
pub mod features;
pub mod numkit;
pub mod rng;
pub mod two_stage;

pub use error::{Error, Result};
pub use numkit::DenseMatrix;
