//! Minimal dense linear algebra, SPD solves, summary statistics, and a
//! reverse-mode gradient tape. Everything the estimators need and nothing
//! more; all storage is row-major `f64`.

pub mod matrix;
pub mod solve;
pub mod stats;
pub mod tape;

pub use matrix::{kron_vec, row_kron, DenseMatrix};
pub use solve::{solve_spd, solve_spd_vec};
pub use stats::{mean, mean_and_stderr, median_heuristic};
pub use tape::{grad_backward, GradTape, Gradients, NodeId};
