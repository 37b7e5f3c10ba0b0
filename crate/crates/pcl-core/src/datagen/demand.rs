//! Ticket-demand benchmark: price is the treatment, the two cost shifters
//! are the treatment proxy, views are the outcome proxy, and latent demand
//! confounds everything.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Uniform};

use crate::causal::Policy;
use crate::datagen::types::{linspace, GroundTruth, ObservationSet};
use crate::error::{invalid, Result};
use crate::numkit::DenseMatrix;
use crate::rng::stream_rng;

const STREAM_RECORDS: u64 = 0x00;
const STREAM_STAGE1: u64 = 0x01;
const STREAM_STAGE2: u64 = 0x02;
const STREAM_OPE: u64 = 0x03;
const STREAM_TRUTH: u64 = 0x10;
const STREAM_OPE_TRUTH: u64 = 0x11;

/// Demand curvature g(d) = 2((d−5)⁴/600 + e^{−4(d−5)²} + d/10 − 2).
pub fn demand_g(d: f64) -> f64 {
    let s = d - 5.0;
    2.0 * (s * s * s * s / 600.0 + libm::exp(-4.0 * s * s) + d / 10.0 - 2.0)
}

/// One draw from the demand joint law with its internals exposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandRecord {
    /// Latent demand, Unif[0, 10].
    pub d: f64,
    /// Cost shifter 2 sin(2πd/10) + N(0, 1).
    pub c1: f64,
    /// Cost shifter 2 cos(2πd/10) + N(0, 1).
    pub c2: f64,
    /// Views 7 g(d) + 45 + N(0, 1).
    pub v: f64,
    /// Price 35 + (c1 + 3) g(d) + c2 + N(0, 1).
    pub p: f64,
    /// Sales p (e^{(v−p)/10} ∧ 5) − 5 g(d) + N(0, 1).
    pub y: f64,
}

fn draw_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<DemandRecord> {
    let unif = Uniform::new(0.0f64, 10.0);
    let norm = Normal::new(0.0f64, 1.0).unwrap();
    let two_pi = 2.0 * core::f64::consts::PI;
    (0..n)
        .map(|_| {
            let d: f64 = rng.sample(unif);
            let e1: f64 = rng.sample(norm);
            let e2: f64 = rng.sample(norm);
            let e3: f64 = rng.sample(norm);
            let e4: f64 = rng.sample(norm);
            let ey: f64 = rng.sample(norm);
            let g = demand_g(d);
            let c1 = 2.0 * libm::sin(two_pi * d / 10.0) + e1;
            let c2 = 2.0 * libm::cos(two_pi * d / 10.0) + e2;
            let v = 7.0 * g + 45.0 + e3;
            let p = 35.0 + (c1 + 3.0) * g + c2 + e4;
            let y = sale_mean(p, v, g) + ey;
            DemandRecord { d, c1, c2, v, p, y }
        })
        .collect()
}

/// Conditional mean of sales given price `p`, views `v`, and curvature `g`.
fn sale_mean(p: f64, v: f64, g: f64) -> f64 {
    let units = libm::exp((v - p) / 10.0);
    p * if units < 5.0 { units } else { 5.0 } - 5.0 * g
}

/// Raw draws with internals exposed for distributional checks.
pub fn gen_demand_records(n: usize, seed: u64) -> Vec<DemandRecord> {
    draw_records(&mut stream_rng(seed, STREAM_RECORDS), n)
}

fn to_observations(stage1: &[DemandRecord], stage2: &[DemandRecord]) -> Result<ObservationSet> {
    let pack = |records: &[DemandRecord]| {
        let a: Vec<f64> = records.iter().map(|r| r.p).collect();
        let z: Vec<f64> = records.iter().flat_map(|r| [r.c1, r.c2]).collect();
        let w: Vec<f64> = records.iter().map(|r| r.v).collect();
        let y: Vec<f64> = records.iter().map(|r| r.y).collect();
        (a, z, w, y)
    };
    let (a1, z1, w1, y1) = pack(stage1);
    let (a2, z2, w2, y2) = pack(stage2);
    let m = stage1.len();
    let n = stage2.len();
    ObservationSet::new(
        DenseMatrix::from_vec(m, 1, a1)?,
        DenseMatrix::from_vec(m, 2, z1)?,
        DenseMatrix::from_vec(m, 1, w1)?,
        DenseMatrix::from_vec(n, 1, a2)?,
        DenseMatrix::from_vec(n, 2, z2)?,
        y2,
    )?
    .with_stage1_y(y1)?
    .with_stage2_w(DenseMatrix::from_vec(n, 1, w2)?)
}

/// Independent stage-1 and stage-2 draws from the demand law.
///
/// Stage-1 outcomes and stage-2 outcome proxies ride along so the result
/// supports cross-stage validation out of the box.
pub fn gen_demand(n_stage1: usize, n_stage2: usize, seed: u64) -> Result<ObservationSet> {
    if n_stage1 == 0 || n_stage2 == 0 {
        return Err(invalid("both stage counts must be at least 1"));
    }
    let stage1 = draw_records(&mut stream_rng(seed, STREAM_STAGE1), n_stage1);
    let stage2 = draw_records(&mut stream_rng(seed, STREAM_STAGE2), n_stage2);
    to_observations(&stage1, &stage2)
}

/// Which observed variables a demand policy reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandPolicyContext {
    /// Context is the cost-shifter pair (c1, c2).
    Costs,
    /// Context is the logged price p.
    Price,
}

/// The context kind a policy consumes for the demand setting.
pub fn demand_context_for(policy: &Policy) -> Result<DemandPolicyContext> {
    match policy {
        Policy::Cost => Ok(DemandPolicyContext::Costs),
        Policy::Price => Ok(DemandPolicyContext::Price),
        Policy::Tabulated { contexts, .. } => match contexts.cols() {
            2 => Ok(DemandPolicyContext::Costs),
            1 => Ok(DemandPolicyContext::Price),
            _ => Err(invalid("tabulated policy context must be (c1, c2) or p for demand")),
        },
    }
}

/// As [`gen_demand`], plus a third independent (context, proxy) split for
/// policy evaluation.
pub fn gen_demand_with_ope(
    n_stage1: usize,
    n_stage2: usize,
    n_ope: usize,
    context: DemandPolicyContext,
    seed: u64,
) -> Result<ObservationSet> {
    if n_ope == 0 {
        return Err(invalid("policy split count must be at least 1"));
    }
    let data = gen_demand(n_stage1, n_stage2, seed)?;
    let ope = draw_records(&mut stream_rng(seed, STREAM_OPE), n_ope);
    let w = DenseMatrix::from_vec(n_ope, 1, ope.iter().map(|r| r.v).collect())?;
    let c = match context {
        DemandPolicyContext::Costs => {
            DenseMatrix::from_vec(n_ope, 2, ope.iter().flat_map(|r| [r.c1, r.c2]).collect())?
        }
        DemandPolicyContext::Price => {
            DenseMatrix::from_vec(n_ope, 1, ope.iter().map(|r| r.p).collect())?
        }
    };
    data.with_ope(c, w)
}

/// Ten evenly spaced prices over [10, 30].
pub fn demand_grid() -> Vec<f64> {
    linspace(10.0, 30.0, 10)
}

fn mean_stderr_from_sums(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, libm::sqrt(var / nf))
}

/// Monte-Carlo structural truth f(p) = E[p (e^{(V−p)/10} ∧ 5) − 5 g(D)]
/// on the standard price grid, averaging over (D, ε_v).
pub fn demand_truth_mc(n_mc: usize, seed: u64) -> Result<GroundTruth> {
    let grid = demand_grid();
    if n_mc < 10_000 {
        return Err(invalid("demand truth needs at least 1e4 draws"));
    }
    let mut rng = stream_rng(seed, STREAM_TRUTH);
    let unif = Uniform::new(0.0f64, 10.0);
    let norm = Normal::new(0.0f64, 1.0).unwrap();
    let mut sum = alloc::vec![0.0f64; grid.len()];
    let mut sumsq = alloc::vec![0.0f64; grid.len()];
    for _ in 0..n_mc {
        let d: f64 = rng.sample(unif);
        let e3: f64 = rng.sample(norm);
        let g = demand_g(d);
        let v = 7.0 * g + 45.0 + e3;
        for (k, &p) in grid.iter().enumerate() {
            let f = sale_mean(p, v, g);
            sum[k] += f;
            sumsq[k] += f * f;
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (m, s) = mean_stderr_from_sums(sum[k], sumsq[k], n_mc);
        values.push(m);
        stderr.push(s);
    }
    GroundTruth::new(DenseMatrix::from_vec(grid.len(), 1, grid)?, values, stderr, n_mc)
}

/// Monte-Carlo policy value v(π) = E[π(C) (e^{(V−π(C))/10} ∧ 5) − 5 g(D)]
/// for the demand law; returns (value, standard error).
pub fn ope_truth_mc(policy: &Policy, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if n_mc < 10_000 {
        return Err(invalid("policy truth needs at least 1e4 draws"));
    }
    let context = demand_context_for(policy)?;
    let mut rng = stream_rng(seed, STREAM_OPE_TRUTH);
    let records = draw_records(&mut rng, n_mc);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for r in &records {
        let ctx = match context {
            DemandPolicyContext::Costs => alloc::vec![r.c1, r.c2],
            DemandPolicyContext::Price => alloc::vec![r.p],
        };
        let a = policy.apply(&ctx)?;
        let g = demand_g(r.d);
        let f = sale_mean(a[0], r.v, g);
        sum += f;
        sumsq += f * f;
    }
    Ok(mean_stderr_from_sums(sum, sumsq, n_mc))
}
