//! Per-cell aggregation of run results: median and quartiles of the
//! out-of-sample MSE, grouped by (dgp, estimator, size).

use std::collections::BTreeMap;

use crate::runner::RunResult;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dgp: String,
    pub estimator: String,
    pub size: usize,
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Interpolated percentile (the R-7 convention: h = p(n−1)/100), computed
/// with quickselect rather than a full sort.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty() && (0.0..=100.0).contains(&p));
    let n = values.len();
    let h = p / 100.0 * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let mut scratch = values.to_vec();
    let (_, &mut x_lo, _) = scratch.select_nth_unstable_by(lo, |a, b| a.total_cmp(b));
    if lo == hi {
        return x_lo;
    }
    let (_, &mut x_hi, _) = scratch.select_nth_unstable_by(hi, |a, b| a.total_cmp(b));
    x_lo + (h - lo as f64) * (x_hi - x_lo)
}

pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in results {
        cells
            .entry((r.dgp.clone(), r.estimator.clone(), r.size))
            .or_default()
            .push(r.oos_mse);
    }
    cells
        .into_iter()
        .map(|((dgp, estimator, size), mses)| SummaryRow {
            dgp,
            estimator,
            size,
            count: mses.len(),
            median: percentile(&mses, 50.0),
            q25: percentile(&mses, 25.0),
            q75: percentile(&mses, 75.0),
        })
        .collect()
}
