use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::DenseMatrix;
use crate::error::{invalid, Error, Result};

/// Cap on points entering the exact pairwise-distance median; beyond it a
/// seeded subsample keeps the cost quadratic in the cap, not in n.
const MEDIAN_SUBSAMPLE_CAP: usize = 2000;
const MEDIAN_SUBSAMPLE_SEED: u64 = 0x6d65646e_68657572;

/// Median pairwise Euclidean distance over the rows of `points`.
///
/// Exact over all unordered pairs for ≤2000 points, otherwise over a seeded
/// subsample of 2000. Even pair counts take the midpoint of the two central
/// order statistics.
pub fn median_heuristic(points: &DenseMatrix) -> Result<f64> {
    if points.rows() < 2 {
        return Err(invalid("median_heuristic needs at least two points"));
    }
    let subset;
    let view = if points.rows() > MEDIAN_SUBSAMPLE_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(MEDIAN_SUBSAMPLE_SEED);
        let mut idx = sample(&mut rng, points.rows(), MEDIAN_SUBSAMPLE_CAP).into_vec();
        idx.sort_unstable();
        subset = points.select_rows(&idx)?;
        &subset
    } else {
        points
    };
    let n = view.rows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let ri = view.row(i);
        for j in (i + 1)..n {
            let rj = view.row(j);
            let mut sq = 0.0;
            for (a, b) in ri.iter().zip(rj) {
                let d = a - b;
                sq += d * d;
            }
            dists.push(libm::sqrt(sq));
        }
    }
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median == 0.0 {
        return Err(Error::DegenerateBandwidth);
    }
    Ok(median)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and standard error (sample std over √n). Single samples get
/// a zero standard error.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, libm::sqrt(var / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_pair() {
        let pts = DenseMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(median_heuristic(&pts).unwrap(), 1.0);
    }

    #[test]
    fn three_points_enumerated() {
        // distances {1, 1, 2} → median 1
        let pts = DenseMatrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(median_heuristic(&pts).unwrap(), 1.0);
    }

    #[test]
    fn identical_points_degenerate() {
        let pts = DenseMatrix::from_vec(3, 1, vec![4.0, 4.0, 4.0]).unwrap();
        assert_eq!(median_heuristic(&pts), Err(Error::DegenerateBandwidth));
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        let (m, se) = mean_and_stderr(&[2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }
}
