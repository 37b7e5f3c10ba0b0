use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::numkit::DenseMatrix;

/// Which reading of N(0, s) a generator used for its Gaussian noises.
///
/// The benchmark definitions write N(0, s) without saying whether s is a
/// variance or a standard deviation; generators default to variance and
/// record the convention so downstream metadata can carry it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseConvention {
    #[default]
    Variance,
    StdDev,
}

/// Two-stage observational data: stage 1 carries (a, z, w), stage 2
/// carries (a, z, y). Optional extras: outcomes on stage 1 and outcome
/// proxies on stage 2 (for cross-stage validation), a spare w sample for
/// the mean feature, and an off-policy-evaluation split of (c, w).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    stage1_a: DenseMatrix,
    stage1_z: DenseMatrix,
    stage1_w: DenseMatrix,
    stage2_a: DenseMatrix,
    stage2_z: DenseMatrix,
    stage2_y: Vec<f64>,
    stage1_y: Option<Vec<f64>>,
    stage2_w: Option<DenseMatrix>,
    extra_w: Option<DenseMatrix>,
    ope_c: Option<DenseMatrix>,
    ope_w: Option<DenseMatrix>,
}

impl ObservationSet {
    pub fn new(
        stage1_a: DenseMatrix,
        stage1_z: DenseMatrix,
        stage1_w: DenseMatrix,
        stage2_a: DenseMatrix,
        stage2_z: DenseMatrix,
        stage2_y: Vec<f64>,
    ) -> Result<Self> {
        let m = stage1_a.rows();
        let n = stage2_a.rows();
        if m == 0 || n == 0 {
            return Err(invalid("both stages need at least one record"));
        }
        if stage1_z.rows() != m || stage1_w.rows() != m {
            return Err(invalid("stage-1 row counts differ"));
        }
        if stage2_z.rows() != n || stage2_y.len() != n {
            return Err(invalid("stage-2 row counts differ"));
        }
        if stage2_a.cols() != stage1_a.cols() || stage2_z.cols() != stage1_z.cols() {
            return Err(invalid("stage dimensionalities differ"));
        }
        if !stage2_y.iter().all(|y| y.is_finite()) {
            return Err(Error::NonFinite { context: "stage-2 outcomes" });
        }
        Ok(ObservationSet {
            stage1_a,
            stage1_z,
            stage1_w,
            stage2_a,
            stage2_z,
            stage2_y,
            stage1_y: None,
            stage2_w: None,
            extra_w: None,
            ope_c: None,
            ope_w: None,
        })
    }

    pub fn with_stage1_y(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.m() {
            return Err(invalid("stage-1 outcome count mismatch"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "stage-1 outcomes" });
        }
        self.stage1_y = Some(y);
        Ok(self)
    }

    pub fn with_stage2_w(mut self, w: DenseMatrix) -> Result<Self> {
        if w.rows() != self.n() || w.cols() != self.stage1_w.cols() {
            return Err(invalid("stage-2 proxy shape mismatch"));
        }
        self.stage2_w = Some(w);
        Ok(self)
    }

    pub fn with_extra_w(mut self, w: DenseMatrix) -> Result<Self> {
        if w.rows() == 0 || w.cols() != self.stage1_w.cols() {
            return Err(invalid("extra proxy sample shape mismatch"));
        }
        self.extra_w = Some(w);
        Ok(self)
    }

    pub fn with_ope(mut self, c: DenseMatrix, w: DenseMatrix) -> Result<Self> {
        if c.rows() == 0 || c.rows() != w.rows() {
            return Err(invalid("policy split needs matching (c, w) rows"));
        }
        if w.cols() != self.stage1_w.cols() {
            return Err(invalid("policy split proxy dimension mismatch"));
        }
        self.ope_c = Some(c);
        self.ope_w = Some(w);
        Ok(self)
    }

    /// Stage-1 sample count.
    pub fn m(&self) -> usize {
        self.stage1_a.rows()
    }

    /// Stage-2 sample count.
    pub fn n(&self) -> usize {
        self.stage2_a.rows()
    }

    pub fn stage1_a(&self) -> &DenseMatrix {
        &self.stage1_a
    }

    pub fn stage1_z(&self) -> &DenseMatrix {
        &self.stage1_z
    }

    pub fn stage1_w(&self) -> &DenseMatrix {
        &self.stage1_w
    }

    pub fn stage2_a(&self) -> &DenseMatrix {
        &self.stage2_a
    }

    pub fn stage2_z(&self) -> &DenseMatrix {
        &self.stage2_z
    }

    pub fn stage2_y(&self) -> &[f64] {
        &self.stage2_y
    }

    pub fn stage1_y(&self) -> Option<&[f64]> {
        self.stage1_y.as_deref()
    }

    pub fn stage2_w(&self) -> Option<&DenseMatrix> {
        self.stage2_w.as_ref()
    }

    pub fn extra_w(&self) -> Option<&DenseMatrix> {
        self.extra_w.as_ref()
    }

    pub fn ope_c(&self) -> Option<&DenseMatrix> {
        self.ope_c.as_ref()
    }

    pub fn ope_w(&self) -> Option<&DenseMatrix> {
        self.ope_w.as_ref()
    }

    /// Proxy sample used for the mean outcome-proxy feature: the spare
    /// sample when present, otherwise the stage-1 proxies.
    pub fn mean_feature_w(&self) -> &DenseMatrix {
        self.extra_w.as_ref().unwrap_or(&self.stage1_w)
    }
}

/// Structural-function truth on a treatment grid, with per-point
/// Monte-Carlo standard errors (zero for closed-form entries).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub grid: DenseMatrix,
    pub values: Vec<f64>,
    pub mc_stderr: Vec<f64>,
    pub n_mc: usize,
}

impl GroundTruth {
    pub fn new(grid: DenseMatrix, values: Vec<f64>, mc_stderr: Vec<f64>, n_mc: usize) -> Result<Self> {
        if grid.rows() != values.len() || values.len() != mc_stderr.len() {
            return Err(invalid("truth grid, values, and stderr lengths differ"));
        }
        if mc_stderr.iter().any(|s| !(*s >= 0.0)) {
            return Err(invalid("stderr entries must be nonnegative"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: "ground-truth values" });
        }
        Ok(GroundTruth { grid, values, mc_stderr, n_mc })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `n` evenly spaced points over [lo, hi], endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> ObservationSet {
        ObservationSet::new(
            DenseMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap(),
            DenseMatrix::from_vec(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            DenseMatrix::from_vec(2, 1, vec![5.0, 6.0]).unwrap(),
            DenseMatrix::from_vec(3, 1, vec![1.5, 2.5, 3.5]).unwrap(),
            DenseMatrix::from_vec(3, 2, vec![0.0; 6]).unwrap(),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap()
    }

    #[test]
    fn counts_and_accessors() {
        let d = tiny();
        assert_eq!(d.m(), 2);
        assert_eq!(d.n(), 3);
        assert_eq!(d.mean_feature_w(), d.stage1_w());
    }

    #[test]
    fn mismatched_rows_rejected() {
        let bad = ObservationSet::new(
            DenseMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(),
            DenseMatrix::from_vec(2, 1, vec![5.0, 6.0]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![1.5]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(),
            vec![1.0],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn nonfinite_outcome_rejected() {
        let bad = ObservationSet::new(
            DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![5.0]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![1.5]).unwrap(),
            DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(),
            vec![f64::INFINITY],
        );
        assert!(matches!(bad, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn linspace_endpoints_inclusive() {
        let g = linspace(10.0, 30.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[9], 30.0);
        let diffs: Vec<f64> = g.windows(2).map(|p| p[1] - p[0]).collect();
        for d in diffs {
            assert!((d - 20.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extra_w_overrides_mean_feature_source() {
        let extra = DenseMatrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = tiny().with_extra_w(extra.clone()).unwrap();
        assert_eq!(d.mean_feature_w(), &extra);
    }
}
