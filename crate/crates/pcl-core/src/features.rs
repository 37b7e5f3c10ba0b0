//! Feature maps: fixed Gaussian RBF dictionaries and small ReLU networks.
//!
//! Every layer of a network ends in ReLU, including the last, so network
//! features are always nonnegative. RBF features live in (0, 1].

use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::numkit::stats::median_heuristic;
use crate::numkit::tape::{GradTape, NodeId};
use crate::numkit::DenseMatrix;

/// Gaussian RBF dictionary: feature k of x is exp(−‖x−c_k‖²/(2σ²)).
#[derive(Debug, Clone, PartialEq)]
pub struct RbfDictionary {
    centers: DenseMatrix,
    bandwidth: f64,
}

impl RbfDictionary {
    pub fn new(centers: DenseMatrix, bandwidth: f64) -> Result<Self> {
        if centers.rows() == 0 || centers.cols() == 0 {
            return Err(invalid("RBF dictionary needs at least one center"));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(invalid("RBF bandwidth must be positive and finite"));
        }
        Ok(RbfDictionary { centers, bandwidth })
    }

    /// Centers = seeded subsample of at most `max_centers` rows of `points`;
    /// bandwidth = median pairwise distance of `points`.
    pub fn from_data(points: &DenseMatrix, max_centers: usize, seed: u64) -> Result<Self> {
        if max_centers == 0 {
            return Err(invalid("max_centers must be at least 1"));
        }
        if points.rows() == 0 {
            return Err(invalid("RBF dictionary needs data points"));
        }
        let bandwidth = median_heuristic(points)?;
        let centers = if points.rows() <= max_centers {
            points.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, points.rows(), max_centers).into_vec();
            idx.sort_unstable();
            points.select_rows(&idx)?
        };
        RbfDictionary::new(centers, bandwidth)
    }

    pub fn centers(&self) -> &DenseMatrix {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Number of centers, i.e. the output dimension.
    pub fn dim(&self) -> usize {
        self.centers.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        rbf_features(x, self)
    }

    pub fn features_batch(&self, xs: &DenseMatrix) -> Result<DenseMatrix> {
        if xs.cols() != self.input_dim() {
            return Err(invalid("rbf batch input dimension mismatch"));
        }
        let mut data = Vec::with_capacity(xs.rows() * self.dim());
        for i in 0..xs.rows() {
            data.extend_from_slice(&self.features(xs.row(i))?);
        }
        Ok(DenseMatrix::from_vec_unchecked(xs.rows(), self.dim(), data))
    }
}

/// exp(−‖x−c_k‖²/(2σ²)) for every center; entries in (0, 1], equal to 1
/// exactly at a center.
pub fn rbf_features(x: &[f64], dict: &RbfDictionary) -> Result<Vec<f64>> {
    if x.len() != dict.input_dim() {
        return Err(invalid(alloc::format!(
            "rbf input dim {} does not match centers dim {}",
            x.len(),
            dict.input_dim()
        )));
    }
    let denom = 2.0 * dict.bandwidth * dict.bandwidth;
    let mut out = Vec::with_capacity(dict.dim());
    for k in 0..dict.dim() {
        let mut sq = 0.0;
        for (a, b) in x.iter().zip(dict.centers.row(k)) {
            let d = a - b;
            sq += d * d;
        }
        out.push(libm::exp(-sq / denom));
    }
    Ok(out)
}

/// One affine layer: y = W·x + b with W out×in.
#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w: DenseMatrix,
    b: Vec<f64>,
}

/// Fully-connected network with ReLU after every layer, the last included.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpFeatureMap {
    layers: Vec<Layer>,
}

/// Tape handles for one recorded layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerNodes {
    pub w: NodeId,
    pub b: NodeId,
}

/// Result of recording a batched forward pass on a tape.
#[derive(Debug, Clone)]
pub struct MlpTapeNodes {
    pub params: Vec<LayerNodes>,
    pub output: NodeId,
}

impl MlpFeatureMap {
    /// Build from per-layer weights (out×in) and biases (len out).
    pub fn from_parts(weights: Vec<DenseMatrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(invalid("network needs matching nonempty weights and biases"));
        }
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() == 0 || w.cols() == 0 {
                return Err(invalid(alloc::format!("layer {i} has a zero dimension")));
            }
            if b.len() != w.rows() {
                return Err(invalid(alloc::format!("layer {i} bias length mismatch")));
            }
            if !b.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite { context: "network bias" });
            }
            if i > 0 && w.cols() != weights[i - 1].rows() {
                return Err(invalid(alloc::format!("layer {i} input dim mismatch")));
            }
        }
        let layers = weights.into_iter().zip(biases).map(|(w, b)| Layer { w, b }).collect();
        Ok(MlpFeatureMap { layers })
    }

    /// [input dim, layer 1 out, ..., last out].
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].w.cols()];
        dims.extend(self.layers.iter().map(|l| l.w.rows()));
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_weights(&self, i: usize) -> &DenseMatrix {
        &self.layers[i].w
    }

    pub fn layer_biases(&self, i: usize) -> &[f64] {
        &self.layers[i].b
    }

    pub(crate) fn layer_weights_mut(&mut self, i: usize) -> &mut DenseMatrix {
        &mut self.layers[i].w
    }

    pub(crate) fn layer_biases_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.layers[i].b
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].w.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xs = DenseMatrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&xs)?.row(0).to_vec())
    }

    /// One row per sample.
    pub fn forward_batch(&self, xs: &DenseMatrix) -> Result<DenseMatrix> {
        if xs.cols() != self.input_dim() {
            return Err(invalid("network batch input dimension mismatch"));
        }
        let mut h = xs.clone();
        for layer in &self.layers {
            let mut next = h.matmul_t(&layer.w)?;
            let out = next.cols();
            for i in 0..next.rows() {
                let row = &mut next.data_mut()[i * out..(i + 1) * out];
                for (v, &b) in row.iter_mut().zip(&layer.b) {
                    let s = *v + b;
                    *v = if s > 0.0 { s } else { 0.0 };
                }
            }
            h = next;
        }
        Ok(h)
    }

    /// Record the batched forward pass; parameters become tape params so a
    /// backward pass yields their gradients.
    pub fn record_batch(&self, tape: &mut GradTape, xs: &DenseMatrix) -> Result<MlpTapeNodes> {
        if xs.cols() != self.input_dim() {
            return Err(invalid("network batch input dimension mismatch"));
        }
        let mut h = tape.constant(xs.clone());
        let mut params = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let w = tape.param(layer.w.clone());
            let b = tape.param(DenseMatrix::from_vec_unchecked(1, layer.b.len(), layer.b.clone()));
            params.push(LayerNodes { w, b });
            let aff = tape.affine(h, w, b)?;
            h = tape.relu(aff);
        }
        Ok(MlpTapeNodes { params, output: h })
    }
}

/// Forward pass; with a tape the pass is recorded so gradients wrt the
/// network parameters can be taken.
pub fn mlp_features(x: &[f64], map: &MlpFeatureMap, tape: Option<&mut GradTape>) -> Result<Vec<f64>> {
    match tape {
        None => map.forward(x),
        Some(tape) => {
            let xs = DenseMatrix::from_vec(1, x.len(), x.to_vec())?;
            let nodes = map.record_batch(tape, &xs)?;
            Ok(tape.value(nodes.output).row(0).to_vec())
        }
    }
}

/// He-uniform initialization: weights U(−√(6/fan_in), √(6/fan_in)), zero
/// biases. `layer_dims` = [input, hidden..., output].
pub fn init_mlp(layer_dims: &[usize], seed: u64) -> Result<MlpFeatureMap> {
    if layer_dims.len() < 2 {
        return Err(invalid("init_mlp needs an input and at least one layer"));
    }
    if layer_dims.contains(&0) {
        return Err(invalid("layer dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = libm::sqrt(6.0 / fan_in as f64);
        let dist = Uniform::new_inclusive(-bound, bound);
        let data: Vec<f64> = (0..fan_out * fan_in).map(|_| dist.sample(&mut rng)).collect();
        weights.push(DenseMatrix::from_vec_unchecked(fan_out, fan_in, data));
        biases.push(vec![0.0; fan_out]);
    }
    MlpFeatureMap::from_parts(weights, biases)
}

/// A feature map of either kind, for model evaluation paths that do not
/// care how the features were obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Rbf(RbfDictionary),
    Mlp(MlpFeatureMap),
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Rbf(d) => d.dim(),
            FeatureMap::Mlp(m) => m.output_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Rbf(d) => d.input_dim(),
            FeatureMap::Mlp(m) => m.input_dim(),
        }
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Rbf(d) => d.features(x),
            FeatureMap::Mlp(m) => m.forward(x),
        }
    }

    pub fn features_batch(&self, xs: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            FeatureMap::Rbf(d) => d.features_batch(xs),
            FeatureMap::Mlp(m) => m.forward_batch(xs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_is_one_at_center() {
        let dict = RbfDictionary::new(
            DenseMatrix::from_vec(2, 2, vec![0.0, 0.0, 3.0, 4.0]).unwrap(),
            1.5,
        )
        .unwrap();
        let f = rbf_features(&[0.0, 0.0], &dict).unwrap();
        assert_eq!(f[0], 1.0);
        assert!(f[1] < 1.0 && f[1] > 0.0);
    }

    #[test]
    fn rbf_half_height_at_sigma_sqrt_2ln2() {
        // exp(−x²/(2σ²)) = 1/2 at x = σ√(2 ln 2)
        let dict = RbfDictionary::new(DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(), 1.0).unwrap();
        let x = libm::sqrt(2.0 * core::f64::consts::LN_2);
        let f = rbf_features(&[x], &dict).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rbf_far_field_decays() {
        let dict = RbfDictionary::new(DenseMatrix::from_vec(1, 1, vec![0.0]).unwrap(), 1.0).unwrap();
        let f = rbf_features(&[40.0], &dict).unwrap();
        assert!(f[0] < 1e-300);
    }

    #[test]
    fn rbf_dimension_mismatch_rejected() {
        let dict = RbfDictionary::new(DenseMatrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap(), 1.0).unwrap();
        assert!(rbf_features(&[1.0], &dict).is_err());
    }

    #[test]
    fn from_data_subsamples_and_is_deterministic() {
        let pts = DenseMatrix::from_vec(10, 1, (0..10).map(|i| i as f64).collect()).unwrap();
        let d1 = RbfDictionary::from_data(&pts, 4, 9).unwrap();
        let d2 = RbfDictionary::from_data(&pts, 4, 9).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.dim(), 4);
        let all = RbfDictionary::from_data(&pts, 100, 9).unwrap();
        assert_eq!(all.dim(), 10);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let map = MlpFeatureMap::from_parts(
            vec![DenseMatrix::zeros(3, 2), DenseMatrix::zeros(2, 3)],
            vec![vec![0.0; 3], vec![0.0; 2]],
        )
        .unwrap();
        assert_eq!(mlp_features(&[1.0, -2.0], &map, None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_layer_hand_evaluation() {
        let map = MlpFeatureMap::from_parts(
            vec![DenseMatrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap()],
            vec![vec![0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(map.forward(&[2.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn recorded_forward_matches_plain_forward() {
        let map = init_mlp(&[2, 4, 3], 5).unwrap();
        let xs = DenseMatrix::from_vec(2, 2, vec![0.3, -0.4, 1.0, 2.0]).unwrap();
        let plain = map.forward_batch(&xs).unwrap();
        let mut tape = GradTape::new();
        let nodes = map.record_batch(&mut tape, &xs).unwrap();
        assert_eq!(tape.value(nodes.output), &plain);
    }

    #[test]
    fn init_is_seed_deterministic_and_seed_sensitive() {
        let a = init_mlp(&[3, 8, 4], 11).unwrap();
        let b = init_mlp(&[3, 8, 4], 11).unwrap();
        let c = init_mlp(&[3, 8, 4], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_weight_variance_matches_he_uniform() {
        // U(−b, b) with b = √(6/fan_in) has variance b²/3 = 2/fan_in.
        let fan_in = 50;
        let map = init_mlp(&[fan_in, 200], 3).unwrap();
        let w = map.layer_weights(0);
        let n = w.data().len() as f64;
        let mean: f64 = w.data().iter().sum::<f64>() / n;
        let var: f64 = w.data().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let target = 2.0 / fan_in as f64;
        assert!((var - target).abs() < 0.2 * target, "var {var} vs {target}");
        assert_eq!(n as usize, 10_000);
    }

    #[test]
    fn bias_free_single_layer_is_positively_homogeneous() {
        let map = MlpFeatureMap::from_parts(
            vec![DenseMatrix::from_vec(2, 2, vec![1.0, -0.5, 0.25, 2.0]).unwrap()],
            vec![vec![0.0, 0.0]],
        )
        .unwrap();
        let f1 = map.forward(&[0.7, -1.3]).unwrap();
        let f3 = map.forward(&[2.1, -3.9]).unwrap();
        for (a, b) in f1.iter().zip(&f3) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn init_rejects_degenerate_dims() {
        assert!(init_mlp(&[3], 0).is_err());
        assert!(init_mlp(&[3, 0, 2], 0).is_err());
    }
}
