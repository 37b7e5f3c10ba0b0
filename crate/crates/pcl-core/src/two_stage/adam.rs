use alloc::vec::Vec;

use crate::features::MlpFeatureMap;
use crate::numkit::DenseMatrix;

use super::loss::NetGrads;

/// Adam step-size settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First/second-moment accumulators for one network.
#[derive(Debug, Clone)]
pub(crate) struct AdamState {
    m_w: Vec<DenseMatrix>,
    v_w: Vec<DenseMatrix>,
    m_b: Vec<DenseMatrix>,
    v_b: Vec<DenseMatrix>,
    t: u32,
}

impl AdamState {
    pub(crate) fn new(map: &MlpFeatureMap) -> Self {
        let mut m_w = Vec::new();
        let mut v_w = Vec::new();
        let mut m_b = Vec::new();
        let mut v_b = Vec::new();
        for i in 0..map.num_layers() {
            let w = map.layer_weights(i);
            m_w.push(DenseMatrix::zeros(w.rows(), w.cols()));
            v_w.push(DenseMatrix::zeros(w.rows(), w.cols()));
            m_b.push(DenseMatrix::zeros(1, map.layer_biases(i).len()));
            v_b.push(DenseMatrix::zeros(1, map.layer_biases(i).len()));
        }
        AdamState { m_w, v_w, m_b, v_b, t: 0 }
    }

    /// One Adam update of the network in place.
    pub(crate) fn step(&mut self, map: &mut MlpFeatureMap, grads: &NetGrads, p: &AdamParams) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(p.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(p.beta2, self.t as f64);
        for i in 0..map.num_layers() {
            update_slice(
                map.layer_weights_mut(i).data_mut(),
                grads.w[i].data(),
                self.m_w[i].data_mut(),
                self.v_w[i].data_mut(),
                p,
                bc1,
                bc2,
            );
            update_slice(
                map.layer_biases_mut(i),
                grads.b[i].data(),
                self.m_b[i].data_mut(),
                self.v_b[i].data_mut(),
                p,
                bc1,
                bc2,
            );
        }
    }
}

fn update_slice(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    p: &AdamParams,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= p.learning_rate * m_hat / (libm::sqrt(v_hat) + p.eps);
    }
}
