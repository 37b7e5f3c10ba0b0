//! Serialized forms of fitted models and dataset metadata. JSON numbers
//! are written by serde_json, which round-trips f64 exactly; a model
//! reloaded from disk therefore predicts bit-identically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use pcl_core::datagen::GroundTruth;
use pcl_core::features::{MlpFeatureMap, RbfDictionary};
use pcl_core::numkit::DenseMatrix;
use pcl_core::two_stage::{DfpvModel, DfpvNets, FixedDictionaries, FixedFeatureModel, TrainConfig};

use crate::error::{validation, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DenseMatrix) -> Self {
        MatrixJson { rows: m.rows(), cols: m.cols(), data: m.data().to_vec() }
    }

    pub fn to_matrix(&self) -> CliResult<DenseMatrix> {
        Ok(DenseMatrix::from_vec(self.rows, self.cols, self.data.clone())?)
    }
}

/// ReLU network weights, one entry per layer; `weights[i]` is row-major
/// out×in, `layer_dims` runs input to output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpJson {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<MatrixJson>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpJson {
    pub fn from_map(map: &MlpFeatureMap) -> Self {
        MlpJson {
            layer_dims: map.layer_dims(),
            weights: (0..map.num_layers())
                .map(|i| MatrixJson::from_matrix(map.layer_weights(i)))
                .collect(),
            biases: (0..map.num_layers()).map(|i| map.layer_biases(i).to_vec()).collect(),
        }
    }

    pub fn to_map(&self) -> CliResult<MlpFeatureMap> {
        let weights = self.weights.iter().map(|w| w.to_matrix()).collect::<CliResult<Vec<_>>>()?;
        Ok(MlpFeatureMap::from_parts(weights, self.biases.clone())?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbfJson {
    pub centers: MatrixJson,
    pub bandwidth: f64,
}

impl RbfJson {
    pub fn from_dict(d: &RbfDictionary) -> Self {
        RbfJson { centers: MatrixJson::from_matrix(d.centers()), bandwidth: d.bandwidth() }
    }

    pub fn to_dict(&self) -> CliResult<RbfDictionary> {
        Ok(RbfDictionary::new(self.centers.to_matrix()?, self.bandwidth)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfigJson {
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub outer_iterations: usize,
    pub stage1_inner_steps: usize,
    pub stage2_steps: usize,
    pub batch_size: Option<usize>,
    pub convergence_rtol: f64,
    pub seed: u64,
}

impl TrainConfigJson {
    pub fn from_config(c: &TrainConfig) -> Self {
        TrainConfigJson {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            learning_rate: c.learning_rate,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_eps: c.adam_eps,
            outer_iterations: c.outer_iterations,
            stage1_inner_steps: c.stage1_inner_steps,
            stage2_steps: c.stage2_steps,
            batch_size: c.batch_size,
            convergence_rtol: c.convergence_rtol,
            seed: c.seed,
        }
    }

    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            learning_rate: self.learning_rate,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            outer_iterations: self.outer_iterations,
            stage1_inner_steps: self.stage1_inner_steps,
            stage2_steps: self.stage2_steps,
            batch_size: self.batch_size,
            convergence_rtol: self.convergence_rtol,
            seed: self.seed,
        }
    }
}

impl Default for TrainConfigJson {
    fn default() -> Self {
        TrainConfigJson::from_config(&TrainConfig::default())
    }
}

/// On-disk model. Deep models always carry their stage-1 weights; fixed
/// models fitted through the kernelized dual route never materialize V̂,
/// so `v` is absent there and only structural/bridge prediction works
/// after reload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelJson {
    Dfpv {
        phi_a1: MlpJson,
        phi_z: MlpJson,
        psi_a2: MlpJson,
        psi_w: MlpJson,
        v: MatrixJson,
        u: Vec<f64>,
        mu_w: Vec<f64>,
        train: TrainConfigJson,
    },
    FixedFeature {
        phi_a1: RbfJson,
        phi_z: RbfJson,
        psi_a2: RbfJson,
        psi_w: RbfJson,
        v: Option<MatrixJson>,
        u: Vec<f64>,
        mu_w: Vec<f64>,
        lambda1: f64,
        lambda2: f64,
        losses: (f64, f64),
    },
}

/// A reloaded model, either flavor.
pub enum LoadedModel {
    Dfpv(DfpvModel),
    FixedFeature(FixedFeatureModel),
}

impl LoadedModel {
    pub fn predict_structural(&self, a: &[f64]) -> CliResult<f64> {
        match self {
            LoadedModel::Dfpv(m) => Ok(m.predict_structural(a)?),
            LoadedModel::FixedFeature(m) => Ok(m.predict_structural(a)?),
        }
    }
}

impl ModelJson {
    pub fn from_dfpv(model: &DfpvModel) -> Self {
        let nets = model.nets();
        ModelJson::Dfpv {
            phi_a1: MlpJson::from_map(&nets.phi_a1),
            phi_z: MlpJson::from_map(&nets.phi_z),
            psi_a2: MlpJson::from_map(&nets.psi_a2),
            psi_w: MlpJson::from_map(&nets.psi_w),
            v: MatrixJson::from_matrix(model.v()),
            u: model.u().to_vec(),
            mu_w: model.mu_w().to_vec(),
            train: TrainConfigJson::from_config(model.config()),
        }
    }

    pub fn from_fixed(model: &FixedFeatureModel) -> Self {
        let dicts = model.dicts();
        ModelJson::FixedFeature {
            phi_a1: RbfJson::from_dict(&dicts.phi_a1),
            phi_z: RbfJson::from_dict(&dicts.phi_z),
            psi_a2: RbfJson::from_dict(&dicts.psi_a2),
            psi_w: RbfJson::from_dict(&dicts.psi_w),
            v: model.v().map(MatrixJson::from_matrix),
            u: model.u().to_vec(),
            mu_w: model.mu_w().to_vec(),
            lambda1: model.lambdas().0,
            lambda2: model.lambdas().1,
            losses: model.losses(),
        }
    }

    pub fn to_model(&self) -> CliResult<LoadedModel> {
        match self {
            ModelJson::Dfpv { phi_a1, phi_z, psi_a2, psi_w, v, u, mu_w, train } => {
                let nets = DfpvNets {
                    phi_a1: phi_a1.to_map()?,
                    phi_z: phi_z.to_map()?,
                    psi_a2: psi_a2.to_map()?,
                    psi_w: psi_w.to_map()?,
                };
                let model = DfpvModel::from_parts(
                    nets,
                    v.to_matrix()?,
                    u.clone(),
                    mu_w.clone(),
                    train.to_config(),
                )?;
                Ok(LoadedModel::Dfpv(model))
            }
            ModelJson::FixedFeature { phi_a1, phi_z, psi_a2, psi_w, v, u, mu_w, lambda1, lambda2, losses } => {
                let dicts = FixedDictionaries {
                    phi_a1: phi_a1.to_dict()?,
                    phi_z: phi_z.to_dict()?,
                    psi_a2: psi_a2.to_dict()?,
                    psi_w: psi_w.to_dict()?,
                };
                let v = v.as_ref().map(|m| m.to_matrix()).transpose()?;
                let model = FixedFeatureModel::from_parts(
                    dicts,
                    v,
                    u.clone(),
                    mu_w.clone(),
                    *lambda1,
                    *lambda2,
                    *losses,
                )?;
                Ok(LoadedModel::FixedFeature(model))
            }
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| validation(format!("model serialization: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let raw = fs::read_to_string(path)
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| validation(format!("{}: {e}", path.display())))
    }
}

/// Dataset sidecar: enough metadata to regenerate or sanity-check the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarJson {
    pub dgp: String,
    pub seed: u64,
    pub stage1_rows: usize,
    pub stage2_rows: usize,
    /// How Gaussian noise scales are read: "variance" or "stddev".
    pub noise_convention: String,
}

/// Truth CSV: one row per grid point, full-precision floats.
pub fn write_truth_csv(path: &Path, truth: &GroundTruth) -> CliResult<()> {
    let mut out = Vec::new();
    let dim = truth.grid.cols();
    let header: Vec<String> = (0..dim)
        .map(|j| format!("a_{j}"))
        .chain(["f_struct".to_string(), "mc_stderr".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..truth.grid.rows() {
        let mut fields: Vec<String> = truth.grid.row(i).iter().map(|v| v.to_string()).collect();
        fields.push(truth.values[i].to_string());
        fields.push(truth.mc_stderr[i].to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> CliResult<GroundTruth> {
    let raw = fs::read_to_string(path)
        .map_err(|e| validation(format!("{}: {e}", path.display())))?;
    let mut lines = raw.lines();
    let header = lines.next().ok_or_else(|| validation("truth CSV is empty"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "f_struct" || cols[cols.len() - 1] != "mc_stderr" {
        return Err(validation("truth CSV header must end with f_struct,mc_stderr"));
    }
    let dim = cols.len() - 2;
    let mut grid_rows = Vec::new();
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(validation(format!("truth CSV row {} has {} fields", lineno + 2, fields.len())));
        }
        let parse = |s: &str| -> CliResult<f64> {
            s.parse::<f64>().map_err(|e| validation(format!("truth CSV row {}: {e}", lineno + 2)))
        };
        grid_rows.push(fields[..dim].iter().map(|s| parse(s)).collect::<CliResult<Vec<f64>>>()?);
        values.push(parse(fields[dim])?);
        stderr.push(parse(fields[dim + 1])?);
    }
    let grid = DenseMatrix::from_rows(&grid_rows)?;
    Ok(GroundTruth::new(grid, values, stderr, 0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcl_core::datagen::{gen_mastouri, mastouri_truth};
    use pcl_core::two_stage::{fit_fixed_feature, train_dfpv, DfpvArch};

    #[test]
    fn dfpv_model_roundtrips_bitwise() {
        let data = gen_mastouri(40, 40, 3).unwrap();
        let config = TrainConfig { outer_iterations: 2, ..TrainConfig::default() };
        let (model, _) = train_dfpv(&data, &DfpvArch::uniform(&[6, 4]), &config).unwrap();
        let json = ModelJson::from_dfpv(&model);
        let text = serde_json::to_string(&json).unwrap();
        let back: ModelJson = serde_json::from_str(&text).unwrap();
        let loaded = back.to_model().unwrap();
        for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let direct = model.predict_structural(&[a]).unwrap();
            let reloaded = loaded.predict_structural(&[a]).unwrap();
            assert_eq!(direct.to_bits(), reloaded.to_bits(), "a = {a}");
        }
    }

    #[test]
    fn fixed_model_roundtrips_bitwise_without_v() {
        let data = gen_mastouri(30, 30, 4).unwrap();
        let dicts = FixedDictionaries::from_stage1(&data, 30, 4).unwrap();
        // 30 centers each: kron dimension 900 forces the dual route, so v is absent
        let model = fit_fixed_feature(&data, &dicts, 0.1, 0.1).unwrap();
        assert!(model.v().is_none());
        let json = ModelJson::from_fixed(&model);
        let text = serde_json::to_string(&json).unwrap();
        let back: ModelJson = serde_json::from_str(&text).unwrap();
        let loaded = back.to_model().unwrap();
        for a in [0.0, 0.5, 1.0] {
            assert_eq!(
                model.predict_structural(&[a]).unwrap().to_bits(),
                loaded.predict_structural(&[a]).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn truth_csv_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        let truth = mastouri_truth().unwrap();
        write_truth_csv(&path, &truth).unwrap();
        let back = read_truth_csv(&path).unwrap();
        assert_eq!(back.grid.data(), truth.grid.data());
        assert_eq!(back.values, truth.values);
        assert_eq!(back.mc_stderr, truth.mc_stderr);
    }
}
