//! Dataset files: one CSV holding both stages (a `stage` column tells
//! them apart) plus a JSON sidecar with generation metadata. Cells that a
//! stage does not carry (stage-1 outcomes, stage-2 proxies) are empty.

use std::fs;
use std::io::Write;
use std::path::Path;

use pcl_core::datagen::ObservationSet;
use pcl_core::numkit::DenseMatrix;

use crate::error::{validation, CliResult};
use crate::schema::SidecarJson;

pub fn write_dataset(csv_path: &Path, sidecar_path: &Path, data: &ObservationSet, sidecar: &SidecarJson) -> CliResult<()> {
    let (pa, pz, pw) = (data.stage1_a().cols(), data.stage1_z().cols(), data.stage1_w().cols());
    let mut out = Vec::new();
    let header: Vec<String> = ["stage".to_string()]
        .into_iter()
        .chain((0..pa).map(|j| format!("a_{j}")))
        .chain((0..pz).map(|j| format!("z_{j}")))
        .chain((0..pw).map(|j| format!("w_{j}")))
        .chain(["y".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;

    let fmt_row = |fields: Vec<String>| fields.join(",");
    for i in 0..data.m() {
        let mut fields = vec!["1".to_string()];
        fields.extend(data.stage1_a().row(i).iter().map(|v| v.to_string()));
        fields.extend(data.stage1_z().row(i).iter().map(|v| v.to_string()));
        fields.extend(data.stage1_w().row(i).iter().map(|v| v.to_string()));
        fields.push(data.stage1_y().map(|y| y[i].to_string()).unwrap_or_default());
        writeln!(out, "{}", fmt_row(fields))?;
    }
    for i in 0..data.n() {
        let mut fields = vec!["2".to_string()];
        fields.extend(data.stage2_a().row(i).iter().map(|v| v.to_string()));
        fields.extend(data.stage2_z().row(i).iter().map(|v| v.to_string()));
        match data.stage2_w() {
            Some(w) => fields.extend(w.row(i).iter().map(|v| v.to_string())),
            None => fields.extend(std::iter::repeat(String::new()).take(pw)),
        }
        fields.push(data.stage2_y()[i].to_string());
        writeln!(out, "{}", fmt_row(fields))?;
    }
    fs::write(csv_path, out)?;

    let json = serde_json::to_string_pretty(sidecar)
        .map_err(|e| validation(format!("sidecar serialization: {e}")))?;
    fs::write(sidecar_path, json)?;
    Ok(())
}

pub fn read_dataset(csv_path: &Path) -> CliResult<ObservationSet> {
    let raw = fs::read_to_string(csv_path)
        .map_err(|e| validation(format!("{}: {e}", csv_path.display())))?;
    let mut lines = raw.lines();
    let header = lines.next().ok_or_else(|| validation("dataset CSV is empty"))?;
    let names: Vec<&str> = header.split(',').collect();
    if names.first() != Some(&"stage") || names.last() != Some(&"y") {
        return Err(validation("dataset CSV header must start with stage and end with y"));
    }
    let count_prefix = |p: &str| names.iter().filter(|n| n.starts_with(p)).count();
    let (pa, pz, pw) = (count_prefix("a_"), count_prefix("z_"), count_prefix("w_"));
    if 2 + pa + pz + pw != names.len() {
        return Err(validation("dataset CSV has unrecognized columns"));
    }

    let mut s1 = StageRows::new(pa, pz, pw);
    let mut s2 = StageRows::new(pa, pz, pw);
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(validation(format!("dataset CSV row {} has {} fields", lineno + 2, fields.len())));
        }
        let bucket = match fields[0] {
            "1" => &mut s1,
            "2" => &mut s2,
            other => return Err(validation(format!("dataset CSV row {}: unknown stage {other:?}", lineno + 2))),
        };
        bucket.push(&fields[1..], lineno + 2)?;
    }
    let stage1_y = s1.y.iter().copied().collect::<Option<Vec<f64>>>();
    let stage2_w = s2.w_complete();
    let stage2_y = s2
        .y
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| validation("stage-2 rows must all carry outcomes"))?;

    let mut data = ObservationSet::new(
        DenseMatrix::from_rows(&s1.a)?,
        DenseMatrix::from_rows(&s1.z)?,
        DenseMatrix::from_rows(&s1.w_required()?)?,
        DenseMatrix::from_rows(&s2.a)?,
        DenseMatrix::from_rows(&s2.z)?,
        stage2_y,
    )?;
    if let Some(y) = stage1_y {
        data = data.with_stage1_y(y)?;
    }
    if let Some(w) = stage2_w {
        data = data.with_stage2_w(DenseMatrix::from_rows(&w)?)?;
    }
    Ok(data)
}

struct StageRows {
    pa: usize,
    pz: usize,
    pw: usize,
    a: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    w: Vec<Option<Vec<f64>>>,
    y: Vec<Option<f64>>,
}

impl StageRows {
    fn new(pa: usize, pz: usize, pw: usize) -> Self {
        StageRows { pa, pz, pw, a: Vec::new(), z: Vec::new(), w: Vec::new(), y: Vec::new() }
    }

    fn push(&mut self, fields: &[&str], lineno: usize) -> CliResult<()> {
        let parse_block = |block: &[&str]| -> CliResult<Option<Vec<f64>>> {
            if block.iter().all(|s| s.is_empty()) {
                return Ok(None);
            }
            block
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| validation(format!("dataset CSV row {lineno}: {e}")))
                })
                .collect::<CliResult<Vec<f64>>>()
                .map(Some)
        };
        let a = parse_block(&fields[..self.pa])?
            .ok_or_else(|| validation(format!("dataset CSV row {lineno}: treatment missing")))?;
        let z = parse_block(&fields[self.pa..self.pa + self.pz])?
            .ok_or_else(|| validation(format!("dataset CSV row {lineno}: proxy z missing")))?;
        let w = parse_block(&fields[self.pa + self.pz..self.pa + self.pz + self.pw])?;
        let y_field = fields[self.pa + self.pz + self.pw];
        let y = if y_field.is_empty() {
            None
        } else {
            Some(y_field.parse::<f64>().map_err(|e| validation(format!("dataset CSV row {lineno}: {e}")))?)
        };
        self.a.push(a);
        self.z.push(z);
        self.w.push(w);
        self.y.push(y);
        Ok(())
    }

    fn w_required(&self) -> CliResult<Vec<Vec<f64>>> {
        self.w
            .iter()
            .cloned()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| validation("stage-1 rows must all carry outcome proxies"))
    }

    /// Stage-2 proxies only when every row has them.
    fn w_complete(&self) -> Option<Vec<Vec<f64>>> {
        self.w.iter().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcl_core::datagen::{gen_demand, gen_mastouri};

    #[test]
    fn demand_dataset_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        let sidecar = dir.path().join("d.json");
        let data = gen_demand(20, 30, 9).unwrap();
        let meta = SidecarJson {
            dgp: "demand".into(),
            seed: 9,
            stage1_rows: 20,
            stage2_rows: 30,
            noise_convention: "variance".into(),
        };
        write_dataset(&csv, &sidecar, &data, &meta).unwrap();
        let back = read_dataset(&csv).unwrap();
        assert_eq!(back.m(), 20);
        assert_eq!(back.n(), 30);
        assert_eq!(back.stage1_a().data(), data.stage1_a().data());
        assert_eq!(back.stage2_y(), data.stage2_y());
        assert_eq!(back.stage1_y().unwrap(), data.stage1_y().unwrap());
        assert_eq!(
            back.stage2_w().unwrap().data(),
            data.stage2_w().unwrap().data()
        );
    }

    #[test]
    fn row_count_matches_both_stages() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        let data = gen_mastouri(15, 15, 2).unwrap();
        let meta = SidecarJson {
            dgp: "mastouri".into(),
            seed: 2,
            stage1_rows: 15,
            stage2_rows: 15,
            noise_convention: "variance".into(),
        };
        write_dataset(&csv, &dir.path().join("m.json"), &data, &meta).unwrap();
        let raw = fs::read_to_string(&csv).unwrap();
        assert_eq!(raw.lines().count(), 1 + 15 + 15);
    }
}
