//! Dataset directory format: `manifest.json` describing the sample plus the
//! matrix payload, stored either as one `<id>.csv` grid per observation or
//! as a single long-format `matrices.csv` holding the upper triangles.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use swm_core::linalg::SpdMatrix;
use swm_core::{Dataset64, Matrix64, SpdMatrix64};

use crate::error::{CliError, Result};
use crate::jsonio::{self, fmt_f64};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STACKED_FILE: &str = "matrices.csv";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadFormat {
    PerMatrix,
    Stacked,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub n: usize,
    pub p: usize,
    pub payload: PayloadFormat,
    pub ids: Vec<String>,
    /// Which observations were repaired from semidefinite to definite when
    /// the dataset was first constructed. Provenance only: stored payloads
    /// hold the repaired values and load back without further jitter.
    pub jitter_applied: Vec<bool>,
}

impl Manifest {
    fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::validation(format!(
                "unsupported dataset format version {} (this build reads {})",
                self.format_version, FORMAT_VERSION
            )));
        }
        if self.n == 0 || self.p == 0 {
            return Err(CliError::validation("manifest n and p must be positive"));
        }
        if self.ids.len() != self.n {
            return Err(CliError::validation(format!(
                "manifest lists {} ids for n = {}",
                self.ids.len(),
                self.n
            )));
        }
        if self.jitter_applied.len() != self.n {
            return Err(CliError::validation(format!(
                "manifest lists {} jitter flags for n = {}",
                self.jitter_applied.len(),
                self.n
            )));
        }
        let mut seen = HashSet::new();
        for id in &self.ids {
            if id.is_empty() || id == "." || id == ".." || id.contains('/') || id.contains('\\') {
                return Err(CliError::validation(format!(
                    "matrix id {id:?} is not usable as a file name"
                )));
            }
            if !seen.insert(id) {
                return Err(CliError::validation(format!("duplicate matrix id {id:?}")));
            }
        }
        Ok(())
    }
}

pub fn save_dataset(dir: &Path, data: &Dataset64, payload: PayloadFormat) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", dir.display())))?;
    match payload {
        PayloadFormat::PerMatrix => {
            for i in 0..data.n() {
                write_matrix_csv(&dir.join(format!("{}.csv", data.id(i))), data.mat(i))?;
            }
        }
        PayloadFormat::Stacked => write_stacked_csv(&dir.join(STACKED_FILE), data)?,
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        n: data.n(),
        p: data.dim(),
        payload,
        ids: data.ids().to_vec(),
        jitter_applied: data.jitter_flags().to_vec(),
    };
    jsonio::write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset64, Manifest)> {
    let manifest: Manifest = jsonio::read_json(&dir.join(MANIFEST_FILE))?;
    manifest.validate()?;
    let matrices = match manifest.payload {
        PayloadFormat::PerMatrix => {
            let mut mats = Vec::with_capacity(manifest.n);
            for id in &manifest.ids {
                let path = dir.join(format!("{id}.csv"));
                let m = read_matrix_csv(&path, manifest.p)?;
                mats.push(spd_from_matrix(&m, &path)?);
            }
            mats
        }
        PayloadFormat::Stacked => read_stacked_csv(&dir.join(STACKED_FILE), &manifest)?,
    };
    let data = Dataset64::with_ids(matrices, manifest.ids.clone())?;
    Ok((data, manifest))
}

fn spd_from_matrix(m: &Matrix64, path: &Path) -> Result<SpdMatrix64> {
    SpdMatrix::from_matrix(m)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn write_matrix_csv(path: &Path, m: &SpdMatrix64) -> Result<()> {
    let p = m.dim();
    let mut out = String::new();
    for i in 0..p {
        for j in 0..p {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(m.at(i, j)));
        }
        out.push('\n');
    }
    fs::write(path, out)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

/// Reads a plain `dim x dim` grid of comma-separated decimals.
pub fn read_matrix_csv(path: &Path, dim: usize) -> Result<Matrix64> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::with_capacity(dim);
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(dim);
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::validation(format!(
                    "{} line {}: cannot parse {field:?} as a number",
                    path.display(),
                    lineno + 1
                ))
            })?;
            row.push(v);
        }
        if row.len() != dim {
            return Err(CliError::validation(format!(
                "{} line {}: expected {dim} columns, found {}",
                path.display(),
                lineno + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() != dim {
        return Err(CliError::validation(format!(
            "{}: expected {dim} rows, found {}",
            path.display(),
            rows.len()
        )));
    }
    Ok(Matrix64::from_rows(rows)?)
}

fn write_stacked_csv(path: &Path, data: &Dataset64) -> Result<()> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "id,row_index,col_index,value")
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    let p = data.dim();
    for i in 0..data.n() {
        let m = data.mat(i);
        for j in 0..p {
            for h in j..p {
                writeln!(out, "{},{},{},{}", data.id(i), j, h, fmt_f64(m.at(j, h))).map_err(
                    |e| CliError::validation(format!("cannot write {}: {e}", path.display())),
                )?;
            }
        }
    }
    out.flush()
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn read_stacked_csv(path: &Path, manifest: &Manifest) -> Result<Vec<SpdMatrix64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot open {}: {e}", path.display())))?;
    let bad = |lineno: usize, msg: String| {
        CliError::validation(format!("{} line {}: {msg}", path.display(), lineno + 1))
    };
    let index: HashMap<&str, usize> = manifest
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let (n, p) = (manifest.n, manifest.p);
    let mut grids: Vec<Vec<Option<f64>>> = vec![vec![None; p * p]; n];
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "id,row_index,col_index,value" => {}
        other => {
            return Err(bad(
                other.map_or(0, |(l, _)| l),
                "expected header id,row_index,col_index,value".into(),
            ))
        }
    }
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(lineno, format!("expected 4 fields, found {}", fields.len())));
        }
        let &mat = index
            .get(fields[0].trim())
            .ok_or_else(|| bad(lineno, format!("unknown matrix id {:?}", fields[0].trim())))?;
        let j: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| bad(lineno, format!("bad row_index {:?}", fields[1])))?;
        let h: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(lineno, format!("bad col_index {:?}", fields[2])))?;
        let v: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| bad(lineno, format!("bad value {:?}", fields[3])))?;
        if j > h || h >= p {
            return Err(bad(
                lineno,
                format!("indices ({j}, {h}) are not an upper-triangle position for p = {p}"),
            ));
        }
        if grids[mat][j * p + h].is_some() {
            return Err(bad(lineno, format!("duplicate entry ({j}, {h})")));
        }
        grids[mat][j * p + h] = Some(v);
        grids[mat][h * p + j] = Some(v);
    }
    let mut mats = Vec::with_capacity(n);
    for (i, grid) in grids.into_iter().enumerate() {
        let mut rows = vec![vec![0.0; p]; p];
        for j in 0..p {
            for h in 0..p {
                rows[j][h] = grid[j * p + h].ok_or_else(|| {
                    CliError::validation(format!(
                        "{}: matrix {:?} is missing entry ({j}, {h})",
                        path.display(),
                        manifest.ids[i]
                    ))
                })?;
            }
        }
        mats.push(spd_from_matrix(&Matrix64::from_rows(rows)?, path)?);
    }
    Ok(mats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset64 {
        let mats = (0..3)
            .map(|i| {
                let d = 1.0 + 0.1 * i as f64;
                SpdMatrix::from_rows(vec![
                    vec![d, 0.3, 0.0],
                    vec![0.3, d + 0.5, 1.0 / 3.0],
                    vec![0.0, 1.0 / 3.0, d + 1.0],
                ])
                .unwrap()
            })
            .collect();
        Dataset64::new(mats).unwrap()
    }

    fn assert_same(a: &Dataset64, b: &Dataset64) {
        assert_eq!(a.n(), b.n());
        assert_eq!(a.dim(), b.dim());
        assert_eq!(a.ids(), b.ids());
        for i in 0..a.n() {
            for j in 0..a.dim() {
                for h in 0..a.dim() {
                    assert_eq!(a.mat(i).at(j, h).to_bits(), b.mat(i).at(j, h).to_bits());
                }
            }
        }
    }

    #[test]
    fn per_matrix_round_trip_is_exact() {
        let data = sample();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &data, PayloadFormat::PerMatrix).unwrap();
        let (back, manifest) = load_dataset(dir.path()).unwrap();
        assert_eq!(manifest.payload, PayloadFormat::PerMatrix);
        assert_eq!(manifest.jitter_applied, vec![false; 3]);
        assert_same(&data, &back);

        // Second hop through the other payload format stays exact.
        let dir2 = tempfile::tempdir().unwrap();
        save_dataset(dir2.path(), &back, PayloadFormat::Stacked).unwrap();
        let (back2, manifest2) = load_dataset(dir2.path()).unwrap();
        assert_eq!(manifest2.payload, PayloadFormat::Stacked);
        assert_same(&data, &back2);
    }

    #[test]
    fn asymmetric_per_matrix_payload_is_rejected() {
        let data = sample();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &data, PayloadFormat::PerMatrix).unwrap();
        let path = dir.path().join("m0001.csv");
        let mut m = data.mat(1).to_matrix();
        m[(0, 1)] += 0.5;
        let rows = (0..3)
            .map(|i| (0..3).map(|j| fmt_f64(m[(i, j)])).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n");
        fs::write(&path, rows).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
        assert!(err.to_string().contains("not symmetric"));
    }

    #[test]
    fn stacked_payload_reports_missing_and_duplicate_entries() {
        let data = sample();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &data, PayloadFormat::Stacked).unwrap();
        let path = dir.path().join(STACKED_FILE);
        let text = fs::read_to_string(&path).unwrap();

        let mut lines: Vec<&str> = text.lines().collect();
        let dropped = lines.remove(3);
        fs::write(&path, lines.join("\n")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("missing entry"));

        lines.insert(3, dropped);
        lines.push(dropped);
        fs::write(&path, lines.join("\n")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate entry"));
    }

    #[test]
    fn manifest_id_and_count_validation() {
        let data = sample();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &data, PayloadFormat::PerMatrix).unwrap();
        let manifest_path = dir.path().join(MANIFEST_FILE);
        let mut manifest: Manifest = jsonio::read_json(&manifest_path).unwrap();
        manifest.ids[0] = "../escape".into();
        jsonio::write_json(&manifest_path, &manifest).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("not usable as a file name"));

        manifest.ids[0] = "m0001".into();
        jsonio::write_json(&manifest_path, &manifest).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate matrix id"));
    }

    #[test]
    fn wrong_dimension_matrix_is_rejected() {
        let data = sample();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &data, PayloadFormat::PerMatrix).unwrap();
        fs::write(dir.path().join("m0002.csv"), "1.0,0.0\n0.0,1.0\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("expected 3 columns"));
    }
}
