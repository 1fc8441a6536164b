//! CSV/JSON emission and run manifests.
//!
//! CSV numbers use 17 significant digits (`{:.16e}`), which round-trips every
//! `f64`. JSON goes through `serde_json`, whose shortest representation also
//! round-trips.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiments::ExperimentResult;
use crate::model::PathGrid;
use crate::pursuit::SurvivalCurve;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_SCHEMA: u32 = 1;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Collects output files written under one directory.
pub struct OutputSet {
    dir: PathBuf,
    pub files: Vec<OutputDigest>,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(contents.as_bytes())?;
        self.files.push(OutputDigest {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }
}

pub fn grid_csv(grid: &PathGrid, with_noise: bool) -> String {
    let d = grid.d;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|k| format!("z{k}")));
    header.extend((1..=d).map(|k| format!("y{k}")));
    if with_noise {
        header.extend((1..=d).map(|k| format!("b{k}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..grid.len() {
        let mut cells = vec![num(grid.times[i])];
        cells.extend(grid.z_row(i).iter().map(|&x| num(x)));
        cells.extend(grid.y_row(i).iter().map(|&x| num(x)));
        if with_noise {
            cells.extend(grid.b_row(i).iter().map(|&x| num(x)));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn experiment_csv(res: &ExperimentResult) -> String {
    let mut out = String::from("label,scale,estimate,std_error,n_samples,censored_fraction\n");
    for r in &res.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label,
            num(r.scale),
            num(r.estimate),
            num(r.std_error),
            r.n_samples,
            num(r.censored_fraction)
        ));
    }
    out
}

pub fn survival_csv(curve: &SurvivalCurve) -> String {
    let mut out = String::from("t,survival,stderr\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{}\n",
            num(p.t),
            num(p.survival),
            num(p.std_error)
        ));
    }
    out
}

/// Pretty JSON with `tool_version` merged into the top-level object.
pub fn versioned_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("tool_version".into(), TOOL_VERSION.into());
    } else {
        v = serde_json::json!({ "tool_version": TOOL_VERSION, "data": v });
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// One JSON object per line, each carrying `tool_version`.
pub fn versioned_json_lines<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        let mut v = serde_json::to_value(r)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("tool_version".into(), TOOL_VERSION.into());
        }
        out.push_str(&serde_json::to_string(&v)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    /// Recomputes digests of the listed outputs relative to `dir`; returns the mismatches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter_map(|o| match fs::read(dir.join(&o.file)) {
                Ok(bytes) if sha256_hex(&bytes) == o.sha256 => None,
                Ok(_) => Some(format!("{}: digest mismatch", o.file)),
                Err(e) => Some(format!("{}: {e}", o.file)),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, -2.5, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn manifest_verification() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = OutputSet::new(dir.path()).unwrap();
        set.write("a.csv", "t\n1\n").unwrap();
        let m = RunManifest {
            schema_version: MANIFEST_SCHEMA,
            tool_version: TOOL_VERSION.into(),
            subcommand: "x".into(),
            config: serde_json::json!({}),
            master_seed: None,
            started_at: String::new(),
            finished_at: String::new(),
            outputs: set.files.clone(),
        };
        assert!(m.verify(dir.path()).is_empty());
        fs::write(dir.path().join("a.csv"), "t\n2\n").unwrap();
        assert_eq!(m.verify(dir.path()).len(), 1);
    }
}
