//! Instance files and run manifests.
//!
//! An instance file is a JSON document
//! `{"schema": 1, "space": {..}, "scenarios": {"n", "u", "r"}, "provenance": {..}}`.
//! Scenario matrices are either arrays of rows or a packed block
//! `{"encoding": "base64-f64le", "data": ".."}` holding row-major
//! little-endian doubles.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::apps::AppParams;
use crate::engine::SolveConfig;
use crate::error::{Error, Result};
use crate::model::{DecisionSpace, Instance, Provenance, ScenarioSet};

pub const SCHEMA_VERSION: u32 = 1;

const PACKED_ENCODING: &str = "base64-f64le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matrix {
    Rows(Vec<Vec<f64>>),
    Packed { encoding: String, data: String },
}

impl Matrix {
    fn rows(values: &[f64], cols: usize) -> Self {
        Matrix::Rows(values.chunks(cols.max(1)).map(<[f64]>::to_vec).collect())
    }

    fn packed(values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Matrix::Packed { encoding: PACKED_ENCODING.into(), data: STANDARD.encode(bytes) }
    }

    fn into_flat(self, n: usize, cols: usize) -> Result<Vec<f64>> {
        let flat = match self {
            Matrix::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidInstance(format!("scenario matrix must be {n}x{cols}")));
                }
                rows.concat()
            }
            Matrix::Packed { encoding, data } => {
                if encoding != PACKED_ENCODING {
                    return Err(Error::InvalidInstance(format!("unknown matrix encoding '{encoding}'")));
                }
                let bytes = STANDARD.decode(data.as_bytes()).map_err(|e| Error::InvalidInstance(format!("bad base64 block: {e}")))?;
                if bytes.len() != n * cols * 8 {
                    return Err(Error::InvalidInstance(format!("packed block holds {} bytes, expected {}", bytes.len(), n * cols * 8)));
                }
                bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect()
            }
        };
        Ok(flat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBlock {
    pub n: usize,
    pub u: Matrix,
    pub r: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema: u32,
    pub space: DecisionSpace,
    pub scenarios: ScenarioBlock,
    #[serde(default)]
    pub provenance: Provenance,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance, packed: bool) -> Self {
        let s = inst.scenarios();
        let m = s.n_options();
        let (u, r) = if packed {
            (Matrix::packed(s.utilities()), Matrix::packed(s.rewards()))
        } else {
            (Matrix::rows(s.utilities(), m), Matrix::rows(s.rewards(), m))
        };
        Self {
            schema: SCHEMA_VERSION,
            space: inst.space().clone(),
            scenarios: ScenarioBlock { n: s.n(), u, r },
            provenance: inst.provenance().clone(),
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidInstance(format!("unsupported schema {}", self.schema)));
        }
        let n = self.scenarios.n;
        let m = self.space.n_options;
        let u = self.scenarios.u.into_flat(n, m)?;
        let r = self.scenarios.r.into_flat(n, m)?;
        Instance::new(self.space, ScenarioSet::new(n, m, u, r)?, self.provenance)
    }
}

pub fn instance_to_json(inst: &Instance, packed: bool) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from_instance(inst, packed))?)
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn save_instance(path: &Path, inst: &Instance, packed: bool) -> Result<()> {
    fs::write(path, instance_to_json(inst, packed)?)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    instance_from_json(&fs::read_to_string(path)?)
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<AppParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    pub solver: SolveConfig,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::e1;

    #[test]
    fn both_encodings_round_trip() {
        let inst = e1();
        for packed in [false, true] {
            let text = instance_to_json(&inst, packed).unwrap();
            assert_eq!(instance_from_json(&text).unwrap(), inst);
        }
    }

    #[test]
    fn rejects_wrong_schema_and_shape() {
        let mut file = InstanceFile::from_instance(&e1(), false);
        file.schema = 2;
        assert!(file.clone().into_instance().is_err());
        file.schema = 1;
        file.scenarios.n = 3;
        assert!(file.into_instance().is_err());
    }
}
