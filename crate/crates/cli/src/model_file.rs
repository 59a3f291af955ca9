//! Versioned JSON serialisation of fitted models.
//!
//! Floats are written in shortest round-trip form, so every finite value reads
//! back bit-for-bit. Fields this version does not know are kept and written
//! back unchanged.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use panelsurv_core::likelihood::Normalization;
use panelsurv_core::{Error as CoreError, FittedModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("model file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model format_version {found} (this build reads {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("invalid model: {0}")]
    Invalid(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub data_hash: String,
    pub config: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub psi: f64,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub free_mask: Vec<bool>,
    pub alpha: f64,
    pub kappa: f64,
    pub normalization: Normalization,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default)]
    pub clamp_count: usize,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ModelFile {
    pub fn new(model: &FittedModel, provenance: Provenance) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            psi: model.psi,
            beta: model.beta.clone(),
            delta: model.delta.clone(),
            free_mask: model.free_mask.clone(),
            alpha: model.alpha,
            kappa: model.kappa,
            normalization: model.normalization,
            loglik: model.loglik,
            converged: model.converged,
            iterations: model.iterations,
            clamp_count: model.clamp_count,
            provenance,
            extra: BTreeMap::new(),
        }
    }

    pub fn model(&self) -> FittedModel {
        FittedModel {
            psi: self.psi,
            beta: self.beta.clone(),
            delta: self.delta.clone(),
            free_mask: self.free_mask.clone(),
            alpha: self.alpha,
            kappa: self.kappa,
            loglik: self.loglik,
            converged: self.converged,
            iterations: self.iterations,
            normalization: self.normalization,
            clamp_count: self.clamp_count,
        }
    }

    pub fn validate(&self) -> Result<(), ModelFileError> {
        let m = self.model();
        m.validate()?;
        if !(m.psi.is_finite() && m.psi > 0.0) {
            return Err(CoreError::InvalidParameter { name: "psi", value: m.psi }.into());
        }
        if m.converged && !m.loglik.is_finite() {
            return Err(CoreError::InvalidParameter { name: "loglik", value: m.loglik }.into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ModelFileError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses and validates a model. Nothing is returned unless the whole
    /// document is well-formed.
    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let raw: Value = serde_json::from_str(text)?;
        let version = raw.get("format_version").and_then(Value::as_u64).unwrap_or(0);
        if version != u64::from(FORMAT_VERSION) {
            return Err(ModelFileError::Version { found: version });
        }
        let file: ModelFile = serde_json::from_value(raw)?;
        file.validate()?;
        Ok(file)
    }
}

pub fn write_model(file: &ModelFile, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, file.to_json()?).map_err(|source| ModelFileError::Io { path: path.into(), source })?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile, ModelFileError> {
    let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io { path: path.into(), source })?;
    ModelFile::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelFile {
        let model = FittedModel {
            psi: 1.0,
            beta: vec![0.1 + 0.2, -1.0000000000000002, 1e-300],
            delta: vec![0.3, 0.0, 5e-324],
            free_mask: vec![true, false, true],
            alpha: 0.822_634_142_476_599_8,
            kappa: 0.822_634_142_476_599_8,
            loglik: -1885.809_619_409_165_9,
            converged: true,
            iterations: 154,
            normalization: Normalization::UnitMean,
            clamp_count: 0,
        };
        ModelFile::new(&model, Provenance { seed: Some(7), data_hash: "ab".into(), config: serde_json::json!({}) })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let back = ModelFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        for (a, b) in back.beta.iter().zip(&f.beta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.delta[2].to_bits(), f.delta[2].to_bits());
    }

    #[test]
    fn unknown_fields_survive() {
        let mut v: Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        v["notes"] = serde_json::json!({"k": [1, 2]});
        let back = ModelFile::from_json(&v.to_string()).unwrap();
        assert_eq!(back.extra["notes"], serde_json::json!({"k": [1, 2]}));
        let again: Value = serde_json::from_str(&back.to_json().unwrap()).unwrap();
        assert_eq!(again["notes"], v["notes"]);
    }

    #[test]
    fn rejects_bad_documents() {
        let text = sample().to_json().unwrap();
        assert!(matches!(ModelFile::from_json(&text[..text.len() / 2]).unwrap_err(), ModelFileError::Parse(_)));
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["format_version"] = 2.into();
        assert!(matches!(ModelFile::from_json(&v.to_string()).unwrap_err(), ModelFileError::Version { found: 2 }));
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["alpha"] = serde_json::json!(-1.0);
        assert!(matches!(ModelFile::from_json(&v.to_string()).unwrap_err(), ModelFileError::Invalid(_)));
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["kappa"] = serde_json::json!(2.0);
        assert!(ModelFile::from_json(&v.to_string()).is_err());
    }
}
