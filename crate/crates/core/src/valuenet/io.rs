//! JSON model files.
//!
//! ```json
//! {"format_version": 1, "time_grid": [...], "norm_table": {"center": [...], "scale": [...]},
//!  "activation_slope": 0.05, "W1": [[...], ...], "b1": [...], "w2": [...], "b2": 0.0, "gamma": [...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is bit-exact.
//! Non-finite entries (`null`, `"NaN"`, `"inf"`) parse but are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelError, ValueModel};
use crate::scenario::NormTable;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format_version: u64,
    time_grid: &'a [f64],
    norm_table: &'a NormTable,
    activation_slope: f64,
    #[serde(rename = "W1")]
    w1: Vec<&'a [f64]>,
    b1: &'a [f64],
    w2: &'a [f64],
    b2: f64,
    gamma: &'a [f64],
}

/// A number that may have been written as `null` or a string.
#[derive(Deserialize)]
#[serde(untagged)]
enum LenientNumber {
    Number(f64),
    Text(String),
    Null(()),
}

impl LenientNumber {
    fn value(&self) -> Result<f64, ModelError> {
        match self {
            LenientNumber::Number(x) => Ok(*x),
            LenientNumber::Null(()) => Ok(f64::NAN),
            LenientNumber::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| ModelError::Parse(format!("`{s}` is not a number"))),
        }
    }
}

#[derive(Deserialize)]
struct NormTableIn {
    center: Vec<LenientNumber>,
    scale: Vec<LenientNumber>,
}

#[derive(Deserialize)]
struct ModelFileIn {
    time_grid: Vec<LenientNumber>,
    norm_table: NormTableIn,
    #[serde(default)]
    activation_slope: Option<LenientNumber>,
    #[serde(rename = "W1")]
    w1: Vec<Vec<LenientNumber>>,
    b1: Vec<LenientNumber>,
    w2: Vec<LenientNumber>,
    b2: LenientNumber,
    gamma: Vec<LenientNumber>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

fn numbers(values: &[LenientNumber]) -> Result<Vec<f64>, ModelError> {
    values.iter().map(LenientNumber::value).collect()
}

fn require_finite(what: &str, values: &[f64]) -> Result<(), ModelError> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { what: what.to_string() })
    }
}

fn require_len(what: &str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { what: what.to_string(), expected, got })
    }
}

impl ValueModel {
    /// Pretty-printed JSON model document with a trailing newline.
    pub fn to_json(&self) -> Result<String, ModelError> {
        self.validate()?;
        let n = self.dims.n_features;
        let doc = ModelFileOut {
            format_version: FORMAT_VERSION,
            time_grid: &self.time_grid,
            norm_table: &self.norm_table,
            activation_slope: self.slope,
            w1: self.w1.chunks(n).collect(),
            b1: &self.b1,
            w2: &self.w2,
            b2: self.b2,
            gamma: &self.gamma,
        };
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| ModelError::Parse(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        if probe.format_version != FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                found: probe.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let doc: ModelFileIn =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;

        let time_grid = numbers(&doc.time_grid)?;
        let center = numbers(&doc.norm_table.center)?;
        let scale = numbers(&doc.norm_table.scale)?;
        let b1 = numbers(&doc.b1)?;
        let w2 = numbers(&doc.w2)?;
        let gamma = numbers(&doc.gamma)?;
        let b2 = doc.b2.value()?;
        let slope = match &doc.activation_slope {
            Some(s) => s.value()?,
            None => super::DEFAULT_SLOPE,
        };
        let w1_rows: Vec<Vec<f64>> =
            doc.w1.iter().map(|r| numbers(r)).collect::<Result<_, _>>()?;

        let n_hidden = w1_rows.len();
        let n_features = center.len();
        let n_times = time_grid.len();
        require_len("norm_table.scale", n_features, scale.len())?;
        require_len("gamma", n_times, gamma.len())?;
        require_len("b1", n_hidden, b1.len())?;
        require_len("w2", n_hidden, w2.len())?;
        for row in &w1_rows {
            require_len("W1 row", n_features, row.len())?;
        }

        require_finite("time_grid", &time_grid)?;
        require_finite("norm_table", &center)?;
        require_finite("norm_table", &scale)?;
        for row in &w1_rows {
            require_finite("W1", row)?;
        }
        require_finite("b1", &b1)?;
        require_finite("w2", &w2)?;
        require_finite("b2", &[b2])?;
        require_finite("gamma", &gamma)?;
        require_finite("activation_slope", &[slope])?;

        let norm_table = NormTable { center, scale };
        norm_table.validate().map_err(|e| ModelError::Parse(e.to_string()))?;

        Ok(Self {
            dims: ModelDims { n_features, n_hidden, n_times },
            w1: w1_rows.concat(),
            b1,
            w2,
            b2,
            gamma,
            slope,
            time_grid,
            norm_table,
        })
    }
}

pub fn save_model(model: &ValueModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, model.to_json()?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ValueModel, ModelError> {
    ValueModel::from_json(&fs::read_to_string(path)?)
}
