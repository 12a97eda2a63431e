use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{Head, LayerSpec, MlpModel};
use crate::error::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// On-disk form of an [`MlpModel`]: row-major nested arrays.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub head: Head,
    pub layer_specs: Vec<LayerSpec>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&MlpModel> for ModelDocument {
    fn from(m: &MlpModel) -> Self {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            head: m.head,
            layer_specs: m.layers.clone(),
            weights: m
                .weights
                .iter()
                .map(|w| w.outer_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: m.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }
}

impl TryFrom<ModelDocument> for MlpModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported model schema version {}",
                doc.schema_version
            )));
        }
        let mut weights = Vec::with_capacity(doc.weights.len());
        for (i, rows) in doc.weights.into_iter().enumerate() {
            let r = rows.len();
            let c = rows.first().map_or(0, Vec::len);
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let w = Array2::from_shape_vec((r, c), flat)
                .map_err(|_| Error::validation(format!("ragged weight matrix in layer {i}")))?;
            weights.push(w);
        }
        let biases = doc.biases.into_iter().map(Array1::from).collect();
        MlpModel::from_parts(doc.layer_specs, weights, biases, doc.head)
    }
}

impl Serialize for MlpModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MlpModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDocument::deserialize(d)?;
        MlpModel::try_from(doc).map_err(serde::de::Error::custom)
    }
}
