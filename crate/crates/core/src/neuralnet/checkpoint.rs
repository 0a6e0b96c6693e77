use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseNet, Layer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDoc {
    pub spec_hash: String,
    pub layers: Vec<LayerDoc>,
}

impl CheckpointDoc {
    pub fn from_net(net: &DenseNet) -> Self {
        Self {
            spec_hash: net.spec_hash(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerDoc {
                    rows: l.rows,
                    cols: l.cols,
                    activation: l.activation,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn into_net(self) -> Result<DenseNet> {
        let layers = self
            .layers
            .into_iter()
            .map(|d| Layer { rows: d.rows, cols: d.cols, weights: d.weights, bias: d.bias, activation: d.activation })
            .collect();
        let net = DenseNet::from_layers(layers).map_err(|e| Error::IncompatibleCheckpoint(e.to_string()))?;
        if net.spec_hash() != self.spec_hash {
            return Err(Error::IncompatibleCheckpoint(format!(
                "recorded hash {} does not match layers {}",
                self.spec_hash,
                net.spec_string()
            )));
        }
        if !net.is_finite() {
            return Err(Error::IncompatibleCheckpoint("non-finite parameters".into()));
        }
        Ok(net)
    }
}

pub fn save_checkpoint(net: &DenseNet) -> String {
    serde_json::to_string(&CheckpointDoc::from_net(net)).expect("plain data serializes")
}

pub fn load_checkpoint(doc: &str) -> Result<DenseNet> {
    let parsed: CheckpointDoc = serde_json::from_str(doc).map_err(|e| Error::CheckpointParse(e.to_string()))?;
    parsed.into_net()
}

/// Loads and additionally requires the architecture of `expected_hash`.
pub fn load_checkpoint_expecting(doc: &str, expected_hash: &str) -> Result<DenseNet> {
    let net = load_checkpoint(doc)?;
    if net.spec_hash() != expected_hash {
        return Err(Error::IncompatibleCheckpoint(format!("architecture {} is not the expected one", net.spec_string())));
    }
    Ok(net)
}
