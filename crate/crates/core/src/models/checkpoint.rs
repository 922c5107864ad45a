use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ArchitectureSpec, DenseLayer, Network};
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Classifier,
    Predictor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    CrossEntropy,
    Wbce,
    Bce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub loss: LossKind,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Validation metric at `best_epoch` (accuracy or edge ROC-AUC).
    pub best_validation: Option<f64>,
    /// Training loss of the last epochs, oldest first.
    pub loss_tail: Vec<f64>,
    /// WBCE class weight, predictors only.
    pub alpha: Option<f64>,
    /// Edge homophily of the training graph, predictors only.
    pub train_homophily: Option<f64>,
}

/// Frozen trained network plus the record of how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub role: ModelRole,
    pub network: Network,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Tensor,
    bias: Tensor,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    role: ModelRole,
    spec: ArchitectureSpec,
    layers: Vec<LayerFile>,
    metadata: TrainingMetadata,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format_version: CHECKPOINT_VERSION,
            role: self.role,
            spec: self.network.spec().clone(),
            layers: self
                .network
                .layers()
                .iter()
                .map(|l| LayerFile {
                    weight: Tensor {
                        shape: vec![l.weight.rows(), l.weight.cols()],
                        data: l.weight.data().to_vec(),
                    },
                    bias: Tensor {
                        shape: vec![l.bias.len()],
                        data: l.bias.clone(),
                    },
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::json("checkpoint", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Read the version on its own first so an unknown layout is reported
        // as a version problem rather than a field error.
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let version: Version = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
        if version.format_version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (k, l) in file.layers.into_iter().enumerate() {
            let [rows, cols] = l.weight.shape[..] else {
                return Err(Error::InvalidCheckpoint(format!(
                    "layer {k}: weight shape {:?} is not 2-D",
                    l.weight.shape
                )));
            };
            if l.bias.shape != [l.bias.data.len()] {
                return Err(Error::InvalidCheckpoint(format!(
                    "layer {k}: bias shape {:?} does not match {} values",
                    l.bias.shape,
                    l.bias.data.len()
                )));
            }
            if rows * cols != l.weight.data.len() {
                return Err(Error::InvalidCheckpoint(format!(
                    "layer {k}: weight shape {rows}x{cols} holds {} values",
                    l.weight.data.len()
                )));
            }
            let weight = DenseMatrix::from_vec(rows, cols, l.weight.data)
                .map_err(|e| Error::InvalidCheckpoint(format!("layer {k}: {e}")))?;
            layers.push(DenseLayer {
                weight,
                bias: l.bias.data,
            });
        }
        Ok(Self {
            role: file.role,
            network: Network::from_layers(file.spec, layers)?,
            metadata: file.metadata,
        })
    }

    pub fn expect_role(&self, role: ModelRole) -> Result<()> {
        if self.role != role {
            return Err(Error::InvalidCheckpoint(format!(
                "expected a {role:?} checkpoint, found {:?}",
                self.role
            )));
        }
        Ok(())
    }
}

fn parse_error(text: &str, e: serde_json::Error) -> Error {
    let offset: usize = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + e.column();
    Error::InvalidCheckpoint(format!("parse error at byte offset {offset}: {e}"))
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::network::ModelKind;

    fn sample() -> Checkpoint {
        let spec = ArchitectureSpec::new(ModelKind::Gcn, 3, 5, 2, 2).unwrap();
        Checkpoint {
            role: ModelRole::Classifier,
            network: Network::init(&spec, 11).unwrap(),
            metadata: TrainingMetadata {
                seed: 11,
                loss: LossKind::CrossEntropy,
                epochs_run: 0,
                best_epoch: 0,
                best_validation: None,
                loss_tail: vec![0.1 + 0.2],
                alpha: None,
                train_homophily: None,
            },
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn truncated_text_reports_offset() {
        let text = sample().to_json().unwrap();
        let err = Checkpoint::from_json(&text[..text.len() / 2]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("byte offset"), "{msg}");
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = sample()
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            Checkpoint::from_json(&text),
            Err(Error::CheckpointVersion { found: 7, .. })
        ));
    }

    #[test]
    fn shape_corruption_is_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        value["layers"][0]["weight"]["shape"] = serde_json::json!([5, 3]);
        assert!(matches!(
            Checkpoint::from_json(&value.to_string()),
            Err(Error::InvalidCheckpoint(_))
        ));
        let mut value: serde_json::Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        value["spec"]["layer_dims"] = serde_json::json!([3, 6, 2]);
        assert!(Checkpoint::from_json(&value.to_string()).is_err());
    }
}
