use log::{debug, info};

use super::checkpoint::{Checkpoint, LossKind, ModelRole, TrainingMetadata};
use super::network::{ArchitectureSpec, Gradients, Network};
use super::training::{EarlyStopping, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::metrics::accuracy;
use crate::nn::{adam_step, cross_entropy_loss, softmax_rows, AdamState, DenseMatrix};

fn check_compatible(spec: &ArchitectureSpec, graph: &LabeledGraph) -> Result<()> {
    if spec.input_dim() != graph.feature_dim() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} features, architecture expects {}",
            graph.feature_dim(),
            spec.input_dim()
        )));
    }
    if let Some(labels) = graph.labels() {
        if let Some(&y) = labels.iter().find(|&&y| y >= spec.output_dim()) {
            return Err(Error::ShapeMismatch(format!(
                "label {y} but the architecture has {} outputs",
                spec.output_dim()
            )));
        }
    }
    Ok(())
}

/// Mean cross-entropy over all nodes and its parameter gradient.
pub fn classifier_objective(network: &Network, graph: &LabeledGraph) -> Result<(f64, Gradients)> {
    let labels = graph.require_labels()?;
    let prop = network.propagator(graph, None)?;
    let (logits, cache) = network.forward_with(&prop, graph.features(), true)?;
    let (loss, grad) = cross_entropy_loss(&logits, labels, None)?;
    let grads = network.backward(&prop, &cache.expect("cached"), &grad)?;
    Ok((loss, grads))
}

/// Trains a node classifier by full-batch Adam on cross-entropy.
///
/// Early stopping monitors accuracy on `val` (training accuracy when `val`
/// is `None`); the returned checkpoint holds the best epoch's parameters.
pub fn train_classifier(
    train: &LabeledGraph,
    val: Option<&LabeledGraph>,
    spec: &ArchitectureSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<Checkpoint> {
    let labels = train.require_labels()?;
    check_compatible(spec, train)?;
    let mut network = Network::init(spec, seed)?;
    let prop = network.propagator(train, None)?;
    let val = match val {
        Some(v) => {
            v.require_labels()?;
            check_compatible(spec, v)?;
            Some((v, network.propagator(v, None)?))
        }
        None => None,
    };
    let mut adam = AdamState::new(config.adam, &network.parameter_sizes());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = network.clone();
    let mut epochs_run = 0;

    for epoch in 0..config.max_epochs {
        let (logits, cache) = network.forward_with(&prop, train.features(), true)?;
        if !logits.is_finite() {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }
        let (loss, grad) = cross_entropy_loss(&logits, labels, None)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        stopper.loss_history.push(loss);
        epochs_run = epoch + 1;

        let (metric, val_loss) = match &val {
            Some((g, p)) => {
                let (out, _) = network.forward_with(p, g.features(), false)?;
                let y = g.require_labels()?;
                (accuracy(&out.argmax_rows(), y)?, cross_entropy_loss(&out, y, None)?.0)
            }
            None => (accuracy(&logits.argmax_rows(), labels)?, loss),
        };
        if stopper.observe(epoch, metric, val_loss) {
            best = network.clone();
        }
        if epoch % 50 == 0 {
            debug!("classifier epoch {epoch}: loss {loss:.5}, val metric {metric:.4}");
        }
        if stopper.should_stop(epoch) {
            break;
        }
        let grads = network.backward(&prop, &cache.expect("cached"), &grad)?;
        adam_step(&mut network.parameters_mut(), &grads.tensors(), &mut adam)?;
    }
    info!(
        "classifier trained: {epochs_run} epochs, best epoch {}",
        stopper.best_epoch
    );
    Ok(Checkpoint {
        role: ModelRole::Classifier,
        network: best,
        metadata: TrainingMetadata {
            seed,
            loss: LossKind::CrossEntropy,
            epochs_run,
            best_epoch: stopper.best_epoch,
            best_validation: stopper.best_metric(),
            loss_tail: stopper.loss_tail(),
            alpha: None,
            train_homophily: None,
        },
    })
}

/// Forward pass of a classifier; `edge_weights` align with `graph.edges()`.
pub fn classifier_logits(
    checkpoint: &Checkpoint,
    graph: &LabeledGraph,
    edge_weights: Option<&[f64]>,
) -> Result<DenseMatrix> {
    checkpoint.network.forward(graph, edge_weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub probabilities: DenseMatrix,
}

/// Softmax probabilities and arg-max labels (ties go to the lowest class).
pub fn predict_labels(
    checkpoint: &Checkpoint,
    graph: &LabeledGraph,
    edge_weights: Option<&[f64]>,
) -> Result<Prediction> {
    let logits = classifier_logits(checkpoint, graph, edge_weights)?;
    Ok(Prediction {
        labels: logits.argmax_rows(),
        probabilities: softmax_rows(&logits)?,
    })
}
