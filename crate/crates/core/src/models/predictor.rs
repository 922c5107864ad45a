use log::{debug, info};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, LossKind, ModelRole, TrainingMetadata};
use super::network::{ArchitectureSpec, Gradients, Network};
use super::training::{EarlyStopping, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{edge_homophily_degree, Edge, LabeledGraph};
use crate::metrics::roc_auc;
use crate::nn::{
    adam_step, bce_loss, cosine_with_grad, sigmoid, wbce_loss, AdamState, DenseMatrix, Propagator,
};
use crate::rng::rng_for;

/// Edges labelled `true` when both endpoints share a class.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTrainingSet {
    pub edges: Vec<Edge>,
    pub labels: Vec<bool>,
    /// Share of heterophilic edges, `|E_het| / |E|`.
    pub alpha: f64,
}

pub fn build_edge_training_set(graph: &LabeledGraph) -> Result<EdgeTrainingSet> {
    let labels = graph.edge_homophily_mask()?;
    if labels.is_empty() {
        return Err(Error::InvalidGraph("training graph has no edges".into()));
    }
    let het = labels.iter().filter(|&&h| !h).count();
    Ok(EdgeTrainingSet {
        edges: graph.edges().to_vec(),
        alpha: het as f64 / labels.len() as f64,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLoss {
    /// Class-weighted by α.
    #[default]
    Wbce,
    Bce,
}

impl EdgeLoss {
    fn evaluate(self, scores: &[f64], labels: &[bool], alpha: f64) -> Result<(f64, Vec<f64>)> {
        match self {
            EdgeLoss::Wbce => wbce_loss(scores, labels, alpha),
            EdgeLoss::Bce => bce_loss(scores, labels),
        }
    }

    fn kind(self) -> LossKind {
        match self {
            EdgeLoss::Wbce => LossKind::Wbce,
            EdgeLoss::Bce => LossKind::Bce,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub train: TrainConfig,
    pub loss: EdgeLoss,
    /// Share of training edges held out for early stopping when no
    /// validation graph is given.
    pub holdout_fraction: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            loss: EdgeLoss::Wbce,
            holdout_fraction: 0.1,
        }
    }
}

/// Per-edge homophily probabilities, aligned with a graph's edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EdgeScoreTable(Vec<f64>);

impl EdgeScoreTable {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvalidParameter(format!("edge score {s} outside [0, 1]")));
        }
        Ok(Self(scores))
    }

    /// Oracle scores: 1 for same-class edges, 0 otherwise.
    pub fn oracle(graph: &LabeledGraph) -> Result<Self> {
        Ok(Self(
            graph
                .edge_homophily_mask()?
                .into_iter()
                .map(|h| if h { 1.0 } else { 0.0 })
                .collect(),
        ))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for EdgeScoreTable {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EdgeScoreTable> for Vec<f64> {
    fn from(t: EdgeScoreTable) -> Self {
        t.0
    }
}

fn edge_scores(embeddings: &DenseMatrix, edges: &[Edge]) -> Vec<f64> {
    edges
        .iter()
        .map(|&(u, v)| sigmoid(cosine_with_grad(embeddings.row(u), embeddings.row(v)).0))
        .collect()
}

/// Loss of `σ(cos(z_u, z_v))` against `labels` and its gradient w.r.t. the embeddings.
fn edge_loss_and_grad(
    embeddings: &DenseMatrix,
    edges: &[Edge],
    labels: &[bool],
    loss: EdgeLoss,
    alpha: f64,
) -> Result<(f64, DenseMatrix)> {
    let mut cos = Vec::with_capacity(edges.len());
    let mut partials = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        let (c, du, dv) = cosine_with_grad(embeddings.row(u), embeddings.row(v));
        cos.push(c);
        partials.push((du, dv));
    }
    let scores: Vec<f64> = cos.iter().map(|&c| sigmoid(c)).collect();
    let (value, d_scores) = loss.evaluate(&scores, labels, alpha)?;
    let mut grad = DenseMatrix::zeros(embeddings.rows(), embeddings.cols());
    for (k, &(u, v)) in edges.iter().enumerate() {
        let s = scores[k];
        let dc = d_scores[k] * s * (1.0 - s);
        let (du, dv) = &partials[k];
        for (g, d) in grad.row_mut(u).iter_mut().zip(du) {
            *g += dc * d;
        }
        for (g, d) in grad.row_mut(v).iter_mut().zip(dv) {
            *g += dc * d;
        }
    }
    Ok((value, grad))
}

/// Edge loss through the encoder on `graph`, with its parameter gradient.
pub fn predictor_objective(
    network: &Network,
    graph: &LabeledGraph,
    edges: &[Edge],
    labels: &[bool],
    loss: EdgeLoss,
    alpha: f64,
) -> Result<(f64, Gradients)> {
    let prop = network.propagator(graph, None)?;
    let (z, cache) = network.forward_with(&prop, graph.features(), true)?;
    let (value, grad) = edge_loss_and_grad(&z, edges, labels, loss, alpha)?;
    Ok((value, network.backward(&prop, &cache.expect("cached"), &grad)?))
}

struct EdgeValidation<'a> {
    graph: &'a LabeledGraph,
    prop: Propagator,
    edges: Vec<Edge>,
    labels: Vec<bool>,
}

fn split_holdout(
    set: &EdgeTrainingSet,
    fraction: f64,
    seed: u64,
) -> (Vec<Edge>, Vec<bool>, Vec<Edge>, Vec<bool>) {
    let m = set.edges.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_for(seed, "predictor-holdout"));
    let held = if m < 2 {
        0
    } else {
        ((fraction * m as f64).ceil() as usize).clamp(1, m - 1)
    };
    let mut is_held = vec![false; m];
    for &k in &order[..held] {
        is_held[k] = true;
    }
    let (mut te, mut tl, mut ve, mut vl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, &held) in is_held.iter().enumerate() {
        if held {
            ve.push(set.edges[k]);
            vl.push(set.labels[k]);
        } else {
            te.push(set.edges[k]);
            tl.push(set.labels[k]);
        }
    }
    (te, tl, ve, vl)
}

/// Trains the node encoder so that `σ(cos(z_u, z_v))` predicts whether an
/// existing training edge is homophilic.
///
/// Early stopping monitors edge ROC-AUC on `val`'s edges, or on a held-out
/// share of the training edges when `val` is `None`.
pub fn train_homophily_predictor(
    train: &LabeledGraph,
    val: Option<&LabeledGraph>,
    spec: &ArchitectureSpec,
    config: &PredictorConfig,
    seed: u64,
) -> Result<Checkpoint> {
    let set = build_edge_training_set(train)?;
    if set.alpha == 0.0 || set.alpha == 1.0 {
        return Err(Error::DegenerateEdgeClasses { alpha: set.alpha });
    }
    if spec.input_dim() != train.feature_dim() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} features, architecture expects {}",
            train.feature_dim(),
            spec.input_dim()
        )));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(Error::InvalidParameter(format!(
            "holdout fraction {} outside [0, 1)",
            config.holdout_fraction
        )));
    }
    let mut network = Network::init(spec, seed)?;
    let prop = network.propagator(train, None)?;

    let (fit_edges, fit_labels, validation) = match val {
        Some(g) => {
            let vs = build_edge_training_set(g)?;
            let prop = network.propagator(g, None)?;
            let v = EdgeValidation {
                graph: g,
                prop,
                edges: vs.edges,
                labels: vs.labels,
            };
            (set.edges.clone(), set.labels.clone(), v)
        }
        None => {
            let (te, tl, ve, vl) = split_holdout(&set, config.holdout_fraction, seed);
            let v = EdgeValidation {
                graph: train,
                prop: prop.clone(),
                edges: ve,
                labels: vl,
            };
            (te, tl, v)
        }
    };
    if !fit_labels.iter().any(|&l| l) || fit_labels.iter().all(|&l| l) {
        return Err(Error::DegenerateEdgeClasses { alpha: set.alpha });
    }

    let mut adam = AdamState::new(config.train.adam, &network.parameter_sizes());
    let mut stopper = EarlyStopping::new(config.train.patience);
    let mut best = network.clone();
    let mut epochs_run = 0;
    for epoch in 0..config.train.max_epochs {
        let (z, cache) = network.forward_with(&prop, train.features(), true)?;
        if !z.is_finite() {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }
        let (loss, grad) = edge_loss_and_grad(&z, &fit_edges, &fit_labels, config.loss, set.alpha)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        stopper.loss_history.push(loss);
        epochs_run = epoch + 1;

        let vz = if std::ptr::eq(validation.graph, train) {
            z.clone()
        } else {
            network
                .forward_with(&validation.prop, validation.graph.features(), false)?
                .0
        };
        let vscores = edge_scores(&vz, &validation.edges);
        let auc = roc_auc(&vscores, &validation.labels).unwrap_or(f64::NAN);
        let vloss = config
            .loss
            .evaluate(&vscores, &validation.labels, set.alpha)?
            .0;
        if stopper.observe(epoch, auc, vloss) {
            best = network.clone();
        }
        if epoch % 50 == 0 {
            debug!("predictor epoch {epoch}: loss {loss:.5}, val auc {auc:.4}");
        }
        if stopper.should_stop(epoch) {
            break;
        }
        let grads = network.backward(&prop, &cache.expect("cached"), &grad)?;
        adam_step(&mut network.parameters_mut(), &grads.tensors(), &mut adam)?;
    }
    info!(
        "predictor trained: {epochs_run} epochs, best epoch {}, alpha {:.4}",
        stopper.best_epoch, set.alpha
    );
    Ok(Checkpoint {
        role: ModelRole::Predictor,
        network: best,
        metadata: TrainingMetadata {
            seed,
            loss: config.loss.kind(),
            epochs_run,
            best_epoch: stopper.best_epoch,
            best_validation: stopper.best_metric(),
            loss_tail: stopper.loss_tail(),
            alpha: Some(set.alpha),
            train_homophily: Some(edge_homophily_degree(train)?),
        },
    })
}

/// `σ(cos(z_u, z_v))` for every edge of `graph`, in edge-list order.
pub fn edge_homophily_scores(predictor: &Checkpoint, graph: &LabeledGraph) -> Result<EdgeScoreTable> {
    predictor.expect_role(ModelRole::Predictor)?;
    let z = predictor.network.forward(graph, None)?;
    EdgeScoreTable::new(edge_scores(&z, graph.edges()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::tiny;

    #[test]
    fn alpha_is_heterophilic_share() {
        // 7 same-class edges, 3 cross-class edges.
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1];
        let edges = [
            (0, 1), (0, 2), (0, 3), (1, 2), (1, 4), (5, 6), (6, 7),
            (0, 5), (1, 6), (4, 7),
        ];
        let set = build_edge_training_set(&tiny(8, &edges, labels)).unwrap();
        assert!((set.alpha - 0.3).abs() < 1e-15);
        assert_eq!(set.labels.iter().filter(|&&l| l).count(), 7);
    }

    #[test]
    fn all_homophilic_graph_is_degenerate() {
        let g = tiny(4, &[(0, 1), (2, 3)], vec![0, 0, 1, 1]);
        assert_eq!(build_edge_training_set(&g).unwrap().alpha, 0.0);
        let spec = ArchitectureSpec::new(super::super::ModelKind::Gcn, 1, 4, 2, 2).unwrap();
        let err = train_homophily_predictor(&g, None, &spec, &PredictorConfig::default(), 0);
        assert!(matches!(err, Err(Error::DegenerateEdgeClasses { .. })));
    }

    #[test]
    fn score_table_validates_range() {
        assert!(EdgeScoreTable::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(EdgeScoreTable::new(vec![1.5]).is_err());
        assert!(EdgeScoreTable::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn score_extremes() {
        let z = DenseMatrix::from_rows(&[
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![-1.0, -2.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let s = edge_scores(&z, &[(0, 1), (0, 2), (0, 3)]);
        assert!((s[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((s[1] - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert_eq!(s[2], 0.5);
    }

    #[test]
    fn holdout_split_is_seeded_and_disjoint() {
        let labels: Vec<bool> = (0..50).map(|k| k % 3 == 0).collect();
        let edges: Vec<Edge> = (0..50).map(|k| (k, k + 1)).collect();
        let set = EdgeTrainingSet { edges, labels, alpha: 0.5 };
        let a = split_holdout(&set, 0.1, 3);
        let b = split_holdout(&set, 0.1, 3);
        assert_eq!(a, b);
        assert_eq!(a.2.len(), 5);
        assert_eq!(a.0.len() + a.2.len(), 50);
    }
}
