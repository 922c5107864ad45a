//! Test-time structure transformation: homophily-weighted edges followed by
//! removal of the edges most confidently predicted to hurt the classifier.
//!
//! In a homophilic graph the harmful edges are the likely heterophilic ones
//! (high `1 - s`); in a heterophilic graph they are the likely homophilic
//! ones (high `s`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_homophily_degree, snapped_count, EdgeSubset, LabeledGraph, WeightedGraph};
use crate::models::{edge_homophily_scores, Checkpoint, EdgeScoreTable, ModelRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Homophilic,
    Heterophilic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformMode {
    Homophilic,
    Heterophilic,
    /// Decided from the predictor's training graph.
    #[default]
    Auto,
}

/// How `delta` selects the edges to drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterSemantics {
    /// Drop the `⌈δ·|E|⌉` most harmful edges.
    #[default]
    TopRatio,
    /// Drop every edge whose harm score is at least `δ`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub mode: TransformMode,
    pub delta: f64,
    pub enable_weighting: bool,
    pub enable_filtering: bool,
    pub semantics: FilterSemantics,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            mode: TransformMode::Auto,
            delta: 0.3,
            enable_weighting: true,
            enable_filtering: true,
            semantics: FilterSemantics::TopRatio,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside [0, 1)")));
    }
    Ok(())
}

pub fn heterophily_scores(scores: &EdgeScoreTable) -> EdgeScoreTable {
    EdgeScoreTable::new(scores.values().iter().map(|s| 1.0 - s).collect())
        .expect("complement of a valid score stays in [0, 1]")
}

fn check_aligned(edges: usize, scores: &EdgeScoreTable) -> Result<()> {
    if scores.len() != edges {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for {edges} edges",
            scores.len()
        )));
    }
    Ok(())
}

/// Edge weights `s` (homophilic) or `1 - s` (heterophilic).
pub fn build_weighted_graph(
    graph: &LabeledGraph,
    scores: &EdgeScoreTable,
    regime: Regime,
) -> Result<WeightedGraph> {
    check_aligned(graph.num_edges(), scores)?;
    let weights = match regime {
        Regime::Homophilic => scores.values().to_vec(),
        Regime::Heterophilic => heterophily_scores(scores).values().to_vec(),
    };
    WeightedGraph::new(graph.clone(), weights)
}

/// How harmful each edge is believed to be under `regime`.
pub fn harm_scores(scores: &EdgeScoreTable, regime: Regime) -> Vec<f64> {
    match regime {
        Regime::Homophilic => heterophily_scores(scores).values().to_vec(),
        Regime::Heterophilic => scores.values().to_vec(),
    }
}

/// Number of edges top-ratio filtering removes: `min(⌈δ·m⌉, m)`.
pub fn removal_count(delta: f64, num_edges: usize) -> usize {
    (snapped_count(delta, num_edges).ceil() as usize).min(num_edges)
}

/// Indices (ascending) of the edges `filter_edges` would remove.
pub fn edges_to_remove(
    scores: &EdgeScoreTable,
    regime: Regime,
    delta: f64,
    semantics: FilterSemantics,
) -> Result<Vec<usize>> {
    check_delta(delta)?;
    let harm = harm_scores(scores, regime);
    let mut removed: Vec<usize> = match semantics {
        FilterSemantics::Threshold => (0..harm.len()).filter(|&k| harm[k] >= delta).collect(),
        FilterSemantics::TopRatio => {
            let k = removal_count(delta, harm.len());
            let mut order: Vec<usize> = (0..harm.len()).collect();
            // Stable sort keeps ascending edge index among equal scores.
            order.sort_by(|&a, &b| harm[b].total_cmp(&harm[a]));
            order.truncate(k);
            order
        }
    };
    removed.sort_unstable();
    Ok(removed)
}

/// Removes the `⌈δ·|E|⌉` most harmful edges; nodes, features and the
/// remaining edges' weights are untouched.
pub fn filter_edges<G: EdgeSubset>(
    graph: &G,
    scores: &EdgeScoreTable,
    regime: Regime,
    delta: f64,
) -> Result<G> {
    filter_edges_with(graph, scores, regime, delta, FilterSemantics::TopRatio)
}

pub fn filter_edges_with<G: EdgeSubset>(
    graph: &G,
    scores: &EdgeScoreTable,
    regime: Regime,
    delta: f64,
    semantics: FilterSemantics,
) -> Result<G> {
    check_aligned(graph.edge_list().len(), scores)?;
    let removed = edges_to_remove(scores, regime, delta, semantics)?;
    let mut keep = vec![true; graph.edge_list().len()];
    for k in removed {
        keep[k] = false;
    }
    Ok(graph.retain_edges(&keep))
}

/// Homophilic iff the training graph's edge homophily is at least 0.5.
pub fn resolve_mode(train: &LabeledGraph) -> Result<Regime> {
    Ok(regime_for_homophily(edge_homophily_degree(train)?))
}

pub fn regime_for_homophily(hd: f64) -> Regime {
    if hd >= 0.5 {
        Regime::Homophilic
    } else {
        Regime::Heterophilic
    }
}

/// The regime a transform run uses: fixed by `config.mode`, or read from the
/// predictor's training homophily in auto mode.
pub fn regime_for(config: &TransformConfig, predictor: &Checkpoint) -> Result<Regime> {
    match config.mode {
        TransformMode::Homophilic => Ok(Regime::Homophilic),
        TransformMode::Heterophilic => Ok(Regime::Heterophilic),
        TransformMode::Auto => predictor
            .metadata
            .train_homophily
            .map(regime_for_homophily)
            .ok_or_else(|| {
                Error::InvalidParameter(
                    "mode auto needs a predictor checkpoint that records its training homophily"
                        .into(),
                )
            }),
    }
}

/// Everything a transform run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutcome {
    pub graph: WeightedGraph,
    pub regime: Regime,
    pub scores: EdgeScoreTable,
    /// Indices into the input edge list of the removed edges.
    pub removed: Vec<usize>,
}

/// Scores, reweights and filters `test` using only the predictor; test
/// labels are never read.
pub fn graphost_transform(
    test: &LabeledGraph,
    predictor: &Checkpoint,
    config: &TransformConfig,
) -> Result<WeightedGraph> {
    Ok(transform_detailed(test, predictor, config)?.graph)
}

pub fn transform_detailed(
    test: &LabeledGraph,
    predictor: &Checkpoint,
    config: &TransformConfig,
) -> Result<TransformOutcome> {
    config.validate()?;
    predictor.expect_role(ModelRole::Predictor)?;
    let regime = regime_for(config, predictor)?;
    let unlabeled = test.without_labels();
    let scores = edge_homophily_scores(predictor, &unlabeled)?;
    transform_with_scores(test, scores, regime, config)
}

/// The transform driven by precomputed scores (for example oracle scores).
pub fn transform_with_scores(
    test: &LabeledGraph,
    scores: EdgeScoreTable,
    regime: Regime,
    config: &TransformConfig,
) -> Result<TransformOutcome> {
    config.validate()?;
    check_aligned(test.num_edges(), &scores)?;
    let weighted = if config.enable_weighting {
        build_weighted_graph(test, &scores, regime)?
    } else {
        WeightedGraph::unit(test.clone())
    };
    let removed = if config.enable_filtering {
        edges_to_remove(&scores, regime, config.delta, config.semantics)?
    } else {
        Vec::new()
    };
    let mut keep = vec![true; test.num_edges()];
    for &k in &removed {
        keep[k] = false;
    }
    Ok(TransformOutcome {
        graph: weighted.retain_edges(&keep),
        regime,
        scores,
        removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::tiny;
    use proptest::prelude::*;

    fn table(v: &[f64]) -> EdgeScoreTable {
        EdgeScoreTable::new(v.to_vec()).unwrap()
    }

    #[test]
    fn complement_examples() {
        let h = heterophily_scores(&table(&[0.9, 0.1]));
        assert!((h.values()[0] - 0.1).abs() < 1e-15 && (h.values()[1] - 0.9).abs() < 1e-15);
        assert_eq!(heterophily_scores(&table(&[0.5, 0.5])).values(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_follow_regime() {
        let g = tiny(3, &[(0, 1), (1, 2)], vec![0, 0, 1]);
        let s = table(&[0.9, 0.2]);
        assert_eq!(build_weighted_graph(&g, &s, Regime::Homophilic).unwrap().weights(), &[0.9, 0.2]);
        let w = build_weighted_graph(&g, &s, Regime::Heterophilic).unwrap();
        assert!((w.weights()[0] - 0.1).abs() < 1e-15 && (w.weights()[1] - 0.8).abs() < 1e-15);
        assert!(build_weighted_graph(&g, &table(&[0.5]), Regime::Homophilic).is_err());
    }

    #[test]
    fn ten_edges_delta_point_three_removes_three() {
        let edges: Vec<_> = (0..10).map(|k| (k, k + 1)).collect();
        let g = tiny(11, &edges, vec![0; 11]);
        let s = table(&[0.9, 0.1, 0.8, 0.3, 0.95, 0.2, 0.7, 0.6, 0.5, 0.4]);
        let out = filter_edges(&g, &s, Regime::Homophilic, 0.3).unwrap();
        assert_eq!(out.num_edges(), 7);
        let removed = edges_to_remove(&s, Regime::Homophilic, 0.3, FilterSemantics::TopRatio).unwrap();
        assert_eq!(removed, vec![1, 3, 5]);
        assert_eq!(filter_edges(&g, &s, Regime::Homophilic, 0.0).unwrap(), g);
    }

    #[test]
    fn ties_break_by_edge_index() {
        let s = table(&[0.2, 0.2, 0.2, 0.2]);
        assert_eq!(
            edges_to_remove(&s, Regime::Heterophilic, 0.5, FilterSemantics::TopRatio).unwrap(),
            vec![0, 1]
        );
    }

    #[test]
    fn threshold_semantics() {
        let s = table(&[0.9, 0.1, 0.65, 0.3]);
        assert_eq!(
            edges_to_remove(&s, Regime::Homophilic, 0.7, FilterSemantics::Threshold).unwrap(),
            vec![1, 3]
        );
    }

    #[test]
    fn delta_range_is_checked() {
        let s = table(&[0.5]);
        assert!(edges_to_remove(&s, Regime::Homophilic, 1.0, FilterSemantics::TopRatio).is_err());
        assert!(edges_to_remove(&s, Regime::Homophilic, -0.1, FilterSemantics::TopRatio).is_err());
    }

    #[test]
    fn mode_boundary() {
        assert_eq!(regime_for_homophily(0.6730), Regime::Homophilic);
        assert_eq!(regime_for_homophily(0.2243), Regime::Heterophilic);
        assert_eq!(regime_for_homophily(0.5), Regime::Homophilic);
        let g = tiny(4, &[(0, 1), (2, 3), (1, 2), (0, 3)], vec![0, 0, 1, 1]);
        assert_eq!(resolve_mode(&g).unwrap(), Regime::Homophilic);
        assert!(resolve_mode(&g.without_labels()).is_err());
    }

    #[test]
    fn disabled_transform_is_identity() {
        let g = tiny(4, &[(0, 1), (1, 2), (2, 3)], vec![0, 0, 1, 1]);
        let cfg = TransformConfig {
            enable_weighting: false,
            enable_filtering: false,
            ..TransformConfig::default()
        };
        let out = transform_with_scores(&g, table(&[0.1, 0.5, 0.9]), Regime::Homophilic, &cfg).unwrap();
        assert_eq!(out.graph, WeightedGraph::unit(g));
        assert!(out.removed.is_empty());
    }

    proptest! {
        #[test]
        fn removal_count_and_order_independence(
            scores in prop::collection::vec(0.0f64..=1.0, 0..40),
            delta in 0.0f64..0.99,
            het in any::<bool>(),
        ) {
            let m = scores.len();
            let edges: Vec<_> = (0..m).map(|k| (k, k + 1)).collect();
            let g = tiny(m + 1, &edges, vec![0; m + 1]);
            let s = table(&scores);
            let regime = if het { Regime::Heterophilic } else { Regime::Homophilic };
            let filtered = filter_edges(&g, &s, regime, delta).unwrap();
            prop_assert_eq!(m - filtered.num_edges(), removal_count(delta, m));
            prop_assert_eq!(filtered.features(), g.features());
            prop_assert_eq!(filtered.num_nodes(), g.num_nodes());

            let a = filter_edges(&build_weighted_graph(&g, &s, regime).unwrap(), &s, regime, delta).unwrap();
            let b_base = filter_edges(&g, &s, regime, delta).unwrap();
            let kept: Vec<f64> = edges_kept(&g, &b_base).iter().map(|&k| s.values()[k]).collect();
            let b = build_weighted_graph(&b_base, &table(&kept), regime).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    fn edges_kept(full: &LabeledGraph, sub: &LabeledGraph) -> Vec<usize> {
        full.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| sub.edges().binary_search(e).is_ok())
            .map(|(k, _)| k)
            .collect()
    }
}
