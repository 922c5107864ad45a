//! Graph containers, homophily measurement, perturbations and file I/O.
//!
//! Undirected edges are stored once as `(u, v)` with `u < v`, and the edge
//! list is kept sorted so that every edge has a stable canonical index.
//! Directed edges keep their orientation; for aggregation a directed edge
//! `(u, v)` sends a message from `u` to `v`.

mod io;
mod perturb;

pub use io::{load_graph, load_weighted_graph, save_graph, save_weighted_graph, GraphFormat};
pub use perturb::{add_feature_noise, inject_structural_noise, random_edge_drop};
pub(crate) use perturb::snapped as snapped_count;

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

pub type Edge = (usize, usize);

/// Node set, edge list, node features and (optionally) node labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    num_nodes: usize,
    edges: Vec<Edge>,
    directed: bool,
    features: DenseMatrix,
    labels: Option<Vec<usize>>,
    num_classes: usize,
}

/// Sorts, orients (`u < v` when undirected) and deduplicates an edge list.
/// Self-loops are left in place; [`LabeledGraph::new`] rejects them.
pub fn canonicalize_edges(edges: &[Edge], directed: bool) -> Vec<Edge> {
    let mut out: Vec<Edge> = edges
        .iter()
        .map(|&(u, v)| if directed || u <= v { (u, v) } else { (v, u) })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl LabeledGraph {
    pub fn new(
        num_nodes: usize,
        edges: &[Edge],
        directed: bool,
        features: DenseMatrix,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        features.check_finite()?;
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "{} labels for {num_nodes} nodes",
                    labels.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
                return Err(Error::InvalidGraph(format!(
                    "label {bad} out of range for {num_classes} classes"
                )));
            }
        }
        Ok(Self {
            num_nodes,
            edges: canonicalize_edges(edges, directed),
            directed,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels().ok_or(Error::LabelsMissing)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Same nodes, features and labels with a different edge set.
    pub fn with_edges(&self, edges: &[Edge]) -> Result<Self> {
        Self::new(
            self.num_nodes,
            edges,
            self.directed,
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
        )
    }

    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        Self::new(
            self.num_nodes,
            &self.edges,
            self.directed,
            features,
            self.labels.clone(),
            self.num_classes,
        )
    }

    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().max().map_or(0, |&m| m + 1).max(self.num_classes);
        Self::new(
            self.num_nodes,
            &self.edges,
            self.directed,
            self.features,
            Some(labels),
            classes,
        )
    }

    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Keeps edges whose mask entry is `true`; order is preserved.
    pub(crate) fn retain_by_mask(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.edges.len());
        Self {
            edges: self
                .edges
                .iter()
                .zip(keep)
                .filter_map(|(&e, &k)| k.then_some(e))
                .collect(),
            ..self.clone()
        }
    }

    /// Whether each edge joins two nodes of the same class.
    pub fn edge_homophily_mask(&self) -> Result<Vec<bool>> {
        let labels = self.require_labels()?;
        Ok(self
            .edges
            .iter()
            .map(|&(u, v)| labels[u] == labels[v])
            .collect())
    }

    /// Per-node incoming neighbour lists, ascending by neighbour index.
    ///
    /// `weights` (aligned with [`Self::edges`]) default to 1. For undirected
    /// graphs each edge appears in both endpoint lists.
    pub fn neighbor_lists(&self, weights: Option<&[f64]>) -> Vec<Vec<(usize, f64)>> {
        let mut lists = vec![Vec::new(); self.num_nodes];
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[k]);
            lists[v].push((u, w));
            if !self.directed {
                lists[u].push((v, w));
            }
        }
        for l in &mut lists {
            l.sort_by_key(|&(j, _)| j);
        }
        lists
    }

    /// Number of incoming neighbours of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[v] += 1;
            if !self.directed {
                deg[u] += 1;
            }
        }
        deg
    }
}

/// Fraction of edges whose endpoints share a class.
///
/// Directed edges are counted once each.
pub fn edge_homophily_degree(graph: &LabeledGraph) -> Result<f64> {
    let mask = graph.edge_homophily_mask()?;
    if mask.is_empty() {
        return Err(Error::UndefinedHomophily);
    }
    let same = mask.iter().filter(|&&m| m).count();
    Ok(same as f64 / mask.len() as f64)
}

/// A graph whose edges carry weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    base: LabeledGraph,
    weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(base: LabeledGraph, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != base.num_edges() {
            return Err(Error::ShapeMismatch(format!(
                "{} edge weights for {} edges",
                weights.len(),
                base.num_edges()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidParameter(format!(
                "edge weight {w} outside [0, 1]"
            )));
        }
        Ok(Self { base, weights })
    }

    /// Every edge with weight 1.
    pub fn unit(base: LabeledGraph) -> Self {
        let weights = vec![1.0; base.num_edges()];
        Self { base, weights }
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_parts(self) -> (LabeledGraph, Vec<f64>) {
        (self.base, self.weights)
    }
}

/// Graphs whose edge set can be narrowed by a keep-mask.
pub trait EdgeSubset: Sized {
    fn edge_list(&self) -> &[Edge];
    fn retain_edges(&self, keep: &[bool]) -> Self;
}

impl EdgeSubset for LabeledGraph {
    fn edge_list(&self) -> &[Edge] {
        self.edges()
    }

    fn retain_edges(&self, keep: &[bool]) -> Self {
        self.retain_by_mask(keep)
    }
}

impl EdgeSubset for WeightedGraph {
    fn edge_list(&self) -> &[Edge] {
        self.base.edges()
    }

    fn retain_edges(&self, keep: &[bool]) -> Self {
        Self {
            base: self.base.retain_by_mask(keep),
            weights: self
                .weights
                .iter()
                .zip(keep)
                .filter_map(|(&w, &k)| k.then_some(w))
                .collect(),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn tiny(n: usize, edges: &[Edge], labels: Vec<usize>) -> LabeledGraph {
        LabeledGraph::new(n, edges, false, DenseMatrix::zeros(n, 1), Some(labels), 2).unwrap()
    }

    #[test]
    fn homophily_all_same_class() {
        let g = tiny(3, &[(0, 1), (1, 2)], vec![0, 0, 0]);
        assert_eq!(edge_homophily_degree(&g).unwrap(), 1.0);
    }

    #[test]
    fn homophily_triangle_one_third() {
        let g = tiny(3, &[(0, 1), (0, 2), (1, 2)], vec![0, 0, 1]);
        assert_eq!(edge_homophily_degree(&g).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn homophily_undefined_without_edges() {
        let g = tiny(3, &[], vec![0, 0, 1]);
        assert!(matches!(
            edge_homophily_degree(&g),
            Err(Error::UndefinedHomophily)
        ));
        assert!(matches!(
            edge_homophily_degree(&g.without_labels()),
            Err(Error::LabelsMissing)
        ));
    }

    #[test]
    fn construction_rejects_bad_input() {
        let f = DenseMatrix::zeros(3, 1);
        assert!(LabeledGraph::new(3, &[(1, 1)], false, f.clone(), None, 1).is_err());
        assert!(LabeledGraph::new(3, &[(0, 3)], false, f.clone(), None, 1).is_err());
        assert!(LabeledGraph::new(3, &[], false, f.clone(), Some(vec![0, 0]), 1).is_err());
        assert!(LabeledGraph::new(3, &[], false, f.clone(), Some(vec![0, 0, 2]), 2).is_err());
        assert!(LabeledGraph::new(4, &[], false, f, None, 1).is_err());
    }

    #[test]
    fn undirected_edges_are_canonical() {
        let g = tiny(3, &[(2, 0), (0, 2), (1, 0)], vec![0, 0, 1]);
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        let d = LabeledGraph::new(3, &[(2, 0), (0, 2)], true, DenseMatrix::zeros(3, 1), None, 1)
            .unwrap();
        assert_eq!(d.edges(), &[(0, 2), (2, 0)]);
    }

    #[test]
    fn neighbor_lists_are_sorted_and_symmetric() {
        let g = tiny(4, &[(2, 3), (0, 3), (1, 3)], vec![0, 0, 1, 1]);
        let lists = g.neighbor_lists(None);
        assert_eq!(lists[3], vec![(0, 1.0), (1, 1.0), (2, 1.0)]);
        assert_eq!(lists[0], vec![(3, 1.0)]);
        assert_eq!(g.degrees(), vec![1, 1, 1, 3]);
    }

    #[test]
    fn weighted_graph_validates_weights() {
        let g = tiny(3, &[(0, 1), (1, 2)], vec![0, 0, 0]);
        assert!(WeightedGraph::new(g.clone(), vec![0.5]).is_err());
        assert!(WeightedGraph::new(g.clone(), vec![0.5, 1.5]).is_err());
        let w = WeightedGraph::new(g, vec![0.5, 0.25]).unwrap();
        let kept = w.retain_edges(&[false, true]);
        assert_eq!(kept.graph().edges(), &[(1, 2)]);
        assert_eq!(kept.weights(), &[0.25]);
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(
            raw in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
            directed in any::<bool>(),
        ) {
            let once = canonicalize_edges(&raw, directed);
            let twice = canonicalize_edges(&once, directed);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn homophily_is_a_fraction(
            raw in proptest::collection::vec((0usize..10, 0usize..10), 1..40),
            labels in proptest::collection::vec(0usize..3, 10),
        ) {
            let edges: Vec<Edge> = raw.into_iter().filter(|(u, v)| u != v).collect();
            prop_assume!(!edges.is_empty());
            let g = LabeledGraph::new(10, &edges, false, DenseMatrix::zeros(10, 1), Some(labels), 3)
                .unwrap();
            let hd = edge_homophily_degree(&g).unwrap();
            prop_assert!((0.0..=1.0).contains(&hd));
        }
    }
}
