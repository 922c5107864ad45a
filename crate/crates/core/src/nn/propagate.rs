//! Neighbourhood aggregation.
//!
//! A [`Propagator`] is a sparse row operator `out_i = Σ_j c_ij · in_j` built
//! from a graph and optional edge weights. Each row lists its terms in
//! ascending neighbour index so sums are evaluated in a fixed order.
//!
//! Two constructions exist. The model layers ([`Propagator::gcn`]) add a
//! self-loop of weight 1 to every node. The strict-neighbour mean
//! ([`Propagator::strict_mean`], used by [`mean_aggregate`]) does not, which
//! is the aggregation the CSBM analysis assumes.

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::nn::{Activation, DenseMatrix};

/// How incoming messages are normalized in a model layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Divide by the total incident weight (self-loop included).
    #[default]
    Mean,
    /// Plain weighted sum.
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    rows: Vec<Vec<(usize, f64)>>,
}

fn check_weights(graph: &LabeledGraph, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != graph.num_edges() {
            return Err(Error::ShapeMismatch(format!(
                "{} edge weights for {} edges",
                w.len(),
                graph.num_edges()
            )));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("edge weights"));
        }
    }
    Ok(())
}

impl Propagator {
    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    /// `h_i = Σ_{j∈N(i)} w_ij x_j / Σ_{j∈N(i)} w_ij`; nodes with no neighbours
    /// or zero total incident weight keep their own row.
    pub fn strict_mean(graph: &LabeledGraph, weights: Option<&[f64]>) -> Result<Self> {
        check_weights(graph, weights)?;
        let rows = graph
            .neighbor_lists(weights)
            .into_iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let total: f64 = nbrs.iter().map(|&(_, w)| w).sum();
                if total == 0.0 {
                    vec![(i, 1.0)]
                } else {
                    nbrs.into_iter().map(|(j, w)| (j, w / total)).collect()
                }
            })
            .collect();
        Ok(Self { rows })
    }

    /// Self-loop of weight 1 plus weighted incoming edges, normalized per `aggregation`.
    pub fn gcn(
        graph: &LabeledGraph,
        weights: Option<&[f64]>,
        aggregation: Aggregation,
    ) -> Result<Self> {
        check_weights(graph, weights)?;
        let rows = graph
            .neighbor_lists(weights)
            .into_iter()
            .enumerate()
            .map(|(i, mut nbrs)| {
                let pos = nbrs.partition_point(|&(j, _)| j < i);
                nbrs.insert(pos, (i, 1.0));
                match aggregation {
                    Aggregation::Sum => nbrs,
                    Aggregation::Mean => {
                        let total: f64 = nbrs.iter().map(|&(_, w)| w).sum();
                        nbrs.into_iter().map(|(j, w)| (j, w / total)).collect()
                    }
                }
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, input: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(input)?;
        let mut out = DenseMatrix::zeros(input.rows(), input.cols());
        for (i, terms) in self.rows.iter().enumerate() {
            let o = out.row_mut(i);
            for &(j, c) in terms {
                for (ok, x) in o.iter_mut().zip(input.row(j)) {
                    *ok += c * x;
                }
            }
        }
        Ok(out)
    }

    /// Applies the transposed operator (used by backpropagation).
    pub fn apply_transpose(&self, input: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(input)?;
        let mut out = DenseMatrix::zeros(input.rows(), input.cols());
        for (i, terms) in self.rows.iter().enumerate() {
            let src = input.row(i);
            for &(j, c) in terms {
                for (ok, x) in out.row_mut(j).iter_mut().zip(src) {
                    *ok += c * x;
                }
            }
        }
        Ok(out)
    }

    fn check(&self, input: &DenseMatrix) -> Result<()> {
        if input.rows() != self.rows.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} nodes",
                input.rows(),
                self.rows.len()
            )));
        }
        Ok(())
    }
}

/// Strict-neighbour (weighted) mean aggregation of `features` over `graph`.
pub fn mean_aggregate(
    graph: &LabeledGraph,
    features: &DenseMatrix,
    edge_weights: Option<&[f64]>,
) -> Result<DenseMatrix> {
    Propagator::strict_mean(graph, edge_weights)?.apply(features)
}

/// One message-passing layer: `act(P · (H W) + b)` with a unit self-loop in `P`.
pub fn gcn_layer_forward(
    graph: &LabeledGraph,
    input: &DenseMatrix,
    weight: &DenseMatrix,
    bias: &[f64],
    edge_weights: Option<&[f64]>,
    activation: Activation,
    aggregation: Aggregation,
) -> Result<DenseMatrix> {
    if bias.len() != weight.cols() {
        return Err(Error::ShapeMismatch(format!(
            "bias of length {} for {} output columns",
            bias.len(),
            weight.cols()
        )));
    }
    let prop = Propagator::gcn(graph, edge_weights, aggregation)?;
    let mut z = prop.apply(&input.matmul(weight)?)?;
    z.add_row_vector(bias)?;
    Ok(z.map(|x| activation.apply(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)], rows: &[Vec<f64>]) -> LabeledGraph {
        LabeledGraph::new(n, edges, false, DenseMatrix::from_rows(rows).unwrap(), None, 1).unwrap()
    }

    #[test]
    fn star_center_averages_leaves() {
        let g = graph(3, &[(0, 1), (0, 2)], &[vec![9.0, 9.0], vec![2.0, 0.0], vec![0.0, 2.0]]);
        let h = mean_aggregate(&g, g.features(), None).unwrap();
        assert_eq!(h.row(0), &[1.0, 1.0]);
        assert_eq!(h.row(1), &[9.0, 9.0]);
    }

    #[test]
    fn isolated_node_keeps_its_feature() {
        let g = graph(2, &[], &[vec![5.0, 5.0], vec![1.0, 2.0]]);
        let h = mean_aggregate(&g, g.features(), None).unwrap();
        assert_eq!(h.row(0), &[5.0, 5.0]);
        // Zero incident weight is treated like isolation.
        let g = graph(2, &[(0, 1)], &[vec![5.0, 5.0], vec![1.0, 2.0]]);
        let h = mean_aggregate(&g, g.features(), Some(&[0.0])).unwrap();
        assert_eq!(h, *g.features());
    }

    #[test]
    fn unit_weights_equal_unweighted() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.37, 1.0 / (i as f64 + 1.0)]).collect();
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (0, 5), (4, 5), (1, 4)], &rows);
        let ones = vec![1.0; g.num_edges()];
        assert_eq!(
            mean_aggregate(&g, g.features(), None).unwrap(),
            mean_aggregate(&g, g.features(), Some(&ones)).unwrap()
        );
    }

    #[test]
    fn identity_layer_is_self_loop_sum() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let g = graph(3, &[(0, 1), (1, 2)], &rows);
        let out = gcn_layer_forward(
            &g,
            g.features(),
            &DenseMatrix::identity(2),
            &[0.0, 0.0],
            None,
            Activation::Identity,
            Aggregation::Sum,
        )
        .unwrap();
        assert_eq!(out.row(0), &[4.0, 6.0]);
        assert_eq!(out.row(1), &[9.0, 12.0]);
        assert_eq!(out.row(2), &[8.0, 10.0]);

        let mean = gcn_layer_forward(
            &g,
            g.features(),
            &DenseMatrix::identity(2),
            &[0.0, 0.0],
            None,
            Activation::Identity,
            Aggregation::Mean,
        )
        .unwrap();
        assert_eq!(mean.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn zero_weight_severs_the_message() {
        let g = graph(2, &[(0, 1)], &[vec![1.0, -1.0], vec![7.0, 3.0]]);
        let w = DenseMatrix::from_vec(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        for agg in [Aggregation::Mean, Aggregation::Sum] {
            let out =
                gcn_layer_forward(&g, g.features(), &w, &[0.1, 0.2], Some(&[0.0]), Activation::Relu, agg)
                    .unwrap();
            let alone = graph(2, &[], &g.features().to_rows());
            let ref_out =
                gcn_layer_forward(&alone, g.features(), &w, &[0.1, 0.2], None, Activation::Relu, agg)
                    .unwrap();
            assert_eq!(out, ref_out);
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![(i * i) as f64 * 0.1 - 0.4]).collect();
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)], &rows);
        let p = Propagator::gcn(&g, Some(&[0.2, 0.9, 0.5, 1.0, 0.3, 0.7]), Aggregation::Mean).unwrap();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let y = DenseMatrix::from_rows(&(0..5).map(|i| vec![1.0 - i as f64]).collect::<Vec<_>>())
            .unwrap();
        // <P x, y> == <x, Pᵀ y>
        let lhs: f64 = p.apply(&x).unwrap().data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(p.apply_transpose(&y).unwrap().data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let g = graph(2, &[(0, 1)], &[vec![1.0], vec![2.0]]);
        assert!(mean_aggregate(&g, g.features(), Some(&[1.0, 1.0])).is_err());
        assert!(mean_aggregate(&g, &DenseMatrix::zeros(3, 1), None).is_err());
        assert!(gcn_layer_forward(
            &g,
            g.features(),
            &DenseMatrix::zeros(2, 1),
            &[0.0],
            None,
            Activation::Relu,
            Aggregation::Mean
        )
        .is_err());
    }
}
