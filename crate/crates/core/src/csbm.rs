//! Contextual stochastic block model sampling.
//!
//! Node `i` of class `k` gets `x_i ~ N(μ_k, I)`; every unordered pair of
//! same-class nodes is joined with probability `p` and every cross-class pair
//! with probability `q`. Classes are laid out block-wise (class 0 first).
//!
//! Gaussian draws use the ziggurat sampler from `rand_distr` on a ChaCha8
//! stream dedicated to each node, so a node's features depend only on
//! `(seed, node index, class mean)`. Edges are drawn from a single stream in
//! lexicographic pair order; two parameter sets sampled with the same seed
//! therefore share their uniforms pair by pair.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, LabeledGraph};
use crate::nn::DenseMatrix;
use crate::rng::{rng_for, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbmParams {
    pub class_means: Vec<Vec<f64>>,
    pub class_sizes: Vec<usize>,
    pub intra_prob: f64,
    pub inter_prob: f64,
}

impl CsbmParams {
    pub fn new(
        class_means: Vec<Vec<f64>>,
        class_sizes: Vec<usize>,
        intra_prob: f64,
        inter_prob: f64,
    ) -> Result<Self> {
        let params = Self {
            class_means,
            class_sizes,
            intra_prob,
            inter_prob,
        };
        params.validate()?;
        Ok(params)
    }

    /// Classes with pairwise mean distance `distance` in `feature_dim` dimensions.
    ///
    /// Two classes sit at `±(distance/2)·e₁`; more classes use the scaled
    /// simplex `(distance/√2)·e_k`, which needs `feature_dim ≥ classes`.
    pub fn equidistant(
        feature_dim: usize,
        distance: f64,
        class_sizes: Vec<usize>,
        intra_prob: f64,
        inter_prob: f64,
    ) -> Result<Self> {
        let s = class_sizes.len();
        let means = if s == 2 {
            let mut a = vec![0.0; feature_dim];
            let mut b = vec![0.0; feature_dim];
            if feature_dim > 0 {
                a[0] = distance / 2.0;
                b[0] = -distance / 2.0;
            }
            vec![a, b]
        } else {
            if feature_dim < s {
                return Err(Error::InvalidParameter(format!(
                    "{s} equidistant means need at least {s} dimensions, got {feature_dim}"
                )));
            }
            (0..s)
                .map(|k| {
                    let mut m = vec![0.0; feature_dim];
                    m[k] = distance / std::f64::consts::SQRT_2;
                    m
                })
                .collect()
        };
        Self::new(means, class_sizes, intra_prob, inter_prob)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.class_means.len();
        if s < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 classes, got {s}")));
        }
        if self.class_sizes.len() != s {
            return Err(Error::InvalidParameter(format!(
                "{} class sizes for {s} class means",
                self.class_sizes.len()
            )));
        }
        if self.class_sizes.contains(&0) {
            return Err(Error::InvalidParameter("every class needs at least one node".into()));
        }
        for (name, p) in [("intra", self.intra_prob), ("inter", self.inter_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name}-class probability {p} outside [0, 1]"
                )));
            }
        }
        let l = self.class_means[0].len();
        if self.class_means.iter().any(|m| m.len() != l) {
            return Err(Error::InvalidParameter("class means differ in dimension".into()));
        }
        if self.class_means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("class means"));
        }
        for a in 0..s {
            for b in a + 1..s {
                if self.class_means[a] == self.class_means[b] {
                    return Err(Error::InvalidParameter(format!(
                        "classes {a} and {b} share the same mean"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_means.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.class_means.first().map_or(0, Vec::len)
    }

    pub fn num_nodes(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    /// Block-wise labels: `n_0` zeros, then `n_1` ones, ...
    pub fn labels(&self) -> Vec<usize> {
        self.class_sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect()
    }

    /// Same means and sizes with different edge probabilities.
    pub fn with_probs(&self, intra_prob: f64, inter_prob: f64) -> Result<Self> {
        Self::new(
            self.class_means.clone(),
            self.class_sizes.clone(),
            intra_prob,
            inter_prob,
        )
    }

    /// Number of same-class and cross-class unordered node pairs.
    pub fn pair_counts(&self) -> (f64, f64) {
        let n = self.num_nodes() as f64;
        let same: f64 = self
            .class_sizes
            .iter()
            .map(|&k| {
                let k = k as f64;
                k * (k - 1.0) / 2.0
            })
            .sum();
        (same, n * (n - 1.0) / 2.0 - same)
    }

    /// Expected edge homophily `p·S / (p·S + q·C)` over same (`S`) and cross (`C`) pairs.
    pub fn expected_homophily(&self) -> Option<f64> {
        let (same, cross) = self.pair_counts();
        let num = self.intra_prob * same;
        let den = num + self.inter_prob * cross;
        (den > 0.0).then(|| num / den)
    }
}

/// Samples a two-class CSBM graph.
pub fn generate_csbm(params: &CsbmParams, seed: u64) -> Result<LabeledGraph> {
    if params.num_classes() != 2 {
        return Err(Error::InvalidParameter(format!(
            "binary CSBM needs 2 classes, got {}; use generate_csbm_multiclass",
            params.num_classes()
        )));
    }
    generate_csbm_multiclass(params, seed)
}

/// Samples an `s`-class CSBM graph.
pub fn generate_csbm_multiclass(params: &CsbmParams, seed: u64) -> Result<LabeledGraph> {
    params.validate()?;
    let labels = params.labels();
    let features = sample_features(params, &labels, seed);
    let edges = sample_edges(&labels, params.intra_prob, params.inter_prob, seed);
    LabeledGraph::new(
        labels.len(),
        &edges,
        false,
        features,
        Some(labels),
        params.num_classes(),
    )
}

pub(crate) fn sample_features(params: &CsbmParams, labels: &[usize], seed: u64) -> DenseMatrix {
    let l = params.feature_dim();
    let mut features = DenseMatrix::zeros(labels.len(), l);
    for (i, &y) in labels.iter().enumerate() {
        let mut rng = stream_rng(seed, "csbm-features", i as u64);
        for (x, mu) in features.row_mut(i).iter_mut().zip(&params.class_means[y]) {
            let z: f64 = rng.sample(StandardNormal);
            *x = mu + z;
        }
    }
    features
}

/// Independent Bernoulli draw per unordered pair, in lexicographic order.
pub(crate) fn sample_edges(labels: &[usize], intra: f64, inter: f64, seed: u64) -> Vec<Edge> {
    let mut rng = rng_for(seed, "csbm-edges");
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { intra } else { inter };
            let u: f64 = rng.gen();
            if u < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily_degree;

    fn two(p: f64, q: f64, sizes: Vec<usize>) -> CsbmParams {
        CsbmParams::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], sizes, p, q).unwrap()
    }

    #[test]
    fn certain_intra_edges_make_cliques() {
        let g = generate_csbm(&two(1.0, 0.0, vec![3, 3]), 1).unwrap();
        assert_eq!(
            g.edges(),
            &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
        );
    }

    #[test]
    fn multiclass_with_two_classes_matches_binary() {
        let p = two(0.3, 0.1, vec![10, 12]);
        assert_eq!(
            generate_csbm(&p, 5).unwrap(),
            generate_csbm_multiclass(&p, 5).unwrap()
        );
    }

    #[test]
    fn three_class_extremes() {
        let means = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        let blocks = CsbmParams::new(means.clone(), vec![2, 2, 2], 1.0, 0.0).unwrap();
        let g = generate_csbm_multiclass(&blocks, 0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (2, 3), (4, 5)]);

        let tri = CsbmParams::new(means, vec![2, 2, 2], 0.0, 1.0).unwrap();
        let g = generate_csbm_multiclass(&tri, 0).unwrap();
        assert_eq!(g.num_edges(), 12);
        let labels = g.labels().unwrap();
        assert!(g.edges().iter().all(|&(u, v)| labels[u] != labels[v]));
        assert!(generate_csbm(&tri, 0).is_err());
    }

    #[test]
    fn params_are_validated() {
        assert!(CsbmParams::new(vec![vec![1.0]], vec![3], 0.5, 0.5).is_err());
        assert!(CsbmParams::new(vec![vec![1.0], vec![1.0]], vec![3, 3], 0.5, 0.5).is_err());
        assert!(CsbmParams::new(vec![vec![1.0], vec![0.0]], vec![3, 0], 0.5, 0.5).is_err());
        assert!(CsbmParams::new(vec![vec![1.0], vec![0.0]], vec![3, 3], 1.5, 0.5).is_err());
        assert!(CsbmParams::new(vec![vec![1.0], vec![0.0, 1.0]], vec![3, 3], 0.5, 0.5).is_err());
        assert!(CsbmParams::equidistant(2, 1.0, vec![2, 2, 2], 0.5, 0.1).is_err());
    }

    #[test]
    fn equidistant_means_have_requested_spacing() {
        let p = CsbmParams::equidistant(4, 3.0, vec![1, 1, 1], 0.5, 0.1).unwrap();
        for a in 0..3 {
            for b in a + 1..3 {
                let d: f64 = p.class_means[a]
                    .iter()
                    .zip(&p.class_means[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((d - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seed_determinism_and_feature_stability() {
        let p = two(0.1, 0.05, vec![20, 20]);
        assert_eq!(generate_csbm(&p, 9).unwrap(), generate_csbm(&p, 9).unwrap());
        // A node's features do not depend on how many nodes follow it.
        let small = generate_csbm(&two(0.1, 0.05, vec![20, 5]), 9).unwrap();
        let big = generate_csbm(&p, 9).unwrap();
        for i in 0..20 {
            assert_eq!(small.features().row(i), big.features().row(i));
        }
    }

    #[test]
    fn class_feature_means_converge() {
        let p = CsbmParams::equidistant(4, 2.0, vec![600, 600], 0.0, 0.0).unwrap();
        let g = generate_csbm(&p, 3).unwrap();
        let labels = g.labels().unwrap();
        for k in 0..2 {
            let mut mean = [0.0; 4];
            for i in (0..g.num_nodes()).filter(|&i| labels[i] == k) {
                for (m, x) in mean.iter_mut().zip(g.features().row(i)) {
                    *m += x / 600.0;
                }
            }
            let err: f64 = mean
                .iter()
                .zip(&p.class_means[k])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 4.0 * (4.0f64 / 600.0).sqrt(), "class {k}: {err}");
        }
    }

    #[test]
    fn homophily_tracks_expectation_when_p_equals_q() {
        let p = two(0.2, 0.2, vec![40, 60]);
        // (C(40,2) + C(60,2)) / C(100,2)
        let expected = (780.0 + 1770.0) / 4950.0;
        assert!((p.expected_homophily().unwrap() - expected).abs() < 1e-15);
        let mean: f64 = (0..40)
            .map(|s| edge_homophily_degree(&generate_csbm(&p, s).unwrap()).unwrap())
            .sum::<f64>()
            / 40.0;
        assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
    }
}
