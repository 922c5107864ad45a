use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    degree_relaxation_constraint, expected_embedding, misclassification_prob,
    multiclass_separation, boundary_signed_value, BoundarySpec,
};
use crate::csbm::{sample_edges, sample_features, CsbmParams};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::nn::{mean_aggregate, DenseMatrix};
use crate::rng::{derive_indexed, rng_for};
use crate::transform::Regime;

fn two_class(params: &CsbmParams) -> Result<()> {
    params.validate()?;
    if params.num_classes() != 2 {
        return Err(Error::InvalidParameter(format!(
            "two-class parameters required, got {} classes",
            params.num_classes()
        )));
    }
    Ok(())
}

fn mean_distance(params: &CsbmParams) -> f64 {
    params.class_means[0]
        .iter()
        .zip(&params.class_means[1])
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn aggregate(
    params: &CsbmParams,
    labels: &[usize],
    features: &DenseMatrix,
    p: f64,
    q: f64,
    edge_seed: u64,
) -> Result<(DenseMatrix, Vec<usize>)> {
    let edges = sample_edges(labels, p, q, edge_seed);
    let graph = LabeledGraph::new(
        labels.len(),
        &edges,
        false,
        features.clone(),
        Some(labels.to_vec()),
        params.num_classes(),
    )?;
    let h = mean_aggregate(&graph, features, None)?;
    Ok((h, graph.degrees()))
}

/// Empirical class geometry of mean-aggregated CSBM embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub class_means: Vec<Vec<f64>>,
    pub class_counts: Vec<usize>,
    /// Per-coordinate standard deviation of each class's embeddings.
    pub class_stds: Vec<Vec<f64>>,
    /// Per-coordinate within-class standard deviation of the raw features.
    /// Embeddings of neighbouring nodes share features, so this, not
    /// `class_stds`, sets the scale of the error in the class means.
    pub feature_stds: Vec<f64>,
    pub empirical_midpoint: Vec<f64>,
    pub true_midpoint: Vec<f64>,
    pub midpoint_error: f64,
    /// Cosine between the empirical mean difference and `o`.
    pub direction_cosine: f64,
    pub empirical_separation: f64,
    pub predicted_separation: f64,
    pub isolated_nodes: usize,
}

/// Samples one CSBM graph, mean-aggregates its features and measures the
/// class means of the result. Isolated nodes are left out.
pub fn lemma_check(params: &CsbmParams, seed: u64) -> Result<LemmaReport> {
    two_class(params)?;
    let labels = params.labels();
    let features = sample_features(params, &labels, seed);
    let (h, degrees) = aggregate(params, &labels, &features, params.intra_prob, params.inter_prob, seed)?;
    let l = params.feature_dim();
    let mut sums = vec![vec![0.0; l]; 2];
    let mut counts = vec![0usize; 2];
    let mut isolated = 0;
    for (i, &y) in labels.iter().enumerate() {
        if degrees[i] == 0 {
            isolated += 1;
            continue;
        }
        counts[y] += 1;
        for (s, x) in sums[y].iter_mut().zip(h.row(i)) {
            *s += x;
        }
    }
    if counts.contains(&0) {
        return Err(Error::InvalidParameter("a class has no connected nodes".into()));
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
        .collect();
    let mut sq = vec![vec![0.0; l]; 2];
    for (i, &y) in labels.iter().enumerate() {
        if degrees[i] == 0 {
            continue;
        }
        for ((s, x), m) in sq[y].iter_mut().zip(h.row(i)).zip(&means[y]) {
            *s += (x - m).powi(2);
        }
    }
    let stds = sq
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|v| (v / (c as f64 - 1.0).max(1.0)).sqrt()).collect())
        .collect();
    let feature_stds = within_class_std(&features, &labels, l);
    let empirical_midpoint = super::midpoint(&means[0], &means[1])?;
    let true_midpoint = super::midpoint(&params.class_means[0], &params.class_means[1])?;
    let midpoint_error = empirical_midpoint
        .iter()
        .zip(&true_midpoint)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let diff: Vec<f64> = means[0].iter().zip(&means[1]).map(|(a, b)| a - b).collect();
    let diff_norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let o = super::direction(&params.class_means[0], &params.class_means[1])?;
    let direction_cosine = if diff_norm == 0.0 {
        0.0
    } else {
        diff.iter().zip(&o).map(|(d, o)| d * o).sum::<f64>() / diff_norm
    };
    Ok(LemmaReport {
        class_means: means,
        class_counts: counts,
        class_stds: stds,
        feature_stds,
        empirical_midpoint,
        true_midpoint,
        midpoint_error,
        direction_cosine,
        empirical_separation: diff_norm,
        predicted_separation: multiclass_separation(
            params.intra_prob,
            params.inter_prob,
            2,
            mean_distance(params),
        )?,
        isolated_nodes: isolated,
    })
}

fn within_class_std(features: &DenseMatrix, labels: &[usize], l: usize) -> Vec<f64> {
    let mut sums = vec![vec![0.0; l]; 2];
    let mut counts = [0usize; 2];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (s, x) in sums[y].iter_mut().zip(features.row(i)) {
            *s += x;
        }
    }
    let mut sq = vec![0.0; l];
    for (i, &y) in labels.iter().enumerate() {
        for (j, x) in features.row(i).iter().enumerate() {
            sq[j] += (x - sums[y][j] / counts[y] as f64).powi(2);
        }
    }
    let dof = (labels.len() as f64 - 2.0).max(1.0);
    sq.into_iter().map(|v| (v / dof).sqrt()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRate {
    pub rate: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Draws class-1 embeddings from their Gaussian model in two dimensions,
/// `N((pμ₁+qμ₂)/(p+q), I/(p·n₁+q·n₂))` with `μ₁ = (a/2, 0) = -μ₂`, and
/// classifies them with the midpoint boundary oriented by `sign(p - q)`.
pub fn simulate_misclassification(
    p: f64,
    q: f64,
    n1: f64,
    n2: f64,
    mean_distance: f64,
    samples: usize,
    seed: u64,
) -> Result<SimulatedRate> {
    // Validates the parameters the same way the closed form does.
    misclassification_prob(p, q, n1, n2, mean_distance)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("zero samples".into()));
    }
    let mu1 = [mean_distance / 2.0, 0.0];
    let mu2 = [-mean_distance / 2.0, 0.0];
    let centre = expected_embedding(0, p, q, &mu1, &mu2)?;
    let sigma = 1.0 / (p * n1 + q * n2).sqrt();
    let boundary = if mean_distance > 0.0 {
        BoundarySpec::from_means(&mu1, &mu2)?
    } else {
        BoundarySpec::new(vec![1.0, 0.0], vec![0.0, 0.0])?
    };
    let orientation = if p >= q { 1.0 } else { -1.0 };
    let mut rng = rng_for(seed, "gaussian-misclassification");
    let mut wrong = 0usize;
    let mut h = [0.0; 2];
    for _ in 0..samples {
        for (x, c) in h.iter_mut().zip(&centre) {
            let z: f64 = rng.sample(StandardNormal);
            *x = c + sigma * z;
        }
        if orientation * boundary_signed_value(&h, &boundary)? <= 0.0 {
            wrong += 1;
        }
    }
    let rate = wrong as f64 / samples as f64;
    Ok(SimulatedRate {
        rate,
        standard_error: (rate * (1.0 - rate) / samples as f64).sqrt(),
        samples,
    })
}

/// Per-trial misclassification of the fixed midpoint boundary before and
/// after changing the edge probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckReport {
    pub regime: Regime,
    pub intra_prob: f64,
    pub inter_prob: f64,
    pub transformed_intra_prob: f64,
    pub transformed_inter_prob: f64,
    pub constraint_satisfied: bool,
    pub closed_form_before: f64,
    pub closed_form_after: f64,
    pub rates_before: Vec<f64>,
    pub rates_after: Vec<f64>,
    /// Mean of `before - after` over trials.
    pub mean_difference: f64,
    pub improved_trials: usize,
    pub trials: usize,
    /// Isolated nodes left out of the counts, summed over all samples.
    pub excluded_before: usize,
    pub excluded_after: usize,
}

impl TheoremCheckReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,rate_before,rate_after,improved\n");
        for (t, (b, a)) in self.rates_before.iter().zip(&self.rates_after).enumerate() {
            out.push_str(&format!("{t},{b},{a},{}\n", a < b));
        }
        out
    }
}

/// Monte Carlo companion of the fixed-boundary misclassification theorems.
///
/// Every trial samples node features once, then draws `samples_per_trial`
/// edge sets under both `(p, q)` and `(p', q')` from the same uniform
/// stream, so the two graphs differ only through the probabilities. Nodes
/// are mean-aggregated over strict neighbours and classified by the
/// boundary built from the original class means, oriented by `regime`.
pub fn monte_carlo_theorem_check(
    params: &CsbmParams,
    transformed: &CsbmParams,
    regime: Regime,
    trials: usize,
    samples_per_trial: usize,
    seed: u64,
) -> Result<TheoremCheckReport> {
    two_class(params)?;
    two_class(transformed)?;
    if params.class_means != transformed.class_means || params.class_sizes != transformed.class_sizes {
        return Err(Error::InvalidParameter(
            "transformed parameters must keep the class means and sizes".into(),
        ));
    }
    if trials == 0 || samples_per_trial == 0 {
        return Err(Error::InvalidParameter("trials and samples per trial must be positive".into()));
    }
    let (p, q) = (params.intra_prob, params.inter_prob);
    let (pn, qn) = (transformed.intra_prob, transformed.inter_prob);
    let n1 = params.class_sizes[0] as f64;
    let n2 = params.class_sizes[1] as f64;
    let constraint_satisfied = degree_relaxation_constraint(p, q, pn, qn, n1, n2, regime)?;
    let a = mean_distance(params);
    let boundary = BoundarySpec::from_means(&params.class_means[0], &params.class_means[1])?;
    let orientation = match regime {
        Regime::Homophilic => 1.0,
        Regime::Heterophilic => -1.0,
    };
    let labels = params.labels();

    let error_rate = |h: &DenseMatrix, degrees: &[usize]| -> Result<(usize, usize, usize)> {
        let (mut wrong, mut counted, mut excluded) = (0, 0, 0);
        for (i, &y) in labels.iter().enumerate() {
            if degrees[i] == 0 {
                excluded += 1;
                continue;
            }
            counted += 1;
            let says_first = orientation * boundary_signed_value(h.row(i), &boundary)? > 0.0;
            if says_first != (y == 0) {
                wrong += 1;
            }
        }
        Ok((wrong, counted, excluded))
    };

    let mut rates_before = Vec::with_capacity(trials);
    let mut rates_after = Vec::with_capacity(trials);
    let (mut excluded_before, mut excluded_after) = (0, 0);
    for t in 0..trials {
        let trial_seed = derive_indexed(seed, "theorem-trial", t as u64);
        let features = sample_features(params, &labels, trial_seed);
        let (mut wb, mut cb, mut wa, mut ca) = (0, 0, 0, 0);
        for s in 0..samples_per_trial {
            let edge_seed = derive_indexed(trial_seed, "theorem-edges", s as u64);
            let (h, deg) = aggregate(params, &labels, &features, p, q, edge_seed)?;
            let (w, c, e) = error_rate(&h, &deg)?;
            wb += w;
            cb += c;
            excluded_before += e;
            let (h, deg) = aggregate(params, &labels, &features, pn, qn, edge_seed)?;
            let (w, c, e) = error_rate(&h, &deg)?;
            wa += w;
            ca += c;
            excluded_after += e;
        }
        if cb == 0 || ca == 0 {
            return Err(Error::InvalidParameter("every node is isolated".into()));
        }
        rates_before.push(wb as f64 / cb as f64);
        rates_after.push(wa as f64 / ca as f64);
    }
    let improved_trials = rates_before
        .iter()
        .zip(&rates_after)
        .filter(|(b, a)| a < b)
        .count();
    let mean_difference = rates_before
        .iter()
        .zip(&rates_after)
        .map(|(b, a)| b - a)
        .sum::<f64>()
        / trials as f64;
    Ok(TheoremCheckReport {
        regime,
        intra_prob: p,
        inter_prob: q,
        transformed_intra_prob: pn,
        transformed_inter_prob: qn,
        constraint_satisfied,
        closed_form_before: misclassification_prob(p, q, n1, n2, a)?,
        closed_form_after: misclassification_prob(pn, qn, n1, n2, a)?,
        rates_before,
        rates_after,
        mean_difference,
        improved_trials,
        trials,
        excluded_before,
        excluded_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, q: f64, n: usize) -> CsbmParams {
        CsbmParams::equidistant(2, 2.0, vec![n, n], p, q).unwrap()
    }

    #[test]
    fn null_transform_changes_nothing() {
        let a = params(0.05, 0.02, 100);
        let r = monte_carlo_theorem_check(&a, &a, Regime::Homophilic, 3, 1, 9).unwrap();
        assert_eq!(r.rates_before, r.rates_after);
        assert_eq!(r.mean_difference, 0.0);
        assert!(!r.constraint_satisfied);
        assert!(r.to_csv().starts_with("trial,"));
    }

    #[test]
    fn regime_mismatch_is_refused() {
        let a = params(0.01, 0.02, 50);
        let b = params(0.005, 0.03, 50);
        assert!(matches!(
            monte_carlo_theorem_check(&a, &b, Regime::Homophilic, 1, 1, 0),
            Err(Error::RegimeMismatch(_))
        ));
    }

    #[test]
    fn simulation_is_seeded() {
        let a = simulate_misclassification(0.05, 0.01, 500.0, 500.0, 2.0, 1000, 3).unwrap();
        let b = simulate_misclassification(0.05, 0.01, 500.0, 500.0, 2.0, 1000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lemma_geometry_on_small_graph() {
        let r = lemma_check(&params(0.1, 0.02, 300), 5).unwrap();
        assert!(r.direction_cosine > 0.99);
        let r = lemma_check(&params(0.02, 0.1, 300), 5).unwrap();
        assert!(r.direction_cosine < -0.99);
    }
}
