use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Edge, LabeledGraph};
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream_rng};

/// `fraction * total` as a count, snapping values within 1e-9 of an integer
/// so decimal fractions such as 0.3 do not pick up a spurious extra unit.
pub(crate) fn snapped(fraction: f64, total: usize) -> f64 {
    let x = fraction * total as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Replaces `⌊(noise_ratio / 2)·|E|⌋` random edges with the same number of
/// random non-edges.
///
/// Added edges are drawn from pairs absent from the original graph, never
/// self-loops. Rejection sampling is tried first (capped at 100x the target
/// number of attempts); the remainder is drawn from an explicit enumeration
/// of the complement, so dense graphs get `min(available, target)` additions.
pub fn inject_structural_noise(
    graph: &LabeledGraph,
    noise_ratio: f64,
    seed: u64,
) -> Result<LabeledGraph> {
    if !(0.0..=1.0).contains(&noise_ratio) {
        return Err(Error::InvalidParameter(format!(
            "noise ratio {noise_ratio} outside [0, 1]"
        )));
    }
    let m = graph.num_edges();
    let count = snapped(noise_ratio / 2.0, m).floor() as usize;
    if count == 0 {
        return Ok(graph.clone());
    }
    let mut rng = rng_for(seed, "structural-noise");
    let removed: HashSet<usize> = index::sample(&mut rng, m, count).into_iter().collect();
    let mut edges: Vec<Edge> = graph
        .edges()
        .iter()
        .enumerate()
        .filter_map(|(k, &e)| (!removed.contains(&k)).then_some(e))
        .collect();

    let n = graph.num_nodes();
    let directed = graph.is_directed();
    let existing: HashSet<Edge> = graph.edges().iter().copied().collect();
    let orient = |u: usize, v: usize| if directed || u < v { (u, v) } else { (v, u) };

    let mut added: HashSet<Edge> = HashSet::new();
    let max_attempts = 100 * count;
    let mut attempts = 0;
    while added.len() < count && attempts < max_attempts && n > 1 {
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let e = orient(u, v);
        if !existing.contains(&e) {
            added.insert(e);
        }
    }
    if added.len() < count {
        let mut pool: Vec<Edge> = Vec::new();
        for u in 0..n {
            let start = if directed { 0 } else { u + 1 };
            for v in start..n {
                if u != v && !existing.contains(&(u, v)) && !added.contains(&(u, v)) {
                    pool.push((u, v));
                }
            }
        }
        let need = (count - added.len()).min(pool.len());
        for k in index::sample(&mut rng, pool.len(), need) {
            added.insert(pool[k]);
        }
    }
    let mut added: Vec<Edge> = added.into_iter().collect();
    added.sort_unstable();
    edges.extend(added);
    graph.with_edges(&edges)
}

/// Removes exactly `drop_count` uniformly chosen edges.
pub fn random_edge_drop(graph: &LabeledGraph, drop_count: usize, seed: u64) -> Result<LabeledGraph> {
    let m = graph.num_edges();
    if drop_count > m {
        return Err(Error::InvalidParameter(format!(
            "cannot drop {drop_count} of {m} edges"
        )));
    }
    let mut rng = rng_for(seed, "random-edge-drop");
    let mut keep = vec![true; m];
    for k in index::sample(&mut rng, m, drop_count) {
        keep[k] = false;
    }
    Ok(graph.retain_by_mask(&keep))
}

/// Adds independent `N(0, variance)` noise to every feature entry.
pub fn add_feature_noise(graph: &LabeledGraph, variance: f64, seed: u64) -> Result<LabeledGraph> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "feature noise variance {variance}"
        )));
    }
    let std = variance.sqrt();
    let mut features = graph.features().clone();
    for i in 0..graph.num_nodes() {
        let mut rng = stream_rng(seed, "feature-noise", i as u64);
        for x in features.row_mut(i) {
            let z: f64 = rng.sample(StandardNormal);
            *x += std * z;
        }
    }
    graph.with_features(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseMatrix;

    fn ring(n: usize) -> LabeledGraph {
        let edges: Vec<Edge> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        LabeledGraph::new(n, &edges, false, DenseMatrix::zeros(n, 2), Some(vec![0; n]), 1).unwrap()
    }

    fn complete(n: usize) -> LabeledGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        LabeledGraph::new(n, &edges, false, DenseMatrix::zeros(n, 1), None, 1).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let g = ring(20);
        assert_eq!(inject_structural_noise(&g, 0.0, 3).unwrap(), g);
    }

    #[test]
    fn half_noise_swaps_a_quarter_of_edges() {
        let g = ring(100);
        let noisy = inject_structural_noise(&g, 0.5, 11).unwrap();
        assert_eq!(noisy.num_edges(), 100);
        let before: HashSet<Edge> = g.edges().iter().copied().collect();
        let after: HashSet<Edge> = noisy.edges().iter().copied().collect();
        assert_eq!(before.difference(&after).count(), 25);
        assert_eq!(after.difference(&before).count(), 25);
        assert!(noisy.edges().iter().all(|&(u, v)| u < v));
        assert_eq!(noisy.features(), g.features());
    }

    #[test]
    fn complete_graph_has_no_room_to_add() {
        // K_8 has 28 edges and an empty complement: 7 removed, 0 added.
        let g = complete(8);
        let noisy = inject_structural_noise(&g, 0.5, 5).unwrap();
        assert_eq!(noisy.num_edges(), 28 - 7);
    }

    #[test]
    fn nearly_complete_graph_uses_enumeration() {
        // K_8 minus 3 edges: the complement holds exactly 3 pairs, 6 removals requested.
        let g = complete(8);
        let mut keep = vec![true; g.num_edges()];
        keep[0] = false;
        keep[5] = false;
        keep[20] = false;
        let g = g.retain_by_mask(&keep);
        let noisy = inject_structural_noise(&g, 0.5, 9).unwrap();
        assert_eq!(noisy.num_edges(), 25 - 6 + 3);
    }

    #[test]
    fn noise_ratio_is_validated() {
        assert!(inject_structural_noise(&ring(5), 1.5, 0).is_err());
        assert!(inject_structural_noise(&ring(5), -0.1, 0).is_err());
    }

    #[test]
    fn random_drop_counts_and_determinism() {
        let g = ring(30);
        assert_eq!(random_edge_drop(&g, 0, 1).unwrap(), g);
        assert_eq!(random_edge_drop(&g, 30, 1).unwrap().num_edges(), 0);
        let a = random_edge_drop(&g, 7, 42).unwrap();
        let b = random_edge_drop(&g, 7, 42).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.num_edges(), 23);
        assert!(random_edge_drop(&g, 31, 1).is_err());
    }

    #[test]
    fn feature_noise_is_seeded() {
        let g = ring(10);
        let a = add_feature_noise(&g, 0.5, 1).unwrap();
        let b = add_feature_noise(&g, 0.5, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.features(), g.features());
        assert_eq!(add_feature_noise(&g, 0.0, 1).unwrap(), g);
    }
}
