//! The 23-dimensional feature vector extracted from a CFG.
//!
//! Layout (seven groups):
//!
//! | indices | group |
//! |---------|-------|
//! | 0..5    | betweenness centrality {min, max, mean, median, std} |
//! | 5..10   | harmonic closeness {same stats} |
//! | 10..15  | degree centrality {same stats} |
//! | 15..20  | finite shortest-path lengths {same stats} |
//! | 20      | density |
//! | 21      | edge count |
//! | 22      | node count |
//!
//! Conventions: medians of even-length multisets average the two central
//! values, standard deviations are population (divide by N), all distances
//! use unit edge weights, and every degenerate case (single node, no edges,
//! no reachable pairs) resolves to 0 so vectors stay finite.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Cfg;

/// Number of features extracted per graph.
pub const FEATURE_COUNT: usize = 23;

/// Feature indices by name.
pub mod index {
    pub const BETWEENNESS: usize = 0;
    pub const CLOSENESS: usize = 5;
    pub const DEGREE: usize = 10;
    pub const SHORTEST_PATH: usize = 15;
    pub const DENSITY: usize = 20;
    pub const EDGE_COUNT: usize = 21;
    pub const NODE_COUNT: usize = 22;

    /// Offsets of the summary statistics within each 5-wide group.
    pub const STAT_MIN: usize = 0;
    pub const STAT_MAX: usize = 1;
    pub const STAT_MEAN: usize = 2;
    pub const STAT_MEDIAN: usize = 3;
    pub const STAT_STD: usize = 4;
}

/// An ordered vector of the 23 graph features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Number of entries differing from `other` by more than `tol`.
    pub fn count_changed(&self, other: &FeatureVector, tol: f64) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| (*a - *b).abs() > tol)
            .count()
    }
}

/// {min, max, mean, median, population-std} of a multiset; all zeros when
/// the multiset is empty.
pub fn summary_stats(values: &[f64]) -> [f64; 5] {
    if values.is_empty() {
        return [0.0; 5];
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mean = sorted.iter().sum::<f64>() / n;
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        let hi = sorted.len() / 2;
        (sorted[hi - 1] + sorted[hi]) / 2.0
    };
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    [min, max, mean, median, var.sqrt()]
}

/// BFS distances from `src` over successor edges; `usize::MAX` marks
/// unreachable nodes.
fn bfs_distances(g: &Cfg, src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[src] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        for &w in g.successors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Directed, unnormalized betweenness centrality (Brandes accumulation over
/// BFS shortest-path DAGs). For node v this is the sum over ordered pairs
/// (s, t), s != t != v, of sigma_st(v) / sigma_st; pairs with no path
/// contribute 0.
pub fn betweenness(g: &Cfg) -> Vec<f64> {
    let n = g.node_count();
    let mut centrality = vec![0.0; n];
    if n < 3 {
        return centrality;
    }

    let mut dist: Vec<i64> = vec![-1; n];
    let mut sigma: Vec<f64> = vec![0.0; n];
    let mut delta: Vec<f64> = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut queue: VecDeque<usize> = VecDeque::new();

    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = -1);
        sigma.iter_mut().for_each(|x| *x = 0.0);
        delta.iter_mut().for_each(|x| *x = 0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();

        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in g.successors(v) {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }

        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }

    centrality
}

/// Harmonic closeness over outgoing distances:
/// C(v) = sum over u != v reachable from v of 1 / d(v, u).
pub fn closeness(g: &Cfg) -> Vec<f64> {
    (0..g.node_count())
        .map(|v| {
            bfs_distances(g, v)
                .iter()
                .enumerate()
                .filter(|&(u, &d)| u != v && d != usize::MAX)
                .map(|(_, &d)| 1.0 / d as f64)
                .sum()
        })
        .collect()
}

/// (in-degree + out-degree) / (n - 1); 0 for a single-node graph.
pub fn degree_centrality(g: &Cfg) -> Vec<f64> {
    let n = g.node_count();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|v| (g.in_degree(v) + g.out_degree(v)) as f64 / (n - 1) as f64)
        .collect()
}

/// {min, max, mean, median, std} over all finite directed shortest-path
/// lengths d(u, v), u != v; all zeros when no pair is reachable.
pub fn shortest_path_stats(g: &Cfg) -> [f64; 5] {
    let mut lengths = Vec::new();
    for u in 0..g.node_count() {
        for (v, &d) in bfs_distances(g, u).iter().enumerate() {
            if v != u && d != usize::MAX {
                lengths.push(d as f64);
            }
        }
    }
    summary_stats(&lengths)
}

/// |E| / (|V| * (|V| - 1)); 0 for a single-node graph.
pub fn density(g: &Cfg) -> f64 {
    let n = g.node_count();
    if n < 2 {
        return 0.0;
    }
    g.edge_count() as f64 / (n as f64 * (n - 1) as f64)
}

/// Extracts all 23 features. Deterministic: depends only on graph structure.
pub fn extract_features(g: &Cfg) -> FeatureVector {
    let mut out = [0.0; FEATURE_COUNT];
    out[index::BETWEENNESS..index::BETWEENNESS + 5]
        .copy_from_slice(&summary_stats(&betweenness(g)));
    out[index::CLOSENESS..index::CLOSENESS + 5].copy_from_slice(&summary_stats(&closeness(g)));
    out[index::DEGREE..index::DEGREE + 5].copy_from_slice(&summary_stats(&degree_centrality(g)));
    out[index::SHORTEST_PATH..index::SHORTEST_PATH + 5].copy_from_slice(&shortest_path_stats(g));
    out[index::DENSITY] = density(g);
    out[index::EDGE_COUNT] = g.edge_count() as f64;
    out[index::NODE_COUNT] = g.node_count() as f64;
    FeatureVector(out)
}

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("cannot fit a normalizer on an empty training set")]
    EmptyTrainingSet,
}

/// Per-feature min-max bounds learned from a training split. Applying the
/// normalizer maps training values into [0, 1]; test-time outliers clip.
/// Constant features (hi == lo) map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub bounds: Vec<(f64, f64)>,
}

impl Normalizer {
    pub fn fit(vectors: &[FeatureVector]) -> Result<Normalizer, NormalizeError> {
        if vectors.is_empty() {
            return Err(NormalizeError::EmptyTrainingSet);
        }
        let bounds = (0..FEATURE_COUNT)
            .map(|i| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in vectors {
                    lo = lo.min(v.get(i));
                    hi = hi.max(v.get(i));
                }
                (lo, hi)
            })
            .collect();
        Ok(Normalizer { bounds })
    }

    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for (i, slot) in out.iter_mut().enumerate() {
            let (lo, hi) = self.bounds[i];
            *slot = if hi > lo {
                ((v.get(i) - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        FeatureVector(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("normalizer serializes")
    }

    pub fn from_json(text: &str) -> Result<Normalizer, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::graph::Cfg;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> Cfg {
        Cfg::new(
            "t",
            None,
            nodes[0],
            nodes.iter().map(|s| s.to_string()).collect(),
            edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        )
        .unwrap()
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} != {b}");
    }

    #[test]
    fn single_node_features_all_degenerate() {
        let g = graph(&["A"], &[]);
        let f = extract_features(&g);
        assert_eq!(f.get(index::DENSITY), 0.0);
        assert_eq!(f.get(index::EDGE_COUNT), 0.0);
        assert_eq!(f.get(index::NODE_COUNT), 1.0);
        for i in 0..20 {
            assert_eq!(f.get(i), 0.0, "feature {i}");
        }
    }

    #[test]
    fn three_cycle_symmetry() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "A")]);
        let f = extract_features(&g);
        assert_close(f.get(index::DENSITY), 0.5);
        // Degree centrality equal across nodes: min == max, std == 0.
        assert_close(f.get(index::DEGREE + index::STAT_MIN), 1.0);
        assert_close(f.get(index::DEGREE + index::STAT_MAX), 1.0);
        assert_close(f.get(index::DEGREE + index::STAT_STD), 0.0);
        // Betweenness identical for every node.
        assert_close(
            f.get(index::BETWEENNESS + index::STAT_MIN),
            f.get(index::BETWEENNESS + index::STAT_MAX),
        );
        assert_close(f.get(index::BETWEENNESS + index::STAT_STD), 0.0);
    }

    #[test]
    fn three_cycle_betweenness_is_one_per_node() {
        // Hand enumeration of the 6 ordered pairs: each node is interior to
        // exactly one 2-hop shortest path.
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "A")]);
        let b = betweenness(&g);
        for v in 0..3 {
            assert_close(b[v], 1.0);
        }
    }

    #[test]
    fn path_betweenness_middle_only() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let b = betweenness(&g);
        assert_close(b[g.index_of("A").unwrap()], 0.0);
        assert_close(b[g.index_of("B").unwrap()], 1.0);
        assert_close(b[g.index_of("C").unwrap()], 0.0);
    }

    #[test]
    fn path_closeness_hand_values() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let c = closeness(&g);
        assert_close(c[g.index_of("A").unwrap()], 1.5);
        assert_close(c[g.index_of("B").unwrap()], 1.0);
        assert_close(c[g.index_of("C").unwrap()], 0.0);
    }

    #[test]
    fn complete_digraph_closeness() {
        let nodes = ["A", "B", "C", "D"];
        let mut edges = Vec::new();
        for a in nodes {
            for b in nodes {
                if a != b {
                    edges.push((a, b));
                }
            }
        }
        let g = graph(&nodes, &edges);
        for v in closeness(&g) {
            assert_close(v, 3.0);
        }
        assert_close(density(&g), 1.0);
    }

    #[test]
    fn path_degree_centrality() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let d = degree_centrality(&g);
        assert_close(d[g.index_of("A").unwrap()], 0.5);
        assert_close(d[g.index_of("B").unwrap()], 1.0);
        assert_close(d[g.index_of("C").unwrap()], 0.5);
    }

    #[test]
    fn path_shortest_path_stats() {
        // Finite distances form the multiset {1, 1, 2}.
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let s = shortest_path_stats(&g);
        assert_close(s[index::STAT_MIN], 1.0);
        assert_close(s[index::STAT_MAX], 2.0);
        assert_close(s[index::STAT_MEAN], 4.0 / 3.0);
        assert_close(s[index::STAT_MEDIAN], 1.0);
        assert_close(s[index::STAT_STD], (2.0f64 / 9.0).sqrt());
    }

    #[test]
    fn edgeless_graph_shortest_paths_zero() {
        let g = graph(&["A", "B", "C"], &[]);
        assert_eq!(shortest_path_stats(&g), [0.0; 5]);
    }

    #[test]
    fn summary_stats_conventions() {
        // Even-length median averages the central pair; std is population.
        let s = summary_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_close(s[index::STAT_MEDIAN], 2.5);
        assert_close(s[index::STAT_MEAN], 2.5);
        assert_close(s[index::STAT_STD], (5.0f64 / 4.0).sqrt());
        assert_eq!(summary_stats(&[]), [0.0; 5]);
    }

    #[test]
    fn normalizer_scales_clips_and_handles_constants() {
        let mut a = [0.0; FEATURE_COUNT];
        let mut b = [0.0; FEATURE_COUNT];
        let mut c = [0.0; FEATURE_COUNT];
        a[0] = 2.0;
        b[0] = 4.0;
        c[0] = 6.0;
        // Feature 1 constant across training.
        a[1] = 5.0;
        b[1] = 5.0;
        c[1] = 5.0;
        let norm =
            Normalizer::fit(&[FeatureVector(a), FeatureVector(b), FeatureVector(c)]).unwrap();
        assert_close(norm.apply(&FeatureVector(a)).get(0), 0.0);
        assert_close(norm.apply(&FeatureVector(b)).get(0), 0.5);
        assert_close(norm.apply(&FeatureVector(c)).get(0), 1.0);
        assert_close(norm.apply(&FeatureVector(a)).get(1), 0.0);

        // Below training lo clips to 0, above hi clips to 1.
        let mut low = a;
        low[0] = -10.0;
        assert_close(norm.apply(&FeatureVector(low)).get(0), 0.0);
        let mut high = a;
        high[0] = 60.0;
        assert_close(norm.apply(&FeatureVector(high)).get(0), 1.0);
    }

    #[test]
    fn normalizer_empty_input_errors() {
        assert!(Normalizer::fit(&[]).is_err());
    }

    #[test]
    fn normalizer_json_round_trip() {
        let v = FeatureVector([1.0; FEATURE_COUNT]);
        let norm = Normalizer::fit(&[v]).unwrap();
        let back = Normalizer::from_json(&norm.to_json()).unwrap();
        assert_eq!(norm, back);
    }
}
