//! Shared test helpers: seeded random graphs and independent brute-force
//! oracles for the centrality and path-length features. The oracles take
//! deliberately different routes from the library (explicit shortest-path
//! enumeration instead of Brandes accumulation, Floyd-Warshall instead of
//! BFS, locally recomputed statistics) so agreement is meaningful.

// Each integration test pulls the subset it needs.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cfgadv_core::graph::{Cfg, GraphLabel};

/// Random valid graph with `1..=max_nodes` nodes; node 0 is the entry and
/// each ordered pair becomes an edge with probability `edge_prob`
/// (entry self-loops skipped).
pub fn random_cfg(rng: &mut ChaCha8Rng, max_nodes: usize, edge_prob: f64) -> Cfg {
    let n = rng.random_range(1..=max_nodes);
    let nodes: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s == 0 && d == 0 {
                continue;
            }
            if rng.random::<f64>() < edge_prob {
                edges.push((nodes[s].clone(), nodes[d].clone()));
            }
        }
    }
    Cfg::new(
        format!("rand{n}"),
        Some(if rng.random::<bool>() {
            GraphLabel::Benign
        } else {
            GraphLabel::Malicious
        }),
        nodes[0].clone(),
        nodes,
        edges,
    )
    .expect("construction is valid by design")
}

/// All-pairs distances by Floyd-Warshall; `None` marks unreachable.
#[allow(clippy::needless_range_loop)]
pub fn floyd_warshall(g: &Cfg) -> Vec<Vec<Option<usize>>> {
    let n = g.node_count();
    let mut dist: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];
    for (v, row) in dist.iter_mut().enumerate() {
        row[v] = Some(0);
    }
    for &(s, d) in g.edges() {
        if s != d {
            dist[s][d] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = dist[i][k] else { continue };
            for j in 0..n {
                let Some(kj) = dist[k][j] else { continue };
                let candidate = ik + kj;
                if dist[i][j].is_none_or(|cur| candidate < cur) {
                    dist[i][j] = Some(candidate);
                }
            }
        }
    }
    // A self-loop edge gives d(v, v) = 1 in path terms, but pair stats only
    // use u != v, and the 0 on the diagonal is what reachability wants.
    dist
}

/// Betweenness by explicit shortest-path enumeration: for every ordered
/// pair (s, t) walk the BFS-distance DAG, collect every shortest path, and
/// credit interior nodes with their share.
pub fn brute_force_betweenness(g: &Cfg) -> Vec<f64> {
    let n = g.node_count();
    let dist = floyd_warshall(g);
    let mut centrality = vec![0.0; n];

    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let Some(d) = dist[s][t] else { continue };
            if d == 0 {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut current = vec![s];
            enumerate_paths(g, &dist, t, d, &mut current, &mut paths);
            let total = paths.len() as f64;
            if total == 0.0 {
                continue;
            }
            let mut interior_counts = vec![0usize; n];
            for path in &paths {
                for &v in &path[1..path.len() - 1] {
                    interior_counts[v] += 1;
                }
            }
            for v in 0..n {
                if v != s && v != t {
                    centrality[v] += interior_counts[v] as f64 / total;
                }
            }
        }
    }
    centrality
}

fn enumerate_paths(
    g: &Cfg,
    dist: &[Vec<Option<usize>>],
    target: usize,
    total_len: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let u = *current.last().unwrap();
    let depth = current.len() - 1;
    if u == target && depth == total_len {
        out.push(current.clone());
        return;
    }
    if depth >= total_len {
        return;
    }
    for &w in g.successors(u) {
        // Stay on shortest paths: the step must make progress toward the
        // target exactly.
        if dist[w][target] == Some(total_len - depth - 1) {
            current.push(w);
            enumerate_paths(g, dist, target, total_len, current, out);
            current.pop();
        }
    }
}

/// Harmonic closeness from a Floyd-Warshall distance matrix.
pub fn brute_force_closeness(g: &Cfg) -> Vec<f64> {
    let dist = floyd_warshall(g);
    (0..g.node_count())
        .map(|v| {
            dist[v]
                .iter()
                .enumerate()
                .filter(|&(u, d)| u != v && d.is_some())
                .map(|(_, d)| 1.0 / d.unwrap() as f64)
                .sum()
        })
        .collect()
}

/// {min, max, mean, median, population std} of the finite pair distances,
/// with the statistics recomputed locally.
pub fn brute_force_path_stats(g: &Cfg) -> [f64; 5] {
    let dist = floyd_warshall(g);
    let mut lengths: Vec<f64> = Vec::new();
    for (u, row) in dist.iter().enumerate() {
        for (v, d) in row.iter().enumerate() {
            if u != v {
                if let Some(d) = d {
                    lengths.push(*d as f64);
                }
            }
        }
    }
    if lengths.is_empty() {
        return [0.0; 5];
    }
    lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = lengths.len();
    let mean = lengths.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        lengths[n / 2]
    } else {
        0.5 * (lengths[n / 2 - 1] + lengths[n / 2])
    };
    let var = lengths.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    [lengths[0], lengths[n - 1], mean, median, var.sqrt()]
}
