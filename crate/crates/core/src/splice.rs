//! Graph splicing: embed a target-class CFG into an original CFG through
//! two glue nodes so the combined graph shifts the feature vector while the
//! original execution path provably survives.
//!
//! Construction: a fresh `glue:entry` branches to both subgraph entries
//! (modeling an opaque always-true predicate guarding the original entry),
//! and every exit of either subgraph routes to a fresh `glue:exit`, the
//! unique exit of the combined graph. Node ids carry `org:` / `sel:`
//! prefixes so provenance stays auditable and ids can never collide.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusSample;
use crate::features::{extract_features, index, Normalizer};
use crate::graph::{Cfg, GraphLabel};
use crate::model::Model;

pub const GLUE_ENTRY: &str = "glue:entry";
pub const GLUE_EXIT: &str = "glue:exit";
pub const ORG_PREFIX: &str = "org:";
pub const SEL_PREFIX: &str = "sel:";

#[derive(Debug, Error)]
pub enum SpliceError {
    #[error("graph {0} has no exit reachable from its entry; the preserved execution path cannot be built")]
    NoReachableExit(String),
    #[error("combined graph failed validation: {0:?}")]
    InvalidCombined(Vec<crate::graph::Violation>),
    #[error("splice invariant violated: {0}")]
    InvariantViolated(String),
    #[error("empty target pool for the requested class")]
    EmptyPool,
    #[error("no sample with id {0} in the pool")]
    UnknownSample(String),
    #[error("empty originals list")]
    EmptyOriginals,
    #[error("density level {requested} exceeds the {available} absent node pairs among target nodes")]
    LevelExceedsAbsentPairs { requested: usize, available: usize },
}

/// A combined graph plus the provenance of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SplicedGraph {
    pub combined: Cfg,
    pub org_nodes: BTreeSet<String>,
    pub sel_nodes: BTreeSet<String>,
    pub glue_nodes: BTreeSet<String>,
    /// Label of the original sample (the class the attack starts from).
    pub source_label: Option<GraphLabel>,
    /// Name of the selected target sample.
    pub target_id: String,
}

/// Splices `target` into `original`. Deterministic; the combined graph has
/// exactly |V_org| + |V_sel| + 2 nodes and
/// |E_org| + |E_sel| + 2 + |exits(org)| + |exits(sel)| edges.
///
/// The original must be able to run to completion, i.e. reach one of its
/// exits from its entry; otherwise no org-only entry-to-exit path can exist
/// in the combined graph and the splice is refused.
pub fn splice(original: &Cfg, target: &Cfg) -> Result<SplicedGraph, SpliceError> {
    let reachable = original.reachable_from(original.entry());
    if !original.exits().iter().any(|&e| reachable[e]) {
        return Err(SpliceError::NoReachableExit(original.name().to_string()));
    }

    let mut nodes: Vec<String> = Vec::with_capacity(original.node_count() + target.node_count() + 2);
    nodes.push(GLUE_ENTRY.to_string());
    nodes.push(GLUE_EXIT.to_string());
    let mut org_nodes = BTreeSet::new();
    let mut sel_nodes = BTreeSet::new();
    for id in original.nodes() {
        let prefixed = format!("{ORG_PREFIX}{id}");
        org_nodes.insert(prefixed.clone());
        nodes.push(prefixed);
    }
    for id in target.nodes() {
        let prefixed = format!("{SEL_PREFIX}{id}");
        sel_nodes.insert(prefixed.clone());
        nodes.push(prefixed);
    }

    let mut edges: Vec<(String, String)> = Vec::with_capacity(
        original.edge_count() + target.edge_count() + 2 + original.exits().len() + target.exits().len(),
    );
    for &(s, d) in original.edges() {
        edges.push((
            format!("{ORG_PREFIX}{}", original.node_id(s)),
            format!("{ORG_PREFIX}{}", original.node_id(d)),
        ));
    }
    for &(s, d) in target.edges() {
        edges.push((
            format!("{SEL_PREFIX}{}", target.node_id(s)),
            format!("{SEL_PREFIX}{}", target.node_id(d)),
        ));
    }
    edges.push((
        GLUE_ENTRY.to_string(),
        format!("{ORG_PREFIX}{}", original.entry_id()),
    ));
    edges.push((
        GLUE_ENTRY.to_string(),
        format!("{SEL_PREFIX}{}", target.entry_id()),
    ));
    for exit in original.exit_ids() {
        edges.push((format!("{ORG_PREFIX}{exit}"), GLUE_EXIT.to_string()));
    }
    for exit in target.exit_ids() {
        edges.push((format!("{SEL_PREFIX}{exit}"), GLUE_EXIT.to_string()));
    }

    let name = format!("gea:{}:{}", original.name(), target.name());
    let combined = Cfg::new(name, original.label(), GLUE_ENTRY, nodes, edges)
        .map_err(SpliceError::InvalidCombined)?;

    Ok(SplicedGraph {
        combined,
        org_nodes,
        sel_nodes,
        glue_nodes: [GLUE_ENTRY.to_string(), GLUE_EXIT.to_string()]
            .into_iter()
            .collect(),
        source_label: original.label(),
        target_id: target.name().to_string(),
    })
}

/// Checks every structural invariant of a splice against the graphs that
/// produced it. `extra_target_edges` lists prefixed sel-side edges added by
/// density augmentation. Returns human-readable violations; empty = valid.
pub fn verify_splice(
    s: &SplicedGraph,
    original: &Cfg,
    target: &Cfg,
    extra_target_edges: &[(String, String)],
) -> Vec<String> {
    let mut bad = Vec::new();
    let combined = &s.combined;

    // Partition.
    let mut all: BTreeSet<String> = combined.nodes().iter().cloned().collect();
    for set in [&s.glue_nodes, &s.org_nodes, &s.sel_nodes] {
        for id in set {
            if !all.remove(id) {
                bad.push(format!("node {id} missing from combined graph or claimed twice"));
            }
        }
    }
    if !all.is_empty() {
        bad.push(format!("nodes outside the org/sel/glue partition: {all:?}"));
    }
    if s.glue_nodes.len() != 2
        || !s.glue_nodes.contains(GLUE_ENTRY)
        || !s.glue_nodes.contains(GLUE_EXIT)
    {
        bad.push(format!("glue set must be exactly {{{GLUE_ENTRY}, {GLUE_EXIT}}}"));
    }

    // Count laws.
    let expected_nodes = original.node_count() + target.node_count() + 2;
    if combined.node_count() != expected_nodes {
        bad.push(format!(
            "node count {} != {expected_nodes}",
            combined.node_count()
        ));
    }
    let expected_edges = original.edge_count()
        + target.edge_count()
        + extra_target_edges.len()
        + 2
        + original.exits().len()
        + target.exits().len();
    if combined.edge_count() != expected_edges {
        bad.push(format!(
            "edge count {} != {expected_edges}",
            combined.edge_count()
        ));
    }

    // Induced subgraphs are the originals under prefix stripping.
    check_induced(combined, &s.org_nodes, ORG_PREFIX, original, &[], &mut bad);
    check_induced(combined, &s.sel_nodes, SEL_PREFIX, target, extra_target_edges, &mut bad);

    // Entry wiring: glue:entry is the combined entry with exactly two
    // out-edges, one per subgraph entry.
    if combined.entry_id() != GLUE_ENTRY {
        bad.push(format!("combined entry is {}, not {GLUE_ENTRY}", combined.entry_id()));
    }
    if let Some(ge) = combined.index_of(GLUE_ENTRY) {
        let succ: BTreeSet<&str> = combined
            .successors(ge)
            .iter()
            .map(|&i| combined.node_id(i))
            .collect();
        let expected: BTreeSet<String> = [
            format!("{ORG_PREFIX}{}", original.entry_id()),
            format!("{SEL_PREFIX}{}", target.entry_id()),
        ]
        .into_iter()
        .collect();
        let expected_refs: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
        if succ != expected_refs {
            bad.push(format!("glue:entry out-edges {succ:?} != {expected_refs:?}"));
        }
    } else {
        bad.push(format!("{GLUE_ENTRY} not present"));
    }

    // Exit wiring: every subgraph exit routes to glue:exit, which is the
    // unique exit of the combined graph.
    if let Some(gx) = combined.index_of(GLUE_EXIT) {
        let exit_ids: Vec<&str> = combined.exit_ids().collect();
        if exit_ids != [GLUE_EXIT] {
            bad.push(format!("combined exits {exit_ids:?} != [{GLUE_EXIT}]"));
        }
        let into_exit: BTreeSet<&str> = combined
            .predecessors(gx)
            .iter()
            .map(|&i| combined.node_id(i))
            .collect();
        for exit in original.exit_ids() {
            let id = format!("{ORG_PREFIX}{exit}");
            if !into_exit.contains(id.as_str()) {
                bad.push(format!("original exit {id} has no edge to {GLUE_EXIT}"));
            }
        }
        // Sel-side exits are checked against the augmented edge set: an
        // added edge can give a former exit a successor, but the edge to
        // glue:exit must still exist.
        for exit in target.exit_ids() {
            let id = format!("{SEL_PREFIX}{exit}");
            if !into_exit.contains(id.as_str()) {
                bad.push(format!("target exit {id} has no edge to {GLUE_EXIT}"));
            }
        }
    } else {
        bad.push(format!("{GLUE_EXIT} not present"));
    }

    // Preserved execution path: glue:entry -> ... -> glue:exit through glue
    // and org nodes only.
    if !org_only_path_exists(combined, &s.org_nodes) {
        bad.push("no org-only path from glue:entry to glue:exit".to_string());
    }

    bad
}

fn check_induced(
    combined: &Cfg,
    claimed: &BTreeSet<String>,
    prefix: &str,
    expected: &Cfg,
    extra_edges: &[(String, String)],
    bad: &mut Vec<String>,
) {
    // Node sets match under prefix stripping.
    let stripped: BTreeSet<&str> = claimed
        .iter()
        .filter_map(|id| id.strip_prefix(prefix))
        .collect();
    if stripped.len() != claimed.len() {
        bad.push(format!("some {prefix} nodes lack the {prefix} prefix"));
    }
    let expected_nodes: BTreeSet<&str> = expected.nodes().iter().map(String::as_str).collect();
    if stripped != expected_nodes {
        bad.push(format!("{prefix} node set does not match the source graph"));
        return;
    }

    // Induced edge set equals the source edge set (plus any augmentation).
    let mut induced: BTreeSet<(String, String)> = BTreeSet::new();
    for &(sidx, didx) in combined.edges() {
        let sid = combined.node_id(sidx);
        let did = combined.node_id(didx);
        if claimed.contains(sid) && claimed.contains(did) {
            induced.insert((sid.to_string(), did.to_string()));
        }
    }
    let mut expected_edges: BTreeSet<(String, String)> = expected
        .edges()
        .iter()
        .map(|&(a, b)| {
            (
                format!("{prefix}{}", expected.node_id(a)),
                format!("{prefix}{}", expected.node_id(b)),
            )
        })
        .collect();
    for e in extra_edges {
        expected_edges.insert(e.clone());
    }
    if induced != expected_edges {
        bad.push(format!(
            "{prefix} induced edge set differs from the source graph ({} vs {} edges)",
            induced.len(),
            expected_edges.len()
        ));
    }
}

fn org_only_path_exists(combined: &Cfg, org_nodes: &BTreeSet<String>) -> bool {
    let Some(start) = combined.index_of(GLUE_ENTRY) else {
        return false;
    };
    let Some(goal) = combined.index_of(GLUE_EXIT) else {
        return false;
    };
    let allowed = |idx: usize| {
        let id = combined.node_id(idx);
        idx == start || idx == goal || org_nodes.contains(id)
    };
    let mut seen = vec![false; combined.node_count()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        if v == goal {
            return true;
        }
        for &w in combined.successors(v) {
            if !seen[w] && allowed(w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

/// How the target sample is chosen from the opposite-class pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetStrategy {
    MinSize,
    MedianSize,
    MaxSize,
    Explicit(String),
}

impl TargetStrategy {
    pub fn slug(&self) -> String {
        match self {
            TargetStrategy::MinSize => "min".to_string(),
            TargetStrategy::MedianSize => "median".to_string(),
            TargetStrategy::MaxSize => "max".to_string(),
            TargetStrategy::Explicit(id) => format!("explicit:{id}"),
        }
    }
}

/// Picks one target from the pool. Min/median/max go by node count with
/// ties broken toward the lexicographically smaller sample id; the median
/// of an even-sized pool is the lower median (index floor((k-1)/2) of the
/// size-sorted pool).
pub fn select_target<'a>(
    pool: &'a [CorpusSample],
    strategy: &TargetStrategy,
) -> Result<&'a CorpusSample, SpliceError> {
    if pool.is_empty() {
        return Err(SpliceError::EmptyPool);
    }
    if let TargetStrategy::Explicit(id) = strategy {
        return pool
            .iter()
            .find(|s| s.id == *id)
            .ok_or_else(|| SpliceError::UnknownSample(id.clone()));
    }

    let mut order: Vec<&CorpusSample> = pool.iter().collect();
    order.sort_by(|a, b| {
        (a.graph.node_count(), a.id.as_str()).cmp(&(b.graph.node_count(), b.id.as_str()))
    });
    Ok(match strategy {
        TargetStrategy::MinSize => order[0],
        TargetStrategy::MedianSize => order[(order.len() - 1) / 2],
        TargetStrategy::MaxSize => {
            // Largest size, smallest id among ties.
            let max_size = order.last().unwrap().graph.node_count();
            order
                .iter()
                .find(|s| s.graph.node_count() == max_size)
                .unwrap()
        }
        TargetStrategy::Explicit(_) => unreachable!(),
    })
}

/// Per-original outcome of a splice attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpliceOutcome {
    pub sample_id: String,
    pub source_label: GraphLabel,
    pub predicted: GraphLabel,
    pub flipped: bool,
    pub combined_nodes: usize,
    pub combined_density: f64,
    pub ct_ms: f64,
    /// Always true: the original subgraph and its entry-to-exit path are
    /// verified intact in every emitted splice.
    pub functionality_preserving: bool,
}

/// Aggregate result of splicing one target into a set of originals.
#[derive(Debug, Clone)]
pub struct SpliceRun {
    pub target_id: String,
    pub target_nodes: usize,
    /// Originals attacked (those the model classified correctly).
    pub attacked: usize,
    pub mr_percent: f64,
    pub mean_ct_ms: f64,
    pub mean_density: f64,
    pub outcomes: Vec<SpliceOutcome>,
    pub splices_verified: usize,
}

/// Splices `target` into every original the model classifies correctly,
/// then classifies the combined graph. Per-sample timing covers the full
/// pipeline: splice, feature extraction, normalization, inference. Every
/// splice is verified against the structural invariants before being
/// counted; a violation aborts the run.
pub fn splice_attack(
    model: &Model,
    normalizer: &Normalizer,
    originals: &[CorpusSample],
    target: &CorpusSample,
) -> Result<SpliceRun, SpliceError> {
    splice_attack_augmented(model, normalizer, originals, target, &[])
}

fn splice_attack_augmented(
    model: &Model,
    normalizer: &Normalizer,
    originals: &[CorpusSample],
    target: &CorpusSample,
    extra_target_edges: &[(String, String)],
) -> Result<SpliceRun, SpliceError> {
    if originals.is_empty() {
        return Err(SpliceError::EmptyOriginals);
    }

    let attacked: Vec<&CorpusSample> = originals
        .iter()
        .filter(|s| {
            s.graph.label().is_some_and(|label| {
                model.predict(&normalizer.apply(&extract_features(&s.graph))) == label
            })
        })
        .collect();

    let outcomes: Vec<SpliceOutcome> = attacked
        .par_iter()
        .map(|sample| -> Result<SpliceOutcome, SpliceError> {
            let started = Instant::now();
            let spliced = splice(&sample.graph, &target.graph)?;
            let combined = if extra_target_edges.is_empty() {
                spliced.combined.clone()
            } else {
                augment_combined(&spliced, extra_target_edges)?
            };
            let violations = verify_splice(
                &SplicedGraph {
                    combined: combined.clone(),
                    ..spliced.clone()
                },
                &sample.graph,
                &target.graph,
                extra_target_edges,
            );
            if !violations.is_empty() {
                return Err(SpliceError::InvariantViolated(violations.join("; ")));
            }
            let features = extract_features(&combined);
            let predicted = model.predict(&normalizer.apply(&features));
            let source = sample.graph.label().expect("attacked samples are labeled");
            Ok(SpliceOutcome {
                sample_id: sample.id.clone(),
                source_label: source,
                predicted,
                flipped: predicted != source,
                combined_nodes: combined.node_count(),
                combined_density: features.get(index::DENSITY),
                ct_ms: started.elapsed().as_secs_f64() * 1e3,
                functionality_preserving: true,
            })
        })
        .collect::<Result<_, _>>()?;

    let flips = outcomes.iter().filter(|o| o.flipped).count();
    let n = outcomes.len();
    Ok(SpliceRun {
        target_id: target.id.clone(),
        target_nodes: target.graph.node_count(),
        attacked: n,
        mr_percent: if n == 0 { 0.0 } else { 100.0 * flips as f64 / n as f64 },
        mean_ct_ms: if n == 0 {
            0.0
        } else {
            outcomes.iter().map(|o| o.ct_ms).sum::<f64>() / n as f64
        },
        mean_density: if n == 0 {
            0.0
        } else {
            outcomes.iter().map(|o| o.combined_density).sum::<f64>() / n as f64
        },
        outcomes,
        splices_verified: n,
    })
}

/// Rebuilds a combined graph with extra sel-side edges added.
fn augment_combined(
    spliced: &SplicedGraph,
    extra_edges: &[(String, String)],
) -> Result<Cfg, SpliceError> {
    let combined = &spliced.combined;
    let nodes: Vec<String> = combined.nodes().to_vec();
    let mut edges: Vec<(String, String)> = combined
        .edges()
        .iter()
        .map(|&(s, d)| (combined.node_id(s).to_string(), combined.node_id(d).to_string()))
        .collect();
    edges.extend(extra_edges.iter().cloned());
    Cfg::new(
        combined.name().to_string(),
        combined.label(),
        combined.entry_id().to_string(),
        nodes,
        edges,
    )
    .map_err(SpliceError::InvalidCombined)
}

/// One level of the density sweep.
#[derive(Debug, Clone)]
pub struct DensityLevel {
    pub edges_added: usize,
    pub mr_percent: f64,
    pub mean_density: f64,
    pub mean_ct_ms: f64,
    pub attacked: usize,
}

/// Sweeps graph density with node count fixed: for each level, `level`
/// edges are added among the target's nodes inside the combined graph
/// (sampled without replacement from the absent non-self-loop pairs,
/// seeded; levels are nested prefixes of one shuffled pool, so density is
/// strictly monotone in the level). Level 0 reproduces the plain splice
/// attack.
pub fn density_sweep(
    model: &Model,
    normalizer: &Normalizer,
    originals: &[CorpusSample],
    base_target: &CorpusSample,
    levels: &[usize],
    seed: u64,
) -> Result<Vec<DensityLevel>, SpliceError> {
    let target = &base_target.graph;
    // Absent ordered pairs among prefixed target nodes, self-loops excluded.
    let existing: BTreeSet<(usize, usize)> = target.edges().iter().copied().collect();
    let mut absent: Vec<(String, String)> = Vec::new();
    for s in 0..target.node_count() {
        for d in 0..target.node_count() {
            if s != d && !existing.contains(&(s, d)) {
                absent.push((
                    format!("{SEL_PREFIX}{}", target.node_id(s)),
                    format!("{SEL_PREFIX}{}", target.node_id(d)),
                ));
            }
        }
    }
    if let Some(&max_level) = levels.iter().max() {
        if max_level > absent.len() {
            return Err(SpliceError::LevelExceedsAbsentPairs {
                requested: max_level,
                available: absent.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..absent.len()).rev() {
        let j = rng.random_range(0..=i);
        absent.swap(i, j);
    }

    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        let extra = &absent[..level];
        let run =
            splice_attack_augmented(model, normalizer, originals, base_target, extra)?;
        out.push(DensityLevel {
            edges_added: level,
            mr_percent: run.mr_percent,
            mean_density: run.mean_density,
            mean_ct_ms: run.mean_ct_ms,
            attacked: run.attacked,
        });
    }
    Ok(out)
}
