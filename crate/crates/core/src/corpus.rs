//! Synthetic CFG corpus: seeded generation, on-disk layout, and stratified
//! train/test splits.
//!
//! Each graph is a structured CFG skeleton: a sequential spine where each
//! extension is either one straight-line block or (with probability
//! `p_branch`) a diamond of two parallel branches rejoining, plus loop
//! back-edges added with probability `p_back` per non-terminal node. The
//! terminal node never receives a back-edge, so every graph keeps exactly
//! one exit, reachable from the entry, and every node is reachable from the
//! entry. Class separation comes from the size and branchiness profiles,
//! never from labels leaking into features.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::graph::{parse_cfg, serialize_cfg, Cfg, GraphLabel};

/// Node-count and wiring profile of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub count: usize,
    /// Median of the log-normal node-count distribution.
    pub median_nodes: f64,
    /// Log-space standard deviation (dispersion) of the node count.
    pub sigma: f64,
    /// Probability that a spine extension is a diamond branch.
    pub p_branch: f64,
    /// Per-node probability of a loop back-edge.
    pub p_back: f64,
}

/// Full corpus recipe. The default mirrors the 2,281 / 276 class imbalance
/// of the reference dataset; benign programs are modeled as larger,
/// chain-like software and malware as smaller, branchier and loopier
/// payloads, which also gives the splicing experiments a meaningful
/// size spread on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub benign: ClassProfile,
    pub malicious: ClassProfile,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            benign: ClassProfile {
                count: 276,
                median_nodes: 60.0,
                sigma: 0.6,
                p_branch: 0.15,
                p_back: 0.02,
            },
            malicious: ClassProfile {
                count: 2281,
                median_nodes: 20.0,
                sigma: 0.6,
                p_branch: 0.6,
                p_back: 0.25,
            },
            seed: 42,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (name, profile) in [("benign", &self.benign), ("malicious", &self.malicious)] {
            if profile.count == 0 {
                return Err(CorpusError::BadSpec(format!("{name} count must be >= 1")));
            }
            if !(profile.median_nodes > 0.0 && profile.sigma > 0.0) {
                return Err(CorpusError::BadSpec(format!(
                    "{name} distribution parameters must be positive"
                )));
            }
            if !(0.0..=1.0).contains(&profile.p_branch) || !(0.0..=1.0).contains(&profile.p_back) {
                return Err(CorpusError::BadSpec(format!(
                    "{name} probabilities must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// A labeled graph with its stable sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSample {
    pub id: String,
    pub graph: Cfg,
}

impl CorpusSample {
    pub fn label(&self) -> GraphLabel {
        self.graph.label().expect("corpus samples are labeled")
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus spec: {0}")]
    BadSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
    #[error("invalid split ratio {0}; must lie strictly between 0 and 1")]
    BadRatio(f64),
    #[error("class {0} would be absent from the training split")]
    ClassAbsent(GraphLabel),
    #[error("split would leave the {0} side empty")]
    EmptySplit(&'static str),
}

/// Caps pathological log-normal tail draws; node ids are zero-padded to
/// four digits, so graphs stay below 10,000 nodes by construction.
const MAX_NODES: usize = 5000;

/// Generates the corpus. Deterministic given the spec: every graph draws
/// from its own sub-seed (seed mixed with a per-class offset and the sample
/// index), so parallel generation cannot change the output. Sample index 0
/// of each class is forced to a single-node graph so the degenerate
/// smallest-program case always exists in both pools.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusSample>, CorpusError> {
    spec.validate()?;
    let mut samples: Vec<CorpusSample> = Vec::with_capacity(spec.benign.count + spec.malicious.count);

    for (label, profile, class_tag) in [
        (GraphLabel::Benign, &spec.benign, 1u64),
        (GraphLabel::Malicious, &spec.malicious, 2u64),
    ] {
        let class_samples: Vec<CorpusSample> = (0..profile.count)
            .into_par_iter()
            .map(|idx| {
                let sub_seed = derive_seed(spec.seed, (class_tag << 32) | idx as u64);
                let id = match label {
                    GraphLabel::Benign => format!("b{idx:04}"),
                    GraphLabel::Malicious => format!("m{idx:04}"),
                };
                let force_single_node = idx == 0;
                let graph = generate_graph(&id, label, profile, sub_seed, force_single_node);
                CorpusSample { id, graph }
            })
            .collect();
        samples.extend(class_samples);
    }

    Ok(samples)
}

fn generate_graph(
    id: &str,
    label: GraphLabel,
    profile: &ClassProfile,
    seed: u64,
    force_single_node: bool,
) -> Cfg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = if force_single_node {
        1
    } else {
        let dist = LogNormal::new(profile.median_nodes.ln(), profile.sigma)
            .expect("validated parameters");
        (dist.sample(&mut rng).round() as usize).clamp(1, MAX_NODES)
    };

    let node_id = |i: usize| format!("n{i:04}");
    let nodes: Vec<String> = (0..n).map(node_id).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();

    if n > 1 {
        // Spine: extend from `cur` with either a single block or a diamond
        // (split, two branches, join) when enough nodes remain.
        let mut cur = 0usize;
        let mut next = 1usize;
        while next < n {
            let remaining = n - next;
            if remaining >= 3 && rng.random::<f64>() < profile.p_branch {
                let (a, b, join) = (next, next + 1, next + 2);
                edges.push((cur, a));
                edges.push((cur, b));
                edges.push((a, join));
                edges.push((b, join));
                cur = join;
                next += 3;
            } else {
                edges.push((cur, next));
                cur = next;
                next += 1;
            }
        }
        let terminal = cur;

        // Loop back-edges from non-terminal nodes to an earlier node; the
        // terminal stays clean so the single exit survives.
        let mut edge_set: HashSet<(usize, usize)> = edges.iter().copied().collect();
        for i in 1..n {
            if i == terminal {
                continue;
            }
            if rng.random::<f64>() < profile.p_back {
                let j = rng.random_range(0..i);
                if edge_set.insert((i, j)) {
                    edges.push((i, j));
                }
            }
        }
    }

    Cfg::new(
        id,
        Some(label),
        node_id(0),
        nodes,
        edges
            .into_iter()
            .map(|(a, b)| (node_id(a), node_id(b)))
            .collect(),
    )
    .expect("generated skeletons satisfy all graph invariants")
}

/// On-disk layout: `<dir>/benign/<id>.cfg`, `<dir>/malicious/<id>.cfg`,
/// plus `manifest.json` recording the generating spec.
pub fn write_corpus(dir: &Path, samples: &[CorpusSample], spec: &CorpusSpec) -> Result<(), CorpusError> {
    let io_err = |path: &Path, source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    for sub in ["benign", "malicious"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    for sample in samples {
        let sub = sample.label().as_str();
        let path = dir.join(sub).join(format!("{}.cfg", sample.id));
        fs::write(&path, serialize_cfg(&sample.graph)).map_err(|e| io_err(&path, e))?;
    }
    let manifest = serde_json::to_string_pretty(spec).expect("spec serializes");
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;
    Ok(())
}

/// Loads a corpus directory written by [`write_corpus`]. Files are read in
/// sorted order per class directory; parse failures and label/directory
/// mismatches report the offending path.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusSample>, CorpusError> {
    let mut samples = Vec::new();
    for (sub, expected) in [
        ("benign", GraphLabel::Benign),
        ("malicious", GraphLabel::Malicious),
    ] {
        let class_dir = dir.join(sub);
        let mut paths: Vec<PathBuf> = fs::read_dir(&class_dir)
            .map_err(|e| CorpusError::Io {
                path: class_dir.clone(),
                source: e,
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "cfg"))
            .collect();
        paths.sort();

        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| CorpusError::Io {
                path: path.clone(),
                source: e,
            })?;
            let graph = parse_cfg(&text).map_err(|e| CorpusError::BadFile {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if graph.label() != Some(expected) {
                return Err(CorpusError::BadFile {
                    path,
                    message: format!(
                        "label {:?} does not match directory {sub}",
                        graph.label().map(|l| l.as_str())
                    ),
                });
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            samples.push(CorpusSample { id, graph });
        }
    }
    Ok(samples)
}

/// Stratified split: per class, `round(ratio * count)` samples train and
/// the rest test, chosen by a seeded shuffle, so the class ratio is
/// preserved within one sample. Errors when a class would vanish from the
/// training split or either split would be empty. Output is sorted by
/// sample id.
pub fn split(
    samples: Vec<CorpusSample>,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<CorpusSample>, Vec<CorpusSample>), CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::BadRatio(ratio));
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let (mut benign, mut malicious): (Vec<CorpusSample>, Vec<CorpusSample>) = samples
        .into_iter()
        .partition(|s| s.label() == GraphLabel::Benign);

    for (class_tag, class, label) in [
        (1u64, &mut benign, GraphLabel::Benign),
        (2u64, &mut malicious, GraphLabel::Malicious),
    ] {
        if class.is_empty() {
            continue;
        }
        class.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5eed_0000 | class_tag));
        for i in (1..class.len()).rev() {
            let j = rng.random_range(0..=i);
            class.swap(i, j);
        }
        let n_train = (ratio * class.len() as f64).round() as usize;
        if n_train == 0 {
            return Err(CorpusError::ClassAbsent(label));
        }
        for (i, sample) in class.drain(..).enumerate() {
            if i < n_train {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }

    if train.is_empty() {
        return Err(CorpusError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(CorpusError::EmptySplit("test"));
    }
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((train, test))
}
