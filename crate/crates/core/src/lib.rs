//! Classifies programs as benign or malicious from 23 control-flow-graph
//! features and stress-tests that classifier two ways: six white-box
//! feature-space perturbation attacks, and a graph-splicing transform that
//! embeds a target-class graph into an original graph while provably keeping
//! the original execution path intact.
//!
//! Module map:
//! - [`graph`]: CFG data model, text-format parser/serializer, validation.
//! - [`features`]: the 23-dimensional feature vector and min-max normalizer.
//! - [`model`]: feed-forward classifier with analytic input gradients.
//! - [`attack`]: the six feature-space attacks and the evaluation suite.
//! - [`splice`]: graph splicing, target selection, and the size/density
//!   experiments.
//! - [`corpus`]: synthetic corpus generation, on-disk layout, stratified
//!   splits.
//! - [`config`]: `key=value` config files with per-module sections.
//! - [`pipeline`]: the subcommand implementations behind the `cfgadv` CLI.

pub mod attack;
pub mod config;
pub mod corpus;
pub mod features;
pub mod graph;
pub mod model;
pub mod pipeline;
pub mod splice;

pub use features::{FeatureVector, Normalizer, FEATURE_COUNT};
pub use graph::{parse_cfg, serialize_cfg, Cfg, CfgDraft, GraphLabel, ParseError, Violation};

/// Mixes a base seed with a stream index so parallel workers draw from
/// disjoint, reproducible streams (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
