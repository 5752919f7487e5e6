//! End-to-end experiment pipeline behind the `cfgadv` CLI.
//!
//! Every subcommand reads and writes artifacts under one output directory:
//!
//! ```text
//! <out>/corpus/{benign,malicious}/<id>.cfg    gen-corpus
//! <out>/features.csv                          extract
//! <out>/split.json, normalizer.json,          train
//!       model.json, train_log.csv, metrics.json
//! <out>/osaa_suite.csv, osaa_outcomes.jsonl   attack-osaa
//! <out>/gea_results.csv, gea_outcomes.jsonl   attack-gea
//! <out>/density_sweep.csv                     density-sweep
//! <out>/report.txt                            report
//! <out>/manifests/<subcommand>.json           every subcommand
//! ```
//!
//! One seed controls corpus generation, the split, training, and attack
//! sampling, so a full rerun reproduces every seed-dependent artifact byte
//! for byte. Timing columns (`*_ct_ms`) are wall-clock and are the only
//! values that vary between reruns.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    run_attack_suite, AttackConfig, AttackError, AttackMethod, SuiteResult, SuiteRow,
};
use crate::config::{ConfigError, ConfigFile};
use crate::corpus::{
    generate_corpus, load_corpus, split, write_corpus, ClassProfile, CorpusError, CorpusSample,
    CorpusSpec,
};
use crate::features::{
    extract_features, FeatureVector, NormalizeError, Normalizer, FEATURE_COUNT,
};
use crate::graph::GraphLabel;
use crate::model::{evaluate, train, Metrics, Model, ModelError, TrainConfig, TrainError};
use crate::splice::{
    density_sweep, select_target, splice_attack, DensityLevel, SpliceError, SpliceRun,
    TargetStrategy,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Splicing attack direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Mal2Ben,
    Ben2Mal,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Mal2Ben, Direction::Ben2Mal];

    /// Class of the originals being disguised.
    pub fn source(self) -> GraphLabel {
        match self {
            Direction::Mal2Ben => GraphLabel::Malicious,
            Direction::Ben2Mal => GraphLabel::Benign,
        }
    }

    /// Class of the selected target sample.
    pub fn target(self) -> GraphLabel {
        self.source().opposite()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Mal2Ben => "Mal2Ben",
            Direction::Ben2Mal => "Ben2Mal",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Direction> {
        match s {
            "Mal2Ben" | "mal2ben" => Some(Direction::Mal2Ben),
            "Ben2Mal" | "ben2mal" => Some(Direction::Ben2Mal),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Splice(#[from] SpliceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact {path}; run `cfgadv {produced_by}` first")]
    MissingArtifact { path: PathBuf, produced_by: String },
    #[error("{path}: {message}")]
    BadArtifact { path: PathBuf, message: String },
}

impl PipelineError {
    /// Process exit code: 2 usage/config, 3 data, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Attack(AttackError::BadConfig(_)) => 2,
            PipelineError::Corpus(CorpusError::BadSpec(_) | CorpusError::BadRatio(_)) => 2,
            PipelineError::Train(TrainError::BadConfig(_)) => 2,
            PipelineError::Splice(SpliceError::InvariantViolated(_)) => 4,
            PipelineError::Splice(SpliceError::InvalidCombined(_)) => 4,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything configurable from the config file; the seed comes from the
/// CLI and overrides the per-module seeds so one value drives the run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub corpus: CorpusSpec,
    pub split_ratio: f64,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub attack_methods: Vec<AttackMethod>,
    pub density_levels: Vec<usize>,
    pub density_direction: Direction,
    pub density_strategy: TargetStrategy,
}

impl Settings {
    pub fn defaults(seed: u64) -> Settings {
        Settings {
            corpus: CorpusSpec {
                seed,
                ..CorpusSpec::default()
            },
            split_ratio: 0.8,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            attack: AttackConfig::default(),
            attack_methods: AttackMethod::ALL.to_vec(),
            density_levels: vec![0, 40, 160, 640],
            density_direction: Direction::Mal2Ben,
            density_strategy: TargetStrategy::MedianSize,
        }
    }

    const KNOWN_KEYS: &'static [(&'static str, &'static str)] = &[
        ("corpus", "benign_count"),
        ("corpus", "benign_median_nodes"),
        ("corpus", "benign_sigma"),
        ("corpus", "benign_p_branch"),
        ("corpus", "benign_p_back"),
        ("corpus", "malicious_count"),
        ("corpus", "malicious_median_nodes"),
        ("corpus", "malicious_sigma"),
        ("corpus", "malicious_p_branch"),
        ("corpus", "malicious_p_back"),
        ("split", "train_ratio"),
        ("train", "hidden"),
        ("train", "learning_rate"),
        ("train", "batch_size"),
        ("train", "epochs"),
        ("train", "class_weighting"),
        ("attack", "methods"),
        ("attack", "epsilon"),
        ("attack", "step_size"),
        ("attack", "max_iterations"),
        ("attack", "early_stop"),
        ("attack", "cw_step_size"),
        ("attack", "cw_initial_c"),
        ("attack", "cw_binary_search_steps"),
        ("attack", "cw_inner_iterations"),
        ("attack", "cw_kappa"),
        ("attack", "ead_beta"),
        ("attack", "mim_decay"),
        ("attack", "jsma_theta"),
        ("attack", "jsma_gamma"),
        ("attack", "deepfool_overshoot"),
        ("attack", "deepfool_max_iterations"),
        ("density", "levels"),
        ("density", "direction"),
        ("density", "strategy"),
    ];

    /// Applies a parsed config file over the defaults.
    pub fn from_config(cfg: &ConfigFile, seed: u64) -> Result<Settings, ConfigError> {
        cfg.check_known_keys(Self::KNOWN_KEYS)?;
        let mut s = Settings::defaults(seed);

        let profile = |p: &mut ClassProfile, prefix: &str| -> Result<(), ConfigError> {
            if let Some(v) = cfg.get_usize("corpus", &format!("{prefix}_count"))? {
                p.count = v;
            }
            if let Some(v) = cfg.get_f64("corpus", &format!("{prefix}_median_nodes"))? {
                p.median_nodes = v;
            }
            if let Some(v) = cfg.get_f64("corpus", &format!("{prefix}_sigma"))? {
                p.sigma = v;
            }
            if let Some(v) = cfg.get_f64("corpus", &format!("{prefix}_p_branch"))? {
                p.p_branch = v;
            }
            if let Some(v) = cfg.get_f64("corpus", &format!("{prefix}_p_back"))? {
                p.p_back = v;
            }
            Ok(())
        };
        profile(&mut s.corpus.benign, "benign")?;
        profile(&mut s.corpus.malicious, "malicious")?;

        if let Some(v) = cfg.get_f64("split", "train_ratio")? {
            s.split_ratio = v;
        }

        if let Some(v) = cfg.get_usize_list("train", "hidden")? {
            s.train.hidden = v;
        }
        if let Some(v) = cfg.get_f64("train", "learning_rate")? {
            s.train.learning_rate = v;
        }
        if let Some(v) = cfg.get_usize("train", "batch_size")? {
            s.train.batch_size = v;
        }
        if let Some(v) = cfg.get_usize("train", "epochs")? {
            s.train.epochs = v;
        }
        if let Some(v) = cfg.get_bool("train", "class_weighting")? {
            s.train.class_weighting = v;
        }

        if let Some(raw) = cfg.get_str("attack", "methods") {
            let mut methods = Vec::new();
            for tok in raw.split(',') {
                let tok = tok.trim();
                let Some(m) = AttackMethod::from_slug(tok) else {
                    return Err(ConfigError::BadValue {
                        line: 0,
                        section: "attack".into(),
                        key: "methods".into(),
                        message: format!("unknown method `{tok}`"),
                    });
                };
                methods.push(m);
            }
            s.attack_methods = methods;
        }
        let a = &mut s.attack;
        if let Some(v) = cfg.get_f64("attack", "epsilon")? {
            a.epsilon = v;
        }
        if let Some(v) = cfg.get_f64("attack", "step_size")? {
            a.step_size = v;
        }
        if let Some(v) = cfg.get_usize("attack", "max_iterations")? {
            a.max_iterations = v;
        }
        if let Some(v) = cfg.get_bool("attack", "early_stop")? {
            a.early_stop = v;
        }
        if let Some(v) = cfg.get_f64("attack", "cw_step_size")? {
            a.cw_step_size = v;
        }
        if let Some(v) = cfg.get_f64("attack", "cw_initial_c")? {
            a.cw_initial_c = v;
        }
        if let Some(v) = cfg.get_usize("attack", "cw_binary_search_steps")? {
            a.cw_binary_search_steps = v;
        }
        if let Some(v) = cfg.get_usize("attack", "cw_inner_iterations")? {
            a.cw_inner_iterations = v;
        }
        if let Some(v) = cfg.get_f64("attack", "cw_kappa")? {
            a.cw_kappa = v;
        }
        if let Some(v) = cfg.get_f64("attack", "ead_beta")? {
            a.ead_beta = v;
        }
        if let Some(v) = cfg.get_f64("attack", "mim_decay")? {
            a.mim_decay = v;
        }
        if let Some(v) = cfg.get_f64("attack", "jsma_theta")? {
            a.jsma_theta = v;
        }
        if let Some(v) = cfg.get_f64("attack", "jsma_gamma")? {
            a.jsma_gamma = v;
        }
        if let Some(v) = cfg.get_f64("attack", "deepfool_overshoot")? {
            a.deepfool_overshoot = v;
        }
        if let Some(v) = cfg.get_usize("attack", "deepfool_max_iterations")? {
            a.deepfool_max_iterations = v;
        }

        if let Some(v) = cfg.get_usize_list("density", "levels")? {
            s.density_levels = v;
        }
        if let Some(raw) = cfg.get_str("density", "direction") {
            s.density_direction =
                Direction::from_str_opt(raw).ok_or_else(|| ConfigError::BadValue {
                    line: 0,
                    section: "density".into(),
                    key: "direction".into(),
                    message: format!("unknown direction `{raw}`"),
                })?;
        }
        if let Some(raw) = cfg.get_str("density", "strategy") {
            s.density_strategy = match raw {
                "min" => TargetStrategy::MinSize,
                "median" => TargetStrategy::MedianSize,
                "max" => TargetStrategy::MaxSize,
                other => TargetStrategy::Explicit(other.to_string()),
            };
        }

        Ok(s)
    }
}

/// Provenance record emitted by every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub subcommand: String,
    pub seed: u64,
    pub config_path: Option<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

/// One experiment run rooted at an output directory.
pub struct Pipeline {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub settings: Settings,
    pub config_path: Option<PathBuf>,
}

/// Row of the splicing experiment CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeaRow {
    pub direction: Direction,
    pub target_strategy: String,
    pub target_nodes: usize,
    pub mr_percent: f64,
    pub mean_ct_ms: f64,
}

impl Pipeline {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64, settings: Settings) -> Pipeline {
        Pipeline {
            out_dir: out_dir.into(),
            seed,
            settings,
            config_path: None,
        }
    }

    // Artifact paths.
    pub fn corpus_dir(&self) -> PathBuf {
        self.out_dir.join("corpus")
    }
    pub fn features_csv(&self) -> PathBuf {
        self.out_dir.join("features.csv")
    }
    pub fn split_json(&self) -> PathBuf {
        self.out_dir.join("split.json")
    }
    pub fn normalizer_json(&self) -> PathBuf {
        self.out_dir.join("normalizer.json")
    }
    pub fn model_json(&self) -> PathBuf {
        self.out_dir.join("model.json")
    }
    pub fn train_log_csv(&self) -> PathBuf {
        self.out_dir.join("train_log.csv")
    }
    pub fn metrics_json(&self) -> PathBuf {
        self.out_dir.join("metrics.json")
    }
    pub fn osaa_csv(&self) -> PathBuf {
        self.out_dir.join("osaa_suite.csv")
    }
    pub fn osaa_jsonl(&self) -> PathBuf {
        self.out_dir.join("osaa_outcomes.jsonl")
    }
    pub fn gea_csv(&self) -> PathBuf {
        self.out_dir.join("gea_results.csv")
    }
    pub fn gea_jsonl(&self) -> PathBuf {
        self.out_dir.join("gea_outcomes.jsonl")
    }
    pub fn density_csv(&self) -> PathBuf {
        self.out_dir.join("density_sweep.csv")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.out_dir.join("report.txt")
    }

    fn run_id(&self, subcommand: &str) -> String {
        format!("{subcommand}-seed{}", self.seed)
    }

    fn write_manifest(
        &self,
        subcommand: &str,
        started_at: u128,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<(), PipelineError> {
        let dir = self.out_dir.join("manifests");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest = RunManifest {
            run_id: self.run_id(subcommand),
            subcommand: subcommand.to_string(),
            seed: self.seed,
            config_path: self
                .config_path
                .as_ref()
                .map(|p| p.display().to_string()),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            tool_version: TOOL_VERSION.to_string(),
            started_at_unix_ms: started_at,
            finished_at_unix_ms: unix_ms(),
        };
        let path = dir.join(format!("{subcommand}.json"));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(io_err(&path))
    }

    fn require(&self, path: PathBuf, produced_by: &str) -> Result<PathBuf, PipelineError> {
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingArtifact {
                path,
                produced_by: produced_by.to_string(),
            })
        }
    }

    fn read(&self, path: &Path) -> Result<String, PipelineError> {
        fs::read_to_string(path).map_err(io_err(path))
    }

    fn write(&self, path: &Path, text: &str) -> Result<(), PipelineError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(path, text).map_err(io_err(path))
    }

    /// gen-corpus: synthesize and persist the labeled corpus.
    pub fn gen_corpus(&self) -> Result<usize, PipelineError> {
        let started = unix_ms();
        let mut spec = self.settings.corpus.clone();
        spec.seed = self.seed;
        let samples = generate_corpus(&spec)?;
        write_corpus(&self.corpus_dir(), &samples, &spec)?;
        self.write_manifest("gen-corpus", started, &[], &[self.corpus_dir()])?;
        Ok(samples.len())
    }

    /// extract: features for every corpus graph, one CSV row per sample.
    pub fn extract(&self) -> Result<usize, PipelineError> {
        let started = unix_ms();
        let corpus_dir = self.require(self.corpus_dir(), "gen-corpus")?;
        let samples = load_corpus(&corpus_dir)?;

        let mut rows: Vec<(String, GraphLabel, FeatureVector)> = samples
            .par_iter()
            .map(|s| (s.id.clone(), s.label(), extract_features(&s.graph)))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));

        let path = self.features_csv();
        self.write(&path, &render_features_csv(&rows))?;
        self.write_manifest("extract", started, &[corpus_dir], &[path])?;
        Ok(rows.len())
    }

    /// train: split, fit the normalizer on the training side, train, and
    /// evaluate on the held-out side.
    pub fn train(&self) -> Result<Metrics, PipelineError> {
        let started = unix_ms();
        let features_path = self.require(self.features_csv(), "extract")?;
        let rows = parse_features_csv(&self.read(&features_path)?, &features_path)?;

        // Stratified split over ids; reuses the corpus splitter through
        // placeholder single-node graphs keyed by id.
        let pseudo: Vec<CorpusSample> = rows
            .iter()
            .map(|(id, label, _)| CorpusSample {
                id: id.clone(),
                graph: crate::graph::Cfg::new(
                    id.clone(),
                    Some(*label),
                    "n",
                    vec!["n".to_string()],
                    vec![],
                )
                .expect("placeholder graph"),
            })
            .collect();
        let (train_split, test_split) = split(pseudo, self.settings.split_ratio, self.seed)?;
        let train_ids: Vec<String> = train_split.into_iter().map(|s| s.id).collect();
        let test_ids: Vec<String> = test_split.into_iter().map(|s| s.id).collect();
        let split_doc = SplitDoc {
            ratio: self.settings.split_ratio,
            seed: self.seed,
            train: train_ids.clone(),
            test: test_ids.clone(),
        };
        self.write(
            &self.split_json(),
            &serde_json::to_string_pretty(&split_doc).expect("split serializes"),
        )?;

        let by_id: std::collections::HashMap<&str, &(String, GraphLabel, FeatureVector)> =
            rows.iter().map(|r| (r.0.as_str(), r)).collect();
        let pick = |ids: &[String]| -> Vec<(FeatureVector, GraphLabel)> {
            ids.iter()
                .map(|id| {
                    let (_, label, fv) = by_id[id.as_str()];
                    (*fv, *label)
                })
                .collect()
        };
        let train_raw = pick(&train_ids);
        let test_raw = pick(&test_ids);

        let normalizer =
            Normalizer::fit(&train_raw.iter().map(|(fv, _)| *fv).collect::<Vec<_>>())?;
        self.write(&self.normalizer_json(), &normalizer.to_json())?;

        let normalized =
            |set: &[(FeatureVector, GraphLabel)]| -> Vec<(FeatureVector, GraphLabel)> {
                set.iter()
                    .map(|(fv, label)| (normalizer.apply(fv), *label))
                    .collect()
            };
        let train_data = normalized(&train_raw);
        let test_data = normalized(&test_raw);

        let mut train_cfg = self.settings.train.clone();
        train_cfg.seed = self.seed;
        let (mut model, log) = train(&train_data, &train_cfg)?;
        model.normalizer_ref = Some("normalizer.json".to_string());
        self.write(&self.model_json(), &model.to_json())?;
        self.write(&self.train_log_csv(), &log.to_csv())?;

        let metrics = evaluate(&model, &test_data).expect("test split is nonempty");
        self.write(
            &self.metrics_json(),
            &serde_json::to_string_pretty(&metrics).expect("metrics serialize"),
        )?;

        self.write_manifest(
            "train",
            started,
            &[features_path],
            &[
                self.split_json(),
                self.normalizer_json(),
                self.model_json(),
                self.train_log_csv(),
                self.metrics_json(),
            ],
        )?;
        Ok(metrics)
    }

    fn load_model_and_normalizer(&self) -> Result<(Model, Normalizer), PipelineError> {
        let model_path = self.require(self.model_json(), "train")?;
        let model = Model::from_json(&self.read(&model_path)?)?;
        let norm_path = self.require(self.normalizer_json(), "train")?;
        let normalizer =
            Normalizer::from_json(&self.read(&norm_path)?).map_err(|e| {
                PipelineError::BadArtifact {
                    path: norm_path.clone(),
                    message: e.to_string(),
                }
            })?;
        Ok((model, normalizer))
    }

    fn load_split(&self) -> Result<SplitDoc, PipelineError> {
        let path = self.require(self.split_json(), "train")?;
        serde_json::from_str(&self.read(&path)?).map_err(|e| PipelineError::BadArtifact {
            path,
            message: e.to_string(),
        })
    }

    /// attack-osaa: run the configured methods over the normalized test
    /// split and write the summary CSV plus per-sample JSONL audit records.
    pub fn attack_osaa(&self) -> Result<Vec<SuiteRow>, PipelineError> {
        let started = unix_ms();
        let (model, normalizer) = self.load_model_and_normalizer()?;
        let features_path = self.require(self.features_csv(), "extract")?;
        let rows = parse_features_csv(&self.read(&features_path)?, &features_path)?;
        let split_doc = self.load_split()?;

        let by_id: std::collections::HashMap<&str, &(String, GraphLabel, FeatureVector)> =
            rows.iter().map(|r| (r.0.as_str(), r)).collect();
        let test_samples: Vec<(String, FeatureVector, GraphLabel)> = split_doc
            .test
            .iter()
            .map(|id| {
                let (_, label, fv) = by_id[id.as_str()];
                (id.clone(), normalizer.apply(fv), *label)
            })
            .collect();

        let configs: Vec<(AttackMethod, AttackConfig)> = self
            .settings
            .attack_methods
            .iter()
            .map(|m| (*m, self.settings.attack.clone()))
            .collect();
        let result: SuiteResult = run_attack_suite(&model, &test_samples, &configs)?;

        self.write(&self.osaa_csv(), &result.to_csv())?;
        let mut jsonl = String::new();
        let run_id = self.run_id("attack-osaa");
        for (row, outcomes) in result.rows.iter().zip(result.outcomes.iter()) {
            for (sample_id, outcome) in outcomes {
                let record = OsaaRecord {
                    run_id: &run_id,
                    method: row.method.slug(),
                    sample_id,
                    outcome,
                };
                jsonl.push_str(&serde_json::to_string(&record).expect("record serializes"));
                jsonl.push('\n');
            }
        }
        self.write(&self.osaa_jsonl(), &jsonl)?;

        self.write_manifest(
            "attack-osaa",
            started,
            &[
                features_path,
                self.model_json(),
                self.normalizer_json(),
                self.split_json(),
            ],
            &[self.osaa_csv(), self.osaa_jsonl()],
        )?;
        Ok(result.rows)
    }

    fn load_corpus_and_split(
        &self,
    ) -> Result<(Vec<CorpusSample>, SplitDoc), PipelineError> {
        let corpus_dir = self.require(self.corpus_dir(), "gen-corpus")?;
        let corpus = load_corpus(&corpus_dir)?;
        let split_doc = self.load_split()?;
        Ok((corpus, split_doc))
    }

    /// attack-gea: for both directions and the three size strategies,
    /// splice the selected target into every test-split original of the
    /// source class and measure the flip rate. Targets come from the
    /// training split so the attack never peeks at held-out samples.
    pub fn attack_gea(&self) -> Result<Vec<GeaRow>, PipelineError> {
        let started = unix_ms();
        let (model, normalizer) = self.load_model_and_normalizer()?;
        let (corpus, split_doc) = self.load_corpus_and_split()?;

        let in_split = |ids: &[String], s: &CorpusSample| ids.iter().any(|id| id == &s.id);
        let mut rows = Vec::new();
        let mut jsonl = String::new();
        let run_id = self.run_id("attack-gea");

        for direction in Direction::BOTH {
            let originals: Vec<CorpusSample> = corpus
                .iter()
                .filter(|s| s.label() == direction.source() && in_split(&split_doc.test, s))
                .cloned()
                .collect();
            let pool: Vec<CorpusSample> = corpus
                .iter()
                .filter(|s| s.label() == direction.target() && in_split(&split_doc.train, s))
                .cloned()
                .collect();

            for strategy in [
                TargetStrategy::MinSize,
                TargetStrategy::MedianSize,
                TargetStrategy::MaxSize,
            ] {
                let target = select_target(&pool, &strategy)?;
                let run: SpliceRun = splice_attack(&model, &normalizer, &originals, target)?;
                for outcome in &run.outcomes {
                    let record = GeaRecord {
                        run_id: &run_id,
                        direction,
                        target_strategy: strategy.slug(),
                        target_id: &run.target_id,
                        outcome,
                    };
                    jsonl.push_str(&serde_json::to_string(&record).expect("record serializes"));
                    jsonl.push('\n');
                }
                rows.push(GeaRow {
                    direction,
                    target_strategy: strategy.slug(),
                    target_nodes: run.target_nodes,
                    mr_percent: run.mr_percent,
                    mean_ct_ms: run.mean_ct_ms,
                });
            }
        }

        self.write(&self.gea_csv(), &render_gea_csv(&rows))?;
        self.write(&self.gea_jsonl(), &jsonl)?;
        self.write_manifest(
            "attack-gea",
            started,
            &[
                self.corpus_dir(),
                self.model_json(),
                self.normalizer_json(),
                self.split_json(),
            ],
            &[self.gea_csv(), self.gea_jsonl()],
        )?;
        Ok(rows)
    }

    /// density-sweep: fixed node count, increasing edge counts among the
    /// target's nodes inside the combined graphs.
    pub fn density_sweep(&self) -> Result<Vec<DensityLevel>, PipelineError> {
        let started = unix_ms();
        let (model, normalizer) = self.load_model_and_normalizer()?;
        let (corpus, split_doc) = self.load_corpus_and_split()?;
        let direction = self.settings.density_direction;

        let in_split = |ids: &[String], s: &CorpusSample| ids.iter().any(|id| id == &s.id);
        let originals: Vec<CorpusSample> = corpus
            .iter()
            .filter(|s| s.label() == direction.source() && in_split(&split_doc.test, s))
            .cloned()
            .collect();
        let pool: Vec<CorpusSample> = corpus
            .iter()
            .filter(|s| s.label() == direction.target() && in_split(&split_doc.train, s))
            .cloned()
            .collect();
        let base_target = select_target(&pool, &self.settings.density_strategy)?;

        let levels = density_sweep(
            &model,
            &normalizer,
            &originals,
            base_target,
            &self.settings.density_levels,
            self.seed,
        )?;

        let mut csv = String::from("edges_added,mean_density,MR_percent,mean_ct_ms\n");
        for level in &levels {
            csv.push_str(&format!(
                "{},{},{},{:.6}\n",
                level.edges_added, level.mean_density, level.mr_percent, level.mean_ct_ms
            ));
        }
        self.write(&self.density_csv(), &csv)?;
        self.write_manifest(
            "density-sweep",
            started,
            &[
                self.corpus_dir(),
                self.model_json(),
                self.normalizer_json(),
                self.split_json(),
            ],
            &[self.density_csv()],
        )?;
        Ok(levels)
    }

    /// report: aggregate the metrics, attack, and splicing artifacts into
    /// the two experiment tables plus the classifier block.
    pub fn report(&self) -> Result<String, PipelineError> {
        let started = unix_ms();
        let osaa_path = self.require(self.osaa_csv(), "attack-osaa")?;
        let osaa_rows = parse_suite_csv(&self.read(&osaa_path)?, &osaa_path)?;
        let gea_path = self.require(self.gea_csv(), "attack-gea")?;
        let gea_rows = parse_gea_csv(&self.read(&gea_path)?, &gea_path)?;
        let metrics_path = self.require(self.metrics_json(), "train")?;
        let metrics: Metrics = serde_json::from_str(&self.read(&metrics_path)?).map_err(|e| {
            PipelineError::BadArtifact {
                path: metrics_path.clone(),
                message: e.to_string(),
            }
        })?;
        let density = if self.density_csv().exists() {
            Some(self.read(&self.density_csv())?)
        } else {
            None
        };

        let text = render_report(&metrics, &osaa_rows, &gea_rows, density.as_deref());
        self.write(&self.report_txt(), &text)?;
        self.write_manifest(
            "report",
            started,
            &[metrics_path, osaa_path, gea_path],
            &[self.report_txt()],
        )?;
        Ok(text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDoc {
    pub ratio: f64,
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Serialize)]
struct OsaaRecord<'a> {
    run_id: &'a str,
    method: &'a str,
    sample_id: &'a str,
    #[serde(flatten)]
    outcome: &'a crate::attack::AttackOutcome,
}

#[derive(Serialize)]
struct GeaRecord<'a> {
    run_id: &'a str,
    direction: Direction,
    target_strategy: String,
    target_id: &'a str,
    #[serde(flatten)]
    outcome: &'a crate::splice::SpliceOutcome,
}

/// `sample_id,label,f00..f22` with 17-significant-digit values.
pub fn render_features_csv(rows: &[(String, GraphLabel, FeatureVector)]) -> String {
    let mut out = String::from("sample_id,label");
    for i in 0..FEATURE_COUNT {
        out.push_str(&format!(",f{i:02}"));
    }
    out.push('\n');
    for (id, label, fv) in rows {
        out.push_str(id);
        out.push(',');
        out.push_str(label.as_str());
        for v in fv.values() {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_features_csv(
    text: &str,
    path: &Path,
) -> Result<Vec<(String, GraphLabel, FeatureVector)>, PipelineError> {
    let bad = |message: String| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if !header.starts_with("sample_id,label,f00") {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + FEATURE_COUNT {
            return Err(bad(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                2 + FEATURE_COUNT,
                fields.len()
            )));
        }
        let label = match fields[1] {
            "benign" => GraphLabel::Benign,
            "malicious" => GraphLabel::Malicious,
            other => return Err(bad(format!("line {}: unknown label `{other}`", lineno + 2))),
        };
        let mut values = [0.0; FEATURE_COUNT];
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = fields[2 + i]
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
        }
        rows.push((fields[0].to_string(), label, FeatureVector(values)));
    }
    Ok(rows)
}

fn render_gea_csv(rows: &[GeaRow]) -> String {
    let mut out = String::from("direction,target_strategy,target_nodes,MR_percent,mean_ct_ms\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            row.direction, row.target_strategy, row.target_nodes, row.mr_percent, row.mean_ct_ms
        ));
    }
    out
}

pub fn parse_gea_csv(text: &str, path: &Path) -> Result<Vec<GeaRow>, PipelineError> {
    let bad = |message: String| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        message,
    };
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("line {}: expected 5 fields", lineno + 1)));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", lineno + 1)));
        rows.push(GeaRow {
            direction: Direction::from_str_opt(fields[0])
                .ok_or_else(|| bad(format!("line {}: bad direction", lineno + 1)))?,
            target_strategy: fields[1].to_string(),
            target_nodes: fields[2]
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?,
            mr_percent: parse_f(fields[3])?,
            mean_ct_ms: parse_f(fields[4])?,
        });
    }
    Ok(rows)
}

pub fn parse_suite_csv(text: &str, path: &Path) -> Result<Vec<SuiteRow>, PipelineError> {
    let bad = |message: String| PipelineError::BadArtifact {
        path: path.to_path_buf(),
        message,
    };
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("line {}: expected 5 fields", lineno + 1)));
        }
        let method = AttackMethod::from_slug(fields[0])
            .ok_or_else(|| bad(format!("line {}: unknown method `{}`", lineno + 1, fields[0])))?;
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", lineno + 1)));
        rows.push(SuiteRow {
            method,
            samples: fields[1]
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?,
            mr_percent: parse_f(fields[2])?,
            avg_fg: parse_f(fields[3])?,
            mean_ct_ms: parse_f(fields[4])?,
            no_successes: false,
        });
    }
    Ok(rows)
}

fn render_report(
    metrics: &Metrics,
    osaa: &[SuiteRow],
    gea: &[GeaRow],
    density_csv: Option<&str>,
) -> String {
    let mut out = String::new();
    out.push_str("Classifier metrics (held-out test split)\n");
    out.push_str(&format!("  accuracy : {:6.2} %\n", metrics.accuracy * 100.0));
    out.push_str(&format!("  FNR      : {:6.2} %\n", metrics.fnr * 100.0));
    out.push_str(&format!("  FPR      : {:6.2} %\n", metrics.fpr * 100.0));
    out.push_str(&format!(
        "  confusion: TP {}  FN {}  FP {}  TN {}\n\n",
        metrics.confusion.tp, metrics.confusion.fn_, metrics.confusion.fp, metrics.confusion.tn
    ));

    out.push_str("Feature-space attack evaluation\n");
    out.push_str("  Attack Method | Samples | MR (%) | Avg.FG | CT (ms)\n");
    out.push_str("  --------------+---------+--------+--------+--------\n");
    for row in osaa {
        out.push_str(&format!(
            "  {:<13} | {:>7} | {:>6.2} | {:>6.2} | {:>7.2}\n",
            row.method.display_name(),
            row.samples,
            row.mr_percent,
            row.avg_fg,
            row.mean_ct_ms
        ));
    }
    out.push('\n');

    out.push_str("Graph splicing evaluation\n");
    out.push_str("  Direction | Size    | # Nodes | MR (%) | CT (ms)\n");
    out.push_str("  ----------+---------+---------+--------+--------\n");
    for row in gea {
        let size = match row.target_strategy.as_str() {
            "min" => "Minimum",
            "median" => "Median",
            "max" => "Maximum",
            other => other,
        };
        out.push_str(&format!(
            "  {:<9} | {:<7} | {:>7} | {:>6.2} | {:>7.2}\n",
            row.direction, size, row.target_nodes, row.mr_percent, row.mean_ct_ms
        ));
    }

    if let Some(csv) = density_csv {
        out.push('\n');
        out.push_str("Density sweep (fixed node count)\n");
        out.push_str("  Edges Added | Mean Density | MR (%) | CT (ms)\n");
        out.push_str("  ------------+--------------+--------+--------\n");
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 4 {
                let density: f64 = fields[1].parse().unwrap_or(0.0);
                let mr: f64 = fields[2].parse().unwrap_or(0.0);
                let ct: f64 = fields[3].parse().unwrap_or(0.0);
                out.push_str(&format!(
                    "  {:>11} | {:>12.6} | {:>6.2} | {:>7.2}\n",
                    fields[0], density, mr, ct
                ));
            }
        }
    }

    out
}
