//! Experiment configuration.
//!
//! A config is one TOML document. The grammar, with defaults:
//!
//! ```toml
//! kind = "cross-matrix"        # name-the-dataset | cross-matrix | noisy-source | synth-generate
//! seed = 7                     # required; `--seed` overrides it
//! experiment_id = "my-run"     # default: the kind
//! output = "out/my-run"        # default: $BIASBENCH_OUT, then ./biasbench-out
//!
//! [data]                       # exactly one of `synth` or `files`
//! files = ["a.csv", "b.csv"]   # feature tables, relative to the config file
//! labels = "labels.csv"        # optional class-name map; frozen when given
//! normalize = "none"           # none | l2
//!
//! [data.synth]
//! n_domains = 3
//! n_classes = 4
//! dim = 8
//! per_class = 40
//! class_sep = 3.0
//! shift = 0.0
//! cluster_std = 1.0
//! noise_rate = 0.0
//! class_subsets = [[0, 1], [1, 2, 3], [0, 3]]   # optional
//!
//! [name_the_dataset]           # for kind = "name-the-dataset"
//! train_sizes = [10, 50]
//! test_per_collection = 100
//! repetitions = 10
//! c_grid = [0.01, 0.1, 1.0]    # default: 1e-6 .. 1e3
//! folds = 5
//!
//! [cross_matrix]               # for kind = "cross-matrix"
//! repetitions = 10
//! folds = 5
//! fixed_negatives_from_train = false
//! task = { kind = "multiclass", train_per_class = 15, test_per_class = 5 }
//! # task = { kind = "binary", class = 0, train_pos = 50, train_neg = 1000, test_pos = 50, test_neg = 1000 }
//!
//! [noisy_source]               # for kind = "noisy-source"; the first collection is the source
//! train_sizes = [10, 20, 30]
//! test_per_class = 30
//! methods = ["plain-svm", "sa", "self-label"]
//! repetitions = 10
//! source_noise_rate = 0.2      # synthetic data only: label noise of the source
//! [noisy_source.adapt]         # c_grid, cv_folds, seed, subspace_dim, dam_theta, dam_gamma, dam_epsilon
//! [noisy_source.landmark]      # q_range, c_grid, subspace_dim, weight_step
//! ```

use std::path::{Path, PathBuf};

use biasbench::adapt::{AdaptSettings, LandmarkConfig};
use biasbench::linear::default_c_grid;
use biasbench::metrics::{CrossMatrixConfig, CrossTask, Method, NameTheDatasetConfig, NoisySourceConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    NameTheDataset,
    CrossMatrix,
    NoisySource,
    SynthGenerate,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::NameTheDataset => "name-the-dataset",
            Kind::CrossMatrix => "cross-matrix",
            Kind::NoisySource => "noisy-source",
            Kind::SynthGenerate => "synth-generate",
        }
    }

    fn section(self) -> Option<&'static str> {
        match self {
            Kind::NameTheDataset => Some("name_the_dataset"),
            Kind::CrossMatrix => Some("cross_matrix"),
            Kind::NoisySource => Some("noisy_source"),
            Kind::SynthGenerate => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    #[default]
    None,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthLayout {
    pub n_domains: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    #[serde(default = "three")]
    pub class_sep: f64,
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "one")]
    pub cluster_std: f64,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_subsets: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthLayout>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub normalize: Normalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameSection {
    pub train_sizes: Vec<usize>,
    pub test_per_collection: usize,
    pub repetitions: usize,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "five")]
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSection {
    pub task: CrossTask,
    pub repetitions: usize,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "five")]
    pub folds: usize,
    #[serde(default)]
    pub fixed_negatives_from_train: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisySection {
    pub train_sizes: Vec<usize>,
    pub test_per_class: usize,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    #[serde(default)]
    pub source_noise_rate: f64,
    /// Its seed defaults to the experiment seed.
    #[serde(default)]
    pub adapt: AdaptSettings,
    #[serde(default = "ten")]
    pub self_label_iterations: usize,
    #[serde(default = "two")]
    pub self_label_per_class: usize,
    #[serde(default = "two")]
    pub reshape_domains: usize,
    #[serde(default = "gamma_grid")]
    pub dam_gamma_grid: Vec<f64>,
    #[serde(default)]
    pub landmark: LandmarkConfig,
}

fn one() -> f64 {
    1.0
}
fn three() -> f64 {
    3.0
}
fn two() -> usize {
    2
}
fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}
fn gamma_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub experiment_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_the_dataset: Option<NameSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_matrix: Option<CrossSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_source: Option<NoisySection>,
}

/// Every problem found in a config, not just the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

/// (table path, required keys, optional keys)
const SCHEMA: &[(&str, &[&str], &[&str])] = &[
    ("", &["kind", "seed", "data"], &["experiment_id", "output", "name_the_dataset", "cross_matrix", "noisy_source"]),
    ("data", &[], &["synth", "files", "labels", "normalize"]),
    (
        "data.synth",
        &["n_domains", "n_classes", "dim", "per_class"],
        &["class_sep", "shift", "cluster_std", "noise_rate", "class_subsets"],
    ),
    ("name_the_dataset", &["train_sizes", "test_per_collection", "repetitions"], &["c_grid", "folds"]),
    ("cross_matrix", &["task", "repetitions"], &["c_grid", "folds", "fixed_negatives_from_train"]),
    (
        "noisy_source",
        &["train_sizes", "test_per_class", "methods", "repetitions"],
        &[
            "source_noise_rate",
            "adapt",
            "self_label_iterations",
            "self_label_per_class",
            "reshape_domains",
            "dam_gamma_grid",
            "landmark",
        ],
    ),
    (
        "noisy_source.adapt",
        &[],
        &["c_grid", "cv_folds", "seed", "subspace_dim", "dam_theta", "dam_gamma", "dam_epsilon"],
    ),
    ("noisy_source.landmark", &[], &["q_range", "c_grid", "subspace_dim", "weight_step"]),
];

const TASK_KEYS: &[(&str, &[&str])] = &[
    ("binary", &["class", "train_pos", "train_neg", "test_pos", "test_neg"]),
    ("multiclass", &["train_per_class", "test_per_class"]),
];

fn lookup<'a>(root: &'a Table, path: &str) -> Option<&'a Table> {
    let mut t = root;
    for part in path.split('.').filter(|p| !p.is_empty()) {
        t = t.get(part)?.as_table()?;
    }
    Some(t)
}

fn section_name(path: &str) -> String {
    if path.is_empty() {
        "the top level".into()
    } else {
        format!("[{path}]")
    }
}

fn check_keys(root: &Table, errors: &mut Vec<String>) {
    for (path, required, optional) in SCHEMA {
        let Some(t) = lookup(root, path) else { continue };
        for key in t.keys() {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                errors.push(format!("unknown key `{key}` in {}", section_name(path)));
            }
        }
        for key in *required {
            if !t.contains_key(*key) {
                errors.push(if *key == "seed" {
                    "seed required".to_string()
                } else {
                    format!("missing key `{key}` in {}", section_name(path))
                });
            }
        }
    }
    if let Some(task) = lookup(root, "cross_matrix").and_then(|t| t.get("task")).and_then(Value::as_table) {
        match task.get("kind").and_then(Value::as_str) {
            None => errors.push("missing key `kind` in [cross_matrix.task]".into()),
            Some(k) => match TASK_KEYS.iter().find(|(name, _)| *name == k) {
                None => errors.push(format!("unknown task kind `{k}` in [cross_matrix.task]")),
                Some((_, keys)) => {
                    for key in task.keys().filter(|k| k.as_str() != "kind") {
                        if !keys.contains(&key.as_str()) {
                            errors.push(format!("unknown key `{key}` in [cross_matrix.task]"));
                        }
                    }
                    for key in *keys {
                        if !task.contains_key(*key) {
                            errors.push(format!("missing key `{key}` in [cross_matrix.task]"));
                        }
                    }
                }
            },
        }
    }
}

fn check_values(cfg: &ExperimentConfig, errors: &mut Vec<String>) {
    let d = &cfg.data;
    match (&d.synth, d.files.is_empty()) {
        (Some(_), false) => errors.push("[data] needs exactly one of `synth` or `files`, found both".into()),
        (None, true) => errors.push("[data] needs exactly one of `synth` or `files`".into()),
        _ => {}
    }
    if let Some(s) = &d.synth {
        if !(0.0..=1.0).contains(&s.noise_rate) {
            errors.push("data.synth.noise_rate must lie in [0, 1]".into());
        }
        if s.cluster_std <= 0.0 {
            errors.push("data.synth.cluster_std must be positive".into());
        }
    }
    if d.files.len() == 1 && cfg.kind != Kind::SynthGenerate {
        errors.push("[data] lists a single file; experiments need at least two collections".into());
    }
    let mut grid = |name: &str, g: &[f64]| {
        if g.is_empty() || g.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            errors.push(format!("{name}.c_grid must be a non-empty list of positive numbers"));
        }
    };
    if let Some(s) = &cfg.name_the_dataset {
        grid("name_the_dataset", &s.c_grid);
    }
    if let Some(s) = &cfg.cross_matrix {
        grid("cross_matrix", &s.c_grid);
    }
    if let Some(s) = &cfg.name_the_dataset {
        if s.train_sizes.is_empty() || s.train_sizes.contains(&0) {
            errors.push("name_the_dataset.train_sizes must be non-empty and positive".into());
        }
        if s.repetitions == 0 {
            errors.push("name_the_dataset.repetitions must be positive".into());
        }
    }
    if let Some(s) = &cfg.cross_matrix {
        if s.repetitions == 0 {
            errors.push("cross_matrix.repetitions must be positive".into());
        }
    }
    if let Some(s) = &cfg.noisy_source {
        if s.train_sizes.is_empty() || s.train_sizes.contains(&0) {
            errors.push("noisy_source.train_sizes must be non-empty and positive".into());
        }
        if s.methods.is_empty() {
            errors.push("noisy_source.methods must not be empty".into());
        }
        if s.repetitions == 0 {
            errors.push("noisy_source.repetitions must be positive".into());
        }
        if !(0.0..=1.0).contains(&s.source_noise_rate) {
            errors.push("noisy_source.source_noise_rate must lie in [0, 1]".into());
        }
        if s.source_noise_rate > 0.0 && d.synth.is_none() {
            errors.push("noisy_source.source_noise_rate applies to synthetic data only".into());
        }
    }
    if let Some(section) = cfg.kind.section() {
        let present = match cfg.kind {
            Kind::NameTheDataset => cfg.name_the_dataset.is_some(),
            Kind::CrossMatrix => cfg.cross_matrix.is_some(),
            _ => cfg.noisy_source.is_some(),
        };
        if !present {
            errors.push(format!("kind `{}` needs a [{section}] section", cfg.kind.name()));
        }
    } else if d.synth.is_none() {
        errors.push("kind `synth-generate` needs [data.synth]".into());
    }
}

/// Parses and validates a config document. `seed_override` replaces (or
/// supplies) the seed; `base` resolves relative data paths.
pub fn parse_config_str(text: &str, seed_override: Option<u64>, base: &Path) -> Result<ExperimentConfig, ConfigErrors> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![e.to_string()]))?;
    if let Some(s) = seed_override {
        let v = i64::try_from(s).map_err(|_| ConfigErrors(vec![format!("seed {s} exceeds the TOML integer range")]))?;
        root.insert("seed".into(), Value::Integer(v));
    }
    let mut errors = Vec::new();
    check_keys(&root, &mut errors);
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    if let (Some(seed), Some(Value::Table(ns))) = (root.get("seed").cloned(), root.get_mut("noisy_source")) {
        let adapt = ns.entry("adapt").or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(a) = adapt {
            a.entry("seed").or_insert(seed);
        }
    }
    if !root.contains_key("experiment_id") {
        let id = root.get("kind").and_then(Value::as_str).unwrap_or("experiment").to_string();
        root.insert("experiment_id".into(), Value::String(id));
    }
    let mut cfg: ExperimentConfig = Value::Table(root).try_into().map_err(|e: toml::de::Error| ConfigErrors(vec![e.to_string()]))?;
    check_values(&cfg, &mut errors);
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    for f in cfg.data.files.iter_mut().chain(cfg.data.labels.iter_mut()) {
        if f.is_relative() {
            *f = base.join(&*f);
        }
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, seed_override, base)
}

impl ExperimentConfig {
    /// Normalized echo: every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }

    pub fn name_the_dataset_config(&self) -> Option<NameTheDatasetConfig> {
        self.name_the_dataset.as_ref().map(|s| NameTheDatasetConfig {
            train_sizes: s.train_sizes.clone(),
            test_per_collection: s.test_per_collection,
            repetitions: s.repetitions,
            c_grid: s.c_grid.clone(),
            folds: s.folds,
            seed: self.seed,
        })
    }

    pub fn cross_matrix_config(&self) -> Option<CrossMatrixConfig> {
        self.cross_matrix.as_ref().map(|s| CrossMatrixConfig {
            task: s.task.clone(),
            repetitions: s.repetitions,
            c_grid: s.c_grid.clone(),
            folds: s.folds,
            seed: self.seed,
            fixed_negatives_from_train: s.fixed_negatives_from_train,
        })
    }

    pub fn noisy_source_config(&self) -> Option<NoisySourceConfig> {
        self.noisy_source.as_ref().map(|s| NoisySourceConfig {
            train_sizes: s.train_sizes.clone(),
            test_per_class: s.test_per_class,
            methods: s.methods.clone(),
            repetitions: s.repetitions,
            seed: self.seed,
            adapt: s.adapt.clone(),
            self_label_iterations: s.self_label_iterations,
            self_label_per_class: s.self_label_per_class,
            reshape_domains: s.reshape_domains,
            dam_gamma_grid: s.dam_gamma_grid.clone(),
            landmark: s.landmark.clone(),
        })
    }
}
