//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use biasbench::data::{l2_normalize_dataset, load_feature_table, synth_generate, write_feature_table, Dataset, LabelMap, SynthSpec};
use biasbench::metrics::{
    run_cross_matrix, run_name_the_dataset, run_noisy_source_curve, BiasReport, CrossMatrixResult, NameTheDatasetResult,
    NoisySourceResult,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Kind, Normalize};
use crate::heatmap::emit_heatmap;
use crate::output::{verify_manifest, OutputSet};

#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 5,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Data(m) | CliError::Internal(m) => vec![m.clone()],
        }
    }

    /// One JSON line for machines reading stderr.
    pub fn record(&self) -> String {
        serde_json::json!({
            "status": "error",
            "exit_code": self.exit_code(),
            "category": self.category(),
            "messages": self.messages(),
        })
        .to_string()
    }
}

impl From<biasbench::Error> for CliError {
    fn from(e: biasbench::Error) -> Self {
        match e {
            biasbench::Error::Json(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// What a successful command produced.
#[derive(Debug)]
pub struct Outcome {
    pub out: PathBuf,
    pub partial: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.partial {
            4
        } else {
            0
        }
    }
}

/// `--out`, then the config's `output`, then `$BIASBENCH_OUT`, then `./biasbench-out`.
pub fn resolve_out(flag: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .or_else(|| std::env::var_os("BIASBENCH_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("biasbench-out"))
}

fn commit(set: &OutputSet, out: &Path, id: &str) -> Result<Outcome, CliError> {
    set.commit(out, id)
        .map_err(|e| CliError::Internal(format!("cannot write outputs to {}: {e}", out.display())))?;
    log::info!("wrote {} files to {}", set.paths().count() + 1, out.display());
    Ok(Outcome { out: out.to_path_buf(), partial: set.is_partial() })
}

/// Collections named by the config, with their class names.
pub fn load_collections(cfg: &ExperimentConfig) -> Result<(Vec<Dataset>, LabelMap), CliError> {
    let d = &cfg.data;
    let (mut cols, labels) = if let Some(s) = &d.synth {
        let mut spec = SynthSpec::random_layout(s.n_domains, s.n_classes, s.dim, s.per_class, s.class_sep, s.shift, s.cluster_std, cfg.seed);
        spec.noise_rate = s.noise_rate;
        if let Some(cs) = &s.class_subsets {
            spec.class_subsets = cs.clone();
        }
        let mut cols = synth_generate(&spec)?;
        let source_noise = cfg.noisy_source.as_ref().map_or(0.0, |n| n.source_noise_rate);
        if cfg.kind == Kind::NoisySource && source_noise > 0.0 {
            // Label noise never moves features, so the noisy copy of the
            // first domain lines up sample by sample with the clean one.
            let noisy = synth_generate(&SynthSpec { noise_rate: source_noise, ..spec.clone() })?;
            cols[0] = noisy[0].clone();
        }
        (cols, LabelMap::numeric(s.n_classes))
    } else {
        let mut labels = match &d.labels {
            Some(p) => {
                let f = std::fs::File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                LabelMap::read_csv(f).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?.freeze()
            }
            None => LabelMap::new(),
        };
        let mut cols = Vec::new();
        let mut dim = None;
        for (i, p) in d.files.iter().enumerate() {
            let ds = load_feature_table(p, dim, &mut labels, i).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            dim = Some(ds.dim());
            cols.push(ds);
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &cols {
            if !seen.insert(c.name().to_string()) {
                return Err(CliError::Data(format!("collection name `{}` appears in more than one file", c.name())));
            }
        }
        (cols, labels)
    };
    if d.normalize == Normalize::L2 {
        cols = cols.iter().map(l2_normalize_dataset).collect::<Result<_, _>>()?;
    }
    Ok((cols, labels))
}

fn to_csv<S: AsRef<str>>(header: &[String], rows: &[Vec<S>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for r in rows {
        w.write_record(r.iter().map(AsRef::as_ref)).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt)
}

fn svg(values: &[Vec<f64>], rows: &[String], cols: &[String], title: &str) -> Result<String, CliError> {
    emit_heatmap(values, rows, cols, title).map_err(CliError::Internal)
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn render_name_the_dataset(r: &NameTheDatasetResult, set: &mut OutputSet) -> Result<(), CliError> {
    let reps = r.per_repetition.len();
    let mut header: Vec<String> = ["train_size", "mean_accuracy", "std_accuracy"].map(String::from).to_vec();
    header.extend((0..reps).map(|k| format!("rep{k}")));
    let rows: Vec<Vec<String>> = r
        .train_sizes
        .iter()
        .enumerate()
        .map(|(s, size)| {
            let mut row = vec![size.to_string(), fmt(r.mean_accuracy[s]), fmt(r.std_accuracy[s])];
            row.extend(r.per_repetition.iter().map(|rep| fmt(rep[s])));
            row
        })
        .collect();
    set.add("name_the_dataset.csv", to_csv(&header, &rows));
    let mut header = vec!["true".to_string()];
    header.extend(r.collections.iter().map(|c| format!("pred:{c}")));
    let rows: Vec<Vec<String>> = r
        .collections
        .iter()
        .zip(&r.confusion_mean)
        .map(|(c, row)| std::iter::once(c.clone()).chain(row.iter().map(|v| fmt(*v))).collect())
        .collect();
    set.add("name_the_dataset_confusion.csv", to_csv(&header, &rows));
    let largest = r.train_sizes.iter().max().copied().unwrap_or(0);
    set.add(
        "name_the_dataset_confusion.svg",
        svg(&r.confusion_mean, &r.collections, &r.collections, &format!("name the dataset, {largest} per collection"))?,
    );
    Ok(())
}

fn render_cross_matrix(r: &CrossMatrixResult, set: &mut OutputSet) -> Result<(), CliError> {
    let mut buf = Vec::new();
    r.mean.write_csv(&mut buf)?;
    set.add("cross_matrix_mean.csv", buf);
    if let Some(std) = &r.std {
        let mut buf = Vec::new();
        std.write_csv(&mut buf)?;
        set.add("cross_matrix_std.csv", buf);
    }
    set.add(
        "cross_matrix_mean.svg",
        svg(&r.mean.values(), &r.mean.train_labels, &r.mean.test_labels, "cross-dataset performance (rows train, columns test)")?,
    );
    for (i, row) in r.mean.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let biasbench::metrics::Cell::Missing(reason) = cell {
                set.mark_incomplete(
                    "cross_matrix_mean.csv",
                    format!("{} -> {}: {reason}", r.mean.train_labels[i], r.mean.test_labels[j]),
                );
            }
        }
    }
    if !r.per_class.is_empty() {
        let names = &r.per_class[0].table.class_names;
        let mut header: Vec<String> = ["train", "test", "class", "accuracy"].map(String::from).to_vec();
        header.extend(names.iter().map(|n| format!("pred:{n}")));
        let mut rows = Vec::new();
        for e in &r.per_class {
            for (k, name) in e.table.class_names.iter().enumerate() {
                let mut row = vec![e.train.clone(), e.test.clone(), name.clone(), opt(e.table.accuracy[k])];
                row.extend(e.table.counts[k].iter().map(u64::to_string));
                rows.push(row);
            }
            let norm: Vec<Vec<f64>> = e
                .table
                .normalized
                .iter()
                .map(|r| r.clone().unwrap_or_else(|| vec![f64::NAN; names.len()]))
                .collect();
            set.add(
                format!("per_class/{}__{}.svg", slug(&e.train), slug(&e.test)),
                svg(&norm, names, names, &format!("train {} / test {}", e.train, e.test))?,
            );
        }
        set.add("per_class.csv", to_csv(&header, &rows));
    }
    Ok(())
}

fn render_noisy_source(r: &NoisySourceResult, set: &mut OutputSet) {
    let header: Vec<String> = ["method", "target", "train_size", "mean", "std"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for c in &r.curves {
        for (s, size) in c.train_sizes.iter().enumerate() {
            rows.push(vec![c.method.name().to_string(), c.target.clone(), size.to_string(), opt(c.mean[s]), opt(c.std[s])]);
        }
        for e in &c.errors {
            set.mark_incomplete("noisy_source_curves.csv", format!("{} on {}: {e}", c.method.name(), c.target));
        }
    }
    set.add("noisy_source_curves.csv", to_csv(&header, &rows));
    if !r.self_label_traces.is_empty() {
        let header: Vec<String> = ["target", "train_size", "iteration", "mean", "std"].map(String::from).to_vec();
        let mut rows = Vec::new();
        for t in &r.self_label_traces {
            for (k, (m, s)) in t.mean.iter().zip(&t.std).enumerate() {
                rows.push(vec![t.target.clone(), t.train_size.to_string(), k.to_string(), fmt(*m), fmt(*s)]);
            }
        }
        set.add("self_label_trace.csv", to_csv(&header, &rows));
    }
}

/// Every table and figure derived from a report, plus the report itself.
pub fn render(report: &BiasReport) -> Result<OutputSet, CliError> {
    let mut set = OutputSet::new();
    set.add("report.json", report.to_json()? + "\n");
    if let Some(r) = &report.name_the_dataset {
        render_name_the_dataset(r, &mut set)?;
    }
    if let Some(r) = &report.cross_matrix {
        render_cross_matrix(r, &mut set)?;
    }
    if let Some(r) = &report.noisy_source {
        render_noisy_source(r, &mut set);
    }
    Ok(set)
}

fn collections_output(cols: &[Dataset], labels: &LabelMap, set: &mut OutputSet) -> Result<(), CliError> {
    for ds in cols {
        let mut buf = Vec::new();
        write_feature_table(ds, labels, &mut buf)?;
        set.add(format!("{}.csv", slug(ds.name())), buf);
    }
    let mut buf = Vec::new();
    labels.write_csv(&mut buf)?;
    set.add("labels.csv", buf);
    Ok(())
}

/// `synth`: writes the configured synthetic collections as feature tables.
pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    if cfg.data.synth.is_none() {
        return Err(CliError::Config(vec!["synth needs a [data.synth] section".into()]));
    }
    let (cols, labels) = load_collections(cfg)?;
    let mut set = OutputSet::new();
    collections_output(&cols, &labels, &mut set)?;
    set.add("config.toml", cfg.to_toml());
    commit(&set, out, &cfg.experiment_id)
}

#[derive(Serialize)]
struct CollectionSummary {
    name: String,
    samples: usize,
    dim: usize,
    classes: BTreeMap<String, usize>,
}

/// `ingest`: validates the configured data, normalizes it and writes the
/// collections with a summary.
pub fn cmd_ingest(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let (cols, labels) = load_collections(cfg)?;
    let mut set = OutputSet::new();
    collections_output(&cols, &labels, &mut set)?;
    let summary: Vec<CollectionSummary> = cols
        .iter()
        .map(|ds| CollectionSummary {
            name: ds.name().to_string(),
            samples: ds.len(),
            dim: ds.dim(),
            classes: ds
                .indices_by_class()
                .into_iter()
                .map(|(c, idx)| (labels.name(c).map_or_else(|| c.to_string(), str::to_string), idx.len()))
                .collect(),
        })
        .collect();
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    set.add("summary.json", text + "\n");
    commit(&set, out, &cfg.experiment_id)
}

/// Name classes in per-class tables by the label map instead of by index.
fn name_classes(r: &mut CrossMatrixResult, labels: &LabelMap) {
    for e in &mut r.per_class {
        for (k, c) in r.classes.iter().enumerate() {
            if let (Some(n), Some(slot)) = (labels.name(*c), e.table.class_names.get_mut(k)) {
                *slot = n.to_string();
            }
        }
    }
}

/// Runs the experiment without touching the file system.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BiasReport, CliError> {
    let (cols, labels) = load_collections(cfg)?;
    let config = serde_json::to_value(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut report = BiasReport {
        experiment_id: cfg.experiment_id.clone(),
        config,
        repetitions: 0,
        name_the_dataset: None,
        cross_matrix: None,
        noisy_source: None,
    };
    match cfg.kind {
        Kind::NameTheDataset => {
            let c = cfg.name_the_dataset_config().expect("validated");
            log::info!("name-the-dataset over {} collections, {} repetitions", cols.len(), c.repetitions);
            report.repetitions = c.repetitions;
            report.name_the_dataset = Some(run_name_the_dataset(&cols, &c)?);
        }
        Kind::CrossMatrix => {
            let c = cfg.cross_matrix_config().expect("validated");
            log::info!("cross-dataset matrix over {} collections, {} repetitions", cols.len(), c.repetitions);
            report.repetitions = c.repetitions;
            let mut r = run_cross_matrix(&cols, &c)?;
            name_classes(&mut r, &labels);
            if r.mean.cells.iter().flatten().all(|c| c.value().is_none()) {
                return Err(CliError::Data(format!(
                    "every cell of the cross-dataset matrix failed; first: {}",
                    match &r.mean.cells[0][0] {
                        biasbench::metrics::Cell::Missing(m) => m.as_str(),
                        _ => "",
                    }
                )));
            }
            report.cross_matrix = Some(r);
        }
        Kind::NoisySource => {
            let c = cfg.noisy_source_config().expect("validated");
            log::info!("noisy-source curves: source {}, {} targets", cols[0].name(), cols.len() - 1);
            report.repetitions = c.repetitions;
            let r = run_noisy_source_curve(&cols[0], &cols[1..], &c)?;
            if r.curves.iter().all(|c| c.mean.iter().all(Option::is_none)) {
                let first = r.curves.iter().flat_map(|c| c.errors.first()).next().cloned().unwrap_or_default();
                return Err(CliError::Data(format!("every point of every curve failed; first: {first}")));
            }
            report.noisy_source = Some(r);
        }
        Kind::SynthGenerate => {}
    }
    Ok(report)
}

/// `run`: executes the configured experiment and writes the report, tables,
/// heatmaps and manifest.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    if cfg.kind == Kind::SynthGenerate {
        return cmd_synth(cfg, out);
    }
    let report = run_experiment(cfg)?;
    let mut set = render(&report)?;
    set.add("config.toml", cfg.to_toml());
    commit(&set, out, &cfg.experiment_id)
}

/// `report`: verifies a run directory against its manifest, prints the row
/// statistics and optionally re-renders the tables into `out`.
pub fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<(String, Option<Outcome>), CliError> {
    let (manifest, bad) = verify_manifest(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    if !bad.is_empty() {
        return Err(CliError::Data(format!("manifest check failed: {}", bad.join("; "))));
    }
    let mut text = format!("{}: {} files verified, status {}\n", manifest.experiment_id, manifest.files.len(), manifest.status);
    let path = dir.join("report.json");
    if !path.exists() {
        return Ok((text, None));
    }
    let json = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let report: BiasReport = serde_json::from_str(&json).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if let Some(r) = &report.cross_matrix {
        text.push_str("train\tself\tmean_others\tpercent_drop\tcd\n");
        for (name, st) in r.mean.train_labels.iter().zip(&r.stats) {
            let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
            text.push_str(&format!("{name}\t{}\t{}\t{}\t{}\n", f(st.self_pct), f(st.mean_others), f(st.percent_drop), f(st.cd)));
        }
    }
    if let Some(r) = &report.name_the_dataset {
        text.push_str("train_size\tmean_accuracy\tstd_accuracy\n");
        for (s, size) in r.train_sizes.iter().enumerate() {
            text.push_str(&format!("{size}\t{:.2}\t{:.2}\n", r.mean_accuracy[s], r.std_accuracy[s]));
        }
    }
    if let Some(r) = &report.noisy_source {
        text.push_str("method\ttarget\tcurve\n");
        for c in &r.curves {
            let pts: Vec<String> = c.mean.iter().map(|m| m.map_or_else(|| "NA".into(), |v| format!("{v:.1}"))).collect();
            text.push_str(&format!("{}\t{}\t{}\n", c.method.name(), c.target, pts.join(" ")));
        }
    }
    let outcome = match out {
        Some(o) => Some(commit(&render(&report)?, o, &report.experiment_id)?),
        None => None,
    };
    Ok((text, outcome))
}
