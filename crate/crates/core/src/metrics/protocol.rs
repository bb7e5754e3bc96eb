//! Experiment runners: name-the-dataset, cross-dataset matrices and
//! noisy-source learning curves.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{Cell, CrossDatasetMatrix, RowStats};
use super::measures::{average_precision, per_class_breakdown, recognition_rate, PerClassTable};
use crate::adapt::{
    dam_classify, gfk_svm_classify, landmark_classifier, reshape_combine, reshape_discover, sa_classify,
    self_label_train, AdaptSettings, LandmarkConfig, ReshapeMode,
};
use crate::data::Dataset;
use crate::linalg::{mean, population_std};
use crate::linear::{cv_select_c, cv_select_c_binary, ova_train, svm_train_binary, CvGrid};
use crate::{rng, Error, Result};

fn shuffled(n: usize, seed: u64, rep: u64, tag: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, rep, tag));
    idx
}

/// Cross-validated `C`, with fewer folds when a class is too small and the
/// first grid value when no validation is possible.
fn pick_c(grid: &[f64], folds: usize, seed: u64, smallest_class: usize, cv: impl Fn(&CvGrid) -> Result<f64>) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("empty C grid"));
    }
    let f = folds.min(smallest_class);
    if grid.len() == 1 || f < 2 {
        return Ok(grid[0]);
    }
    cv(&CvGrid::new(grid.to_vec(), f, seed))
}

fn smallest_class(labels: &[usize]) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    counts.values().copied().min().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameTheDatasetConfig {
    pub train_sizes: Vec<usize>,
    pub test_per_collection: usize,
    pub repetitions: usize,
    pub c_grid: Vec<f64>,
    #[serde(default = "five")]
    pub folds: usize,
    pub seed: u64,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameTheDatasetResult {
    pub collections: Vec<String>,
    pub train_sizes: Vec<usize>,
    /// Percent accuracy, averaged over repetitions.
    pub mean_accuracy: Vec<f64>,
    pub std_accuracy: Vec<f64>,
    /// `per_repetition[rep][size]`.
    pub per_repetition: Vec<Vec<f64>>,
    /// Confusion counts at the largest size, summed over repetitions.
    pub confusion_total: Vec<Vec<u64>>,
    /// `confusion_total / repetitions`; rows sum to the test count.
    pub confusion_mean: Vec<Vec<f64>>,
}

/// Collection identification: each collection index is a class.
pub fn run_name_the_dataset(collections: &[Dataset], cfg: &NameTheDatasetConfig) -> Result<NameTheDatasetResult> {
    if collections.len() < 2 {
        return Err(Error::invalid("name-the-dataset needs at least two collections"));
    }
    if cfg.train_sizes.is_empty() || cfg.repetitions == 0 || cfg.test_per_collection == 0 {
        return Err(Error::invalid("train sizes, test count and repetitions must be non-empty"));
    }
    let max_size = *cfg.train_sizes.iter().max().unwrap_or(&0);
    for ds in collections {
        if ds.len() < max_size + cfg.test_per_collection {
            return Err(Error::Shortage {
                dataset: ds.name().to_string(),
                class: 0,
                requested: max_size + cfg.test_per_collection,
                available: ds.len(),
            });
        }
    }
    let n = collections.len();
    let reps: Vec<(Vec<f64>, Vec<Vec<u64>>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let orders: Vec<Vec<usize>> = collections
                .iter()
                .enumerate()
                .map(|(i, ds)| shuffled(ds.len(), cfg.seed, rep as u64, &format!("name-the-dataset:{i}")))
                .collect();
            let mut test_x = Vec::new();
            let mut test_y = Vec::new();
            for (i, ds) in collections.iter().enumerate() {
                for &j in &orders[i][..cfg.test_per_collection] {
                    test_x.push(ds.samples()[j].features.clone());
                    test_y.push(i);
                }
            }
            let mut accs = Vec::new();
            let mut confusion = vec![vec![0u64; n]; n];
            for (si, &size) in cfg.train_sizes.iter().enumerate() {
                let mut x = Vec::new();
                let mut y = Vec::new();
                for (i, ds) in collections.iter().enumerate() {
                    for &j in &orders[i][cfg.test_per_collection..cfg.test_per_collection + size] {
                        x.push(ds.samples()[j].features.clone());
                        y.push(i);
                    }
                }
                let c = pick_c(&cfg.c_grid, cfg.folds, cfg.seed ^ rep as u64, size, |g| cv_select_c(&x, &y, g))?;
                let model = ova_train(&x, &y, c)?;
                let pred = model.predict_all(&test_x)?;
                accs.push(recognition_rate(&pred, &test_y)?);
                if size == max_size && !cfg.train_sizes[si + 1..].contains(&max_size) {
                    for (p, t) in pred.iter().zip(&test_y) {
                        confusion[*t][*p] += 1;
                    }
                }
            }
            Ok((accs, confusion))
        })
        .collect::<Result<_>>()?;
    let mut confusion_total = vec![vec![0u64; n]; n];
    for (_, c) in &reps {
        for i in 0..n {
            for j in 0..n {
                confusion_total[i][j] += c[i][j];
            }
        }
    }
    let per_repetition: Vec<Vec<f64>> = reps.into_iter().map(|r| r.0).collect();
    let column = |s: usize| per_repetition.iter().map(|r| r[s]).collect::<Vec<f64>>();
    Ok(NameTheDatasetResult {
        collections: collections.iter().map(|d| d.name().to_string()).collect(),
        train_sizes: cfg.train_sizes.clone(),
        mean_accuracy: (0..cfg.train_sizes.len()).map(|s| mean(&column(s))).collect(),
        std_accuracy: (0..cfg.train_sizes.len()).map(|s| population_std(&column(s))).collect(),
        confusion_mean: confusion_total
            .iter()
            .map(|r| r.iter().map(|&v| v as f64 / cfg.repetitions as f64).collect())
            .collect(),
        confusion_total,
        per_repetition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CrossTask {
    /// One class against the rest, scored by average precision.
    Binary {
        class: usize,
        train_pos: usize,
        train_neg: usize,
        test_pos: usize,
        test_neg: usize,
    },
    /// One-vs-all over the classes shared by every collection, scored by
    /// recognition rate.
    Multiclass { train_per_class: usize, test_per_class: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossMatrixConfig {
    pub task: CrossTask,
    pub repetitions: usize,
    pub c_grid: Vec<f64>,
    #[serde(default = "five")]
    pub folds: usize,
    pub seed: u64,
    /// Binary task only: every column is tested against the negatives of the
    /// training collection instead of its own.
    #[serde(default)]
    pub fixed_negatives_from_train: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassEntry {
    pub train: String,
    pub test: String,
    pub table: PerClassTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMatrixResult {
    pub mean: CrossDatasetMatrix,
    /// Present only for more than one repetition.
    pub std: Option<CrossDatasetMatrix>,
    pub stats: Vec<RowStats>,
    pub per_repetition: Vec<CrossDatasetMatrix>,
    /// Multiclass task: class labels in table order.
    pub classes: Vec<usize>,
    /// Multiclass task: per-class recognition for every cell, pooled over repetitions.
    pub per_class: Vec<PerClassEntry>,
}

struct Split {
    train: Vec<usize>,
    test_pos: Vec<usize>,
    test_neg: Vec<usize>,
}

fn binary_split(ds: &Dataset, class: usize, counts: [usize; 4], seed: u64, rep: u64) -> Result<Split> {
    let pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].class_label == class).collect();
    let neg: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].class_label != class).collect();
    let [trp, trn, tep, ten] = counts;
    for (avail, req, what) in [(pos.len(), trp + tep, "positive"), (neg.len(), trn + ten, "negative")] {
        if avail < req {
            return Err(Error::invalid(format!("{} has {avail} {what} samples, {req} needed", ds.name())));
        }
    }
    let po = shuffled(pos.len(), seed, rep, &format!("cross-pos:{}", ds.name()));
    let no = shuffled(neg.len(), seed, rep, &format!("cross-neg:{}", ds.name()));
    let mut train: Vec<usize> = po[..trp].iter().map(|&i| pos[i]).chain(no[..trn].iter().map(|&i| neg[i])).collect();
    train.sort_unstable();
    Ok(Split {
        train,
        test_pos: po[trp..trp + tep].iter().map(|&i| pos[i]).collect(),
        test_neg: no[trn..trn + ten].iter().map(|&i| neg[i]).collect(),
    })
}

fn multiclass_split(ds: &Dataset, classes: &[usize], tr: usize, te: usize, seed: u64, rep: u64) -> Result<Split> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &c in classes {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].class_label == c).collect();
        if idx.len() < tr + te {
            return Err(Error::Shortage {
                dataset: ds.name().to_string(),
                class: c,
                requested: tr + te,
                available: idx.len(),
            });
        }
        let o = shuffled(idx.len(), seed, rep, &format!("cross-class:{}:{c}", ds.name()));
        train.extend(o[..tr].iter().map(|&i| idx[i]));
        test.extend(o[tr..tr + te].iter().map(|&i| idx[i]));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test_pos: test, test_neg: Vec::new() })
}

type RowOutcome = (Vec<Cell>, Vec<Option<(Vec<usize>, Vec<usize>)>>);

pub fn run_cross_matrix(collections: &[Dataset], cfg: &CrossMatrixConfig) -> Result<CrossMatrixResult> {
    if collections.len() < 2 {
        return Err(Error::invalid("a cross-dataset matrix needs at least two collections"));
    }
    if cfg.repetitions == 0 {
        return Err(Error::invalid("repetitions must be positive"));
    }
    let names: Vec<String> = collections.iter().map(|d| d.name().to_string()).collect();
    let classes: Vec<usize> = match &cfg.task {
        CrossTask::Binary { .. } => Vec::new(),
        CrossTask::Multiclass { .. } => {
            let mut common: BTreeSet<usize> = collections[0].class_set().clone();
            for ds in &collections[1..] {
                common = common.intersection(ds.class_set()).copied().collect();
            }
            if common.len() < 2 {
                return Err(Error::invalid("collections share fewer than two classes"));
            }
            common.into_iter().collect()
        }
    };
    let n = collections.len();
    let jobs: Vec<(usize, usize)> = (0..cfg.repetitions).flat_map(|r| (0..n).map(move |i| (r, i))).collect();
    let outcomes: Vec<RowOutcome> = jobs
        .par_iter()
        .map(|&(rep, row)| {
            let rep = rep as u64;
            let splits: Vec<std::result::Result<Split, String>> = collections
                .iter()
                .map(|ds| {
                    match &cfg.task {
                        CrossTask::Binary { class, train_pos, train_neg, test_pos, test_neg } => {
                            binary_split(ds, *class, [*train_pos, *train_neg, *test_pos, *test_neg], cfg.seed, rep)
                        }
                        CrossTask::Multiclass { train_per_class, test_per_class } => {
                            multiclass_split(ds, &classes, *train_per_class, *test_per_class, cfg.seed, rep)
                        }
                    }
                    .map_err(|e| e.to_string())
                })
                .collect();
            cross_row(collections, cfg, &classes, &splits, row, rep)
        })
        .collect();
    let mut per_repetition = Vec::with_capacity(cfg.repetitions);
    let mut pooled: BTreeMap<(usize, usize), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for rep in 0..cfg.repetitions {
        let mut cells = Vec::with_capacity(n);
        for row in 0..n {
            let (c, preds) = &outcomes[rep * n + row];
            cells.push(c.clone());
            for (col, p) in preds.iter().enumerate() {
                if let Some((pr, lb)) = p {
                    let e = pooled.entry((row, col)).or_default();
                    e.0.extend(pr);
                    e.1.extend(lb);
                }
            }
        }
        per_repetition.push(CrossDatasetMatrix::new(names.clone(), names.clone(), cells)?);
    }
    let (mean_m, std_m) = CrossDatasetMatrix::aggregate(&per_repetition)?;
    let class_names: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    let per_class = pooled
        .into_iter()
        .map(|((r, c), (p, l))| {
            Ok(PerClassEntry {
                train: names[r].clone(),
                test: names[c].clone(),
                table: per_class_breakdown(&p, &l, &class_names)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CrossMatrixResult {
        stats: mean_m.all_row_stats(),
        mean: mean_m,
        std: (cfg.repetitions > 1).then_some(std_m),
        per_repetition,
        classes,
        per_class,
    })
}

fn cross_row(
    collections: &[Dataset],
    cfg: &CrossMatrixConfig,
    classes: &[usize],
    splits: &[std::result::Result<Split, String>],
    row: usize,
    rep: u64,
) -> RowOutcome {
    let n = collections.len();
    let fail = |why: String| (vec![Cell::Missing(why); n], vec![None; n]);
    let split = match &splits[row] {
        Ok(s) => s,
        Err(e) => return fail(format!("training split failed: {e}")),
    };
    let ds = &collections[row];
    let x: Vec<Vec<f64>> = split.train.iter().map(|&i| ds.samples()[i].features.clone()).collect();
    let feats = |d: &Dataset, idx: &[usize]| idx.iter().map(|&i| d.samples()[i].features.clone()).collect::<Vec<_>>();
    let seed = cfg.seed ^ (rep << 20) ^ row as u64;
    match &cfg.task {
        CrossTask::Binary { class, train_pos, train_neg, .. } => {
            let y: Vec<f64> = split
                .train
                .iter()
                .map(|&i| if ds.samples()[i].class_label == *class { 1.0 } else { -1.0 })
                .collect();
            let model = pick_c(&cfg.c_grid, cfg.folds, seed, (*train_pos).min(*train_neg), |g| cv_select_c_binary(&x, &y, g))
                .and_then(|c| svm_train_binary(&x, &y, c));
            let model = match model {
                Ok(m) => m,
                Err(e) => return fail(format!("training failed: {e}")),
            };
            let cells = (0..n)
                .map(|col| {
                    let s = match &splits[col] {
                        Ok(s) => s,
                        Err(e) => return Cell::Missing(format!("test split failed: {e}")),
                    };
                    let mut xt = feats(&collections[col], &s.test_pos);
                    let mut lab = vec![true; xt.len()];
                    let negs = if cfg.fixed_negatives_from_train {
                        feats(ds, &split.test_neg)
                    } else {
                        feats(&collections[col], &s.test_neg)
                    };
                    lab.extend(std::iter::repeat_n(false, negs.len()));
                    xt.extend(negs);
                    let scores: Vec<f64> = xt.iter().map(|v| model.margin_unchecked(v)).collect();
                    match average_precision(&scores, &lab) {
                        Ok(ap) => Cell::Value(100.0 * ap),
                        Err(e) => Cell::Missing(e.to_string()),
                    }
                })
                .collect();
            (cells, vec![None; n])
        }
        CrossTask::Multiclass { train_per_class, .. } => {
            let y: Vec<usize> = split.train.iter().map(|&i| ds.samples()[i].class_label).collect();
            let model = pick_c(&cfg.c_grid, cfg.folds, seed, *train_per_class, |g| cv_select_c(&x, &y, g))
                .and_then(|c| ova_train(&x, &y, c));
            let model = match model {
                Ok(m) => m,
                Err(e) => return fail(format!("training failed: {e}")),
            };
            let pos: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
            let mut cells = Vec::with_capacity(n);
            let mut preds = Vec::with_capacity(n);
            for col in 0..n {
                let s = match &splits[col] {
                    Ok(s) => s,
                    Err(e) => {
                        cells.push(Cell::Missing(format!("test split failed: {e}")));
                        preds.push(None);
                        continue;
                    }
                };
                let xt = feats(&collections[col], &s.test_pos);
                let lt: Vec<usize> = s.test_pos.iter().map(|&i| collections[col].samples()[i].class_label).collect();
                match model.predict_all(&xt).and_then(|p| Ok((recognition_rate(&p, &lt)?, p))) {
                    Ok((acc, p)) => {
                        cells.push(Cell::Value(acc));
                        preds.push(Some((p.iter().map(|c| pos[c]).collect(), lt.iter().map(|c| pos[c]).collect())));
                    }
                    Err(e) => {
                        cells.push(Cell::Missing(e.to_string()));
                        preds.push(None);
                    }
                }
            }
            (cells, preds)
        }
    }
}

/// Adaptation strategies compared on the noisy-source curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PlainSvm,
    Sa,
    GfkSvm,
    Landmark,
    Dam,
    ReshapeSa,
    ReshapeDam,
    SelfLabel,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::PlainSvm,
        Method::Sa,
        Method::GfkSvm,
        Method::Landmark,
        Method::Dam,
        Method::ReshapeSa,
        Method::ReshapeDam,
        Method::SelfLabel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PlainSvm => "plain-svm",
            Method::Sa => "sa",
            Method::GfkSvm => "gfk-svm",
            Method::Landmark => "landmark",
            Method::Dam => "dam",
            Method::ReshapeSa => "reshape-sa",
            Method::ReshapeDam => "reshape-dam",
            Method::SelfLabel => "self-label",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisySourceConfig {
    pub train_sizes: Vec<usize>,
    pub test_per_class: usize,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub seed: u64,
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

fn ten() -> usize {
    10
}

fn two() -> usize {
    2
}

fn gamma_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurve {
    pub method: Method,
    pub target: String,
    pub train_sizes: Vec<usize>,
    /// Percent accuracy; `None` where some repetition failed.
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfLabelTrace {
    pub target: String,
    pub train_size: usize,
    /// Mean accuracy after each iteration (index 0 is the source-only model),
    /// over the repetitions that reached it.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySourceResult {
    pub curves: Vec<MethodCurve>,
    pub self_label_traces: Vec<SelfLabelTrace>,
}

struct PointOutcome {
    accuracy: Vec<std::result::Result<f64, String>>,
    trace: Option<Vec<f64>>,
}

fn run_method(
    method: Method,
    source: &Dataset,
    xt: &[Vec<f64>],
    yt: &[usize],
    cfg: &NoisySourceConfig,
    trace: &mut Option<Vec<f64>>,
) -> Result<f64> {
    let s = &cfg.adapt;
    let preds = match method {
        Method::PlainSvm => crate::adapt::source_ova(source, s)?.predict_all(xt)?,
        Method::Sa => sa_classify(source, xt, s)?,
        Method::GfkSvm => gfk_svm_classify(source, xt, s)?,
        Method::Landmark => landmark_classifier(source, xt, &cfg.landmark)?.predictions,
        Method::Dam => dam_classify(source, xt, s)?,
        Method::ReshapeSa | Method::ReshapeDam => {
            let a = reshape_discover(&source.features(), &source.labels(), cfg.reshape_domains, s.seed)?;
            let mode = if method == Method::ReshapeSa {
                ReshapeMode::BestSubdomainSa
            } else {
                ReshapeMode::WeightedDam {
                    gamma_grid: cfg.dam_gamma_grid.clone(),
                }
            };
            return Ok(reshape_combine(source, &a, xt, yt, &mode, s)?.best_accuracy());
        }
        Method::SelfLabel => {
            let x = source.features();
            let y = source.labels();
            let c = pick_c(&s.c_grid, s.cv_folds, s.seed, smallest_class(&y), |g| cv_select_c(&x, &y, g))?;
            let r = self_label_train(source, xt, Some(yt), cfg.self_label_iterations, cfg.self_label_per_class, c)?;
            *trace = Some(r.trace.clone());
            return r.trace.last().copied().ok_or_else(|| Error::invalid("empty self-label trace"));
        }
    };
    recognition_rate(&preds, yt)
}

/// Learning curves of every method when training on a (possibly noisy)
/// source and testing on each target.
pub fn run_noisy_source_curve(source: &Dataset, targets: &[Dataset], cfg: &NoisySourceConfig) -> Result<NoisySourceResult> {
    if targets.is_empty() || cfg.train_sizes.is_empty() || cfg.methods.is_empty() || cfg.repetitions == 0 {
        return Err(Error::invalid("targets, train sizes, methods and repetitions must be non-empty"));
    }
    let max_size = *cfg.train_sizes.iter().max().unwrap_or(&0);
    let jobs: Vec<(usize, usize, usize)> = (0..targets.len())
        .flat_map(|t| (0..cfg.repetitions).flat_map(move |r| cfg.train_sizes.iter().enumerate().map(move |(s, _)| (t, r, s))))
        .collect();
    let outcomes: Vec<PointOutcome> = jobs
        .par_iter()
        .map(|&(t, rep, si)| {
            let target = &targets[t];
            let classes: Vec<usize> = source.class_set().intersection(target.class_set()).copied().collect();
            let fail_all = |e: String| PointOutcome {
                accuracy: vec![Err(e); cfg.methods.len()],
                trace: None,
            };
            if classes.len() < 2 {
                return fail_all("source and target share fewer than two classes".into());
            }
            let rep = rep as u64;
            let mut train_idx = Vec::new();
            let mut xt = Vec::new();
            let mut yt = Vec::new();
            for &c in &classes {
                let si_idx: Vec<usize> = (0..source.len()).filter(|&i| source.samples()[i].class_label == c).collect();
                let ti_idx: Vec<usize> = (0..target.len()).filter(|&i| target.samples()[i].class_label == c).collect();
                if si_idx.len() < max_size || ti_idx.len() < cfg.test_per_class {
                    return fail_all(format!("class {c}: not enough samples for the requested sizes"));
                }
                let so = shuffled(si_idx.len(), cfg.seed, rep, &format!("noisy-source:{c}"));
                train_idx.extend(so[..cfg.train_sizes[si]].iter().map(|&i| si_idx[i]));
                let to = shuffled(ti_idx.len(), cfg.seed, rep, &format!("noisy-target:{}:{c}", target.name()));
                for &i in &to[..cfg.test_per_class] {
                    xt.push(target.samples()[ti_idx[i]].features.clone());
                    yt.push(c);
                }
            }
            train_idx.sort_unstable();
            let src = source.subset(source.name(), &train_idx);
            let mut trace = None;
            let accuracy = cfg
                .methods
                .iter()
                .map(|&m| {
                    run_method(m, &src, &xt, &yt, cfg, &mut trace).map_err(|e| {
                        log::warn!(
                            "{} on {} (size {}, repetition {rep}) failed: {e}",
                            m.name(),
                            target.name(),
                            cfg.train_sizes[si]
                        );
                        e.to_string()
                    })
                })
                .collect();
            PointOutcome { accuracy, trace }
        })
        .collect();
    let at = |t: usize, r: usize, s: usize| &outcomes[(t * cfg.repetitions + r) * cfg.train_sizes.len() + s];
    let mut curves = Vec::new();
    let mut traces = Vec::new();
    for (t, target) in targets.iter().enumerate() {
        for (mi, &m) in cfg.methods.iter().enumerate() {
            let mut means = Vec::new();
            let mut stds = Vec::new();
            let mut errors = Vec::new();
            for s in 0..cfg.train_sizes.len() {
                let mut vals = Vec::new();
                let mut bad = false;
                for r in 0..cfg.repetitions {
                    match &at(t, r, s).accuracy[mi] {
                        Ok(v) => vals.push(*v),
                        Err(e) => {
                            bad = true;
                            errors.push(format!("size {} repetition {r}: {e}", cfg.train_sizes[s]));
                        }
                    }
                }
                if bad {
                    means.push(None);
                    stds.push(None);
                } else {
                    means.push(Some(mean(&vals)));
                    stds.push(Some(population_std(&vals)));
                }
            }
            curves.push(MethodCurve {
                method: m,
                target: target.name().to_string(),
                train_sizes: cfg.train_sizes.clone(),
                mean: means,
                std: stds,
                errors,
            });
        }
        if cfg.methods.contains(&Method::SelfLabel) {
            for (s, &size) in cfg.train_sizes.iter().enumerate() {
                let runs: Vec<&Vec<f64>> = (0..cfg.repetitions).filter_map(|r| at(t, r, s).trace.as_ref()).collect();
                let len = runs.iter().map(|v| v.len()).max().unwrap_or(0);
                let col = |k: usize| runs.iter().filter_map(|v| v.get(k).copied()).collect::<Vec<f64>>();
                traces.push(SelfLabelTrace {
                    target: target.name().to_string(),
                    train_size: size,
                    mean: (0..len).map(|k| mean(&col(k))).collect(),
                    std: (0..len).map(|k| population_std(&col(k))).collect(),
                });
            }
        }
    }
    Ok(NoisySourceResult {
        curves,
        self_label_traces: traces,
    })
}
