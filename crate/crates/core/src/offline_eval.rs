//! Offline evaluation: stratified K-fold cross-validation, confusion
//! matrices, and grid search over recognizer configurations.
//!
//! Folds are stratified: within each category the views are shuffled with
//! the seeded generator and dealt round-robin, so every fold holds examples
//! of every category and per-category fold sizes differ by at most one.
//! The assignment depends only on the dataset and the seed, never on the
//! recognizer, so all grid points are compared on identical splits.
//!
//! "Class accuracy" is the macro mean of per-category recall; "instance
//! accuracy" is trace / total of the confusion matrix.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorSpec;
use crate::error::{Error, Result};
use crate::memory::{FeatureView, PerceptualMemory, RecognizerConfig};
use crate::metrics::{CombineWeight, MetricId};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub views: Vec<FeatureView>,
    /// Mean wall-clock seconds per descriptor call, when the views were
    /// computed from point clouds in this process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_describe_time: Option<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, views: Vec<FeatureView>) -> Self {
        Dataset {
            name: name.into(),
            views,
            mean_describe_time: None,
        }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// View indices per category, categories sorted.
    pub fn by_category(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, v) in self.views.iter().enumerate() {
            map.entry(v.category.as_str()).or_default().push(i);
        }
        map
    }

    pub fn categories(&self) -> Vec<String> {
        self.by_category().keys().map(|s| s.to_string()).collect()
    }

    pub fn category_counts(&self) -> BTreeMap<String, usize> {
        self.by_category()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.len()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// Fold id per view index.
    pub fold_of: Vec<usize>,
    pub k_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }
}

pub fn stratified_folds(ds: &Dataset, k_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if k_folds < 2 {
        return Err(Error::InvalidParams(format!("{k_folds} folds, at least 2 required")));
    }
    let by_cat = ds.by_category();
    if by_cat.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "dataset `{}` has {} categories, at least 2 required",
            ds.name,
            by_cat.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; ds.len()];
    for (category, idxs) in by_cat {
        if idxs.len() < k_folds {
            return Err(Error::InsufficientViews {
                category: category.to_string(),
                have: idxs.len(),
                need: k_folds,
            });
        }
        let mut idxs = idxs;
        idxs.shuffle(&mut rng);
        for (j, i) in idxs.into_iter().enumerate() {
            fold_of[i] = j % k_folds;
        }
    }
    Ok(FoldAssignment {
        fold_of,
        k_folds,
        seed,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// When false all timings are reported as 0, making reports (and grid
    /// rankings) independent of the machine.
    pub measure_time: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { measure_time: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub view: usize,
    pub fold: usize,
    pub truth: String,
    pub predicted: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RecognizerConfig,
    pub config_label: String,
    pub seed: u64,
    pub k_folds: usize,
    pub categories: Vec<String>,
    /// `confusion[truth][predicted]`, indexed like `categories`.
    pub confusion: Vec<Vec<usize>>,
    pub instance_accuracy: f64,
    pub class_accuracy: f64,
    pub per_class_recall: Vec<f64>,
    pub mean_describe_time: Option<f64>,
    pub mean_classify_time: f64,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// Confusion matrix as CSV with category names on the header row and
    /// first column.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for c in &self.categories {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (c, row) in self.categories.iter().zip(&self.confusion) {
            out.push_str(c);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// K-fold cross-validation with fresh stratified folds.
pub fn cross_validate(
    ds: &Dataset,
    cfg: &RecognizerConfig,
    k_folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    let folds = stratified_folds(ds, k_folds, seed)?;
    cross_validate_with(ds, cfg, &folds, EvalOptions::default())
}

/// Cross-validation on a precomputed fold assignment.
pub fn cross_validate_with(
    ds: &Dataset,
    cfg: &RecognizerConfig,
    folds: &FoldAssignment,
    opts: EvalOptions,
) -> Result<EvalReport> {
    cfg.validate()?;
    if folds.fold_of.len() != ds.len() {
        return Err(Error::InvalidParams("fold assignment does not match dataset".into()));
    }
    for v in &ds.views {
        cfg.check_view(v)?;
    }

    let per_fold: Vec<Result<(Vec<Prediction>, f64)>> = (0..folds.k_folds)
        .into_par_iter()
        .map(|fold| {
            let mut memory = PerceptualMemory::new(cfg.clone())?;
            for (i, v) in ds.views.iter().enumerate() {
                if folds.fold_of[i] != fold {
                    memory.teach(&v.category, v.clone())?;
                }
            }
            let mut preds = Vec::new();
            let mut seconds = 0.0;
            for i in folds.test_indices(fold) {
                let view = &ds.views[i];
                let start = opts.measure_time.then(Instant::now);
                let c = memory.classify(view)?;
                if let Some(t) = start {
                    seconds += t.elapsed().as_secs_f64();
                }
                preds.push(Prediction {
                    view: i,
                    fold,
                    truth: view.category.clone(),
                    predicted: c.label,
                });
            }
            Ok((preds, seconds))
        })
        .collect();

    let mut predictions = Vec::with_capacity(ds.len());
    let mut seconds = 0.0;
    for r in per_fold {
        let (p, s) = r?;
        predictions.extend(p);
        seconds += s;
    }
    predictions.sort_by_key(|p| p.view);

    let categories = ds.categories();
    let index: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut confusion = vec![vec![0usize; categories.len()]; categories.len()];
    for p in &predictions {
        confusion[index[p.truth.as_str()]][index[p.predicted.as_str()]] += 1;
    }
    let total: usize = confusion.iter().flatten().sum();
    let trace: usize = (0..categories.len()).map(|i| confusion[i][i]).sum();
    let per_class_recall: Vec<f64> = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: usize = row.iter().sum();
            if n == 0 {
                f64::NAN
            } else {
                row[i] as f64 / n as f64
            }
        })
        .collect();
    let observed: Vec<f64> = per_class_recall.iter().copied().filter(|r| !r.is_nan()).collect();
    let class_accuracy = observed.iter().sum::<f64>() / observed.len() as f64;
    let n_calls = predictions.len().max(1) as f64;

    Ok(EvalReport {
        config_label: cfg.to_string(),
        config: cfg.clone(),
        seed: folds.seed,
        k_folds: folds.k_folds,
        categories,
        confusion,
        instance_accuracy: trace as f64 / total as f64,
        class_accuracy,
        per_class_recall,
        mean_describe_time: if opts.measure_time { ds.mean_describe_time } else { None },
        mean_classify_time: seconds / n_calls,
        predictions,
    })
}

/// Parameter menus; [`ConfigGrid::expand`] takes their product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigGrid {
    #[serde(default = "default_descriptors")]
    pub descriptors: Vec<DescriptorSpec>,
    #[serde(default = "default_metrics_h")]
    pub metrics_h: Vec<MetricId>,
    #[serde(default = "default_metrics_d")]
    pub metrics_d: Vec<MetricId>,
    #[serde(default = "default_ks")]
    pub k: Vec<usize>,
    #[serde(default = "default_ws")]
    pub w: Vec<CombineWeight>,
}

fn default_descriptors() -> Vec<DescriptorSpec> {
    vec![DescriptorSpec::default()]
}
fn default_metrics_h() -> Vec<MetricId> {
    vec![MetricId::Bhattacharyya]
}
fn default_metrics_d() -> Vec<MetricId> {
    vec![MetricId::Dice]
}
fn default_ks() -> Vec<usize> {
    vec![1]
}
fn default_ws() -> Vec<CombineWeight> {
    vec![CombineWeight::HAND_ONLY]
}

impl ConfigGrid {
    /// The hand-crafted sweep: GOOD at the given bin counts, all 14 metrics,
    /// K in {1, 3, 5, 7, 9}.
    pub fn hand_crafted(bins: &[usize]) -> Self {
        ConfigGrid {
            descriptors: bins.iter().map(|&b| DescriptorSpec::good(b)).collect(),
            metrics_h: MetricId::ALL.to_vec(),
            metrics_d: default_metrics_d(),
            k: crate::memory::DEFAULT_K_VALUES.to_vec(),
            w: default_ws(),
        }
    }

    /// Cartesian product in (descriptor, w, metric_h, metric_d, k) order.
    /// A metric whose representation has weight zero is not varied.
    pub fn expand(&self) -> Vec<RecognizerConfig> {
        let mut out = Vec::new();
        for d in &self.descriptors {
            for &w in &self.w {
                let mh = menu(&self.metrics_h, w.needs_hand(), MetricId::Bhattacharyya);
                let md = menu(&self.metrics_d, w.needs_deep(), MetricId::Dice);
                for &metric_h in &mh {
                    for &metric_d in &md {
                        for &k in &self.k {
                            out.push(RecognizerConfig {
                                descriptor: d.clone(),
                                metric_h,
                                metric_d,
                                w,
                                k,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn menu(metrics: &[MetricId], used: bool, fallback: MetricId) -> Vec<MetricId> {
    match metrics.first() {
        None => vec![fallback],
        Some(&first) if !used => vec![first],
        Some(_) => metrics.to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    /// Position in the expanded grid.
    pub index: usize,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub index: usize,
    pub config: RecognizerConfig,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    /// Best first.
    pub ranked: Vec<GridEntry>,
    pub failed: Vec<GridFailure>,
}

impl GridReport {
    fn rank(&mut self) {
        self.ranked.sort_by(|a, b| {
            b.report
                .class_accuracy
                .total_cmp(&a.report.class_accuracy)
                .then(b.report.instance_accuracy.total_cmp(&a.report.instance_accuracy))
                .then(a.report.mean_classify_time.total_cmp(&b.report.mean_classify_time))
                .then(a.index.cmp(&b.index))
        });
        self.failed.sort_by_key(|f| f.index);
    }
}

/// Cross-validates every config on one shared fold assignment. Failing
/// configs are recorded, not fatal.
pub fn grid_search(
    ds: &Dataset,
    configs: &[RecognizerConfig],
    k_folds: usize,
    seed: u64,
    opts: EvalOptions,
) -> Result<GridReport> {
    if configs.is_empty() {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    let folds = stratified_folds(ds, k_folds, seed)?;
    let indexed: Vec<(usize, &RecognizerConfig)> = configs.iter().enumerate().collect();
    let mut report = evaluate_cells(ds, &indexed, &folds, opts);
    report.rank();
    Ok(report)
}

fn evaluate_cells(
    ds: &Dataset,
    cells: &[(usize, &RecognizerConfig)],
    folds: &FoldAssignment,
    opts: EvalOptions,
) -> GridReport {
    let results: Vec<(usize, &RecognizerConfig, Result<EvalReport>)> = cells
        .par_iter()
        .map(|&(i, cfg)| (i, cfg, cross_validate_with(ds, cfg, folds, opts)))
        .collect();
    let mut report = GridReport {
        ranked: Vec::new(),
        failed: Vec::new(),
    };
    for (index, cfg, r) in results {
        match r {
            Ok(report_) => report.ranked.push(GridEntry {
                index,
                report: report_,
            }),
            Err(e) => report.failed.push(GridFailure {
                index,
                config: cfg.clone(),
                error: e.to_string(),
            }),
        }
    }
    report
}

/// Grid search where each descriptor setting needs its own dataset (e.g.
/// GOOD at several bin counts). `dataset_for` is called once per distinct
/// descriptor; the first dataset fixes the fold assignment for all.
pub fn grid_search_by_descriptor<F>(
    grid: &ConfigGrid,
    mut dataset_for: F,
    k_folds: usize,
    seed: u64,
    opts: EvalOptions,
) -> Result<GridReport>
where
    F: FnMut(&DescriptorSpec) -> Result<Dataset>,
{
    let configs = grid.expand();
    if configs.is_empty() {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    let mut total = GridReport {
        ranked: Vec::new(),
        failed: Vec::new(),
    };
    let mut folds: Option<FoldAssignment> = None;
    for spec in &grid.descriptors {
        let cells: Vec<(usize, &RecognizerConfig)> = configs
            .iter()
            .enumerate()
            .filter(|(_, c)| &c.descriptor == spec)
            .collect();
        let ds = match dataset_for(spec) {
            Ok(ds) => ds,
            Err(e) => {
                total.failed.extend(cells.iter().map(|(i, c)| GridFailure {
                    index: *i,
                    config: (*c).clone(),
                    error: e.to_string(),
                }));
                continue;
            }
        };
        let f = match &folds {
            Some(f) if f.fold_of.len() == ds.len() => f.clone(),
            _ => stratified_folds(&ds, k_folds, seed)?,
        };
        let part = evaluate_cells(&ds, &cells, &f, opts);
        folds.get_or_insert(f);
        total.ranked.extend(part.ranked);
        total.failed.extend(part.failed);
    }
    total.rank();
    Ok(total)
}
