use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use openended_core::descriptor::{good_explained, GoodExplanation};
use openended_core::feature_io::{
    attach, extract_dataset, load_config, load_features, load_grid, skips_csv, write_atomic,
    write_features_file, ExperimentConfig,
};
use openended_core::offline_eval::{
    cross_validate_with, grid_search, grid_search_by_descriptor, stratified_folds, ConfigGrid,
    EvalOptions, GridReport,
};
use openended_core::pointcloud::load_cloud;
use openended_core::teacher::{curves_csv, log_csv, run_repeats, MemoryAgent, ProtocolRun, RepeatSummary};
use openended_core::{
    distance, CombineWeight, Dataset, DescriptorRegistry, DescriptorSpec, GoodParams, Histogram,
    MetricId, ProtocolConfig, ProtocolReport, RecognizerConfig,
};

use crate::{
    Cli, Command, DescribeArgs, DistArgs, ExtractArgs, OfflineArgs, OnlineArgs, RecognizerArgs,
    TuneArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Describe(a) => describe(cli, a),
        Command::Dist(a) => dist(cli, a),
        Command::Extract(a) => extract(cli, a),
        Command::OfflineEval(a) => offline_eval(cli, a),
        Command::Tune(a) => tune(cli, a),
        Command::OnlineEval(a) => online_eval(cli, a),
        Command::Report(a) => crate::report::run(cli, a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn join_row(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn describe(cli: &Cli, a: &DescribeArgs) -> Result<()> {
    let parsed = load_cloud(&a.input)?;
    if parsed.dropped > 0 {
        log::warn!("{}: dropped {} non-finite points", a.input.display(), parsed.dropped);
    }
    let ex = good_explained(&parsed.cloud, GoodParams::new(a.bins)?, a.force_frame)?;
    if cli.json {
        let explain = a.explain.then_some(&ex);
        return print_json(&json!({ "histogram": ex.histogram, "explain": explain }));
    }
    println!("{}", join_row(&ex.histogram));
    if a.explain {
        print!("{}", explain_text(&ex));
    }
    Ok(())
}

fn explain_text(ex: &GoodExplanation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# eigenvalues {}", join_row(&ex.frame.eigenvalues));
    for (i, axis) in ex.frame.axes.iter().enumerate() {
        let _ = writeln!(out, "# axis{} {}", i, join_row(axis));
    }
    let order: Vec<String> = ex.matrices.iter().map(|m| m.plane.to_string()).collect();
    let _ = writeln!(out, "# order {}", order.join(","));
    for ((m, e), v) in ex.matrices.iter().zip(&ex.entropies).zip(&ex.variances) {
        let _ = writeln!(out, "# plane {} entropy={} variance={}", m.plane, e, v);
        for row in m.cells.chunks(m.bins) {
            let _ = writeln!(out, "{}", join_row(row));
        }
    }
    out
}

fn read_row(path: &Path) -> Result<Histogram> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .with_context(|| format!("{}: no data row", path.display()))?;
    let values = line
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("{}: not a numeric row", path.display()))?;
    Ok(Histogram::from_raw(values)?)
}

fn dist(cli: &Cli, a: &DistArgs) -> Result<()> {
    let p = read_row(&a.a)?;
    let q = read_row(&a.b)?;
    let metrics: Vec<MetricId> = if a.metric.eq_ignore_ascii_case("all") {
        MetricId::ALL.to_vec()
    } else {
        vec![a.metric.parse()?]
    };
    let mut rows = Vec::with_capacity(metrics.len());
    for m in metrics {
        rows.push((m, distance(m, &p, &q)?));
    }
    if cli.json {
        let out: Vec<_> = rows.iter().map(|(m, v)| json!({ "metric": m, "value": v })).collect();
        return print_json(&out);
    }
    for (m, v) in rows {
        println!("{},{}", m.name(), v);
    }
    Ok(())
}

fn skips_path(out: &Path) -> PathBuf {
    out.with_extension("skips.csv")
}

fn extract(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    let mut spec = DescriptorSpec::good(a.bins);
    spec.force_frame = a.force_frame;
    GoodParams::new(a.bins)?;
    let ex = extract_dataset(&a.dataset, &spec, &DescriptorRegistry::default())?;
    write_features_file(&a.out, &ex.dataset)?;
    write_file(&skips_path(&a.out), &skips_csv(&ex.skips))?;
    for s in &ex.skips {
        log::warn!("skipped {}: {}", s.path.display(), s.error);
    }
    let summary = json!({
        "views": ex.dataset.len(),
        "skipped": ex.skips.len(),
        "categories": ex.dataset.category_counts(),
        "mean_describe_time": if cli.no_timing { None } else { ex.dataset.mean_describe_time },
    });
    if cli.json {
        return print_json(&summary);
    }
    println!(
        "wrote {} views in {} categories to {} ({} skipped)",
        ex.dataset.len(),
        ex.dataset.categories().len(),
        a.out.display(),
        ex.skips.len()
    );
    Ok(())
}

/// GOOD bin count implied by a hand feature of length `3 b^2`.
fn infer_bins(ds: &Dataset) -> Option<usize> {
    let dim = ds.views.iter().find_map(|v| v.hand.as_ref())?.len();
    let b = ((dim / 3) as f64).sqrt().round() as usize;
    (3 * b * b == dim).then_some(b)
}

/// Loads a dataset directory (described with `spec`) or a feature CSV, then
/// fills missing representations from `deep`.
fn load_dataset(
    cli: &Cli,
    path: &Path,
    deep: Option<&Path>,
    spec: &DescriptorSpec,
) -> Result<Dataset> {
    let mut ds = if path.is_dir() {
        let ex = extract_dataset(path, spec, &DescriptorRegistry::default())?;
        for s in &ex.skips {
            log::warn!("skipped {}: {}", s.path.display(), s.error);
        }
        ex.dataset
    } else {
        load_features(path)?
    };
    if let Some(deep) = deep {
        ds = attach(&ds, &load_features(deep)?);
    }
    if cli.no_timing {
        ds.mean_describe_time = None;
    }
    Ok(ds)
}

fn experiment(path: Option<&PathBuf>) -> Result<(ExperimentConfig, bool)> {
    match path {
        Some(p) => Ok((load_config(p).with_context(|| format!("config {}", p.display()))?, true)),
        None => Ok((ExperimentConfig::default(), false)),
    }
}

fn apply_recognizer(cfg: &mut RecognizerConfig, a: &RecognizerArgs) -> Result<()> {
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(m) = &a.metric_h {
        cfg.metric_h = m.parse()?;
    }
    if let Some(m) = &a.metric_d {
        cfg.metric_d = m.parse()?;
    }
    if let Some(w) = a.w {
        cfg.w = CombineWeight::new(w)?;
    }
    if let Some(b) = a.bins {
        cfg.descriptor.bins = b;
    }
    if a.force_frame {
        cfg.descriptor.force_frame = true;
    }
    cfg.validate()?;
    Ok(())
}

/// Without an explicit weight, use whichever representations the data has.
fn default_weight(ds: &Dataset) -> CombineWeight {
    let hand = ds.views.iter().all(|v| v.hand.is_some());
    let deep = ds.views.iter().all(|v| v.deep.is_some());
    match (hand, deep) {
        (true, true) => CombineWeight::default(),
        (false, true) => CombineWeight::DEEP_ONLY,
        _ => CombineWeight::HAND_ONLY,
    }
}

/// Resolves the recognizer and dataset shared by `offline-eval` and
/// `online-eval`.
fn prepare(
    cli: &Cli,
    exp: &ExperimentConfig,
    from_file: bool,
    data: Option<&PathBuf>,
    deep: Option<&PathBuf>,
    rec_args: &RecognizerArgs,
) -> Result<(Dataset, RecognizerConfig)> {
    let mut rec = exp.recognizer.clone();
    apply_recognizer(&mut rec, rec_args)?;
    let data = data
        .or(exp.dataset.as_ref())
        .or(exp.features.as_ref())
        .context("no dataset given (use --dataset/--features or a config file)")?;
    let ds = load_dataset(cli, data, deep.map(PathBuf::as_path), &rec.descriptor)?;
    if !data.is_dir() {
        if let Some(b) = infer_bins(&ds) {
            rec.descriptor.bins = b;
        }
    }
    if !from_file && rec_args.w.is_none() {
        rec.w = default_weight(&ds);
    }
    Ok((ds, rec))
}

fn seed(cli: &Cli, exp: &ExperimentConfig) -> u64 {
    cli.seed.unwrap_or(exp.protocol.seed)
}

fn opts(cli: &Cli) -> EvalOptions {
    EvalOptions {
        measure_time: !cli.no_timing,
    }
}

fn offline_eval(cli: &Cli, a: &OfflineArgs) -> Result<()> {
    let (exp, from_file) = experiment(a.config.as_ref())?;
    let (ds, rec) = prepare(cli, &exp, from_file, a.dataset.as_ref(), a.deep.as_ref(), &a.recognizer)?;
    let k_folds = a.folds.unwrap_or(exp.folds);
    let seed = seed(cli, &exp);
    let folds = stratified_folds(&ds, k_folds, seed)?;
    let report = cross_validate_with(&ds, &rec, &folds, opts(cli))?;

    if let Some(out) = a.out.as_ref().or(exp.out.as_ref()) {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_file(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
        write_file(&out.join("confusion.csv"), &report.confusion_csv())?;
    }
    if cli.json {
        return print_json(&report);
    }
    println!(
        "{}\tinstance_accuracy={:.4}\tclass_accuracy={:.4}\tviews={}\tfolds={}",
        report.config_label,
        report.instance_accuracy,
        report.class_accuracy,
        report.total(),
        k_folds
    );
    Ok(())
}

fn ranked_table(report: &GridReport, top: usize) -> String {
    let mut out = String::new();
    if let Some(best) = report.ranked.first() {
        let _ = writeln!(out, "{}", best.report.config_label);
    }
    let _ = writeln!(out, "rank\tcls.acc\tins.acc\tclassify_s\tconfig");
    for (i, e) in report.ranked.iter().take(top).enumerate() {
        let _ = writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.3e}\t{}",
            i + 1,
            e.report.class_accuracy,
            e.report.instance_accuracy,
            e.report.mean_classify_time,
            e.report.config_label
        );
    }
    out
}

fn ranked_csv(report: &GridReport) -> String {
    let mut out = String::from("rank,index,class_accuracy,instance_accuracy,mean_classify_time,config\n");
    for (i, e) in report.ranked.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},\"{}\"",
            i + 1,
            e.index,
            e.report.class_accuracy,
            e.report.instance_accuracy,
            e.report.mean_classify_time,
            e.report.config_label
        );
    }
    out
}

fn tune(cli: &Cli, a: &TuneArgs) -> Result<()> {
    let grid = match &a.grid {
        Some(p) => load_grid(p).with_context(|| format!("grid {}", p.display()))?,
        None => ConfigGrid::hand_crafted(&[30]),
    };
    let seed = cli.seed.unwrap_or(0);
    let deep = a.deep.as_deref();
    let report = if a.dataset.is_dir() {
        grid_search_by_descriptor(
            &grid,
            |spec| load_dataset(cli, &a.dataset, deep, spec).map_err(into_core),
            a.folds,
            seed,
            opts(cli),
        )?
    } else {
        if grid.descriptors.len() > 1 {
            bail!("a feature CSV fixes the descriptor; sweep descriptors from a dataset directory");
        }
        let ds = load_dataset(cli, &a.dataset, deep, &DescriptorSpec::default())?;
        let mut configs = grid.expand();
        if let Some(b) = infer_bins(&ds) {
            for c in &mut configs {
                c.descriptor.bins = b;
            }
        }
        grid_search(&ds, &configs, a.folds, seed, opts(cli))?
    };
    for f in &report.failed {
        log::warn!("grid cell {} failed: {}", f.index, f.error);
    }
    if report.ranked.is_empty() {
        bail!("every grid cell failed");
    }
    if let Some(out) = &a.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_file(&out.join("tune.json"), &serde_json::to_string_pretty(&report)?)?;
        write_file(&out.join("ranked.csv"), &ranked_csv(&report))?;
    }
    if cli.json {
        return print_json(&report);
    }
    print!("{}", ranked_table(&report, a.top));
    Ok(())
}

fn into_core(e: anyhow::Error) -> openended_core::Error {
    match e.downcast::<openended_core::Error>() {
        Ok(e) => e,
        Err(e) => openended_core::Error::InvalidConfig(format!("{e:#}")),
    }
}

#[derive(Serialize)]
struct OnlineSummary<'a> {
    dataset: &'a str,
    recognizer: &'a RecognizerConfig,
    recognizer_label: String,
    protocol: &'a ProtocolConfig,
    repeats: usize,
    /// Report of the first run (seed = protocol.seed).
    report: &'a ProtocolReport,
    table: RepeatSummary,
}

fn online_eval(cli: &Cli, a: &OnlineArgs) -> Result<()> {
    let (exp, from_file) = experiment(a.config.as_ref())?;
    let data = a.features.as_ref().or(a.dataset.as_ref());
    let (ds, rec) = prepare(cli, &exp, from_file, data, a.deep.as_ref(), &a.recognizer)?;

    let mut proto = exp.protocol.clone();
    proto.seed = seed(cli, &exp);
    if let Some(v) = a.intro_views {
        proto.intro_views = v;
    }
    if let Some(v) = a.window_factor {
        proto.window_factor = v;
    }
    if let Some(v) = a.stall_budget {
        proto.stall_budget = v;
    }
    if a.no_reuse {
        proto.allow_reuse = false;
    }
    let repeats = a.repeats.unwrap_or(exp.repeats);
    if repeats == 0 {
        bail!("--repeats must be >= 1");
    }
    let taus = if a.tau.is_empty() { vec![proto.tau] } else { a.tau.clone() };
    let out = a.out.as_ref().or(exp.out.as_ref());

    let mut sweep = Vec::new();
    let mut text = String::new();
    for &tau in &taus {
        let mut cfg = proto.clone();
        cfg.tau = tau;
        cfg.validate()?;
        let runs: Vec<ProtocolRun> = run_repeats(&ds, &cfg, repeats, || MemoryAgent::new(rec.clone()))?;
        let table = RepeatSummary::from_runs(&runs);
        let first = &runs[0];

        if let Some(out) = out {
            let dir = if taus.len() > 1 { out.join(format!("tau_{tau}")) } else { out.clone() };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let summary = OnlineSummary {
                dataset: &ds.name,
                recognizer: &rec,
                recognizer_label: rec.to_string(),
                protocol: &cfg,
                repeats,
                report: &first.report,
                table: table.clone(),
            };
            write_file(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
            write_file(&dir.join("summary.txt"), &table.table())?;
            write_file(&dir.join("curves.csv"), &curves_csv(&first.report))?;
            write_file(&dir.join("log.csv"), &log_csv(&first.log))?;
            if repeats > 1 {
                let runs_dir = dir.join("runs");
                fs::create_dir_all(&runs_dir)?;
                for (i, r) in runs.iter().enumerate() {
                    write_file(&runs_dir.join(format!("run_{:02}_curves.csv", i + 1)), &curves_csv(&r.report))?;
                }
            }
        }
        let _ = writeln!(
            text,
            "tau={tau} {} termination={:?} learned={} asks={} stored={}",
            rec,
            first.report.termination,
            first.report.categories_learned,
            first.report.total_asks,
            first.report.stored_instances
        );
        text.push_str(&table.table());
        sweep.push((tau, table));
    }

    if let (Some(out), true) = (out, taus.len() > 1) {
        let mut csv = String::from(
            "tau,avg_instance_accuracy,std_instance_accuracy,avg_class_accuracy,std_class_accuracy,avg_categories_learned,avg_stored_instances\n",
        );
        for (tau, t) in &sweep {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                tau,
                t.avg.instance_accuracy,
                t.std.instance_accuracy,
                t.avg.class_accuracy,
                t.std.class_accuracy,
                t.avg.categories_learned,
                t.avg.stored_instances
            );
        }
        write_file(&out.join("sweep.csv"), &csv)?;
    }

    if cli.json {
        let out: Vec<_> = sweep.iter().map(|(tau, t)| json!({ "tau": tau, "table": t })).collect();
        return print_json(&out);
    }
    print!("{text}");
    Ok(())
}
