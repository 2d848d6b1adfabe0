//! Feature files and experiment configuration.
//!
//! One CSV schema carries both representations:
//!
//! ```text
//! category,instance_id,view_id,tag,dim,v1,v2,...,vN
//! mug,mug_1,0001,hand,2700,0.0,0.0013,...
//! mug,mug_1,0001,deep,1024,0.0021,...
//! ```
//!
//! `tag` is `hand` or `deep`; each row has exactly `dim` values and `dim`
//! is constant per tag. The header lists `v1..vN` for the widest row. Rows
//! are written sorted by (category, instance_id, view_id, tag), and values
//! in shortest round-trip form, so writing a loaded file reproduces it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{DescriptorRegistry, DescriptorSpec};
use crate::error::{Error, Result};
use crate::memory::{FeatureView, RecognizerConfig};
use crate::metrics::Histogram;
use crate::offline_eval::{ConfigGrid, Dataset, DEFAULT_FOLDS};
use crate::pointcloud::{load_cloud, scan_dataset_dir, ViewFile};
use crate::teacher::ProtocolConfig;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tag {
    Deep,
    Hand,
}

impl Tag {
    pub fn name(self) -> &'static str {
        match self {
            Tag::Deep => "deep",
            Tag::Hand => "hand",
        }
    }

    fn parse(s: &str) -> Option<Tag> {
        match s {
            "hand" => Some(Tag::Hand),
            "deep" => Some(Tag::Deep),
            _ => None,
        }
    }
}

fn check_label(s: &str, what: &str) -> Result<()> {
    if s.contains([',', '\n', '\r', '"']) {
        return Err(Error::InvalidParams(format!(
            "{what} `{s}` contains a CSV delimiter"
        )));
    }
    Ok(())
}

/// Serializes a dataset in the feature CSV schema.
pub fn write_features(ds: &Dataset) -> Result<String> {
    let mut rows: Vec<(&str, &str, &str, Tag, &Histogram)> = Vec::new();
    for v in &ds.views {
        check_label(&v.category, "category")?;
        check_label(&v.instance_id, "instance_id")?;
        check_label(&v.view_id, "view_id")?;
        if let Some(h) = &v.hand {
            rows.push((&v.category, &v.instance_id, &v.view_id, Tag::Hand, h));
        }
        if let Some(d) = &v.deep {
            rows.push((&v.category, &v.instance_id, &v.view_id, Tag::Deep, d));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    let width = rows.iter().map(|r| r.4.len()).max().unwrap_or(0);

    let mut out = String::from("category,instance_id,view_id,tag,dim");
    for i in 1..=width {
        let _ = write!(out, ",v{i}");
    }
    out.push('\n');
    for (c, i, v, tag, h) in rows {
        let _ = write!(out, "{c},{i},{v},{},{}", tag.name(), h.len());
        for x in h.iter() {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes through a temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_features_file(path: &Path, ds: &Dataset) -> Result<()> {
    write_atomic(path, &write_features(ds)?)
}

/// Parses a feature CSV. Deep vectors (and any hand vector that is not
/// already a histogram) are passed through L1 normalization.
pub fn parse_features(text: &str, name: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::Schema { row: 1, reason: "missing header".into() }),
    };
    let expected = ["category", "instance_id", "view_id", "tag", "dim"];
    if header.len() < 5 || header.iter().take(5).ne(expected) {
        return Err(Error::Schema {
            row: 1,
            reason: format!("header must start with {}", expected.join(",")),
        });
    }

    type Key = (String, String, String);
    let mut views: BTreeMap<Key, (Option<Histogram>, Option<Histogram>)> = BTreeMap::new();
    let mut dims: BTreeMap<Tag, usize> = BTreeMap::new();

    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec?;
        let schema = |reason: String| Error::Schema { row, reason };
        if rec.len() < 5 {
            return Err(schema(format!("{} columns, at least 5 required", rec.len())));
        }
        let tag = Tag::parse(&rec[3]).ok_or_else(|| schema(format!("unknown tag `{}`", &rec[3])))?;
        let dim: usize = rec[4]
            .parse()
            .map_err(|_| schema(format!("invalid dim `{}`", &rec[4])))?;
        if dim == 0 || rec.len() - 5 != dim {
            return Err(schema(format!("dim {dim} but {} values", rec.len() - 5)));
        }
        match dims.get(&tag) {
            Some(&d) if d != dim => {
                return Err(schema(format!("{} dim {dim} differs from earlier {d}", tag.name())))
            }
            _ => {
                dims.insert(tag, dim);
            }
        }
        let values = rec
            .iter()
            .skip(5)
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| schema(format!("invalid value `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let hist = Histogram::from_raw(values).map_err(|e| schema(e.to_string()))?;
        let key = (rec[0].to_string(), rec[1].to_string(), rec[2].to_string());
        let slot = views.entry(key).or_default();
        let target = match tag {
            Tag::Hand => &mut slot.0,
            Tag::Deep => &mut slot.1,
        };
        if target.is_some() {
            return Err(schema(format!("duplicate {} row for this view", tag.name())));
        }
        *target = Some(hist);
    }

    let views = views
        .into_iter()
        .map(|((category, instance_id, view_id), (hand, deep))| FeatureView {
            category,
            instance_id,
            view_id,
            hand,
            deep,
        })
        .collect();
    Ok(Dataset::new(name, views))
}

pub fn load_features(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = parse_features(&text, &name)?;
    for (c, n) in ds.category_counts() {
        log::info!("{}: {c} has {n} views", path.display());
    }
    Ok(ds)
}

/// Fills representations missing from `base` with those of `other`,
/// matching views by (category, instance_id, view_id). Views only in
/// `other` are ignored.
pub fn attach(base: &Dataset, other: &Dataset) -> Dataset {
    let index: BTreeMap<(&str, &str, &str), &FeatureView> =
        other.views.iter().map(|v| (v.key(), v)).collect();
    let views = base
        .views
        .iter()
        .map(|v| {
            let found = index.get(&v.key()).copied();
            let mut v = v.clone();
            if let Some(o) = found {
                if v.hand.is_none() {
                    v.hand = o.hand.clone();
                }
                if v.deep.is_none() {
                    v.deep = o.deep.clone();
                }
            }
            v
        })
        .collect();
    Dataset {
        name: base.name.clone(),
        views,
        mean_describe_time: base.mean_describe_time,
    }
}

/// A view that could not be described.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skip {
    pub path: PathBuf,
    pub category: String,
    pub instance_id: String,
    pub view_id: String,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub dataset: Dataset,
    pub skips: Vec<Skip>,
}

/// Describes every view of a `<root>/<category>/<instance>/<view>.{pcd,ply}`
/// tree. Views whose cloud cannot be parsed or described are skipped and
/// listed.
pub fn extract_dataset(
    root: &Path,
    spec: &DescriptorSpec,
    registry: &DescriptorRegistry,
) -> Result<Extraction> {
    let files = scan_dataset_dir(root)?;
    let name = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    extract_views(&files, &name, spec, registry)
}

pub fn extract_views(
    files: &[ViewFile],
    name: &str,
    spec: &DescriptorSpec,
    registry: &DescriptorRegistry,
) -> Result<Extraction> {
    if files.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let described: Vec<(std::result::Result<Histogram, String>, f64)> = files
        .par_iter()
        .map(|f| {
            let parsed = match load_cloud(&f.path) {
                Ok(p) => p,
                Err(e) => return (Err(e.to_string()), 0.0),
            };
            let start = Instant::now();
            let h = registry.describe(&parsed.cloud, spec).map_err(|e| e.to_string());
            (h, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut views = Vec::new();
    let mut skips = Vec::new();
    let mut seconds = Vec::new();
    for (f, (h, t)) in files.iter().zip(described) {
        match h {
            Ok(h) => {
                seconds.push(t);
                views.push(FeatureView {
                    category: f.category.clone(),
                    instance_id: f.instance_id.clone(),
                    view_id: f.view_id.clone(),
                    hand: Some(h),
                    deep: None,
                });
            }
            Err(error) => skips.push(Skip {
                path: f.path.clone(),
                category: f.category.clone(),
                instance_id: f.instance_id.clone(),
                view_id: f.view_id.clone(),
                error,
            }),
        }
    }
    if views.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut dataset = Dataset::new(name, views);
    dataset.mean_describe_time = Some(crate::stats::mean(&seconds));
    Ok(Extraction { dataset, skips })
}

pub fn skips_csv(skips: &[Skip]) -> String {
    let mut out = String::from("category,instance_id,view_id,path,error\n");
    for s in skips {
        let _ = writeln!(
            out,
            "{},{},{},{},\"{}\"",
            s.category,
            s.instance_id,
            s.view_id,
            s.path.display(),
            s.error.replace('"', "'")
        );
    }
    out
}

/// A JSON experiment description. Every field may be overridden from the
/// command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub recognizer: RecognizerConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    /// Point-cloud dataset directory.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Feature CSV.
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_repeats() -> usize {
    1
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: CONFIG_SCHEMA,
            recognizer: RecognizerConfig::default(),
            protocol: ProtocolConfig::default(),
            dataset: None,
            features: None,
            out: None,
            repeats: default_repeats(),
            folds: default_folds(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::InvalidConfig(format!("schema {} unsupported", self.schema)));
        }
        self.recognizer.validate()?;
        self.protocol.validate()?;
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be >= 2".into()));
        }
        for p in self.dataset.iter().chain(&self.features) {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub schema: u32,
    #[serde(flatten)]
    pub grid: ConfigGrid,
}

pub fn load_grid(path: &Path) -> Result<ConfigGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: GridFile = serde_json::from_str(&text)?;
    if file.schema != CONFIG_SCHEMA {
        return Err(Error::InvalidConfig(format!("grid schema {} unsupported", file.schema)));
    }
    for spec in &file.grid.descriptors {
        crate::descriptor::GoodParams::new(spec.bins)?;
    }
    if file.grid.k.contains(&0) {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    Ok(file.grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: &[f64]) -> Histogram {
        Histogram::from_raw(v.to_vec()).unwrap()
    }

    fn hand_only() -> Dataset {
        let mut views = Vec::new();
        for c in ["a", "b"] {
            for i in 0..3 {
                views.push(
                    FeatureView::new(c, format!("{c}1"), i.to_string(), Some(h(&[1.0, i as f64 + 1.0])), None)
                        .unwrap(),
                );
            }
        }
        Dataset::new("t", views)
    }

    #[test]
    fn hand_only_round_trip() {
        let ds = hand_only();
        let text = write_features(&ds).unwrap();
        assert!(text.starts_with("category,instance_id,view_id,tag,dim,v1,v2\n"));
        let back = parse_features(&text, "t").unwrap();
        assert_eq!(back.len(), 6);
        assert!(back.views.iter().all(|v| v.deep.is_none()));
        assert_eq!(back, ds);
        assert_eq!(write_features(&back).unwrap(), text);
    }

    #[test]
    fn dimension_drift_is_a_schema_error() {
        let text = "category,instance_id,view_id,tag,dim,v1,v2,v3\na,1,1,hand,2,0.5,0.5\na,1,2,hand,3,0.2,0.3,0.5\n";
        assert!(matches!(parse_features(text, "t"), Err(Error::Schema { row: 3, .. })));
        let short = "category,instance_id,view_id,tag,dim,v1,v2\na,1,1,hand,2,0.5\n";
        assert!(matches!(parse_features(short, "t"), Err(Error::Schema { row: 2, .. })));
    }

    #[test]
    fn both_tags_pair_up() {
        let text = "category,instance_id,view_id,tag,dim,v1,v2,v3\na,1,1,deep,3,1,2,-1\na,1,1,hand,2,0.5,0.5\n";
        let ds = parse_features(text, "t").unwrap();
        assert_eq!(ds.len(), 1);
        let v = &ds.views[0];
        assert_eq!(v.hand.as_ref().unwrap().values(), &[0.5, 0.5]);
        let deep = v.deep.as_ref().unwrap().values();
        assert!((deep[0] - 1.0 / 3.0).abs() < 1e-15 && deep[2] == 0.0);
    }

    #[test]
    fn bad_header_and_tag() {
        assert!(parse_features("cat,instance_id\n", "t").is_err());
        let text = "category,instance_id,view_id,tag,dim,v1\na,1,1,rgb,1,1\n";
        assert!(matches!(parse_features(text, "t"), Err(Error::Schema { .. })));
    }

    #[test]
    fn attach_fills_missing_halves() {
        let hand = hand_only();
        let mut deep = hand.clone();
        for v in &mut deep.views {
            v.deep = v.hand.take();
        }
        let both = attach(&hand, &deep);
        assert!(both.views.iter().all(|v| v.hand.is_some() && v.deep.is_some()));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = parse_config(r#"{"schema": 1}"#).unwrap();
        assert_eq!(cfg.protocol.tau, 0.8);
        assert_eq!(cfg.recognizer.metric_h, crate::MetricId::Bhattacharyya);
        assert!(parse_config(r#"{"schema": 2}"#).is_err());
        assert!(parse_config(r#"{"schema": 1, "protocol": {"tau": 1.5}}"#).is_err());
        assert!(parse_config(r#"{"schema": 1, "features": "/nonexistent/x.csv"}"#).is_err());
        assert!(parse_config(r#"{"schema": 1, "recognizer": {"w": 2.0}}"#).is_err());
    }
}
