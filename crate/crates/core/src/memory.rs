//! Instance-based perceptual memory and K-NN classification.
//!
//! Categories are represented by every view taught for them; nothing is
//! summarised or forgotten, and duplicates are kept. Classification is a
//! linear scan: all stored views are ranked by combined distance to the
//! query and the nearest `k` vote.
//!
//! Ties are broken deterministically: equal distances by label
//! (lexicographic) then insertion order; equal vote counts by smaller summed
//! neighbour distance, then label.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorSpec;
use crate::error::{Error, Result};
use crate::metrics::{
    distance_unchecked, mix, require_deep, require_hand, CombineWeight, Histogram, MetricId,
};

/// One object view: at least one of a hand-crafted or a deep histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureView {
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub instance_id: String,
    #[serde(default)]
    pub view_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand: Option<Histogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep: Option<Histogram>,
}

impl FeatureView {
    pub fn new(
        category: impl Into<String>,
        instance_id: impl Into<String>,
        view_id: impl Into<String>,
        hand: Option<Histogram>,
        deep: Option<Histogram>,
    ) -> Result<Self> {
        if hand.is_none() && deep.is_none() {
            return Err(Error::MissingRepresentation("any".into()));
        }
        Ok(FeatureView {
            category: category.into(),
            instance_id: instance_id.into(),
            view_id: view_id.into(),
            hand,
            deep,
        })
    }

    pub fn hand_only(category: impl Into<String>, hand: Histogram) -> Self {
        FeatureView {
            category: category.into(),
            instance_id: String::new(),
            view_id: String::new(),
            hand: Some(hand),
            deep: None,
        }
    }

    pub fn deep_only(category: impl Into<String>, deep: Histogram) -> Self {
        FeatureView {
            category: category.into(),
            instance_id: String::new(),
            view_id: String::new(),
            hand: None,
            deep: Some(deep),
        }
    }

    /// Key used for pairing and ordering: (category, instance, view).
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.category, &self.instance_id, &self.view_id)
    }
}

pub const DEFAULT_K_VALUES: [usize; 5] = [1, 3, 5, 7, 9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognizerConfig {
    #[serde(default)]
    pub descriptor: DescriptorSpec,
    #[serde(default = "default_metric_h")]
    pub metric_h: MetricId,
    #[serde(default = "default_metric_d")]
    pub metric_d: MetricId,
    #[serde(default = "default_w")]
    pub w: CombineWeight,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_metric_h() -> MetricId {
    MetricId::Bhattacharyya
}
fn default_metric_d() -> MetricId {
    MetricId::Dice
}
fn default_w() -> CombineWeight {
    CombineWeight::HAND_ONLY
}
fn default_k() -> usize {
    1
}

impl Default for RecognizerConfig {
    /// `[GOOD, bhattacharyya, K=1, 30bins]`.
    fn default() -> Self {
        RecognizerConfig {
            descriptor: DescriptorSpec::default(),
            metric_h: default_metric_h(),
            metric_d: default_metric_d(),
            w: default_w(),
            k: default_k(),
        }
    }
}

impl RecognizerConfig {
    pub fn hand(metric: MetricId, k: usize) -> Self {
        RecognizerConfig {
            metric_h: metric,
            k,
            ..RecognizerConfig::default()
        }
    }

    pub fn deep(metric: MetricId, k: usize) -> Self {
        RecognizerConfig {
            metric_d: metric,
            w: CombineWeight::DEEP_ONLY,
            k,
            ..RecognizerConfig::default()
        }
    }

    /// Rejects `k = 0`; warns when `k` is outside {1, 3, 5, 7, 9}.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be positive".into()));
        }
        if !DEFAULT_K_VALUES.contains(&self.k) {
            log::warn!("k = {} is outside the usual {{1, 3, 5, 7, 9}}", self.k);
        }
        Ok(())
    }

    /// Checks that `view` carries every representation this config reads.
    pub fn check_view(&self, view: &FeatureView) -> Result<()> {
        if self.w.needs_hand() {
            require_hand(view)?;
        }
        if self.w.needs_deep() {
            require_deep(view)?;
        }
        Ok(())
    }

    /// Distance between two views under this configuration.
    pub fn view_distance(&self, a: &FeatureView, b: &FeatureView) -> Result<f64> {
        let hand = if self.w.needs_hand() {
            let (x, y) = (require_hand(a)?, require_hand(b)?);
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    left: x.len(),
                    right: y.len(),
                });
            }
            Some(distance_unchecked(self.metric_h, x, y))
        } else {
            None
        };
        let deep = if self.w.needs_deep() {
            let (x, y) = (require_deep(a)?, require_deep(b)?);
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    left: x.len(),
                    right: y.len(),
                });
            }
            Some(distance_unchecked(self.metric_d, x, y))
        } else {
            None
        };
        Ok(mix(self.w, hand, deep))
    }
}

impl fmt::Display for RecognizerConfig {
    /// Bracketed summary, e.g. `[GOOD, bhattacharyya, K=1, 30bins]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.w.get();
        let d = &self.descriptor;
        if w == 0.0 {
            write!(f, "[{}, {}, K={}, {}bins]", d.name, self.metric_h, self.k, d.bins)
        } else if w == 1.0 {
            write!(f, "[deep, {}, K={}]", self.metric_d, self.k)
        } else {
            write!(
                f,
                "[{}+deep, {}+{}, w={}, K={}, {}bins]",
                d.name, self.metric_h, self.metric_d, w, self.k, d.bins
            )
        }
    }
}

/// A neighbour returned by [`PerceptualMemory::nearest`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Neighbor {
    pub label: String,
    pub distance: f64,
    /// Position within its label's stored list.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub label: String,
    /// Votes among the nearest `k`.
    pub votes: BTreeMap<String, usize>,
    /// Smallest distance from the query to any stored view of each label.
    pub min_distance: BTreeMap<String, f64>,
    pub neighbors: Vec<Neighbor>,
}

pub const MEMORY_SCHEMA: u32 = 1;

/// Label-indexed store of taught views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptualMemory {
    schema: u32,
    config: RecognizerConfig,
    instances: BTreeMap<String, Vec<FeatureView>>,
}

impl PerceptualMemory {
    pub fn new(config: RecognizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(PerceptualMemory {
            schema: MEMORY_SCHEMA,
            config,
            instances: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &RecognizerConfig {
        &self.config
    }

    pub fn category_count(&self) -> usize {
        self.instances.len()
    }

    pub fn stored_instances(&self) -> usize {
        self.instances.values().map(Vec::len).sum()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.instances.keys().map(String::as_str)
    }

    pub fn views(&self, label: &str) -> &[FeatureView] {
        self.instances.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Stores `view` under `label`. Other labels are untouched.
    pub fn teach(&mut self, label: &str, view: FeatureView) -> Result<()> {
        self.config.check_view(&view)?;
        let mut view = view;
        view.category = label.to_string();
        self.instances.entry(label.to_string()).or_default().push(view);
        Ok(())
    }

    /// Every stored view with its distance to `query`, sorted ascending with
    /// ties broken by label then insertion order.
    pub fn ranked(&self, query: &FeatureView) -> Result<Vec<Neighbor>> {
        if self.instances.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let mut all = Vec::with_capacity(self.stored_instances());
        // BTreeMap iteration is already (label, insertion) ordered, so a
        // stable sort on distance realises the full tie-break chain.
        for (label, views) in &self.instances {
            for (index, v) in views.iter().enumerate() {
                all.push(Neighbor {
                    label: label.clone(),
                    distance: self.config.view_distance(query, v)?,
                    index,
                });
            }
        }
        all.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        Ok(all)
    }

    pub fn nearest(&self, query: &FeatureView, k: usize) -> Result<Vec<Neighbor>> {
        let mut all = self.ranked(query)?;
        all.truncate(k.max(1));
        Ok(all)
    }

    /// Majority vote over the nearest `k` (the config's K by default).
    pub fn classify(&self, query: &FeatureView) -> Result<Classification> {
        self.classify_k(query, self.config.k)
    }

    pub fn classify_k(&self, query: &FeatureView, k: usize) -> Result<Classification> {
        let all = self.ranked(query)?;
        let mut min_distance = BTreeMap::new();
        for n in &all {
            min_distance.entry(n.label.clone()).or_insert(n.distance);
        }
        let neighbors: Vec<Neighbor> = all.into_iter().take(k.max(1)).collect();

        let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for n in &neighbors {
            let e = tally.entry(n.label.as_str()).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += n.distance;
        }
        // BTreeMap order makes the lexicographic label the last tie-break.
        let label = tally
            .iter()
            .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.total_cmp(&b.1 .1)))
            .map(|(l, _)| l.to_string())
            .expect("nearest is nonempty");
        let votes = tally.iter().map(|(l, (c, _))| (l.to_string(), *c)).collect();
        Ok(Classification {
            label,
            votes,
            min_distance,
            neighbors,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mem: PerceptualMemory = serde_json::from_str(text)?;
        if mem.schema != MEMORY_SCHEMA {
            return Err(Error::InvalidConfig(format!(
                "memory schema {} unsupported",
                mem.schema
            )));
        }
        mem.config.validate()?;
        for views in mem.instances.values() {
            for v in views {
                mem.config.check_view(v)?;
            }
        }
        Ok(mem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: &[f64]) -> Histogram {
        Histogram::from_raw(v.to_vec()).unwrap()
    }

    fn view(label: &str, v: &[f64]) -> FeatureView {
        FeatureView::hand_only(label, h(v))
    }

    fn manhattan(k: usize) -> PerceptualMemory {
        PerceptualMemory::new(RecognizerConfig::hand(MetricId::Manhattan, k)).unwrap()
    }

    #[test]
    fn teach_counts() {
        let mut m = manhattan(1);
        m.teach("mug", view("", &[1.0, 0.0])).unwrap();
        assert_eq!((m.category_count(), m.stored_instances()), (1, 1));
        m.teach("mug", view("", &[1.0, 0.0])).unwrap();
        assert_eq!(m.stored_instances(), 2);
        m.teach("fork", view("", &[0.0, 1.0])).unwrap();
        assert_eq!(m.category_count(), 2);
        assert_eq!(m.views("mug")[0].category, "mug");
    }

    #[test]
    fn teach_requires_representation() {
        let mut m = PerceptualMemory::new(RecognizerConfig::deep(MetricId::Dice, 1)).unwrap();
        assert!(matches!(
            m.teach("a", view("a", &[1.0])),
            Err(Error::MissingRepresentation(_))
        ));
    }

    #[test]
    fn empty_memory() {
        let m = manhattan(1);
        assert!(matches!(m.classify(&view("", &[1.0])), Err(Error::EmptyMemory)));
    }

    #[test]
    fn k_clamps_to_store() {
        let mut m = manhattan(9);
        m.teach("a", view("", &[1.0, 0.0])).unwrap();
        assert_eq!(m.nearest(&view("", &[0.0, 1.0]), 9).unwrap().len(), 1);
        m.teach("b", view("", &[0.0, 1.0])).unwrap();
        assert_eq!(m.nearest(&view("", &[0.0, 1.0]), 9).unwrap().len(), 2);
    }

    #[test]
    fn majority_vote() {
        let mut m = manhattan(3);
        m.teach("A", view("", &[0.9, 0.1])).unwrap();
        m.teach("A", view("", &[0.8, 0.2])).unwrap();
        m.teach("B", view("", &[0.7, 0.3])).unwrap();
        m.teach("B", view("", &[0.0, 1.0])).unwrap();
        let c = m.classify(&view("", &[1.0, 0.0])).unwrap();
        assert_eq!(c.label, "A");
        assert_eq!(c.votes["A"], 2);
        assert_eq!(c.votes["B"], 1);
    }

    #[test]
    fn equal_distance_ties_prefer_label_then_insertion() {
        let mut m = manhattan(1);
        m.teach("b", view("", &[0.5, 0.5])).unwrap();
        m.teach("a", view("", &[0.5, 0.5])).unwrap();
        let n = m.nearest(&view("", &[0.5, 0.5]), 2).unwrap();
        assert_eq!(n[0].label, "a");
        assert_eq!(m.classify(&view("", &[0.5, 0.5])).unwrap().label, "a");
    }

    #[test]
    fn snapshot_round_trip() {
        let mut m = manhattan(1);
        m.teach("a", view("", &[0.25, 0.75])).unwrap();
        let json = m.to_json().unwrap();
        assert!(json.contains("\"schema\": 1"));
        assert_eq!(PerceptualMemory::from_json(&json).unwrap(), m);
    }

    #[test]
    fn display_matches_bracket_form() {
        assert_eq!(
            RecognizerConfig::default().to_string(),
            "[GOOD, bhattacharyya, K=1, 30bins]"
        );
    }
}
