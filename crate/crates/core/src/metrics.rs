//! Histogram distance functions.
//!
//! Fourteen dissimilarities over L1-normalized histograms, following the
//! conventions of Cha's survey of distance/similarity measures between
//! probability density functions. Smaller always means more similar. Note
//! that Motyka's identity value is 1/2, not 0.
//!
//! The divisive and logarithmic measures (chi-square, Pearson, Neyman,
//! Canberra, KL, symmetric KL, Bhattacharyya) first replace each entry by
//! `max(entry, 1e-10)` and renormalize both inputs, so empty bins never
//! divide by zero.
//!
//! [`combined_distance`] mixes a hand-crafted and a deep distance affinely:
//! `(1 - w)·D_h + w·D_d`. The two components are not rescaled, so their
//! ranges can differ by orders of magnitude (Bhattacharyya is unbounded,
//! Dice lives in `[0, 1]`); tuning `w` absorbs that.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::memory::FeatureView;

pub const SMOOTHING_EPSILON: f64 = 1e-10;

/// Sum tolerance for a valid histogram.
pub const HISTOGRAM_SUM_TOL: f64 = 1e-9;

/// An L1-normalized, nonnegative, finite vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Histogram(Vec<f64>);

impl Histogram {
    /// Validates an already-normalized vector.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidHistogram("empty".into()));
        }
        check_entries(&values)?;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > HISTOGRAM_SUM_TOL {
            return Err(Error::InvalidHistogram(format!("sums to {sum}, not 1")));
        }
        Ok(Histogram(values))
    }

    /// Accepts a raw vector: kept bit-for-bit if it is already a histogram
    /// to within 1e-12, otherwise passed through [`normalize_l1`].
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if !values.is_empty() && values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            let sum: f64 = values.iter().sum();
            if (sum - 1.0).abs() <= 1e-12 {
                return Ok(Histogram(values));
            }
        }
        normalize_l1(&values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Histogram {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for Histogram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Histogram::new(values).map_err(serde::de::Error::custom)
    }
}

fn check_entries(values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::InvalidHistogram(format!("entry {i} is NaN")));
        }
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::InvalidHistogram(format!("entry {i} = {v}")));
        }
    }
    Ok(())
}

/// Clamps negatives to zero and divides by the sum.
pub fn normalize_l1(v: &[f64]) -> Result<Histogram> {
    if v.is_empty() {
        return Err(Error::InvalidHistogram("empty".into()));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidHistogram(format!("entry {i} is not finite")));
    }
    let clamped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidHistogram("all entries are zero after clamping".into()));
    }
    Ok(Histogram(clamped.into_iter().map(|x| x / sum).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    Euclidean,
    Manhattan,
    ChiSquare,
    Pearson,
    Neyman,
    Canberra,
    KlDivergence,
    SymmetricKl,
    Motyka,
    Cosine,
    Dice,
    Bhattacharyya,
    Gower,
    Sorensen,
}

impl MetricId {
    pub const ALL: [MetricId; 14] = [
        MetricId::Euclidean,
        MetricId::Manhattan,
        MetricId::ChiSquare,
        MetricId::Pearson,
        MetricId::Neyman,
        MetricId::Canberra,
        MetricId::KlDivergence,
        MetricId::SymmetricKl,
        MetricId::Motyka,
        MetricId::Cosine,
        MetricId::Dice,
        MetricId::Bhattacharyya,
        MetricId::Gower,
        MetricId::Sorensen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Euclidean => "euclidean",
            MetricId::Manhattan => "manhattan",
            MetricId::ChiSquare => "chi_square",
            MetricId::Pearson => "pearson",
            MetricId::Neyman => "neyman",
            MetricId::Canberra => "canberra",
            MetricId::KlDivergence => "kl_divergence",
            MetricId::SymmetricKl => "symmetric_kl",
            MetricId::Motyka => "motyka",
            MetricId::Cosine => "cosine",
            MetricId::Dice => "dice",
            MetricId::Bhattacharyya => "bhattacharyya",
            MetricId::Gower => "gower",
            MetricId::Sorensen => "sorensen",
        }
    }

    /// Whether inputs are epsilon-smoothed before evaluation.
    pub fn is_smoothed(self) -> bool {
        matches!(
            self,
            MetricId::ChiSquare
                | MetricId::Pearson
                | MetricId::Neyman
                | MetricId::Canberra
                | MetricId::KlDivergence
                | MetricId::SymmetricKl
                | MetricId::Bhattacharyya
        )
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(
            self,
            MetricId::Pearson | MetricId::Neyman | MetricId::KlDivergence
        )
    }

    /// Value of `distance(m, P, P)`.
    pub fn identity_value(self) -> f64 {
        if self == MetricId::Motyka {
            0.5
        } else {
            0.0
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        MetricId::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

impl Serialize for MetricId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Weight of the deep representation in [`combined_distance`], in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct CombineWeight(f64);

impl CombineWeight {
    pub const HAND_ONLY: CombineWeight = CombineWeight(0.0);
    pub const DEEP_ONLY: CombineWeight = CombineWeight(1.0);

    pub fn new(w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParams(format!("weight {w} outside [0, 1]")));
        }
        Ok(CombineWeight(w))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn needs_hand(self) -> bool {
        self.0 < 1.0
    }

    pub fn needs_deep(self) -> bool {
        self.0 > 0.0
    }
}

impl Default for CombineWeight {
    fn default() -> Self {
        CombineWeight(0.85)
    }
}

impl<'de> Deserialize<'de> for CombineWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CombineWeight::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Sum of `max(v, ε)`, the renormalizer for smoothed entries.
fn smoothed_sum(v: &[f64]) -> f64 {
    v.iter().map(|x| x.max(SMOOTHING_EPSILON)).sum()
}

/// Distance between two histograms under `metric`.
///
/// Inputs must have equal length and contain only finite nonnegative
/// entries; normalization is the caller's contract.
pub fn distance(metric: MetricId, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::InvalidHistogram("empty".into()));
    }
    check_entries(p)?;
    check_entries(q)?;
    Ok(distance_unchecked(metric, p, q))
}

/// [`distance`] without input validation. Used on the K-NN hot path where
/// histograms were validated at construction.
pub fn distance_unchecked(metric: MetricId, p: &[f64], q: &[f64]) -> f64 {
    if metric.is_smoothed() {
        let (sp, sq) = (smoothed_sum(p), smoothed_sum(q));
        let pairs = p
            .iter()
            .zip(q)
            .map(|(a, b)| (a.max(SMOOTHING_EPSILON) / sp, b.max(SMOOTHING_EPSILON) / sq));
        return match metric {
            MetricId::ChiSquare => pairs.map(|(a, b)| (a - b) * (a - b) / (a + b)).sum(),
            MetricId::Pearson => pairs.map(|(a, b)| (a - b) * (a - b) / b).sum(),
            MetricId::Neyman => pairs.map(|(a, b)| (a - b) * (a - b) / a).sum(),
            MetricId::Canberra => pairs.map(|(a, b)| (a - b).abs() / (a + b)).sum(),
            // Gibbs' inequality makes KL nonnegative; rounding can leave -1e-17.
            MetricId::KlDivergence => pairs.map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0),
            MetricId::SymmetricKl => pairs.map(|(a, b)| (a - b) * (a / b).ln()).sum(),
            MetricId::Bhattacharyya => {
                let bc: f64 = pairs.map(|(a, b)| (a * b).sqrt()).sum();
                (-bc.ln()).max(0.0)
            }
            _ => unreachable!("{metric} is not smoothed"),
        };
    }

    let pairs = p.iter().zip(q);
    match metric {
        MetricId::Euclidean => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        MetricId::Manhattan => pairs.map(|(a, b)| (a - b).abs()).sum(),
        MetricId::Gower => pairs.map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64,
        MetricId::Sorensen => {
            let (num, den) = pairs.fold((0.0, 0.0), |(n, d), (a, b)| (n + (a - b).abs(), d + a + b));
            num / den
        }
        MetricId::Motyka => {
            let (num, den) = pairs.fold((0.0, 0.0), |(n, d), (a, b)| (n + a.max(*b), d + a + b));
            num / den
        }
        MetricId::Cosine => {
            let (dot, pp, qq) = pairs.fold((0.0, 0.0, 0.0), |(d, x, y), (a, b)| {
                (d + a * b, x + a * a, y + b * b)
            });
            (1.0 - dot / (pp.sqrt() * qq.sqrt())).max(0.0)
        }
        MetricId::Dice => {
            let (dot, pp, qq) = pairs.fold((0.0, 0.0, 0.0), |(d, x, y), (a, b)| {
                (d + a * b, x + a * a, y + b * b)
            });
            (1.0 - 2.0 * dot / (pp + qq)).max(0.0)
        }
        _ => unreachable!("{metric} is smoothed"),
    }
}

/// `(1 - w)·D_h(a, b) + w·D_d(a, b)`.
///
/// At `w = 0` the deep representation is never read, and at `w = 1` the
/// hand-crafted one is never read; the result then equals the single
/// distance exactly.
pub fn combined_distance(
    a: &FeatureView,
    b: &FeatureView,
    w: CombineWeight,
    metric_h: MetricId,
    metric_d: MetricId,
) -> Result<f64> {
    let hand = if w.needs_hand() {
        let (ha, hb) = (require_hand(a)?, require_hand(b)?);
        Some(distance(metric_h, ha, hb)?)
    } else {
        None
    };
    let deep = if w.needs_deep() {
        let (da, db) = (require_deep(a)?, require_deep(b)?);
        Some(distance(metric_d, da, db)?)
    } else {
        None
    };
    Ok(mix(w, hand, deep))
}

pub(crate) fn mix(w: CombineWeight, hand: Option<f64>, deep: Option<f64>) -> f64 {
    match (hand, deep) {
        (Some(h), None) => h,
        (None, Some(d)) => d,
        (Some(h), Some(d)) => (1.0 - w.0) * h + w.0 * d,
        (None, None) => unreachable!("weight always reaches one representation"),
    }
}

pub(crate) fn require_hand(v: &FeatureView) -> Result<&Histogram> {
    v.hand.as_ref().ok_or_else(|| {
        Error::MissingRepresentation(format!("hand-crafted ({}/{})", v.instance_id, v.view_id))
    })
}

pub(crate) fn require_deep(v: &FeatureView) -> Result<&Histogram> {
    v.deep.as_ref().ok_or_else(|| {
        Error::MissingRepresentation(format!("deep ({}/{})", v.instance_id, v.view_id))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_values() {
        let p = [0.1, 0.0, 0.3, 0.6];
        for m in MetricId::ALL {
            let d = distance(m, &p, &p).unwrap();
            assert!((d - m.identity_value()).abs() < 1e-12, "{m}: {d}");
        }
    }

    #[test]
    fn worked_example() {
        let p = [0.5, 0.5];
        let q = [1.0, 0.0];
        let d = |m| distance(m, &p, &q).unwrap();
        assert!((d(MetricId::Euclidean) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((d(MetricId::Manhattan) - 1.0).abs() < 1e-12);
        assert!((d(MetricId::Sorensen) - 0.5).abs() < 1e-12);
        assert!((d(MetricId::Bhattacharyya) - 0.346574).abs() < 1e-4);
        let c = distance(MetricId::Cosine, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            distance(MetricId::Euclidean, &[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            distance(MetricId::Euclidean, &[f64::NAN, 1.0], &[0.5, 0.5]),
            Err(Error::InvalidHistogram(_))
        ));
        assert!(matches!("hamming".parse::<MetricId>(), Err(Error::UnknownMetric(_))));
        assert_eq!("BhattaCharyya".parse::<MetricId>().unwrap(), MetricId::Bhattacharyya);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_l1(&[2.0, 2.0]).unwrap().values(), &[0.5, 0.5]);
        assert_eq!(normalize_l1(&[-1.0, 3.0]).unwrap().values(), &[0.0, 1.0]);
        assert!(matches!(normalize_l1(&[0.0, 0.0]), Err(Error::InvalidHistogram(_))));
    }

    #[test]
    fn histogram_validation() {
        assert!(Histogram::new(vec![0.5, 0.5]).is_ok());
        assert!(Histogram::new(vec![0.5, 0.6]).is_err());
        assert!(Histogram::new(vec![-0.5, 1.5]).is_err());
        let raw = Histogram::from_raw(vec![1.0, 3.0]).unwrap();
        assert_eq!(raw.values(), &[0.25, 0.75]);
    }

    #[test]
    fn weight_bounds() {
        assert!(CombineWeight::new(-0.01).is_err());
        assert!(CombineWeight::new(1.01).is_err());
        assert!(!CombineWeight::HAND_ONLY.needs_deep());
        assert!(!CombineWeight::DEEP_ONLY.needs_hand());
        assert_eq!(CombineWeight::default().get(), 0.85);
    }
}
