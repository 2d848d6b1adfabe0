//! Global orthographic object descriptor (GOOD).
//!
//! A cloud is put into a pose-normalized frame (centroid origin, principal
//! axes from the covariance eigenvectors), scaled by its maximum radius, and
//! projected onto the three coordinate planes. Each projection is binned on a
//! `b × b` grid over `[-1, 1]²`; the three distribution matrices are ordered
//! by entropy and concatenated into one histogram of length `3b²`.
//!
//! Rules that make the descriptor deterministic:
//!
//! - axis sign: the side of the axis holding more points is positive; on a
//!   tie, the first point (in cloud order) with the largest absolute
//!   coordinate is made positive. Z is then flipped if needed so the frame
//!   is right-handed.
//! - binning: a coordinate on an interior cell edge belongs to the higher
//!   cell; `+1` belongs to the last cell.
//! - ordering: descending entropy, then descending variance, then the fixed
//!   order XoY, XoZ, YoZ.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Histogram;
use crate::pointcloud::{Point3, PointCloud};

/// Relative eigenvalue gap below which the frame is considered ambiguous.
pub const EIGEN_GAP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrame {
    pub origin: Point3,
    /// Rows are the X, Y, Z axes.
    pub axes: [[f64; 3]; 3],
    /// Descending.
    pub eigenvalues: [f64; 3],
}

impl ReferenceFrame {
    /// Coordinates of `p` in this frame.
    pub fn local(&self, p: &Point3) -> [f64; 3] {
        let d = p.sub(&self.origin).to_array();
        self.axes.map(|a| a[0] * d[0] + a[1] * d[1] + a[2] * d[2])
    }

    pub fn determinant(&self) -> f64 {
        let m = Matrix3::from_fn(|r, c| self.axes[r][c]);
        m.determinant()
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Principal-axis frame of a cloud.
///
/// With `force` set, near-equal eigenvalues are accepted and the tied
/// eigenvectors are ordered lexicographically by their absolute components
/// (largest first) instead of returning [`Error::AmbiguousFrame`].
pub fn reference_frame(cloud: &PointCloud, force: bool) -> Result<ReferenceFrame> {
    if cloud.len() < 3 {
        return Err(Error::DegenerateCloud(format!(
            "{} points, at least 3 non-collinear required",
            cloud.len()
        )));
    }
    let origin = cloud.centroid();
    let mut cov = Matrix3::<f64>::zeros();
    for p in &cloud.points {
        let d = Vector3::new(p.x - origin.x, p.y - origin.y, p.z - origin.z);
        cov += d * d.transpose();
    }
    cov /= cloud.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, [f64; 3])> = (0..3)
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            (eig.eigenvalues[i].max(0.0), [v[0], v[1], v[2]])
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let lambda = [pairs[0].0, pairs[1].0, pairs[2].0];

    if lambda[0].is_nan() || lambda[0] <= 0.0 || lambda[1] <= EIGEN_GAP_TOL * lambda[0] {
        return Err(Error::DegenerateCloud(format!(
            "covariance rank < 2 (eigenvalues {lambda:?})"
        )));
    }
    let tol = EIGEN_GAP_TOL * lambda[0];
    let tied = [lambda[0] - lambda[1] < tol, lambda[1] - lambda[2] < tol];
    if tied[0] || tied[1] {
        if !force {
            return Err(Error::AmbiguousFrame { eigenvalues: lambda });
        }
        let lex = |a: &(f64, [f64; 3]), b: &(f64, [f64; 3])| {
            let ka = a.1.map(f64::abs);
            let kb = b.1.map(f64::abs);
            kb.iter()
                .zip(&ka)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        };
        match tied {
            [true, true] => pairs.sort_by(lex),
            [true, false] => pairs[..2].sort_by(lex),
            _ => pairs[1..].sort_by(lex),
        }
    }

    let mut axes = [pairs[0].1, pairs[1].1, pairs[2].1];
    let centered: Vec<[f64; 3]> = cloud.points.iter().map(|p| p.sub(&origin).to_array()).collect();
    for axis in &mut axes {
        if sign_for(axis, &centered) < 0.0 {
            *axis = axis.map(|c| -c);
        }
    }
    let frame = ReferenceFrame {
        origin,
        axes,
        eigenvalues: [pairs[0].0, pairs[1].0, pairs[2].0],
    };
    if frame.determinant() < 0.0 {
        let mut f = frame;
        f.axes[2] = f.axes[2].map(|c| -c);
        return Ok(f);
    }
    Ok(frame)
}

/// +1 if `axis` already satisfies the sign rule, -1 if it must be flipped.
fn sign_for(axis: &[f64; 3], centered: &[[f64; 3]]) -> f64 {
    let (mut pos, mut neg) = (0usize, 0usize);
    let mut extreme = 0.0f64;
    for d in centered {
        let c = dot(axis, d);
        if c > 0.0 {
            pos += 1;
        } else if c < 0.0 {
            neg += 1;
        }
        if c.abs() > extreme.abs() {
            extreme = c;
        }
    }
    match pos.cmp(&neg) {
        Ordering::Greater => 1.0,
        Ordering::Less => -1.0,
        Ordering::Equal => {
            if extreme < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Plane {
    XoY,
    XoZ,
    YoZ,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::XoY, Plane::XoZ, Plane::YoZ];

    /// Local-frame coordinate indices spanning the plane (row, column).
    fn coords(self) -> (usize, usize) {
        match self {
            Plane::XoY => (0, 1),
            Plane::XoZ => (0, 2),
            Plane::YoZ => (1, 2),
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::XoY => "XoY",
            Plane::XoZ => "XoZ",
            Plane::YoZ => "YoZ",
        })
    }
}

/// Fraction of points per cell of one orthographic projection, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionMatrix {
    pub plane: Plane,
    pub bins: usize,
    pub cells: Vec<f64>,
}

impl DistributionMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.bins + col]
    }

    /// Shannon entropy in nats over nonzero cells.
    pub fn entropy(&self) -> f64 {
        -self
            .cells
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Population variance of all cells.
    pub fn variance(&self) -> f64 {
        let n = self.cells.len() as f64;
        let mean = self.cells.iter().sum::<f64>() / n;
        self.cells.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n
    }
}

/// Cell index of a normalized coordinate in `[-1, 1]`.
fn cell_of(u: f64, bins: usize) -> usize {
    let idx = ((u + 1.0) / 2.0 * bins as f64).floor();
    if idx < 0.0 {
        0
    } else {
        (idx as usize).min(bins - 1)
    }
}

/// Bins the projection of `cloud` onto `plane` of `frame`.
pub fn project(
    cloud: &PointCloud,
    frame: &ReferenceFrame,
    plane: Plane,
    bins: usize,
) -> Result<DistributionMatrix> {
    if bins < 2 {
        return Err(Error::InvalidParams(format!("bins {bins} < 2")));
    }
    let local: Vec<[f64; 3]> = cloud.points.iter().map(|p| frame.local(p)).collect();
    project_local(&local, plane, bins)
}

fn max_radius(local: &[[f64; 3]]) -> Result<f64> {
    let rho = local
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(0.0f64, f64::max);
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::DegenerateCloud("all points coincide".into()));
    }
    Ok(rho)
}

fn project_local(local: &[[f64; 3]], plane: Plane, bins: usize) -> Result<DistributionMatrix> {
    let rho = max_radius(local)?;
    let (r, c) = plane.coords();
    let mut cells = vec![0.0; bins * bins];
    for p in local {
        let row = cell_of(p[r] / rho, bins);
        let col = cell_of(p[c] / rho, bins);
        cells[row * bins + col] += 1.0;
    }
    let n = local.len() as f64;
    for v in &mut cells {
        *v /= n;
    }
    Ok(DistributionMatrix { plane, bins, cells })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodParams {
    pub bins: usize,
}

impl GoodParams {
    pub fn new(bins: usize) -> Result<Self> {
        if !(2..=1000).contains(&bins) {
            return Err(Error::InvalidParams(format!("bins {bins} outside [2, 1000]")));
        }
        Ok(GoodParams { bins })
    }

    pub fn histogram_len(&self) -> usize {
        3 * self.bins * self.bins
    }
}

impl Default for GoodParams {
    fn default() -> Self {
        GoodParams { bins: 30 }
    }
}

/// Intermediate products of one GOOD computation, for `describe --explain`.
#[derive(Clone, Debug, Serialize)]
pub struct GoodExplanation {
    pub frame: ReferenceFrame,
    /// In concatenation order.
    pub matrices: Vec<DistributionMatrix>,
    pub entropies: Vec<f64>,
    pub variances: Vec<f64>,
    pub histogram: Histogram,
}

pub fn good_descriptor(cloud: &PointCloud, params: GoodParams) -> Result<Histogram> {
    good_explained(cloud, params, false).map(|e| e.histogram)
}

pub fn good_explained(
    cloud: &PointCloud,
    params: GoodParams,
    force_frame: bool,
) -> Result<GoodExplanation> {
    let params = GoodParams::new(params.bins)?;
    let frame = reference_frame(cloud, force_frame)?;
    let local: Vec<[f64; 3]> = cloud.points.iter().map(|p| frame.local(p)).collect();
    let mut ranked: Vec<(f64, f64, DistributionMatrix)> = Plane::ALL
        .iter()
        .map(|&plane| {
            let m = project_local(&local, plane, params.bins)?;
            Ok((m.entropy(), m.variance(), m))
        })
        .collect::<Result<_>>()?;
    // Stable sort keeps the fixed plane order for full ties.
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));

    let mut values = Vec::with_capacity(params.histogram_len());
    for (_, _, m) in &ranked {
        values.extend_from_slice(&m.cells);
    }
    let sum: f64 = values.iter().sum();
    for v in &mut values {
        *v /= sum;
    }
    Ok(GoodExplanation {
        frame,
        entropies: ranked.iter().map(|r| r.0).collect(),
        variances: ranked.iter().map(|r| r.1).collect(),
        histogram: Histogram::new(values)?,
        matrices: ranked.into_iter().map(|r| r.2).collect(),
    })
}

/// Names a descriptor and its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DescriptorSpec {
    pub name: String,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub force_frame: bool,
}

fn default_bins() -> usize {
    30
}

impl DescriptorSpec {
    pub fn good(bins: usize) -> Self {
        DescriptorSpec {
            name: "GOOD".into(),
            bins,
            force_frame: false,
        }
    }
}

impl Default for DescriptorSpec {
    fn default() -> Self {
        DescriptorSpec::good(30)
    }
}

pub type DescriptorFn = dyn Fn(&PointCloud, &DescriptorSpec) -> Result<Histogram> + Send + Sync;

/// Descriptor implementations keyed by case-insensitive name. GOOD is built
/// in; other descriptors (ESF, VFH, ...) plug in through [`register`].
///
/// [`register`]: DescriptorRegistry::register
#[derive(Clone)]
pub struct DescriptorRegistry {
    entries: BTreeMap<String, Arc<DescriptorFn>>,
}

impl DescriptorRegistry {
    pub fn empty() -> Self {
        DescriptorRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, f: F)
    where
        F: Fn(&PointCloud, &DescriptorSpec) -> Result<Histogram> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_ascii_uppercase(), Arc::new(f));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn describe(&self, cloud: &PointCloud, spec: &DescriptorSpec) -> Result<Histogram> {
        let f = self
            .entries
            .get(&spec.name.to_ascii_uppercase())
            .ok_or_else(|| Error::UnknownDescriptor(spec.name.clone()))?;
        f(cloud, spec)
    }
}

impl Default for DescriptorRegistry {
    fn default() -> Self {
        let mut r = DescriptorRegistry::empty();
        r.register("GOOD", |cloud, spec| {
            good_explained(cloud, GoodParams::new(spec.bins)?, spec.force_frame).map(|e| e.histogram)
        });
        r
    }
}

impl fmt::Debug for DescriptorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}
