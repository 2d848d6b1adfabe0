//! Point clouds: the data model, ASCII PCD/PLY ingestion, a synthetic shape
//! generator and rigid/scale transforms.
//!
//! Only the ASCII subsets of PCD v0.7 and PLY 1.0 are read. Rows whose x, y
//! or z is not finite are dropped and counted rather than rejected, since
//! segmented RGB-D output routinely contains invalid points.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn sub(&self, other: &Point3) -> Point3 {
        Point3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

/// One segmented object view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub source_id: String,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite points.
    pub fn new(points: Vec<Point3>, source_id: impl Into<String>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidParams(format!("point {i} is not finite")));
        }
        Ok(PointCloud {
            points,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len() as f64;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for p in &self.points {
            x += p.x;
            y += p.y;
            z += p.z;
        }
        Point3::new(x / n, y / n, z / n)
    }
}

/// Result of parsing a cloud file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCloud {
    pub cloud: PointCloud,
    /// Rows skipped because a coordinate was NaN or infinite.
    pub dropped: usize,
}

fn finish_parse(points: Vec<Point3>, dropped: usize, source_id: &str) -> Result<ParsedCloud> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(ParsedCloud {
        cloud: PointCloud {
            points,
            source_id: source_id.to_string(),
        },
        dropped,
    })
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid number `{tok}`")))
}

fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "not valid UTF-8 text (ascii only)")
    })
}

/// Parses an ASCII PCD v0.7 file.
pub fn parse_pcd(bytes: &[u8], source_id: &str) -> Result<ParsedCloud> {
    let text = decode_utf8(bytes)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut fields: Option<Vec<String>> = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut declared_points: Option<usize> = None;
    let mut width_height: (Option<usize>, Option<usize>) = (None, None);
    let mut data_line = None;

    for (ln, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = toks.collect();
        match key.as_str() {
            "VERSION" | "SIZE" | "TYPE" | "VIEWPOINT" => {}
            "FIELDS" => fields = Some(rest.iter().map(|s| s.to_ascii_lowercase()).collect()),
            "COUNT" => {
                let c = rest
                    .iter()
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| Error::parse(ln, format!("invalid COUNT `{t}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                counts = Some(c);
            }
            "WIDTH" | "HEIGHT" => {
                let v = rest
                    .first()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(ln, format!("invalid {key}")))?;
                if key == "WIDTH" {
                    width_height.0 = Some(v);
                } else {
                    width_height.1 = Some(v);
                }
            }
            "POINTS" => {
                declared_points = Some(
                    rest.first()
                        .and_then(|t| t.parse::<usize>().ok())
                        .ok_or_else(|| Error::parse(ln, "invalid POINTS"))?,
                );
            }
            "DATA" => {
                match rest.first().map(|s| s.to_ascii_lowercase()) {
                    Some(ref s) if s == "ascii" => {}
                    Some(_) => return Err(Error::parse(ln, "ascii only")),
                    None => return Err(Error::parse(ln, "DATA without encoding")),
                }
                data_line = Some(ln);
                break;
            }
            other => return Err(Error::parse(ln, format!("unknown header key `{other}`"))),
        }
    }

    let data_line = data_line.ok_or_else(|| Error::parse(0, "missing DATA line"))?;
    let fields = fields.ok_or_else(|| Error::parse(data_line, "missing FIELDS"))?;
    let counts = counts.unwrap_or_else(|| vec![1; fields.len()]);
    if counts.len() != fields.len() {
        return Err(Error::parse(data_line, "COUNT length differs from FIELDS"));
    }
    let column_of = |name: &str| -> Result<usize> {
        let idx = fields
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::parse(data_line, format!("FIELDS lacks `{name}`")))?;
        Ok(counts[..idx].iter().sum())
    };
    let (cx, cy, cz) = (column_of("x")?, column_of("y")?, column_of("z")?);
    let row_width: usize = counts.iter().sum();
    let declared = match (declared_points, width_height) {
        (Some(p), _) => p,
        (None, (Some(w), Some(h))) => w * h,
        _ => return Err(Error::parse(data_line, "missing POINTS")),
    };

    let mut points = Vec::with_capacity(declared);
    let mut dropped = 0;
    let mut rows = 0;
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != row_width {
            return Err(Error::parse(
                ln,
                format!("expected {row_width} values, found {}", toks.len()),
            ));
        }
        rows += 1;
        if rows > declared {
            return Err(Error::parse(ln, format!("more rows than POINTS {declared}")));
        }
        let p = Point3::new(
            parse_coord(toks[cx], ln)?,
            parse_coord(toks[cy], ln)?,
            parse_coord(toks[cz], ln)?,
        );
        if p.is_finite() {
            points.push(p);
        } else {
            dropped += 1;
        }
    }
    if rows != declared {
        return Err(Error::parse(
            data_line,
            format!("POINTS {declared} but {rows} data rows"),
        ));
    }
    finish_parse(points, dropped, source_id)
}

/// Serializes a cloud as ASCII PCD v0.7 with x y z float fields.
///
/// Coordinates use the shortest representation that parses back to the same
/// `f64`, so `parse_pcd(write_pcd(c))` reproduces `c` exactly.
pub fn write_pcd(cloud: &PointCloud) -> String {
    let n = cloud.points.len();
    let mut out = String::with_capacity(64 + n * 48);
    out.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\n");
    out.push_str("SIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n");
    let _ = writeln!(out, "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii");
    for p in &cloud.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

/// Parses the vertex element of an ASCII PLY 1.0 file.
pub fn parse_ply(bytes: &[u8], source_id: &str) -> Result<ParsedCloud> {
    let text = decode_utf8(bytes).map_err(|_| Error::parse(1, "ascii only"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing `ply` magic")),
    }

    // (element name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_end = None;
    for (ln, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::parse(ln, "ascii only"));
                }
            }
            ["element", name, count] => {
                let count = count
                    .parse::<usize>()
                    .map_err(|_| Error::parse(ln, format!("invalid element count `{count}`")))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", _, _, name] | ["property", _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(ln, "property before element"))?;
                el.2.push(name.to_string());
            }
            ["end_header"] => {
                header_end = Some(ln);
                break;
            }
            _ => return Err(Error::parse(ln, format!("unrecognised header line `{line}`"))),
        }
    }
    let header_end = header_end.ok_or_else(|| Error::parse(0, "missing end_header"))?;
    let vertex_idx = elements
        .iter()
        .position(|e| e.0 == "vertex")
        .ok_or_else(|| Error::parse(header_end, "no vertex element"))?;
    let props = &elements[vertex_idx].2;
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::parse(header_end, format!("vertex lacks property `{name}`")))
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut points = Vec::new();
    let mut dropped = 0;
    for (ei, (name, count, eprops)) in elements.iter().enumerate() {
        for i in 0..*count {
            let (ln, line) = body.next().ok_or_else(|| {
                Error::parse(
                    header_end,
                    format!("element `{name}` declares {count} rows, found {i}"),
                )
            })?;
            if ei != vertex_idx {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != eprops.len() {
                return Err(Error::parse(
                    ln,
                    format!("expected {} vertex values, found {}", eprops.len(), toks.len()),
                ));
            }
            let p = Point3::new(
                parse_coord(toks[cx], ln)?,
                parse_coord(toks[cy], ln)?,
                parse_coord(toks[cz], ln)?,
            );
            if p.is_finite() {
                points.push(p);
            } else {
                dropped += 1;
            }
        }
    }
    if let Some((ln, _)) = body.next() {
        return Err(Error::parse(ln, "more rows than declared by the header"));
    }
    finish_parse(points, dropped, source_id)
}

/// Loads a `.pcd` or `.ply` file, dispatching on the extension.
pub fn load_cloud(path: &Path) -> Result<ParsedCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
        Some(ext) if ext == "pcd" => parse_pcd(&bytes, &id),
        Some(ext) if ext == "ply" => parse_ply(&bytes, &id),
        _ => Err(Error::parse(0, format!("{id}: expected a .pcd or .ply file"))),
    }
}

/// One view file in a `<root>/<category>/<instance_id>/<view_id>.{pcd,ply}` tree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ViewFile {
    pub category: String,
    pub instance_id: String,
    pub view_id: String,
    pub path: PathBuf,
}

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Lists every view file of a dataset directory, sorted by
/// (category, instance, view).
pub fn scan_dataset_dir(root: &Path) -> Result<Vec<ViewFile>> {
    let mut views = Vec::new();
    for cat in sorted_entries(root)? {
        if !cat.path().is_dir() {
            continue;
        }
        let category = cat.file_name().to_string_lossy().into_owned();
        for inst in sorted_entries(&cat.path())? {
            if !inst.path().is_dir() {
                continue;
            }
            let instance_id = inst.file_name().to_string_lossy().into_owned();
            for view in sorted_entries(&inst.path())? {
                let path = view.path();
                let is_cloud = path
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(|e| e.eq_ignore_ascii_case("pcd") || e.eq_ignore_ascii_case("ply"))
                    .unwrap_or(false);
                if !is_cloud || !path.is_file() {
                    continue;
                }
                let view_id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                views.push(ViewFile {
                    category: category.clone(),
                    instance_id: instance_id.clone(),
                    view_id,
                    path,
                });
            }
        }
    }
    views.sort();
    Ok(views)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Box,
    Ellipsoid,
    Cylinder,
    /// Open hemispherical shell (a bowl), scaled by the extents.
    SphereShell,
    LBracket,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Box,
        ShapeKind::Ellipsoid,
        ShapeKind::Cylinder,
        ShapeKind::SphereShell,
        ShapeKind::LBracket,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Box => "box",
            ShapeKind::Ellipsoid => "ellipsoid",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::SphereShell => "sphere-shell",
            ShapeKind::LBracket => "l-bracket",
        }
    }
}

/// Recipe for a synthetic object view. `extents` are the full side lengths
/// of the shape's bounding box along x, y and z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub extents: [f64; 3],
    pub point_count: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind, extents: [f64; 3], point_count: usize, seed: u64) -> Self {
        ShapeSpec {
            kind,
            extents,
            point_count,
            noise_sigma: 0.0,
            seed,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.point_count < 8 {
            return Err(Error::InvalidParams(format!(
                "point_count {} < 8",
                self.point_count
            )));
        }
        if self.extents.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "extents must be positive, got {:?}",
                self.extents
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParams("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// A face-like patch with an area, sampled uniformly.
enum Patch {
    /// Axis-aligned rectangle: centre, half sizes along the two free axes,
    /// and the index of the fixed axis.
    Rect {
        center: [f64; 3],
        half: [f64; 3],
        fixed: usize,
    },
}

impl Patch {
    fn area(&self) -> f64 {
        match self {
            Patch::Rect { half, fixed, .. } => {
                let (a, b) = match fixed {
                    0 => (half[1], half[2]),
                    1 => (half[0], half[2]),
                    _ => (half[0], half[1]),
                };
                4.0 * a * b
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        match self {
            Patch::Rect {
                center,
                half,
                fixed,
            } => {
                let mut p = *center;
                for axis in 0..3 {
                    if axis != *fixed {
                        p[axis] += rng.random_range(-half[axis]..=half[axis]);
                    }
                }
                p
            }
        }
    }
}

fn box_faces(center: [f64; 3], half: [f64; 3]) -> Vec<Patch> {
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut c = center;
            c[axis] += sign * half[axis];
            faces.push(Patch::Rect {
                center: c,
                half,
                fixed: axis,
            });
        }
    }
    faces
}

fn sample_patches(patches: &[Patch], rng: &mut ChaCha8Rng) -> [f64; 3] {
    let total: f64 = patches.iter().map(Patch::area).sum();
    let mut pick = rng.random_range(0.0..total);
    for patch in patches {
        let a = patch.area();
        if pick < a {
            return patch.sample(rng);
        }
        pick -= a;
    }
    patches[patches.len() - 1].sample(rng)
}

fn unit_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Samples a synthetic object view on the surface of `spec.kind`, centred at
/// the origin, with isotropic Gaussian jitter. Pure function of `spec`.
pub fn synthesize(spec: &ShapeSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = spec.extents.map(|e| e / 2.0);

    let patches = match spec.kind {
        ShapeKind::Box => box_faces([0.0; 3], half),
        ShapeKind::LBracket => {
            // Base plate along x and an upright plate at the -x end.
            let t = 0.2 * half[0].min(half[2]);
            let mut p = box_faces([0.0, 0.0, -half[2] + t], [half[0], half[1], t]);
            p.extend(box_faces(
                [-half[0] + t, 0.0, t],
                [t, half[1], half[2] - t],
            ));
            p
        }
        _ => Vec::new(),
    };

    let mut points = Vec::with_capacity(spec.point_count);
    for _ in 0..spec.point_count {
        let p = match spec.kind {
            ShapeKind::Box | ShapeKind::LBracket => sample_patches(&patches, &mut rng),
            ShapeKind::Ellipsoid => {
                let d = unit_direction(&mut rng);
                [d[0] * half[0], d[1] * half[1], d[2] * half[2]]
            }
            ShapeKind::SphereShell => {
                let mut d = unit_direction(&mut rng);
                d[2] = -d[2].abs();
                [d[0] * half[0], d[1] * half[1], (d[2] + 0.5) * 2.0 * half[2]]
            }
            ShapeKind::Cylinder => {
                // Elliptic cylinder along z; caps chosen by approximate area.
                let (a, b, h) = (half[0], half[1], spec.extents[2]);
                let perimeter = std::f64::consts::PI
                    * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt());
                let side = perimeter * h;
                let cap = std::f64::consts::PI * a * b;
                let pick = rng.random_range(0.0..side + 2.0 * cap);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                if pick < side {
                    let z = rng.random_range(-half[2]..=half[2]);
                    [a * theta.cos(), b * theta.sin(), z]
                } else {
                    let r = rng.random_range(0.0f64..1.0).sqrt();
                    let z = if pick < side + cap { half[2] } else { -half[2] };
                    [a * r * theta.cos(), b * r * theta.sin(), z]
                }
            }
        };
        points.push(p);
    }

    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParams(e.to_string()))?;
        for p in &mut points {
            for c in p.iter_mut() {
                *c += noise.sample(&mut rng);
            }
        }
    }

    Ok(PointCloud {
        points: points.into_iter().map(Point3::from).collect(),
        source_id: format!(
            "synthetic:{}:{:?}:n{}:s{}:seed{}",
            spec.kind.name(),
            spec.extents,
            spec.point_count,
            spec.noise_sigma,
            spec.seed
        ),
    })
}

/// Checks `R·Rᵀ = I` entrywise within `tol`.
pub fn is_orthonormal(r: &Matrix3<f64>, tol: f64) -> bool {
    let prod = r * r.transpose();
    let id = Matrix3::<f64>::identity();
    prod.iter().zip(id.iter()).all(|(a, b)| (a - b).abs() <= tol)
}

/// Maps every point `p` to `scale·R·p + t`, preserving order.
pub fn transform(
    cloud: &PointCloud,
    rotation: &Matrix3<f64>,
    translation: Point3,
    scale: f64,
) -> Result<PointCloud> {
    if !is_orthonormal(rotation, 1e-9) {
        return Err(Error::InvalidTransform("rotation is not orthonormal".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidTransform(format!("scale {scale} must be > 0")));
    }
    let r = rotation;
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let rx = r[(0, 0)] * p.x + r[(0, 1)] * p.y + r[(0, 2)] * p.z;
            let ry = r[(1, 0)] * p.x + r[(1, 1)] * p.y + r[(1, 2)] * p.z;
            let rz = r[(2, 0)] * p.x + r[(2, 1)] * p.y + r[(2, 2)] * p.z;
            Point3::new(
                scale * rx + translation.x,
                scale * ry + translation.y,
                scale * rz + translation.z,
            )
        })
        .collect();
    Ok(PointCloud {
        points,
        source_id: cloud.source_id.clone(),
    })
}

/// Rotation about a unit axis by `angle` radians (Rodrigues).
pub fn axis_angle(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let ax = nalgebra::Unit::new_normalize(nalgebra::Vector3::from(axis));
    *nalgebra::Rotation3::from_axis_angle(&ax, angle).matrix()
}

/// Uniformly random rotation from a seeded generator.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    // Unit quaternion from four Gaussians is uniform on SO(3).
    let q: [f64; 4] = [
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    ];
    let quat = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        q[0], q[1], q[2], q[3],
    ));
    *quat.to_rotation_matrix().matrix()
}
