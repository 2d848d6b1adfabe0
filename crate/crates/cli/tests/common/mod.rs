#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use openended_core::descriptor::reference_frame;
use openended_core::pointcloud::{random_rotation, synthesize, transform, write_pcd};
use openended_core::{
    good_descriptor, normalize_l1, Dataset, FeatureView, GoodParams, Histogram, MetricId, Point3,
    PointCloud, RecognizerConfig, ShapeKind, ShapeSpec,
};

/// Reference values from a 40-digit mpmath evaluation of each formula, with
/// the 1e-10 smoothing applied to the metrics that divide by or take the log
/// of a bin.
pub mod oracle {
    pub const PAIRS: [(&[f64], &[f64]); 10] = [
        (&[0.5, 0.5], &[1.0, 0.0]),
        (&[0.1, 0.2, 0.3, 0.4], &[0.4, 0.3, 0.2, 0.1]),
        (&[0.25, 0.25, 0.25, 0.25], &[0.7, 0.1, 0.1, 0.1]),
        (&[0.0, 0.5, 0.5, 0.0], &[0.2, 0.3, 0.1, 0.4]),
        (&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]),
        (&[0.05, 0.15, 0.3, 0.5], &[0.05, 0.15, 0.3, 0.5]),
        (&[0.6, 0.3, 0.1], &[0.3, 0.3, 0.4]),
        (&[0.125, 0.375, 0.0625, 0.4375], &[0.3125, 0.1875, 0.25, 0.25]),
        (&[0.9, 0.1], &[0.2, 0.8]),
        (&[0.2, 0.2, 0.2, 0.2, 0.2], &[0.0, 0.1, 0.3, 0.4, 0.2]),
    ];

    /// Columns follow `MetricId::ALL`.
    #[rustfmt::skip]
    #[allow(clippy::excessive_precision, clippy::approx_constant)]
    pub const EXPECTED: [[f64; 14]; 10] = [
        [0.70710678118654752, 1.0, 0.66666666631111111, 2499999999.5, 0.9999999996, 1.3333333328888889, 10.819778284510283, 11.512925462667643, 0.75, 0.29289321881345248, 0.33333333333333333, 0.34656359037997232, 0.5, 0.5],
        [0.44721359549995795, 0.79999999999999999, 0.39999999999999999, 1.2083333333333333, 1.2083333333333333, 1.5999999999999999, 0.45643481914678362, 0.91286963829356723, 0.69999999999999999, 0.33333333333333333, 0.33333333333333333, 0.11664848737353887, 0.2, 0.39999999999999998],
        [0.51961524227066314, 0.89999999999999994, 0.40601503759398492, 0.96428571428571413, 1.0799999999999999, 1.7593984962406014, 0.42981319461032669, 0.87565956707489089, 0.72499999999999999, 0.30662475471846358, 0.35064935064935062, 0.11353644512020857, 0.22499999999999998, 0.44999999999999998],
        [0.63245553203367588, 1.2, 0.9166666659340278, 2.333333332, 1999999999.6000001, 2.9166666650173611, 1.0601317633354219, 13.873046967890007, 0.80000000000000001, 0.48360222050567777, 0.50000000000000002, 0.49279592502090511, 0.30000000000000001, 0.60000000000000001],
        [1.414213562373095, 2.0, 1.999999999, 9999999997.0, 9999999997.0, 1.9999999996, 23.025850923032702, 46.051701846065403, 1.0, 1.0, 1.0, 10.819773284622783, 0.66666666666666667, 1.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.42426406871192852, 0.60000000000000001, 0.28000000000000001, 0.52500000000000003, 1.05, 0.93333333333333335, 0.27725887222397814, 0.6238324625039508, 0.65, 0.21613130699253091, 0.22500000000000001, 0.078757459520976695, 0.2, 0.30000000000000001],
        [0.375, 0.75, 0.30649350649350649, 0.58125, 1.0178571428571429, 1.6346320346320346, 0.30358236087746437, 0.66662776152926506, 0.6875, 0.22150105583847703, 0.23076923076923077, 0.084984729567322077, 0.1875, 0.375],
        [0.98994949366116657, 1.4, 0.98989898989898989, 3.0625, 5.4444444444444443, 1.4141414141414141, 1.1457255029306631, 2.508463256919277, 0.85, 0.65181347039637288, 0.65333333333333333, 0.34657359027997265, 0.70000000000000002, 0.7],
        [0.31622776601683794, 0.60000000000000001, 0.31999999967475555, 399999999.87333334, 0.4999999997, 1.8666666656686666, 4.2021895819796384, 4.5317732663054717, 0.65, 0.18350341907227397, 0.2, 0.14016187999439621, 0.12, 0.29999999999999999],
    ];

    const EPS: f64 = 1e-10;

    fn smooth(v: &[f64]) -> Vec<f64> {
        let raised: Vec<f64> = v.iter().map(|&x| if x < EPS { EPS } else { x }).collect();
        let s: f64 = raised.iter().sum();
        raised.into_iter().map(|x| x / s).collect()
    }

    /// Straight-line evaluation of each formula, written without reference
    /// to the library code.
    pub fn scalar(name: &str, p: &[f64], q: &[f64]) -> f64 {
        let d = p.len();
        let smoothed = matches!(
            name,
            "chi_square" | "pearson" | "neyman" | "canberra" | "kl_divergence" | "symmetric_kl" | "bhattacharyya"
        );
        let (p, q) = if smoothed { (smooth(p), smooth(q)) } else { (p.to_vec(), q.to_vec()) };
        let mut acc = 0.0;
        match name {
            "euclidean" => {
                for i in 0..d {
                    acc += (p[i] - q[i]) * (p[i] - q[i]);
                }
                acc.sqrt()
            }
            "manhattan" => (0..d).map(|i| (p[i] - q[i]).abs()).sum(),
            "chi_square" => (0..d).map(|i| (p[i] - q[i]).powi(2) / (p[i] + q[i])).sum(),
            "pearson" => (0..d).map(|i| (p[i] - q[i]).powi(2) / q[i]).sum(),
            "neyman" => (0..d).map(|i| (p[i] - q[i]).powi(2) / p[i]).sum(),
            "canberra" => (0..d).map(|i| (p[i] - q[i]).abs() / (p[i] + q[i])).sum(),
            "kl_divergence" => {
                let v: f64 = (0..d).map(|i| p[i] * (p[i] / q[i]).ln()).sum();
                v.max(0.0)
            }
            "symmetric_kl" => (0..d).map(|i| (p[i] - q[i]) * (p[i] / q[i]).ln()).sum(),
            "motyka" => {
                let num: f64 = (0..d).map(|i| p[i].max(q[i])).sum();
                let den: f64 = (0..d).map(|i| p[i] + q[i]).sum();
                num / den
            }
            "cosine" => {
                let dot: f64 = (0..d).map(|i| p[i] * q[i]).sum();
                let np: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nq: f64 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                (1.0 - dot / (np * nq)).max(0.0)
            }
            "dice" => {
                let dot: f64 = (0..d).map(|i| p[i] * q[i]).sum();
                let pp: f64 = p.iter().map(|x| x * x).sum();
                let qq: f64 = q.iter().map(|x| x * x).sum();
                (1.0 - 2.0 * dot / (pp + qq)).max(0.0)
            }
            "bhattacharyya" => {
                let bc: f64 = (0..d).map(|i| (p[i] * q[i]).sqrt()).sum();
                (-bc.ln()).max(0.0)
            }
            "gower" => (0..d).map(|i| (p[i] - q[i]).abs()).sum::<f64>() / d as f64,
            "sorensen" => {
                let num: f64 = (0..d).map(|i| (p[i] - q[i]).abs()).sum();
                let den: f64 = (0..d).map(|i| p[i] + q[i]).sum();
                num / den
            }
            other => panic!("no oracle for {other}"),
        }
    }
}

/// `|a - b| <= tol` scaled up for magnitudes above one.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn random_hist(rng: &mut impl Rng, d: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d)
            .map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random::<f64>() })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Histogram on a coarse lattice so that equal distances actually occur.
pub fn lattice_hist(rng: &mut impl Rng, d: usize) -> Histogram {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(0..3u32) as f64).collect();
    let v = if v.iter().all(|&x| x == 0.0) { vec![1.0; d] } else { v };
    normalize_l1(&v).unwrap()
}

pub struct BruteResult {
    pub label: String,
    pub votes: BTreeMap<String, usize>,
    /// (label, distance) of the k nearest, nearest first.
    pub neighbors: Vec<(String, f64)>,
}

/// Exhaustive K-NN: every distance, one full sort on
/// (distance, label, insertion order), majority vote with ties going to the
/// smaller summed distance and then the smaller label.
pub fn brute_classify(stored: &[(String, FeatureView)], query: &FeatureView, cfg: &RecognizerConfig, k: usize) -> BruteResult {
    let mut all: Vec<(f64, &str, usize)> = stored
        .iter()
        .enumerate()
        .map(|(i, (l, v))| (cfg.view_distance(query, v).unwrap(), l.as_str(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
    let top = &all[..k.min(all.len())];
    let mut votes: BTreeMap<String, usize> = BTreeMap::new();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (d, l, _) in top {
        *votes.entry(l.to_string()).or_default() += 1;
        *sums.entry(l.to_string()).or_default() += d;
    }
    let best = votes.values().copied().max().unwrap();
    let mut tied: Vec<(&String, f64)> = votes.iter().filter(|(_, &c)| c == best).map(|(l, _)| (l, sums[l])).collect();
    tied.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    BruteResult {
        label: tied[0].0.clone(),
        votes,
        neighbors: top.iter().map(|(d, l, _)| (l.to_string(), *d)).collect(),
    }
}

/// Keeps the `frac` of points lying furthest along `dir`: a crude
/// single-viewpoint visibility model.
pub fn partial_view(cloud: &PointCloud, dir: [f64; 3], frac: f64) -> PointCloud {
    let mut scored: Vec<(f64, Point3)> = cloud
        .points
        .iter()
        .map(|p| (p.x * dir[0] + p.y * dir[1] + p.z * dir[2], *p))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let keep = ((scored.len() as f64) * frac).ceil() as usize;
    PointCloud::new(scored.into_iter().take(keep).map(|s| s.1).collect(), cloud.source_id.clone()).unwrap()
}

fn unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// A fixed, seeded random-feature network standing in for a pretrained
/// image embedding: three orthographic depth images of the view are each
/// passed through one ReLU layer, then average-pooled.
pub struct DeepSurrogate {
    res: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl DeepSurrogate {
    pub fn new(res: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inp = res * res;
        let scale = (1.0 / inp as f64).sqrt();
        let weights = (0..out_dim)
            .map(|_| (0..inp).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale * 3.0).collect())
            .collect();
        let bias = (0..out_dim).map(|_| (rng.random::<f64>() - 0.5) * 0.2).collect();
        DeepSurrogate { res, weights, bias }
    }

    fn depth_image(&self, local: &[[f64; 3]], a: usize, b: usize, depth: usize, radius: f64) -> Vec<f64> {
        let r = self.res;
        let mut img = vec![0.0; r * r];
        for p in local {
            let cell = |u: f64| (((u / radius + 1.0) / 2.0 * r as f64).floor() as usize).min(r - 1);
            let idx = cell(p[a]) * r + cell(p[b]);
            // Nearer surfaces are brighter; empty pixels stay dark.
            let v = 1.0 - (p[depth] / radius + 1.0) / 2.0 + 0.05;
            if v > img[idx] {
                img[idx] = v;
            }
        }
        img
    }

    pub fn embed(&self, cloud: &PointCloud) -> Histogram {
        let frame = reference_frame(cloud, true).unwrap();
        let local: Vec<[f64; 3]> = cloud.points.iter().map(|p| frame.local(p)).collect();
        let radius = local
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max)
            .max(1e-12);
        let mut pooled = vec![0.0; self.bias.len()];
        for (a, b, depth) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
            let mut img = self.depth_image(&local, a, b, depth, radius);
            let mean = img.iter().sum::<f64>() / img.len() as f64;
            img.iter_mut().for_each(|x| *x -= mean);
            for (o, (w, bias)) in pooled.iter_mut().zip(self.weights.iter().zip(&self.bias)) {
                let z: f64 = w.iter().zip(&img).map(|(x, y)| x * y).sum::<f64>() + bias;
                *o += z.max(0.0) / 3.0;
            }
        }
        if pooled.iter().all(|&x| x == 0.0) {
            pooled[0] = 1.0;
        }
        normalize_l1(&pooled).unwrap()
    }
}

pub struct SyntheticView {
    pub category: String,
    pub instance_id: String,
    pub view_id: String,
    pub cloud: PointCloud,
}

/// Partial, noisy, randomly rotated views of the five synthetic shape
/// families. Instances differ in proportions; views differ in viewpoint.
pub fn desk_views(instances: usize, views: usize, points: usize, seed: u64) -> Vec<SyntheticView> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for kind in ShapeKind::ALL {
        for i in 0..instances {
            let extents = [
                rng.random_range(0.8..1.4),
                rng.random_range(0.5..1.0),
                rng.random_range(0.3..0.7),
            ];
            for v in 0..views {
                let spec = ShapeSpec::new(kind, extents, points, rng.random()).with_noise(0.01);
                let full = synthesize(&spec).unwrap();
                let partial = partial_view(&full, unit(&mut rng), 0.7);
                let rot = random_rotation(&mut rng);
                let t = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let cloud = transform(&partial, &rot, t, 1.0).unwrap();
                out.push(SyntheticView {
                    category: kind.name().to_string(),
                    instance_id: format!("i{i:02}"),
                    view_id: format!("v{v:02}"),
                    cloud,
                });
            }
        }
    }
    out
}

/// Describes every view with GOOD and the deep surrogate.
pub fn describe_views(views: &[SyntheticView], bins: usize) -> Dataset {
    let deep = DeepSurrogate::new(32, 256, 7);
    let params = GoodParams::new(bins).unwrap();
    let fv = views
        .iter()
        .map(|v| {
            FeatureView::new(
                &v.category,
                &v.instance_id,
                &v.view_id,
                Some(good_descriptor(&v.cloud, params).unwrap()),
                Some(deep.embed(&v.cloud)),
            )
            .unwrap()
        })
        .collect();
    Dataset::new("desk", fv)
}

/// Writes `<root>/<category>/<instance>/<view>.pcd`.
pub fn write_dataset_dir(root: &Path, views: &[SyntheticView]) {
    for v in views {
        let dir = root.join(&v.category).join(&v.instance_id);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join(format!("{}.pcd", v.view_id)), write_pcd(&v.cloud)).unwrap();
    }
}

/// Full views of three shapes with very different proportions: a rod, a
/// plate and a near-cube. Their GOOD histograms do not overlap.
pub fn separable_views(per_category: usize, seed: u64) -> Vec<SyntheticView> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families = [
        ("rod", ShapeKind::Cylinder, [4.0, 0.4, 0.4]),
        ("plate", ShapeKind::Box, [3.0, 2.0, 0.1]),
        ("bowl", ShapeKind::SphereShell, [2.0, 2.0, 1.0]),
    ];
    let mut out = Vec::new();
    for (name, kind, extents) in families {
        for v in 0..per_category {
            let spec = ShapeSpec::new(kind, extents, 400, rng.random()).with_noise(0.005);
            let rot = random_rotation(&mut rng);
            let cloud = transform(&synthesize(&spec).unwrap(), &rot, Point3::new(0.0, 0.0, 0.0), 1.0).unwrap();
            out.push(SyntheticView {
                category: name.to_string(),
                instance_id: format!("i{:02}", v % 2),
                view_id: format!("v{v:02}"),
                cloud,
            });
        }
    }
    out
}

/// `categories × per_category` hand-only views scattered around
/// well-separated but noisy category centres.
pub fn feature_dataset(categories: usize, per_category: usize, dim: usize, spread: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut views = Vec::new();
    for c in 0..categories {
        let centre = random_hist(&mut rng, dim, 0.3);
        for v in 0..per_category {
            let noisy: Vec<f64> = centre.iter().map(|&x| (x + spread * rng.random::<f64>()).max(0.0)).collect();
            views.push(
                FeatureView::new(
                    format!("c{c:02}"),
                    format!("i{}", v % 4),
                    format!("v{v:02}"),
                    Some(normalize_l1(&noisy).unwrap()),
                    None,
                )
                .unwrap(),
            );
        }
    }
    Dataset::new("synthetic", views)
}

/// One PASS/FAIL line per criterion; returns whether it passed.
pub fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

pub fn metric_names() -> Vec<&'static str> {
    MetricId::ALL.iter().map(|m| m.name()).collect()
}
