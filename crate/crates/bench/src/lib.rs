//! Fixtures shared by the benchmarks.

use openended_core::pointcloud::synthesize;
use openended_core::{
    good_descriptor, Dataset, FeatureView, GoodParams, PointCloud, ShapeKind, ShapeSpec,
};

/// A noisy synthetic cloud of `points` points.
pub fn cloud(kind: ShapeKind, points: usize, seed: u64) -> PointCloud {
    synthesize(&ShapeSpec::new(kind, [1.8, 1.1, 0.5], points, seed).with_noise(0.01)).unwrap()
}

/// `per_kind` GOOD-described views of each synthetic shape family.
pub fn dataset(per_kind: usize, bins: usize) -> Dataset {
    let params = GoodParams::new(bins).unwrap();
    let mut views = Vec::new();
    for (k, kind) in ShapeKind::ALL.into_iter().enumerate() {
        for i in 0..per_kind {
            let c = cloud(kind, 400, (k * 1000 + i) as u64);
            let h = good_descriptor(&c, params).unwrap();
            views.push(FeatureView::new(kind.name(), format!("i{}", i % 5), format!("v{i:03}"), Some(h), None).unwrap());
        }
    }
    Dataset::new("bench", views)
}
