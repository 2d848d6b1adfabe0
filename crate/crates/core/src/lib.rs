//! Open-ended 3D object category learning.
//!
//! The crate is organised around the path an object view takes through the
//! system:
//!
//! - [`pointcloud`]: point-cloud model, ASCII PCD/PLY ingestion, synthetic shapes.
//! - [`descriptor`]: the global orthographic object descriptor (GOOD).
//! - [`metrics`]: fourteen histogram distances and the weighted combined distance.
//! - [`memory`]: instance-based perceptual memory with K-NN classification.
//! - [`offline_eval`]: stratified K-fold cross-validation and grid search.
//! - [`teacher`]: the simulated-teacher protocol for open-ended evaluation.
//! - [`feature_io`]: feature CSV files and experiment configuration.

pub mod descriptor;
pub mod error;
pub mod feature_io;
pub mod memory;
pub mod metrics;
pub mod offline_eval;
pub mod pointcloud;
pub mod stats;
pub mod teacher;

pub use descriptor::{good_descriptor, DescriptorRegistry, DescriptorSpec, GoodParams, Plane};
pub use error::{Error, Result};
pub use memory::{Classification, FeatureView, PerceptualMemory, RecognizerConfig};
pub use metrics::{combined_distance, distance, normalize_l1, CombineWeight, Histogram, MetricId};
pub use offline_eval::{Dataset, EvalReport};
pub use pointcloud::{Point3, PointCloud, ShapeKind, ShapeSpec};
pub use teacher::{AgentPort, ProtocolConfig, ProtocolReport, Termination};
