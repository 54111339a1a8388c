//! Runtime out-of-distribution monitors built from boxes in feature space.
//!
//! For every class an object detector predicts, the feature vectors of its
//! confident training detections are clustered with k-means, each cluster
//! is wrapped in its tight axis-aligned box, and the boxes are grown until
//! a target share of the training vectors is covered. At run time a
//! detection is accepted when its feature vector falls inside one of its
//! class's boxes; the L1-style distance to the nearest box serves as an
//! OoD score.
//!
//! ```
//! use boxmon_core::{build_registry, BuildConfig, Decision, FeatureRecord, FeatureSet, Label};
//!
//! let records = (0..50)
//!     .map(|i| FeatureRecord::new("car", Label::Id, 1.0, vec![i as f64 / 50.0, 1.0]))
//!     .collect();
//! let features = FeatureSet::from_records(2, "FC2Relu", records).unwrap();
//! let registry = build_registry(&features, &BuildConfig::default()).unwrap();
//!
//! assert_eq!(registry.verdict(&[0.5, 1.0], "car").unwrap().decision, Decision::Accept);
//! assert_eq!(registry.verdict(&[0.5, 3.0], "car").unwrap().decision, Decision::Reject);
//! assert_eq!(registry.verdict(&[0.5, 1.0], "bus").unwrap().decision, Decision::UnknownClass);
//! ```

// `!(a >= b)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod io;
pub mod monitor;
pub mod registry;

pub use clustering::{kmeans, partition_features, select_k, ClusterConfig, Partition};
pub use error::{Error, Result};
pub use features::{FeatureRecord, FeatureSet, Label};
pub use geometry::{
    box_contains, box_distance, enlarge_by_delta, expand_to_include, interval_distance, tba,
    BoxAbstraction,
};
pub use monitor::{
    build_class_monitor, enlarge_to_tpr, monitor_distance, required_count, BuildConfig,
    ClassMonitor,
};
pub use registry::{
    build_registry, load_registry, save_registry, BuildMeta, ClassSummary, Decision,
    MonitorRegistry, Verdict,
};
