//! Registry of per-class monitors for one layer, the runtime verdict, and
//! the JSON monitor file.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, Label};
use crate::geometry::BoxAbstraction;
use crate::io::bamf;
use crate::monitor::{build_class_monitor, monitor_distance, BuildConfig, ClassMonitor};

pub const MONITOR_FORMAT: &str = "boxmon-monitor";
pub const MONITOR_SCHEMA_VERSION: u32 = 1;

/// Provenance stamped into every registry at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub density: f64,
    pub cap: usize,
    pub target_tpr: f64,
    pub seed: u64,
    pub score_threshold: f64,
    pub max_iterations: usize,
    pub shift_tolerance: f64,
    /// Clustering runs on the activations as given (no normalization).
    pub feature_space: String,
    /// SHA-256 of the canonical BAMF encoding of the build input.
    pub source_digest: String,
}

impl BuildMeta {
    pub fn new(config: &BuildConfig, source_digest: String) -> Self {
        BuildMeta {
            density: config.cluster.density,
            cap: config.cluster.cap,
            target_tpr: config.target_tpr,
            seed: config.cluster.seed,
            score_threshold: config.score_threshold,
            max_iterations: config.cluster.max_iterations,
            shift_tolerance: config.cluster.shift_tolerance,
            feature_space: "raw".into(),
            source_digest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    Reject,
    UnknownClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub decision: Decision,
    /// Min-over-boxes distance; `0` on accept, `+inf` for an unknown class.
    pub distance: f64,
    pub nearest_box_index: Option<usize>,
}

/// Training-set statistics for one class after a build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class_key: String,
    pub records: usize,
    pub boxes: usize,
    pub training_tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRegistry {
    layer_tag: String,
    dimension: usize,
    monitors: BTreeMap<String, ClassMonitor>,
    build_meta: BuildMeta,
}

impl MonitorRegistry {
    pub fn new(
        layer_tag: impl Into<String>,
        dimension: usize,
        monitors: impl IntoIterator<Item = ClassMonitor>,
        build_meta: BuildMeta,
    ) -> Result<Self> {
        let layer_tag = layer_tag.into();
        if layer_tag.is_empty() {
            return Err(Error::Invariant("empty layer tag".into()));
        }
        if dimension == 0 {
            return Err(Error::Invariant("registry dimension is zero".into()));
        }
        let mut map = BTreeMap::new();
        for m in monitors {
            if m.dimension() != dimension {
                return Err(Error::Invariant(format!(
                    "monitor {:?} has dimension {}, registry has {dimension}",
                    m.class_key(),
                    m.dimension()
                )));
            }
            let key = m.class_key().to_owned();
            if map.insert(key.clone(), m).is_some() {
                return Err(Error::Invariant(format!("duplicate class key {key:?}")));
            }
        }
        Ok(MonitorRegistry {
            layer_tag,
            dimension,
            monitors: map,
            build_meta,
        })
    }

    pub fn layer_tag(&self) -> &str {
        &self.layer_tag
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn build_meta(&self) -> &BuildMeta {
        &self.build_meta
    }

    pub fn monitors(&self) -> &BTreeMap<String, ClassMonitor> {
        &self.monitors
    }

    pub fn get(&self, class_key: &str) -> Option<&ClassMonitor> {
        self.monitors.get(class_key)
    }

    pub fn class_keys(&self) -> impl Iterator<Item = &str> {
        self.monitors.keys().map(String::as_str)
    }

    /// Accept iff some box of the class contains `z`.
    pub fn verdict(&self, z: &[f64], class_key: &str) -> Result<Verdict> {
        if z.len() != self.dimension {
            return Err(Error::mismatch(self.dimension, z.len()));
        }
        let Some(monitor) = self.monitors.get(class_key) else {
            return Ok(Verdict {
                decision: Decision::UnknownClass,
                distance: f64::INFINITY,
                nearest_box_index: None,
            });
        };
        let (distance, j) = monitor_distance(z, monitor)?;
        Ok(Verdict {
            decision: if distance == 0.0 {
                Decision::Accept
            } else {
                Decision::Reject
            },
            distance,
            nearest_box_index: Some(j),
        })
    }

    /// Per-class coverage of the records that would participate in a build.
    pub fn summarize(&self, features: &FeatureSet) -> Result<Vec<ClassSummary>> {
        let usable = usable_records(features, self.build_meta.score_threshold);
        let mut out = Vec::new();
        for (key, idx) in usable.indices_by_class() {
            let Some(m) = self.monitors.get(key) else {
                continue;
            };
            let pts: Vec<&[f64]> = idx
                .iter()
                .map(|&i| usable.records()[i].values.as_slice())
                .collect();
            out.push(ClassSummary {
                class_key: key.to_owned(),
                records: pts.len(),
                boxes: m.boxes().len(),
                training_tpr: m.coverage(&pts)?,
            });
        }
        Ok(out)
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let file = MonitorFile {
            format: MONITOR_FORMAT.into(),
            schema_version: MONITOR_SCHEMA_VERSION,
            layer_tag: self.layer_tag.clone(),
            dimension: self.dimension,
            build_meta: self.build_meta.clone(),
            classes: self
                .monitors
                .iter()
                .map(|(k, m)| {
                    let boxes = m
                        .boxes()
                        .iter()
                        .map(|b| FileBox {
                            lower: b.lower().to_vec(),
                            upper: b.upper().to_vec(),
                        })
                        .collect();
                    (k.clone(), FileClass { boxes })
                })
                .collect(),
        };
        let mut bytes = serde_json::to_vec(&file)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let header: FileHeader = serde_json::from_slice(bytes)
            .map_err(|e| Error::Schema(format!("not a monitor file: {e}")))?;
        if header.format.as_deref() != Some(MONITOR_FORMAT) {
            return Err(Error::Schema(format!(
                "expected format {MONITOR_FORMAT:?}, found {:?}",
                header.format
            )));
        }
        if header.schema_version != Some(MONITOR_SCHEMA_VERSION) {
            return Err(Error::Schema(format!(
                "unsupported schema version {:?} (expected {MONITOR_SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        let file: MonitorFile = serde_json::from_slice(bytes)?;
        let mut monitors = Vec::with_capacity(file.classes.len());
        for (key, class) in file.classes {
            let boxes = class
                .boxes
                .into_iter()
                .map(|b| {
                    BoxAbstraction::new(b.lower, b.upper)
                        .map_err(|e| Error::Invariant(format!("class {key:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let m = ClassMonitor::new(key.clone(), boxes).map_err(|e| match e {
                Error::Invariant(_) => e,
                other => Error::Invariant(format!("class {key:?}: {other}")),
            })?;
            monitors.push(m);
        }
        Self::new(file.layer_tag, file.dimension, monitors, file.build_meta)
    }
}

#[derive(Deserialize)]
struct FileHeader {
    format: Option<String>,
    schema_version: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct MonitorFile {
    format: String,
    schema_version: u32,
    layer_tag: String,
    dimension: usize,
    build_meta: BuildMeta,
    classes: BTreeMap<String, FileClass>,
}

#[derive(Serialize, Deserialize)]
struct FileClass {
    boxes: Vec<FileBox>,
}

#[derive(Serialize, Deserialize)]
struct FileBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Records that take part in construction: not labelled OOD, score at or
/// above the threshold.
pub fn usable_records(features: &FeatureSet, score_threshold: f64) -> FeatureSet {
    features.filtered(|r| r.label != Label::Ood && r.score >= score_threshold)
}

/// Builds one monitor per class key present among the usable records.
pub fn build_registry(features: &FeatureSet, config: &BuildConfig) -> Result<MonitorRegistry> {
    config.validate()?;
    if features.is_empty() {
        return Err(Error::EmptyClass(
            "the feature set (it has no records)".into(),
        ));
    }
    let candidates = features.filtered(|r| r.label != Label::Ood);
    if candidates.is_empty() {
        return Err(Error::EmptyClass(
            "the feature set (every record is labelled OOD)".into(),
        ));
    }
    let usable = usable_records(features, config.score_threshold);
    for key in candidates.indices_by_class().keys() {
        if !usable.records().iter().any(|r| r.class_key == *key) {
            return Err(Error::EmptyClass(format!(
                "class {key:?} (no record scores >= {})",
                config.score_threshold
            )));
        }
    }

    let mut monitors = Vec::new();
    for (key, idx) in usable.indices_by_class() {
        let pts: Vec<&[f64]> = idx
            .iter()
            .map(|&i| usable.records()[i].values.as_slice())
            .collect();
        monitors.push(build_class_monitor(key, &pts, config)?);
    }
    let meta = BuildMeta::new(config, bamf::digest(features));
    MonitorRegistry::new(features.layer_tag(), features.dimension(), monitors, meta)
}

pub fn save_registry(registry: &MonitorRegistry, destination: impl AsRef<Path>) -> Result<()> {
    let bytes = registry.to_json_bytes()?;
    let mut f = fs::File::create(destination)?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn load_registry(source: impl AsRef<Path>) -> Result<MonitorRegistry> {
    let mut bytes = Vec::new();
    fs::File::open(source)?.read_to_end(&mut bytes)?;
    MonitorRegistry::from_json_slice(&bytes)
}
