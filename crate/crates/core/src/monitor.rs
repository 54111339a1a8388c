//! Per-class monitors: a finite union of boxes, the min-over-boxes distance,
//! and construction from a class's feature vectors.

use serde::{Deserialize, Serialize};

use crate::clustering::{partition_features, ClusterConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    box_contains_unchecked, box_distance_below, expand_in_place, tba, BoxAbstraction,
};

pub const DEFAULT_TARGET_TPR: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    #[serde(flatten)]
    pub cluster: ClusterConfig,
    /// Fraction of a class's build vectors that must end up inside its boxes.
    pub target_tpr: f64,
    /// Records scoring below this are not used for construction.
    pub score_threshold: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            cluster: ClusterConfig::default(),
            target_tpr: DEFAULT_TARGET_TPR,
            score_threshold: 0.0,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        check_target(self.target_tpr)?;
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::InvalidParameter(format!(
                "score threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target TPR {target} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Smallest count `c` with `c / total >= target`, i.e. `ceil(target * total)`
/// evaluated so that it agrees with the floating-point ratio check.
pub fn required_count(target: f64, total: usize) -> usize {
    let m = total as f64;
    let mut c = ((target * m).ceil() as usize).min(total);
    while c > 0 && (c - 1) as f64 / m >= target {
        c -= 1;
    }
    while c < total && (c as f64) / m < target {
        c += 1;
    }
    c
}

/// The boxes kept for one class key.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMonitor {
    class_key: String,
    dimension: usize,
    boxes: Vec<BoxAbstraction>,
}

impl ClassMonitor {
    pub fn new(class_key: impl Into<String>, boxes: Vec<BoxAbstraction>) -> Result<Self> {
        let class_key = class_key.into();
        let first = boxes
            .first()
            .ok_or_else(|| Error::Invariant(format!("monitor {class_key:?} has no boxes")))?;
        let dimension = first.dimension();
        if let Some(b) = boxes.iter().find(|b| b.dimension() != dimension) {
            return Err(Error::mismatch(dimension, b.dimension()));
        }
        Ok(ClassMonitor {
            class_key,
            dimension,
            boxes,
        })
    }

    pub fn class_key(&self) -> &str {
        &self.class_key
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn boxes(&self) -> &[BoxAbstraction] {
        &self.boxes
    }

    pub fn into_boxes(self) -> Vec<BoxAbstraction> {
        self.boxes
    }

    /// True if any box contains `z`.
    pub fn accepts(&self, z: &[f64]) -> Result<bool> {
        self.check_dim(z.len())?;
        Ok(self.boxes.iter().any(|b| box_contains_unchecked(z, b)))
    }

    /// Fraction of `points` at distance zero.
    pub fn coverage<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::EmptyInput("coverage of zero points".into()));
        }
        let mut inside = 0usize;
        for p in points {
            if self.accepts(p.as_ref())? {
                inside += 1;
            }
        }
        Ok(inside as f64 / points.len() as f64)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dimension {
            return Err(Error::mismatch(self.dimension, found));
        }
        Ok(())
    }
}

/// Minimum box distance over the monitor and the lowest index attaining it.
/// Returns `(0, j)` at the first box `j` that contains `z`.
pub fn monitor_distance(z: &[f64], monitor: &ClassMonitor) -> Result<(f64, usize)> {
    monitor.check_dim(z.len())?;
    Ok(nearest_box(z, &monitor.boxes))
}

// Caller guarantees matching dimensions and a non-empty box list.
fn nearest_box(z: &[f64], boxes: &[BoxAbstraction]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (j, b) in boxes.iter().enumerate() {
        if let Some(d) = box_distance_below(z, b, best.0) {
            if d == 0.0 {
                return (0.0, j);
            }
            best = (d, j);
        }
    }
    if best.0 == f64::INFINITY {
        // every box abandoned at an infinite bound: all distances overflow
        return (f64::INFINITY, 0);
    }
    best
}

/// Grows boxes until at least `target_tpr` of `features` lie inside.
///
/// Outside vectors are ranked once by their distance to the original boxes
/// (ties by input order); the nearest `need - inside` of them are absorbed
/// into their nearest box.
pub fn enlarge_to_tpr<P: AsRef<[f64]>>(
    boxes: &[BoxAbstraction],
    features: &[P],
    target_tpr: f64,
) -> Result<Vec<BoxAbstraction>> {
    check_target(target_tpr)?;
    if features.is_empty() {
        return Err(Error::EmptyInput(
            "enlargement over zero feature vectors".into(),
        ));
    }
    let dim = boxes
        .first()
        .ok_or_else(|| Error::EmptyInput("enlargement of zero boxes".into()))?
        .dimension();
    if let Some(b) = boxes.iter().find(|b| b.dimension() != dim) {
        return Err(Error::mismatch(dim, b.dimension()));
    }
    if let Some(f) = features.iter().find(|f| f.as_ref().len() != dim) {
        return Err(Error::mismatch(dim, f.as_ref().len()));
    }

    let scored: Vec<(f64, usize)> = features
        .iter()
        .map(|f| nearest_box(f.as_ref(), boxes))
        .collect();
    let inside = scored.iter().filter(|s| s.0 == 0.0).count();
    let need = required_count(target_tpr, features.len());
    let mut out = boxes.to_vec();
    if inside >= need {
        return Ok(out);
    }

    let mut outside: Vec<usize> = (0..features.len()).filter(|&i| scored[i].0 > 0.0).collect();
    outside.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    for &i in outside.iter().take(need - inside) {
        expand_in_place(&mut out[scored[i].1], features[i].as_ref())?;
    }
    Ok(out)
}

/// Cluster, box each cluster tightly, then enlarge to the TPR target.
pub fn build_class_monitor<P: AsRef<[f64]>>(
    class_key: &str,
    points: &[P],
    config: &BuildConfig,
) -> Result<ClassMonitor> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyClass(format!("class {class_key:?}")));
    }
    let subsets = partition_features(points, &config.cluster)?;
    let boxes = subsets
        .iter()
        .map(|s| tba(&s.iter().map(|&i| points[i].as_ref()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let boxes = enlarge_to_tpr(&boxes, points, config.target_tpr)?;
    ClassMonitor::new(class_key, boxes)
}
