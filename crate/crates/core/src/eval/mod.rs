//! Evaluation of monitors against ID and OoD feature sets.

pub mod bench;
pub mod gaussian;
pub mod metrics;
pub mod synth;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, FeatureSet, Label};
use crate::registry::MonitorRegistry;

use gaussian::{gaussian_score, GaussianMonitor};
use metrics::{fpr_at_tpr, OperatingPoint};

/// Summary of the finite values in a distance list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceSummary {
    pub count: usize,
    /// Distances that were `+inf` (unknown class).
    pub infinite: usize,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

impl DistanceSummary {
    pub fn of(xs: &[f64]) -> Self {
        let mut finite: Vec<f64> = xs.iter().copied().filter(|v| v.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        let n = finite.len();
        DistanceSummary {
            count: xs.len(),
            infinite: xs.len() - n,
            min: finite.first().copied(),
            median: (n > 0).then(|| finite[(n - 1) / 2]),
            mean: (n > 0).then(|| finite.iter().sum::<f64>() / n as f64),
            max: finite.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalEntry {
    #[serde(flatten)]
    pub point: OperatingPoint,
    pub id_distances: DistanceSummary,
    pub ood_distances: DistanceSummary,
}

impl EvalEntry {
    fn new(id: &[f64], ood: &[f64], target: f64) -> Result<Self> {
        Ok(EvalEntry {
            point: fpr_at_tpr(id, ood, target)?,
            id_distances: DistanceSummary::of(id),
            ood_distances: DistanceSummary::of(ood),
        })
    }
}

/// Accept rates of the box verdict itself (distance exactly zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictRates {
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    #[serde(flatten)]
    pub overall: EvalEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictRates>,
    /// Classes that have both ID and OoD samples.
    pub per_class: BTreeMap<String, EvalEntry>,
}

impl EvalReport {
    pub fn fpr(&self) -> f64 {
        self.overall.point.fpr
    }
}

/// ID and OoD records that take part in an evaluation.
#[derive(Debug, Clone)]
pub struct EvalInputs {
    pub id: Vec<FeatureRecord>,
    pub ood: Vec<FeatureRecord>,
    pub dimension: usize,
}

impl EvalInputs {
    /// ID side: records of `id` not labelled OOD. OoD side: records of
    /// `ood` not labelled ID. Both sides drop scores below `score_threshold`.
    pub fn prepare(id: &FeatureSet, ood: &FeatureSet, score_threshold: f64) -> Result<Self> {
        if id.dimension() != ood.dimension() {
            return Err(Error::mismatch(id.dimension(), ood.dimension()));
        }
        let keep = |set: &FeatureSet, drop: Label| -> Vec<FeatureRecord> {
            set.records()
                .iter()
                .filter(|r| r.label != drop && r.score >= score_threshold)
                .cloned()
                .collect()
        };
        let inputs = EvalInputs {
            id: keep(id, Label::Ood),
            ood: keep(ood, Label::Id),
            dimension: id.dimension(),
        };
        if inputs.id.is_empty() {
            return Err(Error::EmptyInput("no ID records to evaluate".into()));
        }
        if inputs.ood.is_empty() {
            return Err(Error::EmptyInput("no OoD records to evaluate".into()));
        }
        Ok(inputs)
    }

    /// Scores both sides and assembles the report. `score` returns `None`
    /// for records whose class the scorer does not know; those count as `+inf`.
    pub fn report(
        &self,
        method: &str,
        target_tpr: f64,
        mut score: impl FnMut(&FeatureRecord) -> Result<Option<f64>>,
    ) -> Result<EvalReport> {
        let mut id = Vec::with_capacity(self.id.len());
        for r in &self.id {
            id.push((r.class_key.as_str(), score(r)?.unwrap_or(f64::INFINITY)));
        }
        let mut ood = Vec::with_capacity(self.ood.len());
        for r in &self.ood {
            ood.push((r.class_key.as_str(), score(r)?.unwrap_or(f64::INFINITY)));
        }
        let values = |xs: &[(&str, f64)]| xs.iter().map(|x| x.1).collect::<Vec<_>>();
        let overall = EvalEntry::new(&values(&id), &values(&ood), target_tpr)?;

        let mut by_class: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for &(k, d) in &id {
            by_class.entry(k).or_default().0.push(d);
        }
        for &(k, d) in &ood {
            by_class.entry(k).or_default().1.push(d);
        }
        let mut per_class = BTreeMap::new();
        for (k, (i, o)) in by_class {
            if !i.is_empty() && !o.is_empty() {
                per_class.insert(k.to_owned(), EvalEntry::new(&i, &o, target_tpr)?);
            }
        }
        Ok(EvalReport {
            method: method.to_owned(),
            overall,
            verdict: None,
            per_class,
        })
    }
}

pub fn evaluate_registry(
    registry: &MonitorRegistry,
    inputs: &EvalInputs,
    target_tpr: f64,
) -> Result<EvalReport> {
    if inputs.dimension != registry.dimension() {
        return Err(Error::mismatch(registry.dimension(), inputs.dimension));
    }
    let distance = |r: &FeatureRecord| -> Result<Option<f64>> {
        let v = registry.verdict(&r.values, &r.class_key)?;
        Ok(v.nearest_box_index.map(|_| v.distance))
    };
    let mut report = inputs.report("box-monitor", target_tpr, distance)?;
    let accepted = |rs: &[FeatureRecord]| -> Result<f64> {
        let mut n = 0usize;
        for r in rs {
            if registry.get(&r.class_key).is_some()
                && registry.verdict(&r.values, &r.class_key)?.distance == 0.0
            {
                n += 1;
            }
        }
        Ok(n as f64 / rs.len() as f64)
    };
    report.verdict = Some(VerdictRates {
        tpr: accepted(&inputs.id)?,
        fpr: accepted(&inputs.ood)?,
    });
    Ok(report)
}

pub fn evaluate_gaussian(
    gm: &GaussianMonitor,
    inputs: &EvalInputs,
    target_tpr: f64,
) -> Result<EvalReport> {
    if inputs.dimension != gm.dimension() {
        return Err(Error::mismatch(gm.dimension(), inputs.dimension));
    }
    inputs.report("gaussian", target_tpr, |r| {
        gaussian_score(&r.values, &r.class_key, gm)
    })
}
