//! Class-tagged feature vectors as produced by the extraction stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Id,
    Ood,
    Unlabeled,
}

impl Label {
    pub fn to_byte(self) -> u8 {
        match self {
            Label::Id => 0,
            Label::Ood => 1,
            Label::Unlabeled => 2,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Label::Id),
            1 => Ok(Label::Ood),
            2 => Ok(Label::Unlabeled),
            other => Err(Error::Format(format!("unknown label byte {other}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Id => "ID",
            Label::Ood => "OOD",
            Label::Unlabeled => "UNLABELED",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ID" | "0" => Ok(Label::Id),
            "OOD" | "1" => Ok(Label::Ood),
            "UNLABELED" | "2" => Ok(Label::Unlabeled),
            other => Err(Error::Format(format!("unknown label {other:?}"))),
        }
    }
}

/// One extracted feature vector for a single detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub class_key: String,
    pub label: Label,
    /// Detector confidence in `[0, 1]`.
    pub score: f64,
    pub values: Vec<f64>,
}

impl FeatureRecord {
    pub fn new(class_key: impl Into<String>, label: Label, score: f64, values: Vec<f64>) -> Self {
        FeatureRecord {
            class_key: class_key.into(),
            label,
            score,
            values,
        }
    }
}

/// A dimension-consistent collection of records taken at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dimension: usize,
    layer_tag: String,
    records: Vec<FeatureRecord>,
}

impl FeatureSet {
    pub fn new(dimension: usize, layer_tag: impl Into<String>) -> Result<Self> {
        let layer_tag = layer_tag.into();
        if dimension == 0 {
            return Err(Error::InvalidParameter(
                "feature dimension must be >= 1".into(),
            ));
        }
        if layer_tag.is_empty() {
            return Err(Error::InvalidParameter(
                "layer tag must be non-empty".into(),
            ));
        }
        Ok(FeatureSet {
            dimension,
            layer_tag,
            records: Vec::new(),
        })
    }

    pub fn from_records(
        dimension: usize,
        layer_tag: impl Into<String>,
        records: Vec<FeatureRecord>,
    ) -> Result<Self> {
        let mut set = Self::new(dimension, layer_tag)?;
        set.records.reserve(records.len());
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, record: FeatureRecord) -> Result<()> {
        if record.values.len() != self.dimension {
            return Err(Error::mismatch(self.dimension, record.values.len()));
        }
        if !(0.0..=1.0).contains(&record.score) {
            return Err(Error::InvalidParameter(format!(
                "score {} outside [0, 1]",
                record.score
            )));
        }
        if record.values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("NaN feature value".into()));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn layer_tag(&self) -> &str {
        &self.layer_tag
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record indices grouped by class key, in key order.
    pub fn indices_by_class(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.class_key.as_str()).or_default().push(i);
        }
        groups
    }

    /// Copy of the records matching `keep`, same dimension and tag.
    pub fn filtered(&self, mut keep: impl FnMut(&FeatureRecord) -> bool) -> FeatureSet {
        FeatureSet {
            dimension: self.dimension,
            layer_tag: self.layer_tag.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}
