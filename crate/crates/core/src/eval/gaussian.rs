//! Single class-conditional Gaussian baseline scored by Mahalanobis distance.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::features::FeatureSet;

pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ClassGaussian {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ClassGaussian {
    /// Sample mean and unbiased covariance plus `lambda * I`.
    pub fn fit<P: AsRef<[f64]>>(class_key: &str, points: &[P], lambda: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "class {class_key:?} needs at least 2 feature vectors for a covariance, has {}",
                points.len()
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(
                "regularization must be >= 0".into(),
            ));
        }
        let n = points[0].as_ref().len();
        let mut mean = DVector::zeros(n);
        for p in points {
            let p = p.as_ref();
            if p.len() != n {
                return Err(Error::mismatch(n, p.len()));
            }
            mean += DVector::from_column_slice(p);
        }
        mean /= points.len() as f64;

        let mut cov = DMatrix::zeros(n, n);
        for p in points {
            let d = DVector::from_column_slice(p.as_ref()) - &mean;
            cov.ger(1.0, &d, &d, 1.0);
        }
        cov /= (points.len() - 1) as f64;
        for i in 0..n {
            cov[(i, i)] += lambda;
        }
        let chol = Cholesky::new(cov).ok_or_else(|| Error::SingularCovariance {
            class: class_key.to_owned(),
            lambda,
        })?;
        Ok(ClassGaussian { mean, chol })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// `sqrt((z - mu)^T Sigma^-1 (z - mu))` via the Cholesky factor.
    pub fn mahalanobis(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.mean.len() {
            return Err(Error::mismatch(self.mean.len(), z.len()));
        }
        let d = DVector::from_column_slice(z) - &self.mean;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&d)
            .ok_or_else(|| Error::Invariant("triangular solve failed".into()))?;
        Ok(y.norm_squared().sqrt())
    }
}

/// One Gaussian per class key.
#[derive(Debug, Clone)]
pub struct GaussianMonitor {
    dimension: usize,
    classes: BTreeMap<String, ClassGaussian>,
}

impl GaussianMonitor {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, class_key: &str) -> Option<&ClassGaussian> {
        self.classes.get(class_key)
    }

    pub fn class_keys(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }
}

/// Fits every class key present in `features` (all records are used; filter first).
pub fn gaussian_fit(features: &FeatureSet, lambda: f64) -> Result<GaussianMonitor> {
    if features.is_empty() {
        return Err(Error::EmptyInput("Gaussian fit over zero records".into()));
    }
    let mut classes = BTreeMap::new();
    for (key, idx) in features.indices_by_class() {
        let pts: Vec<&[f64]> = idx
            .iter()
            .map(|&i| features.records()[i].values.as_slice())
            .collect();
        classes.insert(key.to_owned(), ClassGaussian::fit(key, &pts, lambda)?);
    }
    Ok(GaussianMonitor {
        dimension: features.dimension(),
        classes,
    })
}

/// Mahalanobis distance to the class's Gaussian; `None` for an unknown class.
pub fn gaussian_score(z: &[f64], class_key: &str, gm: &GaussianMonitor) -> Result<Option<f64>> {
    if z.len() != gm.dimension {
        return Err(Error::mismatch(gm.dimension, z.len()));
    }
    gm.classes
        .get(class_key)
        .map(|g| g.mahalanobis(z))
        .transpose()
}
