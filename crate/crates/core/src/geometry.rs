//! Axis-aligned boxes over feature space and the point-to-box distance.
//!
//! Intervals are closed on both ends, so a point on a face is contained.
//! The distance from a point to a box is the sum over dimensions of the
//! distance from the coordinate to the interval, which is zero exactly when
//! the point lies inside the box. All comparisons are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product of `n` closed intervals `[lower[i], upper[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BoxAbstraction {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for BoxAbstraction {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        BoxAbstraction::new(raw.lower, raw.upper)
    }
}

impl From<BoxAbstraction> for RawBox {
    fn from(b: BoxAbstraction) -> Self {
        RawBox {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl BoxAbstraction {
    /// Checks `lower.len() == upper.len() >= 1` and `lower[i] <= upper[i]`.
    /// NaN bounds are rejected.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::mismatch(lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::EmptyInput("box with zero dimensions".into()));
        }
        for (dim, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            // `!(lo <= hi)` also catches NaN
            if !(lo <= hi) {
                return Err(Error::InvalidInterval {
                    dim,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(BoxAbstraction { lower, upper })
    }

    /// Degenerate box `[p_i, p_i]` around a single point.
    pub fn from_point(point: &[f64]) -> Result<Self> {
        Self::new(point.to_vec(), point.to_vec())
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when every interval of `other` lies inside the matching interval of `self`.
    pub fn contains_box(&self, other: &BoxAbstraction) -> bool {
        self.dimension() == other.dimension()
            && self
                .lower
                .iter()
                .zip(&self.upper)
                .zip(other.lower.iter().zip(&other.upper))
                .all(|((&a, &b), (&c, &d))| a <= c && d <= b)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dimension() {
            return Err(Error::mismatch(self.dimension(), found));
        }
        Ok(())
    }
}

/// Distance from `x` to the closed interval `[lo, hi]`.
pub fn interval_distance(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::InvalidInterval {
            dim: 0,
            lower: lo,
            upper: hi,
        });
    }
    Ok(interval_gap(x, lo, hi))
}

#[inline(always)]
pub(crate) fn interval_gap(x: f64, lo: f64, hi: f64) -> f64 {
    // at most one term is non-zero since lo <= hi, so this equals the
    // three-way branch bit for bit
    (lo - x).max(0.0) + (x - hi).max(0.0)
}

/// Sum of per-dimension interval distances. Zero iff `x` is inside `b`.
pub fn box_distance(x: &[f64], b: &BoxAbstraction) -> Result<f64> {
    b.check_dim(x.len())?;
    Ok(box_distance_unchecked(x, b))
}

#[inline]
pub(crate) fn box_distance_unchecked(x: &[f64], b: &BoxAbstraction) -> f64 {
    let mut sum = 0.0;
    for ((&xi, &lo), &hi) in x.iter().zip(&b.lower).zip(&b.upper) {
        sum += interval_gap(xi, lo, hi);
    }
    sum
}

const ABANDON_STRIDE: usize = 16;

/// Same sum as [`box_distance_unchecked`], but gives up (returns `None`) as
/// soon as the running total reaches `bound`. Terms are non-negative, so
/// an abandoned box can never be strictly closer than `bound`.
#[inline]
pub(crate) fn box_distance_below(x: &[f64], b: &BoxAbstraction, bound: f64) -> Option<f64> {
    let mut sum = 0.0;
    let chunks = x
        .chunks(ABANDON_STRIDE)
        .zip(b.lower.chunks(ABANDON_STRIDE))
        .zip(b.upper.chunks(ABANDON_STRIDE));
    for ((xs, los), his) in chunks {
        for ((&xi, &lo), &hi) in xs.iter().zip(los).zip(his) {
            sum += interval_gap(xi, lo, hi);
        }
        if sum >= bound {
            return None;
        }
    }
    Some(sum)
}

/// Closed-interval membership; stops at the first violated dimension.
pub fn box_contains(x: &[f64], b: &BoxAbstraction) -> Result<bool> {
    b.check_dim(x.len())?;
    Ok(box_contains_unchecked(x, b))
}

#[inline]
pub(crate) fn box_contains_unchecked(x: &[f64], b: &BoxAbstraction) -> bool {
    x.iter()
        .zip(&b.lower)
        .zip(&b.upper)
        .all(|((&xi, &lo), &hi)| lo <= xi && xi <= hi)
}

/// Tight box abstraction: per-dimension min and max over `points`.
pub fn tba<P: AsRef<[f64]>>(points: &[P]) -> Result<BoxAbstraction> {
    let first = points
        .first()
        .ok_or_else(|| Error::EmptyInput("tight box abstraction of zero points".into()))?
        .as_ref();
    let mut lower = first.to_vec();
    let mut upper = first.to_vec();
    for p in &points[1..] {
        let p = p.as_ref();
        if p.len() != lower.len() {
            return Err(Error::mismatch(lower.len(), p.len()));
        }
        for ((lo, hi), &v) in lower.iter_mut().zip(upper.iter_mut()).zip(p) {
            if v < *lo {
                *lo = v;
            }
            if v > *hi {
                *hi = v;
            }
        }
    }
    BoxAbstraction::new(lower, upper)
}

/// `[a_i - delta_i, b_i + delta_i]` for every dimension.
pub fn enlarge_by_delta(b: &BoxAbstraction, delta: &[f64]) -> Result<BoxAbstraction> {
    b.check_dim(delta.len())?;
    if let Some((dim, &value)) = delta.iter().enumerate().find(|(_, d)| !(**d >= 0.0)) {
        return Err(Error::NegativeBuffer { dim, value });
    }
    let lower = b.lower.iter().zip(delta).map(|(a, d)| a - d).collect();
    let upper = b.upper.iter().zip(delta).map(|(a, d)| a + d).collect();
    BoxAbstraction::new(lower, upper)
}

/// Smallest box containing both `b` and `point`.
pub fn expand_to_include(b: &BoxAbstraction, point: &[f64]) -> Result<BoxAbstraction> {
    let mut out = b.clone();
    expand_in_place(&mut out, point)?;
    Ok(out)
}

pub(crate) fn expand_in_place(b: &mut BoxAbstraction, point: &[f64]) -> Result<()> {
    b.check_dim(point.len())?;
    if point.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN coordinate".into()));
    }
    for ((lo, hi), &v) in b.lower.iter_mut().zip(b.upper.iter_mut()).zip(point) {
        if v < *lo {
            *lo = v;
        }
        if v > *hi {
            *hi = v;
        }
    }
    Ok(())
}
