//! Deterministic synthetic feature sets: multi-modal ID classes and OoD
//! samples kept out of an exclusion zone around every ID mean.
//!
//! Component means sit on a circle in the first two coordinates with
//! neighbouring means `separation * spread` apart (on a line when the
//! dimension is 1). Every value is rounded to `f32` so that generated sets
//! survive a BAMF round trip unchanged.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, FeatureSet, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    GaussMix,
    Moons,
    RingOod,
    UniformOod,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gauss-mix" => Ok(Preset::GaussMix),
            "moons" => Ok(Preset::Moons),
            "ring-ood" => Ok(Preset::RingOod),
            "uniform-ood" => Ok(Preset::UniformOod),
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?}"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::GaussMix => "gauss-mix",
            Preset::Moons => "moons",
            Preset::RingOod => "ring-ood",
            Preset::UniformOod => "uniform-ood",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub preset: Preset,
    pub n_points: usize,
    pub dimension: usize,
    /// Number of mixture components (ignored by `Moons`, which always has 2).
    pub components: usize,
    /// Per-coordinate standard deviation of each component.
    pub spread: f64,
    /// Distance between neighbouring means, in units of `spread`.
    pub separation: f64,
    /// Components are dealt round-robin into this many class keys.
    pub classes: usize,
    /// OoD points stay at least this many `spread`s from every mean.
    pub exclusion: f64,
    /// Radial thickness of the OoD ring, in units of `spread`.
    pub ring_width: f64,
    /// Extra room around the means' bounding box for uniform OoD, in units of `spread`.
    pub margin: f64,
    pub seed: u64,
    pub layer_tag: String,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            preset: Preset::GaussMix,
            n_points: 300,
            dimension: 2,
            components: 3,
            spread: 1.0,
            separation: 10.0,
            classes: 1,
            exclusion: 4.0,
            ring_width: 2.0,
            margin: 0.0,
            seed: 0,
            layer_tag: "synthetic".into(),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.dimension == 0 {
            return bad("dimension must be >= 1");
        }
        if self.components == 0 {
            return bad("components must be >= 1");
        }
        if self.classes == 0 {
            return bad("classes must be >= 1");
        }
        for (name, v) in [
            ("spread", self.spread),
            ("separation", self.separation),
            ("exclusion", self.exclusion),
            ("ring_width", self.ring_width),
            ("margin", self.margin),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.spread == 0.0 {
            return bad("spread must be > 0");
        }
        if self.preset == Preset::Moons && self.dimension < 2 {
            return bad("moons need at least 2 dimensions");
        }
        Ok(())
    }

    /// Class key owning component `j`.
    pub fn class_key(&self, component: usize) -> String {
        format!("class{}", component % self.classes)
    }

    /// Component means used by every preset except `Moons`.
    pub fn means(&self) -> Vec<Vec<f64>> {
        let c = self.components;
        let gap = self.separation * self.spread;
        (0..c)
            .map(|j| {
                let mut m = vec![0.0; self.dimension];
                if c == 1 {
                    return m;
                }
                if self.dimension == 1 {
                    m[0] = j as f64 * gap;
                } else {
                    let radius = gap / (2.0 * (std::f64::consts::PI / c as f64).sin());
                    let angle = 2.0 * std::f64::consts::PI * j as f64 / c as f64;
                    m[0] = radius * angle.cos();
                    m[1] = radius * angle.sin();
                }
                m
            })
            .collect()
    }
}

fn round32(v: f64) -> f64 {
    v as f32 as f64
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn nearest_mean(p: &[f64], means: &[Vec<f64>]) -> (usize, f64) {
    means
        .iter()
        .enumerate()
        .map(|(j, m)| (j, dist(p, m)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

const MAX_REJECTIONS_PER_POINT: usize = 10_000;

pub fn synth_generate(params: &SynthParams) -> Result<FeatureSet> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut set = FeatureSet::new(params.dimension, params.layer_tag.clone())?;
    match params.preset {
        Preset::GaussMix => gauss_mix(params, &mut rng, &mut set)?,
        Preset::Moons => moons(params, &mut rng, &mut set)?,
        Preset::RingOod | Preset::UniformOod => ood(params, &mut rng, &mut set)?,
    }
    Ok(set)
}

fn gauss_mix(p: &SynthParams, rng: &mut ChaCha8Rng, set: &mut FeatureSet) -> Result<()> {
    let means = p.means();
    for i in 0..p.n_points {
        let j = i % p.components;
        let values = means[j]
            .iter()
            .map(|m| round32(m + p.spread * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        set.push(FeatureRecord::new(p.class_key(j), Label::Id, 1.0, values))?;
    }
    Ok(())
}

fn moons(p: &SynthParams, rng: &mut ChaCha8Rng, set: &mut FeatureSet) -> Result<()> {
    let radius = p.separation * p.spread / 2.0;
    let noise = p.spread * 0.25;
    for i in 0..p.n_points {
        let j = i % 2;
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let (x, y) = if j == 0 {
            (radius * t.cos(), radius * t.sin())
        } else {
            (radius * (1.0 - t.cos()), radius * (0.5 - t.sin()))
        };
        let mut values = vec![0.0; p.dimension];
        values[0] = x;
        values[1] = y;
        for v in values.iter_mut() {
            *v = round32(*v + noise * rng.sample::<f64, _>(StandardNormal));
        }
        set.push(FeatureRecord::new(p.class_key(j), Label::Id, 1.0, values))?;
    }
    Ok(())
}

fn ood(p: &SynthParams, rng: &mut ChaCha8Rng, set: &mut FeatureSet) -> Result<()> {
    let means = p.means();
    let excl = p.exclusion * p.spread;
    let (lo, hi) = {
        let pad = p.margin * p.spread;
        let lo: Vec<f64> = (0..p.dimension)
            .map(|d| means.iter().map(|m| m[d]).fold(f64::INFINITY, f64::min) - pad)
            .collect();
        let hi: Vec<f64> = (0..p.dimension)
            .map(|d| means.iter().map(|m| m[d]).fold(f64::NEG_INFINITY, f64::max) + pad)
            .collect();
        (lo, hi)
    };
    for i in 0..p.n_points {
        let mut accepted = None;
        for _ in 0..MAX_REJECTIONS_PER_POINT {
            let candidate: Vec<f64> = match p.preset {
                Preset::RingOod => {
                    let centre = &means[i % means.len()];
                    let dir: Vec<f64> = (0..p.dimension)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    let r = excl + rng.random::<f64>() * p.ring_width * p.spread;
                    centre
                        .iter()
                        .zip(&dir)
                        .map(|(c, d)| round32(c + r * d / norm))
                        .collect()
                }
                _ => lo
                    .iter()
                    .zip(&hi)
                    .map(|(&a, &b)| round32(if b > a { rng.random_range(a..b) } else { a }))
                    .collect(),
            };
            // checked after f32 rounding so the stored point honours the zone
            let (j, d) = nearest_mean(&candidate, &means);
            if d >= excl {
                accepted = Some((j, candidate));
                break;
            }
        }
        let (j, values) = accepted.ok_or_else(|| {
            Error::InvalidParameter(
                "exclusion zone covers the OoD sampling region; lower exclusion or raise margin"
                    .into(),
            )
        })?;
        set.push(FeatureRecord::new(p.class_key(j), Label::Ood, 1.0, values))?;
    }
    Ok(())
}
