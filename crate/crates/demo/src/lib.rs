//! Browser playground: generate a 2-D dataset, build a box monitor, click to
//! query verdicts, and compare FPR at 95% TPR against a single box and a
//! Gaussian. Every export returns a JSON string for the page script.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use boxmon_core::eval::gaussian::{gaussian_fit, gaussian_score, GaussianMonitor, DEFAULT_LAMBDA};
use boxmon_core::eval::metrics::fpr_at_tpr;
use boxmon_core::eval::synth::{synth_generate, Preset, SynthParams};
use boxmon_core::{
    build_registry, select_k, BuildConfig, ClusterConfig, Decision, FeatureSet, MonitorRegistry,
    Result,
};

#[derive(Debug, Clone, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub class_key: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Rect {
    pub class_key: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scene {
    pub points: Vec<Point>,
    pub ood: Vec<Point>,
    pub boxes: Vec<Rect>,
    pub k: usize,
    pub training_tpr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Query {
    pub decision: Decision,
    pub distance: Option<f64>,
    pub nearest_box_index: Option<usize>,
    /// Mahalanobis distance under the Gaussian baseline.
    pub gaussian: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison {
    pub boxes: f64,
    pub single_box: f64,
    pub gaussian: f64,
}

/// Generated data plus the monitors built on it.
pub struct Session {
    train: FeatureSet,
    ood: FeatureSet,
    held_out: FeatureSet,
    registry: MonitorRegistry,
    single: MonitorRegistry,
    gaussian: GaussianMonitor,
    density: f64,
}

fn params(preset: Preset, n: usize, seed: u64) -> SynthParams {
    SynthParams {
        preset,
        n_points: n,
        seed,
        ..SynthParams::default()
    }
}

fn ood_preset(preset: Preset) -> Preset {
    match preset {
        Preset::RingOod | Preset::UniformOod => preset,
        _ => Preset::UniformOod,
    }
}

impl Session {
    /// `preset` names the ID data ("gauss-mix" or "moons"); OoD points come
    /// from `ood` ("uniform-ood" or "ring-ood") around the same means.
    pub fn new(
        preset: &str,
        ood: &str,
        n: usize,
        seed: u64,
        density: f64,
        target_tpr: f64,
    ) -> Result<Self> {
        let id_preset: Preset = preset.parse()?;
        if matches!(id_preset, Preset::RingOod | Preset::UniformOod) {
            return Err(boxmon_core::Error::InvalidParameter(format!(
                "{preset} is an OoD preset"
            )));
        }
        let ood_preset = ood_preset(ood.parse()?);
        let train = synth_generate(&params(id_preset, n, seed))?;
        let held_out = synth_generate(&params(id_preset, n, seed.wrapping_add(1000)))?;
        let ood = synth_generate(&params(ood_preset, n, seed.wrapping_add(2000)))?;
        let config = |cap| BuildConfig {
            cluster: ClusterConfig {
                density,
                cap,
                seed,
                ..ClusterConfig::default()
            },
            target_tpr,
            score_threshold: 0.0,
        };
        Ok(Session {
            registry: build_registry(&train, &config(10_000))?,
            single: build_registry(&train, &config(1))?,
            gaussian: gaussian_fit(&train, DEFAULT_LAMBDA)?,
            train,
            ood,
            held_out,
            density,
        })
    }

    pub fn scene(&self) -> Result<Scene> {
        let pts = |set: &FeatureSet| {
            set.records()
                .iter()
                .map(|r| Point {
                    x: r.values[0],
                    y: r.values[1],
                    class_key: r.class_key.clone(),
                })
                .collect()
        };
        let mut boxes = Vec::new();
        for (key, m) in self.registry.monitors() {
            for b in m.boxes() {
                boxes.push(Rect {
                    class_key: key.clone(),
                    x0: b.lower()[0],
                    y0: b.lower()[1],
                    x1: b.upper()[0],
                    y1: b.upper()[1],
                });
            }
        }
        let summary = self.registry.summarize(&self.train)?;
        let inside: f64 = summary
            .iter()
            .map(|s| s.training_tpr * s.records as f64)
            .sum();
        let total: usize = summary.iter().map(|s| s.records).sum();
        Ok(Scene {
            points: pts(&self.train),
            ood: pts(&self.ood),
            k: summary
                .iter()
                .map(|s| select_k(s.records, self.density, 10_000))
                .sum(),
            boxes,
            training_tpr: inside / total as f64,
        })
    }

    /// Verdict for `(x, y)` under the monitor of `class_key`. Coordinates
    /// beyond the first two are zero.
    pub fn query(&self, class_key: &str, x: f64, y: f64) -> Result<Query> {
        let mut z = vec![0.0; self.registry.dimension()];
        z[0] = x;
        z[1] = y;
        let v = self.registry.verdict(&z, class_key)?;
        Ok(Query {
            decision: v.decision,
            distance: v.distance.is_finite().then_some(v.distance),
            nearest_box_index: v.nearest_box_index,
            gaussian: gaussian_score(&z, class_key, &self.gaussian)?,
        })
    }

    /// FPR at 95% TPR on a held-out ID draw and the OoD draw.
    pub fn compare(&self) -> Result<Comparison> {
        let boxes = |reg: &MonitorRegistry, set: &FeatureSet| -> Result<Vec<f64>> {
            set.records()
                .iter()
                .map(|r| reg.verdict(&r.values, &r.class_key).map(|v| v.distance))
                .collect()
        };
        let gauss = |set: &FeatureSet| -> Result<Vec<f64>> {
            set.records()
                .iter()
                .map(|r| {
                    gaussian_score(&r.values, &r.class_key, &self.gaussian)
                        .map(|s| s.unwrap_or(f64::INFINITY))
                })
                .collect()
        };
        // OoD records are keyed by their nearest mean, which may not match
        // a class of the ID preset; those score +inf under every method
        let fpr = |id: Vec<f64>, ood: Vec<f64>| fpr_at_tpr(&id, &ood, 0.95).map(|p| p.fpr);
        Ok(Comparison {
            boxes: fpr(
                boxes(&self.registry, &self.held_out)?,
                boxes(&self.registry, &self.ood)?,
            )?,
            single_box: fpr(
                boxes(&self.single, &self.held_out)?,
                boxes(&self.single, &self.ood)?,
            )?,
            gaussian: fpr(gauss(&self.held_out)?, gauss(&self.ood)?)?,
        })
    }
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct Playground {
    session: Session,
}

#[wasm_bindgen]
impl Playground {
    /// Generates the data and builds the monitors.
    #[wasm_bindgen(constructor)]
    pub fn new(
        preset: &str,
        ood: &str,
        n: usize,
        seed: u64,
        density: f64,
        target_tpr: f64,
    ) -> std::result::Result<Playground, JsError> {
        Session::new(preset, ood, n, seed, density, target_tpr)
            .map(|session| Playground { session })
            .map_err(|e| JsError::new(&e.to_string()))
    }

    /// Points, OoD points and boxes as JSON.
    pub fn scene(&self) -> std::result::Result<String, JsError> {
        to_js(self.session.scene())
    }

    pub fn query(&self, class_key: &str, x: f64, y: f64) -> std::result::Result<String, JsError> {
        to_js(self.session.query(class_key, x, y))
    }

    pub fn compare(&self) -> std::result::Result<String, JsError> {
        to_js(self.session.compare())
    }
}
