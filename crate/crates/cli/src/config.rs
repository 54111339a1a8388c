//! Optional TOML config file. Every table mirrors one subcommand and every
//! key mirrors one of its flags (same spelling); flags win over the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub build: BuildSection,
    pub eval: EvalSection,
    pub check: CheckSection,
    pub synth: SynthSection,
    pub bench: BenchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BuildSection {
    pub features: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub density: Option<f64>,
    pub cap: Option<usize>,
    pub target_tpr: Option<f64>,
    pub seed: Option<u64>,
    pub score_threshold: Option<f64>,
    pub auto_threshold: Option<bool>,
    pub ground_truth_count: Option<usize>,
    pub max_iterations: Option<usize>,
    pub shift_tolerance: Option<f64>,
    pub layer_tag: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalSection {
    pub monitor: Option<PathBuf>,
    pub id: Option<PathBuf>,
    pub ood: Option<PathBuf>,
    pub target_tpr: Option<f64>,
    pub report: Option<PathBuf>,
    pub baseline: Option<String>,
    pub baseline_train: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub score_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CheckSection {
    pub monitor: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthSection {
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub components: Option<usize>,
    pub spread: Option<f64>,
    pub separation: Option<f64>,
    pub classes: Option<usize>,
    pub exclusion: Option<f64>,
    pub ring_width: Option<f64>,
    pub margin: Option<f64>,
    pub seed: Option<u64>,
    pub layer_tag: Option<String>,
    pub bamf: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchSection {
    pub boxes: Option<usize>,
    pub dim: Option<usize>,
    pub queries: Option<usize>,
    pub inside_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub report: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}
