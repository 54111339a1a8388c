use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use boxmon_core::clustering::{
    ClusterConfig, DEFAULT_CAP, DEFAULT_DENSITY, DEFAULT_MAX_ITERATIONS, DEFAULT_SHIFT_TOLERANCE,
};
use boxmon_core::eval::bench::{bench_throughput, BenchParams, BenchReport, LatencyStats};
use boxmon_core::eval::gaussian::{gaussian_fit, DEFAULT_LAMBDA};
use boxmon_core::eval::metrics::{micro_f1_threshold, DEFAULT_F1_EPSILON};
use boxmon_core::eval::synth::{synth_generate, Preset, SynthParams};
use boxmon_core::eval::{evaluate_gaussian, evaluate_registry, EvalInputs, EvalReport};
use boxmon_core::io::{read_features, write_features};
use boxmon_core::monitor::DEFAULT_TARGET_TPR;
use boxmon_core::registry::usable_records;
use boxmon_core::{
    build_registry, load_registry, save_registry, select_k, BuildConfig, Decision, Error,
    FeatureSet, Label, MonitorRegistry,
};

use crate::config::{BenchSection, BuildSection, CheckSection, EvalSection, SynthSection};
use crate::{BenchArgs, BuildArgs, CheckArgs, EvalArgs, Failure, SynthArgs, EXIT_DATA};

type CmdResult = Result<(), Failure>;

fn required(flag: Option<PathBuf>, file: Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or(file)
        .ok_or_else(|| Failure::Usage(format!("missing --{name} (flag or config key)")))
}

const DEFAULT_CSV_TAG: &str = "csv";

pub fn build(a: BuildArgs, c: BuildSection) -> CmdResult {
    let features_path = required(a.features, c.features, "features")?;
    let out = required(a.out, c.out, "out")?;
    // a threshold flag overrides both config keys
    let auto = match (a.score_threshold, a.auto_threshold) {
        (Some(_), _) => false,
        (None, true) => true,
        (None, false) => match (c.score_threshold, c.auto_threshold) {
            (Some(_), Some(true)) => {
                return Err(Failure::Usage(
                    "config sets both score-threshold and auto-threshold".into(),
                ))
            }
            (_, auto) => auto.unwrap_or(false),
        },
    };
    let layer_tag = a
        .layer_tag
        .or(c.layer_tag)
        .unwrap_or_else(|| DEFAULT_CSV_TAG.into());
    let features = read_features(&features_path, &layer_tag)?;

    let score_threshold = if auto {
        auto_threshold(&features, a.ground_truth_count.or(c.ground_truth_count))?
    } else {
        a.score_threshold.or(c.score_threshold).unwrap_or(0.0)
    };
    let config = BuildConfig {
        cluster: ClusterConfig {
            density: a.density.or(c.density).unwrap_or(DEFAULT_DENSITY),
            cap: a.cap.or(c.cap).unwrap_or(DEFAULT_CAP),
            seed: a.seed.or(c.seed).unwrap_or(0),
            max_iterations: a
                .max_iterations
                .or(c.max_iterations)
                .unwrap_or(DEFAULT_MAX_ITERATIONS),
            shift_tolerance: a
                .shift_tolerance
                .or(c.shift_tolerance)
                .unwrap_or(DEFAULT_SHIFT_TOLERANCE),
        },
        target_tpr: a.target_tpr.or(c.target_tpr).unwrap_or(DEFAULT_TARGET_TPR),
        score_threshold,
    };
    config.validate()?;

    let registry = build_registry(&features, &config)?;
    save_registry(&registry, &out)?;

    let summary = registry.summarize(&features)?;
    println!(
        "layer {}  dim {}  score threshold {}  target TPR {}",
        registry.layer_tag(),
        registry.dimension(),
        config.score_threshold,
        config.target_tpr
    );
    println!(
        "{:<24} {:>8} {:>6} {:>6} {:>12}",
        "class", "records", "k", "boxes", "training TPR"
    );
    for s in &summary {
        println!(
            "{:<24} {:>8} {:>6} {:>6} {:>12.4}",
            s.class_key,
            s.records,
            select_k(s.records, config.cluster.density, config.cluster.cap),
            s.boxes,
            s.training_tpr
        );
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn auto_threshold(features: &FeatureSet, ground_truth: Option<usize>) -> Result<f64, Failure> {
    let scored: Vec<(f64, bool)> = features
        .records()
        .iter()
        .map(|r| (r.score, r.label == Label::Id))
        .collect();
    let total = ground_truth.unwrap_or_else(|| scored.iter().filter(|s| s.1).count());
    let best = micro_f1_threshold(&scored, total, DEFAULT_F1_EPSILON)?;
    if best.degenerate {
        return Err(Error::EmptyClass(
            "--auto-threshold needs ID-labelled records; none can be kept".into(),
        )
        .into());
    }
    eprintln!(
        "auto score threshold {} (micro F1 {:.4})",
        best.threshold, best.f1
    );
    Ok(best.threshold)
}

#[derive(Serialize)]
struct EvalFile<'a> {
    layer_tag: &'a str,
    target_tpr: f64,
    score_threshold: f64,
    box_monitor: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<&'a EvalReport>,
}

pub fn eval(a: EvalArgs, c: EvalSection) -> CmdResult {
    let monitor_path = required(a.monitor, c.monitor, "monitor")?;
    let id_path = required(a.id, c.id, "id")?;
    let ood_path = required(a.ood, c.ood, "ood")?;
    let target = a.target_tpr.or(c.target_tpr).unwrap_or(DEFAULT_TARGET_TPR);
    let baseline = a.baseline.or(c.baseline);
    if let Some(b) = &baseline {
        if b != "gaussian" {
            return Err(Failure::Usage(format!(
                "unknown baseline {b:?} (only \"gaussian\")"
            )));
        }
    }
    let registry = load_registry(&monitor_path)?;
    let score_threshold = a
        .score_threshold
        .or(c.score_threshold)
        .unwrap_or(registry.build_meta().score_threshold);
    let id = read_dump(&id_path, &registry)?;
    let ood = read_dump(&ood_path, &registry)?;
    let inputs = EvalInputs::prepare(&id, &ood, score_threshold)?;
    let bam = evaluate_registry(&registry, &inputs, target)?;

    let base = match baseline {
        None => None,
        Some(_) => {
            let train = match a.baseline_train.or(c.baseline_train) {
                Some(p) => read_dump(&p, &registry)?,
                None => id.clone(),
            };
            let train = usable_records(&train, score_threshold);
            let lambda = a.lambda.or(c.lambda).unwrap_or(DEFAULT_LAMBDA);
            let gm = gaussian_fit(&train, lambda)?;
            Some(evaluate_gaussian(&gm, &inputs, target)?)
        }
    };

    println!(
        "target TPR {target}  ID {}  OoD {}",
        inputs.id.len(),
        inputs.ood.len()
    );
    println!(
        "{:<12} {:<24} {:>6} {:>6} {:>12} {:>8} {:>8}",
        "method", "class", "ID", "OoD", "threshold", "TPR", "FPR"
    );
    for report in std::iter::once(&bam).chain(base.as_ref()) {
        print_rows(report);
    }
    if let Some(v) = bam.verdict {
        println!("box verdict alone: TPR {:.4}  FPR {:.4}", v.tpr, v.fpr);
    }

    if let Some(path) = a.report.or(c.report) {
        let file = EvalFile {
            layer_tag: registry.layer_tag(),
            target_tpr: target,
            score_threshold,
            box_monitor: &bam,
            baseline: base.as_ref(),
        };
        write_json(&path, &file)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn print_rows(r: &EvalReport) {
    let row = |class: &str, e: &boxmon_core::eval::EvalEntry| {
        println!(
            "{:<12} {:<24} {:>6} {:>6} {:>12.6} {:>8.4} {:>8.4}",
            r.method,
            class,
            e.point.id_count,
            e.point.ood_count,
            e.point.distance_threshold,
            e.point.achieved_tpr,
            e.point.fpr
        );
    };
    row("(all)", &r.overall);
    for (k, e) in &r.per_class {
        row(k, e);
    }
}

fn read_dump(path: &Path, registry: &MonitorRegistry) -> Result<FeatureSet, Failure> {
    let set = read_features(path, registry.layer_tag())?;
    if set.dimension() != registry.dimension() {
        return Err(Error::DimensionMismatch {
            expected: registry.dimension(),
            found: set.dimension(),
        }
        .into());
    }
    if set.layer_tag() != registry.layer_tag() {
        eprintln!(
            "warning: {} has layer tag {:?}, monitor has {:?}",
            path.display(),
            set.layer_tag(),
            registry.layer_tag()
        );
    }
    Ok(set)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(Error::from)?;
    Ok(())
}

#[derive(Deserialize)]
struct CheckLine {
    class_key: String,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct CheckVerdict {
    decision: Decision,
    /// `null` for an unknown class.
    distance: Option<f64>,
    nearest_box_index: Option<usize>,
}

#[derive(Serialize)]
struct CheckError {
    error: String,
}

pub fn check(a: CheckArgs, c: CheckSection) -> CmdResult {
    let monitor_path = required(a.monitor, c.monitor, "monitor")?;
    let registry = load_registry(&monitor_path)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    let failed = check_stream(&registry, stdin.lock(), stdout.lock()).map_err(Error::from)?;
    if failed > 0 {
        eprintln!("{failed} line(s) failed");
        return Err(Failure::Silent(EXIT_DATA));
    }
    Ok(())
}

/// Answers every line of `input` in order; returns how many lines failed.
pub fn check_stream(
    registry: &MonitorRegistry,
    mut input: impl BufRead,
    mut output: impl Write,
) -> io::Result<usize> {
    let mut failed = 0;
    let mut line = Vec::new();
    loop {
        line.clear();
        if input.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        let text = line.strip_suffix(b"\n").unwrap_or(&line);
        let text = text.strip_suffix(b"\r").unwrap_or(text);
        match answer(registry, text) {
            Ok(v) => serde_json::to_writer(&mut output, &v)?,
            Err(msg) => {
                failed += 1;
                serde_json::to_writer(&mut output, &CheckError { error: msg })?;
            }
        }
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(failed)
}

fn answer(registry: &MonitorRegistry, text: &[u8]) -> Result<CheckVerdict, String> {
    let rec: CheckLine =
        serde_json::from_slice(text).map_err(|e| format!("malformed line: {e}"))?;
    let v = registry
        .verdict(&rec.values, &rec.class_key)
        .map_err(|e| e.to_string())?;
    Ok(CheckVerdict {
        decision: v.decision,
        distance: v.distance.is_finite().then_some(v.distance),
        nearest_box_index: v.nearest_box_index,
    })
}

pub fn synth(a: SynthArgs, c: SynthSection) -> CmdResult {
    let bamf = a.bamf.or(c.bamf);
    let csv = a.csv.or(c.csv);
    if bamf.is_none() && csv.is_none() {
        return Err(Failure::Usage("synth needs --bamf and/or --csv".into()));
    }
    let d = SynthParams::default();
    let preset = match a.preset.or(c.preset) {
        Some(s) => s.parse::<Preset>()?,
        None => d.preset,
    };
    let params = SynthParams {
        preset,
        n_points: a.n.or(c.n).unwrap_or(d.n_points),
        dimension: a.dim.or(c.dim).unwrap_or(d.dimension),
        components: a.components.or(c.components).unwrap_or(d.components),
        spread: a.spread.or(c.spread).unwrap_or(d.spread),
        separation: a.separation.or(c.separation).unwrap_or(d.separation),
        classes: a.classes.or(c.classes).unwrap_or(d.classes),
        exclusion: a.exclusion.or(c.exclusion).unwrap_or(d.exclusion),
        ring_width: a.ring_width.or(c.ring_width).unwrap_or(d.ring_width),
        margin: a.margin.or(c.margin).unwrap_or(d.margin),
        seed: a.seed.or(c.seed).unwrap_or(d.seed),
        layer_tag: a.layer_tag.or(c.layer_tag).unwrap_or(d.layer_tag),
    };
    let set = synth_generate(&params)?;
    if let Some(p) = &bamf {
        write_bamf(p, &set)?;
        eprintln!("wrote {} ({} records)", p.display(), set.len());
    }
    if let Some(p) = &csv {
        boxmon_core::io::csv::write(
            io::BufWriter::new(fs::File::create(p).map_err(Error::from)?),
            &set,
        )?;
        eprintln!("wrote {} ({} records)", p.display(), set.len());
    }
    Ok(())
}

// --bamf always writes BAMF, whatever the extension
fn write_bamf(path: &Path, set: &FeatureSet) -> Result<(), Error> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        fs::write(path, boxmon_core::io::bamf::to_bytes(set)?)?;
        Ok(())
    } else {
        write_features(path, set)
    }
}

pub fn bench(a: BenchArgs, c: BenchSection) -> CmdResult {
    let d = BenchParams::default();
    let params = BenchParams {
        boxes: a.boxes.or(c.boxes).unwrap_or(d.boxes),
        dimension: a.dim.or(c.dim).unwrap_or(d.dimension),
        queries: a.queries.or(c.queries).unwrap_or(d.queries),
        inside_fraction: a.inside_fraction.or(c.inside_fraction).unwrap_or(0.5),
        seed: a.seed.or(c.seed).unwrap_or(d.seed),
        threads: a.threads.or(c.threads).unwrap_or(d.threads),
    };
    let report = bench_throughput(&params)?;
    print_bench(&report);
    if let Some(path) = a.report.or(c.report) {
        write_json(&path, &report)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn print_bench(r: &BenchReport) {
    println!(
        "boxes {}  dim {}  threads {}  wall {:.1} ms",
        r.boxes, r.dimension, r.threads, r.total_wall_ms
    );
    println!(
        "{:<10} {:>8} {:>10} {:>10} {:>10}",
        "queries", "n", "mean ms", "median ms", "p99 ms"
    );
    let row = |name: &str, s: &LatencyStats| {
        println!(
            "{:<10} {:>8} {:>10.4} {:>10.4} {:>10.4}",
            name, s.queries, s.mean_ms, s.median_ms, s.p99_ms
        );
    };
    row("all", &r.overall);
    if let Some(s) = &r.inside {
        row("inside", s);
    }
    if let Some(s) = &r.outside {
        row("outside", s);
    }
    for (i, s) in r.per_thread.iter().enumerate() {
        row(&format!("thread {i}"), s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use boxmon_core::FeatureRecord;

    fn registry() -> MonitorRegistry {
        let recs = (0..10)
            .map(|i| FeatureRecord::new("car", Label::Id, 1.0, vec![i as f64, 0.0]))
            .collect();
        let set = FeatureSet::from_records(2, "t", recs).unwrap();
        build_registry(&set, &BuildConfig::default()).unwrap()
    }

    #[test]
    fn stream_keeps_order_and_reports_errors() {
        let input = b"{\"class_key\":\"car\",\"values\":[3,0]}\n\
not json\n\
{\"class_key\":\"bus\",\"values\":[3,0]}\r\n\
{\"class_key\":\"car\",\"values\":[3]}\n\
{\"class_key\":\"car\",\"values\":[3,2]}";
        let mut out = Vec::new();
        let failed = check_stream(&registry(), &input[..], &mut out).unwrap();
        assert_eq!(failed, 2);
        let lines: Vec<serde_json::Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0]["decision"], "ACCEPT");
        assert_eq!(lines[0]["distance"], 0.0);
        assert_eq!(lines[0]["nearest_box_index"], 0);
        assert!(lines[1]["error"].is_string());
        assert_eq!(lines[2]["decision"], "UNKNOWN_CLASS");
        assert!(lines[2]["distance"].is_null());
        assert!(lines[2]["nearest_box_index"].is_null());
        assert!(lines[3]["error"].as_str().unwrap().contains("dimension"));
        assert_eq!(lines[4]["decision"], "REJECT");
    }

    #[test]
    fn empty_line_is_an_error_line() {
        let mut out = Vec::new();
        assert_eq!(check_stream(&registry(), &b"\n"[..], &mut out).unwrap(), 1);
        assert_eq!(out.iter().filter(|&&b| b == b'\n').count(), 1);
    }
}
