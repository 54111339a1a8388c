//! Query-latency benchmark for a randomly generated monitor.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BoxAbstraction;
use crate::monitor::{monitor_distance, ClassMonitor};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub boxes: usize,
    pub dimension: usize,
    pub queries: usize,
    /// Share of queries placed inside some box.
    pub inside_fraction: f64,
    pub seed: u64,
    /// 1 runs on the calling thread.
    pub threads: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            boxes: 7000,
            dimension: 1024,
            queries: 1000,
            inside_fraction: 0.0,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub queries: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
}

impl LatencyStats {
    fn from_samples(samples: &[Duration]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let pct = |q: f64| ms[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(LatencyStats {
            queries: n,
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            median_ms: pct(0.5),
            p99_ms: pct(0.99),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub boxes: usize,
    pub dimension: usize,
    pub threads: usize,
    pub overall: LatencyStats,
    pub inside: Option<LatencyStats>,
    pub outside: Option<LatencyStats>,
    /// One entry per worker when `threads > 1`.
    pub per_thread: Vec<LatencyStats>,
    pub total_wall_ms: f64,
}

/// Monitor of `boxes` boxes with corners in `[0, 1.05]^dimension`.
pub fn random_monitor(boxes: usize, dimension: usize, seed: u64) -> Result<ClassMonitor> {
    if boxes == 0 || dimension == 0 {
        return Err(Error::InvalidParameter(
            "boxes and dimension must be >= 1".into(),
        ));
    }
    let bytes = boxes
        .checked_mul(dimension)
        .and_then(|c| c.checked_mul(2 * std::mem::size_of::<f64>()))
        .ok_or_else(|| Error::InvalidParameter("monitor size overflows".into()))?;
    let mut out: Vec<BoxAbstraction> = Vec::new();
    out.try_reserve_exact(boxes).map_err(|_| oom(bytes))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..boxes {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        lower.try_reserve_exact(dimension).map_err(|_| oom(bytes))?;
        upper.try_reserve_exact(dimension).map_err(|_| oom(bytes))?;
        for _ in 0..dimension {
            let lo: f64 = rng.random();
            lower.push(lo);
            upper.push(lo + rng.random::<f64>() * 0.05);
        }
        out.push(BoxAbstraction::new(lower, upper)?);
    }
    ClassMonitor::new("bench", out)
}

fn oom(bytes: usize) -> Error {
    Error::InvalidParameter(format!(
        "cannot allocate {bytes} bytes for the benchmark monitor"
    ))
}

/// Query points, flagged by whether they were placed inside a box.
/// Outside points push coordinate 0 past every upper bound.
fn queries(
    monitor: &ClassMonitor,
    params: &BenchParams,
    rng: &mut ChaCha8Rng,
) -> Vec<(bool, Vec<f64>)> {
    let n_inside = (params.inside_fraction * params.queries as f64).round() as usize;
    let mut flags: Vec<bool> = (0..params.queries).map(|i| i < n_inside).collect();
    flags.shuffle(rng);
    flags
        .into_iter()
        .map(|inside| {
            let point = if inside {
                let b = &monitor.boxes()[rng.random_range(0..monitor.boxes().len())];
                b.lower()
                    .iter()
                    .zip(b.upper())
                    .map(|(&lo, &hi)| (lo + rng.random::<f64>() * (hi - lo)).clamp(lo, hi))
                    .collect()
            } else {
                let mut p: Vec<f64> = (0..params.dimension).map(|_| rng.random()).collect();
                p[0] = 1.5 + rng.random::<f64>();
                p
            };
            (inside, point)
        })
        .collect()
}

fn run(monitor: &ClassMonitor, qs: &[(bool, Vec<f64>)]) -> Result<Vec<(bool, Duration)>> {
    let mut out = Vec::with_capacity(qs.len());
    for (inside, q) in qs {
        let start = Instant::now();
        let r = monitor_distance(black_box(q), monitor)?;
        let elapsed = start.elapsed();
        black_box(r);
        if *inside != (r.0 == 0.0) {
            return Err(Error::Invariant(
                "benchmark query landed on the wrong side".into(),
            ));
        }
        out.push((*inside, elapsed));
    }
    Ok(out)
}

pub fn bench_throughput(params: &BenchParams) -> Result<BenchReport> {
    if params.boxes == 0 || params.dimension == 0 || params.queries == 0 || params.threads == 0 {
        return Err(Error::InvalidParameter(
            "boxes, dimension, queries and threads must all be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.inside_fraction) {
        return Err(Error::InvalidParameter(
            "inside_fraction must be in [0, 1]".into(),
        ));
    }
    let monitor = random_monitor(params.boxes, params.dimension, params.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    let qs = queries(&monitor, params, &mut rng);

    let wall = Instant::now();
    let per_worker: Vec<Vec<(bool, Duration)>> = if params.threads == 1 {
        vec![run(&monitor, &qs)?]
    } else {
        let chunk = qs.len().div_ceil(params.threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = qs
                .chunks(chunk)
                .map(|part| s.spawn(|| run(&monitor, part)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("benchmark worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };
    let total_wall_ms = wall.elapsed().as_secs_f64() * 1e3;

    let all: Vec<(bool, Duration)> = per_worker.iter().flatten().copied().collect();
    let pick = |want: Option<bool>| -> Vec<Duration> {
        all.iter()
            .filter(|(i, _)| want.is_none_or(|w| *i == w))
            .map(|(_, d)| *d)
            .collect()
    };
    let per_thread = if params.threads > 1 {
        per_worker
            .iter()
            .filter_map(|w| LatencyStats::from_samples(&w.iter().map(|x| x.1).collect::<Vec<_>>()))
            .collect()
    } else {
        Vec::new()
    };
    Ok(BenchReport {
        boxes: params.boxes,
        dimension: params.dimension,
        threads: params.threads,
        overall: LatencyStats::from_samples(&pick(None)).expect("queries >= 1"),
        inside: LatencyStats::from_samples(&pick(Some(true))),
        outside: LatencyStats::from_samples(&pick(Some(false))),
        per_thread,
        total_wall_ms,
    })
}
