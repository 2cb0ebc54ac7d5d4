//! Per-vector wall-clock timing shared by the estimator benchmarks.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LatencyReport {
    pub estimator: String,
    pub n_ch: usize,
    pub grid_len: usize,
    /// IAA iteration budget; absent for non-iterative estimators.
    pub iterations: Option<usize>,
    pub workers: usize,
    pub samples: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p90_us: f64,
    pub min_us: f64,
    pub hardware: String,
}

/// Times `run` once per vector after `warmup` untimed calls.
pub fn time_per_vector<V, F>(
    estimator: &str,
    n_ch: usize,
    grid_len: usize,
    vectors: &[V],
    warmup: usize,
    mut run: F,
) -> LatencyReport
where
    F: FnMut(&V),
{
    let warmup = if vectors.is_empty() { 0 } else { warmup };
    for v in vectors.iter().cycle().take(warmup) {
        run(v);
    }
    let mut samples: Vec<f64> = vectors
        .iter()
        .map(|v| {
            let start = Instant::now();
            run(v);
            start.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    summarize(estimator, n_ch, grid_len, &mut samples)
}

pub(crate) fn summarize(
    estimator: &str,
    n_ch: usize,
    grid_len: usize,
    samples: &mut [f64],
) -> LatencyReport {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let pick = |q: f64| -> f64 {
        if n == 0 {
            return f64::NAN;
        }
        samples[((n - 1) as f64 * q).round() as usize]
    };
    let median = if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    };
    LatencyReport {
        estimator: estimator.to_string(),
        n_ch,
        grid_len,
        iterations: None,
        workers: rayon::current_num_threads(),
        samples: n,
        mean_us: samples.iter().sum::<f64>() / n.max(1) as f64,
        median_us: median,
        p90_us: pick(0.9),
        min_us: pick(0.0),
        hardware: hardware_note(),
    }
}

/// CPU model and logical core count, best effort.
pub fn hardware_note() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{model}; {cores} logical cores")
}
