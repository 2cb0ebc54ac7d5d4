use std::path::{Path, PathBuf};
use std::time::Instant;

use azsr_core::iaa::time_iaa;
use azsr_core::latency::{hardware_note, time_per_vector, LatencyReport};
use azsr_core::pipeline::{adc_to_rdc, assemble_rda};
use azsr_core::scene::{derive_seed, sample_training_scene, simulate_adc_cube, simulate_beam_vector};
use azsr_core::specnet::{infer_spectrum, load_model_expecting, MlpModel};
use azsr_core::{DbfEstimator, IaaEstimator, NetworkEstimator, SpectrumEstimator};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::{create_dir, require_exists, streams, write_json};

pub const SCHEMA: &str = include_str!("../schema/bench.schema.json");
pub const SCHEMA_ID: &str = "azsr-bench/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLatency {
    pub estimator: String,
    pub frames: usize,
    pub bins_per_frame: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
}

/// Ratios of median per-vector latencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speedups {
    pub iaa_over_network: f64,
    pub iaa_over_dbf: f64,
    pub network_over_dbf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub n_ch: usize,
    pub grid_len: usize,
    pub workers: usize,
    pub hardware: String,
    /// File name of the timed model, or `null` for a seeded untrained network.
    pub model: Option<String>,
    pub per_vector: Vec<LatencyReport>,
    pub per_frame: Vec<FrameLatency>,
    pub speedup: Speedups,
}

impl BenchReport {
    pub fn median_us(&self, estimator: &str) -> Option<f64> {
        self.per_vector.iter().find(|r| r.estimator == estimator).map(|r| r.median_us)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times DBF, IAA and the network per beam vector (each call on one thread)
/// and per whole frame (bins spread over the worker pool).
pub fn run(cfg: &ExperimentConfig, model_path: Option<&PathBuf>, out: &Path) -> CliResult<BenchReport> {
    cfg.validate()?;
    if cfg.bench.vectors == 0 {
        return Err(CliError::validation("bench.vectors must be at least 1"));
    }
    let geom = cfg.geometry()?;
    let a = cfg.manifold()?;
    let stream = derive_seed(cfg.seed, streams::BENCH);

    let (model, model_name) = match model_path {
        Some(p) => {
            require_exists(p, "model")?;
            let (m, _) = load_model_expecting(p, a.n_ch(), a.l()).map_err(|e| CliError::from(e).context(p.display()))?;
            (m, p.file_name().map(|n| n.to_string_lossy().into_owned()))
        }
        None => (MlpModel::<f32>::new(a.n_ch(), a.l(), stream), None),
    };

    let vectors: Vec<Vec<Complex64>> = (0..cfg.bench.vectors)
        .map(|i| {
            let scene = sample_training_scene(derive_seed(stream, i as u64), &cfg.scene_policy)?;
            simulate_beam_vector(&geom, &scene)
        })
        .collect::<azsr_core::Result<_>>()?;

    let warmup = cfg.bench.warmup;
    let dbf = DbfEstimator { manifold: &a };
    let dbf_report = time_per_vector("dbf", a.n_ch(), a.l(), &vectors, warmup, |y| {
        let _ = std::hint::black_box(dbf.estimate(y));
    });
    let iaa_report = time_iaa(&a, &vectors, &cfg.iaa, warmup);
    let mode = cfg.inference_mode;
    let net_report = time_per_vector("network", a.n_ch(), a.l(), &vectors, warmup, |y| {
        let _ = std::hint::black_box(infer_spectrum(&model, &a, y, mode));
    });

    let mut per_frame = Vec::new();
    if cfg.bench.frames > 0 {
        let scene = sample_training_scene(derive_seed(stream, u64::MAX), &cfg.scene_policy)?;
        let cube = simulate_adc_cube(&geom, &scene, cfg.n_fast, cfg.n_slow)?;
        let rdc = adc_to_rdc(&cube, cfg.range_trunc, cfg.window)?;
        let iaa = IaaEstimator {
            manifold: &a,
            config: cfg.iaa,
        };
        let net = NetworkEstimator::new(&model, &a, mode)?;
        let estimators: [&dyn SpectrumEstimator; 3] = [&dbf, &iaa, &net];
        for est in estimators {
            let mut times: Vec<f64> = (0..cfg.bench.frames)
                .map(|_| {
                    let start = Instant::now();
                    let rda = assemble_rda(&rdc, est)?;
                    std::hint::black_box(rda);
                    Ok(start.elapsed().as_secs_f64() * 1e3)
                })
                .collect::<azsr_core::Result<_>>()?;
            per_frame.push(FrameLatency {
                estimator: est.name().into(),
                frames: times.len(),
                bins_per_frame: rdc.bins(),
                mean_ms: times.iter().sum::<f64>() / times.len() as f64,
                median_ms: median(&mut times),
            });
        }
    }

    let speedup = Speedups {
        iaa_over_network: iaa_report.median_us / net_report.median_us,
        iaa_over_dbf: iaa_report.median_us / dbf_report.median_us,
        network_over_dbf: net_report.median_us / dbf_report.median_us,
    };
    let report = BenchReport {
        schema: SCHEMA_ID.into(),
        config_hash: cfg.hash(),
        toolkit_version: azsr_core::VERSION.into(),
        n_ch: a.n_ch(),
        grid_len: a.l(),
        workers: rayon::current_num_threads(),
        hardware: hardware_note(),
        model: model_name,
        per_vector: vec![dbf_report, iaa_report, net_report],
        per_frame,
        speedup,
    };

    create_dir(out)?;
    write_json(&out.join("bench.json"), &report)?;
    std::fs::write(out.join("bench.schema.json"), SCHEMA)?;
    std::fs::write(out.join("bench.csv"), to_csv(&report))?;
    Ok(report)
}

pub fn to_csv(r: &BenchReport) -> String {
    let mut s = String::from("estimator,n_ch,workers,samples,median_us,mean_us,p90_us,min_us\n");
    for v in &r.per_vector {
        s.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3}\n",
            v.estimator, v.n_ch, v.workers, v.samples, v.median_us, v.mean_us, v.p90_us, v.min_us
        ));
    }
    s
}
