use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use azsr_core::io::load_csv;
use azsr_core::metrics::format_table;
use azsr_core::{MetricReport, RaMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::infer::MapMeta;
use crate::{create_dir, file_stem, files_with_extension, read_json, require_exists, write_json};

pub const TABLE: &str = "metrics_table.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub config_hash: String,
    pub toolkit_version: String,
    pub truth: String,
    pub reports: Vec<MetricReport>,
}

fn frames_in(dir: &Path) -> CliResult<BTreeSet<String>> {
    require_exists(dir, "map directory")?;
    Ok(files_with_extension(dir, "csv")?.iter().map(|p| file_stem(p)).collect())
}

fn dir_label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn load_pair(truth: &Path, pred: &Path, frame: &str) -> CliResult<(String, RaMap, RaMap)> {
    let tm: MapMeta = read_json(&truth.join(format!("{frame}.json")))?;
    let pm: MapMeta = read_json(&pred.join(format!("{frame}.json")))?;
    if tm.geometry_id != pm.geometry_id {
        return Err(CliError::validation(format!(
            "frame {frame}: truth geometry {} differs from prediction geometry {}",
            tm.geometry_id, pm.geometry_id
        )));
    }
    let load = |dir: &Path| -> CliResult<RaMap> {
        let p = dir.join(format!("{frame}.csv"));
        load_csv(&p).map_err(|e| CliError::from(e).context(p.display()))
    };
    let (t, p) = (load(truth)?, load(pred)?);
    if (t.rows, t.cols) != (p.rows, p.cols) {
        return Err(CliError::validation(format!(
            "frame {frame}: truth is {}x{} but prediction is {}x{}",
            t.rows, t.cols, p.rows, p.cols
        )));
    }
    Ok((frame.to_string(), t, p))
}

/// Compares every prediction directory against `truth`, frame by frame.
pub fn run(cfg: &ExperimentConfig, truth: &Path, preds: &[PathBuf], out: &Path) -> CliResult<EvaluationOutput> {
    if preds.is_empty() {
        return Err(CliError::validation("at least one prediction directory is required"));
    }
    let truth_frames = frames_in(truth)?;
    if truth_frames.is_empty() {
        return Err(CliError::runtime(format!("no maps in {}", truth.display())));
    }

    let mut reports = Vec::new();
    for pred in preds {
        let pred_frames = frames_in(pred)?;
        let missing: Vec<_> = truth_frames.difference(&pred_frames).cloned().collect();
        let extra: Vec<_> = pred_frames.difference(&truth_frames).cloned().collect();
        if !missing.is_empty() || !extra.is_empty() {
            let mut msg = format!("unpaired frames between {} and {}", truth.display(), pred.display());
            if !missing.is_empty() {
                msg.push_str(&format!("; missing predictions: {}", missing.join(", ")));
            }
            if !extra.is_empty() {
                msg.push_str(&format!("; predictions without truth: {}", extra.join(", ")));
            }
            return Err(CliError::runtime(msg));
        }
        let pairs = truth_frames
            .par_iter()
            .map(|f| load_pair(truth, pred, f))
            .collect::<CliResult<Vec<_>>>()?;
        let label = dir_label(pred);
        let report = MetricReport::evaluate(&label, &pairs).map_err(|e| CliError::from(e).context(&label))?;
        reports.push(report);
    }

    create_dir(out)?;
    for r in &reports {
        fs::write(out.join(format!("metrics_{}.csv", r.label)), r.to_csv())?;
    }
    let table = format_table(&reports);
    fs::write(out.join(TABLE), &table)?;
    let output = EvaluationOutput {
        config_hash: cfg.hash(),
        toolkit_version: azsr_core::VERSION.into(),
        truth: dir_label(truth),
        reports,
    };
    write_json(&out.join("metrics.json"), &output)?;
    print!("{table}");
    Ok(output)
}
