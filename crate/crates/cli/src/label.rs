use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use azsr_core::hash::config_hash;
use azsr_core::iaa::iaa_batch;
use azsr_core::io::load_adc_cube;
use azsr_core::pipeline::{adc_to_rdc, extract_beam_vector};
use azsr_core::specnet::{encode_record, make_record, RecordHeader};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::simulate::{SceneManifest, MANIFEST};
use crate::{create_dir, read_json, require_exists, write_json};

pub const RECORDS: &str = "records.bin";
pub const REPORT: &str = "label_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinFailure {
    pub frame: String,
    pub range: usize,
    pub doppler: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub config_hash: String,
    pub toolkit_version: String,
    pub geometry_id: String,
    pub frames: usize,
    pub candidate_bins: usize,
    pub records: usize,
    /// Bins whose beam vector is identically zero.
    pub dropped_zero_alpha: usize,
    pub failures: Vec<BinFailure>,
}

/// Labels every range-Doppler bin of every cube listed in `cubes/manifest.json`.
///
/// Bins where IAA fails are skipped and listed in the report; the command
/// then fails with a runtime error after writing everything else.
pub fn run(cfg: &ExperimentConfig, cubes: &Path, out: &Path) -> CliResult<LabelReport> {
    cfg.validate()?;
    let manifest_path = cubes.join(MANIFEST);
    require_exists(&manifest_path, "scene manifest")?;
    let manifest: SceneManifest = read_json(&manifest_path)?;
    let a = cfg.manifold()?;
    let geometry_id = a.geometry().id();
    if manifest.geometry_id != geometry_id {
        return Err(CliError::validation(format!(
            "cubes were simulated for geometry {} but the config describes {}",
            manifest.geometry_id, geometry_id
        )));
    }
    create_dir(out)?;

    let payload_path = out.join(format!("{RECORDS}.partial"));
    let mut payload = BufWriter::new(File::create(&payload_path)?);
    let mut report = LabelReport {
        config_hash: cfg.hash(),
        toolkit_version: azsr_core::VERSION.into(),
        geometry_id: geometry_id.clone(),
        frames: manifest.frames.len(),
        candidate_bins: 0,
        records: 0,
        dropped_zero_alpha: 0,
        failures: Vec::new(),
    };
    let mut buf = Vec::new();

    for entry in &manifest.frames {
        let path = cubes.join(&entry.file);
        let (cube, header) = load_adc_cube(&path).map_err(|e| CliError::from(e).context(path.display()))?;
        if header.geometry_id != geometry_id {
            return Err(CliError::validation(format!("{}: geometry mismatch", path.display())));
        }
        let rdc = adc_to_rdc(&cube, cfg.range_trunc, cfg.window)?;
        let mut coords = Vec::with_capacity(rdc.bins());
        let mut vectors: Vec<&[Complex64]> = Vec::with_capacity(rdc.bins());
        for r in 0..rdc.n_range {
            for d in 0..rdc.n_doppler {
                coords.push((r, d));
                vectors.push(extract_beam_vector(&rdc, r, d)?);
            }
        }
        report.candidate_bins += vectors.len();
        let results = iaa_batch(&a, &vectors, &cfg.iaa);
        for ((y, res), &(range, doppler)) in vectors.iter().zip(results).zip(&coords) {
            let record = res.and_then(|iaa| make_record(&a, y, &iaa));
            match record {
                Ok(Some(rec)) => {
                    buf.clear();
                    encode_record(&mut buf, &rec, a.n_ch(), a.l())?;
                    payload.write_all(&buf)?;
                    report.records += 1;
                }
                Ok(None) => report.dropped_zero_alpha += 1,
                Err(e) => report.failures.push(BinFailure {
                    frame: entry.frame.clone(),
                    range,
                    doppler,
                    error: e.to_string(),
                }),
            }
        }
    }
    payload.flush()?;
    drop(payload);

    let mut header = RecordHeader::new(a.n_ch(), a.l(), report.records, &geometry_id, &config_hash(&cfg.iaa));
    header.config_hash = Some(report.config_hash.clone());
    assemble(&out.join(RECORDS), &header, &payload_path)?;
    write_json(&out.join(REPORT), &report)?;

    if !report.failures.is_empty() {
        let first = &report.failures[0];
        return Err(CliError::runtime(format!(
            "IAA failed on {} bins (first: {} range {} doppler {}: {}); see {}",
            report.failures.len(),
            first.frame,
            first.range,
            first.doppler,
            first.error,
            out.join(REPORT).display()
        )));
    }
    Ok(report)
}

fn assemble(dest: &Path, header: &RecordHeader, payload: &PathBuf) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(dest)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    std::io::copy(&mut File::open(payload)?, &mut w)?;
    w.flush()?;
    fs::remove_file(payload)?;
    Ok(())
}
