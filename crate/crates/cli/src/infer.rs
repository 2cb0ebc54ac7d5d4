use std::path::{Path, PathBuf};

use azsr_core::io::{load_adc_cube, save_csv, save_pgm, save_pgm_db};
use azsr_core::pipeline::{adc_to_rdc, assemble_rda, rda_to_ra};
use azsr_core::specnet::{load_model_expecting, InferenceMode, MlpModel, ModelHeader};
use azsr_core::{DbfEstimator, IaaConfig, IaaEstimator, NetworkEstimator, RaMap, SpectrumEstimator};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::{create_dir, file_stem, files_with_extension, require_exists, write_json};

#[derive(Debug, Clone, Default)]
pub struct InferOptions {
    /// Trained network; without one only the reference maps are produced.
    pub model: Option<PathBuf>,
    pub with_iaa: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub file: String,
    pub loss_kind: Option<String>,
    pub epoch: usize,
    pub config_hash: Option<String>,
    pub param_count: usize,
}

/// Sidecar written next to each map as `<estimator>/<frame>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub format: String,
    pub frame: String,
    pub estimator: String,
    pub rows: usize,
    pub cols: usize,
    pub geometry_id: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub cube_config_hash: Option<String>,
    pub argmax: [usize; 2],
    pub peak: f64,
    #[serde(default)]
    pub model: Option<ModelInfo>,
    #[serde(default)]
    pub inference_mode: Option<InferenceMode>,
    #[serde(default)]
    pub iaa: Option<IaaConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferSummary {
    pub frames: Vec<String>,
    pub estimators: Vec<String>,
}

/// Cubes to process: a single `.cube` file or every `.cube` in a directory.
fn cube_paths(input: &Path) -> CliResult<Vec<PathBuf>> {
    require_exists(input, "input")?;
    if input.is_dir() {
        let files = files_with_extension(input, "cube")?;
        if files.is_empty() {
            return Err(CliError::validation(format!("no .cube files in {}", input.display())));
        }
        Ok(files)
    } else {
        Ok(vec![input.to_path_buf()])
    }
}

/// Writes `<out>/<estimator>/<frame>.{csv,pgm,json}` (plus `_db.pgm`) for
/// DBF, the network when a model is given, and IAA on request.
pub fn run(cfg: &ExperimentConfig, input: &Path, out: &Path, opts: &InferOptions) -> CliResult<InferSummary> {
    cfg.validate()?;
    let a = cfg.manifold()?;
    let geometry_id = a.geometry().id();
    let cubes = cube_paths(input)?;

    let model: Option<(MlpModel<f32>, ModelHeader, String)> = match &opts.model {
        Some(p) => {
            require_exists(p, "model")?;
            let (m, h) = load_model_expecting(p, a.n_ch(), a.l()).map_err(|e| CliError::from(e).context(p.display()))?;
            if h.geometry_id.as_deref().is_some_and(|g| g != geometry_id) {
                return Err(CliError::validation(format!(
                    "{} was trained for a different array geometry",
                    p.display()
                )));
            }
            Some((m, h, p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()))
        }
        None => None,
    };

    let dbf = DbfEstimator { manifold: &a };
    let iaa = IaaEstimator {
        manifold: &a,
        config: cfg.iaa,
    };
    let net = match &model {
        Some((m, _, _)) => Some(NetworkEstimator::new(m, &a, cfg.inference_mode)?),
        None => None,
    };
    let mut estimators: Vec<&dyn SpectrumEstimator> = vec![&dbf];
    if let Some(n) = &net {
        estimators.push(n);
    }
    if opts.with_iaa {
        estimators.push(&iaa);
    }
    for est in &estimators {
        create_dir(&out.join(est.name()))?;
    }

    let hash = cfg.hash();
    let mut frames = Vec::new();
    for path in &cubes {
        let frame = file_stem(path);
        let (cube, header) = load_adc_cube(path).map_err(|e| CliError::from(e).context(path.display()))?;
        if header.geometry_id != geometry_id || cube.n_ch != a.n_ch() {
            return Err(CliError::validation(format!(
                "{} holds geometry {} with {} channels; the config and model describe {} with {}",
                path.display(),
                header.geometry_id,
                cube.n_ch,
                geometry_id,
                a.n_ch()
            )));
        }
        let rdc = adc_to_rdc(&cube, cfg.range_trunc, cfg.window)?;
        for est in &estimators {
            let map = rda_to_ra(&assemble_rda(&rdc, *est)?, false);
            let name = est.name();
            let is_net = name == "network";
            let meta = MapMeta {
                format: "azsr-map".into(),
                frame: frame.clone(),
                estimator: name.into(),
                rows: map.rows,
                cols: map.cols,
                geometry_id: geometry_id.clone(),
                config_hash: hash.clone(),
                toolkit_version: azsr_core::VERSION.into(),
                cube_config_hash: header.config_hash.clone(),
                argmax: argmax(&map),
                peak: map.max(),
                model: model.as_ref().filter(|_| is_net).map(|(_, h, file)| ModelInfo {
                    file: file.clone(),
                    loss_kind: h.loss_kind.clone(),
                    epoch: h.epoch,
                    config_hash: h.config_hash.clone(),
                    param_count: h.param_count,
                }),
                inference_mode: is_net.then_some(cfg.inference_mode),
                iaa: (name == "iaa").then_some(cfg.iaa),
            };
            write_map(&out.join(name), &frame, &map, &meta, cfg)?;
        }
        frames.push(frame);
    }

    Ok(InferSummary {
        frames,
        estimators: estimators.iter().map(|e| e.name().to_string()).collect(),
    })
}

fn argmax(map: &RaMap) -> [usize; 2] {
    let (r, c) = map.argmax();
    [r, c]
}

fn write_map(dir: &Path, frame: &str, map: &RaMap, meta: &MapMeta, cfg: &ExperimentConfig) -> CliResult<()> {
    save_csv(&dir.join(format!("{frame}.csv")), map)?;
    save_pgm(&dir.join(format!("{frame}.pgm")), map, cfg.export.pgm_bits)?;
    if cfg.export.db_range > 0.0 {
        save_pgm_db(&dir.join(format!("{frame}_db.pgm")), map, cfg.export.pgm_bits, cfg.export.db_range)?;
    }
    write_json(&dir.join(format!("{frame}.json")), meta)
}
