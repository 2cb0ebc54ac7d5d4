use std::path::Path;

use azsr_core::io::{save_adc_cube, CubeHeader};
use azsr_core::scene::{derive_seed, sample_training_scene, simulate_adc_cube};
use azsr_core::SceneSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::{create_dir, frame_name, streams, write_json};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame: String,
    pub file: String,
    pub seed: u64,
    pub scene: SceneSpec,
}

/// Ground truth for a simulated capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub geometry_id: String,
    pub n_ch: usize,
    pub n_fast: usize,
    pub n_slow: usize,
    pub frames: Vec<FrameEntry>,
}

/// Writes `dataset.frames()` ADC cubes and the manifest into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> CliResult<SceneManifest> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let geometry_id = geom.id();
    let hash = cfg.hash();
    create_dir(out)?;
    let stream = derive_seed(cfg.seed, streams::SIMULATE);

    let frames = (0..cfg.dataset.frames())
        .into_par_iter()
        .map(|i| -> CliResult<FrameEntry> {
            let seed = derive_seed(stream, i as u64);
            let scene = sample_training_scene(seed, &cfg.scene_policy)?;
            let cube = simulate_adc_cube(&geom, &scene, cfg.n_fast, cfg.n_slow)?;
            let frame = frame_name(i);
            let file = format!("{frame}.cube");
            let header = CubeHeader::adc(&cube, &geometry_id).with_config_hash(&hash);
            save_adc_cube(&out.join(&file), &cube, &header)?;
            Ok(FrameEntry {
                frame,
                file,
                seed,
                scene,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let manifest = SceneManifest {
        format: "azsr-scenes".into(),
        config_hash: hash,
        toolkit_version: azsr_core::VERSION.into(),
        geometry_id,
        n_ch: geom.n_ch(),
        n_fast: cfg.n_fast,
        n_slow: cfg.n_slow,
        frames,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
