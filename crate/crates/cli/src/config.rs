use std::path::{Path, PathBuf};

use azsr_core::hash::config_hash;
use azsr_core::specnet::{InferenceMode, TrainConfig};
use azsr_core::{AngularGrid, ArrayGeometry, IaaConfig, ScenePolicy, SteeringMatrix, WindowKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Array description: a preset element count or explicit spacings in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometryConfig {
    Preset { n_ch: usize },
    Custom { spacings: Vec<f64> },
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig::Preset { n_ch: 86 }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> CliResult<ArrayGeometry> {
        match self {
            GeometryConfig::Preset { n_ch } => {
                if ![10, 40, 86].contains(n_ch) {
                    return Err(CliError::validation(format!(
                        "geometry preset n_ch must be 10, 40 or 86 (got {n_ch}); use explicit spacings for other arrays"
                    )));
                }
                Ok(ArrayGeometry::ula(*n_ch)?)
            }
            GeometryConfig::Custom { spacings } => Ok(ArrayGeometry::from_spacings(spacings.clone())?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSize {
    #[default]
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub size: DatasetSize,
    pub small: usize,
    pub medium: usize,
    pub large: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            size: DatasetSize::Small,
            small: 200,
            medium: 700,
            large: 1400,
        }
    }
}

impl DatasetConfig {
    pub fn frames(&self) -> usize {
        match self.size {
            DatasetSize::Small => self.small,
            DatasetSize::Medium => self.medium,
            DatasetSize::Large => self.large,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossSelection {
    Mse,
    Snr,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// ADC cubes and scene manifest.
    pub cubes: PathBuf,
    /// Record file produced by `label`.
    pub records: PathBuf,
    /// Directory holding trained models.
    pub models: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            cubes: PathBuf::from("cubes"),
            records: PathBuf::from("labels/records.bin"),
            models: PathBuf::from("models"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportConfig {
    /// 8 or 16.
    pub pgm_bits: u8,
    /// Also write dB-scale PGMs floored at this many dB below the peak; 0 disables.
    pub db_range: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            pgm_bits: 8,
            db_range: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub vectors: usize,
    pub warmup: usize,
    /// Whole-frame passes through `assemble_rda` per estimator; 0 skips.
    pub frames: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            vectors: 1000,
            warmup: 50,
            frames: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub grid_len: usize,
    pub n_fast: usize,
    pub n_slow: usize,
    pub range_trunc: usize,
    pub window: WindowKind,
    pub scene_policy: ScenePolicy,
    pub iaa: IaaConfig,
    pub train: TrainConfig,
    pub loss: LossSelection,
    pub inference_mode: InferenceMode,
    pub dataset: DatasetConfig,
    pub paths: PathsConfig,
    pub export: ExportConfig,
    pub bench: BenchConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            grid_len: 256,
            n_fast: 256,
            n_slow: 64,
            range_trunc: 100,
            window: WindowKind::Rectangular,
            scene_policy: ScenePolicy::default(),
            iaa: IaaConfig::default(),
            train: TrainConfig::default(),
            loss: LossSelection::Both,
            inference_mode: InferenceMode::Normalized,
            dataset: DatasetConfig::default(),
            paths: PathsConfig::default(),
            export: ExportConfig::default(),
            bench: BenchConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON config; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.paths.resolve_against(base);
        }
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        self.geometry.build()?;
        AngularGrid::new(self.grid_len)?;
        if self.n_fast == 0 || self.n_slow == 0 {
            return Err(CliError::validation("n_fast and n_slow must be positive"));
        }
        if self.range_trunc == 0 || self.range_trunc > self.n_fast {
            return Err(CliError::validation(format!(
                "range_trunc must be in 1..={} (got {})",
                self.n_fast, self.range_trunc
            )));
        }
        self.scene_policy.validate()?;
        if self.scene_policy.range_bins > self.range_trunc || self.scene_policy.doppler_bins > self.n_slow {
            return Err(CliError::validation(
                "scene_policy range_bins/doppler_bins exceed the processed cube",
            ));
        }
        if self.scene_policy.grid_len != self.grid_len {
            return Err(CliError::validation("scene_policy.grid_len must equal grid_len"));
        }
        self.iaa.validate()?;
        self.train.validate()?;
        if ![8, 16].contains(&self.export.pgm_bits) {
            return Err(CliError::validation("export.pgm_bits must be 8 or 16"));
        }
        if !(self.export.db_range >= 0.0) {
            return Err(CliError::validation("export.db_range must be >= 0"));
        }
        Ok(())
    }

    /// Fingerprint of everything except file locations.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig::default();
        config_hash(&c)
    }

    pub fn geometry(&self) -> CliResult<ArrayGeometry> {
        self.geometry.build()
    }

    pub fn manifold(&self) -> CliResult<SteeringMatrix> {
        Ok(SteeringMatrix::new(&self.geometry()?, &AngularGrid::new(self.grid_len)?))
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, base: &Path) {
        for p in [&mut self.cubes, &mut self.records, &mut self.models] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
