use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use azsr_core::hash::config_hash;
use azsr_core::scene::derive_seed;
use azsr_core::specnet::{
    load_checkpoint, read_records, save_checkpoint, save_model, train_from, Dataset, EpochLog, LossKind, MlpModel,
    ModelHeader, TrainConfig, TrainState,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, LossSelection};
use crate::error::{CliError, CliResult};
use crate::{create_dir, require_exists, streams, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub loss_kind: LossKind,
    pub model: PathBuf,
    pub loss_curve: PathBuf,
    pub epochs: usize,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub toolkit_version: String,
    pub records: usize,
    pub param_count: usize,
    pub models: Vec<TrainedModel>,
}

pub fn model_file(kind: LossKind) -> String {
    format!("model_{}.bin", kind.name())
}

pub fn checkpoint_file(kind: LossKind) -> String {
    format!("checkpoint_{}.bin", kind.name())
}

pub fn loss_file(kind: LossKind) -> String {
    format!("loss_{}.csv", kind.name())
}

/// Seeded training configuration for one loss kind.
pub fn train_config(cfg: &ExperimentConfig, kind: LossKind) -> TrainConfig {
    TrainConfig {
        loss_kind: kind,
        seed: derive_seed(cfg.seed, streams::TRAIN),
        ..cfg.train.clone()
    }
}

pub fn load_dataset(cfg: &ExperimentConfig, records: &Path) -> CliResult<Dataset> {
    require_exists(records, "record file")?;
    let file = File::open(records)?;
    let (header, recs) =
        read_records(BufReader::new(file)).map_err(|e| CliError::from(e).context(records.display()))?;
    let a = cfg.manifold()?;
    if header.n_ch != a.n_ch() || header.grid_len != a.l() {
        return Err(CliError::validation(format!(
            "records have n_ch {}, L {} but the config describes n_ch {}, L {}",
            header.n_ch,
            header.grid_len,
            a.n_ch(),
            a.l()
        )));
    }
    if header.geometry_id != a.geometry().id() {
        return Err(CliError::validation("records were labeled for a different array geometry"));
    }
    if recs.is_empty() {
        return Err(CliError::runtime(format!("{} holds no records", records.display())));
    }
    Ok(Dataset::new(recs)?)
}

/// Trains one model per requested loss kind, or continues one checkpoint.
pub fn run(cfg: &ExperimentConfig, records: &Path, out: &Path, resume: Option<&Path>) -> CliResult<TrainSummary> {
    cfg.validate()?;
    let dataset = load_dataset(cfg, records)?;
    create_dir(out)?;

    let mut models = Vec::new();
    let mut param_count = 0;
    match resume {
        Some(ckpt) => {
            require_exists(ckpt, "checkpoint")?;
            let (state, header) = load_checkpoint(ckpt).map_err(|e| CliError::from(e).context(ckpt.display()))?;
            let kind = match header.loss_kind.as_deref() {
                Some("mse") => LossKind::Mse,
                Some("snr_weighted") => LossKind::SnrWeighted,
                other => {
                    return Err(CliError::validation(format!("checkpoint has unknown loss kind {other:?}")));
                }
            };
            param_count = state.model.param_count();
            models.push(train_one(cfg, &dataset, out, kind, state)?);
        }
        None => {
            let kinds: &[LossKind] = match cfg.loss {
                LossSelection::Mse => &[LossKind::Mse],
                LossSelection::Snr => &[LossKind::SnrWeighted],
                LossSelection::Both => &[LossKind::Mse, LossKind::SnrWeighted],
            };
            for &kind in kinds {
                let tcfg = train_config(cfg, kind);
                let model = MlpModel::<f32>::new(dataset.n_ch, dataset.l, tcfg.seed);
                param_count = model.param_count();
                models.push(train_one(cfg, &dataset, out, kind, TrainState::fresh(model, &tcfg))?);
            }
        }
    }

    let summary = TrainSummary {
        config_hash: cfg.hash(),
        toolkit_version: azsr_core::VERSION.into(),
        records: dataset.len(),
        param_count,
        models,
    };
    write_json(&out.join("train_summary.json"), &summary)?;
    Ok(summary)
}

fn train_one(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    out: &Path,
    kind: LossKind,
    state: TrainState<f32>,
) -> CliResult<TrainedModel> {
    if state.model.n_ch() != dataset.n_ch || state.model.grid_len() != dataset.l {
        return Err(CliError::validation(format!(
            "model expects n_ch {}, L {} but records have n_ch {}, L {}",
            state.model.n_ch(),
            state.model.grid_len(),
            dataset.n_ch,
            dataset.l
        )));
    }
    let tcfg = train_config(cfg, kind);
    let geometry_id = cfg.geometry()?.id();
    let header_for = |state: &TrainState<f32>| {
        let mut h = ModelHeader::for_model(&state.model);
        h.train_config_hash = Some(config_hash(&tcfg));
        h.loss_kind = Some(kind.name().into());
        h.geometry_id = Some(geometry_id.clone());
        h.config_hash = Some(cfg.hash());
        h.epoch = state.epochs_done;
        h
    };

    let curve_path = out.join(loss_file(kind));
    let mut curve = previous_curve(&curve_path, state.epochs_done)?;
    let ckpt_path = out.join(checkpoint_file(kind));
    let every = tcfg.checkpoint_every;
    let mut on_epoch = |s: &TrainState<f32>, e: &EpochLog| -> azsr_core::Result<()> {
        eprintln!("[{}] epoch {} loss {:.6}", kind.name(), e.epoch, e.train_loss);
        if every > 0 && e.epoch.is_multiple_of(every) {
            save_checkpoint(&ckpt_path, s, &header_for(s))?;
        }
        Ok(())
    };
    let (state, log) = train_from(state, dataset, &tcfg, &mut on_epoch)?;
    curve.extend(log);

    let model_path = out.join(model_file(kind));
    save_model(&model_path, &state.model, &header_for(&state))?;
    if every > 0 {
        save_checkpoint(&ckpt_path, &state, &header_for(&state))?;
    }
    fs::write(&curve_path, curve_csv(&curve))?;
    Ok(TrainedModel {
        loss_kind: kind,
        model: model_path,
        loss_curve: curve_path,
        epochs: state.epochs_done,
        final_loss: curve.last().map(|e| e.train_loss),
    })
}

pub fn curve_csv(curve: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_loss\n");
    for e in curve {
        s.push_str(&format!("{},{:?}\n", e.epoch, e.train_loss));
    }
    s
}

/// Rows of an existing loss curve up to `epochs_done`, for resumed runs.
fn previous_curve(path: &Path, epochs_done: usize) -> CliResult<Vec<EpochLog>> {
    if epochs_done == 0 || !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let parsed = line.split_once(',').and_then(|(e, l)| Some((e.parse().ok()?, l.parse().ok()?)));
        let Some((epoch, train_loss)) = parsed else {
            return Err(CliError::runtime(format!("malformed loss curve row in {}: {line}", path.display())));
        };
        if epoch <= epochs_done {
            rows.push(EpochLog { epoch, train_loss });
        }
    }
    Ok(rows)
}
