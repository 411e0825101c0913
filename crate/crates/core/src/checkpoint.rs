//! Checkpoint layout: `params_visual/` and `params_audio/` hold one MMT1
//! tensor per named weight plus `vel_*` velocity buffers, the concept
//! vector banks sit next to them, and `meta.json` records dimensions,
//! epoch, seed, and a config echo.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binding::ConceptVectors;
use crate::error::{Error, Result};
use crate::lstm::LstmParams;
use crate::mmt;
use crate::trainer::{Mode, ModalityState, TrainerState};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModalityDims {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub seed: u64,
    pub mode: Mode,
    pub visual: ModalityDims,
    pub audio: ModalityDims,
    pub config_echo: serde_json::Value,
}

fn save_modality(dir: &Path, state: &ModalityState) -> Result<()> {
    fs::create_dir_all(dir)?;
    let names = state.params.tensor_names();
    for (name, tensor) in names.iter().zip(state.params.tensors()) {
        mmt::write_tensor(&dir.join(format!("{name}.mmt")), tensor)?;
    }
    for (name, tensor) in names.iter().zip(state.velocity.tensors()) {
        mmt::write_tensor(&dir.join(format!("vel_{name}.mmt")), tensor)?;
    }
    Ok(())
}

fn load_modality(dir: &Path, dims: &ModalityDims) -> Result<ModalityState> {
    let mut params = LstmParams::zeros(dims.input_dim, dims.hidden, dims.classes);
    let mut velocity = LstmParams::zeros(dims.input_dim, dims.hidden, dims.classes);
    let names = params.tensor_names();
    for (name, slot) in names.iter().zip(params.tensors_mut()) {
        let path = dir.join(format!("{name}.mmt"));
        let tensor = mmt::read_tensor(&path)
            .map_err(|e| Error::CheckpointMismatch(format!("{}: {e}", path.display())))?;
        if !tensor.same_shape(slot) {
            return Err(Error::CheckpointMismatch(format!(
                "{name}: stored shape {:?}, expected {:?}",
                tensor.shape(),
                slot.shape()
            )));
        }
        *slot = tensor;
    }
    for (name, slot) in names.iter().zip(velocity.tensors_mut()) {
        let path = dir.join(format!("vel_{name}.mmt"));
        let tensor = mmt::read_tensor(&path)
            .map_err(|e| Error::CheckpointMismatch(format!("{}: {e}", path.display())))?;
        if !tensor.same_shape(slot) {
            return Err(Error::CheckpointMismatch(format!(
                "vel_{name}: stored shape {:?}, expected {:?}",
                tensor.shape(),
                slot.shape()
            )));
        }
        *slot = tensor;
    }
    Ok(ModalityState {
        params,
        velocity,
        vectors: ConceptVectors::new(dims.classes - 1),
        last_assignment: None,
    })
}

pub fn save_checkpoint(
    dir: &Path,
    state: &TrainerState,
    mode: Mode,
    seed: u64,
    config_echo: serde_json::Value,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_modality(&dir.join("params_visual"), &state.visual)?;
    save_modality(&dir.join("params_audio"), &state.audio)?;
    mmt::write_tensor(&dir.join("concepts_visual.mmt"), state.visual.vectors.matrix())?;
    mmt::write_tensor(&dir.join("concepts_audio.mmt"), state.audio.vectors.matrix())?;
    let meta = CheckpointMeta {
        epoch: state.epoch,
        seed,
        mode,
        visual: ModalityDims {
            input_dim: state.visual.params.input_dim,
            hidden: state.visual.params.hidden,
            classes: state.visual.params.classes,
        },
        audio: ModalityDims {
            input_dim: state.audio.params.input_dim,
            hidden: state.audio.params.hidden,
            classes: state.audio.params.classes,
        },
        config_echo,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(TrainerState, CheckpointMeta)> {
    let meta_text = fs::read_to_string(dir.join("meta.json"))
        .map_err(|e| Error::CheckpointMismatch(format!("meta.json: {e}")))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::CheckpointMismatch(format!("meta.json: {e}")))?;
    if meta.visual.classes != meta.audio.classes {
        return Err(Error::CheckpointMismatch(
            "modalities disagree on class count".to_string(),
        ));
    }
    let mut visual = load_modality(&dir.join("params_visual"), &meta.visual)?;
    let mut audio = load_modality(&dir.join("params_audio"), &meta.audio)?;
    let concepts_v = mmt::read_tensor(&dir.join("concepts_visual.mmt"))
        .map_err(|e| Error::CheckpointMismatch(format!("concepts_visual.mmt: {e}")))?;
    let concepts_a = mmt::read_tensor(&dir.join("concepts_audio.mmt"))
        .map_err(|e| Error::CheckpointMismatch(format!("concepts_audio.mmt: {e}")))?;
    visual.vectors = ConceptVectors::from_matrix(concepts_v)
        .map_err(|e| Error::CheckpointMismatch(format!("concepts_visual.mmt: {e}")))?;
    audio.vectors = ConceptVectors::from_matrix(concepts_a)
        .map_err(|e| Error::CheckpointMismatch(format!("concepts_audio.mmt: {e}")))?;
    if visual.vectors.concepts() != meta.visual.classes - 1 {
        return Err(Error::CheckpointMismatch(
            "concept vectors disagree with class count".to_string(),
        ));
    }
    let epoch = meta.epoch;
    Ok((
        TrainerState {
            visual,
            audio,
            epoch,
        },
        meta,
    ))
}
