//! Command implementations behind the `mmsa` binary. Each command is a
//! plain function so the test suites can drive them directly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mmsa_core::align::dtw_accumulated;
use mmsa_core::checkpoint::{load_checkpoint, save_checkpoint};
use mmsa_core::datagen::{build_dataset, load_config, load_manifest, DatasetConfig, Scenario, Split};
use mmsa_core::lstm::lstm_forward;
use mmsa_core::trainer::{
    evaluate, load_split, run_sweep, sweep_csv, train_epochs, ExperimentConfig, Mode,
    StepDiagnostics, TrainerState,
};
use mmsa_core::Error as CoreError;

/// Command failure with its process exit code: 2 config, 3 IO, 4 checkpoint.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Checkpoint(_) => 4,
        }
    }
}

/// Sort core errors into exit-code classes; IO-ish failures map to 3,
/// checkpoint shape troubles to 4, everything else to 2.
fn classify(err: CoreError) -> CliError {
    match err {
        CoreError::Io(e) => CliError::Io(e.to_string()),
        CoreError::BadMagic | CoreError::BadRank(_) | CoreError::Truncated => {
            CliError::Io(err.to_string())
        }
        CoreError::CheckpointMismatch(m) => CliError::Checkpoint(m),
        other => CliError::Config(other.to_string()),
    }
}

/// Top-level JSON config: dataset-generation parameters plus experiment
/// parameters. Unknown keys are rejected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub dataset: DatasetConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// One seed for every stream of the run.
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.experiment.seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dataset.validate().map_err(classify)?;
        self.experiment.validate().map_err(classify)?;
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(e.to_string()))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Generate a dataset directory (tensors, manifest, stats, config echo).
pub fn cmd_gen_data(config: &Config, out: &Path) -> Result<(), CliError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;
    let records = build_dataset(&config.dataset, out).map_err(classify)?;
    println!(
        "wrote {} samples ({} train / {} test) to {}",
        records.len(),
        config.dataset.train_count,
        config.dataset.test_count,
        out.display()
    );
    Ok(())
}

fn diagnostics_lines(diag: &[StepDiagnostics]) -> Result<String, CliError> {
    let mut out = String::new();
    for d in diag {
        out.push_str(&serde_json::to_string(d).map_err(|e| CliError::Io(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

fn assignments_json(
    visual: &mmsa_core::binding::AssignmentPermutation,
    audio: &mmsa_core::binding::AssignmentPermutation,
) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "visual": visual.as_slice(),
        "audio": audio.as_slice(),
    }))
    .expect("assignment json")
}

/// Train on a generated dataset; writes periodic checkpoints, a final
/// checkpoint, a step-diagnostics stream, and the final evaluation report.
pub fn cmd_train(
    config: &Config,
    data_dir: &Path,
    out: &Path,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    config.experiment.validate().map_err(classify)?;
    let data_cfg = load_config(data_dir).map_err(classify)?;
    let records = load_manifest(data_dir).map_err(classify)?;
    let exp = &config.experiment;

    let mut state = match resume {
        None => TrainerState::init(exp, &data_cfg),
        Some(ckpt_dir) => {
            let (state, meta) = load_checkpoint(ckpt_dir).map_err(classify)?;
            let expected = TrainerState::init(exp, &data_cfg);
            if !state.visual.params.same_dims(&expected.visual.params)
                || !state.audio.params.same_dims(&expected.audio.params)
            {
                return Err(CliError::Checkpoint(format!(
                    "checkpoint dims do not match dataset/config (checkpoint epoch {})",
                    meta.epoch
                )));
            }
            state
        }
    };

    fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;
    let train_samples = load_split(data_dir, &records, Split::Train).map_err(classify)?;
    let test_samples = load_split(data_dir, &records, Split::Test).map_err(classify)?;
    if train_samples.is_empty() || test_samples.is_empty() {
        return Err(CliError::Config("dataset has an empty split".to_string()));
    }

    let config_echo = serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?;
    let mut diag_file = fs::File::create(out.join("diagnostics.jsonl"))
        .map_err(|e| CliError::Io(e.to_string()))?;

    while state.epoch < exp.epochs {
        let mut diag = Vec::new();
        let summaries = train_epochs(&mut state, &train_samples, exp, 1, &mut diag)
            .map_err(classify)?;
        diag_file
            .write_all(diagnostics_lines(&diag)?.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))?;
        for s in &summaries {
            println!(
                "epoch {:3}  loss_v {:.5}  loss_a {:.5}  skipped {}",
                s.epoch, s.mean_loss_v, s.mean_loss_a, s.skipped
            );
        }
        if let Some(every) = exp.checkpoint_every {
            if every > 0 && state.epoch % every == 0 && state.epoch < exp.epochs {
                let dir = out.join(format!("checkpoints/epoch_{:04}", state.epoch));
                save_checkpoint(&dir, &state, exp.mode, exp.seed, config_echo.clone())
                    .map_err(classify)?;
            }
        }
    }

    save_checkpoint(
        &out.join("checkpoint_final"),
        &state,
        exp.mode,
        exp.seed,
        config_echo,
    )
    .map_err(classify)?;

    let outcome = evaluate(&state, &test_samples, exp, data_cfg.base_len).map_err(classify)?;
    write_file(
        &out.join("report.json"),
        serde_json::to_string_pretty(&outcome.report)
            .map_err(|e| CliError::Io(e.to_string()))?
            .as_bytes(),
    )?;
    write_file(&out.join("report.csv"), outcome.report.to_csv().as_bytes())?;
    write_file(
        &out.join("binding.json"),
        assignments_json(&outcome.assignment_visual, &outcome.assignment_audio).as_bytes(),
    )?;
    println!(
        "final: aacc {:.4} +- {:.4}  ler_v {:.4}  ler_a {:.4}  binding {:.2}",
        outcome.report.aacc_mean,
        outcome.report.aacc_std,
        outcome.report.ler_visual_mean,
        outcome.report.ler_audio_mean,
        outcome.report.binding_consistency
    );
    Ok(())
}

fn matrix_csv(m: &mmsa_core::Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let cells: Vec<String> = m.row(r).iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Evaluate a checkpoint against a dataset's test split.
pub fn cmd_eval(
    checkpoint_dir: &Path,
    data_dir: &Path,
    out: &Path,
    dump_dtw: bool,
) -> Result<(), CliError> {
    let (state, meta) = load_checkpoint(checkpoint_dir).map_err(classify)?;
    let data_cfg = load_config(data_dir).map_err(classify)?;
    if state.visual.params.input_dim != data_cfg.glyph_height
        || state.audio.params.input_dim != data_cfg.audio_dim
        || state.visual.params.classes != data_cfg.vocab_size + 1
    {
        return Err(CliError::Checkpoint(format!(
            "checkpoint dims (visual {}x{}, audio {}x{}) do not fit dataset \
             (visual {}, audio {}, {} concepts)",
            state.visual.params.input_dim,
            state.visual.params.classes,
            state.audio.params.input_dim,
            state.audio.params.classes,
            data_cfg.glyph_height,
            data_cfg.audio_dim,
            data_cfg.vocab_size
        )));
    }

    // evaluation settings come from the config echoed into the checkpoint
    let mut exp: ExperimentConfig = serde_json::from_value(
        meta.config_echo
            .get("experiment")
            .cloned()
            .unwrap_or(serde_json::Value::Null),
    )
    .unwrap_or_default();
    exp.mode = meta.mode;
    exp.seed = meta.seed;

    let records = load_manifest(data_dir).map_err(classify)?;
    let test_samples = load_split(data_dir, &records, Split::Test).map_err(classify)?;
    if test_samples.is_empty() {
        return Err(CliError::Config("dataset has no test split".to_string()));
    }
    let outcome = evaluate(&state, &test_samples, &exp, data_cfg.base_len).map_err(classify)?;

    write_file(
        &out.join("report.json"),
        serde_json::to_string_pretty(&outcome.report)
            .map_err(|e| CliError::Io(e.to_string()))?
            .as_bytes(),
    )?;
    write_file(&out.join("report.csv"), outcome.report.to_csv().as_bytes())?;
    write_file(
        &out.join("binding.json"),
        assignments_json(&outcome.assignment_visual, &outcome.assignment_audio).as_bytes(),
    )?;

    if dump_dtw {
        let ids: Vec<&str> = records
            .iter()
            .filter(|r| r.split == Split::Test)
            .take(3)
            .map(|r| r.id.as_str())
            .collect();
        for (sample, id) in test_samples.iter().zip(ids) {
            let (z_v, _) = lstm_forward(&state.visual.params, &sample.x_visual)
                .map_err(classify)?;
            let (z_a, _) = lstm_forward(&state.audio.params, &sample.x_audio)
                .map_err(classify)?;
            let (acc, path) = dtw_accumulated(&z_v, &z_a).map_err(classify)?;
            write_file(&out.join(format!("dtw/{id}_matrix.csv")), matrix_csv(&acc).as_bytes())?;
            let mut path_csv = String::from("t_visual,t_audio\n");
            for &(a, b) in path.pairs() {
                path_csv.push_str(&format!("{a},{b}\n"));
            }
            write_file(&out.join(format!("dtw/{id}_path.csv")), path_csv.as_bytes())?;
        }
    }
    println!(
        "eval: aacc {:.4} +- {:.4}  ler_v {:.4}  ler_a {:.4}",
        outcome.report.aacc_mean,
        outcome.report.aacc_std,
        outcome.report.ler_visual_mean,
        outcome.report.ler_audio_mean
    );
    Ok(())
}

/// Train-and-evaluate curves over missing-element counts; emits
/// `curves.csv` under `out`.
pub fn cmd_sweep(
    config: &Config,
    scenario: Scenario,
    missing: &[usize],
    out: &Path,
) -> Result<(), CliError> {
    config.experiment.validate().map_err(classify)?;
    if missing.is_empty() {
        return Err(CliError::Config("no missing counts given".to_string()));
    }
    fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;
    let points = run_sweep(&config.dataset, &config.experiment, scenario, missing, out)
        .map_err(classify)?;
    let csv = sweep_csv(&points);
    write_file(&out.join("curves.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

/// The mode values accepted on the command line.
pub fn parse_mode(s: &str) -> Result<Mode, CliError> {
    match s {
        "baseline_ctc" => Ok(Mode::BaselineCtc),
        "original" => Ok(Mode::Original),
        "pooled" => Ok(Mode::Pooled),
        other => Err(CliError::Config(format!(
            "mode: unknown value `{other}`, expected baseline_ctc, original or pooled"
        ))),
    }
}

/// The scenario values accepted on the command line.
pub fn parse_scenario(s: &str) -> Result<Scenario, CliError> {
    match s {
        "both" => Ok(Scenario::Both),
        "visual_full" => Ok(Scenario::VisualFull),
        "audio_full" => Ok(Scenario::AudioFull),
        other => Err(CliError::Config(format!(
            "scenario: unknown value `{other}`, expected both, visual_full or audio_full"
        ))),
    }
}
