//! Training orchestration: the per-sample step across both modalities in
//! three modes, epoch loops, evaluation with a frozen global binding, and
//! the missing-element sweeps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::{dtw, warp_targets, WarpDirection};
use crate::binding::{
    concept_evidence, relabel_transcript, row_column_elimination, update_concept_vectors,
    AssignmentPermutation, ConceptVectors,
};
use crate::ctc::{best_path_decode, ctc_delta, ctc_lattice, ctc_target, min_frames};
use crate::datagen::{
    build_dataset, load_manifest, DatasetConfig, MultimodalSample, SampleRecord, Scenario, Split,
};
use crate::error::{Error, Result};
use crate::fusion::{multimodal_delta, FusionMode, SharedChannelMask};
use crate::lstm::{
    apply_momentum_sgd, init_params, lstm_backward, lstm_forward, LstmParams, TrainConfig,
};
use crate::matrix::Matrix;
use crate::metrics::{
    association_accuracy, binding_consistency, label_error_rate, mean_std, AssociationSample,
    EvalReport, MissingBucket,
};
use crate::rng::Rng;

/// Which training target each modality receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Independent CTC training with a fixed identity coding scheme.
    BaselineCtc,
    /// Each modality trains on the other's warped target stream.
    Original,
    /// Max-pooled combination of own and warped targets on shared channels.
    Pooled,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::BaselineCtc => "baseline_ctc",
            Mode::Original => "original",
            Mode::Pooled => "pooled",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub train: TrainConfig,
    pub epochs: usize,
    pub seed: u64,
    pub eval_resamples: usize,
    pub eval_subset: usize,
    /// Sequences used to freeze the evaluation-time binding.
    pub calibration_sequences: usize,
    /// Checkpoint cadence in epochs; the final state is always written.
    pub checkpoint_every: Option<usize>,
    /// Epochs per sweep point; defaults to `epochs`.
    pub sweep_epochs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Pooled,
            train: TrainConfig::default(),
            epochs: 10,
            seed: 7,
            eval_resamples: 5,
            eval_subset: 300,
            calibration_sequences: 200,
            checkpoint_every: None,
            sweep_epochs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.eval_resamples == 0 || self.eval_subset == 0 {
            return Err(Error::Config(
                "eval_resamples and eval_subset must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Everything one modality learns.
#[derive(Clone, Debug)]
pub struct ModalityState {
    pub params: LstmParams,
    pub velocity: LstmParams,
    pub vectors: ConceptVectors,
    pub last_assignment: Option<AssignmentPermutation>,
}

impl ModalityState {
    fn new(rng: &mut Rng, input_dim: usize, hidden: usize, concepts: usize) -> Self {
        let classes = concepts + 1;
        ModalityState {
            params: init_params(rng, input_dim, hidden, classes),
            velocity: LstmParams::zeros(input_dim, hidden, classes),
            vectors: ConceptVectors::new(concepts),
            last_assignment: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainerState {
    pub visual: ModalityState,
    pub audio: ModalityState,
    pub epoch: usize,
}

impl TrainerState {
    pub fn init(exp: &ExperimentConfig, data: &DatasetConfig) -> Self {
        let root = Rng::new(exp.seed);
        let mut rng_v = root.derive("visual_init");
        let mut rng_a = root.derive("audio_init");
        TrainerState {
            visual: ModalityState::new(
                &mut rng_v,
                data.glyph_height,
                exp.train.hidden_visual,
                data.vocab_size,
            ),
            audio: ModalityState::new(
                &mut rng_a,
                data.audio_dim,
                exp.train.hidden_audio,
                data.vocab_size,
            ),
            epoch: 0,
        }
    }

    pub fn concepts(&self) -> usize {
        self.visual.vectors.concepts()
    }
}

/// One diagnostics line per training step.
#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub mode: Mode,
    pub loss_v: f64,
    pub loss_a: f64,
    pub assignment_churn_v: f64,
    pub assignment_churn_a: f64,
}

fn mean_squared(delta: &Matrix) -> f64 {
    let n = delta.rows().max(1);
    delta.data().iter().map(|v| v * v).sum::<f64>() / n as f64
}

fn churn(previous: &Option<AssignmentPermutation>, current: &AssignmentPermutation) -> f64 {
    match previous {
        None => 0.0,
        Some(prev) => {
            let changed = (0..current.len())
                .filter(|&i| prev.channel_of(i) != current.channel_of(i))
                .count();
            changed as f64 / current.len().max(1) as f64
        }
    }
}

/// Execute one online training step on one sample. Returns `None` when the
/// sample is skipped because a CTC labeling does not fit its frame count.
pub fn train_step(
    state: &mut TrainerState,
    sample: &MultimodalSample,
    exp: &ExperimentConfig,
) -> Result<Option<(f64, f64, f64, f64)>> {
    let concepts = state.concepts();
    let classes = concepts + 1;
    let cfg = &exp.train;

    let (z_v, cache_v) = lstm_forward(&state.visual.params, &sample.x_visual)?;
    let (z_a, cache_a) = lstm_forward(&state.audio.params, &sample.x_audio)?;

    let (assign_v, assign_a) = if exp.mode == Mode::BaselineCtc {
        (
            AssignmentPermutation::identity(concepts),
            AssignmentPermutation::identity(concepts),
        )
    } else {
        let ev_v = concept_evidence(&z_v, &state.visual.vectors)?;
        let ev_a = concept_evidence(&z_a, &state.audio.vectors)?;
        (
            row_column_elimination(ev_v.scores()),
            row_column_elimination(ev_a.scores()),
        )
    };

    let labels_v = relabel_transcript(&sample.transcript_visual, &assign_v)?;
    let labels_a = relabel_transcript(&sample.transcript_audio, &assign_a)?;
    if sample.x_visual.rows() < min_frames(&labels_v)
        || sample.x_audio.rows() < min_frames(&labels_a)
    {
        return Ok(None);
    }

    let lat_v = ctc_lattice(&z_v, &labels_v)?;
    let y_v = ctc_target(&lat_v, &z_v)?;
    let lat_a = ctc_lattice(&z_a, &labels_a)?;
    let y_a = ctc_target(&lat_a, &z_a)?;

    let (delta_v, delta_a) = match exp.mode {
        Mode::BaselineCtc => (ctc_delta(&z_v, &y_v)?, ctc_delta(&z_a, &y_a)?),
        Mode::Original | Mode::Pooled => {
            let (_, path) = dtw(&z_v, &z_a)?;
            let warped_to_v =
                warp_targets(&y_a, &path, z_v.rows(), WarpDirection::SecondToFirst)?;
            let warped_to_a =
                warp_targets(&y_v, &path, z_a.rows(), WarpDirection::FirstToSecond)?;
            if exp.mode == Mode::Original {
                let mask = SharedChannelMask::all_shared(classes);
                (
                    multimodal_delta(&z_v, &y_v, &warped_to_v, &mask, FusionMode::Original)?,
                    multimodal_delta(&z_a, &y_a, &warped_to_a, &mask, FusionMode::Original)?,
                )
            } else {
                let mask_v =
                    SharedChannelMask::from_shared_concepts(&sample.shared, &assign_v, classes)?;
                let mask_a =
                    SharedChannelMask::from_shared_concepts(&sample.shared, &assign_a, classes)?;
                (
                    multimodal_delta(&z_v, &y_v, &warped_to_v, &mask_v, FusionMode::Pooled)?,
                    multimodal_delta(&z_a, &y_a, &warped_to_a, &mask_a, FusionMode::Pooled)?,
                )
            }
        }
    };

    let loss_v = mean_squared(&delta_v);
    let loss_a = mean_squared(&delta_a);
    let churn_v = churn(&state.visual.last_assignment, &assign_v);
    let churn_a = churn(&state.audio.last_assignment, &assign_a);

    let grads_v = lstm_backward(&state.visual.params, &cache_v, &delta_v)?;
    apply_momentum_sgd(
        &mut state.visual.params,
        &grads_v,
        &mut state.visual.velocity,
        cfg.learning_rate,
        cfg.momentum,
    )?;
    let grads_a = lstm_backward(&state.audio.params, &cache_a, &delta_a)?;
    apply_momentum_sgd(
        &mut state.audio.params,
        &grads_a,
        &mut state.audio.velocity,
        cfg.learning_rate,
        cfg.momentum,
    )?;

    if exp.mode != Mode::BaselineCtc {
        update_concept_vectors(
            &mut state.visual.vectors,
            &z_v,
            &assign_v,
            cfg.concept_learning_rate,
        )?;
        update_concept_vectors(
            &mut state.audio.vectors,
            &z_a,
            &assign_a,
            cfg.concept_learning_rate,
        )?;
    }
    state.visual.last_assignment = Some(assign_v);
    state.audio.last_assignment = Some(assign_a);

    Ok(Some((loss_v, loss_a, churn_v, churn_a)))
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_loss_v: f64,
    pub mean_loss_a: f64,
    pub skipped: usize,
}

/// Run `epochs_to_run` epochs over the samples in a per-epoch shuffled
/// order derived from (seed, epoch); diagnostics accumulate into `diag`.
pub fn train_epochs(
    state: &mut TrainerState,
    samples: &[MultimodalSample],
    exp: &ExperimentConfig,
    epochs_to_run: usize,
    diag: &mut Vec<StepDiagnostics>,
) -> Result<Vec<EpochSummary>> {
    let shuffle_root = Rng::new(exp.seed).derive("shuffle");
    let mut summaries = Vec::with_capacity(epochs_to_run);
    for _ in 0..epochs_to_run {
        let epoch = state.epoch;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut rng = shuffle_root.derive_index(epoch as u64);
        for i in (1..order.len()).rev() {
            let j = rng.below(i + 1);
            order.swap(i, j);
        }
        let mut sum_v = 0.0;
        let mut sum_a = 0.0;
        let mut counted = 0usize;
        let mut skipped = 0usize;
        for (pos, &idx) in order.iter().enumerate() {
            let step = epoch * samples.len() + pos;
            match train_step(state, &samples[idx], exp)? {
                Some((loss_v, loss_a, churn_v, churn_a)) => {
                    sum_v += loss_v;
                    sum_a += loss_a;
                    counted += 1;
                    diag.push(StepDiagnostics {
                        step,
                        mode: exp.mode,
                        loss_v,
                        loss_a,
                        assignment_churn_v: churn_v,
                        assignment_churn_a: churn_a,
                    });
                }
                None => {
                    skipped += 1;
                    eprintln!("warning: skipping sample {idx}: labeling does not fit frames");
                }
            }
        }
        summaries.push(EpochSummary {
            epoch,
            mean_loss_v: sum_v / counted.max(1) as f64,
            mean_loss_a: sum_a / counted.max(1) as f64,
            skipped,
        });
        state.epoch += 1;
    }
    Ok(summaries)
}

/// Evaluation output: the report plus the frozen global assignments.
#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub assignment_visual: AssignmentPermutation,
    pub assignment_audio: AssignmentPermutation,
}

/// Freeze one global assignment per modality from evidence averaged over a
/// calibration batch.
fn calibration_assignments(
    state: &TrainerState,
    samples: &[MultimodalSample],
    count: usize,
) -> Result<(AssignmentPermutation, AssignmentPermutation)> {
    let concepts = state.concepts();
    let n = count.min(samples.len()).max(1);
    let mut acc_v = Matrix::zeros(concepts, concepts);
    let mut acc_a = Matrix::zeros(concepts, concepts);
    for sample in samples.iter().take(n) {
        let (z_v, _) = lstm_forward(&state.visual.params, &sample.x_visual)?;
        let (z_a, _) = lstm_forward(&state.audio.params, &sample.x_audio)?;
        let ev_v = concept_evidence(&z_v, &state.visual.vectors)?;
        let ev_a = concept_evidence(&z_a, &state.audio.vectors)?;
        for (dst, src) in acc_v.data_mut().iter_mut().zip(ev_v.scores().data()) {
            *dst += src;
        }
        for (dst, src) in acc_a.data_mut().iter_mut().zip(ev_a.scores().data()) {
            *dst += src;
        }
    }
    Ok((
        row_column_elimination(&acc_v),
        row_column_elimination(&acc_a),
    ))
}

/// Resampled evaluation driven by an arbitrary per-sample decoder; the
/// decoder returns (visual, audio) outputs in concept space. Decodes are
/// computed once per distinct sample.
pub fn evaluate_with<F>(
    samples: &[MultimodalSample],
    base_len: usize,
    resamples: usize,
    subset: usize,
    seed: u64,
    mut decode: F,
) -> Result<EvalReport>
where
    F: FnMut(&MultimodalSample) -> Result<(Vec<usize>, Vec<usize>)>,
{
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluate: no samples"));
    }
    let mut cache: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    let eval_root = Rng::new(seed).derive("eval");
    let take = subset.min(samples.len());

    let mut aacc_runs = Vec::with_capacity(resamples);
    let mut ler_v_runs = Vec::with_capacity(resamples);
    let mut ler_a_runs = Vec::with_capacity(resamples);
    let mut buckets: BTreeMap<usize, (Vec<AssociationSample>, Vec<(Vec<usize>, Vec<usize>)>, Vec<(Vec<usize>, Vec<usize>)>)> =
        BTreeMap::new();

    for r in 0..resamples {
        let mut rng = eval_root.derive_index(r as u64);
        let indices = rng.choose_indices(samples.len(), take);
        let mut assoc = Vec::with_capacity(take);
        let mut pairs_v = Vec::with_capacity(take);
        let mut pairs_a = Vec::with_capacity(take);
        for &idx in &indices {
            let sample = &samples[idx];
            if !cache.contains_key(&idx) {
                cache.insert(idx, decode(sample)?);
            }
            let (out_v, out_a) = cache[&idx].clone();
            let item = AssociationSample {
                output_visual: out_v.clone(),
                output_audio: out_a.clone(),
                gt_visual: sample.transcript_visual.clone(),
                gt_audio: sample.transcript_audio.clone(),
            };
            let missing = base_len.saturating_sub(sample.transcript_visual.len())
                + base_len.saturating_sub(sample.transcript_audio.len());
            let bucket = buckets.entry(missing).or_default();
            bucket.0.push(item.clone());
            bucket
                .1
                .push((out_v.clone(), sample.transcript_visual.clone()));
            bucket.2.push((out_a.clone(), sample.transcript_audio.clone()));
            assoc.push(item);
            pairs_v.push((out_v, sample.transcript_visual.clone()));
            pairs_a.push((out_a, sample.transcript_audio.clone()));
        }
        aacc_runs.push(association_accuracy(&assoc)?);
        ler_v_runs.push(label_error_rate(&pairs_v)?);
        ler_a_runs.push(label_error_rate(&pairs_a)?);
    }

    let (aacc_mean, aacc_std) = mean_std(&aacc_runs);
    let (ler_v_mean, ler_v_std) = mean_std(&ler_v_runs);
    let (ler_a_mean, ler_a_std) = mean_std(&ler_a_runs);
    let per_missing = buckets
        .into_iter()
        .map(|(missing, (assoc, pv, pa))| {
            Ok(MissingBucket {
                missing,
                n_samples: assoc.len(),
                aacc: association_accuracy(&assoc).unwrap_or(0.0),
                ler_visual: label_error_rate(&pv)?,
                ler_audio: label_error_rate(&pa)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EvalReport {
        aacc_mean,
        aacc_std,
        ler_visual_mean: ler_v_mean,
        ler_visual_std: ler_v_std,
        ler_audio_mean: ler_a_mean,
        ler_audio_std: ler_a_std,
        binding_consistency: 0.0, // caller fills in
        n_samples: cache.len(),
        resamples,
        per_missing,
    })
}

/// Full evaluation: freeze global assignments, decode every drawn sample by
/// best-path, map channels back to concepts, and aggregate the metrics over
/// the resampled runs.
pub fn evaluate(
    state: &TrainerState,
    samples: &[MultimodalSample],
    exp: &ExperimentConfig,
    base_len: usize,
) -> Result<EvalOutcome> {
    let concepts = state.concepts();
    let (assign_v, assign_a) = if exp.mode == Mode::BaselineCtc {
        (
            AssignmentPermutation::identity(concepts),
            AssignmentPermutation::identity(concepts),
        )
    } else {
        calibration_assignments(state, samples, exp.calibration_sequences)?
    };

    let decode = |sample: &MultimodalSample| -> Result<(Vec<usize>, Vec<usize>)> {
        let (z_v, _) = lstm_forward(&state.visual.params, &sample.x_visual)?;
        let (z_a, _) = lstm_forward(&state.audio.params, &sample.x_audio)?;
        let out_v: Vec<usize> = best_path_decode(&z_v)
            .into_iter()
            .map(|ch| assign_v.concept_of(ch))
            .collect();
        let out_a: Vec<usize> = best_path_decode(&z_a)
            .into_iter()
            .map(|ch| assign_a.concept_of(ch))
            .collect();
        Ok((out_v, out_a))
    };

    let mut report = evaluate_with(
        samples,
        base_len,
        exp.eval_resamples,
        exp.eval_subset,
        exp.seed,
        decode,
    )?;
    report.binding_consistency = binding_consistency(&assign_v, &assign_a);
    Ok(EvalOutcome {
        report,
        assignment_visual: assign_v,
        assignment_audio: assign_a,
    })
}

/// One row of the sweep output.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub mode: Mode,
    pub scenario: Scenario,
    pub missing: usize,
    pub aacc_mean: f64,
    pub aacc_std: f64,
    pub ler_v: f64,
    pub ler_a: f64,
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("mode,scenario,missing,aacc_mean,aacc_std,ler_v,ler_a\n");
    for p in points {
        let scenario = match p.scenario {
            Scenario::Both => "both",
            Scenario::VisualFull => "visual_full",
            Scenario::AudioFull => "audio_full",
        };
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            p.mode.tag(),
            scenario,
            p.missing,
            p.aacc_mean,
            p.aacc_std,
            p.ler_v,
            p.ler_a
        ));
    }
    out
}

/// Train-from-scratch sweep over missing-element counts for a one-sided
/// scenario, comparing the plain cross-target mode against the pooled mode.
/// Datasets are built once per missing count under `work_dir`.
pub fn run_sweep(
    data: &DatasetConfig,
    exp: &ExperimentConfig,
    scenario: Scenario,
    missing_counts: &[usize],
    work_dir: &Path,
) -> Result<Vec<SweepPoint>> {
    if scenario == Scenario::Both {
        return Err(Error::Config(
            "sweep requires scenario visual_full or audio_full".to_string(),
        ));
    }
    for &m in missing_counts {
        if m == 0 || m >= data.base_len {
            return Err(Error::Config(format!(
                "missing count {m} out of range 1..{}",
                data.base_len
            )));
        }
    }
    let epochs = exp.sweep_epochs.unwrap_or(exp.epochs);
    let scenario_tag = match scenario {
        Scenario::Both => "both",
        Scenario::VisualFull => "visual_full",
        Scenario::AudioFull => "audio_full",
    };

    let mut points = Vec::new();
    for mode in [Mode::Original, Mode::Pooled] {
        for &missing in missing_counts {
            let mut data_cfg = data.clone();
            data_cfg.scenario = scenario;
            data_cfg.fixed_missing = Some(missing);
            let ds_dir = work_dir.join(format!("ds_{scenario_tag}_{missing}"));
            if !ds_dir.join("manifest.jsonl").exists() {
                build_dataset(&data_cfg, &ds_dir)?;
            }
            let records = load_manifest(&ds_dir)?;
            let train_samples = load_split(&ds_dir, &records, Split::Train)?;
            let test_samples = load_split(&ds_dir, &records, Split::Test)?;

            let mut run_exp = exp.clone();
            run_exp.mode = mode;
            let mut state = TrainerState::init(&run_exp, &data_cfg);
            let mut diag = Vec::new();
            train_epochs(&mut state, &train_samples, &run_exp, epochs, &mut diag)?;
            let outcome = evaluate(&state, &test_samples, &run_exp, data_cfg.base_len)?;
            points.push(SweepPoint {
                mode,
                scenario,
                missing,
                aacc_mean: outcome.report.aacc_mean,
                aacc_std: outcome.report.aacc_std,
                ler_v: outcome.report.ler_visual_mean,
                ler_a: outcome.report.ler_audio_mean,
            });
        }
    }
    Ok(points)
}

/// Load all samples of one split into memory.
pub fn load_split(
    dataset_dir: &Path,
    records: &[SampleRecord],
    split: Split,
) -> Result<Vec<MultimodalSample>> {
    records
        .iter()
        .filter(|r| r.split == split)
        .map(|r| r.load(dataset_dir))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc;

    fn tiny_data_config() -> DatasetConfig {
        DatasetConfig {
            vocab_size: 4,
            base_len: 3,
            max_drop: 1,
            train_count: 6,
            test_count: 4,
            glyph_height: 8,
            glyph_width: 4,
            audio_dim: 4,
            audio_len_min: 5,
            audio_len_max: 8,
            seed: 11,
            ..DatasetConfig::default()
        }
    }

    fn tiny_exp(mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            train: TrainConfig {
                hidden_visual: 6,
                hidden_audio: 6,
                learning_rate: 1e-3,
                momentum: 0.9,
                concept_learning_rate: 1e-3,
            },
            epochs: 1,
            seed: 5,
            eval_resamples: 2,
            eval_subset: 4,
            calibration_sequences: 4,
            ..ExperimentConfig::default()
        }
    }

    fn tiny_samples(data: &DatasetConfig) -> Vec<MultimodalSample> {
        let dir = tempfile::tempdir().unwrap();
        let records = build_dataset(data, dir.path()).unwrap();
        records
            .iter()
            .filter(|r| r.split == Split::Train)
            .map(|r| r.load(dir.path()).unwrap())
            .collect()
    }

    #[test]
    fn baseline_modalities_are_independent() {
        let data = tiny_data_config();
        let samples = tiny_samples(&data);
        let exp = tiny_exp(Mode::BaselineCtc);
        let mut state = TrainerState::init(&exp, &data);
        let audio_before = state.audio.params.clone();

        // replace the audio input with one that cannot influence visual
        // updates; train only through visual-relevant paths by checking that
        // a step leaves the other modality's params changed only by its own
        // delta. Run a full step, then rerun with different audio input and
        // confirm the visual update is identical.
        let mut state2 = state.clone();
        let mut sample2 = samples[0].clone();
        for v in sample2.x_audio.data_mut() {
            *v = -*v;
        }
        train_step(&mut state, &samples[0], &exp).unwrap().unwrap();
        train_step(&mut state2, &sample2, &exp).unwrap().unwrap();
        for (a, b) in state
            .visual
            .params
            .tensors()
            .into_iter()
            .zip(state2.visual.params.tensors())
        {
            assert_eq!(a, b);
        }
        // audio params did change from their init in both runs
        assert_ne!(
            state.audio.params.w_hz.data(),
            audio_before.w_hz.data()
        );
    }

    #[test]
    fn baseline_step_equals_manual_ctc_path() {
        let data = tiny_data_config();
        let samples = tiny_samples(&data);
        let exp = tiny_exp(Mode::BaselineCtc);
        let state0 = TrainerState::init(&exp, &data);

        // manual replication of the baseline update for the visual side
        let sample = &samples[0];
        let (z, cache) = lstm_forward(&state0.visual.params, &sample.x_visual).unwrap();
        let lat = ctc::ctc_lattice(&z, &sample.transcript_visual).unwrap();
        let y = ctc::ctc_target(&lat, &z).unwrap();
        let delta = ctc::ctc_delta(&z, &y).unwrap();
        let grads = lstm_backward(&state0.visual.params, &cache, &delta).unwrap();
        let mut manual_params = state0.visual.params.clone();
        let mut manual_vel = state0.visual.velocity.clone();
        apply_momentum_sgd(
            &mut manual_params,
            &grads,
            &mut manual_vel,
            exp.train.learning_rate,
            exp.train.momentum,
        )
        .unwrap();

        let mut state = state0.clone();
        train_step(&mut state, sample, &exp).unwrap().unwrap();
        for (a, b) in state
            .visual
            .params
            .tensors()
            .into_iter()
            .zip(manual_params.tensors())
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_learning_rates_leave_state_unchanged() {
        let data = tiny_data_config();
        let samples = tiny_samples(&data);
        let mut exp = tiny_exp(Mode::Pooled);
        // zero is rejected by validate but legal at the step level
        exp.train.learning_rate = 0.0;
        exp.train.concept_learning_rate = 1e-300; // effectively zero
        let mut state = TrainerState::init(&exp, &data);
        let before = state.clone();
        let out = train_step(&mut state, &samples[0], &exp).unwrap();
        assert!(out.is_some());
        for (a, b) in state
            .visual
            .params
            .tensors()
            .into_iter()
            .zip(before.visual.params.tensors())
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pooled_step_runs_with_identical_transcripts() {
        // identical transcripts give a shared set covering every concept in
        // them; the mask itself is checked in the fusion module, here we
        // confirm the step runs and both modalities update
        let mut data = tiny_data_config();
        data.scenario = Scenario::VisualFull;
        data.fixed_missing = Some(0);
        let samples = tiny_samples(&data);
        assert!(samples
            .iter()
            .all(|s| s.transcript_visual == s.transcript_audio));
        let exp = tiny_exp(Mode::Pooled);
        let mut state = TrainerState::init(&exp, &data);
        let before_v = state.visual.params.w_hz.clone();
        let before_a = state.audio.params.w_hz.clone();
        train_step(&mut state, &samples[0], &exp).unwrap().unwrap();
        assert_ne!(state.visual.params.w_hz, before_v);
        assert_ne!(state.audio.params.w_hz, before_a);
    }

    #[test]
    fn training_is_deterministic() {
        let data = tiny_data_config();
        let samples = tiny_samples(&data);
        let exp = tiny_exp(Mode::Pooled);
        let run = || {
            let mut state = TrainerState::init(&exp, &data);
            let mut diag = Vec::new();
            train_epochs(&mut state, &samples, &exp, 2, &mut diag).unwrap();
            (state, diag)
        };
        let (s1, d1) = run();
        let (s2, d2) = run();
        assert_eq!(d1.len(), d2.len());
        for (a, b) in d1.iter().zip(&d2) {
            assert_eq!(a.step, b.step);
            assert_eq!(a.loss_v.to_bits(), b.loss_v.to_bits());
            assert_eq!(a.loss_a.to_bits(), b.loss_a.to_bits());
        }
        for (a, b) in s1
            .visual
            .params
            .tensors()
            .into_iter()
            .zip(s2.visual.params.tensors())
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn evaluate_with_perfect_decoder_scores_one() {
        let data = tiny_data_config();
        let samples = tiny_samples(&data);
        let report = evaluate_with(&samples, data.base_len, 3, 4, 1, |s| {
            Ok((s.transcript_visual.clone(), s.transcript_audio.clone()))
        })
        .unwrap();
        assert!((report.aacc_mean - 1.0).abs() < 1e-12);
        assert_eq!(report.ler_visual_mean, 0.0);
        assert_eq!(report.ler_audio_mean, 0.0);
        assert_eq!(report.aacc_std, 0.0);
    }

    #[test]
    fn evaluate_untrained_runs_and_is_reproducible() {
        let data = tiny_data_config();
        let samples = tiny_samples(&data);
        let exp = tiny_exp(Mode::Pooled);
        let state = TrainerState::init(&exp, &data);
        let a = evaluate(&state, &samples, &exp, data.base_len).unwrap();
        let b = evaluate(&state, &samples, &exp, data.base_len).unwrap();
        assert_eq!(a.report.aacc_mean.to_bits(), b.report.aacc_mean.to_bits());
        assert_eq!(
            a.assignment_visual.as_slice(),
            b.assignment_visual.as_slice()
        );
        assert!(a.report.aacc_mean >= 0.0 && a.report.aacc_mean <= 1.0);
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let data = tiny_data_config();
        let exp = tiny_exp(Mode::Pooled);
        let dir = tempfile::tempdir().unwrap();
        assert!(run_sweep(&data, &exp, Scenario::Both, &[1], dir.path()).is_err());
        assert!(run_sweep(&data, &exp, Scenario::VisualFull, &[0], dir.path()).is_err());
        assert!(run_sweep(&data, &exp, Scenario::VisualFull, &[3], dir.path()).is_err());
    }
}
