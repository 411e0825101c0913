//! Synthetic paired-sequence datasets.
//!
//! Each sample is a horizontal strip of per-concept glyphs (the visual
//! stream, one image column per timestep) paired with a concatenation of
//! per-concept feature trajectories (the audio stream), where each stream
//! carries an ordered subsequence of one base concept sequence. Missing
//! elements are controlled per scenario; the relative order of surviving
//! elements is always preserved and the two streams always share at least
//! one concept.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mmt;
use crate::rng::Rng;

/// Default vocabulary names (Spanish nouns); used as string metadata only.
const DEFAULT_NAMES: [&str; 30] = [
    "oso",
    "bote",
    "botella",
    "bol",
    "caja",
    "carro",
    "gato",
    "queso",
    "cigarrillo",
    "gaseosa",
    "bebida",
    "pato",
    "cara",
    "comida",
    "hamburguesa",
    "higiene",
    "liquido",
    "locion",
    "cebolla",
    "pimenton",
    "pera",
    "redondo",
    "sanduche",
    "cuchara",
    "te",
    "telefono",
    "tomate",
    "florero",
    "vehiculo",
    "madera",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Independent drops in both modalities.
    Both,
    /// Visual stream keeps the full base sequence; audio drops a fixed count.
    VisualFull,
    /// Audio stream keeps the full base sequence; visual drops a fixed count.
    AudioFull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub vocab_size: usize,
    pub base_len: usize,
    pub scenario: Scenario,
    /// Exact drop count for the deficient modality in the one-sided
    /// scenarios; ignored for `both`.
    pub fixed_missing: Option<usize>,
    /// Upper bound on independent drops per modality in scenario `both`.
    pub max_drop: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub glyph_height: usize,
    pub glyph_width: usize,
    pub separator_cols: usize,
    pub audio_dim: usize,
    pub audio_len_min: usize,
    pub audio_len_max: usize,
    pub noise_sigma_visual: f64,
    pub noise_sigma_audio: f64,
    pub speaker_count: usize,
    pub train_speakers: usize,
    /// Magnitude of the per-speaker affine distortion.
    pub speaker_distortion: f64,
    /// Fractional duration jitter per rendered concept (0.2 = up to 20%).
    pub duration_warp: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            vocab_size: 30,
            base_len: 10,
            scenario: Scenario::Both,
            fixed_missing: None,
            max_drop: 5,
            train_count: 2000,
            test_count: 500,
            seed: 7,
            glyph_height: 32,
            glyph_width: 8,
            separator_cols: 2,
            audio_dim: 16,
            audio_len_min: 10,
            audio_len_max: 20,
            noise_sigma_visual: 0.1,
            noise_sigma_audio: 0.05,
            speaker_count: 12,
            train_speakers: 9,
            speaker_distortion: 0.1,
            duration_warp: 0.2,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2".to_string()));
        }
        if self.base_len == 0 {
            return Err(Error::Config("base_len must be positive".to_string()));
        }
        if self.max_drop >= self.base_len {
            return Err(Error::Config(format!(
                "max_drop {} must be below base_len {}",
                self.max_drop, self.base_len
            )));
        }
        match self.scenario {
            Scenario::Both => {}
            Scenario::VisualFull | Scenario::AudioFull => {
                let m = self.fixed_missing.ok_or_else(|| {
                    Error::Config(
                        "fixed_missing is required for one-sided scenarios".to_string(),
                    )
                })?;
                if m >= self.base_len {
                    return Err(Error::Config(format!(
                        "fixed_missing {} must be below base_len {}",
                        m, self.base_len
                    )));
                }
            }
        }
        if self.train_speakers == 0 || self.train_speakers >= self.speaker_count {
            return Err(Error::Config(
                "train_speakers must be in 1..speaker_count".to_string(),
            ));
        }
        if self.audio_len_min < 2 || self.audio_len_max < self.audio_len_min {
            return Err(Error::Config("bad audio prototype length range".to_string()));
        }
        if self.glyph_height == 0 || self.glyph_width == 0 || self.audio_dim == 0 {
            return Err(Error::Config("feature dimensions must be positive".to_string()));
        }
        Ok(())
    }
}

/// Concept name table.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn with_size(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config("vocabulary needs at least 2 concepts".to_string()));
        }
        let names = (0..size)
            .map(|i| {
                DEFAULT_NAMES
                    .get(i)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| format!("concepto{i}"))
            })
            .collect();
        Ok(Vocabulary { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, concept: usize) -> &str {
        &self.names[concept]
    }
}

/// Fixed per-concept renderings plus per-speaker distortions, all derived
/// deterministically from the dataset seed.
#[derive(Clone, Debug)]
pub struct ConceptPrototypes {
    /// Per concept: glyph_width rows (timesteps) x glyph_height features,
    /// entries in {0, 1}.
    glyphs: Vec<Matrix>,
    /// Per concept: L x audio_dim smooth trajectory, L in the configured range.
    trajectories: Vec<Matrix>,
    speaker_scale: Vec<Vec<f64>>,
    speaker_offset: Vec<Vec<f64>>,
}

impl ConceptPrototypes {
    pub fn build(config: &DatasetConfig) -> Self {
        let root = Rng::new(config.seed);
        let mut glyphs = Vec::with_capacity(config.vocab_size);
        let mut trajectories = Vec::with_capacity(config.vocab_size);
        for concept in 0..config.vocab_size {
            let mut g_rng = root.derive("glyph").derive_index(concept as u64);
            let mut glyph = Matrix::zeros(config.glyph_width, config.glyph_height);
            for v in glyph.data_mut() {
                *v = if g_rng.below(2) == 1 { 1.0 } else { 0.0 };
            }
            glyphs.push(glyph);

            let mut a_rng = root.derive("trajectory").derive_index(concept as u64);
            let span = config.audio_len_max - config.audio_len_min + 1;
            let len = config.audio_len_min + a_rng.below(span);
            trajectories.push(smooth_trajectory(&mut a_rng, len, config.audio_dim));
        }
        let mut speaker_scale = Vec::with_capacity(config.speaker_count);
        let mut speaker_offset = Vec::with_capacity(config.speaker_count);
        for s in 0..config.speaker_count {
            let mut s_rng = root.derive("speaker").derive_index(s as u64);
            let scale: Vec<f64> = (0..config.audio_dim)
                .map(|_| 1.0 + config.speaker_distortion * s_rng.uniform(-1.0, 1.0))
                .collect();
            let offset: Vec<f64> = (0..config.audio_dim)
                .map(|_| config.speaker_distortion * s_rng.uniform(-1.0, 1.0))
                .collect();
            speaker_scale.push(scale);
            speaker_offset.push(offset);
        }
        ConceptPrototypes {
            glyphs,
            trajectories,
            speaker_scale,
            speaker_offset,
        }
    }

    pub fn glyph(&self, concept: usize) -> &Matrix {
        &self.glyphs[concept]
    }

    pub fn trajectory(&self, concept: usize) -> &Matrix {
        &self.trajectories[concept]
    }

    pub fn concepts(&self) -> usize {
        self.glyphs.len()
    }
}

/// Smooth random curve: cosine interpolation through four random control
/// points per feature dimension.
fn smooth_trajectory(rng: &mut Rng, len: usize, dim: usize) -> Matrix {
    const CONTROL: usize = 4;
    let mut controls = vec![0.0; CONTROL * dim];
    for v in controls.iter_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }
    let mut out = Matrix::zeros(len, dim);
    for t in 0..len {
        let pos = if len == 1 {
            0.0
        } else {
            t as f64 / (len - 1) as f64 * (CONTROL - 1) as f64
        };
        let seg = (pos.floor() as usize).min(CONTROL - 2);
        let frac = pos - seg as f64;
        let w = (1.0 - (std::f64::consts::PI * frac).cos()) / 2.0;
        let row = out.row_mut(t);
        for d in 0..dim {
            let a = controls[seg * dim + d];
            let b = controls[(seg + 1) * dim + d];
            row[d] = a * (1.0 - w) + b * w;
        }
    }
    out
}

/// Base sequence and the two modality transcripts drawn from it.
#[derive(Clone, Debug)]
pub struct SemanticPair {
    pub base: Vec<usize>,
    pub visual: Vec<usize>,
    pub audio: Vec<usize>,
}

impl SemanticPair {
    pub fn shared(&self) -> Vec<usize> {
        let v: BTreeSet<usize> = self.visual.iter().copied().collect();
        let a: BTreeSet<usize> = self.audio.iter().copied().collect();
        v.intersection(&a).copied().collect()
    }
}

fn drop_elements(base: &[usize], drop_positions: &[usize]) -> Vec<usize> {
    base.iter()
        .enumerate()
        .filter(|(i, _)| !drop_positions.contains(i))
        .map(|(_, &c)| c)
        .collect()
}

/// Draw a base sequence and per-modality subsequences for the scenario.
/// Drops are redrawn until the two transcripts share at least one concept.
pub fn gen_semantic_pair(
    rng: &mut Rng,
    base_len: usize,
    scenario: Scenario,
    fixed_missing: Option<usize>,
    vocab_size: usize,
    max_drop: usize,
) -> Result<SemanticPair> {
    if base_len == 0 {
        return Err(Error::Config("base_len must be positive".to_string()));
    }
    if let Some(m) = fixed_missing {
        if m >= base_len {
            return Err(Error::Config(format!(
                "fixed_missing {m} must be below base_len {base_len}"
            )));
        }
    }
    let base: Vec<usize> = (0..base_len).map(|_| rng.below(vocab_size)).collect();

    for _ in 0..1000 {
        let (visual, audio) = match scenario {
            Scenario::Both => {
                let dv = rng.below(max_drop + 1);
                let da = rng.below(max_drop + 1);
                let pv = rng.choose_indices(base_len, dv);
                let pa = rng.choose_indices(base_len, da);
                (drop_elements(&base, &pv), drop_elements(&base, &pa))
            }
            Scenario::VisualFull => {
                let m = fixed_missing.ok_or_else(|| {
                    Error::Config("fixed_missing required for visual_full".to_string())
                })?;
                let pa = rng.choose_indices(base_len, m);
                (base.clone(), drop_elements(&base, &pa))
            }
            Scenario::AudioFull => {
                let m = fixed_missing.ok_or_else(|| {
                    Error::Config("fixed_missing required for audio_full".to_string())
                })?;
                let pv = rng.choose_indices(base_len, m);
                (drop_elements(&base, &pv), base.clone())
            }
        };
        let pair = SemanticPair {
            base: base.clone(),
            visual,
            audio,
        };
        if !pair.shared().is_empty() {
            return Ok(pair);
        }
    }
    Err(Error::Config(
        "could not draw transcripts with a shared concept".to_string(),
    ))
}

/// Glyph strip for a transcript: `separator_cols` blank columns before,
/// between and after the glyphs, plus additive Gaussian noise.
pub fn render_visual(
    rng: &mut Rng,
    transcript: &[usize],
    prototypes: &ConceptPrototypes,
    config: &DatasetConfig,
) -> Matrix {
    let width = config.glyph_width;
    let sep = config.separator_cols;
    let t_len = transcript.len() * width + sep * (transcript.len() + 1);
    let mut out = Matrix::zeros(t_len, config.glyph_height);
    let mut t = sep;
    for &concept in transcript {
        let glyph = prototypes.glyph(concept);
        for r in 0..width {
            out.row_mut(t + r).copy_from_slice(glyph.row(r));
        }
        t += width + sep;
    }
    if config.noise_sigma_visual > 0.0 {
        for v in out.data_mut() {
            *v += config.noise_sigma_visual * rng.normal();
        }
    }
    out
}

fn pick_speaker(rng: &mut Rng, split: Split, config: &DatasetConfig) -> usize {
    match split {
        Split::Train => rng.below(config.train_speakers),
        Split::Test => {
            config.train_speakers + rng.below(config.speaker_count - config.train_speakers)
        }
    }
}

fn resample_rows(src: &Matrix, new_len: usize) -> Matrix {
    let mut out = Matrix::zeros(new_len, src.cols());
    let last = src.rows() - 1;
    for t in 0..new_len {
        let pos = if new_len == 1 {
            0.0
        } else {
            t as f64 / (new_len - 1) as f64 * last as f64
        };
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(last);
        let frac = pos - lo as f64;
        let row = out.row_mut(t);
        for d in 0..src.cols() {
            row[d] = src.get(lo, d) * (1.0 - frac) + src.get(hi, d) * frac;
        }
    }
    out
}

/// Concatenated per-concept trajectories voiced by one speaker of the
/// split: speaker affine distortion, per-concept duration jitter, then
/// additive noise. Train and test draw from disjoint speaker pools.
pub fn render_audio(
    rng: &mut Rng,
    transcript: &[usize],
    prototypes: &ConceptPrototypes,
    config: &DatasetConfig,
    split: Split,
) -> Matrix {
    let speaker = pick_speaker(rng, split, config);
    let scale = &prototypes.speaker_scale[speaker];
    let offset = &prototypes.speaker_offset[speaker];

    let mut pieces: Vec<Matrix> = Vec::with_capacity(transcript.len());
    let mut total = 0usize;
    for &concept in transcript {
        let proto = prototypes.trajectory(concept);
        let factor = 1.0 + config.duration_warp * rng.uniform(-1.0, 1.0);
        let new_len = ((proto.rows() as f64 * factor).round() as usize).max(2);
        let mut piece = resample_rows(proto, new_len);
        for t in 0..piece.rows() {
            let row = piece.row_mut(t);
            for d in 0..row.len() {
                row[d] = row[d] * scale[d] + offset[d];
            }
        }
        total += piece.rows();
        pieces.push(piece);
    }
    let dim = config.audio_dim;
    let mut out = Matrix::zeros(total.max(1), dim);
    let mut t = 0;
    for piece in &pieces {
        for r in 0..piece.rows() {
            out.row_mut(t).copy_from_slice(piece.row(r));
            t += 1;
        }
    }
    if config.noise_sigma_audio > 0.0 {
        for v in out.data_mut() {
            *v += config.noise_sigma_audio * rng.normal();
        }
    }
    out
}

/// One fully rendered pair with its transcripts and shared-concept set.
#[derive(Clone, Debug)]
pub struct MultimodalSample {
    pub x_visual: Matrix,
    pub x_audio: Matrix,
    pub transcript_visual: Vec<usize>,
    pub transcript_audio: Vec<usize>,
    pub shared: Vec<usize>,
}

fn generate_raw(
    config: &DatasetConfig,
    prototypes: &ConceptPrototypes,
    split: Split,
    index: u64,
) -> Result<MultimodalSample> {
    let mut rng = Rng::new(config.seed)
        .derive(split.tag())
        .derive_index(index);
    let pair = gen_semantic_pair(
        &mut rng,
        config.base_len,
        config.scenario,
        config.fixed_missing,
        config.vocab_size,
        config.max_drop,
    )?;
    let x_visual = render_visual(&mut rng, &pair.visual, prototypes, config);
    let x_audio = render_audio(&mut rng, &pair.audio, prototypes, config, split);
    let shared = pair.shared();
    Ok(MultimodalSample {
        x_visual,
        x_audio,
        transcript_visual: pair.visual,
        transcript_audio: pair.audio,
        shared,
    })
}

/// Global normalization statistics over the training split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean_v: f64,
    pub std_v: f64,
    pub mean_a: f64,
    pub std_a: f64,
}

fn normalize(m: &mut Matrix, mean: f64, std: f64) {
    let denom = if std > 1e-12 { std } else { 1.0 };
    for v in m.data_mut() {
        *v = (*v - mean) / denom;
    }
}

/// Manifest line: one JSON object per sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub visual_path: String,
    pub audio_path: String,
    pub transcript_v: Vec<usize>,
    pub transcript_a: Vec<usize>,
    pub scenario: Scenario,
    pub split: Split,
}

impl SampleRecord {
    pub fn load(&self, dataset_dir: &Path) -> Result<MultimodalSample> {
        let x_visual = mmt::read_tensor(&dataset_dir.join(&self.visual_path))?;
        let x_audio = mmt::read_tensor(&dataset_dir.join(&self.audio_path))?;
        let v: BTreeSet<usize> = self.transcript_v.iter().copied().collect();
        let a: BTreeSet<usize> = self.transcript_a.iter().copied().collect();
        Ok(MultimodalSample {
            x_visual,
            x_audio,
            transcript_visual: self.transcript_v.clone(),
            transcript_audio: self.transcript_a.clone(),
            shared: v.intersection(&a).copied().collect(),
        })
    }
}

/// Accumulator for scalar mean/std over many matrices.
struct Moments {
    sum: f64,
    sum_sq: f64,
    count: u64,
}

impl Moments {
    fn new() -> Self {
        Moments {
            sum: 0.0,
            sum_sq: 0.0,
            count: 0,
        }
    }

    fn add(&mut self, m: &Matrix) {
        for &v in m.data() {
            self.sum += v;
            self.sum_sq += v * v;
        }
        self.count += m.data().len() as u64;
    }

    fn stats(&self) -> (f64, f64) {
        let n = self.count.max(1) as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Write a complete dataset: per-sample MMT1 tensors, a JSON-lines
/// manifest, normalization stats, and a config echo. Generation is a pure
/// function of the config (including its seed): identical configs produce
/// byte-identical outputs.
pub fn build_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<Vec<SampleRecord>> {
    config.validate()?;
    let _ = Vocabulary::with_size(config.vocab_size)?;
    fs::create_dir_all(out_dir.join("tensors"))?;
    let prototypes = ConceptPrototypes::build(config);

    // first pass: training-split moments, generated and discarded
    let mut mv = Moments::new();
    let mut ma = Moments::new();
    for i in 0..config.train_count {
        let sample = generate_raw(config, &prototypes, Split::Train, i as u64)?;
        mv.add(&sample.x_visual);
        ma.add(&sample.x_audio);
    }
    let (mean_v, std_v) = mv.stats();
    let (mean_a, std_a) = ma.stats();
    let stats = DatasetStats {
        mean_v,
        std_v,
        mean_a,
        std_a,
    };
    fs::write(
        out_dir.join("stats.json"),
        serde_json::to_string_pretty(&stats)?,
    )?;
    fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;

    // second pass: regenerate deterministically, normalize, write
    let mut records = Vec::with_capacity(config.train_count + config.test_count);
    let mut manifest = fs::File::create(out_dir.join("manifest.jsonl"))?;
    for (split, count) in [(Split::Train, config.train_count), (Split::Test, config.test_count)] {
        for i in 0..count {
            let mut sample = generate_raw(config, &prototypes, split, i as u64)?;
            normalize(&mut sample.x_visual, mean_v, std_v);
            normalize(&mut sample.x_audio, mean_a, std_a);
            let id = format!("{}_{:05}", split.tag(), i);
            let visual_path = format!("tensors/{id}_v.mmt");
            let audio_path = format!("tensors/{id}_a.mmt");
            mmt::write_tensor(&out_dir.join(&visual_path), &sample.x_visual)?;
            mmt::write_tensor(&out_dir.join(&audio_path), &sample.x_audio)?;
            let record = SampleRecord {
                id,
                visual_path,
                audio_path,
                transcript_v: sample.transcript_visual.clone(),
                transcript_a: sample.transcript_audio.clone(),
                scenario: config.scenario,
                split,
            };
            writeln!(manifest, "{}", serde_json::to_string(&record)?)?;
            records.push(record);
        }
    }
    Ok(records)
}

pub fn load_manifest(dataset_dir: &Path) -> Result<Vec<SampleRecord>> {
    let text = fs::read_to_string(dataset_dir.join("manifest.jsonl"))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn load_config(dataset_dir: &Path) -> Result<DatasetConfig> {
    let text = fs::read_to_string(dataset_dir.join("config.json"))?;
    serde_json::from_str(&text).map_err(Error::from)
}

pub fn load_stats(dataset_dir: &Path) -> Result<DatasetStats> {
    let text = fs::read_to_string(dataset_dir.join("stats.json"))?;
    serde_json::from_str(&text).map_err(Error::from)
}

pub fn dataset_path(dataset_dir: &Path) -> PathBuf {
    dataset_dir.to_path_buf()
}

/// True when `sub` is an ordered subsequence of `seq`.
pub fn is_subsequence(sub: &[usize], seq: &[usize]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|s| it.any(|x| x == s))
}
