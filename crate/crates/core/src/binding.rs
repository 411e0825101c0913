//! EM-style semantic binding: concept-evidence accumulation, greedy
//! row-column elimination assignment, and gradient updates of the concept
//! vectors.
//!
//! One bank of concept vectors exists per modality. Concept vector i holds
//! one positive exponent per concept channel; raising the network output to
//! those exponents and averaging over time scores how strongly the sequence
//! supports "concept i lives on channel c". The blank channel never takes
//! part in binding.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Probabilities are clamped here before pow/log so underflowed softmax
/// outputs cannot produce infinities.
pub const PROB_FLOOR: f64 = 1e-12;

/// Exponents are kept at or above this value after updates.
const WEIGHT_FLOOR: f64 = 1e-6;

/// Learnable binding weights: row i holds the per-channel exponents scoring
/// concept i. Entries stay strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ConceptVectors {
    weights: Matrix, // concepts x channels, square C x C
}

impl ConceptVectors {
    /// All-ones start: the power operation is the identity, so the first
    /// evidence pass reads raw output statistics.
    pub fn new(concepts: usize) -> Self {
        ConceptVectors {
            weights: Matrix::filled(concepts, concepts, 1.0),
        }
    }

    pub fn from_matrix(weights: Matrix) -> Result<Self> {
        if weights.rows() != weights.cols() {
            return Err(Error::ShapeMismatch(format!(
                "concept vectors must be square, got {:?}",
                weights.shape()
            )));
        }
        if weights.data().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonFinite("concept vectors must be positive"));
        }
        Ok(ConceptVectors { weights })
    }

    pub fn concepts(&self) -> usize {
        self.weights.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.weights
    }

    pub fn exponents(&self, concept: usize) -> &[f64] {
        self.weights.row(concept)
    }
}

/// Time-averaged powered evidence. `scores[channel][concept]` is the mean
/// over frames of z[t][channel] raised to that concept's channel exponent.
#[derive(Clone, Debug)]
pub struct ConceptEvidence {
    scores: Matrix, // channels x concepts
    frames: usize,
}

impl ConceptEvidence {
    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
}

/// Bijection from concepts to output channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentPermutation {
    perm: Vec<usize>, // concept -> channel
}

impl AssignmentPermutation {
    pub fn identity(concepts: usize) -> Self {
        AssignmentPermutation {
            perm: (0..concepts).collect(),
        }
    }

    pub fn from_vec(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &ch in &perm {
            if ch >= n || seen[ch] {
                return Err(Error::Config(format!("not a bijection: {perm:?}")));
            }
            seen[ch] = true;
        }
        Ok(AssignmentPermutation { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    #[inline]
    pub fn channel_of(&self, concept: usize) -> usize {
        self.perm[concept]
    }

    /// Inverse lookup; channels and concepts both range over 0..C.
    pub fn concept_of(&self, channel: usize) -> usize {
        self.perm.iter().position(|&c| c == channel).unwrap()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        self.perm.iter().all(|&c| {
            if c < seen.len() && !seen[c] {
                seen[c] = true;
                true
            } else {
                false
            }
        })
    }
}

/// Accumulate powered evidence from one output sequence. The blank channel
/// (last column of z) is excluded.
pub fn concept_evidence(z: &Matrix, vectors: &ConceptVectors) -> Result<ConceptEvidence> {
    let concepts = vectors.concepts();
    if z.cols() != concepts + 1 {
        return Err(Error::ShapeMismatch(format!(
            "z has {} channels, expected {} concepts + blank",
            z.cols(),
            concepts
        )));
    }
    if z.rows() == 0 {
        return Err(Error::EmptyInput("concept_evidence"));
    }
    let frames = z.rows();
    let mut scores = Matrix::zeros(concepts, concepts);
    for i in 0..concepts {
        let exps = vectors.exponents(i);
        for t in 0..frames {
            let row = z.row(t);
            for c in 0..concepts {
                let p = row[c].max(PROB_FLOOR);
                scores.set(c, i, scores.get(c, i) + p.powf(exps[c]));
            }
        }
    }
    for v in scores.data_mut() {
        *v /= frames as f64;
    }
    Ok(ConceptEvidence { scores, frames })
}

/// Greedy assignment: C times, take the global maximum among surviving
/// entries at (channel, concept), bind that concept to that channel, then
/// strike the row and column. Ties break to the smaller channel index,
/// then the smaller concept index.
pub fn row_column_elimination(scores: &Matrix) -> AssignmentPermutation {
    let n = scores.rows().min(scores.cols());
    debug_assert_eq!(scores.rows(), scores.cols());
    let mut row_dead = vec![false; scores.rows()];
    let mut col_dead = vec![false; scores.cols()];
    let mut perm = vec![usize::MAX; n];
    for _ in 0..n {
        let mut best: Option<(usize, usize, f64)> = None;
        for r in 0..scores.rows() {
            if row_dead[r] {
                continue;
            }
            for c in 0..scores.cols() {
                if col_dead[c] {
                    continue;
                }
                let v = scores.get(r, c);
                if best.map_or(true, |(_, _, bv)| v > bv) {
                    best = Some((r, c, v));
                }
            }
        }
        let (r, c, _) = best.expect("surviving entry");
        perm[c] = r;
        row_dead[r] = true;
        col_dead[c] = true;
    }
    AssignmentPermutation { perm }
}

/// Squared distance between a concept's evidence column and its scaled
/// one-hot target (the assigned channel at height 1/C).
pub fn binding_cost(evidence: &ConceptEvidence, assignment: &AssignmentPermutation) -> f64 {
    let concepts = assignment.len();
    let mut total = 0.0;
    for i in 0..concepts {
        let target_ch = assignment.channel_of(i);
        for c in 0..concepts {
            let target = if c == target_ch {
                1.0 / concepts as f64
            } else {
                0.0
            };
            let d = evidence.scores().get(c, i) - target;
            total += d * d;
        }
    }
    total
}

/// One gradient step on every concept vector.
///
/// For concept i with exponents w and evidence e[c] = mean_t z[t,c]^w[c],
/// the cost is sum_c (e[c] - target[c])^2 and the analytic gradient w.r.t.
/// w[c] is 2 (e[c] - target[c]) * mean_t z[t,c]^w[c] ln z[t,c]. Exponents
/// are clamped to stay positive afterwards.
pub fn update_concept_vectors(
    vectors: &mut ConceptVectors,
    z: &Matrix,
    assignment: &AssignmentPermutation,
    rate: f64,
) -> Result<()> {
    let concepts = vectors.concepts();
    if z.cols() != concepts + 1 {
        return Err(Error::ShapeMismatch(format!(
            "z has {} channels, expected {} concepts + blank",
            z.cols(),
            concepts
        )));
    }
    if assignment.len() != concepts {
        return Err(Error::ShapeMismatch(
            "assignment size does not match concept count".to_string(),
        ));
    }
    let frames = z.rows();
    let inv_t = 1.0 / frames as f64;
    let inv_c = 1.0 / concepts as f64;
    for i in 0..concepts {
        let target_ch = assignment.channel_of(i);
        let mut grad = vec![0.0; concepts];
        let exps: Vec<f64> = vectors.exponents(i).to_vec();
        let mut evidence = vec![0.0; concepts];
        let mut powered_log = vec![0.0; concepts];
        for t in 0..frames {
            let row = z.row(t);
            for c in 0..concepts {
                let p = row[c].max(PROB_FLOOR);
                let powed = p.powf(exps[c]);
                evidence[c] += powed;
                powered_log[c] += powed * p.ln();
            }
        }
        for c in 0..concepts {
            let e = evidence[c] * inv_t;
            let target = if c == target_ch { inv_c } else { 0.0 };
            grad[c] = 2.0 * (e - target) * powered_log[c] * inv_t;
        }
        let row = vectors.weights.row_mut(i);
        for c in 0..concepts {
            row[c] = (row[c] - rate * grad[c]).max(WEIGHT_FLOOR);
        }
    }
    Ok(())
}

/// Replace each semantic concept by its assigned output channel, producing
/// CTC labels.
pub fn relabel_transcript(
    transcript: &[usize],
    assignment: &AssignmentPermutation,
) -> Result<Vec<usize>> {
    transcript
        .iter()
        .map(|&s| {
            if s < assignment.len() {
                Ok(assignment.channel_of(s))
            } else {
                Err(Error::UnknownConcept(s))
            }
        })
        .collect()
}
