//! Cross-modal target construction: the plain target swap and the pooled
//! (element-wise max) combination over shared concept channels.

use crate::binding::AssignmentPermutation;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-channel flags: true where the channel carries a concept present in
/// both modalities' transcripts. The case split runs over semantic
/// concepts, so the blank channel always keeps the modality's own target:
/// pooling the warped blank mass in would halve the target mass of
/// concepts absent from the other modality after renormalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedChannelMask {
    shared: Vec<bool>,
}

impl SharedChannelMask {
    /// Mark the channels that the given assignment binds to concepts in the
    /// shared set. `channels` counts concept channels plus blank.
    pub fn from_shared_concepts(
        shared_concepts: &[usize],
        assignment: &AssignmentPermutation,
        channels: usize,
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::EmptyInput("mask"));
        }
        let mut shared = vec![false; channels];
        for &concept in shared_concepts {
            if concept >= assignment.len() {
                return Err(Error::UnknownConcept(concept));
            }
            let ch = assignment.channel_of(concept);
            if ch >= channels - 1 {
                return Err(Error::InvalidLabel {
                    label: ch,
                    classes: channels,
                });
            }
            shared[ch] = true;
        }
        Ok(SharedChannelMask { shared })
    }

    pub fn all_shared(channels: usize) -> Self {
        SharedChannelMask {
            shared: vec![true; channels],
        }
    }

    pub fn len(&self) -> usize {
        self.shared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shared.is_empty()
    }

    #[inline]
    pub fn is_shared(&self, channel: usize) -> bool {
        self.shared[channel]
    }

    pub fn all_true(&self) -> bool {
        self.shared.iter().all(|&b| b)
    }
}

/// Element-wise max of the modality's own target and the warped target from
/// the other modality on shared channels; own target elsewhere. Rows are
/// renormalized to stay distributions.
pub fn pooled_target(
    y_own: &Matrix,
    y_warped: &Matrix,
    mask: &SharedChannelMask,
) -> Result<Matrix> {
    if !y_own.same_shape(y_warped) {
        return Err(Error::ShapeMismatch(format!(
            "own target {:?} vs warped {:?}",
            y_own.shape(),
            y_warped.shape()
        )));
    }
    if mask.len() != y_own.cols() {
        return Err(Error::ShapeMismatch(format!(
            "mask covers {} channels, targets have {}",
            mask.len(),
            y_own.cols()
        )));
    }
    let mut out = Matrix::zeros(y_own.rows(), y_own.cols());
    for t in 0..y_own.rows() {
        let own = y_own.row(t);
        let warped = y_warped.row(t);
        let dst = out.row_mut(t);
        let mut sum = 0.0;
        for c in 0..own.len() {
            dst[c] = if mask.is_shared(c) {
                own[c].max(warped[c])
            } else {
                own[c]
            };
            sum += dst[c];
        }
        if sum <= 0.0 {
            return Err(Error::DegenerateRow(t));
        }
        for v in dst.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// How the cross-modal training target is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionMode {
    /// Target is the other modality's warped target stream alone.
    Original,
    /// Target is the max-pooled combination over shared channels.
    Pooled,
}

/// Training delta for one modality given both target streams.
pub fn multimodal_delta(
    z: &Matrix,
    y_own: &Matrix,
    y_warped: &Matrix,
    mask: &SharedChannelMask,
    mode: FusionMode,
) -> Result<Matrix> {
    if !z.same_shape(y_own) || !z.same_shape(y_warped) {
        return Err(Error::ShapeMismatch(
            "z and target streams must share shape".to_string(),
        ));
    }
    let target = match mode {
        FusionMode::Original => y_warped.clone(),
        FusionMode::Pooled => pooled_target(y_own, y_warped, mask)?,
    };
    let mut delta = z.clone();
    for (d, t) in delta.data_mut().iter_mut().zip(target.data()) {
        *d -= t;
    }
    Ok(delta)
}
