//! CTC forward-backward target generation and best-path decoding.
//!
//! The blank is always the last channel (index C when there are C concept
//! channels). Recursions run in log space; no per-timestep rescaling.
//!
//! Convention: both `log_fw[t,u]` and `log_bw[t,u]` include the emission
//! log-probability of timestep t, so for every t
//!
//! ```text
//! logsumexp_u( log_fw[t,u] + log_bw[t,u] - ln z[t, label(u)] ) = log_prob
//! ```

use crate::error::{Error, Result};
use crate::matrix::{logsumexp, Matrix};

/// Floor for logs of probabilities that may have underflowed to zero.
const LOG_FLOOR: f64 = 1e-300;

#[inline]
fn safe_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Transcript with the blank interleaved: b, l_1, b, l_2, ..., l_k, b.
/// Even positions are blanks; length is 2k+1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedLabeling {
    symbols: Vec<usize>,
    blank: usize,
}

impl ExtendedLabeling {
    pub fn new(transcript: &[usize], blank: usize) -> Self {
        let mut symbols = Vec::with_capacity(2 * transcript.len() + 1);
        symbols.push(blank);
        for &l in transcript {
            symbols.push(l);
            symbols.push(blank);
        }
        ExtendedLabeling { symbols, blank }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds at least the leading blank
    }

    #[inline]
    pub fn label(&self, u: usize) -> usize {
        self.symbols[u]
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    /// A position may also be reached from u-2 when it is a non-blank that
    /// differs from the label two slots back (the blank between repeats is
    /// mandatory).
    #[inline]
    fn allows_skip(&self, u: usize) -> bool {
        u >= 2 && self.symbols[u] != self.blank && self.symbols[u] != self.symbols[u - 2]
    }
}

/// Shortest frame count that can carry the transcript: one frame per label
/// plus one separating blank between equal neighbours.
pub fn min_frames(transcript: &[usize]) -> usize {
    let repeats = transcript.windows(2).filter(|w| w[0] == w[1]).count();
    transcript.len() + repeats
}

/// Forward and backward log lattices plus the sequence log-likelihood.
#[derive(Clone, Debug)]
pub struct CtcLattice {
    pub log_fw: Matrix,
    pub log_bw: Matrix,
    pub log_prob: f64,
    labeling: ExtendedLabeling,
}

impl CtcLattice {
    pub fn labeling(&self) -> &ExtendedLabeling {
        &self.labeling
    }
}

/// Build the CTC lattice for output distributions `z` (T x C+1, rows sum
/// to 1) and a transcript of concept-channel indices (< C).
pub fn ctc_lattice(z: &Matrix, transcript: &[usize]) -> Result<CtcLattice> {
    let t_len = z.rows();
    let classes = z.cols();
    if classes < 2 {
        return Err(Error::ShapeMismatch(
            "z needs at least one concept channel plus blank".to_string(),
        ));
    }
    let blank = classes - 1;
    for &l in transcript {
        if l >= blank {
            return Err(Error::InvalidLabel { label: l, classes });
        }
    }
    let needed = min_frames(transcript);
    if t_len < needed {
        return Err(Error::SequenceTooShort {
            frames: t_len,
            needed,
        });
    }

    let labeling = ExtendedLabeling::new(transcript, blank);
    let ext_len = labeling.len();
    let mut log_fw = Matrix::filled(t_len, ext_len, f64::NEG_INFINITY);
    let mut log_bw = Matrix::filled(t_len, ext_len, f64::NEG_INFINITY);

    log_fw.set(0, 0, safe_ln(z.get(0, labeling.label(0))));
    if ext_len > 1 {
        log_fw.set(0, 1, safe_ln(z.get(0, labeling.label(1))));
    }
    for t in 1..t_len {
        for u in 0..ext_len {
            let mut acc = log_fw.get(t - 1, u);
            if u >= 1 {
                acc = log_add(acc, log_fw.get(t - 1, u - 1));
            }
            if labeling.allows_skip(u) {
                acc = log_add(acc, log_fw.get(t - 1, u - 2));
            }
            if acc > f64::NEG_INFINITY {
                log_fw.set(t, u, acc + safe_ln(z.get(t, labeling.label(u))));
            }
        }
    }

    log_bw.set(t_len - 1, ext_len - 1, safe_ln(z.get(t_len - 1, labeling.label(ext_len - 1))));
    if ext_len > 1 {
        log_bw.set(t_len - 1, ext_len - 2, safe_ln(z.get(t_len - 1, labeling.label(ext_len - 2))));
    }
    for t in (0..t_len.saturating_sub(1)).rev() {
        for u in 0..ext_len {
            let mut acc = log_bw.get(t + 1, u);
            if u + 1 < ext_len {
                acc = log_add(acc, log_bw.get(t + 1, u + 1));
            }
            if u + 2 < ext_len && labeling.allows_skip(u + 2) {
                acc = log_add(acc, log_bw.get(t + 1, u + 2));
            }
            if acc > f64::NEG_INFINITY {
                log_bw.set(t, u, acc + safe_ln(z.get(t, labeling.label(u))));
            }
        }
    }

    let log_prob = if ext_len > 1 {
        logsumexp(&[
            log_fw.get(t_len - 1, ext_len - 1),
            log_fw.get(t_len - 1, ext_len - 2),
        ])?
    } else {
        log_fw.get(t_len - 1, 0)
    };

    Ok(CtcLattice {
        log_fw,
        log_bw,
        log_prob,
        labeling,
    })
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Per-frame target distribution: occupancy of each channel among all
/// transcript-consistent paths, row-normalized to sum 1.
pub fn ctc_target(lattice: &CtcLattice, z: &Matrix) -> Result<Matrix> {
    let t_len = z.rows();
    let classes = z.cols();
    if lattice.log_fw.rows() != t_len {
        return Err(Error::ShapeMismatch(
            "lattice was built for a different sequence length".to_string(),
        ));
    }
    let labeling = &lattice.labeling;
    let mut y = Matrix::zeros(t_len, classes);
    for t in 0..t_len {
        let mut row_sum = 0.0;
        for u in 0..labeling.len() {
            let fw = lattice.log_fw.get(t, u);
            let bw = lattice.log_bw.get(t, u);
            if fw == f64::NEG_INFINITY || bw == f64::NEG_INFINITY {
                continue;
            }
            let c = labeling.label(u);
            // fw and bw both carry the frame emission; divide one out and
            // shift by log_prob to keep magnitudes near 1
            let w = (fw + bw - safe_ln(z.get(t, c)) - lattice.log_prob).exp();
            y.set(t, c, y.get(t, c) + w);
            row_sum += w;
        }
        if row_sum <= 0.0 {
            return Err(Error::DegenerateRow(t));
        }
        for v in y.row_mut(t) {
            *v /= row_sum;
        }
    }
    Ok(y)
}

/// Training delta: z - y. The sign pairs with subtractive momentum-SGD
/// updates so the likelihood ascends.
pub fn ctc_delta(z: &Matrix, y: &Matrix) -> Result<Matrix> {
    if !z.same_shape(y) {
        return Err(Error::ShapeMismatch(format!(
            "z is {:?}, y is {:?}",
            z.shape(),
            y.shape()
        )));
    }
    let mut delta = z.clone();
    for (d, t) in delta.data_mut().iter_mut().zip(y.data()) {
        *d -= t;
    }
    Ok(delta)
}

/// Best-path decoding: argmax per frame (ties to the lowest index),
/// collapse adjacent repeats, drop blanks.
pub fn best_path_decode(z: &Matrix) -> Vec<usize> {
    let blank = z.cols() - 1;
    let mut out = Vec::new();
    let mut prev = blank;
    for t in 0..z.rows() {
        let row = z.row(t);
        let mut arg = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[arg] {
                arg = c;
            }
        }
        if arg != blank && arg != prev {
            out.push(arg);
        }
        prev = arg;
    }
    out
}
