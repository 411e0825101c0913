//! Dynamic time warping between the two modalities' per-timestep vectors
//! and warping of target streams across the aligned axes.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Monotone correspondence between two time axes. Starts at (0,0), ends at
/// (T1-1, T2-1); each step advances the first index, the second, or both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentPath {
    pairs: Vec<(usize, usize)>,
}

impl AlignmentPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn validate(&self, len_first: usize, len_second: usize) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::InvalidPath("empty path".to_string()));
        }
        if self.pairs[0] != (0, 0) {
            return Err(Error::InvalidPath("path must start at (0,0)".to_string()));
        }
        if *self.pairs.last().unwrap() != (len_first - 1, len_second - 1) {
            return Err(Error::InvalidPath(format!(
                "path must end at ({},{})",
                len_first - 1,
                len_second - 1
            )));
        }
        for w in self.pairs.windows(2) {
            let da = w[1].0 as i64 - w[0].0 as i64;
            let db = w[1].1 as i64 - w[0].1 as i64;
            if !((da == 0 || da == 1) && (db == 0 || db == 1) && da + db >= 1) {
                return Err(Error::InvalidPath(format!(
                    "illegal step {:?} -> {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Align two sequences of row vectors by cumulative Euclidean distance.
///
/// The backtrace prefers the diagonal, then (i-1, j), then (i, j-1) on
/// ties, which keeps the path deterministic across platforms.
pub fn dtw(first: &Matrix, second: &Matrix) -> Result<(f64, AlignmentPath)> {
    let (acc, path) = dtw_accumulated(first, second)?;
    let cost = acc.get(first.rows() - 1, second.rows() - 1);
    Ok((cost, path))
}

/// Like [`dtw`] but also returns the full accumulated-cost matrix, for
/// inspection dumps.
pub fn dtw_accumulated(first: &Matrix, second: &Matrix) -> Result<(Matrix, AlignmentPath)> {
    if first.cols() != second.cols() {
        return Err(Error::ShapeMismatch(format!(
            "row width {} vs {}",
            first.cols(),
            second.cols()
        )));
    }
    if first.rows() == 0 || second.rows() == 0 {
        return Err(Error::EmptyInput("dtw"));
    }
    let (n, m) = (first.rows(), second.rows());
    let mut acc = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let d = euclidean(first.row(i), second.row(j));
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc.get(0, j - 1),
                (_, 0) => acc.get(i - 1, 0),
                _ => acc
                    .get(i - 1, j - 1)
                    .min(acc.get(i - 1, j))
                    .min(acc.get(i, j - 1)),
            };
            acc.set(i, j, d + best);
        }
    }

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let (ni, nj) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc.get(i - 1, j - 1);
            let up = acc.get(i - 1, j);
            let left = acc.get(i, j - 1);
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((ni, nj));
        i = ni;
        j = nj;
    }
    pairs.reverse();
    Ok((acc, AlignmentPath { pairs }))
}

/// Which path component indexes the source stream in [`warp_targets`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarpDirection {
    /// Source rows are indexed by the first path component, output by the second.
    FirstToSecond,
    /// Source rows are indexed by the second path component, output by the first.
    SecondToFirst,
}

/// Carry a target stream across the alignment: every output timestep takes
/// the mean of the source rows paired with it, renormalized to sum 1.
pub fn warp_targets(
    y_src: &Matrix,
    path: &AlignmentPath,
    target_len: usize,
    direction: WarpDirection,
) -> Result<Matrix> {
    let (src_len, dst_len) = match direction {
        WarpDirection::FirstToSecond => (y_src.rows(), target_len),
        WarpDirection::SecondToFirst => (target_len, y_src.rows()),
    };
    // validate against the (first, second) lengths the path was built for
    match direction {
        WarpDirection::FirstToSecond => path.validate(src_len, dst_len)?,
        WarpDirection::SecondToFirst => path.validate(src_len, dst_len)?,
    }

    let mut out = Matrix::zeros(target_len, y_src.cols());
    let mut counts = vec![0usize; target_len];
    for &(a, b) in path.pairs() {
        let (src, dst) = match direction {
            WarpDirection::FirstToSecond => (a, b),
            WarpDirection::SecondToFirst => (b, a),
        };
        let src_row = y_src.row(src);
        for (o, &v) in out.row_mut(dst).iter_mut().zip(src_row) {
            *o += v;
        }
        counts[dst] += 1;
    }
    for (t, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::InvalidPath(format!(
                "target timestep {t} has no aligned source"
            )));
        }
        let row = out.row_mut(t);
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        } else {
            for v in row.iter_mut() {
                *v = 1.0 / count as f64; // unreachable for distribution inputs
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.uniform(0.0, 1.0);
        }
        m
    }

    /// Enumerate every monotone path and return the minimum total distance.
    fn brute_force_cost(first: &Matrix, second: &Matrix) -> f64 {
        fn rec(i: usize, j: usize, first: &Matrix, second: &Matrix) -> f64 {
            let d = euclidean(first.row(i), second.row(j));
            if i == 0 && j == 0 {
                return d;
            }
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(rec(i - 1, j - 1, first, second));
            }
            if i > 0 {
                best = best.min(rec(i - 1, j, first, second));
            }
            if j > 0 {
                best = best.min(rec(i, j - 1, first, second));
            }
            d + best
        }
        rec(first.rows() - 1, second.rows() - 1, first, second)
    }

    #[test]
    fn identical_inputs_align_on_diagonal() {
        let mut rng = Rng::new(1);
        let a = random_matrix(&mut rng, 5, 3);
        let (cost, path) = dtw(&a, &a).unwrap();
        assert!(cost.abs() < 1e-12);
        let expected: Vec<(usize, usize)> = (0..5).map(|i| (i, i)).collect();
        assert_eq!(path.pairs(), &expected[..]);
    }

    #[test]
    fn single_row_forces_path() {
        let a = Matrix::filled(1, 2, 0.5);
        let b = Matrix::filled(4, 2, 0.25);
        let (_, path) = dtw(&a, &b).unwrap();
        assert_eq!(path.pairs(), &[(0, 0), (0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn cost_matches_brute_force() {
        let mut rng = Rng::new(42);
        for _ in 0..60 {
            let n = 1 + rng.below(5);
            let m = 1 + rng.below(6);
            let a = random_matrix(&mut rng, n, 3);
            let b = random_matrix(&mut rng, m, 3);
            let (cost, path) = dtw(&a, &b).unwrap();
            let expected = brute_force_cost(&a, &b);
            assert!((cost - expected).abs() < 1e-10);
            path.validate(n, m).unwrap();
        }
    }

    #[test]
    fn cost_is_symmetric() {
        let mut rng = Rng::new(17);
        for _ in 0..20 {
            let n = 1 + rng.below(5);
            let m = 1 + rng.below(5);
            let a = random_matrix(&mut rng, n, 2);
            let b = random_matrix(&mut rng, m, 2);
            let (c_ab, _) = dtw(&a, &b).unwrap();
            let (c_ba, _) = dtw(&b, &a).unwrap();
            assert!((c_ab - c_ba).abs() < 1e-12);
        }
    }

    #[test]
    fn warp_identity_on_diagonal() {
        let y = Matrix::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        let (_, path) = dtw(&y, &y).unwrap();
        let warped = warp_targets(&y, &path, 3, WarpDirection::FirstToSecond).unwrap();
        for t in 0..3 {
            for c in 0..2 {
                assert!((warped.get(t, c) - y.get(t, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn warp_broadcasts_single_source_row() {
        let y = Matrix::from_rows(&[vec![0.9, 0.1]]).unwrap();
        let other = Matrix::filled(3, 2, 0.5);
        let (_, path) = dtw(&y, &other).unwrap();
        let warped = warp_targets(&y, &path, 3, WarpDirection::FirstToSecond).unwrap();
        for t in 0..3 {
            assert!((warped.get(t, 0) - 0.9).abs() < 1e-12);
            assert!((warped.get(t, 1) - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn warp_averages_many_to_one() {
        // two source steps onto one target step: mean of [1,0] and [0,1]
        let path = AlignmentPath {
            pairs: vec![(0, 0), (1, 0)],
        };
        let y = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let warped = warp_targets(&y, &path, 1, WarpDirection::FirstToSecond).unwrap();
        assert!((warped.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((warped.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn warp_rows_sum_to_one() {
        let mut rng = Rng::new(23);
        for _ in 0..20 {
            let n = 1 + rng.below(6);
            let m = 1 + rng.below(6);
            let mut y = random_matrix(&mut rng, n, 4);
            for t in 0..n {
                let row = y.row_mut(t);
                let s: f64 = row.iter().sum();
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
            let other = random_matrix(&mut rng, m, 4);
            let (_, path) = dtw(&y, &other).unwrap();
            let warped = warp_targets(&y, &path, m, WarpDirection::FirstToSecond).unwrap();
            for t in 0..m {
                let s: f64 = warped.row(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn invalid_paths_rejected() {
        let y = Matrix::filled(2, 2, 0.5);
        let bad = AlignmentPath {
            pairs: vec![(0, 0), (0, 2)],
        };
        assert!(warp_targets(&y, &bad, 3, WarpDirection::FirstToSecond).is_err());
    }
}
