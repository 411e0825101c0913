//! Evaluation metrics: association accuracy over the concepts shared by
//! both modalities, label error rate, and a binding-consistency diagnostic.

use serde::Serialize;

use crate::binding::AssignmentPermutation;
use crate::error::{Error, Result};

/// Longest common subsequence length of two sequences (classic DP).
pub fn lcs2(a: &[usize], b: &[usize]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![0usize; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 1..=n {
        for j in 1..=m {
            dp[idx(i, j)] = if a[i - 1] == b[j - 1] {
                dp[idx(i - 1, j - 1)] + 1
            } else {
                dp[idx(i - 1, j)].max(dp[idx(i, j - 1)])
            };
        }
    }
    dp[idx(n, m)]
}

/// Length of the longest sequence that is a common subsequence of all four
/// inputs (4-dimensional DP).
pub fn lcs4(a: &[usize], b: &[usize], c: &[usize], d: &[usize]) -> usize {
    let (n1, n2, n3, n4) = (a.len(), b.len(), c.len(), d.len());
    let strides = ((n2 + 1) * (n3 + 1) * (n4 + 1), (n3 + 1) * (n4 + 1), n4 + 1);
    let mut dp = vec![0usize; (n1 + 1) * (n2 + 1) * (n3 + 1) * (n4 + 1)];
    let idx = |i: usize, j: usize, k: usize, l: usize| {
        i * strides.0 + j * strides.1 + k * strides.2 + l
    };
    for i in 1..=n1 {
        for j in 1..=n2 {
            for k in 1..=n3 {
                for l in 1..=n4 {
                    dp[idx(i, j, k, l)] = if a[i - 1] == b[j - 1]
                        && b[j - 1] == c[k - 1]
                        && c[k - 1] == d[l - 1]
                    {
                        dp[idx(i - 1, j - 1, k - 1, l - 1)] + 1
                    } else {
                        dp[idx(i - 1, j, k, l)]
                            .max(dp[idx(i, j - 1, k, l)])
                            .max(dp[idx(i, j, k - 1, l)])
                            .max(dp[idx(i, j, k, l - 1)])
                    };
                }
            }
        }
    }
    dp[idx(n1, n2, n3, n4)]
}

/// Levenshtein distance with unit costs.
pub fn edit_distance(a: &[usize], b: &[usize]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// One evaluated sample: decoded outputs and ground truth per modality, all
/// in concept space.
#[derive(Clone, Debug)]
pub struct AssociationSample {
    pub output_visual: Vec<usize>,
    pub output_audio: Vec<usize>,
    pub gt_visual: Vec<usize>,
    pub gt_audio: Vec<usize>,
}

/// Batch association accuracy: the 4-way common-subsequence mass over the
/// shared ground-truth mass.
pub fn association_accuracy(batch: &[AssociationSample]) -> Result<f64> {
    let mut num = 0usize;
    let mut den = 0usize;
    for s in batch {
        num += lcs4(&s.output_audio, &s.output_visual, &s.gt_audio, &s.gt_visual);
        den += lcs2(&s.gt_audio, &s.gt_visual);
    }
    if den == 0 {
        return Err(Error::NoSharedGroundTruth);
    }
    Ok(num as f64 / den as f64)
}

/// Mean normalized edit distance. May exceed 1 when outputs run long;
/// reported unclipped.
pub fn label_error_rate(pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("label_error_rate"));
    }
    let mut total = 0.0;
    for (output, gt) in pairs {
        if gt.is_empty() {
            return Err(Error::EmptyReference);
        }
        total += edit_distance(output, gt) as f64 / gt.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Fraction of vocabulary concepts bound to the same channel by both
/// modalities.
pub fn binding_consistency(
    visual: &AssignmentPermutation,
    audio: &AssignmentPermutation,
) -> f64 {
    assert_eq!(visual.len(), audio.len(), "assignments over one vocabulary");
    if visual.is_empty() {
        return 1.0;
    }
    let same = (0..visual.len())
        .filter(|&i| visual.channel_of(i) == audio.channel_of(i))
        .count();
    same as f64 / visual.len() as f64
}

/// Metrics for one bucket of samples grouped by total missing-element count.
#[derive(Clone, Debug, Serialize)]
pub struct MissingBucket {
    pub missing: usize,
    pub n_samples: usize,
    pub aacc: f64,
    pub ler_visual: f64,
    pub ler_audio: f64,
}

/// Full evaluation summary over the resampled eval runs.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub aacc_mean: f64,
    pub aacc_std: f64,
    pub ler_visual_mean: f64,
    pub ler_visual_std: f64,
    pub ler_audio_mean: f64,
    pub ler_audio_std: f64,
    pub binding_consistency: f64,
    pub n_samples: usize,
    pub resamples: usize,
    pub per_missing: Vec<MissingBucket>,
}

impl EvalReport {
    /// CSV rows for plotting: one line per missing-count bucket.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("missing,n_samples,aacc,ler_visual,ler_audio\n");
        for b in &self.per_missing {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                b.missing, b.n_samples, b.aacc, b.ler_visual, b.ler_audio
            ));
        }
        out
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / values.len() as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs2_basics() {
        assert_eq!(lcs2(&[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5]), 5);
        assert_eq!(lcs2(&[1, 2], &[3, 4]), 0);
        assert_eq!(lcs2(&[1, 2, 3, 4], &[2, 4]), 2);
        assert_eq!(lcs2(&[], &[1]), 0);
    }

    #[test]
    fn lcs4_basics() {
        let s = [3, 1, 2];
        assert_eq!(lcs4(&s, &s, &s, &s), 3);
        assert_eq!(lcs4(&[], &[1], &[1], &[1]), 0);
        assert_eq!(lcs4(&[1, 3], &[1, 2, 3], &[1, 3], &[1, 2, 3]), 2);
    }

    #[test]
    fn lcs4_bounded_by_pairwise() {
        let a = [1, 2, 3];
        let b = [2, 3, 1];
        let c = [3, 1, 2];
        let d = [1, 3, 2];
        let four = lcs4(&a, &b, &c, &d);
        assert!(four <= lcs2(&a, &b));
        assert!(four <= lcs2(&c, &d));
        assert!(four <= lcs2(&a, &d));
    }

    #[test]
    fn edit_distance_basics() {
        assert_eq!(edit_distance(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(edit_distance(&[1, 2], &[1, 3]), 1);
        assert_eq!(edit_distance(&[], &[1, 2, 3, 4]), 4);
        assert_eq!(edit_distance(&[1, 2, 3], &[2, 3]), 1);
    }

    #[test]
    fn association_accuracy_cases() {
        let perfect = AssociationSample {
            output_visual: vec![1, 2, 3],
            output_audio: vec![1, 3],
            gt_visual: vec![1, 2, 3],
            gt_audio: vec![1, 3],
        };
        assert!((association_accuracy(&[perfect.clone()]).unwrap() - 1.0).abs() < 1e-12);

        let empty_outputs = AssociationSample {
            output_visual: vec![],
            output_audio: vec![],
            ..perfect.clone()
        };
        assert_eq!(association_accuracy(&[empty_outputs]).unwrap(), 0.0);

        let no_shared = AssociationSample {
            output_visual: vec![1],
            output_audio: vec![2],
            gt_visual: vec![1],
            gt_audio: vec![2],
        };
        assert!(matches!(
            association_accuracy(&[no_shared]),
            Err(Error::NoSharedGroundTruth)
        ));
    }

    #[test]
    fn label_error_rate_cases() {
        let exact = vec![(vec![1, 2], vec![1, 2])];
        assert_eq!(label_error_rate(&exact).unwrap(), 0.0);

        let one_sub = vec![(vec![1, 2], vec![1, 3])];
        assert!((label_error_rate(&one_sub).unwrap() - 0.5).abs() < 1e-12);

        let all_deleted = vec![(vec![], vec![1, 2, 3, 4])];
        assert!((label_error_rate(&all_deleted).unwrap() - 1.0).abs() < 1e-12);

        assert!(matches!(
            label_error_rate(&[(vec![1], vec![])]),
            Err(Error::EmptyReference)
        ));
    }

    #[test]
    fn binding_consistency_counts_matches() {
        let a = AssignmentPermutation::identity(10);
        assert_eq!(binding_consistency(&a, &a), 1.0);

        // swap one pair: 8 of 10 concepts still agree
        let mut perm: Vec<usize> = (0..10).collect();
        perm.swap(0, 1);
        let b = AssignmentPermutation::from_vec(perm).unwrap();
        assert!((binding_consistency(&a, &b) - 0.8).abs() < 1e-12);

        // full derangement: nothing agrees
        let rotated = AssignmentPermutation::from_vec((0..10).map(|i| (i + 1) % 10).collect())
            .unwrap();
        assert_eq!(binding_consistency(&a, &rotated), 0.0);
    }

    #[test]
    fn report_csv_schema() {
        let report = EvalReport {
            aacc_mean: 0.5,
            aacc_std: 0.1,
            ler_visual_mean: 0.2,
            ler_visual_std: 0.0,
            ler_audio_mean: 0.3,
            ler_audio_std: 0.0,
            binding_consistency: 1.0,
            n_samples: 10,
            resamples: 5,
            per_missing: vec![MissingBucket {
                missing: 2,
                n_samples: 10,
                aacc: 0.5,
                ler_visual: 0.2,
                ler_audio: 0.3,
            }],
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("missing,n_samples,aacc,ler_visual,ler_audio\n"));
        assert!(csv.contains("2,10,0.500000,0.200000,0.300000"));
    }
}
