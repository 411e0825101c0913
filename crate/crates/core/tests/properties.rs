//! Property tests for the numeric and dynamic-programming invariants.

use proptest::prelude::*;

use mmsa_core::align::{dtw, warp_targets, WarpDirection};
use mmsa_core::binding::row_column_elimination;
use mmsa_core::ctc::{best_path_decode, ctc_lattice, ctc_target, min_frames};
use mmsa_core::metrics::{edit_distance, lcs2, lcs4};
use mmsa_core::mmt::{read_tensor, write_tensor};
use mmsa_core::{logsumexp, softmax_rows, Matrix, Rng};

fn finite_vec(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, len)
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(
        rows in 1usize..6,
        cols in 1usize..8,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.uniform(-50.0, 50.0);
        }
        let s = softmax_rows(&m).unwrap();
        for r in 0..rows {
            let sum: f64 = s.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            // a dominated row can round its winner to exactly 1.0
            prop_assert!(s.row(r).iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn logsumexp_shift_identity(v in finite_vec(5, -30.0, 30.0), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let lhs = logsumexp(&shifted).unwrap();
        let rhs = logsumexp(&v).unwrap() + c;
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn tensor_round_trip(rows in 1usize..20, cols in 1usize..20, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = rng.uniform(-1e9, 1e9);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mmt");
        write_tensor(&path, &m).unwrap();
        prop_assert_eq!(read_tensor(&path).unwrap(), m);
    }

    #[test]
    fn dtw_self_alignment_is_diagonal(rows in 1usize..8, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut m = Matrix::zeros(rows, 3);
        for v in m.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let (cost, path) = dtw(&m, &m).unwrap();
        prop_assert!(cost.abs() < 1e-9);
        let diagonal: Vec<(usize, usize)> = (0..rows).map(|i| (i, i)).collect();
        prop_assert_eq!(path.pairs(), &diagonal[..]);
    }

    #[test]
    fn dtw_cost_symmetric(n in 1usize..7, m in 1usize..7, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut a = Matrix::zeros(n, 2);
        let mut b = Matrix::zeros(m, 2);
        for v in a.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        for v in b.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let (c_ab, _) = dtw(&a, &b).unwrap();
        let (c_ba, _) = dtw(&b, &a).unwrap();
        prop_assert!((c_ab - c_ba).abs() < 1e-10);
    }

    #[test]
    fn warped_target_rows_are_distributions(
        n in 1usize..7,
        m in 1usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let mut y = Matrix::zeros(n, 4);
        let mut other = Matrix::zeros(m, 4);
        for v in other.data_mut() {
            *v = rng.uniform(0.0, 1.0);
        }
        for t in 0..n {
            let row = y.row_mut(t);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = rng.uniform(0.01, 1.0);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let (_, path) = dtw(&y, &other).unwrap();
        let warped = warp_targets(&y, &path, m, WarpDirection::FirstToSecond).unwrap();
        for t in 0..m {
            let sum: f64 = warped.row(t).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ctc_targets_normalized_and_lattice_consistent(
        t_len in 2usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let classes = 3;
        let mut z = Matrix::zeros(t_len, classes);
        for t in 0..t_len {
            let row = z.row_mut(t);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = rng.uniform(0.05, 1.0);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let k = 1 + rng.below(2);
        let transcript: Vec<usize> = (0..k).map(|_| rng.below(classes - 1)).collect();
        prop_assume!(t_len >= min_frames(&transcript));
        let lat = ctc_lattice(&z, &transcript).unwrap();
        let y = ctc_target(&lat, &z).unwrap();
        for t in 0..t_len {
            let sum: f64 = y.row(t).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
        }
        for t in 0..t_len {
            let mut terms = Vec::new();
            for u in 0..2 * transcript.len() + 1 {
                let fw = lat.log_fw.get(t, u);
                let bw = lat.log_bw.get(t, u);
                if fw > f64::NEG_INFINITY && bw > f64::NEG_INFINITY {
                    let c = lat.labeling().label(u);
                    terms.push(fw + bw - z.get(t, c).max(1e-300).ln());
                }
            }
            let total = logsumexp(&terms).unwrap();
            prop_assert!((total - lat.log_prob).abs() < 1e-8);
        }
    }

    #[test]
    fn decode_idempotent_through_one_hot(
        transcript in proptest::collection::vec(0usize..3, 1..6),
    ) {
        // rebuild a frame sequence with blanks between repeats and decode
        let blank = 3;
        let mut frames = Vec::new();
        let mut prev = None;
        for &c in &transcript {
            if prev == Some(c) {
                frames.push(blank);
            }
            frames.push(c);
            prev = Some(c);
        }
        let mut z = Matrix::zeros(frames.len(), 4);
        for (t, &c) in frames.iter().enumerate() {
            z.set(t, c, 1.0);
        }
        prop_assert_eq!(best_path_decode(&z), transcript);
    }

    #[test]
    fn elimination_is_bijection(n in 2usize..8, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut m = Matrix::zeros(n, n);
        for v in m.data_mut() {
            *v = rng.uniform(0.0, 1.0);
        }
        prop_assert!(row_column_elimination(&m).is_bijection());
    }

    #[test]
    fn lcs_and_edit_distance_laws(
        a in proptest::collection::vec(0usize..3, 0..7),
        b in proptest::collection::vec(0usize..3, 0..7),
        c in proptest::collection::vec(0usize..3, 0..7),
    ) {
        prop_assert_eq!(lcs4(&a, &a, &a, &a), a.len());
        let four = lcs4(&a, &b, &a, &c);
        prop_assert!(four <= lcs2(&a, &b));
        prop_assert!(four <= lcs2(&a, &c));
        prop_assert_eq!(edit_distance(&a, &a), 0);
        // triangle inequality
        let ab = edit_distance(&a, &b);
        let bc = edit_distance(&b, &c);
        let ac = edit_distance(&a, &c);
        prop_assert!(ac <= ab + bc);
        prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
    }

    #[test]
    fn rng_streams_reproducible(seed in any::<u64>()) {
        let mut a = Rng::new(seed);
        let mut b = Rng::new(seed);
        for _ in 0..100 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
