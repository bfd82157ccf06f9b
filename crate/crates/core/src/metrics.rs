//! Evaluation metrics: adjusted Rand index between partitions, Frobenius
//! recovery error, F1 over sparsity support, and optimal cluster matching.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Support-recovery confusion counts. Positions compared are the strict
/// upper triangle by default; the diagonal joins only on request, since a
/// zero-diagonal penalty never shrinks diagonals and counting them would
/// inflate agreement. `fn_` is the false-negative count (`fn` is reserved).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Chance-corrected pair-counting agreement between two partitions.
/// Returns 1.0 for identical partitions; 0 in expectation under random
/// labeling. When the pair-counting denominator vanishes (both partitions
/// trivial in the same way), the partitions agree on every pair and the
/// index is 1 by convention.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::domain("adjusted Rand index needs at least 2 items"));
    }
    let (a_ids, ka) = compact_labels(a);
    let (b_ids, kb) = compact_labels(b);
    let mut counts = vec![0u64; ka * kb];
    for i in 0..n {
        counts[a_ids[i] * kb + b_ids[i]] += 1;
    }
    let choose2 = |x: u64| -> f64 { (x as f64) * (x as f64 - 1.0) / 2.0 };
    let mut index = 0.0;
    for &c in &counts {
        index += choose2(c);
    }
    let mut row_sum = 0.0;
    for i in 0..ka {
        let r: u64 = (0..kb).map(|j| counts[i * kb + j]).sum();
        row_sum += choose2(r);
    }
    let mut col_sum = 0.0;
    for j in 0..kb {
        let c: u64 = (0..ka).map(|i| counts[i * kb + j]).sum();
        col_sum += choose2(c);
    }
    let expected = row_sum * col_sum / choose2(n as u64);
    let max = 0.5 * (row_sum + col_sum);
    if (max - expected).abs() == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Maps arbitrary labels to 0..k-1 in order of first appearance.
fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let ids = labels
        .iter()
        .map(|&l| match seen.iter().position(|&s| s == l) {
            Some(i) => i,
            None => {
                seen.push(l);
                seen.len() - 1
            }
        })
        .collect();
    (ids, seen.len())
}

/// Entrywise L2 distance between equally sized matrices.
pub fn frobenius_distance<F: Scalar>(a: &Matrix<F>, b: &Matrix<F>) -> Result<F> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::dim("frobenius operand rows", a.rows(), b.rows()));
    }
    let mut acc = F::zero();
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = *x - *y;
        acc = acc + d * d;
    }
    Ok(acc.sqrt())
}

/// F1 score over sparsity supports, where support membership is exact
/// nonzeroness (the solver's soft threshold writes exact zeros, so no
/// tolerance is involved). F1 = tp / (tp + (fp + fn)/2), with the empty
/// convention F1 = 1 when tp = fp = fn = 0.
pub fn f1_support<F: Scalar>(
    truth: &Matrix<F>,
    estimate: &Matrix<F>,
    include_diagonal: bool,
) -> Result<(f64, ConfusionCounts)> {
    if truth.rows() != estimate.rows() || truth.cols() != estimate.cols() {
        return Err(Error::dim(
            "f1 operand rows",
            truth.rows(),
            estimate.rows(),
        ));
    }
    if !truth.is_square() {
        return Err(Error::dim("f1 operands", truth.rows(), truth.cols()));
    }
    let p = truth.rows();
    let mut counts = ConfusionCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for j in 0..p {
        let start = if include_diagonal { j } else { j + 1 };
        for h in start..p {
            let in_truth = truth[(j, h)] != F::zero();
            let in_est = estimate[(j, h)] != F::zero();
            match (in_truth, in_est) {
                (true, true) => counts.tp += 1,
                (false, true) => counts.fp += 1,
                (true, false) => counts.fn_ += 1,
                (false, false) => counts.tn += 1,
            }
        }
    }
    let f1 = if counts.tp + counts.fp + counts.fn_ == 0 {
        1.0
    } else {
        counts.tp as f64 / (counts.tp as f64 + 0.5 * (counts.fp + counts.fn_) as f64)
    };
    Ok((f1, counts))
}

/// Finds the relabeling of estimated clusters that best aligns with the
/// reference labels: returns `perm` with `perm[e] = t` maximizing the
/// matched count Σ_e confusion[e][perm[e]], by exact assignment. Apply it
/// before component-wise comparisons so cluster 2's estimate is scored
/// against the component it actually captured.
pub fn match_clusters(est: &[usize], truth: &[usize]) -> Result<Vec<usize>> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: truth.len(),
        });
    }
    let k = est
        .iter()
        .chain(truth.iter())
        .map(|&l| l + 1)
        .max()
        .unwrap_or(0);
    if k == 0 {
        return Err(Error::domain("match_clusters needs at least one label"));
    }
    let mut confusion = vec![0.0f64; k * k];
    for (&e, &t) in est.iter().zip(truth) {
        confusion[e * k + t] += 1.0;
    }
    let max = confusion.iter().fold(0.0f64, |a, &b| a.max(b));
    let cost: Vec<f64> = confusion.iter().map(|&c| max - c).collect();
    Ok(assignment_min(k, &cost))
}

/// Exact minimum-cost assignment on a k x k cost matrix via the potentials
/// method; returns the column assigned to each row. O(k^3).
fn assignment_min(k: usize, cost: &[f64]) -> Vec<usize> {
    // 1-indexed arrays with a virtual row/column 0, the standard formulation.
    let mut u = vec![0.0f64; k + 1];
    let mut v = vec![0.0f64; k + 1];
    let mut p = vec![0usize; k + 1]; // p[j] = row matched to column j
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; k];
    for j in 1..=k {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::seeded_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Pair-by-pair Rand statistic: counts pairs together in both, split in
    /// both, and mixed, then applies the chance correction in the ss/sd/ds/dd
    /// form. Shares nothing with the contingency-table implementation.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut ss, mut sd, mut ds, mut dd) = (0.0f64, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => ss += 1.0,
                    (true, false) => sd += 1.0,
                    (false, true) => ds += 1.0,
                    (false, false) => dd += 1.0,
                }
            }
        }
        let num = 2.0 * (ss * dd - sd * ds);
        let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
        if den == 0.0 {
            1.0
        } else {
            num / den
        }
    }

    #[test]
    fn ari_identical_and_permuted_partitions_score_one() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap(), 1.0);
        // Both trivial: every pair agrees, convention says 1.
        assert_eq!(adjusted_rand_index(&[3, 3, 3], &[5, 5, 5]).unwrap(), 1.0);
    }

    #[test]
    fn ari_matches_exhaustive_pair_enumeration() {
        let a = [1, 1, 1, 2, 2, 2];
        let b = [1, 1, 2, 2, 3, 3];
        let got = adjusted_rand_index(&a, &b).unwrap();
        assert_relative_eq!(got, ari_by_pairs(&a, &b), epsilon = 1e-12);
    }

    #[test]
    fn ari_is_relabeling_invariant_on_random_partitions() {
        let mut rng = seeded_rng(40);
        for _ in 0..20 {
            let n = rng.gen_range(5..30);
            let a: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let base = adjusted_rand_index(&a, &b).unwrap();
            assert_relative_eq!(base, ari_by_pairs(&a, &b), epsilon = 1e-12);
            // Relabel a by an affine shuffle of label ids.
            let a2: Vec<usize> = a.iter().map(|&l| (l * 7 + 3) % 11).collect();
            assert_relative_eq!(
                adjusted_rand_index(&a2, &b).unwrap(),
                base,
                epsilon = 1e-12
            );
            assert_relative_eq!(
                adjusted_rand_index(&a, &a).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ari_rejects_bad_inputs() {
        assert!(matches!(
            adjusted_rand_index(&[0, 1], &[0, 1, 2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            adjusted_rand_index(&[0], &[0]),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn frobenius_basics_and_entrywise_oracle() {
        let a = Matrix::<f64>::identity(2);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        let zero = Matrix::<f64>::zeros(2, 2);
        assert_relative_eq!(
            frobenius_distance(&a, &zero).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-15
        );

        let mut rng = seeded_rng(14);
        let x = Matrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0f64));
        let y = Matrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0f64));
        let mut acc = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                acc += (x[(i, j)] - y[(i, j)]).powi(2);
            }
        }
        assert_relative_eq!(
            frobenius_distance(&x, &y).unwrap(),
            acc.sqrt(),
            epsilon = 1e-12
        );
        assert!(frobenius_distance(&x, &Matrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn f1_scores_match_hand_counts() {
        // Perfect recovery with zeros present.
        let t = Matrix::from_rows(vec![
            vec![1.0, 0.4, 0.0],
            vec![0.4, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let (f1, c) = f1_support(&t, &t, false).unwrap();
        assert_eq!(f1, 1.0);
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 2 });

        // Dense truth, empty estimate: no true positives.
        let dense = Matrix::from_fn(3, 3, |_, _| 1.0f64);
        let diag = Matrix::<f64>::identity(3);
        let (f1, _) = f1_support(&dense, &diag, false).unwrap();
        assert_eq!(f1, 0.0);

        // Truth support {(0,1)}, estimate {(0,1), (0,2)}.
        let e = Matrix::from_rows(vec![
            vec![1.0, 0.3, 0.2],
            vec![0.3, 1.0, 0.0],
            vec![0.2, 0.0, 1.0],
        ])
        .unwrap();
        let (f1, c) = f1_support(&t, &e, false).unwrap();
        assert_relative_eq!(f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 1 });

        // Diagonals join the count only on request.
        let (_, c) = f1_support(&t, &e, true).unwrap();
        assert_eq!(c.total(), 6);
        assert_eq!(c.tp, 4);

        // Both supports empty off-diagonal: convention 1.
        let (f1, _) = f1_support(&diag, &diag, false).unwrap();
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn f1_is_invariant_under_joint_transposition() {
        let t = Matrix::from_rows(vec![
            vec![1.0, 0.5, 0.0],
            vec![0.0, 1.0, 0.2],
            vec![0.3, 0.0, 1.0],
        ])
        .unwrap();
        let e = Matrix::from_rows(vec![
            vec![1.0, 0.0, 0.1],
            vec![0.4, 1.0, 0.0],
            vec![0.0, 0.2, 1.0],
        ])
        .unwrap();
        let (f1, _) = f1_support(&t, &e, false).unwrap();
        let (f1_t, _) = f1_support(&t.transpose(), &e.transpose(), false).unwrap();
        assert_eq!(f1, f1_t);
    }

    #[test]
    fn cluster_matching_recovers_identity_and_swaps() {
        let t = [0, 0, 1, 1, 2, 2];
        assert_eq!(match_clusters(&t, &t).unwrap(), vec![0, 1, 2]);
        let swapped = [1, 1, 0, 0, 2, 2];
        assert_eq!(match_clusters(&swapped, &t).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn cluster_matching_agrees_with_brute_force() {
        let mut rng = seeded_rng(15);
        for _ in 0..10 {
            let n = 30;
            let est: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let perm = match_clusters(&est, &truth).unwrap();
            let score = |p: &[usize]| -> usize {
                est.iter()
                    .zip(&truth)
                    .filter(|&(&e, &t)| p[e] == t)
                    .count()
            };
            let mut best = 0;
            for p in [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ] {
                best = best.max(score(&p));
            }
            assert_eq!(score(&perm), best, "assignment must hit the exhaustive optimum");
            assert!(score(&perm) >= score(&[0, 1, 2]));
        }
    }
}
