//! Latent accuracy estimation from vote agreement (triplet method) and the
//! conditionally independent weighted-vote label model.
//!
//! Accuracies live on the correlation scale, `a_j = E[lambda_j * Y]`, so
//! `P(lambda_j = Y) = (1 + a_j) / 2`.

use ndarray::{Array2, ArrayView2};

use crate::data::{LabelVector, ScoreVector, WeakLabelMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Estimates are clamped into `[DELTA, 1 - DELTA]` in magnitude.
pub const CLAMP_DELTA: f64 = 1e-3;
/// Triples whose denominator moment is smaller than this are skipped.
pub const MOMENT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EstimateFlags {
    /// Magnitude hit one of the clamp bounds.
    pub clamped: bool,
    /// At least one triple had a negative square-root argument; absolute
    /// moments were used for it.
    pub abs_moments: bool,
    /// No triple had a usable denominator; the magnitude is the lower clamp.
    pub degenerate: bool,
    /// Correlation with the majority vote was exactly zero; sign defaulted to +.
    pub sign_tie: bool,
    /// Resolved sign is negative (LF votes against the consensus).
    pub negative: bool,
}

/// Per-LF accuracy estimates on the correlation scale.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyEstimate<T> {
    pub per_lf: Vec<T>,
    pub flags: Vec<EstimateFlags>,
    /// Whether signs have been resolved; before that `per_lf` holds magnitudes.
    pub signed: bool,
}

impl<T: Scalar> AccuracyEstimate<T> {
    pub fn n_lfs(&self) -> usize {
        self.per_lf.len()
    }

    pub fn clamp_flags(&self) -> Vec<bool> {
        self.flags.iter().map(|f| f.clamped).collect()
    }

    pub fn degenerate_lfs(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, f)| f.degenerate)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Empirical second moments `E[lambda_i lambda_j]` as an `m x m` matrix.
pub fn vote_moments<T: Scalar>(weak: &WeakLabelMatrix) -> Array2<T> {
    let votes = weak.votes();
    let (n, m) = votes.dim();
    let mut counts = Array2::<i64>::zeros((m, m));
    for row in votes.rows() {
        for i in 0..m {
            let vi = i64::from(row[i]);
            for j in i..m {
                counts[[i, j]] += vi * i64::from(row[j]);
            }
        }
    }
    let n = T::of_usize(n);
    Array2::from_shape_fn((m, m), |(i, j)| {
        let c = if i <= j { counts[[i, j]] } else { counts[[j, i]] };
        T::from_i64(c).expect("count fits scalar") / n
    })
}

/// Triplet magnitudes from a moment matrix.
///
/// For LF `i`, every unordered pair `(j, k)` of other LFs yields
/// `sqrt(M_ij * M_ik / M_jk)`; the magnitudes are averaged over the pairs
/// whose `|M_jk|` clears [`MOMENT_FLOOR`], then clamped. Pairs are visited in
/// lexicographic order so the result is reproducible bit for bit.
pub fn triplet_from_moments<T: Scalar>(moments: ArrayView2<'_, T>) -> Result<AccuracyEstimate<T>> {
    let m = moments.nrows();
    if m < 3 {
        return Err(Error::TooFewLFs { m });
    }
    let floor = T::lit(MOMENT_FLOOR);
    let lo = T::lit(CLAMP_DELTA);
    let hi = T::one() - lo;
    let mut per_lf = Vec::with_capacity(m);
    let mut flags = vec![EstimateFlags::default(); m];
    for i in 0..m {
        let mut sum = T::zero();
        let mut used = 0usize;
        for j in 0..m {
            for k in (j + 1)..m {
                if j == i || k == i {
                    continue;
                }
                let den = moments[[j, k]];
                if den.abs() < floor {
                    continue;
                }
                let num = moments[[i, j]] * moments[[i, k]];
                if num / den < T::zero() {
                    flags[i].abs_moments = true;
                }
                sum += (num.abs() / den.abs()).sqrt();
                used += 1;
            }
        }
        let raw = if used == 0 {
            flags[i].degenerate = true;
            lo
        } else {
            sum / T::of_usize(used)
        };
        let clamped = if raw > hi {
            hi
        } else if raw < lo {
            lo
        } else {
            raw
        };
        flags[i].clamped = raw >= hi || raw <= lo;
        per_lf.push(clamped);
    }
    Ok(AccuracyEstimate {
        per_lf,
        flags,
        signed: false,
    })
}

/// Triplet magnitudes; LFs without any usable triple are flagged
/// `degenerate` instead of failing the whole estimate.
pub fn triplet_magnitudes<T: Scalar>(weak: &WeakLabelMatrix) -> Result<AccuracyEstimate<T>> {
    if weak.n_lfs() < 3 {
        return Err(Error::TooFewLFs { m: weak.n_lfs() });
    }
    if weak.n_rows() == 0 {
        return Err(Error::TooFewRows { n: 0, required: 1 });
    }
    triplet_from_moments(vote_moments::<T>(weak).view())
}

/// Strict variant of [`triplet_magnitudes`]: any degenerate LF is an error.
pub fn triplet_estimate<T: Scalar>(weak: &WeakLabelMatrix) -> Result<AccuracyEstimate<T>> {
    let est = triplet_magnitudes(weak)?;
    let bad = est.degenerate_lfs();
    if !bad.is_empty() {
        return Err(Error::DegenerateMoments { lfs: bad });
    }
    Ok(est)
}

/// Assigns each magnitude the sign of the LF's correlation with the
/// unweighted majority vote (ties to +1). If the mean signed accuracy is
/// negative, all signs flip: the convention assumes most LFs beat random.
pub fn resolve_signs<T: Scalar>(
    magnitudes: &AccuracyEstimate<T>,
    weak: &WeakLabelMatrix,
) -> Result<AccuracyEstimate<T>> {
    if magnitudes.n_lfs() != weak.n_lfs() {
        return Err(Error::DimensionMismatch {
            context: "accuracy estimate LFs",
            expected: weak.n_lfs(),
            found: magnitudes.n_lfs(),
        });
    }
    let mv = majority_vote(weak);
    let votes = weak.votes();
    let mut out = magnitudes.clone();
    for j in 0..weak.n_lfs() {
        let corr: i64 = votes
            .column(j)
            .iter()
            .zip(mv.as_slice())
            .map(|(&v, &y)| i64::from(v) * i64::from(y))
            .sum();
        let mag = magnitudes.per_lf[j].abs();
        out.flags[j].sign_tie = corr == 0;
        out.per_lf[j] = if corr < 0 { -mag } else { mag };
    }
    let mean: T = out.per_lf.iter().copied().sum::<T>() / T::of_usize(out.n_lfs().max(1));
    if mean < T::zero() {
        for a in &mut out.per_lf {
            *a = -*a;
        }
    }
    for (a, f) in out.per_lf.iter().zip(out.flags.iter_mut()) {
        f.negative = *a < T::zero();
    }
    out.signed = true;
    Ok(out)
}

/// Naive-Bayes weights of the weighted-vote label model.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelModelParams<T> {
    pub weights: Vec<T>,
    pub class_prior_logit: T,
}

/// `weight_j = ln((1 + a_j) / (1 - a_j))`, `prior = ln(p / (1 - p))`.
pub fn fit_label_model<T: Scalar>(acc: &AccuracyEstimate<T>, class_prior: T) -> Result<LabelModelParams<T>> {
    if !(class_prior > T::zero() && class_prior < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "class prior must lie in (0, 1), got {class_prior}"
        )));
    }
    let weights = acc
        .per_lf
        .iter()
        .map(|&a| ((T::one() + a) / (T::one() - a)).ln())
        .collect();
    Ok(LabelModelParams {
        weights,
        class_prior_logit: (class_prior / (T::one() - class_prior)).ln(),
    })
}

/// `sigmoid(prior_logit + sum_j weight_j * vote_ij)` per row.
pub fn predict_proba<T: Scalar>(params: &LabelModelParams<T>, weak: &WeakLabelMatrix) -> Result<ScoreVector<T>> {
    if params.weights.len() != weak.n_lfs() {
        return Err(Error::DimensionMismatch {
            context: "label model weights",
            expected: weak.n_lfs(),
            found: params.weights.len(),
        });
    }
    let scores = weak
        .votes()
        .rows()
        .into_iter()
        .map(|row| {
            let z = row
                .iter()
                .zip(&params.weights)
                .fold(params.class_prior_logit, |acc, (&v, &w)| {
                    if v > 0 {
                        acc + w
                    } else {
                        acc - w
                    }
                });
            z.sigmoid()
        })
        .collect();
    ScoreVector::new(scores)
}

/// `+1` iff score >= 0.5; an exact 0.5 goes to `+1`.
pub fn predict_labels<T: Scalar>(scores: &ScoreVector<T>) -> LabelVector {
    let half = T::lit(0.5);
    LabelVector::new(
        scores
            .as_slice()
            .iter()
            .map(|&s| if s >= half { 1 } else { -1 })
            .collect(),
    )
    .expect("thresholded labels are +-1")
}

/// Sign of each row sum; ties go to `+1`.
pub fn majority_vote(weak: &WeakLabelMatrix) -> LabelVector {
    LabelVector::new(
        weak.votes()
            .rows()
            .into_iter()
            .map(|row| {
                let s: i64 = row.iter().map(|&v| i64::from(v)).sum();
                if s >= 0 {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    )
    .expect("majority labels are +-1")
}

/// Positive rate of the label model's hard predictions under a flat prior,
/// pulled into `[0.01, 0.99]`. Used for the optional one-pass prior refinement.
pub fn estimate_class_prior<T: Scalar>(acc: &AccuracyEstimate<T>, weak: &WeakLabelMatrix) -> Result<T> {
    let params = fit_label_model(acc, T::lit(0.5))?;
    let labels = predict_labels(&predict_proba(&params, weak)?);
    let pos = labels.as_slice().iter().filter(|&&y| y > 0).count();
    let rate = T::of_usize(pos) / T::of_usize(labels.len().max(1));
    Ok(rate.max(T::lit(0.01)).min(T::lit(0.99)))
}

/// Triplet magnitudes followed by sign resolution, tolerating degenerate LFs.
pub fn estimate_accuracies<T: Scalar>(weak: &WeakLabelMatrix) -> Result<AccuracyEstimate<T>> {
    let mags = triplet_magnitudes(weak)?;
    resolve_signs(&mags, weak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn weak(rows: Vec<Vec<i8>>) -> WeakLabelMatrix {
        let n = rows.len();
        let m = rows[0].len();
        let flat: Vec<i8> = rows.into_iter().flatten().collect();
        WeakLabelMatrix::with_default_names(Array2::from_shape_vec((n, m), flat).unwrap()).unwrap()
    }

    fn truth_pattern(n: usize) -> Vec<i8> {
        (0..n).map(|i| if (i * 7 + 3) % 5 < 2 { 1 } else { -1 }).collect()
    }

    #[test]
    fn identical_voters_clamp_to_upper_bound() {
        let y = truth_pattern(50);
        let w = weak(y.iter().map(|&v| vec![v, v, v]).collect());
        let est = triplet_estimate::<f64>(&w).unwrap();
        for (a, f) in est.per_lf.iter().zip(&est.flags) {
            assert_eq!(*a, 1.0 - CLAMP_DELTA);
            assert!(f.clamped);
        }
    }

    #[test]
    fn population_moments_recover_accuracies() {
        let a = [0.8, 0.6, 0.4];
        let moments = Array2::from_shape_fn((3, 3), |(i, j)| if i == j { 1.0 } else { a[i] * a[j] });
        assert!((moments[[0, 1]] - 0.48f64).abs() < 1e-15);
        assert!((moments[[0, 2]] - 0.32f64).abs() < 1e-15);
        assert!((moments[[1, 2]] - 0.24f64).abs() < 1e-15);
        let est = triplet_from_moments(moments.view()).unwrap();
        for (e, t) in est.per_lf.iter().zip(a) {
            assert!((e - t).abs() < 1e-12);
        }
    }

    #[test]
    fn two_lfs_is_too_few() {
        let w = weak(vec![vec![1, 1], vec![-1, 1]]);
        assert!(matches!(triplet_estimate::<f64>(&w), Err(Error::TooFewLFs { m: 2 })));
    }

    #[test]
    fn uncorrelated_voters_are_degenerate() {
        // Columns 2 and 3 are orthogonal (zero moment), and so on pairwise.
        let w = weak(vec![
            vec![1, 1, 1],
            vec![1, -1, -1],
            vec![-1, 1, -1],
            vec![-1, -1, 1],
        ]);
        let err = triplet_estimate::<f64>(&w).unwrap_err();
        assert!(matches!(err, Error::DegenerateMoments { ref lfs } if lfs == &vec![0, 1, 2]));
        let lenient = triplet_magnitudes::<f64>(&w).unwrap();
        assert!(lenient.flags.iter().all(|f| f.degenerate));
    }

    #[test]
    fn negative_ratio_flags_abs_moments() {
        // lf_3 disagrees with lf_1 everywhere, agrees with lf_2 on half.
        let m = array![[1.0f64, 0.5, -0.5], [0.5, 1.0, 0.5], [-0.5, 0.5, 1.0]];
        let est = triplet_from_moments(m.view()).unwrap();
        assert!(est.flags.iter().all(|f| f.abs_moments));
        assert!(est.per_lf.iter().all(|a| a.is_finite() && *a > 0.0));
    }

    #[test]
    fn signs_all_positive_when_lfs_equal_truth() {
        let y = truth_pattern(40);
        let w = weak(y.iter().map(|&v| vec![v; 4]).collect());
        let est = estimate_accuracies::<f64>(&w).unwrap();
        assert!(est.signed);
        assert!(est.per_lf.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn single_adversarial_lf_gets_negative_sign() {
        let y = truth_pattern(40);
        let w = weak(y.iter().map(|&v| vec![v, v, -v, v, v, v]).collect());
        let est = estimate_accuracies::<f64>(&w).unwrap();
        for (j, a) in est.per_lf.iter().enumerate() {
            assert_eq!(*a < 0.0, j == 2, "lf {j}");
        }
        assert!(est.flags[2].negative);
    }

    #[test]
    fn anticorrelated_pair_follows_majority() {
        let y = truth_pattern(40);
        let w = weak(y.iter().map(|&v| vec![v, v, v, -v]).collect());
        let est = estimate_accuracies::<f64>(&w).unwrap();
        assert!(est.per_lf[..3].iter().all(|&a| a > 0.0));
        assert!(est.per_lf[3] < 0.0);
        assert!(est.flags[3].negative && !est.flags[2].negative);
    }

    #[test]
    fn tie_defaults_to_positive_and_is_flagged() {
        let mags = AccuracyEstimate {
            per_lf: vec![0.5, 0.5, 0.5],
            flags: vec![EstimateFlags::default(); 3],
            signed: false,
        };
        // Majority is +1 on both rows; lf_3 correlates +1 then -1.
        let w = weak(vec![vec![1, 1, 1], vec![1, 1, -1]]);
        let est = resolve_signs(&mags, &w).unwrap();
        assert!(est.flags[2].sign_tie);
        assert!(est.per_lf[2] > 0.0);
    }

    #[test]
    fn weights_from_accuracies() {
        let acc = AccuracyEstimate {
            per_lf: vec![0.0, 0.8, -0.8],
            flags: vec![EstimateFlags::default(); 3],
            signed: true,
        };
        let p = fit_label_model(&acc, 0.5).unwrap();
        assert_eq!(p.weights[0], 0.0);
        assert!((p.weights[1] - 9f64.ln()).abs() < 1e-12);
        assert!((p.weights[1] - 2.1972).abs() < 1e-4);
        assert!((p.weights[2] + 9f64.ln()).abs() < 1e-12);
        assert_eq!(p.class_prior_logit, 0.0);
        assert!(fit_label_model(&acc, 1.0).is_err());
    }

    #[test]
    fn dominant_voter_saturates_score() {
        let acc = AccuracyEstimate {
            per_lf: vec![1.0 - CLAMP_DELTA],
            flags: vec![EstimateFlags::default()],
            signed: true,
        };
        let p = fit_label_model(&acc, 0.5).unwrap();
        let s = predict_proba(&p, &weak(vec![vec![1], vec![-1]])).unwrap();
        // (1 + a) / 2 with a = 1 - delta.
        assert!((s.as_slice()[0] - (1.0 - CLAMP_DELTA / 2.0)).abs() < 1e-12);
        assert!((s.as_slice()[1] - CLAMP_DELTA / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_half() {
        let p = LabelModelParams {
            weights: vec![0.0; 3],
            class_prior_logit: 0.0,
        };
        let s = predict_proba(&p, &weak(vec![vec![1, -1, 1], vec![-1, -1, -1]])).unwrap();
        assert!(s.as_slice().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn symmetric_votes_cancel() {
        let p = LabelModelParams {
            weights: vec![1.0, 1.0],
            class_prior_logit: 0.0,
        };
        let s = predict_proba(&p, &weak(vec![vec![1, -1]])).unwrap();
        assert_eq!(s.as_slice()[0], 0.5);
    }

    #[test]
    fn thresholding_and_ties() {
        let s = ScoreVector::new(vec![0.5, 0.49, 0.51, 0.0]).unwrap();
        assert_eq!(predict_labels(&s).as_slice(), &[1, -1, 1, -1]);
        let w = weak(vec![vec![1, 1, -1], vec![1, -1, -1]]);
        assert_eq!(majority_vote(&w).as_slice(), &[1, -1]);
        let w = weak(vec![vec![1, -1]]);
        assert_eq!(majority_vote(&w).as_slice(), &[1]);
    }

    #[test]
    fn class_prior_estimate_is_positive_rate() {
        let w = weak(vec![vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 1], vec![-1, -1, -1]]);
        let acc = AccuracyEstimate {
            per_lf: vec![0.5; 3],
            flags: vec![EstimateFlags::default(); 3],
            signed: true,
        };
        assert!((estimate_class_prior(&acc, &w).unwrap() - 0.75f64).abs() < 1e-15);
    }

    fn vote_rows(m: usize) -> impl Strategy<Value = Vec<Vec<i8>>> {
        proptest::collection::vec(proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], m), 1..40)
    }

    proptest! {
        #[test]
        fn equal_weights_reproduce_majority_vote(rows in vote_rows(5), w in 0.01f64..5.0) {
            let wk = weak(rows);
            let p = LabelModelParams { weights: vec![w; 5], class_prior_logit: 0.0 };
            let labels = predict_labels(&predict_proba(&p, &wk).unwrap());
            prop_assert_eq!(labels, majority_vote(&wk));
        }

        #[test]
        fn permutation_equivariant(rows in vote_rows(4), ws in proptest::collection::vec(-3.0f64..3.0, 4), prior in -1.0f64..1.0) {
            let wk = weak(rows.clone());
            let perm = [2usize, 0, 3, 1];
            let permuted = weak(rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect());
            let p = LabelModelParams { weights: ws.clone(), class_prior_logit: prior };
            let pp = LabelModelParams { weights: perm.iter().map(|&j| ws[j]).collect(), class_prior_logit: prior };
            let a = predict_proba(&p, &wk).unwrap();
            let b = predict_proba(&pp, &permuted).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn common_positive_rescale_keeps_labels(rows in vote_rows(4), ws in proptest::collection::vec(-3.0f64..3.0, 4), prior in -1.0f64..1.0, c in 0.1f64..10.0) {
            let wk = weak(rows);
            let p = LabelModelParams { weights: ws.clone(), class_prior_logit: prior };
            let q = LabelModelParams { weights: ws.iter().map(|w| w * c).collect(), class_prior_logit: prior * c };
            let a = predict_labels(&predict_proba(&p, &wk).unwrap());
            let b = predict_labels(&predict_proba(&q, &wk).unwrap());
            // Both sides threshold the same logit sign; only exact zeros could differ.
            prop_assert_eq!(a, b);
        }

        #[test]
        fn triplet_identity_on_analytic_moments(a in proptest::collection::vec(0.05f64..0.95, 3..7)) {
            let m = a.len();
            let moments = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { a[i] * a[j] });
            let est = triplet_from_moments(moments.view()).unwrap();
            for (e, t) in est.per_lf.iter().zip(&a) {
                prop_assert!((e - t).abs() < 1e-12);
            }
        }
    }
}
