//! Performance and group-fairness metrics, demographic-parity thresholding,
//! and the empirical accuracy-center scan.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{FeatureMatrix, GroupAssignment, LabelVector, ScoreVector};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    T::of_usize(num) / T::of_usize(den)
}

/// Predicted-positive counts and row counts per group.
fn positives_by_group(pred: &LabelVector, groups: &GroupAssignment) -> ([usize; 2], [usize; 2]) {
    let mut pos = [0usize; 2];
    let mut n = [0usize; 2];
    for (&y, &g) in pred.as_slice().iter().zip(groups.as_slice()) {
        n[usize::from(g)] += 1;
        if y > 0 {
            pos[usize::from(g)] += 1;
        }
    }
    (pos, n)
}

/// `|P(pred = 1 | A = 1) - P(pred = 1 | A = 0)|`.
pub fn dp_gap<T: Scalar>(pred: &LabelVector, groups: &GroupAssignment) -> Result<T> {
    check_len("prediction rows", groups.len(), pred.len())?;
    groups.require_both()?;
    let (pos, n) = positives_by_group(pred, groups);
    Ok((ratio::<T>(pos[1], n[1]) - ratio::<T>(pos[0], n[0])).abs())
}

/// `|TPR_1 - TPR_0|`, or `None` when a group has no positive ground truth.
pub fn eo_gap<T: Scalar>(pred: &LabelVector, truth: &LabelVector, groups: &GroupAssignment) -> Result<Option<T>> {
    check_len("prediction rows", groups.len(), pred.len())?;
    check_len("truth rows", groups.len(), truth.len())?;
    groups.require_both()?;
    let mut tp = [0usize; 2];
    let mut p = [0usize; 2];
    for ((&yh, &y), &g) in pred.as_slice().iter().zip(truth.as_slice()).zip(groups.as_slice()) {
        if y > 0 {
            p[usize::from(g)] += 1;
            if yh > 0 {
                tp[usize::from(g)] += 1;
            }
        }
    }
    if p[0] == 0 || p[1] == 0 {
        return Ok(None);
    }
    Ok(Some((ratio::<T>(tp[1], p[1]) - ratio::<T>(tp[0], p[0])).abs()))
}

/// Accuracy and F1 with +1 as the positive class; F1 is 0 when precision and
/// recall are both 0 (or undefined).
pub fn accuracy_f1<T: Scalar>(pred: &LabelVector, truth: &LabelVector) -> Result<(T, T)> {
    check_len("prediction vs truth length", truth.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::TooFewRows { n: 0, required: 1 });
    }
    let (mut tp, mut fp, mut fneg, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&yh, &y) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (yh > 0, y > 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
        if yh == y {
            correct += 1;
        }
    }
    let acc = ratio::<T>(correct, pred.len());
    // 2 TP / (2 TP + FP + FN) equals 2PR / (P + R) whenever the latter is defined.
    let f1 = if tp == 0 {
        T::zero()
    } else {
        ratio::<T>(2 * tp, 2 * tp + fp + fneg)
    };
    Ok((acc, f1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessReport<T> {
    pub accuracy: T,
    pub f1: T,
    pub dp_gap: T,
    pub eo_gap: Option<T>,
    pub n_per_group: [usize; 2],
    /// Predicted positives per group.
    pub positives_per_group: [usize; 2],
}

impl<T: Scalar> FairnessReport<T> {
    /// `{"accuracy", "f1", "dp_gap", "eo_gap" (null when undefined), "n0", "n1", ...}`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Json {
            accuracy: f64,
            f1: f64,
            dp_gap: f64,
            eo_gap: Option<f64>,
            n0: usize,
            n1: usize,
            pos0: usize,
            pos1: usize,
        }
        serde_json::to_value(Json {
            accuracy: self.accuracy.as_f64(),
            f1: self.f1.as_f64(),
            dp_gap: self.dp_gap.as_f64(),
            eo_gap: self.eo_gap.map(|x| x.as_f64()),
            n0: self.n_per_group[0],
            n1: self.n_per_group[1],
            pos0: self.positives_per_group[0],
            pos1: self.positives_per_group[1],
        })
        .expect("report serializes")
    }
}

pub fn fairness_report<T: Scalar>(
    pred: &LabelVector,
    truth: &LabelVector,
    groups: &GroupAssignment,
) -> Result<FairnessReport<T>> {
    let (accuracy, f1) = accuracy_f1(pred, truth)?;
    let dp = dp_gap(pred, groups)?;
    let eo = eo_gap(pred, truth, groups)?;
    let (pos, n) = positives_by_group(pred, groups);
    Ok(FairnessReport {
        accuracy,
        f1,
        dp_gap: dp,
        eo_gap: eo,
        n_per_group: n,
        positives_per_group: pos,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpThreshold<T> {
    pub thresholds: [T; 2],
    pub labels: LabelVector,
}

/// Per-group thresholds from the grid `{0, 1/(grid-1), ..., 1}` (predict +1
/// iff score >= threshold). Among pairs with the smallest positive-rate gap,
/// the pair agreeing most with `reference` wins; remaining ties go to the
/// lowest `(t0, t1)`. An odd grid contains 0.5, so the result never has a
/// larger gap than plain 0.5 thresholding.
pub fn dp_threshold<T: Scalar>(
    scores: &ScoreVector<T>,
    groups: &GroupAssignment,
    reference: &LabelVector,
    grid: usize,
) -> Result<DpThreshold<T>> {
    check_len("score rows", groups.len(), scores.len())?;
    check_len("reference rows", groups.len(), reference.len())?;
    groups.require_both()?;
    if grid < 2 {
        return Err(Error::InvalidParameter(format!("grid must be >= 2, got {grid}")));
    }
    let thresholds: Vec<T> = (0..grid)
        .map(|i| T::of_usize(i) / T::of_usize(grid - 1))
        .collect();

    // For each group and grid index: predicted positives and agreements with
    // the reference, via sorted scores and a sweep.
    let mut pos = [vec![0usize; grid], vec![0usize; grid]];
    let mut agree = [vec![0usize; grid], vec![0usize; grid]];
    let mut n = [0usize; 2];
    for g in 0..2u8 {
        let mut rows: Vec<(T, i8)> = scores
            .as_slice()
            .iter()
            .zip(reference.as_slice())
            .zip(groups.as_slice())
            .filter(|(_, &gg)| gg == g)
            .map(|((&s, &r), _)| (s, r))
            .collect();
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let total_neg = rows.iter().filter(|r| r.1 < 0).count();
        n[usize::from(g)] = rows.len();
        // Rows with score < t predict -1; the rest predict +1.
        let mut below = 0usize;
        let mut below_neg = 0usize;
        let mut below_pos = 0usize;
        for (ti, &t) in thresholds.iter().enumerate() {
            while below < rows.len() && rows[below].0 < t {
                if rows[below].1 < 0 {
                    below_neg += 1;
                } else {
                    below_pos += 1;
                }
                below += 1;
            }
            let above_pos_ref = (rows.len() - below) - (total_neg - below_neg);
            pos[usize::from(g)][ti] = rows.len() - below;
            agree[usize::from(g)][ti] = below_neg + above_pos_ref;
            debug_assert_eq!(below, below_neg + below_pos);
        }
    }

    // Gap compared exactly as |p1 * n0 - p0 * n1| to avoid float ties.
    let mut best: Option<(u128, usize, usize, usize)> = None;
    for i in 0..grid {
        for j in 0..grid {
            let lhs = pos[1][j] as i128 * n[0] as i128;
            let rhs = pos[0][i] as i128 * n[1] as i128;
            let gap = (lhs - rhs).unsigned_abs();
            let acc = agree[0][i] + agree[1][j];
            let better = match best {
                None => true,
                Some((bg, ba, _, _)) => gap < bg || (gap == bg && acc > ba),
            };
            if better {
                best = Some((gap, acc, i, j));
            }
        }
    }
    let (_, _, i, j) = best.expect("grid is non-empty");
    let t = [thresholds[i], thresholds[j]];
    let labels = scores
        .as_slice()
        .iter()
        .zip(groups.as_slice())
        .map(|(&s, &g)| if s >= t[usize::from(g)] { 1 } else { -1 })
        .collect();
    Ok(DpThreshold {
        thresholds: t,
        labels: LabelVector::new(labels)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterScanOptions {
    pub neighborhood_frac: f64,
    pub step_frac: f64,
    /// Candidate centers are subsampled to this many rows above it.
    pub max_candidates: usize,
    pub seed: u64,
}

impl Default for CenterScanOptions {
    fn default() -> Self {
        Self {
            neighborhood_frac: 0.10,
            step_frac: 0.02,
            max_candidates: 2000,
            seed: 0,
        }
    }
}

pub const CENTER_SCAN_MIN_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct CenterScan<T> {
    pub best_center_row: usize,
    /// Accuracy of the nearest neighbourhood around the best center.
    pub best_neighborhood_accuracy: T,
    /// Per group: `(radius, cumulative accuracy)` with strictly increasing radii.
    pub curves: [Vec<(T, T)>; 2],
}

fn dist<T: Scalar>(x: &FeatureMatrix<T>, a: usize, b: usize) -> T {
    x.row(a)
        .iter()
        .zip(x.row(b))
        .map(|(p, q)| (*p - *q) * (*p - *q))
        .sum::<T>()
        .sqrt()
}

/// Finds the row whose nearest `neighborhood_frac` of points has the highest
/// LF accuracy, then, per group, grows shells of `step_frac` of that group's
/// rows outward from it and records cumulative accuracy against the shell
/// radius.
pub fn center_scan<T: Scalar>(
    x: &FeatureMatrix<T>,
    correct: &[bool],
    groups: &GroupAssignment,
    opts: &CenterScanOptions,
) -> Result<CenterScan<T>> {
    let n = x.n_rows();
    if n < CENTER_SCAN_MIN_ROWS {
        return Err(Error::TooFewRows {
            n,
            required: CENTER_SCAN_MIN_ROWS,
        });
    }
    check_len("correctness flags", n, correct.len())?;
    check_len("group rows", n, groups.len())?;
    if !(opts.neighborhood_frac > 0.0 && opts.neighborhood_frac <= 1.0 && opts.step_frac > 0.0 && opts.step_frac <= 1.0)
    {
        return Err(Error::InvalidParameter("fractions must lie in (0, 1]".into()));
    }
    let candidates: Vec<usize> = if n <= opts.max_candidates {
        (0..n).collect()
    } else {
        let mut c = sample(
            &mut rng::stream(opts.seed, rng::ids::CENTER_CANDIDATES),
            n,
            opts.max_candidates,
        )
        .into_vec();
        c.sort_unstable();
        c
    };
    let k = ((opts.neighborhood_frac * n as f64).ceil() as usize).clamp(1, n);
    let scored: Vec<(usize, usize)> = candidates
        .par_iter()
        .map(|&c| {
            let mut d: Vec<(T, usize)> = (0..n).map(|i| (dist(x, c, i), i)).collect();
            let cmp = |a: &(T, usize), b: &(T, usize)| {
                a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
            };
            if k < n {
                d.select_nth_unstable_by(k - 1, cmp);
            }
            let hits = d[..k].iter().filter(|(_, i)| correct[*i]).count();
            (c, hits)
        })
        .collect();
    // Highest accuracy; ties to the lowest row index.
    let (best_row, best_hits) = scored
        .iter()
        .copied()
        .fold(None, |acc: Option<(usize, usize)>, (c, h)| match acc {
            Some((bc, bh)) if bh > h || (bh == h && bc < c) => Some((bc, bh)),
            _ => Some((c, h)),
        })
        .expect("at least one candidate");

    let mut curves: [Vec<(T, T)>; 2] = [Vec::new(), Vec::new()];
    for g in 0..2u8 {
        let mut rows: Vec<(T, bool)> = groups
            .rows_of(g)
            .into_iter()
            .map(|i| (dist(x, best_row, i), correct[i]))
            .collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let step = ((opts.step_frac * rows.len() as f64).ceil() as usize).max(1);
        let mut end = 0usize;
        let mut hits = 0usize;
        let curve = &mut curves[usize::from(g)];
        while end < rows.len() {
            let mut next = (end + step).min(rows.len());
            // Points at the same distance join the same shell.
            while next < rows.len() && rows[next].0 == rows[next - 1].0 {
                next += 1;
            }
            hits += rows[end..next].iter().filter(|r| r.1).count();
            end = next;
            let radius = rows[end - 1].0;
            let acc = ratio::<T>(hits, end);
            match curve.last_mut() {
                Some(last) if !(radius > last.0) => *last = (radius, acc),
                _ => curve.push((radius, acc)),
            }
        }
    }
    Ok(CenterScan {
        best_center_row: best_row,
        best_neighborhood_accuracy: ratio(best_hits, k),
        curves,
    })
}
