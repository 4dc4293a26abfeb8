//! Validated containers for features, group membership, weak labels, labels
//! and scores.
//!
//! Every constructor checks its type's invariants, so a value that exists is
//! well formed. [`validate_dataset`] additionally checks that the three
//! inputs of a weak-supervision run agree with each other.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `n x d` real features with one opaque identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    values: Array2<T>,
    row_ids: Vec<String>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(values: Array2<T>, row_ids: Vec<String>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 {
            return Err(Error::TooFewRows { n, required: 1 });
        }
        if d == 0 {
            return Err(Error::DimensionMismatch {
                context: "feature columns",
                expected: 1,
                found: 0,
            });
        }
        if row_ids.len() != n {
            return Err(Error::DimensionMismatch {
                context: "feature row ids",
                expected: n,
                found: row_ids.len(),
            });
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, col });
        }
        check_unique(&row_ids)?;
        Ok(Self { values, row_ids })
    }

    /// Uses the row index (`"0"`, `"1"`, ...) as identifier.
    pub fn with_index_ids(values: Array2<T>) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::new(values, ids)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.values.row(i)
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Replaces the values while keeping the row identifiers.
    pub fn with_values(&self, values: Array2<T>) -> Result<Self> {
        if values.nrows() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "replacement feature rows",
                expected: self.n_rows(),
                found: values.nrows(),
            });
        }
        Self::new(values, self.row_ids.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = self.values.select(Axis(0), rows);
        let ids = rows.iter().map(|&r| self.row_ids[r].clone()).collect();
        Self::new(values, ids)
    }
}

/// Binary group membership, one entry per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    group_of: Vec<u8>,
}

impl GroupAssignment {
    pub fn new(group_of: Vec<u8>) -> Result<Self> {
        if let Some((row, &g)) = group_of.iter().enumerate().find(|(_, &g)| g > 1) {
            return Err(Error::InvalidGroup {
                row,
                value: i64::from(g),
            });
        }
        Ok(Self { group_of })
    }

    pub fn from_i64(raw: &[i64]) -> Result<Self> {
        let mut out = Vec::with_capacity(raw.len());
        for (row, &g) in raw.iter().enumerate() {
            match g {
                0 | 1 => out.push(g as u8),
                _ => return Err(Error::InvalidGroup { row, value: g }),
            }
        }
        Ok(Self { group_of: out })
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    pub fn group(&self, row: usize) -> u8 {
        self.group_of[row]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.group_of
    }

    pub fn counts(&self) -> [usize; 2] {
        let ones = self.group_of.iter().filter(|&&g| g == 1).count();
        [self.group_of.len() - ones, ones]
    }

    /// Row indices belonging to `group`, in increasing order.
    pub fn rows_of(&self, group: u8) -> Vec<usize> {
        self.group_of
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == group)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn require_both(&self) -> Result<()> {
        let [n0, n1] = self.counts();
        if n0 == 0 {
            return Err(Error::EmptyGroup { group: 0 });
        }
        if n1 == 0 {
            return Err(Error::EmptyGroup { group: 1 });
        }
        Ok(())
    }
}

/// `n x m` matrix of labeling-function votes, each exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakLabelMatrix {
    votes: Array2<i8>,
    lf_names: Vec<String>,
}

impl WeakLabelMatrix {
    pub fn new(votes: Array2<i8>, lf_names: Vec<String>) -> Result<Self> {
        if lf_names.len() != votes.ncols() {
            return Err(Error::DimensionMismatch {
                context: "labeling function names",
                expected: votes.ncols(),
                found: lf_names.len(),
            });
        }
        if let Some(((row, col), &v)) = votes.indexed_iter().find(|(_, &v)| v != 1 && v != -1) {
            return Err(Error::InvalidVote {
                row,
                col,
                value: i64::from(v),
            });
        }
        Ok(Self { votes, lf_names })
    }

    /// Builds from wide integers, rejecting anything outside {-1, +1}.
    pub fn from_i64(votes: &Array2<i64>, lf_names: Vec<String>) -> Result<Self> {
        if let Some(((row, col), &v)) = votes.indexed_iter().find(|(_, &v)| v != 1 && v != -1) {
            return Err(Error::InvalidVote { row, col, value: v });
        }
        Self::new(votes.mapv(|v| v as i8), lf_names)
    }

    /// Names LFs `lf_1 .. lf_m`.
    pub fn with_default_names(votes: Array2<i8>) -> Result<Self> {
        let names = (1..=votes.ncols()).map(|j| format!("lf_{j}")).collect();
        Self::new(votes, names)
    }

    pub fn n_rows(&self) -> usize {
        self.votes.nrows()
    }

    pub fn n_lfs(&self) -> usize {
        self.votes.ncols()
    }

    pub fn votes(&self) -> ArrayView2<'_, i8> {
        self.votes.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, i8> {
        self.votes.column(j)
    }

    pub fn lf_names(&self) -> &[String] {
        &self.lf_names
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            votes: self.votes.select(Axis(0), rows),
            lf_names: self.lf_names.clone(),
        }
    }

    /// Overwrites the entries of column `col` at `rows` with `values`.
    pub(crate) fn overwrite(&mut self, col: usize, rows: &[usize], values: &[i8]) {
        debug_assert_eq!(rows.len(), values.len());
        for (&r, &v) in rows.iter().zip(values) {
            debug_assert!(v == 1 || v == -1);
            self.votes[[r, col]] = v;
        }
    }
}

/// Hard labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some((row, &v)) = labels.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(Error::InvalidLabel {
                row,
                value: i64::from(v),
            });
        }
        Ok(Self(labels))
    }

    pub fn from_i64(raw: &[i64]) -> Result<Self> {
        if let Some((row, &v)) = raw.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(Error::InvalidLabel { row, value: v });
        }
        Ok(Self(raw.iter().map(|&v| v as i8).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

/// Probabilities of the positive class, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T>(Vec<T>);

impl<T: Scalar> ScoreVector<T> {
    pub fn new(scores: Vec<T>) -> Result<Self> {
        if let Some((row, &v)) = scores
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= T::zero() && v <= T::one()))
        {
            return Err(Error::InvalidScore {
                row,
                value: v.as_f64(),
            });
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Maps hard labels to {0, 1} probabilities.
    pub fn from_labels(labels: &LabelVector) -> Self {
        Self(
            labels
                .as_slice()
                .iter()
                .map(|&y| if y > 0 { T::one() } else { T::zero() })
                .collect(),
        )
    }
}

/// Features, groups and weak labels whose row counts and invariants agree.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: FeatureMatrix<T>,
    groups: GroupAssignment,
    weak: WeakLabelMatrix,
}

impl<T: Scalar> Dataset<T> {
    pub fn features(&self) -> &FeatureMatrix<T> {
        &self.features
    }

    pub fn groups(&self) -> &GroupAssignment {
        &self.groups
    }

    pub fn weak(&self) -> &WeakLabelMatrix {
        &self.weak
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    /// Same features and groups with a different vote matrix.
    pub fn with_weak(&self, weak: WeakLabelMatrix) -> Result<Self> {
        validate_dataset(self.features.clone(), self.groups.clone(), weak, false)
    }

    pub fn into_parts(self) -> (FeatureMatrix<T>, GroupAssignment, WeakLabelMatrix) {
        (self.features, self.groups, self.weak)
    }
}

/// Checks cross-input consistency and re-verifies every per-type invariant.
///
/// With `require_two_groups` set, a dataset whose rows all fall in one group
/// is rejected with [`Error::EmptyGroup`].
pub fn validate_dataset<T: Scalar>(
    features: FeatureMatrix<T>,
    groups: GroupAssignment,
    weak: WeakLabelMatrix,
    require_two_groups: bool,
) -> Result<Dataset<T>> {
    let n = features.n_rows();
    if groups.len() != n {
        return Err(Error::DimensionMismatch {
            context: "group assignment rows",
            expected: n,
            found: groups.len(),
        });
    }
    if weak.n_rows() != n {
        return Err(Error::DimensionMismatch {
            context: "weak label rows",
            expected: n,
            found: weak.n_rows(),
        });
    }
    // The constructors already enforce these; re-running them keeps the
    // function total over values built through other paths.
    let features = FeatureMatrix::new(features.values, features.row_ids)?;
    let groups = GroupAssignment::new(groups.group_of)?;
    let weak = WeakLabelMatrix::new(weak.votes, weak.lf_names)?;
    if require_two_groups {
        groups.require_both()?;
    }
    Ok(Dataset {
        features,
        groups,
        weak,
    })
}

/// Rows of one group together with their positions in the full dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPart<T> {
    pub features: FeatureMatrix<T>,
    pub weak: WeakLabelMatrix,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit<T> {
    pub parts: [GroupPart<T>; 2],
    n_rows: usize,
}

impl<T: Scalar> GroupSplit<T> {
    pub fn part(&self, group: u8) -> &GroupPart<T> {
        &self.parts[usize::from(group)]
    }

    /// Reassembles the full feature and vote matrices in original row order.
    pub fn merge(&self) -> Result<(FeatureMatrix<T>, WeakLabelMatrix)> {
        let first = &self.parts[0];
        let d = first.features.n_dims();
        let m = first.weak.n_lfs();
        let mut values = Array2::<T>::zeros((self.n_rows, d));
        let mut votes = Array2::<i8>::zeros((self.n_rows, m));
        let mut ids = vec![String::new(); self.n_rows];
        for part in &self.parts {
            for (local, &global) in part.rows.iter().enumerate() {
                values.row_mut(global).assign(&part.features.row(local));
                votes.row_mut(global).assign(&part.weak.votes().row(local));
                ids[global] = part.features.row_ids()[local].clone();
            }
        }
        Ok((
            FeatureMatrix::new(values, ids)?,
            WeakLabelMatrix::new(votes, first.weak.lf_names().to_vec())?,
        ))
    }
}

pub fn split_by_group<T: Scalar>(data: &Dataset<T>) -> Result<GroupSplit<T>> {
    data.groups.require_both()?;
    let make = |g: u8| -> Result<GroupPart<T>> {
        let rows = data.groups.rows_of(g);
        Ok(GroupPart {
            features: data.features.select_rows(&rows)?,
            weak: data.weak.select_rows(&rows),
            rows,
        })
    };
    Ok(GroupSplit {
        parts: [make(0)?, make(1)?],
        n_rows: data.n_rows(),
    })
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn small() -> (FeatureMatrix<f64>, GroupAssignment, WeakLabelMatrix) {
        let x = FeatureMatrix::with_index_ids(array![[0.0, 1.0], [1.0, 2.0], [2.0, 3.0], [3.0, 4.0]])
            .unwrap();
        let g = GroupAssignment::new(vec![0, 1, 0, 1]).unwrap();
        let w = WeakLabelMatrix::with_default_names(array![
            [1, 1, -1],
            [-1, 1, 1],
            [1, -1, 1],
            [1, 1, 1]
        ])
        .unwrap();
        (x, g, w)
    }

    #[test]
    fn well_formed_input_validates() {
        let (x, g, w) = small();
        let d = validate_dataset(x, g, w, true).unwrap();
        assert_eq!(d.n_rows(), 4);
    }

    #[test]
    fn zero_vote_is_rejected() {
        let err = WeakLabelMatrix::with_default_names(array![[1, 0, 1]]).unwrap_err();
        assert!(matches!(err, Error::InvalidVote { row: 0, col: 1, value: 0 }));
        let err = WeakLabelMatrix::from_i64(&array![[1, 1], [1, 3]], vec!["a".into(), "b".into()])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidVote { row: 1, col: 1, value: 3 }));
    }

    #[test]
    fn single_group_rejected_only_when_strict() {
        let (x, _, w) = small();
        let g = GroupAssignment::new(vec![0; 4]).unwrap();
        assert!(validate_dataset(x.clone(), g.clone(), w.clone(), false).is_ok());
        let err = validate_dataset(x, g, w, true).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup { group: 1 }));
    }

    #[test]
    fn row_count_mismatch() {
        let (x, _, w) = small();
        let g = GroupAssignment::new(vec![0, 1, 0]).unwrap();
        assert!(matches!(
            validate_dataset(x, g, w, false),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_feature_rejected() {
        let err = FeatureMatrix::with_index_ids(array![[0.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { row: 0, col: 1 }));
        let err = FeatureMatrix::with_index_ids(array![[f64::INFINITY]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = FeatureMatrix::new(array![[0.0], [1.0]], vec!["a".into(), "a".into()]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }

    #[test]
    fn split_alternating_groups() {
        let (x, g, w) = small();
        let d = validate_dataset(x, g, w, true).unwrap();
        let s = split_by_group(&d).unwrap();
        assert_eq!(s.part(0).rows, vec![0, 2]);
        assert_eq!(s.part(1).rows, vec![1, 3]);
        assert_eq!(s.part(1).features.row_ids(), &["1".to_string(), "3".to_string()]);
        assert_eq!(s.part(0).weak.votes().row(1).to_vec(), vec![1, -1, 1]);
    }

    #[test]
    fn split_single_group_fails() {
        let (x, _, w) = small();
        let d = validate_dataset(x, GroupAssignment::new(vec![0; 4]).unwrap(), w, false).unwrap();
        assert!(matches!(split_by_group(&d), Err(Error::EmptyGroup { group: 1 })));
    }

    #[test]
    fn validation_is_idempotent() {
        let (x, g, w) = small();
        let once = validate_dataset(x, g, w, true).unwrap();
        let (x, g, w) = once.clone().into_parts();
        let twice = validate_dataset(x, g, w, true).unwrap();
        assert_eq!(once, twice);
    }

    proptest! {
        #[test]
        fn split_then_merge_is_identity(
            rows in proptest::collection::vec(
                (any::<bool>(), -1e6f64..1e6, -1e6f64..1e6, any::<[bool; 3]>()), 2..60)
        ) {
            let n = rows.len();
            let mut groups: Vec<u8> = rows.iter().map(|r| u8::from(r.0)).collect();
            groups[0] = 0;
            groups[n - 1] = 1;
            let values = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { rows[i].1 } else { rows[i].2 });
            let votes = Array2::from_shape_fn((n, 3), |(i, j)| if rows[i].3[j] { 1i8 } else { -1 });
            let x = FeatureMatrix::with_index_ids(values).unwrap();
            let w = WeakLabelMatrix::with_default_names(votes).unwrap();
            let d = validate_dataset(x, GroupAssignment::new(groups).unwrap(), w, true).unwrap();
            let (mx, mw) = split_by_group(&d).unwrap().merge().unwrap();
            prop_assert_eq!(&mx, d.features());
            prop_assert_eq!(&mw, d.weak());
        }
    }
}
