//! Seeded generators for the synthetic group-bias experiments.
//!
//! Labeling functions follow the distance-modulated accuracy model: at point
//! `x` an LF agrees with the true label with probability
//! `sigmoid(2 theta / (1 + ||x - center||))`, so it is most reliable at its
//! center and degrades towards random guessing far away.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::data::{validate_dataset, Dataset, FeatureMatrix, GroupAssignment, LabelVector, WeakLabelMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, ids};
use crate::scalar::Scalar;

/// How an LF turns a point (and, for noisy copies, the true label) into a vote.
#[derive(Debug, Clone, PartialEq)]
pub enum LfRule<T> {
    /// Distance-modulated accuracy around `center`.
    Stochastic,
    /// `+1` iff `x[dim] >= cut`.
    Threshold { dim: usize, cut: T },
    /// The true label with each vote flipped independently with probability `flip`.
    NoisyTruth { flip: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelingFunctionSpec<T> {
    pub name: String,
    pub theta: T,
    pub center: Array1<T>,
    pub rule: LfRule<T>,
}

impl<T: Scalar> LabelingFunctionSpec<T> {
    pub fn stochastic(name: impl Into<String>, theta: T, center: Array1<T>) -> Result<Self> {
        if !(theta >= T::zero()) {
            return Err(Error::InvalidParameter(format!("theta must be >= 0, got {theta}")));
        }
        Ok(Self {
            name: name.into(),
            theta,
            center,
            rule: LfRule::Stochastic,
        })
    }

    fn to_json(&self) -> serde_json::Value {
        let rule = match &self.rule {
            LfRule::Stochastic => json!({"kind": "stochastic"}),
            LfRule::Threshold { dim, cut } => json!({"kind": "threshold", "dim": dim, "cut": cut.as_f64()}),
            LfRule::NoisyTruth { flip } => json!({"kind": "noisy_truth", "flip": flip.as_f64()}),
        };
        json!({
            "name": self.name,
            "theta": self.theta.as_f64(),
            "center": self.center.iter().map(|c| c.as_f64()).collect::<Vec<_>>(),
            "rule": rule,
        })
    }
}

/// `P(vote = y)` at `x` for a stochastic LF: `sigmoid(2 theta / (1 + ||x - c||))`.
pub fn lf_accuracy_at<T: Scalar>(spec: &LabelingFunctionSpec<T>, x: ndarray::ArrayView1<'_, T>) -> T {
    let d: T = x
        .iter()
        .zip(spec.center.iter())
        .map(|(a, c)| (*a - *c) * (*a - *c))
        .sum::<T>()
        .sqrt();
    (T::lit(2.0) * spec.theta / (T::one() + d)).sigmoid()
}

/// One vote per row of `x`. Randomness comes from stream `(seed, stream_id)`.
pub fn sample_lf_votes<T: Scalar>(
    spec: &LabelingFunctionSpec<T>,
    x: &FeatureMatrix<T>,
    truth: &LabelVector,
    seed: u64,
    stream_id: u64,
) -> Result<Vec<i8>> {
    if truth.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "truth rows",
            expected: x.n_rows(),
            found: truth.len(),
        });
    }
    let mut rng = rng::stream(seed, stream_id);
    let y = truth.as_slice();
    let votes = match &spec.rule {
        LfRule::Stochastic => (0..x.n_rows())
            .map(|i| {
                let p = lf_accuracy_at(spec, x.row(i)).as_f64();
                let u: f64 = rng.random();
                if u < p {
                    y[i]
                } else {
                    -y[i]
                }
            })
            .collect(),
        LfRule::Threshold { dim, cut } => {
            if *dim >= x.n_dims() {
                return Err(Error::InvalidParameter(format!("threshold dim {dim} out of range")));
            }
            (0..x.n_rows())
                .map(|i| if x.row(i)[*dim] >= *cut { 1 } else { -1 })
                .collect()
        }
        LfRule::NoisyTruth { flip } => {
            let flip = flip.as_f64();
            y.iter()
                .map(|&yi| {
                    let u: f64 = rng.random();
                    if u < flip {
                        -yi
                    } else {
                        yi
                    }
                })
                .collect()
        }
    };
    Ok(votes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Identity,
    Affine,
}

/// Group transformation `x = A z + b` applied to latent points.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTransform<T> {
    pub a: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> GroupTransform<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            a: Array2::eye(d),
            b: Array1::zeros(d),
        }
    }

    pub fn translation(b: Array1<T>) -> Self {
        Self {
            a: Array2::eye(b.len()),
            b,
        }
    }

    pub fn kind(&self) -> TransformKind {
        if self.a == Array2::eye(self.b.len()) && self.b.iter().all(|v| *v == T::zero()) {
            TransformKind::Identity
        } else {
            TransformKind::Affine
        }
    }

    pub fn apply_row(&self, z: ndarray::ArrayView1<'_, T>) -> Array1<T> {
        self.a.dot(&z) + &self.b
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "kind": match self.kind() { TransformKind::Identity => "identity", TransformKind::Affine => "affine" },
            "A": self.a.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "b": self.b.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        })
    }
}

/// A generated dataset with everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset<T> {
    pub experiment: &'static str,
    pub seed: u64,
    pub dataset: Dataset<T>,
    pub truth: LabelVector,
    /// Pre-transformation coordinates.
    pub latent: Array2<T>,
    pub specs: Vec<LabelingFunctionSpec<T>>,
    pub transforms: [GroupTransform<T>; 2],
}

impl<T: Scalar> SynthDataset<T> {
    /// Contents of `specs.json`.
    pub fn specs_json(&self) -> serde_json::Value {
        json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "rng": {"generator": "chacha20", "contract_version": rng::RNG_CONTRACT_VERSION},
            "n_rows": self.dataset.n_rows(),
            "lfs": self.specs.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
            "transforms": {
                "0": self.transforms[0].to_json(),
                "1": self.transforms[1].to_json(),
            },
        })
    }
}

fn normals<T: Scalar>(n: usize, d: usize, seed: u64, stream_id: u64) -> Array2<T> {
    let mut rng = rng::stream(seed, stream_id);
    Array2::from_shape_simple_fn((n, d), || T::lit(rng.sample::<f64, _>(StandardNormal)))
}

fn assemble<T: Scalar>(
    experiment: &'static str,
    seed: u64,
    latent: Array2<T>,
    groups: Vec<u8>,
    transforms: [GroupTransform<T>; 2],
    truth: LabelVector,
    specs: Vec<LabelingFunctionSpec<T>>,
) -> Result<SynthDataset<T>> {
    let n = latent.nrows();
    let mut x = latent.clone();
    for i in 0..n {
        let t = &transforms[usize::from(groups[i])];
        if t.kind() == TransformKind::Affine {
            x.row_mut(i).assign(&t.apply_row(latent.row(i)));
        }
    }
    let features = FeatureMatrix::with_index_ids(x)?;
    let mut votes = Array2::<i8>::zeros((n, specs.len()));
    for (j, spec) in specs.iter().enumerate() {
        let col = sample_lf_votes(spec, &features, &truth, seed, ids::LF_VOTES + j as u64)?;
        votes.column_mut(j).assign(&Array1::from(col));
    }
    let names = specs.iter().map(|s| s.name.clone()).collect();
    let weak = WeakLabelMatrix::new(votes, names)?;
    let dataset = validate_dataset(features, GroupAssignment::new(groups)?, weak, true)?;
    Ok(SynthDataset {
        experiment,
        seed,
        dataset,
        truth,
        latent,
        specs,
        transforms,
    })
}

/// Flip rate of the two padding LFs in [`gen_fig5_dataset`].
pub const FIG5_PAD_FLIP: f64 = 0.05;

/// Two-group Gaussian construction: `n` latent points per group from
/// `N(0, I_2)`, labels `+1` iff `z[0] >= 0.5`, group 1 observed as
/// `x = [[2,1],[1,2]] z + (-4, 5)`. LF 0 is the planted rule `+1` iff
/// `x[0] >= 0` evaluated on observed coordinates; LFs 1 and 2 are the true
/// label with independent 5% flips, so the triplet method has three
/// conditionally independent sources. Group 0 occupies rows `0..n`.
pub fn gen_fig5_dataset<T: Scalar>(n: usize, seed: u64) -> Result<SynthDataset<T>> {
    if n == 0 {
        return Err(Error::TooFewRows { n, required: 1 });
    }
    let z0 = normals::<T>(n, 2, seed, ids::FEATURES_GROUP0);
    let z1 = normals::<T>(n, 2, seed, ids::FEATURES_GROUP1);
    let latent = ndarray::concatenate(ndarray::Axis(0), &[z0.view(), z1.view()]).expect("same width");
    let groups: Vec<u8> = (0..2 * n).map(|i| u8::from(i >= n)).collect();
    let cut = T::lit(0.5);
    let truth = LabelVector::new(
        latent
            .rows()
            .into_iter()
            .map(|z| if z[0] >= cut { 1 } else { -1 })
            .collect(),
    )?;
    let transforms = [
        GroupTransform::identity(2),
        GroupTransform {
            a: ndarray::array![[T::lit(2.0), T::one()], [T::one(), T::lit(2.0)]],
            b: ndarray::array![T::lit(-4.0), T::lit(5.0)],
        },
    ];
    let zero_center = Array1::zeros(2);
    let specs = vec![
        LabelingFunctionSpec {
            name: "lf_1".into(),
            theta: T::zero(),
            center: zero_center.clone(),
            rule: LfRule::Threshold { dim: 0, cut: T::zero() },
        },
        LabelingFunctionSpec {
            name: "lf_2".into(),
            theta: T::zero(),
            center: zero_center.clone(),
            rule: LfRule::NoisyTruth {
                flip: T::lit(FIG5_PAD_FLIP),
            },
        },
        LabelingFunctionSpec {
            name: "lf_3".into(),
            theta: T::zero(),
            center: zero_center,
            rule: LfRule::NoisyTruth {
                flip: T::lit(FIG5_PAD_FLIP),
            },
        },
    ];
    assemble("fig5", seed, latent, groups, transforms, truth, specs)
}

pub const LFCOUNT_DEFAULT_N: usize = 10_000;

/// `n` latent points from `N(0, I_2)`, labels `+1` iff `z[0] >= 0`; a random
/// half (exactly `n / 2` rows) is translated by one draw `b ~ U([10, 50]^2)`
/// and forms group 1. `m` stochastic LFs with `theta ~ U(0.1, 3)` and centers
/// `~ U([-5, 5]^2)` vote on observed coordinates.
pub fn gen_lfcount_dataset<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<SynthDataset<T>> {
    if m < 3 {
        return Err(Error::TooFewLFs { m });
    }
    if n < 2 {
        return Err(Error::TooFewRows { n, required: 2 });
    }
    let latent = normals::<T>(n, 2, seed, ids::FEATURES_GROUP0);
    let mut groups = vec![0u8; n];
    for i in sample(&mut rng::stream(seed, ids::GROUP_SPLIT), n, n / 2) {
        groups[i] = 1;
    }
    let mut trng = rng::stream(seed, ids::TRANSLATION);
    let b = Array1::from_iter((0..2).map(|_| T::lit(trng.random_range(10.0..50.0))));
    let truth = LabelVector::new(
        latent
            .rows()
            .into_iter()
            .map(|z| if z[0] >= T::zero() { 1 } else { -1 })
            .collect(),
    )?;
    let specs = (0..m)
        .map(|j| {
            let mut prng = rng::stream(seed, ids::LF_PARAMS + j as u64);
            let theta = T::lit(prng.random_range(0.1..3.0));
            let center = Array1::from_iter((0..2).map(|_| T::lit(prng.random_range(-5.0..5.0))));
            LabelingFunctionSpec::stochastic(format!("lf_{}", j + 1), theta, center)
        })
        .collect::<Result<Vec<_>>>()?;
    let transforms = [GroupTransform::identity(2), GroupTransform::translation(b)];
    assemble("lfcount", seed, latent, groups, transforms, truth, specs)
}

/// Group 0 from `N(0, I_2)`, group 1 the same distribution translated by
/// `shift * (1, 1)`; three stochastic LFs with the given `theta`, centered at
/// the origin. `n` rows per group.
pub fn gen_theorem1_dataset<T: Scalar>(n: usize, theta: T, shift: T, seed: u64) -> Result<SynthDataset<T>> {
    if n == 0 {
        return Err(Error::TooFewRows { n, required: 1 });
    }
    let latent = normals::<T>(2 * n, 2, seed, ids::FEATURES_GROUP0);
    let groups: Vec<u8> = (0..2 * n).map(|i| u8::from(i >= n)).collect();
    let truth = LabelVector::new(
        latent
            .rows()
            .into_iter()
            .map(|z| if z[0] >= T::zero() { 1 } else { -1 })
            .collect(),
    )?;
    let specs = (0..3)
        .map(|j| LabelingFunctionSpec::stochastic(format!("lf_{}", j + 1), theta, Array1::zeros(2)))
        .collect::<Result<Vec<_>>>()?;
    let transforms = [
        GroupTransform::identity(2),
        GroupTransform::translation(Array1::from_elem(2, shift)),
    ];
    assemble("theorem1", seed, latent, groups, transforms, truth, specs)
}

/// Empirical LF accuracy as the latent cloud is translated by `k * (1, ..., 1)`
/// for each `k` in `shifts`. The same points and uniforms are reused for
/// every shift.
pub fn theorem1_sweep<T: Scalar>(theta: T, shifts: &[T], n: usize, seed: u64) -> Result<Vec<(T, T)>> {
    if n == 0 {
        return Err(Error::TooFewRows { n, required: 1 });
    }
    let z = normals::<T>(n, 2, seed, ids::SWEEP_POINTS);
    let spec = LabelingFunctionSpec::stochastic("lf", theta, Array1::zeros(2))?;
    let mut urng = rng::stream(seed, ids::LF_VOTES);
    let u: Vec<f64> = (0..n).map(|_| urng.random()).collect();
    Ok(shifts
        .iter()
        .map(|&k| {
            let hits = (0..n)
                .filter(|&i| {
                    let x = z.row(i).mapv(|v| v + k);
                    u[i] < lf_accuracy_at(&spec, x.view()).as_f64()
                })
                .count();
            (k, T::of_usize(hits) / T::of_usize(n))
        })
        .collect())
}
