//! Maps that carry one group's feature cloud onto the other's, and vote
//! borrowing from the destination group by nearest neighbour.

mod knn;
mod linear;
mod sinkhorn;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use knn::{borrow_votes, knn_borrow, nearest_neighbors};
pub use linear::{estimate_moments, fit_linear_ot, GaussianMoments, LinearMap, COV_RIDGE, MAX_CONDITION};
pub use sinkhorn::{
    cost_matrix, sinkhorn_from_cost, CostKind, SinkhornConfig, SinkhornPlan, LOG_DOMAIN_THRESHOLD,
};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OtKind {
    /// No map; votes are borrowed from the nearest unmapped neighbour.
    None,
    #[default]
    Linear,
    Sinkhorn,
}

/// Coupling-weighted (barycentric) map from a fitted Sinkhorn plan.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricMap<T> {
    pub plan: SinkhornPlan<T>,
    pub source_ids: Vec<String>,
    /// Row ids of the destination cloud the coupling columns refer to.
    pub destination_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransportMap<T> {
    Identity,
    Linear(LinearMap<T>),
    Sinkhorn(BarycentricMap<T>),
}

pub fn fit_sinkhorn<T: Scalar>(
    src: &FeatureMatrix<T>,
    dst: &FeatureMatrix<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<BarycentricMap<T>> {
    if src.n_dims() != dst.n_dims() {
        return Err(Error::DimensionMismatch {
            context: "sinkhorn feature dims",
            expected: dst.n_dims(),
            found: src.n_dims(),
        });
    }
    let cost = cost_matrix(src.values(), dst.values(), cfg.cost);
    let plan = sinkhorn_from_cost(cost.view(), cfg)?;
    Ok(BarycentricMap {
        plan,
        source_ids: src.row_ids().to_vec(),
        destination_ids: dst.row_ids().to_vec(),
    })
}

/// `x_i -> sum_j pi~_ij y_j` with `pi~` the row-stochastic coupling.
pub fn barycentric_project<T: Scalar>(map: &BarycentricMap<T>, dst: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    if map.plan.coupling.ncols() != dst.n_rows() {
        return Err(Error::DimensionMismatch {
            context: "coupling columns vs destination rows",
            expected: map.plan.coupling.ncols(),
            found: dst.n_rows(),
        });
    }
    if map.destination_ids.as_slice() != dst.row_ids() {
        return Err(Error::InvalidParameter(
            "destination rows differ from those the coupling was fitted on".into(),
        ));
    }
    let projected = map.plan.coupling.dot(&dst.values());
    FeatureMatrix::new(projected, map.source_ids.clone())
}

/// Options for [`transport`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransportOptions<T> {
    pub kind: OtKind,
    pub sinkhorn: SinkhornConfig<T>,
    /// Sinkhorn fits on at most this many rows per side.
    pub sinkhorn_subsample: usize,
    pub seed: u64,
    pub knn_k: usize,
}

impl<T: Scalar> Default for TransportOptions<T> {
    fn default() -> Self {
        Self {
            kind: OtKind::Linear,
            sinkhorn: SinkhornConfig::default(),
            sinkhorn_subsample: 5_000,
            seed: 0,
            knn_k: 1,
        }
    }
}

/// Summary of the map a [`transport`] call fitted.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedMap<T> {
    Identity,
    Linear(LinearMap<T>),
    Sinkhorn {
        iterations: usize,
        converged: bool,
        log_domain: bool,
        marginal_error: (T, T),
        fitted_rows: (usize, usize),
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportOutcome<T> {
    /// Source points in destination coordinates.
    pub mapped: FeatureMatrix<T>,
    /// Borrowed labels, one column per input label column.
    pub labels: Array2<i8>,
    pub map: FittedMap<T>,
}

/// Maps `src` into `dst` coordinates with the chosen OT kind, then borrows
/// every label column of `dst_labels` from the nearest destination rows.
pub fn transport<T: Scalar>(
    src: &FeatureMatrix<T>,
    dst: &FeatureMatrix<T>,
    dst_labels: ArrayView2<'_, i8>,
    opts: &TransportOptions<T>,
) -> Result<TransportOutcome<T>> {
    let (mapped, map) = map_points(src, dst, opts)?;
    let labels = knn_borrow(mapped.values(), dst.values(), dst_labels, opts.knn_k)?;
    Ok(TransportOutcome { mapped, labels, map })
}

/// The mapping half of [`transport`].
pub fn map_points<T: Scalar>(
    src: &FeatureMatrix<T>,
    dst: &FeatureMatrix<T>,
    opts: &TransportOptions<T>,
) -> Result<(FeatureMatrix<T>, FittedMap<T>)> {
    match opts.kind {
        OtKind::None => Ok((src.clone(), FittedMap::Identity)),
        OtKind::Linear => {
            let map = fit_linear_ot(&estimate_moments(src)?, &estimate_moments(dst)?)?;
            Ok((map.apply(src)?, FittedMap::Linear(map)))
        }
        OtKind::Sinkhorn => sinkhorn_points(src, dst, opts),
    }
}

fn subsample_rows(n: usize, cap: usize, seed: u64, stream: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut idx = sample(&mut rng::stream(seed, stream), n, cap).into_vec();
    idx.sort_unstable();
    idx
}

/// Sinkhorn fit on (possibly subsampled) clouds. Source rows left out of the
/// fit follow their nearest fitted source row: `x -> T(x_s) + (x - x_s)`.
fn sinkhorn_points<T: Scalar>(
    src: &FeatureMatrix<T>,
    dst: &FeatureMatrix<T>,
    opts: &TransportOptions<T>,
) -> Result<(FeatureMatrix<T>, FittedMap<T>)> {
    let cap = opts.sinkhorn_subsample.max(1);
    let src_rows = subsample_rows(src.n_rows(), cap, opts.seed, rng::ids::SINKHORN_SUBSAMPLE);
    let dst_rows = subsample_rows(dst.n_rows(), cap, opts.seed, rng::ids::SINKHORN_SUBSAMPLE + 1);
    let src_fit = src.select_rows(&src_rows)?;
    let dst_fit = dst.select_rows(&dst_rows)?;
    let bary = fit_sinkhorn(&src_fit, &dst_fit, &opts.sinkhorn)?;
    let projected = barycentric_project(&bary, &dst_fit)?;
    let summary = FittedMap::Sinkhorn {
        iterations: bary.plan.iterations,
        converged: bary.plan.converged,
        log_domain: bary.plan.log_domain,
        marginal_error: bary.plan.marginal_error,
        fitted_rows: (src_rows.len(), dst_rows.len()),
    };
    if src_rows.len() == src.n_rows() {
        return Ok((projected, summary));
    }
    let anchors = nearest_neighbors(src.values(), src_fit.values(), 1)?;
    let mut out = src.values().to_owned();
    for (i, nb) in anchors.iter().enumerate() {
        let s = nb[0];
        let shift = &src.row(i) - &src_fit.row(s);
        out.row_mut(i).assign(&(&projected.row(s) + &shift));
    }
    Ok((src.with_values(out)?, summary))
}

/// `tr(S) / lambda_max(S)`: `d` for isotropic covariance, 1 for rank one.
pub fn effective_rank<T: Scalar>(cov: ArrayView2<'_, T>) -> Result<T> {
    let (w, _) = sym_eigen(cov)?;
    let top = w.iter().fold(T::zero(), |m, &x| m.max(x));
    if !(top > T::zero()) {
        return Err(Error::ZeroMatrix);
    }
    Ok(cov.diag().sum() / top)
}

#[derive(Debug, Serialize, Deserialize)]
struct LinearMapJson {
    kind: String,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl<T: Scalar> LinearMap<T> {
    /// `{"kind":"linear","A":[[...]],"b":[...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let json = LinearMapJson {
            kind: "linear".into(),
            a: self
                .a
                .axis_iter(Axis(0))
                .map(|r| r.iter().map(|x| x.as_f64()).collect())
                .collect(),
            b: self.b.iter().map(|x| x.as_f64()).collect(),
        };
        serde_json::to_value(json).expect("plain numeric struct serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let json: LinearMapJson = serde_json::from_value(value.clone())?;
        if json.kind != "linear" {
            return Err(Error::Parse(format!("expected kind \"linear\", got {:?}", json.kind)));
        }
        let d = json.b.len();
        if json.a.len() != d || json.a.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "linear map JSON",
                expected: d,
                found: json.a.len(),
            });
        }
        if json.a.iter().flatten().chain(&json.b).any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite linear map entry".into()));
        }
        let a = Array2::from_shape_fn((d, d), |(i, j)| T::lit(json.a[i][j]));
        Ok(Self {
            a,
            b: json.b.iter().map(|&x| T::lit(x)).collect(),
        })
    }
}
