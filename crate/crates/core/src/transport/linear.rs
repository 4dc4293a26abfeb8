//! Closed-form Monge map between Gaussian moment estimates.

use ndarray::{Array1, Array2, Axis};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, sym_inv_sqrt, sym_sqrt, symmetrize};
use crate::scalar::Scalar;

/// Ridge added to every sample covariance.
pub const COV_RIDGE: f64 = 1e-6;
/// Covariances with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments<T> {
    pub mean: Array1<T>,
    pub cov: Array2<T>,
}

/// Sample mean and population (denominator `n`) covariance plus
/// `COV_RIDGE * I`.
pub fn estimate_moments<T: Scalar>(x: &FeatureMatrix<T>) -> Result<GaussianMoments<T>> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { n, required: 2 });
    }
    let values = x.values();
    let mean = values.mean_axis(Axis(0)).expect("non-empty rows");
    let centered = &values - &mean.view().insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered) / T::of_usize(n);
    cov = symmetrize(cov.view());
    let ridge = T::lit(COV_RIDGE);
    for i in 0..cov.nrows() {
        cov[[i, i]] += ridge;
    }
    Ok(GaussianMoments { mean, cov })
}

/// Affine map `x -> A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap<T> {
    pub a: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> LinearMap<T> {
    pub fn identity(d: usize) -> Self {
        Self {
            a: Array2::eye(d),
            b: Array1::zeros(d),
        }
    }

    pub fn dims(&self) -> usize {
        self.b.len()
    }

    /// Row-wise image `A x_i + b`; row ids are kept.
    pub fn apply(&self, x: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        if x.n_dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                context: "linear map input dims",
                expected: self.dims(),
                found: x.n_dims(),
            });
        }
        let image = x.values().dot(&self.a.t()) + self.b.view().insert_axis(Axis(0));
        x.with_values(image)
    }
}

fn condition_number<T: Scalar>(cov: &Array2<T>) -> Result<T> {
    let (w, _) = sym_eigen(cov.view())?;
    let lo = w[0];
    let hi = w[w.len() - 1];
    if lo <= T::zero() {
        return Ok(T::infinity());
    }
    Ok(hi / lo)
}

/// `A = S^{-1/2} (S^{1/2} T S^{1/2})^{1/2} S^{-1/2}`, `b = mu_t - A mu_s`,
/// with `S`, `T` the source and destination covariances.
pub fn fit_linear_ot<T: Scalar>(src: &GaussianMoments<T>, dst: &GaussianMoments<T>) -> Result<LinearMap<T>> {
    let d = src.mean.len();
    if dst.mean.len() != d || src.cov.dim() != (d, d) || dst.cov.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            context: "gaussian moment dims",
            expected: d,
            found: dst.mean.len(),
        });
    }
    for cov in [&src.cov, &dst.cov] {
        let c = condition_number(cov)?;
        if !(c <= T::lit(MAX_CONDITION)) {
            return Err(Error::SingularCovariance { condition: c.as_f64() });
        }
    }
    let s_half = sym_sqrt(src.cov.view())?;
    let s_inv_half = sym_inv_sqrt(src.cov.view())?;
    let middle = s_half.dot(&dst.cov).dot(&s_half);
    let middle_half = sym_sqrt(symmetrize(middle.view()).view())?;
    let a = symmetrize(s_inv_half.dot(&middle_half).dot(&s_inv_half).view());
    let b = &dst.mean - &a.dot(&src.mean);
    Ok(LinearMap { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::relative_frobenius;
    use ndarray::array;

    fn moments(mean: Array1<f64>, cov: Array2<f64>) -> GaussianMoments<f64> {
        GaussianMoments { mean, cov }
    }

    #[test]
    fn two_point_moments_by_hand() {
        let x = FeatureMatrix::with_index_ids(array![[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let m = estimate_moments(&x).unwrap();
        assert_eq!(m.mean, array![1.0, 0.0]);
        let expected = array![[1.0 + COV_RIDGE, 0.0], [0.0, COV_RIDGE]];
        assert!((&m.cov - &expected).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn identical_points_give_ridge() {
        let x = FeatureMatrix::with_index_ids(array![[3.0, -1.0], [3.0, -1.0], [3.0, -1.0]]).unwrap();
        let m = estimate_moments(&x).unwrap();
        assert_eq!(m.cov, Array2::<f64>::eye(2) * COV_RIDGE);
    }

    #[test]
    fn single_row_is_too_few() {
        let x = FeatureMatrix::with_index_ids(array![[1.0]]).unwrap();
        assert!(matches!(estimate_moments(&x), Err(Error::TooFewRows { n: 1, .. })));
    }

    #[test]
    fn pure_translation() {
        let map = fit_linear_ot(
            &moments(array![0.0, 0.0], Array2::eye(2)),
            &moments(array![1.0, 1.0], Array2::eye(2)),
        )
        .unwrap();
        assert!(relative_frobenius(map.a.view(), Array2::<f64>::eye(2).view()) < 1e-12);
        assert!((map.b[0] - 1.0).abs() < 1e-12 && (map.b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_planted_square_root() {
        // [[5,4],[4,5]] = [[2,1],[1,2]]^2 (eigenvalues 9, 1 -> 3, 1).
        let map = fit_linear_ot(
            &moments(array![0.0, 0.0], Array2::eye(2)),
            &moments(array![0.0, 0.0], array![[5.0, 4.0], [4.0, 5.0]]),
        )
        .unwrap();
        assert!(relative_frobenius(map.a.view(), array![[2.0, 1.0], [1.0, 2.0]].view()) < 1e-12);
    }

    #[test]
    fn isotropic_rescale() {
        let c = 4.0;
        let map = fit_linear_ot(
            &moments(array![0.0, 0.0, 0.0], Array2::eye(3) * c),
            &moments(array![0.0, 0.0, 0.0], Array2::eye(3)),
        )
        .unwrap();
        let expected = Array2::<f64>::eye(3) * (1.0 / c.sqrt());
        assert!(relative_frobenius(map.a.view(), expected.view()) < 1e-12);
    }

    #[test]
    fn singular_covariance_rejected() {
        let err = fit_linear_ot(
            &moments(array![0.0, 0.0], array![[1.0, 0.0], [0.0, 1e-14]]),
            &moments(array![0.0, 0.0], Array2::eye(2)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { .. }));
    }

    #[test]
    fn apply_identity_and_scaling() {
        let x = FeatureMatrix::with_index_ids(array![[1.0, 1.0], [-2.0, 0.5]]).unwrap();
        assert_eq!(LinearMap::identity(2).apply(&x).unwrap(), x);
        let double = LinearMap {
            a: Array2::eye(2) * 2.0,
            b: Array1::zeros(2),
        };
        let y = double.apply(&x).unwrap();
        assert_eq!(y.row(0).to_vec(), vec![2.0, 2.0]);
        assert_eq!(y.row_ids(), x.row_ids());
        let wrong = LinearMap::<f64>::identity(3);
        assert!(matches!(wrong.apply(&x), Err(Error::DimensionMismatch { .. })));
    }
}
