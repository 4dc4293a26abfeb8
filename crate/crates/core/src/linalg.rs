//! Dense symmetric eigendecomposition and the matrix functions built on it.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenvalues below this are floored before taking roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition `S = V diag(w) V^T` by cyclic Jacobi
/// rotations. Eigenvalues are returned in ascending order with matching
/// eigenvector columns.
pub fn sym_eigen<T: Scalar>(s: ArrayView2<'_, T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "square matrix",
            expected: n,
            found: s.ncols(),
        });
    }
    let mut a = symmetrize(s);
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    for _ in 0..MAX_SWEEPS {
        let off: T = off_diagonal_sq(&a);
        let scale: T = a.iter().map(|x| *x * *x).sum();
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - sn * akq;
                    a[[k, q]] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - sn * aqk;
                    a[[q, k]] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).expect("finite eigenvalues"));
    let w = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vs = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vs.column_mut(dst).assign(&v.column(src));
    }
    Ok((w, vs))
}

fn off_diagonal_sq<T: Scalar>(a: &Array2<T>) -> T {
    let mut s = T::zero();
    for ((i, j), x) in a.indexed_iter() {
        if i != j {
            s += *x * *x;
        }
    }
    s
}

/// `(S + S^T) / 2`.
pub fn symmetrize<T: Scalar>(s: ArrayView2<'_, T>) -> Array2<T> {
    let half = T::lit(0.5);
    Array2::from_shape_fn(s.dim(), |(i, j)| (s[[i, j]] + s[[j, i]]) * half)
}

/// Applies `f` to the (floored) spectrum: `V diag(f(max(w, floor))) V^T`.
pub fn sym_function<T: Scalar>(s: ArrayView2<'_, T>, f: impl Fn(T) -> T) -> Result<Array2<T>> {
    let (w, v) = sym_eigen(s)?;
    let floor = T::lit(EIGEN_FLOOR);
    let fw = w.mapv(|x| f(if x < floor { floor } else { x }));
    let scaled = &v * &fw.view().insert_axis(ndarray::Axis(0));
    Ok(symmetrize(scaled.dot(&v.t()).view()))
}

pub fn sym_sqrt<T: Scalar>(s: ArrayView2<'_, T>) -> Result<Array2<T>> {
    sym_function(s, |x| x.sqrt())
}

pub fn sym_inv_sqrt<T: Scalar>(s: ArrayView2<'_, T>) -> Result<Array2<T>> {
    sym_function(s, |x| x.sqrt().recip())
}

pub fn frobenius<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    a.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// `||a - b||_F / ||b||_F`.
pub fn relative_frobenius<T: Scalar>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>) -> T {
    frobenius((&a - &b).view()) / frobenius(b)
}
