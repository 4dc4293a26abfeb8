//! Entropic optimal transport between two point clouds with uniform weights.
//!
//! Plain Sinkhorn scaling is used while the Gibbs kernel is representable;
//! if any `cost / eta` exceeds [`LOG_DOMAIN_THRESHOLD`] the iteration runs on
//! log-potentials instead.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LOG_DOMAIN_THRESHOLD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostKind {
    #[default]
    SquaredEuclidean,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig<T> {
    pub eta: T,
    pub cost: CostKind,
    pub max_iters: usize,
    /// Convergence tolerance on the L1 marginal violation.
    pub tol: T,
}

impl<T: Scalar> Default for SinkhornConfig<T> {
    fn default() -> Self {
        Self {
            eta: T::one(),
            cost: CostKind::SquaredEuclidean,
            max_iters: 10_000,
            tol: T::lit(1e-9),
        }
    }
}

/// Result of a Sinkhorn solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornPlan<T> {
    /// `n_src * pi`, so every row sums to one.
    pub coupling: Array2<T>,
    pub iterations: usize,
    pub converged: bool,
    pub log_domain: bool,
    /// L1 violation of the source and destination marginals of `pi`.
    pub marginal_error: (T, T),
}

impl<T: Scalar> SinkhornPlan<T> {
    /// The unscaled coupling `pi` (marginals `1/n_src`, `1/n_dst`).
    pub fn raw_coupling(&self) -> Array2<T> {
        &self.coupling / T::of_usize(self.coupling.nrows())
    }
}

pub fn cost_matrix<T: Scalar>(src: ArrayView2<'_, T>, dst: ArrayView2<'_, T>, kind: CostKind) -> Array2<T> {
    Array2::from_shape_fn((src.nrows(), dst.nrows()), |(i, j)| {
        let sq: T = src
            .row(i)
            .iter()
            .zip(dst.row(j))
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum();
        match kind {
            CostKind::SquaredEuclidean => sq,
            CostKind::Euclidean => sq.sqrt(),
        }
    })
}

/// Solves the entropic problem for a precomputed cost matrix with uniform
/// marginals.
pub fn sinkhorn_from_cost<T: Scalar>(cost: ArrayView2<'_, T>, cfg: &SinkhornConfig<T>) -> Result<SinkhornPlan<T>> {
    let (ns, nd) = cost.dim();
    if ns == 0 {
        return Err(Error::TooFewRows { n: 0, required: 1 });
    }
    if nd == 0 {
        return Err(Error::EmptyDestination);
    }
    if !(cfg.eta > T::zero()) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {}", cfg.eta)));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Parse("non-finite transport cost".into()));
    }
    let scaled = cost.mapv(|c| c / cfg.eta);
    let max_scaled = scaled.iter().fold(T::zero(), |m, &c| m.max(c));
    if max_scaled > T::lit(LOG_DOMAIN_THRESHOLD) {
        log_domain(&scaled, cfg)
    } else {
        plain(&scaled, cfg)
    }
}

fn plain<T: Scalar>(scaled: &Array2<T>, cfg: &SinkhornConfig<T>) -> Result<SinkhornPlan<T>> {
    let (ns, nd) = scaled.dim();
    let a = T::one() / T::of_usize(ns);
    let b = T::one() / T::of_usize(nd);
    let k = scaled.mapv(|c| (-c).exp());
    if k.iter().all(|&x| x == T::zero()) {
        return Err(Error::NumericalUnderflow);
    }
    let mut u = Array1::<T>::from_elem(ns, T::one());
    let mut v = Array1::<T>::from_elem(nd, T::one());
    let mut best: Option<(T, Array1<T>, Array1<T>)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut kv = k.dot(&v);
    for it in 1..=cfg.max_iters {
        iterations = it;
        u = kv.mapv(|x| a / x);
        let ktu = k.t().dot(&u);
        v = ktu.mapv(|x| b / x);
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NumericalUnderflow);
        }
        // After the v-update the destination marginal is exact; check the source side.
        kv = k.dot(&v);
        let err: T = u.iter().zip(kv.iter()).map(|(&ui, &r)| (ui * r - a).abs()).sum();
        if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
            best = Some((err, u.clone(), v.clone()));
        }
        if err < cfg.tol {
            converged = true;
            break;
        }
    }
    let (_, u, v) = if converged {
        (T::zero(), u, v)
    } else {
        best.expect("at least one sweep")
    };
    let pi = Array2::from_shape_fn((ns, nd), |(i, j)| u[i] * k[[i, j]] * v[j]);
    Ok(finish(pi, iterations, converged, false))
}

fn logsumexp<T: Scalar>(xs: impl Iterator<Item = T> + Clone) -> T {
    let m = xs.clone().fold(T::neg_infinity(), |m, x| m.max(x));
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<T>().ln()
}

fn log_domain<T: Scalar>(scaled: &Array2<T>, cfg: &SinkhornConfig<T>) -> Result<SinkhornPlan<T>> {
    let (ns, nd) = scaled.dim();
    let log_a = -T::of_usize(ns).ln();
    let log_b = -T::of_usize(nd).ln();
    let a = T::one() / T::of_usize(ns);
    // Potentials in units of eta: pi_ij = exp(f_i + g_j - C_ij / eta).
    let mut f = Array1::<T>::zeros(ns);
    let mut g = Array1::<T>::zeros(nd);
    let mut best: Option<(T, Array1<T>, Array1<T>)> = None;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=cfg.max_iters {
        iterations = it;
        for i in 0..ns {
            f[i] = log_a - logsumexp((0..nd).map(|j| g[j] - scaled[[i, j]]));
        }
        for j in 0..nd {
            g[j] = log_b - logsumexp((0..ns).map(|i| f[i] - scaled[[i, j]]));
        }
        if f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NumericalUnderflow);
        }
        let err: T = (0..ns)
            .map(|i| {
                let r: T = (0..nd).map(|j| (f[i] + g[j] - scaled[[i, j]]).exp()).sum();
                (r - a).abs()
            })
            .sum();
        if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
            best = Some((err, f.clone(), g.clone()));
        }
        if err < cfg.tol {
            converged = true;
            break;
        }
    }
    let (_, f, g) = if converged {
        (T::zero(), f, g)
    } else {
        best.expect("at least one sweep")
    };
    let pi = Array2::from_shape_fn((ns, nd), |(i, j)| (f[i] + g[j] - scaled[[i, j]]).exp());
    Ok(finish(pi, iterations, converged, true))
}

fn finish<T: Scalar>(pi: Array2<T>, iterations: usize, converged: bool, log_domain: bool) -> SinkhornPlan<T> {
    let (ns, nd) = pi.dim();
    let a = T::one() / T::of_usize(ns);
    let b = T::one() / T::of_usize(nd);
    let row_err: T = pi.rows().into_iter().map(|r| (r.sum() - a).abs()).sum();
    let col_err: T = pi.columns().into_iter().map(|c| (c.sum() - b).abs()).sum();
    SinkhornPlan {
        coupling: pi * T::of_usize(ns),
        iterations,
        converged,
        log_domain,
        marginal_error: (row_err, col_err),
    }
}
