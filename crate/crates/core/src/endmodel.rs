//! Logistic-regression end model trained on pseudolabels by full-batch
//! gradient descent.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde_json::json;

use crate::data::{FeatureMatrix, LabelVector, ScoreVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub lr: T,
    pub l2: T,
    pub max_iters: usize,
    pub tol: T,
    pub seed: u64,
    /// Round soft targets at 0.5 before training.
    pub hard: bool,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            lr: T::lit(0.5),
            l2: T::lit(1e-4),
            max_iters: 5000,
            tol: T::lit(1e-6),
            seed: 0,
            hard: false,
        }
    }
}

/// Training targets: probabilities in `[0, 1]` or hard `±1` labels.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a, T> {
    Soft(&'a ScoreVector<T>),
    Hard(&'a LabelVector),
}

impl<T: Scalar> Targets<'_, T> {
    fn len(&self) -> usize {
        match self {
            Targets::Soft(s) => s.len(),
            Targets::Hard(l) => l.len(),
        }
    }

    fn probabilities(&self, hard: bool) -> Vec<T> {
        let half = T::lit(0.5);
        match self {
            Targets::Soft(s) if hard => s
                .as_slice()
                .iter()
                .map(|&p| if p >= half { T::one() } else { T::zero() })
                .collect(),
            Targets::Soft(s) => s.as_slice().to_vec(),
            Targets::Hard(l) => l
                .as_slice()
                .iter()
                .map(|&y| if y > 0 { T::one() } else { T::zero() })
                .collect(),
        }
    }
}

/// Per-column affine standardization. Constant columns keep `std = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardize<T> {
    pub mean: Array1<T>,
    pub std: Array1<T>,
}

impl<T: Scalar> Standardize<T> {
    pub fn fit(x: ArrayView2<'_, T>) -> Self {
        let n = T::of_usize(x.nrows());
        let mean = x.sum_axis(Axis(0)) / n;
        let std = Array1::from_iter(x.columns().into_iter().zip(mean.iter()).map(|(c, &m)| {
            let var = c.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n;
            let s = var.sqrt();
            if s > T::zero() && s.is_finite() {
                s
            } else {
                T::one()
            }
        }));
        Self { mean, std }
    }

    pub fn apply(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        (&x - &self.mean.view().insert_axis(Axis(0))) / self.std.view().insert_axis(Axis(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta<T> {
    pub iterations: usize,
    pub final_loss: T,
    pub converged: bool,
    pub final_lr: T,
    pub seed: u64,
    /// Loss at the start and after every accepted step.
    pub loss_trace: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    /// Weights on standardized features.
    pub weights: Array1<T>,
    pub bias: T,
    pub standardize: Standardize<T>,
    pub meta: TrainingMeta<T>,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn to_json(&self) -> serde_json::Value {
        let v = |a: &Array1<T>| a.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        json!({
            "w": v(&self.weights),
            "b": self.bias.as_f64(),
            "standardize": {"mean": v(&self.standardize.mean), "std": v(&self.standardize.std)},
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let vec = |v: &serde_json::Value, what: &str| -> Result<Array1<T>> {
            v.as_array()
                .ok_or_else(|| Error::Parse(format!("model field {what} must be an array")))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .filter(|f| f.is_finite())
                        .map(T::lit)
                        .ok_or_else(|| Error::Parse(format!("model field {what} has a non-finite entry")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Array1::from)
        };
        let weights = vec(&value["w"], "w")?;
        let bias = value["b"]
            .as_f64()
            .filter(|f| f.is_finite())
            .map(T::lit)
            .ok_or_else(|| Error::Parse("model field b must be a finite number".into()))?;
        let mean = vec(&value["standardize"]["mean"], "standardize.mean")?;
        let std = vec(&value["standardize"]["std"], "standardize.std")?;
        if mean.len() != weights.len() || std.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "model standardization",
                expected: weights.len(),
                found: mean.len().max(std.len()),
            });
        }
        Ok(Self {
            weights,
            bias,
            standardize: Standardize { mean, std },
            meta: TrainingMeta {
                iterations: 0,
                final_loss: T::nan(),
                converged: false,
                final_lr: T::nan(),
                seed: 0,
                loss_trace: Vec::new(),
            },
        })
    }
}

/// Mean cross-entropy plus `(l2 / 2) ||w||^2`, with its gradient in `w` and `b`.
pub fn loss_gradient<T: Scalar>(
    x: ArrayView2<'_, T>,
    targets: &[T],
    w: ArrayView1<'_, T>,
    b: T,
    l2: T,
) -> (T, Array1<T>, T) {
    let n = T::of_usize(x.nrows());
    let z = x.dot(&w) + b;
    let mut loss = T::zero();
    let mut resid = Array1::<T>::zeros(z.len());
    for ((r, &zi), &t) in resid.iter_mut().zip(z.iter()).zip(targets) {
        loss += zi.softplus() - t * zi;
        *r = zi.sigmoid() - t;
    }
    let half = T::lit(0.5);
    loss = loss / n + half * l2 * w.dot(&w);
    let gw = x.t().dot(&resid) / n + &(w.to_owned() * l2);
    let gb = resid.sum() / n;
    (loss, gw, gb)
}

fn max_abs<T: Scalar>(g: &Array1<T>, gb: T) -> T {
    g.iter().fold(gb.abs(), |m, v| m.max(v.abs()))
}

/// Full-batch gradient descent from zero weights. A step that would raise
/// the loss is retried with half the learning rate, and the halved rate is
/// kept for later steps.
pub fn train_logreg<T: Scalar>(
    x: &FeatureMatrix<T>,
    targets: Targets<'_, T>,
    cfg: &TrainConfig<T>,
) -> Result<LogisticModel<T>> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { n, required: 2 });
    }
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            context: "end-model targets",
            expected: n,
            found: targets.len(),
        });
    }
    if !(cfg.lr > T::zero()) || !(cfg.l2 >= T::zero()) || !(cfg.tol >= T::zero()) {
        return Err(Error::InvalidParameter("lr must be > 0, l2 and tol >= 0".into()));
    }
    let t = targets.probabilities(cfg.hard);
    let standardize = Standardize::fit(x.values());
    let z = standardize.apply(x.values());

    let mut w = Array1::<T>::zeros(x.n_dims());
    let mut b = T::zero();
    let mut lr = cfg.lr;
    let (mut loss, mut gw, mut gb) = loss_gradient(z.view(), &t, w.view(), b, cfg.l2);
    let mut trace = vec![loss];
    let mut iterations = 0;
    let mut converged = max_abs(&gw, gb) < cfg.tol;
    let min_lr = cfg.lr * T::lit(1e-20);
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        loop {
            let w_new = &w - &(&gw * lr);
            let b_new = b - gb * lr;
            let (l_new, gw_new, gb_new) = loss_gradient(z.view(), &t, w_new.view(), b_new, cfg.l2);
            if !l_new.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: iterations });
            }
            if l_new <= loss {
                w = w_new;
                b = b_new;
                loss = l_new;
                gw = gw_new;
                gb = gb_new;
                break;
            }
            lr *= T::lit(0.5);
            if lr < min_lr {
                break;
            }
        }
        trace.push(loss);
        converged = max_abs(&gw, gb) < cfg.tol;
        if lr < min_lr {
            break;
        }
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        standardize,
        meta: TrainingMeta {
            iterations,
            final_loss: loss,
            converged,
            final_lr: lr,
            seed: cfg.seed,
            loss_trace: trace,
        },
    })
}

/// `sigmoid(w . standardize(x) + b)` per row.
pub fn predict_logreg<T: Scalar>(model: &LogisticModel<T>, x: &FeatureMatrix<T>) -> Result<ScoreVector<T>> {
    if x.n_dims() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            context: "end-model feature dims",
            expected: model.weights.len(),
            found: x.n_dims(),
        });
    }
    let z = model.standardize.apply(x.values()).dot(&model.weights) + model.bias;
    ScoreVector::new(z.iter().map(|v| v.sigmoid()).collect())
}
