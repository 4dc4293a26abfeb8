//! Source bias mitigation: per-group accuracy estimation, the gap test, and
//! rewriting the weaker group's votes by transporting it onto the stronger
//! group and borrowing votes there.

use ndarray::Axis;
use serde::Serialize;

use crate::data::{split_by_group, Dataset, LabelVector, ScoreVector, WeakLabelMatrix};
use crate::error::{Error, Result};
use crate::labelmodel::{
    estimate_accuracies, estimate_class_prior, fit_label_model, predict_labels, predict_proba, AccuracyEstimate,
    LabelModelParams,
};
use crate::scalar::Scalar;
use crate::transport::{transport, FittedMap, OtKind, SinkhornConfig, TransportOptions};

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig<T> {
    /// Minimum accuracy gap (correlation scale) that triggers a rewrite.
    pub epsilon: T,
    pub ot_kind: OtKind,
    pub sinkhorn: SinkhornConfig<T>,
    pub sinkhorn_subsample: usize,
    pub knn_k: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SbmConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(DEFAULT_EPSILON),
            ot_kind: OtKind::Linear,
            sinkhorn: SinkhornConfig::default(),
            sinkhorn_subsample: 5_000,
            knn_k: 1,
            seed: 0,
        }
    }
}

impl<T: Scalar> SbmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= T::zero()) {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidParameter("knn_k must be >= 1".into()));
        }
        if !(self.sinkhorn.eta > T::zero()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {}", self.sinkhorn.eta)));
        }
        Ok(())
    }

    fn transport_options(&self) -> TransportOptions<T> {
        TransportOptions {
            kind: self.ot_kind,
            sinkhorn: self.sinkhorn,
            sinkhorn_subsample: self.sinkhorn_subsample,
            seed: self.seed,
            knn_k: self.knn_k,
        }
    }
}

/// Which group's votes were rewritten. `ZeroToOne` transports group 0 onto
/// group 1 and rewrites group 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "0->1")]
    ZeroToOne,
    #[serde(rename = "1->0")]
    OneToZero,
}

impl Direction {
    /// `(source, destination)` groups of the transport.
    pub fn groups(self) -> Option<(u8, u8)> {
        match self {
            Direction::None => None,
            Direction::ZeroToOne => Some((0, 1)),
            Direction::OneToZero => Some((1, 0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfDecision<T> {
    pub lf: String,
    pub a0: T,
    pub a1: T,
    pub direction: Direction,
    /// Rows of the rewritten group (all of them are re-voted).
    pub rows_rewritten: usize,
    /// Entries whose value actually changed.
    pub votes_changed: usize,
    pub map_id: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRecord<T> {
    pub id: usize,
    pub direction: Direction,
    pub fitted: FittedMap<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmAudit<T> {
    pub per_lf: Vec<LfDecision<T>>,
    pub maps: Vec<MapRecord<T>>,
}

impl<T: Scalar> SbmAudit<T> {
    pub fn rewritten_lfs(&self) -> Vec<usize> {
        self.per_lf
            .iter()
            .enumerate()
            .filter(|(_, d)| d.direction != Direction::None)
            .map(|(j, _)| j)
            .collect()
    }

    /// `[{"lf", "a0", "a1", "direction", "rows_rewritten", ...}, ...]`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row<'a> {
            lf: &'a str,
            a0: f64,
            a1: f64,
            direction: Direction,
            rows_rewritten: usize,
            votes_changed: usize,
            map_id: Option<usize>,
            note: Option<&'a str>,
        }
        let rows: Vec<Row<'_>> = self
            .per_lf
            .iter()
            .map(|d| Row {
                lf: &d.lf,
                a0: d.a0.as_f64(),
                a1: d.a1.as_f64(),
                direction: d.direction,
                rows_rewritten: d.rows_rewritten,
                votes_changed: d.votes_changed,
                map_id: d.map_id,
                note: d.note.as_deref(),
            })
            .collect();
        serde_json::to_value(rows).expect("audit rows serialize")
    }

    pub fn maps_to_json(&self) -> serde_json::Value {
        let maps: Vec<serde_json::Value> = self
            .maps
            .iter()
            .map(|m| {
                let detail = match &m.fitted {
                    FittedMap::Identity => serde_json::json!({"kind": "none"}),
                    FittedMap::Linear(l) => l.to_json(),
                    FittedMap::Sinkhorn {
                        iterations,
                        converged,
                        log_domain,
                        marginal_error,
                        fitted_rows,
                    } => serde_json::json!({
                        "kind": "sinkhorn",
                        "iterations": iterations,
                        "converged": converged,
                        "log_domain": log_domain,
                        "marginal_error": [marginal_error.0.as_f64(), marginal_error.1.as_f64()],
                        "fitted_rows": [fitted_rows.0, fitted_rows.1],
                    }),
                };
                serde_json::json!({"id": m.id, "direction": m.direction, "map": detail})
            })
            .collect();
        serde_json::Value::Array(maps)
    }
}

/// Triplet estimation plus sign resolution, run separately on each group.
pub fn group_accuracies<T: Scalar>(
    weak0: &WeakLabelMatrix,
    weak1: &WeakLabelMatrix,
) -> Result<[AccuracyEstimate<T>; 2]> {
    if weak0.n_rows() == 0 {
        return Err(Error::EmptyGroup { group: 0 });
    }
    if weak1.n_rows() == 0 {
        return Err(Error::EmptyGroup { group: 1 });
    }
    Ok([estimate_accuracies(weak0)?, estimate_accuracies(weak1)?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmOutcome<T> {
    pub weak: WeakLabelMatrix,
    pub audit: SbmAudit<T>,
    pub group_estimates: [AccuracyEstimate<T>; 2],
}

fn decide<T: Scalar>(a0: T, a1: T, epsilon: T) -> Direction {
    if a1 >= a0 + epsilon {
        Direction::ZeroToOne
    } else if a0 >= a1 + epsilon {
        Direction::OneToZero
    } else {
        Direction::None
    }
}

/// Rewrites, for every LF whose group accuracies differ by at least
/// `epsilon`, the votes of the weaker group with votes borrowed from the
/// stronger one. One map is fitted per direction and shared by all LFs that
/// use it. Features, groups and row order are untouched; entries of LFs left
/// at [`Direction::None`] are copied verbatim.
pub fn run_sbm<T: Scalar>(data: &Dataset<T>, cfg: &SbmConfig<T>) -> Result<SbmOutcome<T>> {
    cfg.validate()?;
    let split = split_by_group(data)?;
    let estimates = group_accuracies::<T>(&split.part(0).weak, &split.part(1).weak)?;
    let names = data.weak().lf_names();
    let mut per_lf: Vec<LfDecision<T>> = (0..data.weak().n_lfs())
        .map(|j| {
            let (a0, a1) = (estimates[0].per_lf[j], estimates[1].per_lf[j]);
            let degenerate = [0usize, 1].into_iter().find(|&g| estimates[g].flags[j].degenerate);
            let (direction, note) = match degenerate {
                Some(g) => (Direction::None, Some(format!("degenerate vote moments in group {g}"))),
                None => (decide(a0, a1, cfg.epsilon), None),
            };
            LfDecision {
                lf: names[j].clone(),
                a0,
                a1,
                direction,
                rows_rewritten: 0,
                votes_changed: 0,
                map_id: None,
                note,
            }
        })
        .collect();

    let mut weak = data.weak().clone();
    let mut maps = Vec::new();
    let opts = cfg.transport_options();
    for direction in [Direction::ZeroToOne, Direction::OneToZero] {
        let lfs: Vec<usize> = per_lf
            .iter()
            .enumerate()
            .filter(|(_, d)| d.direction == direction)
            .map(|(j, _)| j)
            .collect();
        if lfs.is_empty() {
            continue;
        }
        let (sg, dg) = direction.groups().expect("non-none direction");
        let (src, dst) = (split.part(sg), split.part(dg));
        let dst_cols = dst.weak.votes().select(Axis(1), &lfs);
        match transport(&src.features, &dst.features, dst_cols.view(), &opts) {
            Ok(out) => {
                let id = maps.len();
                maps.push(MapRecord {
                    id,
                    direction,
                    fitted: out.map,
                });
                for (c, &j) in lfs.iter().enumerate() {
                    let new = out.labels.column(c).to_vec();
                    let changed = src
                        .weak
                        .column(j)
                        .iter()
                        .zip(&new)
                        .filter(|(a, b)| a != b)
                        .count();
                    weak.overwrite(j, &src.rows, &new);
                    let d = &mut per_lf[j];
                    d.rows_rewritten = src.rows.len();
                    d.votes_changed = changed;
                    d.map_id = Some(id);
                }
            }
            Err(e) => {
                for &j in &lfs {
                    per_lf[j].direction = Direction::None;
                    per_lf[j].note = Some(format!("transport failed: {e}"));
                }
            }
        }
    }
    Ok(SbmOutcome {
        weak,
        audit: SbmAudit { per_lf, maps },
        group_estimates: estimates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassPrior<T> {
    Fixed(T),
    /// Weighted-vote positive rate from one refinement pass.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    /// `None` runs the plain weak-supervision baseline.
    pub sbm: Option<SbmConfig<T>>,
    pub class_prior: ClassPrior<T>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            sbm: None,
            class_prior: ClassPrior::Fixed(T::lit(0.5)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T> {
    pub scores: ScoreVector<T>,
    pub labels: LabelVector,
    pub audit: Option<SbmAudit<T>>,
    /// Vote matrix the label model was fitted on.
    pub weak: WeakLabelMatrix,
    pub accuracies: AccuracyEstimate<T>,
    pub params: LabelModelParams<T>,
}

/// Optional SBM rewrite, then a label model fitted on the resulting votes.
pub fn run_pipeline<T: Scalar>(data: &Dataset<T>, cfg: &PipelineConfig<T>) -> Result<PipelineOutput<T>> {
    let (weak, audit) = match &cfg.sbm {
        Some(sbm) => {
            let out = run_sbm(data, sbm)?;
            (out.weak, Some(out.audit))
        }
        None => (data.weak().clone(), None),
    };
    let accuracies = estimate_accuracies::<T>(&weak)?;
    let prior = match cfg.class_prior {
        ClassPrior::Fixed(p) => p,
        ClassPrior::Estimated => estimate_class_prior(&accuracies, &weak)?,
    };
    let params = fit_label_model(&accuracies, prior)?;
    let scores = predict_proba(&params, &weak)?;
    let labels = predict_labels(&scores);
    Ok(PipelineOutput {
        scores,
        labels,
        audit,
        weak,
        accuracies,
        params,
    })
}
