//! Weak supervision with group source-bias mitigation.
//!
//! Labeling-function accuracies are estimated per group with the triplet
//! method; when a function is markedly less accurate on one group, that
//! group's features are transported onto the other group (affine Gaussian
//! map or entropic Sinkhorn coupling) and its votes are replaced by the votes
//! of nearest neighbours there. A weighted-vote label model and a logistic
//! end model complete the pipeline.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix `f64`; the `*32` variants fix `f32`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod endmodel;
pub mod error;
pub mod io;
pub mod labelmodel;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod sbm;
pub mod scalar;
pub mod synth;
pub mod transport;

pub use data::{split_by_group, validate_dataset, GroupAssignment, LabelVector, WeakLabelMatrix};
pub use endmodel::{predict_logreg, train_logreg, Targets};
pub use error::{Error, ErrorKind, Result};
pub use labelmodel::{
    estimate_accuracies, fit_label_model, majority_vote, predict_labels, predict_proba, triplet_estimate,
};
pub use metrics::{center_scan, dp_gap, dp_threshold, eo_gap, fairness_report};
pub use sbm::{run_pipeline, run_sbm, ClassPrior, Direction};
pub use scalar::Scalar;
pub use transport::{fit_linear_ot, OtKind};

pub type FeatureMatrix = data::FeatureMatrix<f64>;
pub type ScoreVector = data::ScoreVector<f64>;
pub type Dataset = data::Dataset<f64>;
pub type AccuracyEstimate = labelmodel::AccuracyEstimate<f64>;
pub type LabelModelParams = labelmodel::LabelModelParams<f64>;
pub type LinearMap = transport::LinearMap<f64>;
pub type SinkhornConfig = transport::SinkhornConfig<f64>;
pub type SinkhornPlan = transport::SinkhornPlan<f64>;
pub type TransportMap = transport::TransportMap<f64>;
pub type SbmConfig = sbm::SbmConfig<f64>;
pub type SbmAudit = sbm::SbmAudit<f64>;
pub type PipelineConfig = sbm::PipelineConfig<f64>;
pub type PipelineOutput = sbm::PipelineOutput<f64>;
pub type FairnessReport = metrics::FairnessReport<f64>;
pub type LogisticModel = endmodel::LogisticModel<f64>;
pub type TrainConfig = endmodel::TrainConfig<f64>;
pub type SynthDataset = synth::SynthDataset<f64>;

pub type FeatureMatrix32 = data::FeatureMatrix<f32>;
pub type ScoreVector32 = data::ScoreVector<f32>;
pub type Dataset32 = data::Dataset<f32>;
pub type AccuracyEstimate32 = labelmodel::AccuracyEstimate<f32>;
pub type LinearMap32 = transport::LinearMap<f32>;
pub type SbmConfig32 = sbm::SbmConfig<f32>;
pub type LogisticModel32 = endmodel::LogisticModel<f32>;
