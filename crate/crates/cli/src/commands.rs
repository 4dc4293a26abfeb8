use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use wsfair_core::data::{validate_dataset, GroupAssignment, LabelVector, WeakLabelMatrix};
use wsfair_core::endmodel::{predict_logreg, train_logreg, Targets};
use wsfair_core::labelmodel::predict_labels;
use wsfair_core::metrics::{center_scan, dp_gap, dp_threshold, fairness_report, CenterScanOptions};
use wsfair_core::sbm::{group_accuracies, run_pipeline, run_sbm, ClassPrior};
use wsfair_core::synth::{gen_fig5_dataset, gen_lfcount_dataset, gen_theorem1_dataset};
use wsfair_core::transport::{CostKind, OtKind, SinkhornConfig};
use wsfair_core::{
    io, labelmodel, Dataset, FeatureMatrix, PipelineConfig, SbmAudit, SbmConfig, ScoreVector, TrainConfig,
};

use crate::args::{
    CenterScanArgs, Cost, EndModelMode, EstimateArgs, Method, Postprocess, RunArgs, SbmArgs, SynthArgs,
    SynthExperiment,
};
use crate::output::{open, Outputs};
use crate::{CliError, SPEC_VERSION};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn config_json<A: serde::Serialize>(command: &str, args: &A) -> Value {
    json!({
        "spec_version": SPEC_VERSION,
        "command": command,
        "config": serde_json::to_value(args).expect("arguments serialize"),
    })
}

fn distinct_paths(inputs: &[&Path], out: &Path) -> Result<(), CliError> {
    for (i, a) in inputs.iter().enumerate() {
        if inputs[i + 1..].contains(a) {
            return Err(usage(format!("input path {} given twice", a.display())));
        }
        if *a == out {
            return Err(usage(format!("output directory {} is also an input", out.display())));
        }
    }
    Ok(())
}

pub(crate) fn class_prior(raw: &str) -> Result<ClassPrior<f64>, CliError> {
    if raw == "estimate" {
        return Ok(ClassPrior::Estimated);
    }
    match raw.parse::<f64>() {
        Ok(p) if p > 0.0 && p < 1.0 => Ok(ClassPrior::Fixed(p)),
        _ => Err(usage(format!("class prior must lie in (0, 1) or be `estimate`, got {raw:?}"))),
    }
}

/// SBM settings for `method`, or `None` for the baseline.
pub(crate) fn sbm_config(method: Method, a: &SbmArgs, seed: u64) -> Result<Option<SbmConfig>, CliError> {
    let ot_kind = match method {
        Method::Baseline => return Ok(None),
        Method::SbmNone => OtKind::None,
        Method::SbmLinear => OtKind::Linear,
        Method::SbmSinkhorn => OtKind::Sinkhorn,
    };
    let cfg = SbmConfig {
        epsilon: a.epsilon,
        ot_kind,
        sinkhorn: SinkhornConfig {
            eta: a.eta,
            cost: match a.cost {
                Cost::Sqeuclidean => CostKind::SquaredEuclidean,
                Cost::Euclidean => CostKind::Euclidean,
            },
            max_iters: a.sinkhorn_max_iters,
            ..SinkhornConfig::default()
        },
        sinkhorn_subsample: a.sinkhorn_subsample,
        knn_k: a.knn_k,
        seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(Some(cfg))
}

pub(crate) fn pipeline_config(method: Method, a: &SbmArgs, seed: u64) -> Result<PipelineConfig, CliError> {
    Ok(PipelineConfig {
        sbm: sbm_config(method, a, seed)?,
        class_prior: class_prior(&a.class_prior)?,
    })
}

/// Full report with truth, otherwise the demographic-parity gap only.
fn metrics_json(pred: &LabelVector, truth: Option<&LabelVector>, groups: &GroupAssignment) -> Result<Value, CliError> {
    Ok(match truth {
        Some(t) => fairness_report::<f64>(pred, t, groups)?.to_json(),
        None => json!({"dp_gap": dp_gap::<f64>(pred, groups)?}),
    })
}

fn read_inputs(
    features: &Path,
    weak: &Path,
    labels: Option<&Path>,
    two_groups: bool,
) -> Result<(Dataset, Option<LabelVector>), CliError> {
    let (x, groups) = io::read_features::<f64, _>(open(features)?)?;
    let w = io::read_weak(open(weak)?, x.row_ids())?;
    let truth = match labels {
        Some(p) => Some(io::read_labels(open(p)?, x.row_ids())?),
        None => None,
    };
    Ok((validate_dataset(x, groups, w, two_groups)?, truth))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    if a.n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    let s = match a.experiment {
        SynthExperiment::Fig5 => gen_fig5_dataset::<f64>(a.n, a.seed)?,
        SynthExperiment::Lfcount => {
            if a.m < 3 {
                return Err(usage(format!("--m must be >= 3, got {}", a.m)));
            }
            gen_lfcount_dataset::<f64>(a.n, a.m, a.seed)?
        }
        SynthExperiment::Theorem1 => {
            if !(a.theta >= 0.0) || !a.shift.is_finite() {
                return Err(usage("--theta must be >= 0 and --shift finite"));
            }
            gen_theorem1_dataset::<f64>(a.n, a.theta, a.shift, a.seed)?
        }
    };
    let d = &s.dataset;
    let ids = d.features().row_ids();
    let mut specs = s.specs_json();
    specs["spec_version"] = json!(SPEC_VERSION);
    let mut out = Outputs::new(&a.out)?;
    out.write("features.csv", |w| Ok(io::write_features(w, d.features(), d.groups())?))?;
    out.write("weak.csv", |w| Ok(io::write_weak(w, ids, d.weak())?))?;
    out.write("labels.csv", |w| Ok(io::write_labels(w, ids, &s.truth)?))?;
    out.write_json("specs.json", &specs)?;
    out.commit()
}

fn find_lf(weak: &WeakLabelMatrix, name: Option<&str>) -> Result<usize, CliError> {
    match name {
        None => Ok(0),
        Some(n) => weak
            .lf_names()
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| usage(format!("no labeling function named {n:?}"))),
    }
}

fn lf_votes(weak: &WeakLabelMatrix, j: usize) -> LabelVector {
    LabelVector::new(weak.column(j).to_vec()).expect("votes are labels")
}

fn empirical_accuracy(weak: &WeakLabelMatrix, j: usize, truth: &LabelVector, groups: &GroupAssignment, g: u8) -> f64 {
    let rows = groups.rows_of(g);
    let hits = rows
        .iter()
        .filter(|&&i| weak.votes()[[i, j]] == truth.as_slice()[i])
        .count();
    hits as f64 / rows.len() as f64
}

/// `lf,group,a_hat_pre,a_hat_post,acc_pre,acc_post,direction`.
fn write_per_lf<W: std::io::Write>(
    w: W,
    data: &Dataset,
    post: &WeakLabelMatrix,
    truth: Option<&LabelVector>,
    audit: Option<&SbmAudit>,
) -> Result<(), CliError> {
    let groups = data.groups();
    let split = |weak: &WeakLabelMatrix| -> Result<[wsfair_core::AccuracyEstimate; 2], CliError> {
        let w0 = weak.select_rows(&groups.rows_of(0));
        let w1 = weak.select_rows(&groups.rows_of(1));
        Ok(group_accuracies(&w0, &w1)?)
    };
    let pre = split(data.weak())?;
    let after = split(post)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["lf", "group", "a_hat_pre", "a_hat_post", "acc_pre", "acc_post", "direction"])
        .map_err(wsfair_core::Error::from)?;
    for (j, name) in data.weak().lf_names().iter().enumerate() {
        let direction = audit
            .map(|a| serde_json::to_value(a.per_lf[j].direction).expect("direction serializes"))
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_else(|| "none".to_owned());
        for g in 0..2u8 {
            let (acc_pre, acc_post) = match truth {
                Some(t) => (
                    io::fmt_real(empirical_accuracy(data.weak(), j, t, groups, g)),
                    io::fmt_real(empirical_accuracy(post, j, t, groups, g)),
                ),
                None => (String::new(), String::new()),
            };
            wtr.write_record([
                name.as_str(),
                &g.to_string(),
                &io::fmt_real(pre[usize::from(g)].per_lf[j]),
                &io::fmt_real(after[usize::from(g)].per_lf[j]),
                &acc_pre,
                &acc_post,
                &direction,
            ])
            .map_err(wsfair_core::Error::from)?;
        }
    }
    wtr.flush().map_err(wsfair_core::Error::from)?;
    Ok(())
}

fn postprocess(
    scores: &ScoreVector,
    labels: LabelVector,
    groups: &GroupAssignment,
    reference: &LabelVector,
    a: &RunArgs,
) -> Result<(LabelVector, Value), CliError> {
    match a.postprocess {
        Postprocess::None => Ok((labels, Value::Null)),
        Postprocess::DpThreshold => {
            let t = dp_threshold(scores, groups, reference, a.threshold_grid)?;
            Ok((t.labels, json!(t.thresholds)))
        }
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut inputs = vec![a.features.as_path(), a.weak.as_path()];
    inputs.extend(a.labels.as_deref());
    distinct_paths(&inputs, &a.out)?;
    if a.threshold_grid < 2 {
        return Err(usage("--threshold-grid must be >= 2"));
    }
    let pcfg = pipeline_config(a.method, &a.sbm, a.seed)?;
    let (data, truth) = read_inputs(&a.features, &a.weak, a.labels.as_deref(), true)?;
    let truth = truth.as_ref();
    let groups = data.groups();
    let ids = data.features().row_ids();
    let mut report = config_json("run", a);
    report["n_rows"] = json!(data.n_rows());
    report["n_lfs"] = json!(data.weak().n_lfs());
    report["n_per_group"] = json!(groups.counts());

    let mut out = Outputs::new(&a.out)?;
    if let Some(lf) = &a.direct_lf_eval {
        let j = find_lf(data.weak(), lf.as_deref())?;
        let (post, audit) = match &pcfg.sbm {
            Some(cfg) => {
                let o = run_sbm(&data, cfg)?;
                (o.weak, Some(o.audit))
            }
            None => (data.weak().clone(), None),
        };
        report["direct_lf"] = json!({
            "lf": data.weak().lf_names()[j],
            "before": metrics_json(&lf_votes(data.weak(), j), truth, groups)?,
            "after": metrics_json(&lf_votes(&post, j), truth, groups)?,
        });
        report["label_model"] = Value::Null;
        report["end_model"] = Value::Null;
        report["sbm"] = sbm_json(audit.as_ref());
        out.write("per_lf.csv", |w| write_per_lf(w, &data, &post, truth, audit.as_ref()))?;
        out.write_json("report.json", &report)?;
        return out.commit();
    }

    let res = run_pipeline(&data, &pcfg)?;
    let reference = truth.cloned().unwrap_or_else(|| res.labels.clone());
    let (lm_labels, lm_thresholds) = postprocess(&res.scores, res.labels.clone(), groups, &reference, a)?;
    let mut lm = metrics_json(&lm_labels, truth, groups)?;
    lm["thresholds"] = lm_thresholds;
    lm["params"] = json!({
        "weights": res.params.weights,
        "class_prior_logit": res.params.class_prior_logit,
    });
    report["direct_lf"] = Value::Null;
    report["label_model"] = lm;

    let model = match a.end_model {
        EndModelMode::None => None,
        mode => {
            let cfg = TrainConfig {
                lr: a.lr,
                l2: a.l2,
                max_iters: a.max_iters,
                tol: a.tol,
                seed: a.seed,
                hard: mode == EndModelMode::Hard,
            };
            let model = train_logreg(data.features(), Targets::Soft(&res.scores), &cfg)?;
            let scores = predict_logreg(&model, data.features())?;
            let (labels, thresholds) = postprocess(&scores, predict_labels(&scores), groups, &reference, a)?;
            let mut em = metrics_json(&labels, truth, groups)?;
            em["thresholds"] = thresholds;
            em["training"] = json!({
                "iterations": model.meta.iterations,
                "converged": model.meta.converged,
                "final_loss": model.meta.final_loss,
                "final_lr": model.meta.final_lr,
            });
            report["end_model"] = em;
            Some(model)
        }
    };
    if model.is_none() {
        report["end_model"] = Value::Null;
    }
    report["sbm"] = sbm_json(res.audit.as_ref());

    out.write("per_lf.csv", |w| write_per_lf(w, &data, &res.weak, truth, res.audit.as_ref()))?;
    out.write("predictions.csv", |w| Ok(io::write_predictions(w, ids, &res.scores, &lm_labels)?))?;
    if let Some(m) = &model {
        out.write_json("model.json", &m.to_json())?;
    }
    out.write_json("report.json", &report)?;
    out.commit()
}

fn sbm_json(audit: Option<&SbmAudit>) -> Value {
    match audit {
        Some(a) => json!({"per_lf": a.to_json(), "maps": a.maps_to_json()}),
        None => Value::Null,
    }
}

pub fn cmd_center_scan(a: &CenterScanArgs) -> Result<Vec<PathBuf>, CliError> {
    distinct_paths(&[&a.features, &a.weak, &a.labels], &a.out)?;
    let ok_frac = |v: f64| v > 0.0 && v <= 1.0;
    if !ok_frac(a.neighborhood) || !ok_frac(a.step) || a.max_candidates == 0 {
        return Err(usage("--neighborhood and --step must lie in (0, 1], --max-candidates >= 1"));
    }
    let (data, truth) = read_inputs(&a.features, &a.weak, Some(&a.labels), true)?;
    let truth = truth.expect("labels requested");
    let j = find_lf(data.weak(), a.lf.as_deref())?;
    let correct: Vec<bool> = data
        .weak()
        .column(j)
        .iter()
        .zip(truth.as_slice())
        .map(|(v, y)| v == y)
        .collect();
    let opts = CenterScanOptions {
        neighborhood_frac: a.neighborhood,
        step_frac: a.step,
        max_candidates: a.max_candidates,
        seed: a.seed,
    };
    let scan = center_scan::<f64>(data.features(), &correct, data.groups(), &opts)?;
    let x: &FeatureMatrix = data.features();
    let mut summary = config_json("center-scan", a);
    summary["lf"] = json!(data.weak().lf_names()[j]);
    summary["best_center"] = json!({
        "id": x.row_ids()[scan.best_center_row],
        "row": scan.best_center_row,
        "coordinates": x.row(scan.best_center_row).to_vec(),
        "neighborhood_accuracy": scan.best_neighborhood_accuracy,
    });
    let mut out = Outputs::new(&a.out)?;
    out.write("center_scan.csv", |w| Ok(io::write_center_scan(w, &scan)?))?;
    out.write_json("center_scan.json", &summary)?;
    out.commit()
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<Vec<PathBuf>, CliError> {
    distinct_paths(&[&a.features, &a.weak], &a.out)?;
    let (data, _) = read_inputs(&a.features, &a.weak, None, false)?;
    let all = labelmodel::estimate_accuracies::<f64>(data.weak())?;
    let mut blocks = vec![("all".to_owned(), all)];
    for g in 0..2u8 {
        let rows = data.groups().rows_of(g);
        if !rows.is_empty() {
            blocks.push((g.to_string(), labelmodel::estimate_accuracies(&data.weak().select_rows(&rows))?));
        }
    }
    let refs: Vec<(&str, &wsfair_core::AccuracyEstimate)> = blocks.iter().map(|(g, e)| (g.as_str(), e)).collect();
    let mut out = Outputs::new(&a.out)?;
    out.write("accuracies.csv", |w| Ok(io::write_accuracies(w, data.weak().lf_names(), &refs)?))?;
    out.commit()
}
