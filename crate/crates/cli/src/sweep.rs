//! Grid-by-seed experiment driver with mean and ±1.96·sd summaries.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;
use wsfair_core::data::LabelVector;
use wsfair_core::io::fmt_real;
use wsfair_core::metrics::fairness_report;
use wsfair_core::sbm::run_pipeline;
use wsfair_core::synth::{gen_fig5_dataset, gen_lfcount_dataset, theorem1_sweep};
use wsfair_core::{Error, FairnessReport};

use crate::args::{SweepArgs, SweepExperiment};
use crate::commands::pipeline_config;
use crate::output::Outputs;
use crate::{CliError, SPEC_VERSION};

/// One measured value; `None` when the metric is undefined for that run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub x: f64,
    pub seed: u64,
    pub method: &'static str,
    pub metric: &'static str,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub x: f64,
    pub method: &'static str,
    pub metric: &'static str,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
}

impl SummaryRow {
    pub fn lo(&self) -> f64 {
        self.mean - 1.96 * self.sd
    }

    pub fn hi(&self) -> f64 {
        self.mean + 1.96 * self.sd
    }
}

/// Parses a half-open range `k..e`.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("--seeds must look like k..e with k < e, got {raw:?}"));
    let (a, b) = raw.split_once("..").ok_or_else(bad)?;
    let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a >= b {
        return Err(bad());
    }
    Ok((a..b).collect())
}

fn default_grid(e: SweepExperiment) -> Vec<f64> {
    match e {
        SweepExperiment::Samples => vec![1e2, 1e3, 1e4],
        SweepExperiment::Lfs => vec![3.0, 6.0, 12.0, 24.0],
        SweepExperiment::Shift => vec![0.0, 10.0, 100.0, 1000.0],
    }
}

fn report_records(
    out: &mut Vec<SweepRecord>,
    x: f64,
    seed: u64,
    method: &'static str,
    prefix: bool,
    r: &FairnessReport,
) {
    let metrics: [(&'static str, &'static str, Option<f64>); 4] = [
        ("lf_accuracy", "accuracy", Some(r.accuracy)),
        ("lf_f1", "f1", Some(r.f1)),
        ("lf_dp_gap", "dp_gap", Some(r.dp_gap)),
        ("lf_eo_gap", "eo_gap", r.eo_gap),
    ];
    for (lf_name, name, value) in metrics {
        out.push(SweepRecord {
            x,
            seed,
            method,
            metric: if prefix { lf_name } else { name },
            value,
        });
    }
}

fn as_count(x: f64, what: &str, min: usize) -> Result<usize, CliError> {
    if x.fract() != 0.0 || x < min as f64 || !x.is_finite() {
        return Err(CliError::Usage(format!("{what} grid values must be integers >= {min}, got {x}")));
    }
    Ok(x as usize)
}

fn run_job(a: &SweepArgs, x: f64, seed: u64) -> Result<Vec<SweepRecord>, CliError> {
    let mut out = Vec::new();
    let data = match a.experiment {
        SweepExperiment::Samples => gen_fig5_dataset::<f64>(as_count(x, "samples", 2)?, seed)?,
        SweepExperiment::Lfs => gen_lfcount_dataset::<f64>(a.n, as_count(x, "lfs", 3)?, seed)?,
        SweepExperiment::Shift => unreachable!("shift runs per seed"),
    };
    let d = &data.dataset;
    for &method in &a.methods {
        let res = run_pipeline(d, &pipeline_config(method, &a.sbm, seed)?)?;
        if a.experiment == SweepExperiment::Samples {
            let lf = LabelVector::new(res.weak.column(0).to_vec())?;
            let r = fairness_report(&lf, &data.truth, d.groups())?;
            report_records(&mut out, x, seed, method.name(), true, &r);
        }
        let r = fairness_report(&res.labels, &data.truth, d.groups())?;
        report_records(&mut out, x, seed, method.name(), false, &r);
    }
    Ok(out)
}

/// Runs every `(grid value, seed)` job and returns records sorted by
/// `(x, seed)`, then method and metric in configuration order.
pub fn sweep_records(a: &SweepArgs) -> Result<Vec<SweepRecord>, CliError> {
    let seeds = parse_seeds(&a.seeds)?;
    let grid = if a.grid.is_empty() {
        default_grid(a.experiment)
    } else {
        a.grid.clone()
    };
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("grid values must be finite".into()));
    }
    if a.methods.is_empty() {
        return Err(CliError::Usage("--methods must not be empty".into()));
    }
    for &m in &a.methods {
        pipeline_config(m, &a.sbm, 0)?;
    }
    let mut records: Vec<SweepRecord> = if a.experiment == SweepExperiment::Shift {
        if a.n == 0 || !(a.theta >= 0.0) {
            return Err(CliError::Usage("--n must be >= 1 and --theta >= 0".into()));
        }
        let per_seed = seeds
            .par_iter()
            .map(|&seed| theorem1_sweep(a.theta, &grid, a.n, seed))
            .collect::<Result<Vec<_>, Error>>()?;
        seeds
            .iter()
            .zip(per_seed)
            .flat_map(|(&seed, rows)| {
                rows.into_iter().map(move |(x, acc)| SweepRecord {
                    x,
                    seed,
                    method: "lf",
                    metric: "accuracy",
                    value: Some(acc),
                })
            })
            .collect()
    } else {
        let jobs: Vec<(f64, u64)> = grid
            .iter()
            .flat_map(|&x| seeds.iter().map(move |&s| (x, s)))
            .collect();
        jobs.par_iter()
            .map(|&(x, seed)| run_job(a, x, seed))
            .collect::<Result<Vec<_>, CliError>>()?
            .into_iter()
            .flatten()
            .collect()
    };
    records.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.seed.cmp(&q.seed)));
    Ok(records)
}

/// Mean, sample sd and median per `(x, method, metric)`, skipping undefined
/// values. Rows keep first-appearance order of the sorted records.
pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, &'static str, &'static str)> = Vec::new();
    for r in records {
        let k = (r.x, r.method, r.metric);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(x, method, metric)| {
            let mut v: Vec<f64> = records
                .iter()
                .filter(|r| r.x == x && r.method == method && r.metric == metric)
                .filter_map(|r| r.value)
                .collect();
            v.sort_by(f64::total_cmp);
            let count = v.len();
            let mean = if count == 0 { f64::NAN } else { v.iter().sum::<f64>() / count as f64 };
            let sd = if count < 2 {
                0.0
            } else {
                (v.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
            };
            let median = match count {
                0 => f64::NAN,
                c if c % 2 == 1 => v[c / 2],
                c => 0.5 * (v[c / 2 - 1] + v[c / 2]),
            };
            SummaryRow {
                x,
                method,
                metric,
                count,
                mean,
                sd,
                median,
            }
        })
        .collect()
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Vec<PathBuf>, CliError> {
    let records = sweep_records(a)?;
    let summary = summarize(&records);
    let mut meta = json!({
        "spec_version": SPEC_VERSION,
        "command": "sweep",
        "config": serde_json::to_value(a).expect("arguments serialize"),
    });
    meta["methods"] = json!(a.methods.iter().map(|m| m.name()).collect::<Vec<_>>());
    let csv_err = |e: csv::Error| CliError::Core(Error::from(e));
    let mut out = Outputs::new(&a.out)?;
    out.write("sweep_raw.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "seed", "method", "metric", "value"]).map_err(csv_err)?;
        for r in &records {
            wtr.write_record([
                fmt_real(r.x),
                r.seed.to_string(),
                r.method.to_owned(),
                r.metric.to_owned(),
                r.value.map(fmt_real).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(Error::from)?;
        Ok(())
    })?;
    out.write("sweep_summary.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "method", "metric", "count", "mean", "sd", "lo", "hi", "median"])
            .map_err(csv_err)?;
        for s in &summary {
            wtr.write_record([
                fmt_real(s.x),
                s.method.to_owned(),
                s.metric.to_owned(),
                s.count.to_string(),
                fmt_real(s.mean),
                fmt_real(s.sd),
                fmt_real(s.lo()),
                fmt_real(s.hi()),
                fmt_real(s.median),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(Error::from)?;
        Ok(())
    })?;
    out.write_json("sweep.json", &meta)?;
    out.commit()
}
