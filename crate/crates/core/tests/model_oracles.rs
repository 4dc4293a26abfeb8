use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsfair_core::data::{LabelVector, WeakLabelMatrix};
use wsfair_core::endmodel::{predict_logreg, train_logreg, Targets};
use wsfair_core::labelmodel::{estimate_accuracies, predict_labels, triplet_from_moments};
use wsfair_core::metrics::fairness_report;
use wsfair_core::sbm::{run_pipeline, PipelineConfig, SbmConfig};
use wsfair_core::synth::gen_fig5_dataset;
use wsfair_core::TrainConfig;

fn conditionally_independent(a: &[f64], n: usize, seed: u64) -> WeakLabelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut votes = Array2::<i8>::zeros((n, a.len()));
    for i in 0..n {
        let y: i8 = if rng.random::<bool>() { 1 } else { -1 };
        for (j, &aj) in a.iter().enumerate() {
            votes[[i, j]] = if rng.random::<f64>() < (1.0 + aj) / 2.0 { y } else { -y };
        }
    }
    WeakLabelMatrix::with_default_names(votes).unwrap()
}

#[test]
fn triplet_recovers_planted_accuracies() {
    let a = [0.8, 0.6, 0.4];
    let est = estimate_accuracies::<f64>(&conditionally_independent(&a, 100_000, 1)).unwrap();
    for (e, t) in est.per_lf.iter().zip(a) {
        assert!((e - t).abs() <= 0.02, "{e} vs {t}");
    }
}

#[test]
fn triplet_inverts_exact_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let m = rng.random_range(3..8);
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.95)).collect();
        let moments = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 1.0 } else { a[i] * a[j] });
        let est = triplet_from_moments(moments.view()).unwrap();
        for (e, t) in est.per_lf.iter().zip(&a) {
            assert!((e - t).abs() < 1e-12);
        }
    }
}

#[test]
fn more_lfs_sharpen_the_estimate() {
    let a = [0.7, 0.5, 0.3, 0.6, 0.4];
    let est = estimate_accuracies::<f64>(&conditionally_independent(&a, 50_000, 8)).unwrap();
    let worst = est
        .per_lf
        .iter()
        .zip(a)
        .map(|(e, t)| (e - t).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.03, "{worst}");
}

#[test]
fn end_model_on_sbm_pseudolabels_is_fairer() {
    let mut base_dp = Vec::new();
    let mut sbm_dp = Vec::new();
    for seed in 0..10 {
        let train = gen_fig5_dataset::<f64>(10_000, seed).unwrap();
        let test = gen_fig5_dataset::<f64>(10_000, seed + 1000).unwrap();
        for (sbm, sink) in [(None, &mut base_dp), (Some(SbmConfig::default()), &mut sbm_dp)] {
            let cfg = PipelineConfig {
                sbm,
                ..PipelineConfig::default()
            };
            let out = run_pipeline(&train.dataset, &cfg).unwrap();
            let model = train_logreg(train.dataset.features(), Targets::Soft(&out.scores), &TrainConfig::default()).unwrap();
            let pred: LabelVector = predict_labels(&predict_logreg(&model, test.dataset.features()).unwrap());
            let report = fairness_report::<f64>(&pred, &test.truth, test.dataset.groups()).unwrap();
            sink.push(report.dp_gap);
        }
    }
    let med = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    let (b, s) = (med(base_dp), med(sbm_dp));
    assert!(s < b, "sbm {s} vs baseline {b}");
}
