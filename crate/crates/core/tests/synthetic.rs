use ndarray::{array, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use wsfair_core::synth::{
    gen_fig5_dataset, gen_lfcount_dataset, lf_accuracy_at, theorem1_sweep, LabelingFunctionSpec,
};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn group_accuracy(votes: &[i8], truth: &[i8], groups: &[u8], g: u8) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for i in 0..votes.len() {
        if groups[i] == g {
            n += 1;
            hit += usize::from(votes[i] == truth[i]);
        }
    }
    hit as f64 / n as f64
}

fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

#[test]
fn fig5_group0_lf_accuracy_matches_gaussian_cdf() {
    let n = 10_000;
    let s = gen_fig5_dataset::<f64>(n, 0).unwrap();
    let phi = Normal::new(0.0, 1.0).unwrap();
    let expected = 1.0 - (phi.cdf(0.5) - phi.cdf(0.0));
    assert!((expected - 0.8085).abs() < 1e-4);
    let votes = s.dataset.weak().column(0).to_vec();
    let acc0 = group_accuracy(&votes, s.truth.as_slice(), s.dataset.groups().as_slice(), 0);
    let se = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!((acc0 - expected).abs() < 4.0 * se, "{acc0} vs {expected}");
    let acc1 = group_accuracy(&votes, s.truth.as_slice(), s.dataset.groups().as_slice(), 1);
    assert!(acc0 - acc1 > 0.05, "group 1 accuracy {acc1} too close to group 0 {acc0}");
}

#[test]
fn fig5_group1_mean_near_mu() {
    let n = 10_000;
    let s = gen_fig5_dataset::<f64>(n, 3).unwrap();
    let x = s.dataset.features();
    let rows = s.dataset.groups().rows_of(1);
    let mean = rows.iter().fold(Array1::<f64>::zeros(2), |acc, &i| acc + x.row(i)) / n as f64;
    // Each coordinate of X1 has variance 5 (covariance Sigma^2).
    let band = 3.0 * (5.0 / n as f64).sqrt();
    assert!((mean[0] + 4.0).abs() < band && (mean[1] - 5.0).abs() < band, "{mean}");
}

#[test]
fn lfcount_group_means() {
    let n = 10_000;
    let s = gen_lfcount_dataset::<f64>(n, 3, 4).unwrap();
    let b = &s.transforms[1].b;
    let x = s.dataset.features();
    for g in 0..2u8 {
        let rows = s.dataset.groups().rows_of(g);
        let mean = rows.iter().fold(Array1::<f64>::zeros(2), |acc, &i| acc + x.row(i)) / rows.len() as f64;
        let target = if g == 0 { Array1::zeros(2) } else { b.clone() };
        let band = 4.0 / (rows.len() as f64).sqrt();
        assert!((&mean - &target).iter().all(|d| d.abs() < band), "group {g}: {mean} vs {target}");
    }
}

#[test]
fn lfcount_translation_only_hurts() {
    let m = 4;
    let mut gaps: Vec<Vec<f64>> = vec![Vec::new(); m];
    for seed in 0..10 {
        let s = gen_lfcount_dataset::<f64>(10_000, m, seed).unwrap();
        let g = s.dataset.groups().as_slice();
        for (j, gap) in gaps.iter_mut().enumerate() {
            let v = s.dataset.weak().column(j).to_vec();
            let a0 = group_accuracy(&v, s.truth.as_slice(), g, 0);
            let a1 = group_accuracy(&v, s.truth.as_slice(), g, 1);
            gap.push(a1 - a0);
        }
    }
    for (j, g) in gaps.into_iter().enumerate() {
        let med = median(g);
        assert!(med <= 0.02, "lf {j}: median group-1 minus group-0 accuracy {med}");
    }
}

#[test]
fn theorem1_unshifted_matches_monte_carlo() {
    let theta = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 1_000_000;
    let mut total = 0.0;
    for _ in 0..draws / 2 {
        let (a, b) = box_muller(&mut rng);
        let (c, d) = box_muller(&mut rng);
        for r in [(a * a + b * b).sqrt(), (c * c + d * d).sqrt()] {
            total += 1.0 / (1.0 + (-2.0 * theta / (1.0 + r)).exp());
        }
    }
    let oracle = total / draws as f64;
    let sweep = theorem1_sweep(theta, &[0.0], 100_000, 5).unwrap();
    let se = (oracle * (1.0 - oracle) / 100_000.0).sqrt();
    assert!((sweep[0].1 - oracle).abs() < 4.0 * se + 1e-3, "{} vs {oracle}", sweep[0].1);
}

#[test]
fn theorem1_far_shift_is_random_guessing() {
    let shifts = [0.0, 10.0, 100.0, 1000.0];
    let runs: Vec<Vec<(f64, f64)>> = (0..10).map(|s| theorem1_sweep(2.0, &shifts, 10_000, s).unwrap()).collect();
    let medians: Vec<f64> = (0..shifts.len())
        .map(|k| median(runs.iter().map(|r| r[k].1).collect()))
        .collect();
    assert!((medians[3] - 0.5).abs() <= 0.02, "{medians:?}");
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn lipschitz_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for theta in [0.5, 1.0, 3.0] {
        let spec = LabelingFunctionSpec::stochastic("t", theta, array![0.3, -1.2]).unwrap();
        for _ in 0..10_000 {
            let x1 = array![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let scale = 10f64.powf(rng.random_range(-6.0..1.0));
            let x2 = &x1 + &array![rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale];
            let lhs = (lf_accuracy_at(&spec, x1.view()) - lf_accuracy_at(&spec, x2.view())).abs();
            let dist = (&x1 - &x2).mapv(|v| v * v).sum().sqrt();
            assert!(lhs <= 4.0 * theta * dist + 1e-15);
        }
    }
}

#[test]
fn accuracy_range_and_shift_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let theta: f64 = rng.random_range(0.01..5.0);
        let c = array![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let x = array![rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
        let v = array![rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
        let p = lf_accuracy_at(&LabelingFunctionSpec::stochastic("a", theta, c.clone()).unwrap(), x.view());
        assert!(p > 0.5 && p <= 1.0);
        let q = lf_accuracy_at(&LabelingFunctionSpec::stochastic("b", theta, &c + &v).unwrap(), (&x + &v).view());
        assert!((p - q).abs() < 1e-12);
    }
}
