use honest_frd::bandwidth::optimize_bandwidth;
use honest_frd::data::{AnalysisConfig, FitSpec, Kernel, Sample, SmoothnessBounds};
use honest_frd::local_poly::weights;
use honest_frd::moments::{nn_local_average, nn_variance_dep, nn_variances};
use honest_frd::simulate::{draw_dgp, DgpSpec, RunVar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn fixed_x(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect()
}

#[test]
fn nn_variance_is_unbiased_for_piecewise_linear_means() {
    let x = fixed_x(400);
    let s = Sample::sharp(x.clone(), vec![0.0; x.len()]).unwrap();
    let w = weights(&s, &FitSpec::local_linear(Kernel::Triangular, 0.5)).unwrap().w;
    let tot: f64 = w.iter().map(|v| v * v).sum();
    let q: Vec<f64> = w.iter().map(|v| v * v / tot).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma2: f64 = 0.25;
    let reps = 2000;
    let mut mean = 0.0;
    for _ in 0..reps {
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                let m = if v >= 0.0 { 1.0 + 3.0 * v } else { -2.0 * v };
                m + sigma2.sqrt() * e
            })
            .collect();
        let s2 = nn_variance_dep(&x, &y, 3).unwrap();
        mean += q.iter().zip(&s2).map(|(a, b)| a * b).sum::<f64>() / reps as f64;
    }
    assert!((mean / sigma2 - 1.0).abs() < 0.05, "mean {mean}");
}

#[test]
fn slope_does_not_bias_regression_residuals() {
    // Steep slope on a coarse grid: the local average picks up the trend,
    // the projection residual does not.
    let x = fixed_x(40);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let reps = 400;
    let (mut reg, mut avg) = (0.0, 0.0);
    for _ in 0..reps {
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                40.0 * v + 0.5 * v * v + e
            })
            .collect();
        let a = nn_variance_dep(&x, &y, 3).unwrap();
        let b = nn_local_average(&x, &y, 3).unwrap();
        reg += a.iter().sum::<f64>() / (x.len() * reps) as f64;
        avg += b.iter().sum::<f64>() / (x.len() * reps) as f64;
    }
    assert!((reg - 1.0).abs() < 0.05, "projection {reg}");
    assert!(avg > 1.5, "local average {avg}");
}

#[test]
fn bandwidth_objective_is_stable() {
    let s = draw_dgp(&DgpSpec::standard(RunVar::ContinuousUniform, 0.5, 1.0, 0.2), 8);
    let nv = nn_variances(&s, 5).unwrap();
    let cfg = AnalysisConfig::new(SmoothnessBounds::new(1.0, 0.2));
    let base = optimize_bandwidth(&s, &nv, &cfg, 2.0).unwrap();
    assert!(base.objective.is_finite() && base.objective > 0.0);

    let mut fixed = cfg.clone();
    fixed.fixed_bandwidth = Some(base.h_used);
    let again = optimize_bandwidth(&s, &nv, &fixed, 2.0).unwrap();
    assert!((again.objective - base.objective).abs() < 1e-10 * base.objective);

    let mut coarse = cfg.clone();
    coarse.max_candidates = 200;
    let c = optimize_bandwidth(&s, &nv, &coarse, 2.0).unwrap();
    assert!(
        (c.objective / base.objective - 1.0).abs() < 1e-3,
        "{} vs {}",
        c.objective,
        base.objective
    );

    let mut last: Option<f64> = None;
    for k in 0..=80 {
        let cval = -2.0 + 0.1 * k as f64;
        let h = optimize_bandwidth(&s, &nv, &cfg, cval).unwrap().h_used;
        assert!(h > 0.0 && h <= 2.0);
        if let Some(prev) = last {
            assert!((h - prev).abs() < 0.15, "jump {prev} -> {h} at c = {cval}");
        }
        last = Some(h);
    }
}
