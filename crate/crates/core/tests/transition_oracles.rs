mod common;

use common::rng;
use driftscape::linalg::{Mat2, Vec2};
use driftscape::simbench::{default_theta, standard_theta};
use driftscape::trajectory::{Track, TrajectorySet};
use driftscape::transition::{
    euler_transition, gaussian_logpdf, kessler_filled_loglik, kessler_precision_is_pd, kessler_transition,
    pseudo_loglik, GaussianTransition, Scheme,
};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn logpdf_integrates_to_one() {
    let mut r = rng(11);
    for _ in 0..5 {
        let mean = Vec2::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let cov = common::random_spd(&mut r, 0.2, 2.0);
        let t = GaussianTransition { mean, cov, psd: true };
        // Midpoint rule over ±10 standard deviations of the widest axis.
        let half = 10.0 * cov.sym_eigenvalues()[0].sqrt();
        let n = 800;
        let h = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = mean + Vec2::new(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
                total += gaussian_logpdf(&t, y).unwrap().exp();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-4, "{}", total * h * h);
    }
}

#[test]
fn euler_contrast_is_the_sum_of_its_terms() {
    let theta = default_theta();
    let mut r = rng(12);
    let mut times = vec![0.0];
    let mut pos = vec![Vec2::new(3.0, 2.0)];
    for _ in 0..30 {
        times.push(times.last().unwrap() + r.random_range(0.1..2.0));
        pos.push(Vec2::new(r.random_range(-1.0..7.0), r.random_range(-1.0..5.0)));
    }
    let data = TrajectorySet::new(vec![Track::new("a", times.clone(), pos.clone()).unwrap()]).unwrap();
    let mut expected = 0.0;
    for i in 1..times.len() {
        let t = euler_transition(theta.potential(), pos[i - 1], times[i] - times[i - 1], theta.gamma());
        expected += gaussian_logpdf(&t, pos[i]).unwrap();
    }
    let c = pseudo_loglik(Scheme::Euler, &theta, &data).unwrap();
    assert!((c.value - expected).abs() < 1e-9 * expected.abs());
    assert_eq!(c.skipped, 0);
}

#[test]
fn filled_kessler_scores_skipped_segments_by_euler() {
    let theta = standard_theta();
    // At the well centre J = -I: dt = 3 is skipped, dt = 0.5 kept.
    let pos = vec![Vec2::zero(), Vec2::zero(), Vec2::new(0.2, 0.1)];
    let data = TrajectorySet::new(vec![Track::new("a", vec![0.0, 3.0, 3.5], pos.clone()).unwrap()]).unwrap();
    let dropped = pseudo_loglik(Scheme::Kessler, &theta, &data).unwrap();
    let filled = kessler_filled_loglik(&theta, &data).unwrap();
    assert_eq!(dropped.skipped, 1);
    assert_eq!(filled.skipped, 1);
    let euler_first = gaussian_logpdf(&euler_transition(theta.potential(), pos[0], 3.0, 1.0), pos[1]).unwrap();
    assert!((filled.value - dropped.value - euler_first).abs() < 1e-12);
}

#[test]
fn precision_check_catches_convex_regions() {
    // Far from the well the Hessian has a positive eigenvalue.
    let theta = standard_theta();
    let j = theta.potential().drift_jacobian(Vec2::new(2.0, 0.0));
    assert!(j.m[0][0] > 0.0);
    let dt = 2.0 / j.m[0][0];
    assert!(!kessler_precision_is_pd(&j, dt));
    assert!(kessler_precision_is_pd(&j, 0.5 / j.m[0][0]));
    assert!(kessler_precision_is_pd(&Mat2::<f64>::identity().scale(-1.0), 100.0));
}

/// Fine-Euler Monte Carlo covariance of `X_t` for the standard well,
/// recorded at each of `checkpoints`.
fn mc_covariances(x0: Vec2<f64>, checkpoints: &[f64], paths: usize, step: f64) -> Vec<Mat2<f64>> {
    let theta = standard_theta();
    let p = theta.potential();
    let sd = step.sqrt();
    let mut r = rng(13);
    let n_steps: Vec<usize> = checkpoints.iter().map(|t| (t / step).round() as usize).collect();
    let mut sums = vec![(Vec2::zero(), [0.0f64; 3]); checkpoints.len()];
    for _ in 0..paths {
        let mut x = x0;
        let mut k = 0;
        for s in 1..=*n_steps.last().unwrap() {
            let b = p.drift(x);
            let zx: f64 = r.sample(StandardNormal);
            let zy: f64 = r.sample(StandardNormal);
            x = Vec2::new(x.x + step * b.x + sd * zx, x.y + step * b.y + sd * zy);
            if s == n_steps[k] {
                let (m, q) = &mut sums[k];
                *m += x;
                q[0] += x.x * x.x;
                q[1] += x.x * x.y;
                q[2] += x.y * x.y;
                k += 1;
            }
        }
    }
    let n = paths as f64;
    sums.iter()
        .map(|(m, q)| {
            let mean = m.scale(1.0 / n);
            let f = n / (n - 1.0);
            Mat2::symmetric(
                f * (q[0] / n - mean.x * mean.x),
                f * (q[1] / n - mean.x * mean.y),
                f * (q[2] / n - mean.y * mean.y),
            )
        })
        .collect()
}

#[test]
fn kessler_covariance_beats_euler() {
    let theta = standard_theta();
    let x0 = Vec2::new(0.3, -0.2);
    let dts = [0.1, 0.2, 0.4];
    let mc = mc_covariances(x0, &dts, 100_000, 1e-4);
    for (dt, truth) in dts.iter().zip(&mc) {
        let k = kessler_transition(theta.potential(), x0, *dt, 1.0).cov;
        let e = euler_transition(theta.potential(), x0, *dt, 1.0).cov;
        let ek = (k - *truth).frobenius_sq().sqrt();
        let ee = (e - *truth).frobenius_sq().sqrt();
        assert!(ek < ee, "dt {dt}: kessler {ek:.2e} euler {ee:.2e}");
    }
}
