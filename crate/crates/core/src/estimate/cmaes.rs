//! Covariance-matrix-adaptation evolution strategy, (μ/μ_w, λ) variant with
//! rank-one and rank-μ updates and cumulative step-size control. Maximizes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Initial step size in scaled coordinates.
    pub sigma0: f64,
    /// Evaluation budget, including the evaluation of the start point.
    pub max_evals: usize,
    /// Stop once the best values of recent generations agree to within
    /// `tolerance · max(1, |best|)`.
    pub tolerance: f64,
    /// Offspring per generation; 0 picks `4 + ⌊3 ln n⌋`.
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Best-so-far value after the start point and after each generation.
    pub trace: Vec<f64>,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `f` starting from `x0`. Coordinates are searched in units of
/// `scales`, so `sigma0` applies uniformly across them.
pub fn maximize<F, R>(f: &F, x0: &[f64], scales: &[f64], settings: &Settings, rng: &mut R) -> Run
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let n = x0.len();
    assert_eq!(scales.len(), n, "one scale per coordinate");
    let scale = DVector::from_iterator(n, scales.iter().map(|&s| if s > 0.0 && s.is_finite() { s } else { 1.0 }));
    let to_x = |u: &DVector<f64>| -> Vec<f64> { u.component_mul(&scale).iter().copied().collect() };

    let mut best = x0.to_vec();
    let mut best_value = sanitize(f(x0));
    let mut evaluations = 1usize;
    let mut trace = vec![best_value];
    if n == 0 {
        return Run {
            best,
            value: best_value,
            evaluations,
            budget_exhausted: false,
            trace,
        };
    }

    let nf = n as f64;
    let lambda = if settings.population > 0 {
        settings.population.max(2)
    } else {
        4 + (3.0 * nf.ln()).floor() as usize
    };
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = DVector::from_iterator(n, x0.iter().zip(scale.iter()).map(|(x, s)| x / s));
    let mut sigma = settings.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut diag = DVector::<f64>::from_element(n, 1.0);
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);

    let history_len = 10 + (30.0 * nf / lambda as f64).ceil() as usize;
    let mut gen_best: Vec<f64> = Vec::new();
    let mut infeasible_streak = 0usize;
    let mut budget_exhausted = false;

    loop {
        if evaluations + lambda > settings.max_evals {
            budget_exhausted = true;
            break;
        }
        let mut ys = Vec::with_capacity(lambda);
        let mut us = Vec::with_capacity(lambda);
        let mut values = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = &basis * z.component_mul(&diag);
            let u = &mean + &y * sigma;
            let x = to_x(&u);
            values.push(sanitize(f(&x)));
            ys.push(y);
            us.push(u);
        }
        evaluations += lambda;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let top = values[order[0]];
        if top > best_value {
            best_value = top;
            best = to_x(&us[order[0]]);
        }
        trace.push(best_value);

        if top == f64::NEG_INFINITY {
            infeasible_streak += 1;
            if infeasible_streak >= 50 {
                break;
            }
            sigma *= 0.7;
            continue;
        }
        infeasible_streak = 0;

        let old_mean = mean.clone();
        let mut step = DVector::<f64>::zeros(n);
        for (w, &i) in weights.iter().zip(&order) {
            step += &ys[i] * *w;
        }
        mean = &old_mean + &step * sigma;

        // C^{-1/2} step = B D^{-1} Bᵀ step
        let inv_sqrt_step = &basis * (basis.transpose() * &step).component_div(&diag);
        ps = &ps * (1.0 - cs) + inv_sqrt_step * (cs * (2.0 - cs) * mueff).sqrt();
        let gen = trace.len() as f64;
        let hsig_lhs = ps.norm() / (1.0 - (1.0 - cs).powf(2.0 * gen)).sqrt() / chi_n;
        let hsig = if hsig_lhs < 1.4 + 2.0 / (nf + 1.0) { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &step * (hsig * (cc * (2.0 - cc) * mueff).sqrt());

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &i) in weights.iter().zip(&order) {
            rank_mu += &ys[i] * ys[i].transpose() * *w;
        }
        cov = &cov * (1.0 - c1 - cmu)
            + (&pc * pc.transpose() + &cov * ((1.0 - hsig) * cc * (2.0 - cc))) * c1
            + rank_mu * cmu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((cs / damps) * (ps.norm() / chi_n - 1.0)).exp();

        let eig = SymmetricEigen::new(cov.clone());
        let min_ev = eig.eigenvalues.min();
        let max_ev = eig.eigenvalues.max();
        if !(min_ev > 0.0) || !max_ev.is_finite() || max_ev / min_ev > 1e14 {
            break;
        }
        basis = eig.eigenvectors;
        diag = eig.eigenvalues.map(f64::sqrt);

        gen_best.push(top);
        if gen_best.len() > history_len {
            gen_best.remove(0);
        }
        let tol = settings.tolerance * best_value.abs().max(1.0);
        if gen_best.len() == history_len {
            let hi = gen_best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = gen_best.iter().copied().fold(f64::INFINITY, f64::min);
            if hi - lo <= tol {
                break;
            }
        }
        let worst = values[order[lambda - 1]];
        if worst.is_finite() && top - worst <= tol && gen_best.len() > 1 {
            let prev = gen_best[gen_best.len() - 2];
            if (top - prev).abs() <= tol {
                break;
            }
        }
        if sigma * max_ev.sqrt() < 1e-13 || !sigma.is_finite() {
            break;
        }
    }

    Run {
        best,
        value: best_value,
        evaluations,
        budget_exhausted,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings(max_evals: usize) -> Settings {
        Settings {
            sigma0: 0.5,
            max_evals,
            tolerance: 1e-14,
            population: 0,
        }
    }

    #[test]
    fn quadratic_bowl() {
        let target = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0, 2.5];
        let f = |v: &[f64]| -v.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let run = maximize(&f, &[0.0; 7], &[1.0; 7], &settings(20_000), &mut rng);
        for (a, b) in run.best.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        assert!(run.evaluations <= 20_000);
    }

    #[test]
    fn trace_is_monotone_and_reproducible() {
        let f = |v: &[f64]| -(v[0] - 1.0).powi(2) - 10.0 * (v[1] + v[0]).powi(2);
        let a = maximize(&f, &[3.0, 3.0], &[1.0, 1.0], &settings(2_000), &mut ChaCha8Rng::seed_from_u64(5));
        let b = maximize(&f, &[3.0, 3.0], &[1.0, 1.0], &settings(2_000), &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn infeasible_points_rank_last() {
        let f = |v: &[f64]| if v[0] < 0.0 { f64::NEG_INFINITY } else { -(v[0] - 0.5).powi(2) - v[1].powi(2) };
        let run = maximize(&f, &[1.0, 1.0], &[1.0, 1.0], &settings(5_000), &mut ChaCha8Rng::seed_from_u64(2));
        assert!((run.best[0] - 0.5).abs() < 1e-4);
    }
}
