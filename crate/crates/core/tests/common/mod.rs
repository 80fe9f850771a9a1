//! Oracles shared by the integration tests.

#![allow(dead_code)]

use driftscape::linalg::{Mat2, Vec2};
use driftscape::potential::{GaussianComponent, MixturePotential, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Mat2<f64> {
    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (s, c) = angle.sin_cos();
    let l1: f64 = rng.random_range(lo..hi);
    let l2: f64 = rng.random_range(lo..hi);
    Mat2::symmetric(
        l1 * c * c + l2 * s * s,
        (l1 - l2) * s * c,
        l1 * s * s + l2 * c * c,
    )
}

/// Random mixture with 1 to 3 components and `γ` in `[0.3, 2]`.
pub fn random_theta<R: Rng>(rng: &mut R) -> ModelParams<f64> {
    let k = rng.random_range(1..=3usize);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let comps: Vec<GaussianComponent<f64>> = raw
        .iter()
        .map(|w| {
            let center = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            GaussianComponent::new(w / total, center, random_spd(rng, 0.2, 3.0)).unwrap()
        })
        .collect();
    let gamma = rng.random_range(0.3..2.0);
    ModelParams::new(MixturePotential::new(comps).unwrap(), gamma).unwrap()
}

/// Euler–Maruyama endpoint of `dX = ∇P dX + γ dW` after `dt`, `step` at a time.
pub fn fine_euler_endpoint<R: Rng>(theta: &ModelParams<f64>, x0: Vec2<f64>, dt: f64, step: f64, rng: &mut R) -> Vec2<f64> {
    let steps = (dt / step).round() as usize;
    let h = dt / steps as f64;
    let sd = theta.gamma() * h.sqrt();
    let p = theta.potential();
    let mut x = x0;
    for _ in 0..steps {
        let b = p.drift(x);
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        x = Vec2::new(x.x + h * b.x + sd * zx, x.y + h * b.y + sd * zy);
    }
    x
}

/// Result of a two-sample energy-distance permutation test.
#[derive(Debug, Clone, Copy)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample energy-distance test for planar samples.
///
/// The planar energy distance is `π/2` times the average over directions of
/// the 1-D energy distance of the projections, and each 1-D distance is
/// `2∫(F - G)²`, exact from the sorted pooled sample. The average is taken
/// over `directions` equally spaced angles. Sorting is done once per
/// direction, so each permutation only relabels the pooled points.
pub fn energy_test(a: &[Vec2<f64>], b: &[Vec2<f64>], directions: usize, permutations: usize, seed: u64) -> EnergyTest {
    let n = a.len();
    let pooled: Vec<Vec2<f64>> = a.iter().chain(b).copied().collect();
    let total = pooled.len();
    // For each direction: pooled indices in sorted order and gaps between
    // consecutive sorted projections.
    let sorted: Vec<(Vec<usize>, Vec<f64>)> = (0..directions)
        .map(|d| {
            let angle = std::f64::consts::PI * d as f64 / directions as f64;
            let (s, c) = angle.sin_cos();
            let proj: Vec<f64> = pooled.iter().map(|p| c * p.x + s * p.y).collect();
            let mut idx: Vec<usize> = (0..total).collect();
            idx.sort_by(|&i, &j| proj[i].total_cmp(&proj[j]));
            let gaps = idx.windows(2).map(|w| proj[w[1]] - proj[w[0]]).collect();
            (idx, gaps)
        })
        .collect();
    let statistic_for = |in_a: &[bool]| -> f64 {
        let na = n as f64;
        let nb = (total - n) as f64;
        let mut acc = 0.0;
        for (idx, gaps) in &sorted {
            let (mut ca, mut cb) = (0usize, 0usize);
            let mut integral = 0.0;
            for (k, &i) in idx[..total - 1].iter().enumerate() {
                if in_a[i] {
                    ca += 1;
                } else {
                    cb += 1;
                }
                let diff = ca as f64 / na - cb as f64 / nb;
                integral += diff * diff * gaps[k];
            }
            acc += 2.0 * integral;
        }
        std::f64::consts::FRAC_PI_2 * acc / directions as f64
    };
    let mut labels: Vec<bool> = (0..total).map(|i| i < n).collect();
    let observed = statistic_for(&labels);
    let mut r = rng(seed);
    let mut at_least = 0usize;
    for _ in 0..permutations {
        for i in (1..total).rev() {
            let j = r.random_range(0..=i);
            labels.swap(i, j);
        }
        if statistic_for(&labels) >= observed {
            at_least += 1;
        }
    }
    EnergyTest {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
    }
}

/// `exp(A t)` for a 2×2 matrix by Cayley–Hamilton:
/// `e^{st}[c(t) I + s(t) (A - sI)]` with `s = tr A / 2`.
pub fn expm2(a: &Mat2<f64>, t: f64) -> Mat2<f64> {
    let s = 0.5 * a.trace();
    let q2 = s * s - a.det();
    let (c, sh) = if q2 > 1e-14 {
        let q = q2.sqrt();
        ((q * t).cosh(), (q * t).sinh() / q)
    } else if q2 < -1e-14 {
        let q = (-q2).sqrt();
        ((q * t).cos(), (q * t).sin() / q)
    } else {
        (1.0 + 0.5 * q2 * t * t, t * (1.0 + q2 * t * t / 6.0))
    };
    let shifted = Mat2::new(a.m[0][0] - s, a.m[0][1], a.m[1][0], a.m[1][1] - s);
    let e = (s * t).exp();
    Mat2::new(
        e * (c + sh * shifted.m[0][0]),
        e * sh * shifted.m[0][1],
        e * sh * shifted.m[1][0],
        e * (c + sh * shifted.m[1][1]),
    )
}

/// Symmetric `X` with `A X + X Aᵀ = -q I`, from the 3×3 linear system in
/// `(x11, x12, x22)`. `None` when the system is near singular.
pub fn lyapunov(a: &Mat2<f64>, q: f64) -> Option<Mat2<f64>> {
    let (a11, a12, a21, a22) = (a.m[0][0], a.m[0][1], a.m[1][0], a.m[1][1]);
    let m = [
        [2.0 * a11, 2.0 * a12, 0.0],
        [a21, a11 + a22, a12],
        [0.0, 2.0 * a21, 2.0 * a22],
    ];
    let rhs = [-q, 0.0, -q];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    if d.abs() < 1e-3 {
        return None;
    }
    let solve = |col: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][col] = rhs[r];
        }
        det3(&mm) / d
    };
    Some(Mat2::symmetric(solve(0), solve(1), solve(2)))
}

/// Exact moments of `dX = A(X - c) dt + γ dW` after `dt` from `x`.
pub fn ou_moments(a: &Mat2<f64>, c: Vec2<f64>, x: Vec2<f64>, dt: f64, gamma: f64) -> Option<(Vec2<f64>, Mat2<f64>)> {
    let e = expm2(a, dt);
    let mean = c + e.mul_vec(x - c);
    let inf = lyapunov(a, gamma * gamma)?;
    let cov = inf - e * inf * e.transpose();
    Some((mean, cov))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
