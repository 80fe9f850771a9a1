//! Exact simulation and inference for the unit-diffusion (Lamperti) process
//! `dY = α(Y)dt + dW`, `α = ∇H`.
//!
//! Bridge skeletons are drawn by retrospective rejection: a Poisson process
//! of rate `r` marks the bridge, and the proposal survives when every mark
//! lies above the graph of `φ`. The same machinery drives exact forward
//! simulation, the Monte Carlo EM estimator and an unbiased estimate of the
//! transition density.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{self, cmaes, EstimateError, FitResult, Method, OptimizerConfig, ParamVector};
use crate::linalg::Vec2;
use crate::potential::{EaBounds, ModelParams};
use crate::rng::{substream, tag, StreamRng};
use crate::trajectory::{Track, TrajectorySet};

/// Segments with `rate·dt` above this are split at a midpoint in
/// [`loglik_estimate`].
pub const SUBDIVIDE_RATE_DT: f64 = 50.0;

const GAUSS_HERMITE_POINTS: usize = 32;
const RETRY_DOUBLINGS: u32 = 4;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("times must be strictly increasing and inside (0, dt)")]
    UnsortedTimes,
    #[error("interpolation time {time} coincides with a skeleton time")]
    TimeCollision { time: f64 },
    #[error("no acceptance after {proposals} proposals")]
    ProposalBudgetExceeded { proposals: u64 },
    #[error("transition density estimate is not positive for segment {segment}")]
    NonPositiveEstimate { segment: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Estimate(Box<EstimateError>),
}

impl From<EstimateError> for ExactError {
    fn from(e: EstimateError) -> Self {
        ExactError::Estimate(Box::new(e))
    }
}

/// What the rejection sampler needs to know about the target diffusion.
pub trait ExactTarget: Sync {
    /// Upper bound of `φ`.
    fn rate(&self) -> f64;
    /// Lower bound `m` of `‖α‖² + ΔH`.
    fn m_lower(&self) -> f64;
    /// `‖α(y)‖² + ΔH(y)`.
    fn integrand(&self, y: Vec2<f64>) -> f64;
    fn h(&self, y: Vec2<f64>) -> f64;
    fn h_upper(&self) -> f64;

    /// `(‖α‖² + ΔH - m)/2`, clamped to `[0, rate]`.
    fn phi(&self, y: Vec2<f64>) -> f64 {
        (0.5 * (self.integrand(y) - self.m_lower())).clamp(0.0, self.rate())
    }
}

/// The Lamperti-transformed model.
#[derive(Debug, Clone)]
pub struct LampertiTarget<'a> {
    theta: &'a ModelParams<f64>,
    bounds: EaBounds<f64>,
}

impl<'a> LampertiTarget<'a> {
    pub fn new(theta: &'a ModelParams<f64>) -> Self {
        Self {
            theta,
            bounds: theta.ea_bounds(),
        }
    }

    pub fn bounds(&self) -> &EaBounds<f64> {
        &self.bounds
    }
}

impl ExactTarget for LampertiTarget<'_> {
    fn rate(&self) -> f64 {
        self.bounds.rate
    }

    fn m_lower(&self) -> f64 {
        self.bounds.m_lower
    }

    fn integrand(&self, y: Vec2<f64>) -> f64 {
        self.theta.girsanov_integrand(y)
    }

    fn h(&self, y: Vec2<f64>) -> f64 {
        self.theta.h_value(y)
    }

    fn h_upper(&self) -> f64 {
        self.theta.h_upper()
    }

    fn phi(&self, y: Vec2<f64>) -> f64 {
        self.theta.phi(&self.bounds, y)
    }
}

/// Target with `H ≡ 0`, `m = 0` and `φ ≡ phi` everywhere, bounded by `rate`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPhi {
    pub phi: f64,
    pub rate: f64,
}

impl ExactTarget for ConstantPhi {
    fn rate(&self) -> f64 {
        self.rate
    }

    fn m_lower(&self) -> f64 {
        0.0
    }

    fn integrand(&self, _y: Vec2<f64>) -> f64 {
        2.0 * self.phi
    }

    fn h(&self, _y: Vec2<f64>) -> f64 {
        0.0
    }

    fn h_upper(&self) -> f64 {
        0.0
    }
}

/// Sampler limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EaConfig {
    /// Cap on proposals per accepted draw.
    pub max_proposals: u64,
    /// Longest interval simulated in one exact step; longer ones are chained.
    pub max_substep: f64,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            max_proposals: 1_000_000,
            max_substep: 1.0,
        }
    }
}

/// An accepted bridge skeleton in Lamperti coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub times: Vec<f64>,
    pub points: Vec<Vec2<f64>>,
    pub y0: Vec2<f64>,
    pub y1: Vec2<f64>,
    pub dt: f64,
    pub bound_rate: f64,
}

fn standard_normal2<R: Rng + ?Sized>(rng: &mut R) -> Vec2<f64> {
    Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as usize
}

fn check_times(times: &[f64], dt: f64) -> Result<(), ExactError> {
    let inside = times.iter().all(|&t| t > 0.0 && t < dt);
    let sorted = times.windows(2).all(|w| w[1] > w[0]);
    if inside && sorted {
        Ok(())
    } else {
        Err(ExactError::UnsortedTimes)
    }
}

/// One step of the sequential bridge: the point at `t` given the bridge
/// passes through `(s, ys)` and ends at `(dt, y1)`.
fn bridge_step<R: Rng + ?Sized>(s: f64, ys: Vec2<f64>, t: f64, dt: f64, y1: Vec2<f64>, rng: &mut R) -> Vec2<f64> {
    let w = (t - s) / (dt - s);
    let mean = ys + (y1 - ys).scale(w);
    let sd = ((t - s) * (dt - t) / (dt - s)).max(0.0).sqrt();
    mean + standard_normal2(rng).scale(sd)
}

/// Standard 2-D Brownian bridge from `(0, y0)` to `(dt, y1)` at `times`.
pub fn brownian_bridge_sample<R: Rng + ?Sized>(
    y0: Vec2<f64>,
    y1: Vec2<f64>,
    dt: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<Vec2<f64>>, ExactError> {
    check_times(times, dt)?;
    let mut out = Vec::with_capacity(times.len());
    let (mut s, mut ys) = (0.0, y0);
    for &t in times {
        ys = bridge_step(s, ys, t, dt, y1, rng);
        s = t;
        out.push(ys);
    }
    Ok(out)
}

/// A single thinning proposal; `Some` when accepted.
pub fn ea1_bridge_attempt<G: ExactTarget + ?Sized, R: Rng + ?Sized>(
    target: &G,
    y0: Vec2<f64>,
    y1: Vec2<f64>,
    dt: f64,
    rng: &mut R,
) -> Option<Skeleton> {
    let rate = target.rate();
    let kappa = poisson_count(rate * dt, rng);
    let mut marks: Vec<(f64, f64)> = (0..kappa)
        .map(|_| (rng.random::<f64>() * dt, rng.random::<f64>() * rate))
        .collect();
    marks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times = Vec::with_capacity(kappa);
    let mut points = Vec::with_capacity(kappa);
    let (mut s, mut ys) = (0.0, y0);
    for (t, level) in marks {
        if !(t > s) {
            // Zero-probability tie; treat as a rejection to keep times strict.
            return None;
        }
        ys = bridge_step(s, ys, t, dt, y1, rng);
        s = t;
        if target.phi(ys) > level {
            return None;
        }
        times.push(t);
        points.push(ys);
    }
    Some(Skeleton {
        times,
        points,
        y0,
        y1,
        dt,
        bound_rate: rate,
    })
}

/// Exact bridge skeleton from `(0, y0)` to `(dt, y1)`; also returns the
/// number of proposals used.
pub fn ea1_bridge<G: ExactTarget + ?Sized, R: Rng + ?Sized>(
    target: &G,
    y0: Vec2<f64>,
    y1: Vec2<f64>,
    dt: f64,
    max_proposals: u64,
    rng: &mut R,
) -> Result<(Skeleton, u64), ExactError> {
    for used in 1..=max_proposals {
        if let Some(sk) = ea1_bridge_attempt(target, y0, y1, dt, rng) {
            return Ok((sk, used));
        }
    }
    Err(ExactError::ProposalBudgetExceeded {
        proposals: max_proposals,
    })
}

/// Samples the bridge at `extra_times` given the accepted skeleton; each
/// new point depends only on its neighbours to the left and right.
pub fn skeleton_interpolate<R: Rng + ?Sized>(
    skeleton: &Skeleton,
    extra_times: &[f64],
    rng: &mut R,
) -> Result<Vec<Vec2<f64>>, ExactError> {
    check_times(extra_times, skeleton.dt)?;
    let mut out = Vec::with_capacity(extra_times.len());
    let mut next = 0usize;
    let (mut s, mut ys) = (0.0, skeleton.y0);
    for &t in extra_times {
        while next < skeleton.times.len() && skeleton.times[next] < t {
            s = skeleton.times[next];
            ys = skeleton.points[next];
            next += 1;
        }
        let (r, yr) = match skeleton.times.get(next) {
            Some(&tr) if tr == t => return Err(ExactError::TimeCollision { time: t }),
            Some(&tr) => (tr, skeleton.points[next]),
            None => (skeleton.dt, skeleton.y1),
        };
        // Bridge from (s, ys) to (r, yr), shifted to start at 0.
        let y = bridge_step(0.0, ys, t - s, r - s, yr, rng);
        s = t;
        ys = y;
        out.push(y);
    }
    Ok(out)
}

/// One exact transition of length `dt` in Lamperti coordinates.
pub fn exact_step<G: ExactTarget + ?Sized, R: Rng + ?Sized>(
    target: &G,
    y0: Vec2<f64>,
    dt: f64,
    max_proposals: u64,
    rng: &mut R,
) -> Result<Vec2<f64>, ExactError> {
    let sd = dt.sqrt();
    let h_sup = target.h_upper();
    for _ in 0..max_proposals {
        let y1 = y0 + standard_normal2(rng).scale(sd);
        let u: f64 = rng.random();
        if u.ln() > target.h(y1) - h_sup {
            continue;
        }
        if ea1_bridge_attempt(target, y0, y1, dt, rng).is_some() {
            return Ok(y1);
        }
    }
    Err(ExactError::ProposalBudgetExceeded {
        proposals: max_proposals,
    })
}

/// Exact draw of `X_dt` given `X_0 = x0`; intervals longer than
/// `cfg.max_substep` are split into equal exact steps.
pub fn ea1_transition_sample<R: Rng + ?Sized>(
    theta: &ModelParams<f64>,
    x0: Vec2<f64>,
    dt: f64,
    cfg: &EaConfig,
    rng: &mut R,
) -> Result<Vec2<f64>, ExactError> {
    if !(dt > 0.0) || !(cfg.max_substep > 0.0) {
        return Err(ExactError::InvalidConfig(format!("dt {dt}, max_substep {}", cfg.max_substep)));
    }
    let target = LampertiTarget::new(theta);
    let gamma = theta.gamma();
    let steps = (dt / cfg.max_substep).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut y = x0.scale(1.0 / gamma);
    for _ in 0..steps {
        y = exact_step(&target, y, h, cfg.max_proposals, rng)?;
    }
    Ok(y.scale(gamma))
}

// ---------------------------------------------------------------------------
// Monte Carlo EM

/// Whether γ stays fixed during EM or is re-estimated by profile likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    Fixed,
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    /// Bridges per segment.
    pub n_bridges: usize,
    /// Time points per bridge; `None` uses `max(2, ⌈5·dt⌉)` per segment.
    pub n_times: Option<usize>,
    pub max_iters: usize,
    /// Stop when the largest relative change of the packed parameters is
    /// below this.
    pub theta_tol: f64,
    pub seed: u64,
    pub gamma_mode: GammaMode,
    /// γ used in fixed mode; `None` keeps the initial fit's value.
    pub gamma: Option<f64>,
    /// Replicates per segment for likelihood estimates.
    pub n_mc: usize,
    /// Evaluation budget of each M-step; 0 uses the optimizer's `max_evals`.
    pub m_step_evals: usize,
    pub ea: EaConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            n_bridges: 10,
            n_times: None,
            max_iters: 30,
            theta_tol: 1e-3,
            seed: 0,
            gamma_mode: GammaMode::Fixed,
            gamma: None,
            n_mc: 100,
            m_step_evals: 0,
            ea: EaConfig::default(),
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<(), ExactError> {
        if self.n_bridges == 0 || self.n_times == Some(0) || self.n_mc == 0 {
            return Err(ExactError::InvalidConfig(
                "n_bridges, n_times and n_mc must be at least 1".into(),
            ));
        }
        if !(self.theta_tol > 0.0) {
            return Err(ExactError::InvalidConfig("theta_tol must be positive".into()));
        }
        Ok(())
    }

    /// `M_j` for a segment of length `dt`.
    pub fn times_for(&self, dt: f64) -> usize {
        self.n_times.unwrap_or_else(|| ((5.0 * dt).ceil() as usize).max(2))
    }
}

/// Bridge draws frozen for one EM iteration.
#[derive(Debug, Clone)]
pub struct FrozenDraws {
    /// `(Y_0, Y_n)` per track.
    pub boundary: Vec<(Vec2<f64>, Vec2<f64>)>,
    pub points: Vec<Vec2<f64>>,
    /// `dt_j/(M_j N_j)` for each point.
    pub weights: Vec<f64>,
}

/// Draws `N_j` skeletons per segment under `target` and refines each at
/// `M_j` uniform times. `data` is in Lamperti coordinates.
pub fn draw_frozen<G: ExactTarget + ?Sized>(
    target: &G,
    data: &TrajectorySet<f64>,
    cfg: &EmConfig,
    iteration: u64,
) -> Result<FrozenDraws, ExactError> {
    cfg.validate()?;
    let segments: Vec<_> = data.segments().collect();
    let per_segment: Vec<Result<(Vec<Vec2<f64>>, f64), ExactError>> = segments
        .par_iter()
        .enumerate()
        .map(|(j, seg)| {
            let mut rng = substream(cfg.seed, &[tag::EM_SKELETON, iteration, j as u64]);
            let m = cfg.times_for(seg.dt);
            let mut pts = Vec::with_capacity(m * cfg.n_bridges);
            for _ in 0..cfg.n_bridges {
                let (sk, _) = ea1_bridge(target, seg.start, seg.end, seg.dt, cfg.ea.max_proposals, &mut rng)?;
                let times = uniform_times(&sk, m, &mut rng);
                pts.extend(skeleton_interpolate(&sk, &times, &mut rng)?);
            }
            Ok((pts, seg.dt / (m * cfg.n_bridges) as f64))
        })
        .collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for r in per_segment {
        let (pts, w) = r?;
        weights.extend(std::iter::repeat_n(w, pts.len()));
        points.extend(pts);
    }
    let boundary = data
        .tracks()
        .iter()
        .map(|t| (t.positions[0], *t.positions.last().expect("track has points")))
        .collect();
    Ok(FrozenDraws {
        boundary,
        points,
        weights,
    })
}

/// `m` sorted uniform times in `(0, dt)` avoiding the skeleton times.
fn uniform_times<R: Rng + ?Sized>(sk: &Skeleton, m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut t: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * sk.dt).collect();
        t.sort_by(f64::total_cmp);
        let ok = t.iter().all(|&x| x > 0.0 && x < sk.dt)
            && t.windows(2).all(|w| w[1] > w[0])
            && !t.iter().any(|x| sk.times.contains(x));
        if ok {
            return t;
        }
    }
}

/// `Q^N(θ, θ_p)` evaluated on frozen draws.
pub fn q_value<G: ExactTarget + ?Sized>(target: &G, draws: &FrozenDraws) -> f64 {
    let boundary: f64 = draws.boundary.iter().map(|&(a, b)| target.h(b) - target.h(a)).sum();
    let integral: f64 = draws
        .points
        .iter()
        .zip(&draws.weights)
        .map(|(&y, &w)| w * target.integrand(y))
        .sum();
    boundary - 0.5 * integral
}

/// `Q^N(θ, θ_p)` with fresh draws under `theta_p`; `data` in Lamperti
/// coordinates of `theta_p`.
pub fn mcem_q(
    theta: &ModelParams<f64>,
    theta_p: &ModelParams<f64>,
    data: &TrajectorySet<f64>,
    cfg: &EmConfig,
) -> Result<f64, ExactError> {
    let draws = draw_frozen(&LampertiTarget::new(theta_p), data, cfg, 0)?;
    Ok(q_value(&LampertiTarget::new(theta), &draws))
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Monte Carlo EM started from the best Ozaki fit.
pub fn fit_ea_mcem(
    data: &TrajectorySet<f64>,
    k: usize,
    cfg: &EmConfig,
    opt: &OptimizerConfig,
) -> Result<FitResult, ExactError> {
    let init = estimate::fit(Method::Ozaki, data, k, opt)?;
    let mut out = fit_ea_mcem_from(&init.theta_hat, data, cfg, opt)?;
    out.evaluations += init.evaluations;
    out.restarts_used = init.restarts_used;
    Ok(out)
}

/// Monte Carlo EM from a given starting point.
pub fn fit_ea_mcem_from(
    init: &ModelParams<f64>,
    data: &TrajectorySet<f64>,
    cfg: &EmConfig,
    opt: &OptimizerConfig,
) -> Result<FitResult, ExactError> {
    cfg.validate()?;
    let k = init.potential().k();
    let mut theta = match (cfg.gamma_mode, cfg.gamma) {
        (GammaMode::Fixed, Some(g)) => init
            .with_gamma(g)
            .map_err(|e| ExactError::InvalidConfig(e.to_string()))?,
        _ => init.clone(),
    };
    let mut evaluations = 0usize;
    let mut history = Vec::new();
    for iter in 0..cfg.max_iters {
        let gamma = theta.gamma();
        let y_data = data.scaled(1.0 / gamma);
        let draws = draw_frozen(&LampertiTarget::new(&theta), &y_data, cfg, iter as u64)?;

        let start = ParamVector::pack(&theta);
        let log_gamma = gamma.ln();
        let eta0 = &start.as_slice()[..start.len() - 1];
        let objective = |eta: &[f64]| -> f64 {
            let mut v = eta.to_vec();
            v.push(log_gamma);
            match ParamVector::unpack_slice(k, &v) {
                Ok(th) => {
                    let q = q_value(&LampertiTarget::new(&th), &draws);
                    if q.is_finite() {
                        q
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let q_current = objective(eta0);
        let settings = cmaes::Settings {
            sigma0: 0.1,
            max_evals: if cfg.m_step_evals > 0 { cfg.m_step_evals } else { opt.max_evals },
            tolerance: opt.tolerance,
            population: opt.population,
        };
        let mut rng = substream(cfg.seed, &[tag::OPTIMIZE, iter as u64]);
        let run = cmaes::maximize(&objective, eta0, &vec![1.0; eta0.len()], &settings, &mut rng);
        evaluations += run.evaluations + 1;
        let mut next = if run.value > q_current {
            let mut v = run.best.clone();
            v.push(log_gamma);
            ParamVector::unpack_slice(k, &v)?
        } else {
            theta.clone()
        };
        if cfg.gamma_mode == GammaMode::Profile {
            let (g, evals) = profile_gamma(&next, data, cfg)?;
            evaluations += evals;
            next = next
                .with_gamma(g)
                .map_err(|e| ExactError::InvalidConfig(e.to_string()))?;
        }
        history.push(run.value.max(q_current));
        let change = relative_change(ParamVector::pack(&theta).as_slice(), ParamVector::pack(&next).as_slice());
        theta = next;
        if change < cfg.theta_tol {
            break;
        }
    }
    let theta = theta.canonicalized();
    let ll = loglik_estimate(&theta, data, cfg.n_mc, cfg.seed)?;
    Ok(FitResult {
        method: Method::EaMcem,
        theta_hat: theta,
        objective: ll.value,
        restarts_used: 1,
        skipped_fraction: 0.0,
        evaluations,
        seed: cfg.seed,
        history,
    })
}

/// Golden-section search of `loglik_estimate` over `log γ ∈ [log γ₀ ± 1]`
/// with common random numbers.
fn profile_gamma(theta: &ModelParams<f64>, data: &TrajectorySet<f64>, cfg: &EmConfig) -> Result<(f64, usize), ExactError> {
    let f = |lg: f64| -> f64 {
        theta
            .with_gamma(lg.exp())
            .ok()
            .and_then(|th| loglik_estimate(&th, data, cfg.n_mc, cfg.seed).ok())
            .map(|e| e.value)
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let lg0 = theta.gamma().ln();
    let (lg, _, evals) = estimate::golden_section_max(f, lg0 - 1.0, lg0 + 1.0, 1e-4, 40);
    let base = f(lg0);
    let best = if f(lg) >= base { lg } else { lg0 };
    Ok((best.exp(), evals + 2))
}

// ---------------------------------------------------------------------------
// Likelihood estimation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoglikEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
    /// Segments split at a midpoint because `rate·dt` was too large.
    pub subdivided: usize,
}

/// Nodes and weights for `E[f(Z)]`, `Z ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> Vec<(f64, f64)> {
    // Golub-Welsch on the probabilists' Hermite recurrence.
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

/// Poisson-estimator replicates of `E[exp(-∫φ)]` over the bridge
/// `(0, y0) → (dt, y1)`.
pub fn poisson_estimates<G: ExactTarget + ?Sized, R: Rng + ?Sized>(
    target: &G,
    y0: Vec2<f64>,
    y1: Vec2<f64>,
    dt: f64,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    let rate = target.rate();
    (0..n)
        .map(|_| {
            let kappa = poisson_count(rate * dt, rng);
            let mut times: Vec<f64> = (0..kappa).map(|_| rng.random::<f64>() * dt).collect();
            times.sort_by(f64::total_cmp);
            let (mut s, mut ys) = (0.0, y0);
            let mut prod = 1.0;
            for t in times {
                if t > s {
                    ys = bridge_step(s, ys, t, dt, y1, rng);
                    s = t;
                }
                prod *= 1.0 - target.phi(ys) / rate;
            }
            prod
        })
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Estimate of `E[exp(-∫φ)]` and its variance.
fn bridge_expectation<G: ExactTarget + ?Sized, R: Rng + ?Sized>(
    target: &G,
    y0: Vec2<f64>,
    y1: Vec2<f64>,
    dt: f64,
    n: usize,
    nodes: &[(f64, f64)],
    rng: &mut R,
) -> (f64, f64, bool) {
    if target.rate() * dt <= SUBDIVIDE_RATE_DT {
        let reps = poisson_estimates(target, y0, y1, dt, n, rng);
        let (m, v) = mean_var(&reps);
        return (m, v / n as f64, false);
    }
    // Split at the midpoint: the two Brownian factors combine into
    // N(y1; y0, dt) times a N((y0+y1)/2, dt/4) law for the midpoint.
    let half = 0.5 * dt;
    let mid = (y0 + y1).scale(0.5);
    let sd = (0.25 * dt).sqrt();
    let mut mean = 0.0;
    let mut var = 0.0;
    for &(zx, wx) in nodes {
        for &(zy, wy) in nodes {
            let w = wx * wy;
            let z = mid + Vec2::new(zx, zy).scale(sd);
            let a = poisson_estimates(target, y0, z, half, n, rng);
            let b = poisson_estimates(target, z, y1, half, n, rng);
            let prods: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p * q).collect();
            let (m, v) = mean_var(&prods);
            mean += w * m;
            var += w * w * v / n as f64;
        }
    }
    (mean, var, true)
}

/// Unbiased-per-segment Monte Carlo estimate of the exact log-likelihood.
pub fn loglik_estimate(
    theta: &ModelParams<f64>,
    data: &TrajectorySet<f64>,
    n_mc: usize,
    seed: u64,
) -> Result<LoglikEstimate, ExactError> {
    loglik_estimate_with(&LampertiTarget::new(theta), theta.gamma(), data, n_mc, seed)
}

/// [`loglik_estimate`] for any target; `data` in original coordinates.
pub fn loglik_estimate_with<G: ExactTarget + ?Sized>(
    target: &G,
    gamma: f64,
    data: &TrajectorySet<f64>,
    n_mc: usize,
    seed: u64,
) -> Result<LoglikEstimate, ExactError> {
    if n_mc == 0 {
        return Err(ExactError::InvalidConfig("n_mc must be at least 1".into()));
    }
    let nodes = gauss_hermite_normal(GAUSS_HERMITE_POINTS);
    let inv_gamma = 1.0 / gamma;
    let log_jacobian = -2.0 * gamma.ln();
    let segments: Vec<_> = data.segments().collect();
    let terms: Vec<Result<(f64, f64, bool), ExactError>> = segments
        .par_iter()
        .enumerate()
        .map(|(j, seg)| {
            let y0 = seg.start.scale(inv_gamma);
            let y1 = seg.end.scale(inv_gamma);
            let dt = seg.dt;
            let mut n = n_mc;
            for attempt in 0..=RETRY_DOUBLINGS {
                let mut rng: StreamRng = substream(seed, &[tag::LOGLIK, j as u64, attempt as u64]);
                let (p, var, split) = bridge_expectation(target, y0, y1, dt, n, &nodes, &mut rng);
                if p > 0.0 {
                    let gauss = -(2.0 * std::f64::consts::PI * dt).ln() - (y1 - y0).norm_sq() / (2.0 * dt);
                    let value = gauss + target.h(y1) - target.h(y0) - 0.5 * target.m_lower() * dt
                        + p.ln()
                        + log_jacobian;
                    return Ok((value, var / (p * p), split));
                }
                n *= 2;
            }
            Err(ExactError::NonPositiveEstimate { segment: j })
        })
        .collect();
    let mut value = 0.0;
    let mut var = 0.0;
    let mut subdivided = 0;
    for t in terms {
        let (v, s2, split) = t?;
        value += v;
        var += s2;
        subdivided += usize::from(split);
    }
    Ok(LoglikEstimate {
        value,
        std_error: var.sqrt(),
        n_mc,
        subdivided,
    })
}

/// Simulates one track by repeated exact transitions.
pub fn simulate_track<R: Rng + ?Sized>(
    theta: &ModelParams<f64>,
    id: &str,
    x0: Vec2<f64>,
    dt: f64,
    n: usize,
    cfg: &EaConfig,
    rng: &mut R,
) -> Result<Track<f64>, ExactError> {
    let mut positions = Vec::with_capacity(n);
    let mut x = x0;
    positions.push(x);
    for _ in 1..n {
        x = ea1_transition_sample(theta, x, dt, cfg, rng)?;
        positions.push(x);
    }
    let times = (0..n).map(|i| i as f64 * dt).collect();
    Track::new(id, times, positions).map_err(|e| ExactError::InvalidConfig(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat2;
    use crate::potential::MixturePotential;
    use rand::SeedableRng;

    fn standard(gamma: f64) -> ModelParams<f64> {
        let p = MixturePotential::from_parts(&[1.0], &[Vec2::zero()], &[Mat2::identity()]).unwrap();
        ModelParams::new(p, gamma).unwrap()
    }

    #[test]
    fn empty_times_give_empty_bridge() {
        let mut rng = StreamRng::seed_from_u64(1);
        let pts = brownian_bridge_sample(Vec2::zero(), Vec2::new(1.0, 1.0), 1.0, &[], &mut rng).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn bridge_rejects_bad_times() {
        let mut rng = StreamRng::seed_from_u64(1);
        for times in [vec![0.5, 0.2], vec![0.0], vec![1.0], vec![0.3, 0.3]] {
            let r = brownian_bridge_sample(Vec2::zero(), Vec2::zero(), 1.0, &times, &mut rng);
            assert!(matches!(r, Err(ExactError::UnsortedTimes)));
        }
    }

    #[test]
    fn zero_rate_accepts_immediately() {
        let mut rng = StreamRng::seed_from_u64(3);
        let stub = ConstantPhi { phi: 0.0, rate: 0.0 };
        let (sk, used) = ea1_bridge(&stub, Vec2::zero(), Vec2::zero(), 1.0, 10, &mut rng).unwrap();
        assert_eq!(used, 1);
        assert!(sk.times.is_empty());
    }

    #[test]
    fn phi_above_every_mark_exhausts_budget() {
        let mut rng = StreamRng::seed_from_u64(3);
        let stub = ConstantPhi { phi: 5.0, rate: 5.0 };
        let r = ea1_bridge(&stub, Vec2::zero(), Vec2::zero(), 50.0, 20, &mut rng);
        assert!(matches!(r, Err(ExactError::ProposalBudgetExceeded { proposals: 20 })));
    }

    #[test]
    fn interpolation_detects_collisions() {
        let sk = Skeleton {
            times: vec![0.25, 0.5],
            points: vec![Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)],
            y0: Vec2::zero(),
            y1: Vec2::zero(),
            dt: 1.0,
            bound_rate: 1.0,
        };
        let mut rng = StreamRng::seed_from_u64(4);
        let r = skeleton_interpolate(&sk, &[0.5], &mut rng);
        assert!(matches!(r, Err(ExactError::TimeCollision { .. })));
    }

    #[test]
    fn interpolation_is_local() {
        // Between skeleton points at 0.25 and 0.5 the mean must be the chord
        // of those two points, whatever the endpoints are.
        let sk = Skeleton {
            times: vec![0.25, 0.5],
            points: vec![Vec2::new(1.0, -1.0), Vec2::new(3.0, 1.0)],
            y0: Vec2::new(100.0, 100.0),
            y1: Vec2::new(-100.0, 50.0),
            dt: 1.0,
            bound_rate: 1.0,
        };
        let mut rng = StreamRng::seed_from_u64(5);
        let n = 20_000;
        let mut sum = Vec2::zero();
        for _ in 0..n {
            sum += skeleton_interpolate(&sk, &[0.375], &mut rng).unwrap()[0];
        }
        let mean = sum.scale(1.0 / n as f64);
        let se = (0.125f64 * 0.125 / 0.25).sqrt() / (n as f64).sqrt();
        assert!((mean.x - 2.0).abs() < 4.0 * se);
        assert!(mean.y.abs() < 4.0 * se);
    }

    #[test]
    fn gauss_hermite_integrates_moments() {
        let nodes = gauss_hermite_normal(32);
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        let second: f64 = nodes.iter().map(|n| n.1 * n.0 * n.0).sum();
        let fourth: f64 = nodes.iter().map(|n| n.1 * n.0.powi(4)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((second - 1.0).abs() < 1e-11);
        assert!((fourth - 3.0).abs() < 1e-10);
    }

    #[test]
    fn brownian_stub_loglik_is_exact() {
        let track = Track::new(
            "a",
            vec![0.0, 0.5, 2.0],
            vec![Vec2::zero(), Vec2::new(0.3, -0.2), Vec2::new(1.0, 1.0)],
        )
        .unwrap();
        let data = TrajectorySet::new(vec![track]).unwrap();
        let stub = ConstantPhi { phi: 0.0, rate: 0.0 };
        let est = loglik_estimate_with(&stub, 1.0, &data, 7, 1).unwrap();
        let expected: f64 = data
            .segments()
            .map(|s| -(2.0 * std::f64::consts::PI * s.dt).ln() - (s.end - s.start).norm_sq() / (2.0 * s.dt))
            .sum();
        assert_eq!(est.value, expected);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn constant_integrand_reduces_q() {
        let track = Track::new("a", vec![0.0, 1.5], vec![Vec2::zero(), Vec2::new(1.0, 0.0)]).unwrap();
        let data = TrajectorySet::new(vec![track]).unwrap();
        let c = 0.8;
        let stub = ConstantPhi { phi: c / 2.0, rate: 1.0 };
        let cfg = EmConfig {
            n_bridges: 1,
            n_times: Some(1),
            ..EmConfig::default()
        };
        let draws = draw_frozen(&stub, &data, &cfg, 0).unwrap();
        assert!((q_value(&stub, &draws) - (-0.5 * 1.5 * c)).abs() < 1e-14);
        let free = ConstantPhi { phi: 0.0, rate: 0.0 };
        assert_eq!(q_value(&free, &draws), 0.0);
    }

    #[test]
    fn transition_sample_is_reproducible() {
        let th = standard(1.0);
        let cfg = EaConfig::default();
        let a = ea1_transition_sample(&th, Vec2::new(0.5, 0.5), 2.5, &cfg, &mut StreamRng::seed_from_u64(9)).unwrap();
        let b = ea1_transition_sample(&th, Vec2::new(0.5, 0.5), 2.5, &cfg, &mut StreamRng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
