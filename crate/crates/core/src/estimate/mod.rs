//! Maximum pseudo-likelihood fitting.
//!
//! Parameters are optimized in an unconstrained packing: `K-1` softmax
//! logits (last logit pinned to 0), the `K` centers, a log-Cholesky triple
//! per information matrix and `log γ`, `6K` numbers in total.

pub mod cmaes;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{self, EmConfig, ExactError};
use crate::linalg::{Mat2, Vec2};
use crate::potential::{GaussianComponent, MixturePotential, ModelParams, PotentialError};
use crate::rng::{substream, tag, StreamRng};
use crate::trajectory::TrajectorySet;
use crate::transition::{kessler_filled_loglik, pseudo_loglik, Scheme};

const LOGIT_CLAMP: f64 = 300.0;
const LOG_DIAG_CLAMP: f64 = 20.0;
const OFF_DIAG_CLAMP: f64 = 1e6;
const LOG_GAMMA_CLAMP: f64 = 50.0;
const ADAPTIVE_MAX_ROUNDS: usize = 20;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("expected a parameter vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no segments to fit")]
    EmptyData,
    #[error("every restart ended with a non-finite objective")]
    AllRestartsFailed,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Exact(Box<ExactError>),
}

impl From<ExactError> for EstimateError {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::Estimate(inner) => *inner,
            other => EstimateError::Exact(Box::new(other)),
        }
    }
}

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Euler,
    Ozaki,
    Kessler,
    AdaptiveKessler,
    EaMcem,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Euler,
        Method::Ozaki,
        Method::Kessler,
        Method::AdaptiveKessler,
        Method::EaMcem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Ozaki => "ozaki",
            Method::Kessler => "kessler",
            Method::AdaptiveKessler => "adaptive-kessler",
            Method::EaMcem => "ea-mcem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn scheme(self) -> Option<Scheme> {
        match self {
            Method::Euler => Some(Scheme::Euler),
            Method::Ozaki => Some(Scheme::Ozaki),
            Method::Kessler | Method::AdaptiveKessler => Some(Scheme::Kessler),
            Method::EaMcem => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Unconstrained packing of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    k: usize,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn len_for(k: usize) -> usize {
        6 * k
    }

    pub fn from_vec(k: usize, values: Vec<f64>) -> Result<Self, EstimateError> {
        let expected = Self::len_for(k);
        if values.len() != expected || k == 0 {
            return Err(EstimateError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { k, values })
    }

    pub fn pack(theta: &ModelParams<f64>) -> Self {
        let comps = theta.potential().components();
        let k = comps.len();
        let mut v = Vec::with_capacity(Self::len_for(k));
        let last = comps[k - 1].weight().ln();
        v.extend(comps[..k - 1].iter().map(|c| c.weight().ln() - last));
        for c in comps {
            v.push(c.center().x);
            v.push(c.center().y);
        }
        for c in comps {
            let m = c.information();
            let l11 = m.m[0][0].sqrt();
            let l21 = m.m[1][0] / l11;
            let l22 = (m.m[1][1] - l21 * l21).sqrt();
            v.extend([l11.ln(), l21, l22.ln()]);
        }
        v.push(theta.gamma().ln());
        Self { k, values: v }
    }

    pub fn unpack(&self) -> ModelParams<f64> {
        unpack_values(self.k, &self.values)
    }

    /// Unpacks a raw slice after checking its length.
    pub fn unpack_slice(k: usize, values: &[f64]) -> Result<ModelParams<f64>, EstimateError> {
        let expected = Self::len_for(k);
        if values.len() != expected || k == 0 {
            return Err(EstimateError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(unpack_values(k, values))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

pub fn pack(theta: &ModelParams<f64>) -> ParamVector {
    ParamVector::pack(theta)
}

pub fn unpack(v: &ParamVector) -> ModelParams<f64> {
    v.unpack()
}

fn finite_or(x: f64, fallback: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        fallback
    }
}

/// Information matrix from a log-Cholesky triple, nudged towards the
/// identity direction if rounding left it numerically singular.
fn information_from(a: f64, b: f64, c: f64) -> Mat2<f64> {
    let l11 = a.clamp(-LOG_DIAG_CLAMP, LOG_DIAG_CLAMP).exp();
    let l21 = b.clamp(-OFF_DIAG_CLAMP, OFF_DIAG_CLAMP);
    let l22 = c.clamp(-LOG_DIAG_CLAMP, LOG_DIAG_CLAMP).exp();
    let m = Mat2::symmetric(l11 * l11, l11 * l21, l21 * l21 + l22 * l22);
    let mut jitter = 0.0;
    let mut out = m;
    for _ in 0..200 {
        if GaussianComponent::new(1.0, Vec2::zero(), out).is_ok() {
            return out;
        }
        jitter = if jitter == 0.0 {
            1e-9_f64.max(1e-15 * m.trace())
        } else {
            2.0 * jitter
        };
        out = m + Mat2::identity().scale(jitter);
    }
    Mat2::identity()
}

fn unpack_values(k: usize, v: &[f64]) -> ModelParams<f64> {
    let logits: Vec<f64> = v[..k - 1]
        .iter()
        .map(|&l| finite_or(l, 0.0).clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
        .chain(std::iter::once(0.0))
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let centers: Vec<Vec2<f64>> = (0..k)
        .map(|i| Vec2::new(finite_or(v[k - 1 + 2 * i], 0.0), finite_or(v[k + 2 * i], 0.0)))
        .collect();
    let base = 3 * k - 1;
    let infos: Vec<Mat2<f64>> = (0..k)
        .map(|i| {
            let t = &v[base + 3 * i..base + 3 * i + 3];
            information_from(finite_or(t[0], 0.0), finite_or(t[1], 0.0), finite_or(t[2], 0.0))
        })
        .collect();
    let gamma = finite_or(v[6 * k - 1], 0.0).clamp(-LOG_GAMMA_CLAMP, LOG_GAMMA_CLAMP).exp();
    let potential = MixturePotential::from_parts(&weights, &centers, &infos).expect("unpacked components are valid");
    ModelParams::new(potential, gamma).expect("unpacked gamma is valid")
}

/// Where restart centers start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterInit {
    /// Uniform in the center ranges of `init_box`.
    Box,
    /// Distinct observed positions chosen uniformly at random.
    Observations,
    /// Random observed positions refined by a few k-means (Lloyd) steps.
    Clusters,
}

const LLOYD_STEPS: usize = 8;

fn nearest(p: Vec2<f64>, centers: &[Vec2<f64>]) -> usize {
    (0..centers.len())
        .min_by(|&a, &b| (p - centers[a]).norm_sq().total_cmp(&(p - centers[b]).norm_sq()))
        .unwrap_or(0)
}

fn lloyd(points: &[Vec2<f64>], centers: &mut [Vec2<f64>], steps: usize) {
    let k = centers.len();
    for _ in 0..steps {
        let mut sums = vec![Vec2::zero(); k];
        let mut counts = vec![0usize; k];
        for &p in points {
            let i = nearest(p, centers);
            sums[i] += p;
            counts[i] += 1;
        }
        for i in 0..k {
            if counts[i] > 0 {
                centers[i] = sums[i].scale(1.0 / counts[i] as f64);
            }
        }
    }
}

/// Weights and information matrices matched to the clusters around
/// `centers`. Near a well the process is close to an Ornstein-Uhlenbeck
/// process with stationary covariance `γ² C⁻¹ / (2π)`, which is inverted
/// here. `None` when a cluster is too small or degenerate.
fn cluster_moments(points: &[Vec2<f64>], centers: &[Vec2<f64>], gamma_sq: f64) -> Option<Vec<(f64, Mat2<f64>)>> {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    let mut second = vec![[0.0f64; 3]; k];
    for &p in points {
        let i = nearest(p, centers);
        let d = p - centers[i];
        counts[i] += 1;
        second[i][0] += d.x * d.x;
        second[i][1] += d.x * d.y;
        second[i][2] += d.y * d.y;
    }
    let total = points.len() as f64;
    let floored: Vec<f64> = counts.iter().map(|&c| (c as f64 / total).max(0.05)).collect();
    let norm: f64 = floored.iter().sum();
    (0..k)
        .map(|i| {
            if counts[i] < 3 {
                return None;
            }
            let n = counts[i] as f64;
            let weight = floored[i] / norm;
            let cov = Mat2::symmetric(second[i][0] / n, second[i][1] / n, second[i][2] / n);
            let info = cov.inverse()?.scale(gamma_sq / (2.0 * weight)).symmetrize();
            (info.sym_eigenvalues()[1] > 0.0).then_some((weight, info))
        })
        .collect()
}

/// Optimizer settings. `max_evals` is the budget of each restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Offspring per generation; 0 picks the dimension-based default.
    pub population: usize,
    pub max_evals: usize,
    /// How restart centers are drawn.
    pub center_init: CenterInit,
    /// Relative objective tolerance for convergence.
    pub tolerance: f64,
    pub seed: u64,
    /// Per-coordinate `[lo, hi]` ranges for the start points; empty means
    /// the data-driven default.
    pub init_box: Vec<[f64; 2]>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 30,
            population: 0,
            max_evals: 5_000,
            center_init: CenterInit::Clusters,
            tolerance: 1e-9,
            seed: 0,
            init_box: Vec::new(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.restarts == 0 {
            return Err(EstimateError::InvalidConfig("restarts must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(EstimateError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.init_box.iter().any(|r| !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite()) {
            return Err(EstimateError::InvalidConfig("init_box ranges must be finite with lo <= hi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// The winning restart stopped on its budget rather than converging.
    pub budget_exhausted: bool,
    /// Final value of each restart, by restart index.
    pub restart_values: Vec<f64>,
    /// Best-so-far trace of the winning restart.
    pub trace: Vec<f64>,
}

/// Multi-restart derivative-free maximization. Start points are uniform in
/// `cfg.init_box`; restarts run in parallel, each on its own random stream,
/// and the best is chosen with ties going to the lowest restart index.
pub fn optimize<F>(objective: F, cfg: &OptimizerConfig) -> Result<OptimizeOutcome, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_from(objective, cfg, |_, _| {})
}

/// [`optimize`] with a hook that may overwrite coordinates of each uniform
/// start point before the local search begins.
pub fn optimize_from<F, S>(objective: F, cfg: &OptimizerConfig, start: S) -> Result<OptimizeOutcome, EstimateError>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: Fn(&mut [f64], &mut StreamRng) + Sync,
{
    cfg.validate()?;
    if cfg.init_box.is_empty() {
        return Err(EstimateError::InvalidConfig("init_box is empty".into()));
    }
    let scales: Vec<f64> = cfg.init_box.iter().map(|r| r[1] - r[0]).collect();
    let settings = cmaes::Settings {
        sigma0: 0.03,
        max_evals: cfg.max_evals,
        tolerance: cfg.tolerance,
        population: cfg.population,
    };
    let mut runs: Vec<cmaes::Run> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(cfg.seed, &[tag::OPTIMIZE, r as u64]);
            let mut x0: Vec<f64> = cfg
                .init_box
                .iter()
                .map(|b| b[0] + (b[1] - b[0]) * rng.random::<f64>())
                .collect();
            start(&mut x0, &mut rng);
            cmaes::maximize(&objective, &x0, &scales, &settings, &mut rng)
        })
        .collect();
    let mut winner = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.value > runs[winner].value {
            winner = i;
        }
    }
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let restart_values = runs.iter().map(|r| r.value).collect();
    let best = runs.swap_remove(winner);
    Ok(OptimizeOutcome {
        best: best.best,
        value: best.value,
        evaluations,
        budget_exhausted: best.budget_exhausted,
        restart_values,
        trace: best.trace,
    })
}

/// Result of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub theta_hat: ModelParams<f64>,
    /// Contrast (or estimated log-likelihood for `ea-mcem`) at `theta_hat`.
    pub objective: f64,
    pub restarts_used: usize,
    pub skipped_fraction: f64,
    pub evaluations: usize,
    pub seed: u64,
    /// Objective after each round of iterative methods.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

/// Start-point box for the packed parameters of a `k`-component model.
pub fn default_init_box(data: &TrajectorySet<f64>, k: usize) -> Vec<[f64; 2]> {
    let (lo, hi) = data.bounding_box();
    let axis = |a: f64, b: f64| -> [f64; 2] {
        let w = b - a;
        if w > 0.0 {
            [a - 0.1 * w, b + 0.1 * w]
        } else {
            [a - 1.0, b + 1.0]
        }
    };
    let mut out = Vec::with_capacity(ParamVector::len_for(k));
    out.extend(std::iter::repeat_n([-1.0, 1.0], k - 1));
    for _ in 0..k {
        out.push(axis(lo.x, hi.x));
        out.push(axis(lo.y, hi.y));
    }
    for _ in 0..k {
        out.push([0.1f64.ln(), 3.0f64.ln()]);
        out.push([-0.5, 0.5]);
        out.push([0.1f64.ln(), 3.0f64.ln()]);
    }
    let lg = 0.5 * data.quadratic_variation_gamma_sq().ln();
    let lg = if lg.is_finite() { lg } else { 0.0 };
    out.push([lg - 1.0, lg + 1.0]);
    out
}

/// Contrast of `scheme` at a packed vector; `-∞` when infeasible.
pub fn contrast_objective(scheme: Scheme, k: usize, data: &TrajectorySet<f64>, v: &[f64]) -> f64 {
    let Ok(theta) = ParamVector::unpack_slice(k, v) else {
        return f64::NEG_INFINITY;
    };
    let contrast = match scheme {
        Scheme::Kessler => kessler_filled_loglik(&theta, data),
        _ => pseudo_loglik(scheme, &theta, data),
    };
    match contrast {
        Ok(c) if c.value.is_finite() => c.value,
        _ => f64::NEG_INFINITY,
    }
}

/// Start hook placing the `k` centers of a packed vector per `init`. With
/// [`CenterInit::Clusters`] the weights and information matrices are also
/// matched to the clusters; `γ` is left alone.
fn center_starter<'a>(
    data: &'a TrajectorySet<f64>,
    k: usize,
    init: CenterInit,
) -> impl Fn(&mut [f64], &mut StreamRng) + Sync + 'a {
    let points: Vec<Vec2<f64>> = data.tracks().iter().flat_map(|t| t.positions.iter().copied()).collect();
    let gamma_sq = data.quadratic_variation_gamma_sq();
    move |x: &mut [f64], rng: &mut StreamRng| {
        if init == CenterInit::Box || points.len() < k {
            return;
        }
        let mut centers: Vec<Vec2<f64>> = rand::seq::index::sample(rng, points.len(), k)
            .into_iter()
            .map(|i| points[i])
            .collect();
        if init == CenterInit::Clusters {
            lloyd(&points, &mut centers, LLOYD_STEPS);
        }
        for (i, c) in centers.iter().enumerate() {
            x[k - 1 + 2 * i] = c.x;
            x[k + 2 * i] = c.y;
        }
        if init != CenterInit::Clusters || !(gamma_sq > 0.0) {
            return;
        }
        let Some(moments) = cluster_moments(&points, &centers, gamma_sq) else {
            return;
        };
        let components: Result<Vec<_>, _> = moments
            .iter()
            .zip(&centers)
            .map(|(&(w, info), &c)| GaussianComponent::new(w, c, info))
            .collect();
        let Some(theta) = components
            .ok()
            .and_then(|c| MixturePotential::new(c).ok())
            .and_then(|p| ModelParams::new(p, gamma_sq.sqrt()).ok())
        else {
            return;
        };
        let packed = pack(&theta);
        let n = x.len().min(ParamVector::len_for(k) - 1);
        x[..n].copy_from_slice(&packed.as_slice()[..n]);
    }
}

fn check_inputs(data: &TrajectorySet<f64>, k: usize, cfg: &OptimizerConfig) -> Result<Vec<[f64; 2]>, EstimateError> {
    cfg.validate()?;
    if data.n_segments() == 0 {
        return Err(EstimateError::EmptyData);
    }
    if k == 0 {
        return Err(EstimateError::InvalidConfig("k must be at least 1".into()));
    }
    let bx = if cfg.init_box.is_empty() {
        default_init_box(data, k)
    } else {
        cfg.init_box.clone()
    };
    if bx.len() != ParamVector::len_for(k) {
        return Err(EstimateError::LengthMismatch {
            expected: ParamVector::len_for(k),
            got: bx.len(),
        });
    }
    Ok(bx)
}

/// Fits `k` components by `method`. `ea-mcem` runs with default EM settings
/// and the optimizer seed.
pub fn fit(method: Method, data: &TrajectorySet<f64>, k: usize, cfg: &OptimizerConfig) -> Result<FitResult, EstimateError> {
    match method {
        Method::AdaptiveKessler => fit_adaptive_kessler(data, k, cfg),
        Method::EaMcem => {
            let em = EmConfig {
                seed: cfg.seed,
                ..EmConfig::default()
            };
            Ok(exact::fit_ea_mcem(data, k, &em, cfg)?)
        }
        _ => {
            let scheme = method.scheme().expect("contrast method");
            let bx = check_inputs(data, k, cfg)?;
            let run_cfg = OptimizerConfig {
                init_box: bx,
                ..cfg.clone()
            };
            let out = optimize_from(
                |v| contrast_objective(scheme, k, data, v),
                &run_cfg,
                center_starter(data, k, cfg.center_init),
            )?;
            if !out.value.is_finite() {
                return Err(EstimateError::AllRestartsFailed);
            }
            finish(method, scheme, data, k, &out.best, cfg, out.evaluations, Vec::new())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: Method,
    scheme: Scheme,
    data: &TrajectorySet<f64>,
    k: usize,
    best: &[f64],
    cfg: &OptimizerConfig,
    evaluations: usize,
    history: Vec<f64>,
) -> Result<FitResult, EstimateError> {
    let theta = ParamVector::unpack_slice(k, best)?.canonicalized();
    let contrast = match scheme {
        Scheme::Kessler => kessler_filled_loglik(&theta, data),
        _ => pseudo_loglik(scheme, &theta, data),
    }
    .map_err(|_| EstimateError::AllRestartsFailed)?;
    if !contrast.value.is_finite() {
        return Err(EstimateError::AllRestartsFailed);
    }
    let skipped_fraction = match scheme {
        Scheme::Euler => 0.0,
        _ => contrast.skipped_fraction(),
    };
    Ok(FitResult {
        method,
        theta_hat: theta,
        objective: contrast.value,
        restarts_used: cfg.restarts,
        skipped_fraction,
        evaluations,
        seed: cfg.seed,
        history,
    })
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
/// Returns `(argmax, max, evaluations)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    if fc >= fd {
        (c, fc, evals)
    } else {
        (d, fd, evals)
    }
}

/// Kessler contrast maximized by alternating over `η` (γ fixed) and `γ`
/// (η fixed), starting from the quadratic-variation estimate of `γ²`.
pub fn fit_adaptive_kessler(data: &TrajectorySet<f64>, k: usize, cfg: &OptimizerConfig) -> Result<FitResult, EstimateError> {
    let bx = check_inputs(data, k, cfg)?;
    let n_eta = ParamVector::len_for(k) - 1;
    let mut log_gamma = 0.5 * data.quadratic_variation_gamma_sq().ln();
    if !log_gamma.is_finite() {
        return Err(EstimateError::EmptyData);
    }
    let joined = |eta: &[f64], lg: f64| -> Vec<f64> {
        let mut v = eta.to_vec();
        v.push(lg);
        v
    };
    let contrast = |eta: &[f64], lg: f64| contrast_objective(Scheme::Kessler, k, data, &joined(eta, lg));

    let eta_cfg = OptimizerConfig {
        init_box: bx[..n_eta].to_vec(),
        ..cfg.clone()
    };
    let lg0 = log_gamma;
    let first = optimize_from(|eta| contrast(eta, lg0), &eta_cfg, center_starter(data, k, cfg.center_init))?;
    if !first.value.is_finite() {
        return Err(EstimateError::AllRestartsFailed);
    }
    let mut eta = first.best;
    let mut value = first.value;
    let mut evaluations = first.evaluations;
    let mut history = vec![value];
    let scales: Vec<f64> = bx[..n_eta].iter().map(|r| r[1] - r[0]).collect();
    let settings = cmaes::Settings {
        sigma0: 0.05,
        max_evals: cfg.max_evals,
        tolerance: cfg.tolerance,
        population: cfg.population,
    };

    for round in 1..ADAPTIVE_MAX_ROUNDS {
        let previous = value;
        let (lg, v, n) = golden_section_max(|lg| contrast(&eta, lg), log_gamma - 1.0, log_gamma + 1.0, 1e-10, 100);
        evaluations += n;
        if v > value {
            log_gamma = lg;
            value = v;
        }
        let lg_now = log_gamma;
        let mut rng = substream(cfg.seed, &[tag::OPTIMIZE, 1_000_000 + round as u64]);
        let run = cmaes::maximize(&|e: &[f64]| contrast(e, lg_now), &eta, &scales, &settings, &mut rng);
        evaluations += run.evaluations;
        if run.value > value {
            eta = run.best;
            value = run.value;
        }
        history.push(value);
        if value - previous < cfg.tolerance * value.abs().max(1.0) {
            break;
        }
    }
    finish(
        Method::AdaptiveKessler,
        Scheme::Kessler,
        data,
        k,
        &joined(&eta, log_gamma),
        cfg,
        evaluations,
        history,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> ModelParams<f64> {
        let p = MixturePotential::from_parts(&[1.0], &[Vec2::zero()], &[Mat2::identity()]).unwrap();
        ModelParams::new(p, 1.0).unwrap()
    }

    #[test]
    fn standard_packs_to_zeros() {
        let v = pack(&standard());
        assert_eq!(v.as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(unpack(&v), standard());
    }

    #[test]
    fn length_is_checked() {
        assert!(matches!(
            ParamVector::from_vec(2, vec![0.0; 7]),
            Err(EstimateError::LengthMismatch { expected: 12, got: 7 })
        ));
    }

    #[test]
    fn extreme_vectors_still_unpack() {
        let v = ParamVector::from_vec(2, vec![1e300, -1e300, 5.0, 1e200, 1e9, -1e9, 700.0, 1e300, -700.0, 0.0, 1e7, 0.0])
            .unwrap();
        let th = v.unpack();
        assert!((th.potential().weight_sum() - 1.0).abs() < 1e-12);
        assert!(th.gamma() > 0.0 && th.gamma().is_finite());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx, _) = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx <= 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
    }
}
