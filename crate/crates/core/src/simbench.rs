//! Simulation study harness: scenarios, replicated data, fits with every
//! method, and map-error metrics.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{self, FitResult, Method, OptimizerConfig};
use crate::exact::{self, EaConfig, EmConfig, ExactError};
use crate::linalg::{Mat2, Vec2};
use crate::potential::{MixturePotential, ModelParams};
use crate::rng::{substream, tag, StreamRng};
use crate::trajectory::{Track, TrajectorySet};
use crate::transition::{kessler_filled_loglik, pseudo_loglik, Scheme};

pub const SCHEMA_VERSION: u32 = 1;

/// Euler sub-steps per observation gap in `euler-fine` mode.
pub const EULER_FINE_SUBSTEPS: usize = 1000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("grid must have a positive extent and resolution")]
    DegenerateGrid,
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// How trajectories are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Exact,
    EulerFine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub theta_true: ModelParams<f64>,
    /// Trajectories per data set.
    pub g: usize,
    /// Points per trajectory.
    pub n: usize,
    pub dt: f64,
    pub x0: Vec2<f64>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: SimMode,
    #[serde(default)]
    pub ea: EaConfig,
}

fn default_mode() -> SimMode {
    SimMode::Exact
}

/// Two-well potential used as the default study scenario. At `γ = 0.4`
/// tracks spend most of their time near one of the wells, and at `dt = 1`
/// the drift changes little over one step.
pub fn default_theta() -> ModelParams<f64> {
    let p = MixturePotential::from_parts(
        &[0.5, 0.5],
        &[Vec2::new(0.0, 0.0), Vec2::new(6.0, 4.0)],
        &[Mat2::symmetric(0.35, 0.105, 0.175), Mat2::symmetric(0.21, -0.07, 0.42)],
    )
    .expect("valid default potential");
    ModelParams::new(p, 0.4).expect("valid gamma")
}

/// Single standard well: unit weight, center at the origin, `C = I`, `γ = 1`.
pub fn standard_theta() -> ModelParams<f64> {
    let p = MixturePotential::from_parts(&[1.0], &[Vec2::zero()], &[Mat2::identity()]).expect("valid potential");
    ModelParams::new(p, 1.0).expect("valid gamma")
}

impl Scenario {
    /// Default two-well study at sampling interval `dt`.
    pub fn default_k2(dt: f64) -> Self {
        Self {
            theta_true: default_theta(),
            g: 10,
            n: 500,
            dt,
            x0: Vec2::new(3.0, 2.0),
            replications: 10,
            seed: 2024,
            mode: SimMode::Exact,
            ea: EaConfig::default(),
        }
    }

    /// Single standard well started at its center.
    pub fn standard_k1(dt: f64) -> Self {
        Self {
            theta_true: standard_theta(),
            x0: Vec2::zero(),
            ..Self::default_k2(dt)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.g == 0 || self.n < 2 || self.replications == 0 {
            return Err(SimError::InvalidScenario("need g >= 1, n >= 2 and replications >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !self.x0.is_finite() {
            return Err(SimError::InvalidScenario("dt must be positive and x0 finite".into()));
        }
        Ok(())
    }
}

fn euler_fine_track<R: Rng + ?Sized>(theta: &ModelParams<f64>, id: &str, x0: Vec2<f64>, dt: f64, n: usize, rng: &mut R) -> Track<f64> {
    let h = dt / EULER_FINE_SUBSTEPS as f64;
    let sd = theta.gamma() * h.sqrt();
    let mut x = x0;
    let mut positions = Vec::with_capacity(n);
    positions.push(x);
    for _ in 1..n {
        for _ in 0..EULER_FINE_SUBSTEPS {
            let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            x = x + theta.potential().drift(x).scale(h) + z.scale(sd);
        }
        positions.push(x);
    }
    let times = (0..n).map(|i| i as f64 * dt).collect();
    Track::new(id, times, positions).expect("regular grid is valid")
}

/// Data set number `replication` of the scenario. Each track draws from its
/// own stream, so a replication does not depend on any other.
pub fn simulate(scenario: &Scenario, replication: u64) -> Result<TrajectorySet<f64>, SimError> {
    scenario.validate()?;
    let tracks = (0..scenario.g)
        .into_par_iter()
        .map(|g| {
            let mut rng: StreamRng = substream(scenario.seed, &[tag::SIMULATE, replication, g as u64]);
            let id = format!("{}", g + 1);
            match scenario.mode {
                SimMode::Exact => exact::simulate_track(
                    &scenario.theta_true,
                    &id,
                    scenario.x0,
                    scenario.dt,
                    scenario.n,
                    &scenario.ea,
                    &mut rng,
                )
                .map_err(SimError::from),
                SimMode::EulerFine => Ok(euler_fine_track(
                    &scenario.theta_true,
                    &id,
                    scenario.x0,
                    scenario.dt,
                    scenario.n,
                    &mut rng,
                )),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectorySet::new(tracks).expect("at least one track"))
}

// ---------------------------------------------------------------------------
// Map metrics

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    /// Cells along x and y.
    pub resolution: [usize; 2],
}

impl GridSpec {
    /// Box around the true centers, padded by four standard deviations along
    /// each component's weakest direction, with 200×200 cells.
    pub fn default_for(p_true: &MixturePotential<f64>) -> Self {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in p_true.components() {
            let radius = 4.0 / c.information().sym_eigenvalues()[1].sqrt();
            lo = Vec2::new(lo.x.min(c.center().x - radius), lo.y.min(c.center().y - radius));
            hi = Vec2::new(hi.x.max(c.center().x + radius), hi.y.max(c.center().y + radius));
        }
        Self {
            x_range: [lo.x, hi.x],
            y_range: [lo.y, hi.y],
            resolution: [200, 200],
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            resolution: [self.resolution[0] * factor, self.resolution[1] * factor],
            ..*self
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = self.x_range[1] > self.x_range[0]
            && self.y_range[1] > self.y_range[0]
            && self.x_range.iter().chain(&self.y_range).all(|v| v.is_finite())
            && self.resolution[0] > 0
            && self.resolution[1] > 0;
        if ok {
            Ok(())
        } else {
            Err(SimError::DegenerateGrid)
        }
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.x_range[1] - self.x_range[0]) / self.resolution[0] as f64,
            (self.y_range[1] - self.y_range[0]) / self.resolution[1] as f64,
        )
    }

    /// Midpoint of cell `(i, j)`.
    pub fn midpoint(&self, i: usize, j: usize) -> Vec2<f64> {
        let (hx, hy) = self.cell_size();
        Vec2::new(
            self.x_range[0] + (i as f64 + 0.5) * hx,
            self.y_range[0] + (j as f64 + 0.5) * hy,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetrics {
    pub grid_spec: GridSpec,
    /// `|P_est - P_true|` at cell midpoints, indexed `[j][i]` (row per y).
    pub abs_error_grid: Vec<Vec<f64>>,
    pub ise: f64,
}

impl MapMetrics {
    /// Grid as CSV with columns `x,y,value`.
    pub fn to_csv_string(&self) -> String {
        grid_csv(&self.grid_spec, &self.abs_error_grid)
    }
}

/// CSV with columns `x,y,value` for a grid of cell-midpoint values.
pub fn grid_csv(spec: &GridSpec, values: &[Vec<f64>]) -> String {
    let mut s = String::from("x,y,value\n");
    for (j, row) in values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let p = spec.midpoint(i, j);
            s.push_str(&format!("{},{},{}\n", p.x, p.y, v));
        }
    }
    s
}

/// Potential values on the grid, indexed `[j][i]`.
pub fn potential_grid(p: &MixturePotential<f64>, spec: &GridSpec) -> Result<Vec<Vec<f64>>, SimError> {
    spec.validate()?;
    Ok((0..spec.resolution[1])
        .map(|j| (0..spec.resolution[0]).map(|i| p.value(spec.midpoint(i, j))).collect())
        .collect())
}

/// Absolute-error grid and midpoint-rule integrated squared error.
pub fn map_metrics(p_est: &MixturePotential<f64>, p_true: &MixturePotential<f64>, spec: &GridSpec) -> Result<MapMetrics, SimError> {
    spec.validate()?;
    let (hx, hy) = spec.cell_size();
    let grid: Vec<Vec<f64>> = (0..spec.resolution[1])
        .map(|j| {
            (0..spec.resolution[0])
                .map(|i| {
                    let x = spec.midpoint(i, j);
                    (p_est.value(x) - p_true.value(x)).abs()
                })
                .collect()
        })
        .collect();
    let ise = grid.iter().flatten().map(|e| e * e).sum::<f64>() * hx * hy;
    Ok(MapMetrics {
        grid_spec: *spec,
        abs_error_grid: grid,
        ise,
    })
}

/// Pointwise median of several potentials on the grid, indexed `[j][i]`.
pub fn median_map(potentials: &[&MixturePotential<f64>], spec: &GridSpec) -> Result<Vec<Vec<f64>>, SimError> {
    spec.validate()?;
    Ok((0..spec.resolution[1])
        .map(|j| {
            (0..spec.resolution[0])
                .map(|i| {
                    let x = spec.midpoint(i, j);
                    let vals: Vec<f64> = potentials.iter().map(|p| p.value(x)).collect();
                    median(&vals)
                })
                .collect()
        })
        .collect())
}

/// Per-method grids of a study: the median map estimate and its absolute
/// error against the truth, as `(method, median, abs_error)`.
pub fn study_grids(report: &StudyReport) -> Result<Vec<(Method, Vec<Vec<f64>>, Vec<Vec<f64>>)>, SimError> {
    let spec = report
        .config
        .grid
        .unwrap_or_else(|| GridSpec::default_for(report.scenario.theta_true.potential()));
    let truth = potential_grid(report.scenario.theta_true.potential(), &spec)?;
    let mut out = Vec::new();
    for &m in &report.methods {
        let fits: Vec<&MixturePotential<f64>> = report
            .rows_for(m)
            .filter_map(|r| r.fit.as_ref().map(|f| f.theta_hat.potential()))
            .collect();
        if fits.is_empty() {
            continue;
        }
        let med = median_map(&fits, &spec)?;
        let err = med
            .iter()
            .zip(&truth)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()).collect())
            .collect();
        out.push((m, med, err));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Study

/// Linear-interpolation percentile (`q` in `[0, 1]`) of unsorted data.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}

/// Distances between estimated and true centers under the label matching
/// that minimizes the largest distance. Returned in the true-label order.
pub fn center_errors(est: &MixturePotential<f64>, truth: &MixturePotential<f64>) -> Vec<f64> {
    let t: Vec<Vec2<f64>> = truth.components().iter().map(|c| c.center()).collect();
    let e: Vec<Vec2<f64>> = est.components().iter().map(|c| c.center()).collect();
    if t.len() != e.len() {
        return vec![f64::INFINITY; t.len()];
    }
    let mut perm: Vec<usize> = (0..t.len()).collect();
    let mut best: Option<Vec<f64>> = None;
    loop {
        let d: Vec<f64> = perm.iter().enumerate().map(|(i, &p)| (e[p] - t[i]).norm()).collect();
        let worst = d.iter().copied().fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| worst < b.iter().copied().fold(0.0, f64::max)) {
            best = Some(d);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.unwrap_or_default()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Flat named parameter list: weights, centers, information entries, γ.
pub fn named_parameters(theta: &ModelParams<f64>) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (k, c) in theta.potential().components().iter().enumerate() {
        let i = k + 1;
        let m = c.information();
        out.push((format!("pi_{i}"), c.weight()));
        out.push((format!("mu_{i}_x"), c.center().x));
        out.push((format!("mu_{i}_y"), c.center().y));
        out.push((format!("c_{i}_xx"), m.m[0][0]));
        out.push((format!("c_{i}_xy"), m.m[0][1]));
        out.push((format!("c_{i}_yy"), m.m[1][1]));
    }
    out.push(("gamma".into(), theta.gamma()));
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub optimizer: OptimizerConfig,
    pub em: EmConfig,
    /// Replications fitted with `ea-mcem`; `None` fits all of them.
    pub ea_replications: Option<usize>,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub replication: usize,
    pub method: Method,
    pub fit: Option<FitResult>,
    pub error: Option<String>,
    pub ise: Option<f64>,
    /// Center distances, in true-label order.
    pub center_errors: Vec<f64>,
    pub gamma_abs_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub quantity: String,
    pub n: usize,
    pub median: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<Summary>,
}

impl StudyReport {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary(&self, method: Method, quantity: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.method == method && s.quantity == quantity)
    }
}

/// Fit of one method on one replication's data, as done by the study.
pub fn fit_for_study(
    method: Method,
    data: &TrajectorySet<f64>,
    k: usize,
    cfg: &StudyConfig,
) -> Result<FitResult, String> {
    match method {
        Method::EaMcem => exact::fit_ea_mcem(data, k, &cfg.em, &cfg.optimizer).map_err(|e| e.to_string()),
        m => estimate::fit(m, data, k, &cfg.optimizer).map_err(|e| e.to_string()),
    }
}

/// Replicated simulation and fitting. Replications run in parallel; rows
/// come out ordered by replication, then by the order of `methods`.
pub fn run_study(scenario: &Scenario, methods: &[Method], cfg: &StudyConfig) -> Result<StudyReport, SimError> {
    scenario.validate()?;
    let truth = &scenario.theta_true;
    let k = truth.potential().k();
    let grid = cfg.grid.unwrap_or_else(|| GridSpec::default_for(truth.potential()));
    grid.validate()?;
    let per_rep: Vec<Result<Vec<StudyRow>, SimError>> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| {
            let data = simulate(scenario, r as u64)?;
            let mut rows = Vec::new();
            for &m in methods {
                if m == Method::EaMcem && cfg.ea_replications.is_some_and(|n| r >= n) {
                    continue;
                }
                let row = match fit_for_study(m, &data, k, cfg) {
                    Ok(fit) => {
                        let ise = map_metrics(fit.theta_hat.potential(), truth.potential(), &grid)?.ise;
                        StudyRow {
                            replication: r,
                            method: m,
                            ise: Some(ise),
                            center_errors: center_errors(fit.theta_hat.potential(), truth.potential()),
                            gamma_abs_error: Some((fit.theta_hat.gamma() - truth.gamma()).abs()),
                            fit: Some(fit),
                            error: None,
                        }
                    }
                    Err(e) => StudyRow {
                        replication: r,
                        method: m,
                        fit: None,
                        error: Some(e),
                        ise: None,
                        center_errors: Vec::new(),
                        gamma_abs_error: None,
                    },
                };
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    let summaries = summarize(methods, &rows);
    Ok(StudyReport {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.clone(),
        methods: methods.to_vec(),
        config: StudyConfig { grid: Some(grid), ..cfg.clone() },
        rows,
        summaries,
    })
}

fn summarize(methods: &[Method], rows: &[StudyRow]) -> Vec<Summary> {
    let mut out = Vec::new();
    for &m in methods {
        let fitted: Vec<&StudyRow> = rows.iter().filter(|r| r.method == m && r.fit.is_some()).collect();
        let Some(first) = fitted.first() else { continue };
        let names: Vec<String> = named_parameters(&first.fit.as_ref().expect("fitted").theta_hat)
            .into_iter()
            .map(|p| p.0)
            .collect();
        let mut push = |quantity: String, values: Vec<f64>| {
            out.push(Summary {
                method: m,
                quantity,
                n: values.len(),
                median: median(&values),
                p2_5: percentile(&values, 0.025),
                p97_5: percentile(&values, 0.975),
            });
        };
        for (idx, name) in names.iter().enumerate() {
            let vals = fitted
                .iter()
                .map(|r| named_parameters(&r.fit.as_ref().expect("fitted").theta_hat)[idx].1)
                .collect();
            push(name.clone(), vals);
        }
        push("ise".into(), fitted.iter().filter_map(|r| r.ise).collect());
        push("gamma_abs_error".into(), fitted.iter().filter_map(|r| r.gamma_abs_error).collect());
        push(
            "skipped_fraction".into(),
            fitted.iter().map(|r| r.fit.as_ref().expect("fitted").skipped_fraction).collect(),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Cross-criterion comparison

/// Criteria of the comparison matrix, in column order.
pub const CRITERIA: [&str; 4] = ["euler", "ozaki", "kessler", "ea"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// Criterion values divided by the number of segments; `null` when a
    /// criterion cannot be evaluated.
    pub values: Vec<Vec<Option<f64>>>,
    /// Row index of each column's maximum.
    pub column_max: Vec<Option<usize>>,
    pub ea_std_error: Vec<Option<f64>>,
    pub segments: usize,
}

/// Every fit evaluated under every criterion, normalized per segment.
pub fn compare_matrix(
    labels: &[String],
    fits: &[ModelParams<f64>],
    data: &TrajectorySet<f64>,
    n_mc: usize,
    seed: u64,
) -> CompareMatrix {
    let segments = data.n_segments();
    let norm = segments.max(1) as f64;
    let mut values = Vec::with_capacity(fits.len());
    let mut ea_se = Vec::with_capacity(fits.len());
    for theta in fits {
        let mut row: Vec<Option<f64>> = [Scheme::Euler, Scheme::Ozaki, Scheme::Kessler]
            .iter()
            .map(|&s| {
                let c = match s {
                    Scheme::Kessler => kessler_filled_loglik(theta, data),
                    _ => pseudo_loglik(s, theta, data),
                };
                c.ok().filter(|c| c.value.is_finite()).map(|c| c.value / norm)
            })
            .collect();
        match exact::loglik_estimate(theta, data, n_mc, seed) {
            Ok(e) => {
                row.push(Some(e.value / norm));
                ea_se.push(Some(e.std_error / norm));
            }
            Err(_) => {
                row.push(None);
                ea_se.push(None);
            }
        }
        values.push(row);
    }
    let column_max = (0..CRITERIA.len())
        .map(|c| {
            let mut best: Option<(usize, f64)> = None;
            for (r, row) in values.iter().enumerate() {
                if let Some(v) = row[c] {
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((r, v));
                    }
                }
            }
            best.map(|b| b.0)
        })
        .collect();
    CompareMatrix {
        rows: labels.to_vec(),
        columns: CRITERIA.iter().map(|s| s.to_string()).collect(),
        values,
        column_max,
        ea_std_error: ea_se,
        segments,
    }
}
