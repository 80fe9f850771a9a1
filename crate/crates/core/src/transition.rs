//! Gaussian approximations of the transition density over one observation
//! gap, and the pseudo-log-likelihood contrasts built from them.
//!
//! Three schemes are provided:
//!
//! * **Euler**: drift frozen at the start point, covariance `γ²Δ I`.
//! * **Ozaki**: drift linearized at the start point, giving the exact moments
//!   of the local Ornstein–Uhlenbeck process.
//! * **Kessler**: Euler mean with the second-order covariance
//!   `γ²Δ(I + ΔJ)`, which can fail to be positive semi-definite.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{kronecker_sum, Mat2, Scalar, SquareMatrix, Vec2};
use crate::potential::{MixturePotential, ModelParams};
use crate::trajectory::TrajectorySet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error("drift Jacobian is singular (det {det})")]
    SingularJacobian { det: f64 },
    #[error("covariance is not positive definite")]
    NonPsdCovariance,
    #[error("no segments to evaluate")]
    EmptyData,
    #[error("non-finite contrast term at segment {segment}")]
    NonFiniteValue { segment: usize },
}

/// A vector field with its Jacobian.
pub trait DriftField<T: Scalar> {
    fn value(&self, x: Vec2<T>) -> Vec2<T>;
    fn jacobian(&self, x: Vec2<T>) -> Mat2<T>;

    fn value_and_jacobian(&self, x: Vec2<T>) -> (Vec2<T>, Mat2<T>) {
        (self.value(x), self.jacobian(x))
    }
}

impl<T: Scalar> DriftField<T> for MixturePotential<T> {
    fn value(&self, x: Vec2<T>) -> Vec2<T> {
        self.drift(x)
    }

    fn jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        self.drift_jacobian(x)
    }

    fn value_and_jacobian(&self, x: Vec2<T>) -> (Vec2<T>, Mat2<T>) {
        let d = self.derivatives(x);
        (d.gradient, d.hessian)
    }
}

/// The zero vector field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl<T: Scalar> DriftField<T> for ZeroDrift {
    fn value(&self, _x: Vec2<T>) -> Vec2<T> {
        Vec2::zero()
    }

    fn jacobian(&self, _x: Vec2<T>) -> Mat2<T> {
        Mat2::zero()
    }
}

/// Affine field `A (x - c)`.
#[derive(Debug, Clone, Copy)]
pub struct LinearDrift<T> {
    pub matrix: Mat2<T>,
    pub anchor: Vec2<T>,
}

impl<T: Scalar> DriftField<T> for LinearDrift<T> {
    fn value(&self, x: Vec2<T>) -> Vec2<T> {
        self.matrix.mul_vec(x - self.anchor)
    }

    fn jacobian(&self, _x: Vec2<T>) -> Mat2<T> {
        self.matrix
    }
}

/// One observation gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub start: Vec2<T>,
    pub end: Vec2<T>,
    pub dt: T,
}

impl<T: Scalar> Segment<T> {
    pub fn new(start: Vec2<T>, end: Vec2<T>, dt: T) -> Self {
        debug_assert!(dt > T::zero());
        Self { start, end, dt }
    }
}

/// Mean and covariance of a bivariate Gaussian transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTransition<T> {
    pub mean: Vec2<T>,
    pub cov: Mat2<T>,
    pub psd: bool,
}

/// Discretization scheme for the pseudo-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    Ozaki,
    Kessler,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Euler, Scheme::Ozaki, Scheme::Kessler];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Ozaki => "ozaki",
            Scheme::Kessler => "kessler",
        }
    }
}

pub fn euler_transition<T: Scalar, F: DriftField<T> + ?Sized>(
    f: &F,
    x: Vec2<T>,
    dt: T,
    gamma: T,
) -> GaussianTransition<T> {
    euler_from_drift(x, f.value(x), dt, gamma)
}

fn euler_from_drift<T: Scalar>(x: Vec2<T>, b: Vec2<T>, dt: T, gamma: T) -> GaussianTransition<T> {
    let v = gamma * gamma * dt;
    GaussianTransition {
        mean: x + b.scale(dt),
        cov: Mat2::diag(v, v),
        psd: true,
    }
}

/// `|det J| < 1e-12 · max(1, ‖J‖²_F)`.
pub fn is_singular_jacobian<T: Scalar>(j: &Mat2<T>) -> bool {
    j.det().abs() < T::lit(1e-12) * j.frobenius_sq().max(T::one())
}

/// Local-linearization transition.
///
/// Symmetric Jacobians (every gradient field) go through the closed-form
/// spectral route; anything else through [`ozaki_transition_kronecker`].
pub fn ozaki_transition<T: Scalar, F: DriftField<T> + ?Sized>(
    f: &F,
    x: Vec2<T>,
    dt: T,
    gamma: T,
) -> Result<GaussianTransition<T>, TransitionError> {
    let (b, j) = f.value_and_jacobian(x);
    ozaki_from_local(x, b, &j, dt, gamma)
}

fn ozaki_from_local<T: Scalar>(
    x: Vec2<T>,
    b: Vec2<T>,
    j: &Mat2<T>,
    dt: T,
    gamma: T,
) -> Result<GaussianTransition<T>, TransitionError> {
    if is_singular_jacobian(j) {
        return Err(TransitionError::SingularJacobian {
            det: j.det().to_f64().unwrap_or(f64::NAN),
        });
    }
    if j.is_symmetric() {
        Ok(ozaki_spectral(x, b, j, dt, gamma))
    } else {
        Ok(ozaki_kronecker_unchecked(x, b, j, dt, gamma))
    }
}

/// `(e^{λΔ} - 1)/λ`, continuous at `λ = 0`.
fn exp_ratio<T: Scalar>(lambda: T, dt: T) -> T {
    if lambda == T::zero() {
        dt
    } else {
        (lambda * dt).exp_m1() / lambda
    }
}

fn ozaki_spectral<T: Scalar>(x: Vec2<T>, b: Vec2<T>, j: &Mat2<T>, dt: T, gamma: T) -> GaussianTransition<T> {
    let eig = j.sym_eigen();
    let mean_op = Mat2::from_spectrum(&eig, |l| exp_ratio(l, dt));
    let two = T::lit(2.0);
    let g2 = gamma * gamma;
    let cov = Mat2::from_spectrum(&eig, |l| g2 * exp_ratio(two * l, dt));
    GaussianTransition {
        mean: x + mean_op.mul_vec(b),
        cov,
        psd: true,
    }
}

/// Local-linearization transition through the Kronecker-sum formula:
/// `vec Σ = (J⊕J)⁻¹(exp((J⊕J)Δ) - I₄) vec(γ²I)` and
/// `μ = x + (exp(JΔ) - I)J⁻¹ b`, with the `A⁻¹(e^A - I)` products taken
/// from the corner block of an augmented matrix exponential.
pub fn ozaki_transition_kronecker<T: Scalar, F: DriftField<T> + ?Sized>(
    f: &F,
    x: Vec2<T>,
    dt: T,
    gamma: T,
) -> Result<GaussianTransition<T>, TransitionError> {
    let (b, j) = f.value_and_jacobian(x);
    if is_singular_jacobian(&j) {
        return Err(TransitionError::SingularJacobian {
            det: j.det().to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(ozaki_kronecker_unchecked(x, b, &j, dt, gamma))
}

fn ozaki_kronecker_unchecked<T: Scalar>(
    x: Vec2<T>,
    b: Vec2<T>,
    j: &Mat2<T>,
    dt: T,
    gamma: T,
) -> GaussianTransition<T> {
    // [[JΔ, bΔ], [0, 0]]
    let mut aug3 = SquareMatrix::<T, 3>::zero();
    for r in 0..2 {
        for c in 0..2 {
            aug3.0[r][c] = j.m[r][c] * dt;
        }
    }
    aug3.0[0][2] = b.x * dt;
    aug3.0[1][2] = b.y * dt;
    let e3 = aug3.expm();
    let mean = x + Vec2::new(e3.0[0][2], e3.0[1][2]);

    // [[(J⊕J)Δ, vec(γ²I)Δ], [0, 0]]
    let ks = kronecker_sum(j);
    let q = Mat2::identity().scale(gamma * gamma).vec();
    let mut aug5 = SquareMatrix::<T, 5>::zero();
    for r in 0..4 {
        for c in 0..4 {
            aug5.0[r][c] = ks.0[r][c] * dt;
        }
        aug5.0[r][4] = q[r] * dt;
    }
    let e5 = aug5.expm();
    let cov = Mat2::unvec([e5.0[0][4], e5.0[1][4], e5.0[2][4], e5.0[3][4]]).symmetrize();
    GaussianTransition { mean, cov, psd: true }
}

pub fn kessler_transition<T: Scalar, F: DriftField<T> + ?Sized>(
    f: &F,
    x: Vec2<T>,
    dt: T,
    gamma: T,
) -> GaussianTransition<T> {
    let (b, j) = f.value_and_jacobian(x);
    kessler_from_local(x, b, &j, dt, gamma)
}

fn kessler_from_local<T: Scalar>(x: Vec2<T>, b: Vec2<T>, j: &Mat2<T>, dt: T, gamma: T) -> GaussianTransition<T> {
    let cov = (Mat2::identity() + j.scale(dt))
        .scale(gamma * gamma * dt)
        .symmetrize();
    let psd = cov.sym_eigenvalues()[1] >= T::zero();
    GaussianTransition {
        mean: x + b.scale(dt),
        cov,
        psd,
    }
}

/// Bivariate normal log-density.
pub fn gaussian_logpdf<T: Scalar>(t: &GaussianTransition<T>, y: Vec2<T>) -> Result<T, TransitionError> {
    let det = t.cov.det();
    if !t.psd || !(det > T::zero()) {
        return Err(TransitionError::NonPsdCovariance);
    }
    let inv = t.cov.inverse().ok_or(TransitionError::NonPsdCovariance)?;
    let d = y - t.mean;
    Ok(-T::lit((2.0 * PI).ln()) - T::lit(0.5) * (det.ln() + inv.quad_form(d)))
}

/// Stabilized Kessler log-density term: the inverse covariance is replaced
/// by `(γ²Δ)⁻¹(I - ΔJ)` and the log-determinant by `2 log(γ²Δ) + Δ tr J`.
pub fn kessler_stabilized_term<T: Scalar>(seg: &Segment<T>, b: Vec2<T>, j: &Mat2<T>, gamma: T) -> T {
    let a = gamma * gamma * seg.dt;
    let d = seg.end - (seg.start + b.scale(seg.dt));
    let precision = (Mat2::identity() - j.scale(seg.dt)).symmetrize();
    let quad = precision.quad_form(d) / a;
    let logdet = T::lit(2.0) * a.ln() + seg.dt * j.trace();
    -T::lit((2.0 * PI).ln()) - T::lit(0.5) * (logdet + quad)
}

/// Whether the expanded inverse `I - ΔJ` is positive definite. Without it the
/// stabilized term is unbounded above as `γ → 0`.
pub fn kessler_precision_is_pd<T: Scalar>(j: &Mat2<T>, dt: T) -> bool {
    (Mat2::identity() - j.scale(dt)).symmetrize().sym_eigenvalues()[1] > T::zero()
}

/// Per-segment contribution to a contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentTerm<T> {
    /// Regular log-density term.
    Value(T),
    /// Ozaki fell back to the Euler term for a singular Jacobian.
    Fallback(T),
    /// Kessler covariance not PSD; the segment is left out.
    Skipped,
}

/// Contribution of one segment under `scheme`.
pub fn segment_term<T: Scalar, F: DriftField<T> + ?Sized>(
    scheme: Scheme,
    f: &F,
    seg: &Segment<T>,
    gamma: T,
) -> Result<SegmentTerm<T>, TransitionError> {
    match scheme {
        Scheme::Euler => {
            let t = euler_transition(f, seg.start, seg.dt, gamma);
            gaussian_logpdf(&t, seg.end).map(SegmentTerm::Value)
        }
        Scheme::Ozaki => {
            let (b, j) = f.value_and_jacobian(seg.start);
            match ozaki_from_local(seg.start, b, &j, seg.dt, gamma) {
                Ok(t) => gaussian_logpdf(&t, seg.end).map(SegmentTerm::Value),
                Err(TransitionError::SingularJacobian { .. }) => {
                    let t = euler_from_drift(seg.start, b, seg.dt, gamma);
                    gaussian_logpdf(&t, seg.end).map(SegmentTerm::Fallback)
                }
                Err(e) => Err(e),
            }
        }
        Scheme::Kessler => {
            let (b, j) = f.value_and_jacobian(seg.start);
            let t = kessler_from_local(seg.start, b, &j, seg.dt, gamma);
            if !t.psd || !kessler_precision_is_pd(&j, seg.dt) {
                return Ok(SegmentTerm::Skipped);
            }
            Ok(SegmentTerm::Value(kessler_stabilized_term(seg, b, &j, gamma)))
        }
    }
}

/// Value of a pseudo-log-likelihood contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast<T> {
    pub value: T,
    /// Kessler: segments left out. Ozaki: segments that fell back to Euler.
    pub skipped: usize,
    pub segments: usize,
}

impl<T: Scalar> Contrast<T> {
    pub fn skipped_fraction(&self) -> f64 {
        if self.segments == 0 {
            0.0
        } else {
            self.skipped as f64 / self.segments as f64
        }
    }

    /// Every segment was left out; the contrast carries no information.
    pub fn all_skipped(&self) -> bool {
        self.segments > 0 && self.skipped == self.segments && self.value == T::zero()
    }
}

/// Sum of per-segment terms over all segments of `data`, in segment order.
pub fn pseudo_loglik<T: Scalar>(
    scheme: Scheme,
    theta: &ModelParams<T>,
    data: &TrajectorySet<T>,
) -> Result<Contrast<T>, TransitionError> {
    pseudo_loglik_with(scheme, theta.potential(), theta.gamma(), data)
}

/// [`pseudo_loglik`] for an arbitrary drift field.
pub fn pseudo_loglik_with<T: Scalar, F: DriftField<T> + ?Sized>(
    scheme: Scheme,
    field: &F,
    gamma: T,
    data: &TrajectorySet<T>,
) -> Result<Contrast<T>, TransitionError> {
    contrast_impl(scheme, field, gamma, data, false)
}

/// Kessler contrast in which left-out segments are scored by their Euler term
/// instead of being dropped. Dropping makes the value jump with the set of
/// kept segments, which an optimizer exploits by pushing segments out.
/// `skipped` still counts the left-out segments.
pub fn kessler_filled_loglik<T: Scalar>(theta: &ModelParams<T>, data: &TrajectorySet<T>) -> Result<Contrast<T>, TransitionError> {
    contrast_impl(Scheme::Kessler, theta.potential(), theta.gamma(), data, true)
}

fn contrast_impl<T: Scalar, F: DriftField<T> + ?Sized>(
    scheme: Scheme,
    field: &F,
    gamma: T,
    data: &TrajectorySet<T>,
    fill: bool,
) -> Result<Contrast<T>, TransitionError> {
    let mut value = T::zero();
    let mut skipped = 0usize;
    let mut segments = 0usize;
    for (i, seg) in data.segments().enumerate() {
        segments += 1;
        let term = match segment_term(scheme, field, &seg, gamma) {
            Ok(t) => t,
            Err(TransitionError::NonPsdCovariance) => {
                return Err(TransitionError::NonFiniteValue { segment: i })
            }
            Err(e) => return Err(e),
        };
        let v = match term {
            SegmentTerm::Value(v) => v,
            SegmentTerm::Fallback(v) => {
                skipped += 1;
                v
            }
            SegmentTerm::Skipped if fill => {
                skipped += 1;
                gaussian_logpdf(&euler_transition(field, seg.start, seg.dt, gamma), seg.end)
                    .map_err(|_| TransitionError::NonFiniteValue { segment: i })?
            }
            SegmentTerm::Skipped => {
                skipped += 1;
                continue;
            }
        };
        if !v.is_finite() {
            return Err(TransitionError::NonFiniteValue { segment: i });
        }
        value = value + v;
    }
    if segments == 0 {
        return Err(TransitionError::EmptyData);
    }
    Ok(Contrast {
        value,
        skipped,
        segments,
    })
}
