//! Gaussian-mixture potential surfaces and their differential calculus.
//!
//! The potential is `P(x) = Σ_k π_k exp(-½ (x-μ_k)ᵀ C_k (x-μ_k))` with
//! positive weights summing to one, centers `μ_k` and symmetric positive
//! definite information matrices `C_k`. The movement drift is `∇P`.
//!
//! For the unit-diffusion (Lamperti) coordinates `y = x / γ` the module also
//! provides `α(y) = ∇P(γy)/γ`, its antiderivative `H(y) = P(γy)/γ²`, the
//! Laplacian `ΔH(y)`, and closed-form bounds on `‖α‖²` and `ΔH` that make
//! exact rejection sampling possible.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{Mat2, Scalar, Vec2};

/// Tolerance on the smallest eigenvalue of an information matrix.
pub const MIN_INFORMATION_EIGENVALUE: f64 = 1e-10;

/// Weights whose sum is within this distance of one are kept verbatim.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("mixture needs at least one component")]
    Empty,
    #[error("component {index}: weight must be positive and finite, got {weight}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("component {index}: center is not finite")]
    NonFiniteCenter { index: usize },
    #[error("component {index}: information matrix is not symmetric")]
    AsymmetricInformation { index: usize },
    #[error("component {index}: information matrix is not positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { index: usize, min_eigenvalue: f64 },
    #[error("free weights must sum to less than one, got {0}")]
    FreeWeightsTooLarge(f64),
    #[error("diffusion coefficient must be positive and finite, got {0}")]
    InvalidGamma(f64),
}

/// One attractive zone: weight, center and information matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent<T> {
    weight: T,
    center: Vec2<T>,
    information: Mat2<T>,
}

impl<T: Scalar> GaussianComponent<T> {
    pub fn new(weight: T, center: Vec2<T>, information: Mat2<T>) -> Result<Self, PotentialError> {
        Self::validated(0, weight, center, information)
    }

    fn validated(
        index: usize,
        weight: T,
        center: Vec2<T>,
        information: Mat2<T>,
    ) -> Result<Self, PotentialError> {
        let w = weight.to_f64().unwrap_or(f64::NAN);
        if !(w > 0.0 && w.is_finite()) {
            return Err(PotentialError::InvalidWeight { index, weight: w });
        }
        if !center.is_finite() {
            return Err(PotentialError::NonFiniteCenter { index });
        }
        if !information.is_symmetric() {
            return Err(PotentialError::AsymmetricInformation { index });
        }
        let min_eig = information.sym_eigenvalues()[1].to_f64().unwrap_or(f64::NAN);
        if !information.is_finite() || !(min_eig > MIN_INFORMATION_EIGENVALUE) {
            return Err(PotentialError::NotPositiveDefinite {
                index,
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self {
            weight,
            center,
            information,
        })
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn center(&self) -> Vec2<T> {
        self.center
    }

    pub fn information(&self) -> Mat2<T> {
        self.information
    }

    /// Largest eigenvalue of the information matrix.
    pub fn max_eigenvalue(&self) -> T {
        self.information.sym_eigenvalues()[0]
    }

    /// Unweighted shape `exp(-½ (x-μ)ᵀ C (x-μ))`.
    pub fn shape(&self, x: Vec2<T>) -> T {
        (-T::lit(0.5) * self.information.quad_form(x - self.center)).exp()
    }
}

/// Local derivatives of the potential at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialDerivatives<T> {
    pub value: T,
    pub gradient: Vec2<T>,
    pub hessian: Mat2<T>,
}

/// Weighted sum of Gaussian-shaped bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePotential<T> {
    components: Vec<GaussianComponent<T>>,
}

impl<T: Scalar> MixturePotential<T> {
    /// Builds a mixture, rescaling the weights to sum to one unless they
    /// already do within [`WEIGHT_SUM_TOLERANCE`].
    pub fn new(components: Vec<GaussianComponent<T>>) -> Result<Self, PotentialError> {
        if components.is_empty() {
            return Err(PotentialError::Empty);
        }
        let total = components.iter().fold(T::zero(), |acc, c| acc + c.weight);
        let mut components = components;
        if (total - T::one()).abs() > T::lit(WEIGHT_SUM_TOLERANCE) {
            for c in &mut components {
                c.weight = c.weight / total;
            }
        }
        Ok(Self { components })
    }

    /// Builds a mixture from `K-1` free weights; the last weight is
    /// `1 - Σ free`.
    pub fn from_free_weights(
        free_weights: &[T],
        centers: &[Vec2<T>],
        informations: &[Mat2<T>],
    ) -> Result<Self, PotentialError> {
        let k = centers.len();
        if k == 0 {
            return Err(PotentialError::Empty);
        }
        assert_eq!(free_weights.len() + 1, k, "need K-1 free weights");
        assert_eq!(informations.len(), k, "need K information matrices");
        let used = free_weights.iter().fold(T::zero(), |acc, &w| acc + w);
        if used >= T::one() {
            return Err(PotentialError::FreeWeightsTooLarge(
                used.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let weights = free_weights.iter().copied().chain(std::iter::once(T::one() - used));
        let components = weights
            .zip(centers.iter().zip(informations))
            .enumerate()
            .map(|(i, (w, (&mu, &c)))| GaussianComponent::validated(i, w, mu, c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    /// Builds a mixture from parallel arrays of (unnormalized) weights,
    /// centers and information matrices.
    pub fn from_parts(
        weights: &[T],
        centers: &[Vec2<T>],
        informations: &[Mat2<T>],
    ) -> Result<Self, PotentialError> {
        assert_eq!(weights.len(), centers.len());
        assert_eq!(weights.len(), informations.len());
        let components = weights
            .iter()
            .zip(centers.iter().zip(informations))
            .enumerate()
            .map(|(i, (&w, (&mu, &c)))| GaussianComponent::validated(i, w, mu, c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// `π̄ = Σ π_k`; equal to one up to rounding.
    pub fn weight_sum(&self) -> T {
        self.components.iter().fold(T::zero(), |acc, c| acc + c.weight)
    }

    /// Same mixture with every center shifted by `v`.
    pub fn translated(&self, v: Vec2<T>) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| GaussianComponent {
                    center: c.center + v,
                    ..*c
                })
                .collect(),
        }
    }

    /// Same mixture with components sorted by `(center.x, center.y)`.
    pub fn canonicalized(&self) -> Self {
        let mut components = self.components.clone();
        components.sort_by(|a, b| {
            a.center
                .x
                .partial_cmp(&b.center.x)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(
                    a.center
                        .y
                        .partial_cmp(&b.center.y)
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
        });
        Self { components }
    }

    /// `P(x)`.
    pub fn value(&self, x: Vec2<T>) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, c| acc + c.weight * c.shape(x))
    }

    /// Drift `∇P(x) = -Σ π_k φ_k(x) C_k (x-μ_k)`.
    pub fn drift(&self, x: Vec2<T>) -> Vec2<T> {
        self.components.iter().fold(Vec2::zero(), |acc, c| {
            let z = x - c.center;
            let cz = c.information.mul_vec(z);
            let e = c.weight * (-T::lit(0.5) * z.dot(cz)).exp();
            acc - cz.scale(e)
        })
    }

    /// Jacobian of the drift, i.e. the Hessian of `P`:
    /// `Σ π_k φ_k(x) [C_k z zᵀ C_k - C_k]` with `z = x - μ_k`.
    pub fn drift_jacobian(&self, x: Vec2<T>) -> Mat2<T> {
        self.derivatives(x).hessian
    }

    /// Value, gradient and Hessian in one pass.
    pub fn derivatives(&self, x: Vec2<T>) -> PotentialDerivatives<T> {
        let mut value = T::zero();
        let mut gradient = Vec2::zero();
        let (mut h11, mut h12, mut h22) = (T::zero(), T::zero(), T::zero());
        for c in &self.components {
            let z = x - c.center;
            let cz = c.information.mul_vec(z);
            let e = c.weight * (-T::lit(0.5) * z.dot(cz)).exp();
            value = value + e;
            gradient -= cz.scale(e);
            let info = &c.information.m;
            h11 = h11 + e * (cz.x * cz.x - info[0][0]);
            h12 = h12 + e * (cz.x * cz.y - info[0][1]);
            h22 = h22 + e * (cz.y * cz.y - info[1][1]);
        }
        PotentialDerivatives {
            value,
            gradient,
            hessian: Mat2::symmetric(h11, h12, h22),
        }
    }

    /// Drift and trace of its Jacobian, without forming the full Hessian.
    pub fn drift_and_laplacian(&self, x: Vec2<T>) -> (Vec2<T>, T) {
        let mut gradient = Vec2::zero();
        let mut laplacian = T::zero();
        for c in &self.components {
            let z = x - c.center;
            let cz = c.information.mul_vec(z);
            let e = c.weight * (-T::lit(0.5) * z.dot(cz)).exp();
            gradient -= cz.scale(e);
            laplacian = laplacian + e * (cz.norm_sq() - c.information.trace());
        }
        (gradient, laplacian)
    }
}

/// Full model parameters: potential plus scalar diffusion coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    potential: MixturePotential<T>,
    gamma: T,
}

/// Constants bounding the Girsanov integrand of the unit-diffusion process.
///
/// `m_lower ≤ ‖α‖² + ΔH ≤ m_upper` everywhere, and `rate = (m_upper - m_lower)/2`
/// bounds `φ = (‖α‖² + ΔH - m_lower)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EaBounds<T> {
    /// Upper bound on `‖α(y)‖²`.
    pub alpha_sq_upper: T,
    /// Lower bound on `ΔH(y)`; never positive.
    pub lap_lower: T,
    /// Upper bound on `ΔH(y)`; never negative.
    pub lap_upper: T,
    pub m_lower: T,
    pub m_upper: T,
    pub rate: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(potential: MixturePotential<T>, gamma: T) -> Result<Self, PotentialError> {
        let g = gamma.to_f64().unwrap_or(f64::NAN);
        if !(g > 0.0 && g.is_finite()) {
            return Err(PotentialError::InvalidGamma(g));
        }
        Ok(Self { potential, gamma })
    }

    pub fn potential(&self) -> &MixturePotential<T> {
        &self.potential
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: T) -> Result<Self, PotentialError> {
        Self::new(self.potential.clone(), gamma)
    }

    pub fn with_potential(&self, potential: MixturePotential<T>) -> Self {
        Self {
            potential,
            gamma: self.gamma,
        }
    }

    pub fn canonicalized(&self) -> Self {
        self.with_potential(self.potential.canonicalized())
    }

    /// `α(y) = ∇P(γy)/γ`.
    pub fn lamperti_drift(&self, y: Vec2<T>) -> Vec2<T> {
        self.potential.drift(y.scale(self.gamma)).scale(T::one() / self.gamma)
    }

    /// `H(y) = P(γy)/γ²`, so that `∇H = α`.
    pub fn h_value(&self, y: Vec2<T>) -> T {
        self.potential.value(y.scale(self.gamma)) / (self.gamma * self.gamma)
    }

    /// `ΔH(y) = tr ∇α(y) = tr ∇²P(γy)`.
    pub fn laplacian_h(&self, y: Vec2<T>) -> T {
        self.potential.drift_and_laplacian(y.scale(self.gamma)).1
    }

    /// `(α(y), ΔH(y))` in one pass.
    pub fn lamperti_terms(&self, y: Vec2<T>) -> (Vec2<T>, T) {
        let (drift, lap) = self.potential.drift_and_laplacian(y.scale(self.gamma));
        (drift.scale(T::one() / self.gamma), lap)
    }

    /// `‖α(y)‖² + ΔH(y)`, the Girsanov integrand.
    pub fn girsanov_integrand(&self, y: Vec2<T>) -> T {
        let (alpha, lap) = self.lamperti_terms(y);
        alpha.norm_sq() + lap
    }

    /// Supremum of `H`: each shape is at most one and the weights sum to
    /// `π̄`.
    pub fn h_upper(&self) -> T {
        self.potential.weight_sum() / (self.gamma * self.gamma)
    }

    /// Closed-form bounds on `‖α‖²` and `ΔH`.
    pub fn ea_bounds(&self) -> EaBounds<T> {
        let inv_e = (-T::one()).exp();
        let pi_bar = self.potential.weight_sum();
        let mut weighted_max_eig = T::zero();
        let mut weighted_trace = T::zero();
        for c in self.potential.components() {
            weighted_max_eig = weighted_max_eig + c.weight * c.max_eigenvalue();
            weighted_trace = weighted_trace + c.weight * c.information.trace();
        }
        let alpha_sq_upper = inv_e / (self.gamma * self.gamma) * pi_bar * weighted_max_eig;
        let lap_lower = -weighted_trace;
        let lap_upper = T::lit(2.0) * inv_e * weighted_max_eig;
        let m_lower = lap_lower;
        let m_upper = alpha_sq_upper + lap_upper;
        EaBounds {
            alpha_sq_upper,
            lap_lower,
            lap_upper,
            m_lower,
            m_upper,
            rate: (m_upper - m_lower) * T::lit(0.5),
        }
    }

    /// `φ(y) = (‖α(y)‖² + ΔH(y) - m)/2`, clamped to `[0, rate]`.
    pub fn phi(&self, bounds: &EaBounds<T>, y: Vec2<T>) -> T {
        let raw = (self.girsanov_integrand(y) - bounds.m_lower) * T::lit(0.5);
        raw.max(T::zero()).min(bounds.rate)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
struct ComponentRecord<T> {
    weight: T,
    center: Vec2<T>,
    information: Mat2<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
struct ParamsRecord<T> {
    gamma: T,
    components: Vec<ComponentRecord<T>>,
}

impl<T: Scalar + Serialize> Serialize for ModelParams<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ParamsRecord {
            gamma: self.gamma,
            components: self
                .potential
                .components
                .iter()
                .map(|c| ComponentRecord {
                    weight: c.weight,
                    center: c.center,
                    information: c.information,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for ModelParams<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = ParamsRecord::<T>::deserialize(d)?;
        let components = rec
            .components
            .into_iter()
            .enumerate()
            .map(|(i, c)| GaussianComponent::validated(i, c.weight, c.center, c.information))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        let potential = MixturePotential::new(components).map_err(D::Error::custom)?;
        ModelParams::new(potential, rec.gamma).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn standard() -> ModelParams<f64> {
        let p = MixturePotential::from_parts(&[1.0], &[Vec2::zero()], &[Mat2::identity()]).unwrap();
        ModelParams::new(p, 1.0).unwrap()
    }

    fn two_bumps() -> MixturePotential<f64> {
        MixturePotential::from_parts(
            &[0.5, 0.5],
            &[Vec2::zero(), Vec2::new(4.0, 0.0)],
            &[Mat2::identity(), Mat2::identity()],
        )
        .unwrap()
    }

    #[test]
    fn value_examples() {
        let th = standard();
        let p = th.potential();
        assert_eq!(p.value(Vec2::zero()), 1.0);
        assert_relative_eq!(p.value(Vec2::new(1.0, 0.0)), (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(
            two_bumps().value(Vec2::zero()),
            0.5 + 0.5 * (-8.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn drift_examples() {
        let th = standard();
        let p = th.potential();
        assert_eq!(p.drift(Vec2::zero()), Vec2::zero());
        let d = p.drift(Vec2::new(1.0, 0.0));
        assert_relative_eq!(d.x, -0.606_530_659_712_633_4, max_relative = 1e-12);
        assert_eq!(d.y, 0.0);
    }

    #[test]
    fn jacobian_examples() {
        let th = standard();
        let j = th.potential().drift_jacobian(Vec2::zero());
        assert_eq!(j, Mat2::diag(-1.0, -1.0));
        let j = th.potential().drift_jacobian(Vec2::new(1.0, 0.0));
        assert!(j.m[0][0].abs() < 1e-15);
        assert_relative_eq!(j.m[1][1], -(-0.5f64).exp(), max_relative = 1e-12);
        assert!(j.is_symmetric());
    }

    #[test]
    fn lamperti_examples() {
        let th = standard().with_gamma(2.0).unwrap();
        let a = th.lamperti_drift(Vec2::new(0.5, 0.0));
        assert_relative_eq!(a.x, -0.303_265_329_856_316_7, max_relative = 1e-12);
        assert_relative_eq!(th.h_value(Vec2::new(0.5, 0.0)), 0.151_632_664_928_158_35, max_relative = 1e-12);
        // ∇H = α by central differences.
        let y = Vec2::new(0.3, -0.2);
        let e = 1e-6;
        let gx = (th.h_value(y + Vec2::new(e, 0.0)) - th.h_value(y - Vec2::new(e, 0.0))) / (2.0 * e);
        let gy = (th.h_value(y + Vec2::new(0.0, e)) - th.h_value(y - Vec2::new(0.0, e))) / (2.0 * e);
        let a = th.lamperti_drift(y);
        assert_relative_eq!(gx, a.x, max_relative = 1e-7);
        assert_relative_eq!(gy, a.y, max_relative = 1e-7);
        let th1 = standard();
        assert_eq!(th1.h_value(Vec2::zero()), 1.0);
        assert_eq!(th1.laplacian_h(Vec2::zero()), -2.0);
        assert_relative_eq!(th1.laplacian_h(Vec2::new(1.0, 0.0)), -(-0.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn bounds_standard_case() {
        let b = standard().ea_bounds();
        let inv_e = (-1.0f64).exp();
        assert_relative_eq!(b.alpha_sq_upper, inv_e, max_relative = 1e-15);
        assert_eq!(b.lap_lower, -2.0);
        assert_relative_eq!(b.lap_upper, 2.0 * inv_e, max_relative = 1e-15);
        assert_relative_eq!(b.rate, 1.0 + 1.5 * (-1.0f64).exp(), max_relative = 1e-12);
        assert_eq!(b.m_lower, b.lap_lower);

        let b2 = standard().with_gamma(2.0).unwrap().ea_bounds();
        assert_relative_eq!(b2.alpha_sq_upper, b.alpha_sq_upper / 4.0, max_relative = 1e-15);
        assert_eq!(b2.lap_lower, b.lap_lower);
        assert_eq!(b2.lap_upper, b.lap_upper);
    }

    #[test]
    fn phi_examples() {
        let th = standard();
        let b = th.ea_bounds();
        assert_eq!(th.phi(&b, Vec2::zero()), 0.0);
        let e = (-0.5f64).exp();
        assert_relative_eq!(
            th.phi(&b, Vec2::new(1.0, 0.0)),
            (e * e - e + 2.0) / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn weights_are_normalized() {
        let p = MixturePotential::from_parts(
            &[2.0, 6.0],
            &[Vec2::zero(), Vec2::new(1.0, 1.0)],
            &[Mat2::identity(), Mat2::identity()],
        )
        .unwrap();
        assert_relative_eq!(p.components()[0].weight(), 0.25);
        assert_relative_eq!(p.weight_sum(), 1.0, epsilon = 1e-12);

        let q = MixturePotential::from_free_weights(
            &[0.3],
            &[Vec2::zero(), Vec2::new(1.0, 1.0)],
            &[Mat2::identity(), Mat2::identity()],
        )
        .unwrap();
        assert_relative_eq!(q.components()[1].weight(), 0.7);
    }

    #[test]
    fn rejects_invalid_components() {
        let bad_sym = GaussianComponent::new(1.0, Vec2::zero(), Mat2::new(1.0, 0.1, 0.2, 1.0));
        assert_eq!(bad_sym, Err(PotentialError::AsymmetricInformation { index: 0 }));
        let indefinite = GaussianComponent::new(1.0, Vec2::zero(), Mat2::symmetric(1.0, 2.0, 1.0));
        assert!(matches!(indefinite, Err(PotentialError::NotPositiveDefinite { .. })));
        let zero_w = GaussianComponent::new(0.0, Vec2::zero(), Mat2::identity());
        assert!(matches!(zero_w, Err(PotentialError::InvalidWeight { .. })));
        assert_eq!(MixturePotential::<f64>::new(vec![]), Err(PotentialError::Empty));
        let p = standard().potential().clone();
        assert!(matches!(ModelParams::new(p, -1.0), Err(PotentialError::InvalidGamma(_))));
    }

    #[test]
    fn json_schema_is_fixed() {
        let th = standard();
        let s = serde_json::to_string(&th).unwrap();
        assert_eq!(
            s,
            r#"{"gamma":1.0,"components":[{"weight":1.0,"center":[0.0,0.0],"information":[[1.0,0.0],[0.0,1.0]]}]}"#
        );
        let back: ModelParams<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, th);
        let unknown = r#"{"gamma":1.0,"sigma":2,"components":[]}"#;
        assert!(serde_json::from_str::<ModelParams<f64>>(unknown).is_err());
        let indefinite = r#"{"gamma":1.0,"components":[{"weight":1.0,"center":[0,0],"information":[[1.0,2.0],[2.0,1.0]]}]}"#;
        assert!(serde_json::from_str::<ModelParams<f64>>(indefinite).is_err());
    }

    #[test]
    fn canonical_order_sorts_centers() {
        let p = MixturePotential::from_parts(
            &[0.5, 0.5],
            &[Vec2::new(4.0, 0.0), Vec2::new(-1.0, 3.0)],
            &[Mat2::identity(), Mat2::diag(2.0, 1.0)],
        )
        .unwrap();
        let c = p.canonicalized();
        assert_eq!(c.components()[0].center(), Vec2::new(-1.0, 3.0));
        let x = Vec2::new(0.3, 0.7);
        assert_relative_eq!(c.value(x), p.value(x), max_relative = 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let p = MixturePotential::<f32>::from_parts(&[1.0], &[Vec2::zero()], &[Mat2::identity()]).unwrap();
        let th = ModelParams::new(p, 1.0f32).unwrap();
        assert!((th.potential().value(Vec2::new(1.0, 0.0)) - 0.606_530_7).abs() < 1e-6);
        assert!((th.ea_bounds().rate - 1.551_819_2).abs() < 1e-5);
    }
}
