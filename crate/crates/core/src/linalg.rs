//! Fixed-size linear algebra for planar models.
//!
//! Everything here is generic over [`Scalar`] so the same kernels run in
//! `f32` or `f64`. Matrices are tiny (2×2 up to 5×5), stored inline, and
//! never allocate.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Floating-point scalar accepted by the numerical core.
pub trait Scalar: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only for non-representable
    /// inputs (never the case for the constants used in this crate).
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A point or displacement in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn to_array(self) -> [T; 2] {
        [self.x, self.y]
    }
}

impl<T: Scalar> From<[T; 2]> for Vec2<T> {
    fn from(a: [T; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> SubAssign for Vec2<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Serialize + Copy> Serialize for Vec2<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Vec2<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y] = <[T; 2]>::deserialize(d)?;
        Ok(Self { x, y })
    }
}

/// Row-major 2×2 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

/// Eigen-decomposition of a symmetric 2×2 matrix: `A = V diag(values) Vᵀ`,
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen2<T> {
    pub values: [T; 2],
    pub vectors: Mat2<T>,
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn symmetric(a: T, b: T, d: T) -> Self {
        Self::new(a, b, b, d)
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one())
    }

    pub fn diag(a: T, d: T) -> Self {
        Self::new(a, T::zero(), T::zero(), d)
    }

    pub fn outer(u: Vec2<T>, v: Vec2<T>) -> Self {
        Self::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn frobenius_sq(&self) -> T {
        self.m
            .iter()
            .flatten()
            .fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn symmetrize(&self) -> Self {
        let off = (self.m[0][1] + self.m[1][0]) * T::lit(0.5);
        Self::new(self.m[0][0], off, off, self.m[1][1])
    }

    pub fn is_symmetric(&self) -> bool {
        self.m[0][1] == self.m[1][0]
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: Vec2<T>) -> T {
        v.dot(self.mul_vec(v))
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let inv = T::one() / det;
        Some(Self::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    /// Closed-form eigen-decomposition of the symmetric part of `self`.
    ///
    /// Values are returned in descending order.
    pub fn sym_eigen(&self) -> SymEigen2<T> {
        let a = self.m[0][0];
        let b = (self.m[0][1] + self.m[1][0]) * T::lit(0.5);
        let d = self.m[1][1];
        let two = T::lit(2.0);
        let angle = (two * b).atan2(a - d) / two;
        let (s, c) = angle.sin_cos();
        let l1 = a * c * c + two * b * s * c + d * s * s;
        let l2 = a * s * s - two * b * s * c + d * c * c;
        let vectors = Mat2::new(c, -s, s, c);
        if l1 >= l2 {
            SymEigen2 {
                values: [l1, l2],
                vectors,
            }
        } else {
            SymEigen2 {
                values: [l2, l1],
                vectors: Mat2::new(-s, c, c, s),
            }
        }
    }

    /// Eigenvalues of the symmetric part, descending, via the discriminant
    /// formula.
    pub fn sym_eigenvalues(&self) -> [T; 2] {
        let a = self.m[0][0];
        let b = (self.m[0][1] + self.m[1][0]) * T::lit(0.5);
        let d = self.m[1][1];
        let half = T::lit(0.5);
        let mean = (a + d) * half;
        let r = ((a - d) * half).hypot(b);
        [mean + r, mean - r]
    }

    /// `R diag(f(λ₁), f(λ₂)) Rᵀ` for a symmetric eigen-decomposition.
    pub fn from_spectrum(eig: &SymEigen2<T>, f: impl Fn(T) -> T) -> Self {
        let v = eig.vectors;
        let f1 = f(eig.values[0]);
        let f2 = f(eig.values[1]);
        let (v11, v21) = (v.m[0][0], v.m[1][0]);
        let (v12, v22) = (v.m[0][1], v.m[1][1]);
        let a = f1 * v11 * v11 + f2 * v12 * v12;
        let b = f1 * v11 * v21 + f2 * v12 * v22;
        let d = f1 * v21 * v21 + f2 * v22 * v22;
        Self::symmetric(a, b, d)
    }

    /// Column-major stack `[a₁₁, a₂₁, a₁₂, a₂₂]`.
    pub fn vec(&self) -> [T; 4] {
        [self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1]]
    }

    pub fn unvec(v: [T; 4]) -> Self {
        Self::new(v[0], v[2], v[1], v[3])
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-T::one())
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl<T: Serialize + Copy> Serialize for Mat2<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.m.serialize(s)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Mat2<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self {
            m: <[[T; 2]; 2]>::deserialize(d)?,
        })
    }
}

/// Dense `N×N` matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareMatrix<T, const N: usize>(pub [[T; N]; N]);

impl<T: Scalar, const N: usize> SquareMatrix<T, N> {
    pub fn zero() -> Self {
        Self([[T::zero(); N]; N])
    }

    pub fn identity() -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            out.0[i][i] = T::one();
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|v| *v = *v * s);
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..N {
            for j in 0..N {
                out.0[i][j] = out.0[i][j] + o.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-T::one()))
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let mut out = Self::zero();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == T::zero() {
                    continue;
                }
                for j in 0..N {
                    out.0[i][j] = out.0[i][j] + a * o.0[k][j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T; N]) -> [T; N] {
        let mut out = [T::zero(); N];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row
                .iter()
                .zip(v.iter())
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        self.0
            .iter()
            .map(|row| row.iter().fold(T::zero(), |acc, v| acc + v.abs()))
            .fold(T::zero(), T::max)
    }

    /// Solves `self · X = rhs` by Gaussian elimination with partial
    /// pivoting. Returns `None` for a (numerically) singular system.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        let mut a = self.0;
        let mut b = rhs.0;
        for col in 0..N {
            let pivot = (col..N).max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[pivot][col] == T::zero() || !a[pivot][col].is_finite() {
                return None;
            }
            a.swap(col, pivot);
            b.swap(col, pivot);
            let inv = T::one() / a[col][col];
            for row in col + 1..N {
                let f = a[row][col] * inv;
                if f == T::zero() {
                    continue;
                }
                for k in col..N {
                    a[row][k] = a[row][k] - f * a[col][k];
                }
                for k in 0..N {
                    b[row][k] = b[row][k] - f * b[col][k];
                }
            }
        }
        let mut x = [[T::zero(); N]; N];
        for row in (0..N).rev() {
            for k in 0..N {
                let mut acc = b[row][k];
                for j in row + 1..N {
                    acc = acc - a[row][j] * x[j][k];
                }
                x[row][k] = acc / a[row][row];
            }
        }
        Some(Self(x))
    }

    /// Matrix exponential by scaling and squaring with a diagonal (6,6)
    /// Padé approximant.
    pub fn expm(&self) -> Self {
        const PADE6: [f64; 7] = [
            1.0,
            0.5,
            5.0 / 44.0,
            1.0 / 66.0,
            1.0 / 792.0,
            1.0 / 15_840.0,
            1.0 / 665_280.0,
        ];
        let norm = self.norm_inf();
        let mut squarings = 0i32;
        if norm > T::lit(0.5) {
            squarings = (norm / T::lit(0.5)).log2().ceil().to_i32().unwrap_or(0).max(0);
        }
        let x = self.scale(T::lit(0.5).powi(squarings));

        let mut power = Self::identity();
        let mut num = Self::identity();
        let mut den = Self::identity();
        for (k, &c) in PADE6.iter().enumerate().skip(1) {
            power = power.matmul(&x);
            let term = power.scale(T::lit(c));
            num = num.add(&term);
            den = if k % 2 == 0 { den.add(&term) } else { den.sub(&term) };
        }
        let mut e = match den.solve(&num) {
            Some(e) => e,
            None => return Self([[T::nan(); N]; N]),
        };
        for _ in 0..squarings {
            e = e.matmul(&e);
        }
        e
    }
}

impl<T: Scalar> From<Mat2<T>> for SquareMatrix<T, 2> {
    fn from(m: Mat2<T>) -> Self {
        Self(m.m)
    }
}

/// Kronecker sum `A ⊕ A = A ⊗ I₂ + I₂ ⊗ A`, acting on column-major `vec`.
pub fn kronecker_sum<T: Scalar>(a: &Mat2<T>) -> SquareMatrix<T, 4> {
    let mut out = SquareMatrix::<T, 4>::zero();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                // A ⊗ I
                out.0[2 * i + k][2 * j + k] = out.0[2 * i + k][2 * j + k] + a.m[i][j];
                // I ⊗ A
                out.0[2 * k + i][2 * k + j] = out.0[2 * k + i][2 * k + j] + a.m[i][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sym_eigen_reconstructs() {
        let a = Mat2::symmetric(2.0, -0.7, 0.3);
        let eig = a.sym_eigen();
        let back = Mat2::from_spectrum(&eig, |l| l);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(back.m[i][j], a.m[i][j], epsilon = 1e-14);
            }
        }
        let vals = a.sym_eigenvalues();
        assert_relative_eq!(vals[0], eig.values[0], epsilon = 1e-14);
        assert_relative_eq!(vals[1], eig.values[1], epsilon = 1e-14);
        assert!(vals[0] >= vals[1]);
    }

    #[test]
    fn sym_eigen_diagonal_input() {
        let eig = Mat2::diag(1.0, 3.0).sym_eigen();
        assert_eq!(eig.values, [3.0, 1.0]);
    }

    #[test]
    fn expm_diagonal_and_nilpotent() {
        let d = SquareMatrix([[1.0, 0.0], [0.0, -2.0]]);
        let e = d.expm();
        assert_relative_eq!(e.0[0][0], 1f64.exp(), max_relative = 1e-14);
        assert_relative_eq!(e.0[1][1], (-2f64).exp(), max_relative = 1e-14);

        let n = SquareMatrix([[0.0, 3.0], [0.0, 0.0]]);
        let e = n.expm();
        assert_relative_eq!(e.0[0][1], 3.0, max_relative = 1e-13);
        assert_relative_eq!(e.0[0][0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn expm_rotation_generator() {
        let t = 2.5f64;
        let r = SquareMatrix([[0.0, -t], [t, 0.0]]).expm();
        assert_relative_eq!(r.0[0][0], t.cos(), epsilon = 1e-13);
        assert_relative_eq!(r.0[1][0], t.sin(), epsilon = 1e-13);
    }

    #[test]
    fn kronecker_sum_matches_lyapunov_operator() {
        // (A ⊕ A) vec(X) = vec(A X + X Aᵀ)
        let a = Mat2::new(0.3, -1.2, 0.7, 2.0);
        let x = Mat2::new(1.0, 0.5, -0.25, 3.0);
        let lhs = kronecker_sum(&a).mul_vec(&x.vec());
        let rhs = (a * x + x * a.transpose()).vec();
        for k in 0..4 {
            assert_relative_eq!(lhs[k], rhs[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn solve_singular_is_none() {
        let a = SquareMatrix([[1.0, 2.0], [2.0, 4.0]]);
        assert!(a.solve(&SquareMatrix::identity()).is_none());
    }

    #[test]
    fn f32_kernels_agree_with_f64() {
        let a32 = Mat2::<f32>::symmetric(1.5, 0.25, -0.5);
        let a64 = Mat2::<f64>::symmetric(1.5, 0.25, -0.5);
        let e32 = SquareMatrix::from(a32).expm();
        let e64 = SquareMatrix::from(a64).expm();
        for i in 0..2 {
            for j in 0..2 {
                assert!((e32.0[i][j] as f64 - e64.0[i][j]).abs() < 1e-5);
            }
        }
    }
}
