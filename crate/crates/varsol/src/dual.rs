//! Forward-mode dual numbers used for gradients and Hessians of the
//! averaged action, and for derivative checks on polynomial evaluation.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Ring operations shared by every value a polynomial can be evaluated in:
/// plain floats, dual numbers, and the trial-function term algebra.
pub trait Algebra:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;

    fn a_zero() -> Self {
        Self::from_f64(0.0)
    }

    fn a_one() -> Self {
        Self::from_f64(1.0)
    }
}

/// Scalar values: floats and dual numbers. Adds division and the analytic
/// functions needed by the closed-form Gaussian moments.
pub trait Scalar: Algebra + Copy + Div<Output = Self> {
    /// Plain value, derivatives stripped.
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;

    fn recip(self) -> Self {
        Self::a_one() / self
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::a_one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Algebra for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order dual number over `N` independent variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grad<const N: usize> {
    pub val: f64,
    pub d: [f64; N],
}

impl<const N: usize> Grad<N> {
    pub fn constant(val: f64) -> Self {
        Self { val, d: [0.0; N] }
    }

    /// Seed the `i`-th independent variable with unit tangent.
    pub fn var(val: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { val, d }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = df * self.d[i];
        }
        Self { val: f, d }
    }
}

impl<const N: usize> Add for Grad<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] + rhs.d[i];
        }
        Self { val: self.val + rhs.val, d }
    }
}

impl<const N: usize> Sub for Grad<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] - rhs.d[i];
        }
        Self { val: self.val - rhs.val, d }
    }
}

impl<const N: usize> Mul for Grad<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.val * rhs.d[i] + self.d[i] * rhs.val;
        }
        Self { val: self.val * rhs.val, d }
    }
}

impl<const N: usize> Neg for Grad<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = -self.d[i];
        }
        Self { val: -self.val, d }
    }
}

impl<const N: usize> Div for Grad<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.val.recip();
        self * rhs.chain(inv, -inv * inv)
    }
}

impl<const N: usize> Algebra for Grad<N> {
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }
}

impl<const N: usize> Scalar for Grad<N> {
    fn value(&self) -> f64 {
        self.val
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e)
    }

    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.chain(r, 0.5 / r)
    }
}

/// Second-order dual number over `N` independent variables: value, gradient
/// and full (symmetric) Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hess<const N: usize> {
    pub val: f64,
    pub d: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Hess<N> {
    pub fn constant(val: f64) -> Self {
        Self { val, d: [0.0; N], h: [[0.0; N]; N] }
    }

    pub fn var(val: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { val, d, h: [[0.0; N]; N] }
    }

    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        let mut d = [0.0; N];
        let mut h = [[0.0; N]; N];
        for i in 0..N {
            d[i] = df * self.d[i];
            for j in 0..N {
                h[i][j] = df * self.h[i][j] + ddf * self.d[i] * self.d[j];
            }
        }
        Self { val: f, d, h }
    }
}

impl<const N: usize> Add for Hess<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        out.val += rhs.val;
        for i in 0..N {
            out.d[i] += rhs.d[i];
            for j in 0..N {
                out.h[i][j] += rhs.h[i][j];
            }
        }
        out
    }
}

impl<const N: usize> Sub for Hess<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        out.val -= rhs.val;
        for i in 0..N {
            out.d[i] -= rhs.d[i];
            for j in 0..N {
                out.h[i][j] -= rhs.h[i][j];
            }
        }
        out
    }
}

impl<const N: usize> Mul for Hess<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        let mut h = [[0.0; N]; N];
        for i in 0..N {
            d[i] = self.val * rhs.d[i] + self.d[i] * rhs.val;
            for j in 0..N {
                h[i][j] = self.val * rhs.h[i][j]
                    + self.d[i] * rhs.d[j]
                    + self.d[j] * rhs.d[i]
                    + self.h[i][j] * rhs.val;
            }
        }
        Self { val: self.val * rhs.val, d, h }
    }
}

impl<const N: usize> Neg for Hess<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        out.val = -out.val;
        for i in 0..N {
            out.d[i] = -out.d[i];
            for j in 0..N {
                out.h[i][j] = -out.h[i][j];
            }
        }
        out
    }
}

impl<const N: usize> Div for Hess<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.val.recip();
        self * rhs.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl<const N: usize> Algebra for Hess<N> {
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }
}

impl<const N: usize> Scalar for Hess<N> {
    fn value(&self) -> f64 {
        self.val
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }

    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (self.val * r))
    }
}
