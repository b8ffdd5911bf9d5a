//! Scalar abstraction shared by every differentiation route.
//!
//! Network forwards, residual operators, and closed-form reference fields are
//! written once, generic over [`Real`]. Instantiations:
//!
//! - `f64` — plain evaluation,
//! - [`Dual`] — one forward tangent (used for exact Hessian-vector products),
//! - [`Tan<R, M>`] — M tangents over a base scalar (residual partials),
//! - [`crate::ad::Var`] — a node on the reverse-mode tape.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// A differentiable scalar. The arithmetic must follow exact forward
/// propagation rules so that every instantiation agrees with `f64` on values.
pub trait Real:
    Copy
    + Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Primal value, used for branching and diagnostics only.
    fn val(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn sq(self) -> Self {
        self * self
    }
    /// Left-fold sum from zero. The tape overrides this with an n-ary node;
    /// the accumulation order is identical either way.
    fn sum_slice(xs: &[Self]) -> Self {
        let mut acc = Self::zero();
        for &x in xs {
            acc = acc + x;
        }
        acc
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn val(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// First-order dual number: value plus one tangent.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub dx: f64,
}

impl Dual {
    pub fn new(re: f64, dx: f64) -> Self {
        Dual { re, dx }
    }
    pub fn constant(re: f64) -> Self {
        Dual { re, dx: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.re + rhs.re, self.dx + rhs.dx)
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.re - rhs.re, self.dx - rhs.dx)
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.re * rhs.re, self.dx * rhs.re + self.re * rhs.dx)
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let q = self.re / rhs.re;
        Dual::new(q, (self.dx - q * rhs.dx) / rhs.re)
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.dx)
    }
}

impl Real for Dual {
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    fn val(self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.re.cos() * self.dx)
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.re.sin() * self.dx)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.dx)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.dx / self.re)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.dx / (2.0 * s))
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual::new(t, (1.0 - t * t) * self.dx)
    }
    fn powi(self, n: i32) -> Self {
        Dual::new(
            self.re.powi(n),
            f64::from(n) * self.re.powi(n - 1) * self.dx,
        )
    }
}

/// Value plus `M` independent tangents over a base scalar `R`.
///
/// `Tan<f64, M>` differentiates a cheap scalar function with respect to M
/// inputs in one pass; `Tan<Dual, M>` carries those partials through a second
/// tangent direction.
#[derive(Clone, Copy, Debug)]
pub struct Tan<R: Real, const M: usize> {
    pub v: R,
    pub t: [R; M],
}

impl<R: Real, const M: usize> Tan<R, M> {
    pub fn constant(v: R) -> Self {
        Tan {
            v,
            t: [R::zero(); M],
        }
    }
    /// Input seeded with tangent slot `i`.
    pub fn seeded(v: R, i: usize) -> Self {
        let mut t = [R::zero(); M];
        t[i] = R::one();
        Tan { v, t }
    }
}

impl<R: Real, const M: usize> Add for Tan<R, M> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut t = self.t;
        for (a, b) in t.iter_mut().zip(rhs.t) {
            *a = *a + b;
        }
        Tan { v: self.v + rhs.v, t }
    }
}
impl<R: Real, const M: usize> Sub for Tan<R, M> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut t = self.t;
        for (a, b) in t.iter_mut().zip(rhs.t) {
            *a = *a - b;
        }
        Tan { v: self.v - rhs.v, t }
    }
}
impl<R: Real, const M: usize> Mul for Tan<R, M> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut t = [R::zero(); M];
        for i in 0..M {
            t[i] = self.t[i] * rhs.v + self.v * rhs.t[i];
        }
        Tan { v: self.v * rhs.v, t }
    }
}
impl<R: Real, const M: usize> Div for Tan<R, M> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.v / rhs.v;
        let mut t = [R::zero(); M];
        for i in 0..M {
            t[i] = (self.t[i] - q * rhs.t[i]) / rhs.v;
        }
        Tan { v: q, t }
    }
}
impl<R: Real, const M: usize> Neg for Tan<R, M> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut t = self.t;
        for a in t.iter_mut() {
            *a = -*a;
        }
        Tan { v: -self.v, t }
    }
}

impl<R: Real, const M: usize> Tan<R, M> {
    fn chain(self, v: R, dv: R) -> Self {
        let mut t = self.t;
        for a in t.iter_mut() {
            *a = dv * *a;
        }
        Tan { v, t }
    }
}

impl<R: Real, const M: usize> Real for Tan<R, M> {
    fn from_f64(x: f64) -> Self {
        Tan::constant(R::from_f64(x))
    }
    fn val(self) -> f64 {
        self.v.val()
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), R::one() / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, R::one() / (R::from_f64(2.0) * s))
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, R::one() - t * t)
    }
    fn powi(self, n: i32) -> Self {
        self.chain(
            self.v.powi(n),
            R::from_f64(f64::from(n)) * self.v.powi(n - 1),
        )
    }
}
