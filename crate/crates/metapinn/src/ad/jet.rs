//! Forward-mode second-order jets.
//!
//! A [`Jet2`] carries a value plus first and pure second directional
//! derivatives along `D` probed input coordinates. Arithmetic follows the
//! truncated second-order Taylor rules exactly, e.g. for products
//! `(a·b).dd_i = a.dd_i·b.v + 2·a.d_i·b.d_i + a.v·b.dd_i`.
//!
//! Mixed second derivatives are not carried: the residual operators in scope
//! need only Laplacians (sums of pure seconds) and `∂²/∂x²`.
//!
//! The scalar type is generic: with `S = f64` this is plain forward-mode;
//! with `S = Var` every coefficient is a tape node, so a loss built from jet
//! coefficients stays differentiable with respect to parameters.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::num::Real;

#[derive(Clone, Copy, Debug)]
pub struct Jet2<S, const D: usize> {
    pub v: S,
    pub d: [S; D],
    pub dd: [S; D],
}

impl<S: Real, const D: usize> Jet2<S, D> {
    pub fn constant(v: S) -> Self {
        Jet2 {
            v,
            d: [S::zero(); D],
            dd: [S::zero(); D],
        }
    }

    /// Input coordinate seeded along direction `i`: d_i = 1, all else 0.
    pub fn seeded(v: S, i: usize) -> Self {
        let mut d = [S::zero(); D];
        d[i] = S::one();
        Jet2 {
            v,
            d,
            dd: [S::zero(); D],
        }
    }

    fn map(self, v: S, first: S, second: S) -> Self {
        // f(u): d_i = f'(u) u.d_i ; dd_i = f'(u) u.dd_i + f''(u) u.d_i².
        let mut d = [S::zero(); D];
        let mut dd = [S::zero(); D];
        for i in 0..D {
            d[i] = first * self.d[i];
            dd[i] = first * self.dd[i] + second * self.d[i] * self.d[i];
        }
        Jet2 { v, d, dd }
    }

    pub fn scale(self, c: S) -> Self {
        let mut d = self.d;
        let mut dd = self.dd;
        for i in 0..D {
            d[i] = c * d[i];
            dd[i] = c * dd[i];
        }
        Jet2 {
            v: c * self.v,
            d,
            dd,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.map(s, c, -s)
    }
    pub fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.map(c, -s, -c)
    }
    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.map(e, e, e)
    }
    pub fn ln(self) -> Self {
        let inv = S::one() / self.v;
        self.map(self.v.ln(), inv, -(inv * inv))
    }
    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let first = S::from_f64(0.5) / s;
        let second = -(S::from_f64(0.25) / (s * self.v));
        self.map(s, first, second)
    }
    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let sech2 = S::one() - t * t;
        self.map(t, sech2, S::from_f64(-2.0) * t * sech2)
    }
    pub fn powi(self, n: i32) -> Self {
        let nf = S::from_f64(f64::from(n));
        let n1 = S::from_f64(f64::from(n) * f64::from(n - 1));
        self.map(self.v.powi(n), nf * self.v.powi(n - 1), n1 * self.v.powi(n - 2))
    }
}

impl<S: Real, const D: usize> Add for Jet2<S, D> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut d = self.d;
        let mut dd = self.dd;
        for i in 0..D {
            d[i] = d[i] + rhs.d[i];
            dd[i] = dd[i] + rhs.dd[i];
        }
        Jet2 {
            v: self.v + rhs.v,
            d,
            dd,
        }
    }
}
impl<S: Real, const D: usize> Sub for Jet2<S, D> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut d = self.d;
        let mut dd = self.dd;
        for i in 0..D {
            d[i] = d[i] - rhs.d[i];
            dd[i] = dd[i] - rhs.dd[i];
        }
        Jet2 {
            v: self.v - rhs.v,
            d,
            dd,
        }
    }
}
impl<S: Real, const D: usize> Mul for Jet2<S, D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let two = S::from_f64(2.0);
        let mut d = [S::zero(); D];
        let mut dd = [S::zero(); D];
        for i in 0..D {
            d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
            dd[i] = self.dd[i] * rhs.v + two * self.d[i] * rhs.d[i] + self.v * rhs.dd[i];
        }
        Jet2 {
            v: self.v * rhs.v,
            d,
            dd,
        }
    }
}
impl<S: Real, const D: usize> Div for Jet2<S, D> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // q = a/b: q.d = (a.d − q b.d)/b ; q.dd = (a.dd − 2 q.d b.d − q b.dd)/b.
        let q = self.v / rhs.v;
        let two = S::from_f64(2.0);
        let mut d = [S::zero(); D];
        let mut dd = [S::zero(); D];
        for i in 0..D {
            d[i] = (self.d[i] - q * rhs.d[i]) / rhs.v;
            dd[i] = (self.dd[i] - two * d[i] * rhs.d[i] - q * rhs.dd[i]) / rhs.v;
        }
        Jet2 { v: q, d, dd }
    }
}
impl<S: Real, const D: usize> Neg for Jet2<S, D> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut d = self.d;
        let mut dd = self.dd;
        for i in 0..D {
            d[i] = -d[i];
            dd[i] = -dd[i];
        }
        Jet2 {
            v: -self.v,
            d,
            dd,
        }
    }
}

/// Seed one jet per input coordinate: coordinate `i` is probed along
/// direction `i`.
pub fn seed_jets<S: Real, const D: usize>(point: &[S]) -> Vec<Jet2<S, D>> {
    assert_eq!(point.len(), D, "seed_jets: point length must equal D");
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| Jet2::seeded(x, i))
        .collect()
}

/// Value, gradient component, and pure second derivative of each output of a
/// forward map along each input coordinate.
pub fn spatial_jet<S: Real, const D: usize, F>(forward: F, point: &[S]) -> Vec<Jet2<S, D>>
where
    F: FnOnce(&[Jet2<S, D>]) -> Vec<Jet2<S, D>>,
{
    forward(&seed_jets(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_jet() {
        let out = spatial_jet::<f64, 1, _>(|xs| vec![xs[0]], &[1.7]);
        assert_eq!(out[0].v, 1.7);
        assert_eq!(out[0].d[0], 1.0);
        assert_eq!(out[0].dd[0], 0.0);
    }

    #[test]
    fn sin_3x_at_zero() {
        let out = spatial_jet::<f64, 1, _>(
            |xs| vec![xs[0].scale(3.0).sin()],
            &[0.0],
        );
        assert_eq!(out[0].v, 0.0);
        assert_eq!(out[0].d[0], 3.0);
        assert_eq!(out[0].dd[0], 0.0);
    }

    #[test]
    fn composition_matches_finite_differences() {
        // f(g(x, y)) with g = x·exp(y) + sin(x·y), f = tanh(u)/(u² + 1/2) + √(u²+2)
        let g = |x: f64, y: f64| x * y.exp() + (x * y).sin();
        let f = |u: f64| u.tanh() / (u * u + 0.5) + (u * u + 2.0).sqrt();
        let comp = |x: f64, y: f64| f(g(x, y));

        let jcomp = |xs: &[Jet2<f64, 2>]| {
            let half = Jet2::constant(0.5);
            let two = Jet2::constant(2.0);
            let u = xs[0] * xs[1].exp() + (xs[0] * xs[1]).sin();
            vec![u.tanh() / (u * u + half) + (u * u + two).sqrt()]
        };

        let pts = [(0.3, -0.4), (1.1, 0.2), (-0.7, 0.9), (0.05, 1.3)];
        for (x, y) in pts {
            let out = spatial_jet::<f64, 2, _>(jcomp, &[x, y]);
            let h = 1e-4;
            let fd_x = (comp(x + h, y) - comp(x - h, y)) / (2.0 * h);
            let fd_y = (comp(x, y + h) - comp(x, y - h)) / (2.0 * h);
            let fdd_x = (comp(x + h, y) - 2.0 * comp(x, y) + comp(x - h, y)) / (h * h);
            let fdd_y = (comp(x, y + h) - 2.0 * comp(x, y) + comp(x, y - h)) / (h * h);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            assert!(rel(out[0].d[0], fd_x) <= 1e-4, "d0 at ({x},{y})");
            assert!(rel(out[0].d[1], fd_y) <= 1e-4, "d1 at ({x},{y})");
            assert!(rel(out[0].dd[0], fdd_x) <= 1e-4, "dd0 at ({x},{y})");
            assert!(rel(out[0].dd[1], fdd_y) <= 1e-4, "dd1 at ({x},{y})");
        }
    }

    #[test]
    fn product_rule_second_order_exact() {
        // (a·b).dd against the closed form on quadratics where jets are exact.
        let f = |xs: &[Jet2<f64, 1>]| {
            let a = xs[0] * xs[0]; // x²: d=2x, dd=2
            let b = xs[0] * xs[0] * xs[0]; // x³: d=3x², dd=6x
            vec![a * b] // x⁵: d=5x⁴, dd=20x³
        };
        let x = 1.3;
        let out = spatial_jet::<f64, 1, _>(f, &[x]);
        assert!((out[0].d[0] - 5.0 * x.powi(4)).abs() < 1e-12);
        assert!((out[0].dd[0] - 20.0 * x.powi(3)).abs() < 1e-12);
    }
}
