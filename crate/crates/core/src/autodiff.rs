//! Forward-mode automatic differentiation.
//!
//! Two number types share the [`Real`] trait with `f64`:
//!
//! - [`Dual`] carries a value and an `N`-slot gradient. The per-triangle
//!   curvature kernel is evaluated with `Dual<9>` (three corners, three
//!   coordinates each) to obtain the exact derivative of the discrete energy.
//! - [`Jet2`] carries a value, gradient and Hessian with respect to two
//!   parameters. It is generic over its scalar, so `Jet2<Jet2<f64>>` yields
//!   derivatives up to fourth order, which the analytic surface oracle needs
//!   for the Laplacian of the mean curvature.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Scalar arithmetic needed by the generic geometry kernels.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    fn cst(v: f64) -> Self;
    /// Underlying `f64` value, used for branching.
    fn val(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// First-order dual number with `N` tangent directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Independent variable seeded along direction `slot`.
    pub fn var(v: f64, slot: usize) -> Self {
        let mut d = [0.0; N];
        d[slot] = 1.0;
        Self { v, d }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= df;
        }
        Self { v: f, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Self { v: self.v * rhs.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let q = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - q * rhs.d[i]) * inv;
        }
        Self { v: q, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.v, -1.0)
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Sub<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.chain(self.v * rhs, rhs)
    }
}

impl<const N: usize> Div<f64> for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self * (1.0 / rhs)
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> Real for Dual<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
}

/// Second-order jet in two variables `(s, t)`.
///
/// `h` stores the symmetric Hessian as `[ss, st, tt]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub d: [T; 2],
    pub h: [T; 3],
}

impl<T: Real> Jet2<T> {
    pub fn constant(v: T) -> Self {
        let z = T::zero();
        Self { v, d: [z, z], h: [z, z, z] }
    }

    /// Independent variable number `slot` (0 or 1).
    pub fn var(v: T, slot: usize) -> Self {
        let mut j = Self::constant(v);
        j.d[slot] = T::cst(1.0);
        j
    }

    /// Apply a scalar function given its value and first two derivatives.
    #[inline]
    fn compose(self, f: T, df: T, ddf: T) -> Self {
        let [a, b] = self.d;
        Self {
            v: f,
            d: [df * a, df * b],
            h: [
                ddf * a * a + df * self.h[0],
                ddf * a * b + df * self.h[1],
                ddf * b * b + df * self.h[2],
            ],
        }
    }

    /// Derivative along parameter `i`.
    pub fn dx(&self, i: usize) -> T {
        self.d[i]
    }

    /// Second derivative along parameters `i`, `j`.
    pub fn dxx(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (0, 0) => self.h[0],
            (1, 1) => self.h[2],
            _ => self.h[1],
        }
    }
}

impl<T: Real> Add for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(self, r: Self) -> Self {
        Self {
            v: self.v + r.v,
            d: [self.d[0] + r.d[0], self.d[1] + r.d[1]],
            h: [self.h[0] + r.h[0], self.h[1] + r.h[1], self.h[2] + r.h[2]],
        }
    }
}

impl<T: Real> Sub for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, r: Self) -> Self {
        Self {
            v: self.v - r.v,
            d: [self.d[0] - r.d[0], self.d[1] - r.d[1]],
            h: [self.h[0] - r.h[0], self.h[1] - r.h[1], self.h[2] - r.h[2]],
        }
    }
}

impl<T: Real> Mul for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, r: Self) -> Self {
        let (f, g) = (self, r);
        Self {
            v: f.v * g.v,
            d: [f.d[0] * g.v + f.v * g.d[0], f.d[1] * g.v + f.v * g.d[1]],
            h: [
                f.h[0] * g.v + f.d[0] * g.d[0] * 2.0 + f.v * g.h[0],
                f.h[1] * g.v + f.d[0] * g.d[1] + f.d[1] * g.d[0] + f.v * g.h[1],
                f.h[2] * g.v + f.d[1] * g.d[1] * 2.0 + f.v * g.h[2],
            ],
        }
    }
}

impl<T: Real> Div for Jet2<T> {
    type Output = Self;
    #[inline]
    fn div(self, r: Self) -> Self {
        let inv = r.v.recip();
        let rec = r.compose(inv, -(inv * inv), inv * inv * inv * 2.0);
        self * rec
    }
}

impl<T: Real> Neg for Jet2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<T: Real> Add<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(mut self, r: f64) -> Self {
        self.v = self.v + r;
        self
    }
}

impl<T: Real> Sub<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(mut self, r: f64) -> Self {
        self.v = self.v - r;
        self
    }
}

impl<T: Real> Mul<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, r: f64) -> Self {
        Self {
            v: self.v * r,
            d: [self.d[0] * r, self.d[1] * r],
            h: [self.h[0] * r, self.h[1] * r, self.h[2] * r],
        }
    }
}

impl<T: Real> Div<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn div(self, r: f64) -> Self {
        self * (1.0 / r)
    }
}

impl<T: Real> AddAssign for Jet2<T> {
    #[inline]
    fn add_assign(&mut self, r: Self) {
        *self = *self + r;
    }
}

impl<T: Real> SubAssign for Jet2<T> {
    #[inline]
    fn sub_assign(&mut self, r: Self) {
        *self = *self - r;
    }
}

impl<T: Real> Real for Jet2<T> {
    fn cst(v: f64) -> Self {
        Self::constant(T::cst(v))
    }
    fn val(&self) -> f64 {
        self.v.val()
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let ds = (s * 2.0).recip();
        // d²/dx² sqrt(x) = -1/(4 x^{3/2})
        let dds = -(ds / self.v) * 0.5;
        self.compose(s, ds, dds)
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(c, -s, -c)
    }
}

/// Small fixed-size vector helpers over any [`Real`].
pub mod v3 {
    use super::Real;

    pub type V3<T> = [T; 3];

    #[inline]
    pub fn sub<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    #[inline]
    pub fn add<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    #[inline]
    pub fn scale<T: Real>(a: V3<T>, s: T) -> V3<T> {
        [a[0] * s, a[1] * s, a[2] * s]
    }

    #[inline]
    pub fn dot<T: Real>(a: V3<T>, b: V3<T>) -> T {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[inline]
    pub fn cross<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    #[inline]
    pub fn norm<T: Real>(a: V3<T>) -> T {
        dot(a, a).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<T: Real>(x: T, y: T) -> T {
        (x * x * y + x.sin()) / (y * y + 1.0) + (x * y + 2.0).sqrt() * y.cos()
    }

    #[test]
    fn dual_matches_central_differences() {
        let (x, y) = (0.7, -0.3);
        let xd = Dual::<2>::var(x, 0);
        let yd = Dual::<2>::var(y, 1);
        let r = f(xd, yd);
        let h = 1e-6;
        let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        assert!((r.v - f(x, y)).abs() < 1e-15);
        assert!((r.d[0] - fx).abs() < 1e-8);
        assert!((r.d[1] - fy).abs() < 1e-8);
    }

    #[test]
    fn jet_hessian_matches_differences() {
        let (x, y) = (0.4, 0.9);
        let j = f(Jet2::<f64>::var(x, 0), Jet2::var(y, 1));
        let h = 1e-4;
        let fxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        let fyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
        let fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h))
            / (4.0 * h * h);
        assert!((j.h[0] - fxx).abs() < 1e-5);
        assert!((j.h[1] - fxy).abs() < 1e-5);
        assert!((j.h[2] - fyy).abs() < 1e-5);
    }

    #[test]
    fn nested_jet_gives_third_derivative() {
        // d³/dx³ sin(x) = -cos(x)
        let x = 0.3;
        let inner = Jet2::<f64>::var(x, 0);
        let mut outer = Jet2::<Jet2<f64>>::constant(inner);
        outer.d[0] = Jet2::cst(1.0);
        let s = outer.sin();
        // s.h[0] is the inner jet of f''; its derivative is f'''.
        assert!((s.h[0].d[0] + x.cos()).abs() < 1e-14);
        assert!((s.h[0].h[0] - x.sin()).abs() < 1e-14);
    }
}
