//! Scalar-field abstraction shared by every shape function.
//!
//! The configurational measure and the shape-sphere scalars are written once
//! against [`Scalar`] and then evaluated on `f64`, complex numbers,
//! second-order jets (exact first and second partials) and truncated Laurent
//! series. Jets nest: `Jet2<Jet2<f64>>` yields third derivatives.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Field operations plus the handful of elementary functions the shape
/// formulas need.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Embeds a real constant.
    fn from_f64(x: f64) -> Self;

    /// Principal square root.
    fn sqrt(&self) -> Self;

    /// Real power, principal branch. Types that cannot represent a general
    /// power (Laurent series) panic on exponents they do not support.
    fn powf(&self, p: f64) -> Self;

    /// Magnitude of the value part, as a double. Used for diagnostics and
    /// zero tests, never for arithmetic.
    fn magnitude(&self) -> f64;

    fn recip(&self) -> Self {
        Self::from_f64(1.0) / self.clone()
    }

    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::from_f64(1.0);
        }
        let mut base = if n < 0 { self.recip() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a * base.clone(),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc.expect("nonzero exponent")
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::from_f64(c)
    }

    fn add_f64(&self, c: f64) -> Self {
        self.clone() + Self::from_f64(c)
    }
}

/// `x^(alpha/2)`, using exact integer/sqrt paths when `alpha` is an integer so
/// that series and complex evaluations stay on a well-defined branch.
pub fn half_power<S: Scalar>(x: &S, alpha: f64) -> S {
    if alpha.fract() == 0.0 && alpha.abs() < 1e6 {
        let a = alpha as i32;
        if a % 2 == 0 {
            x.powi(a / 2)
        } else {
            // a = 2k + 1 with k = (a - 1) / 2 (floor division)
            let k = (a - 1).div_euclid(2);
            x.sqrt() * x.powi(k)
        }
    } else {
        x.powf(alpha / 2.0)
    }
}

/// `x^(-alpha)`, exact for integer `alpha`.
pub fn neg_power<S: Scalar>(x: &S, alpha: f64) -> S {
    if alpha.fract() == 0.0 && alpha.abs() < 1e6 {
        x.powi(-(alpha as i32))
    } else {
        x.powf(-alpha)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn sqrt(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn powf(&self, p: f64) -> Self {
        Complex64::powf(*self, p)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn powi(&self, n: i32) -> Self {
        Complex64::powi(self, n)
    }
}

/// Second-order jet in two variables: value, gradient and the symmetric
/// Hessian `[xx, xy, yy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<S> {
    pub v: S,
    pub d: [S; 2],
    pub h: [S; 3],
}

impl<S: Scalar> Jet2<S> {
    pub fn constant(v: S) -> Self {
        let z = S::from_f64(0.0);
        Jet2 { v, d: [z.clone(), z.clone()], h: [z.clone(), z.clone(), z] }
    }

    /// Independent variable number `index` (0 or 1) at `v`.
    pub fn variable(v: S, index: usize) -> Self {
        let mut j = Self::constant(v);
        j.d[index] = S::from_f64(1.0);
        j
    }

    /// Seeds both chart coordinates.
    pub fn pair(u: S, w: S) -> (Self, Self) {
        (Self::variable(u, 0), Self::variable(w, 1))
    }

    /// Hessian entry for (i, j).
    pub fn hess(&self, i: usize, j: usize) -> &S {
        &self.h[i + j]
    }

    /// Applies a scalar function given its value, first and second
    /// derivative at `self.v`.
    fn chain(&self, f0: S, f1: S, f2: S) -> Self {
        let d = [f1.clone() * self.d[0].clone(), f1.clone() * self.d[1].clone()];
        let h = [
            f1.clone() * self.h[0].clone() + f2.clone() * self.d[0].clone() * self.d[0].clone(),
            f1.clone() * self.h[1].clone() + f2.clone() * self.d[0].clone() * self.d[1].clone(),
            f1 * self.h[2].clone() + f2 * self.d[1].clone() * self.d[1].clone(),
        ];
        Jet2 { v: f0, d, h }
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let [d0, d1] = self.d;
        let [e0, e1] = o.d;
        let [h0, h1, h2] = self.h;
        let [k0, k1, k2] = o.h;
        Jet2 { v: self.v + o.v, d: [d0 + e0, d1 + e1], h: [h0 + k0, h1 + k1, h2 + k2] }
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let [d0, d1] = self.d;
        let [e0, e1] = o.d;
        let [h0, h1, h2] = self.h;
        let [k0, k1, k2] = o.h;
        Jet2 { v: self.v - o.v, d: [d0 - e0, d1 - e1], h: [h0 - k0, h1 - k1, h2 - k2] }
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        let [d0, d1] = self.d;
        let [h0, h1, h2] = self.h;
        Jet2 { v: -self.v, d: [-d0, -d1], h: [-h0, -h1, -h2] }
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self;
        let b = &o;
        let d = [
            a.v.clone() * b.d[0].clone() + a.d[0].clone() * b.v.clone(),
            a.v.clone() * b.d[1].clone() + a.d[1].clone() * b.v.clone(),
        ];
        let hij = |k: usize, i: usize, j: usize| {
            a.v.clone() * b.h[k].clone()
                + a.h[k].clone() * b.v.clone()
                + a.d[i].clone() * b.d[j].clone()
                + a.d[j].clone() * b.d[i].clone()
        };
        let h = [hij(0, 0, 0), hij(1, 0, 1), hij(2, 1, 1)];
        Jet2 { v: a.v.clone() * b.v.clone(), d, h }
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<S: Scalar> Scalar for Jet2<S> {
    fn from_f64(x: f64) -> Self {
        Jet2::constant(S::from_f64(x))
    }

    fn sqrt(&self) -> Self {
        let f0 = self.v.sqrt();
        let f1 = (f0.clone() * S::from_f64(2.0)).recip();
        let f2 = -(f1.clone() / (self.v.clone() * S::from_f64(2.0)));
        self.chain(f0, f1, f2)
    }

    fn powf(&self, p: f64) -> Self {
        let f0 = self.v.powf(p);
        let f1 = self.v.powf(p - 1.0).scale(p);
        let f2 = self.v.powf(p - 2.0).scale(p * (p - 1.0));
        self.chain(f0, f1, f2)
    }

    fn powi(&self, n: i32) -> Self {
        match n {
            0 => Self::from_f64(1.0),
            1 => self.clone(),
            2 => self.clone() * self.clone(),
            _ => {
                let f0 = self.v.powi(n);
                let f1 = self.v.powi(n - 1).scale(n as f64);
                let f2 = self.v.powi(n - 2).scale((n * (n - 1)) as f64);
                self.chain(f0, f1, f2)
            }
        }
    }

    fn recip(&self) -> Self {
        let f0 = self.v.recip();
        let f1 = -(f0.clone() * f0.clone());
        let f2 = (f0.clone() * f0.clone() * f0.clone()).scale(2.0);
        self.chain(f0, f1, f2)
    }

    fn magnitude(&self) -> f64 {
        self.v.magnitude()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: S, y: S) -> S {
        // x^3 y / (1 + x^2 + y^2) + sqrt(2 + x y)
        let num = x.powi(3) * y.clone();
        let den = (x.square() + y.square()).add_f64(1.0);
        num / den + (x * y).add_f64(2.0).sqrt()
    }

    #[test]
    fn jet_matches_finite_differences() {
        let (x0, y0) = (0.7, -0.4);
        let (jx, jy) = Jet2::pair(x0, y0);
        let j = f(jx, jy);
        let h = 1e-4;
        let fd_x = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
        let fd_y = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
        let fd_xx = (f(x0 + h, y0) - 2.0 * f(x0, y0) + f(x0 - h, y0)) / (h * h);
        let fd_xy = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h)
            + f(x0 - h, y0 - h))
            / (4.0 * h * h);
        let fd_yy = (f(x0, y0 + h) - 2.0 * f(x0, y0) + f(x0, y0 - h)) / (h * h);
        assert!((j.v - f(x0, y0)).abs() < 1e-15);
        assert!((j.d[0] - fd_x).abs() < 1e-7);
        assert!((j.d[1] - fd_y).abs() < 1e-7);
        assert!((j.h[0] - fd_xx).abs() < 1e-5);
        assert!((j.h[1] - fd_xy).abs() < 1e-5);
        assert!((j.h[2] - fd_yy).abs() < 1e-5);
    }

    #[test]
    fn nested_jets_give_third_derivatives() {
        // d^3/dx^3 of x^5 at 1.3 is 60 x^2
        let x = Jet2::variable(Jet2::variable(1.3_f64, 0), 0);
        let y = x.powi(5);
        // outer hessian xx, inner derivative x
        assert!((y.h[0].d[0] - 60.0 * 1.3 * 1.3).abs() < 1e-10);
    }

    #[test]
    fn half_power_odd_alpha_uses_sqrt() {
        let x = Complex64::new(-4.0, 0.0);
        let p = half_power(&x, 1.0);
        assert!((p - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let q = half_power(&9.0_f64, 3.0);
        assert!((q - 27.0).abs() < 1e-12);
        let r = half_power(&9.0_f64, -1.0);
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn powi_negative_and_positive() {
        assert!((Scalar::powi(&2.0_f64, -3) - 0.125).abs() < 1e-15);
        let j = Jet2::variable(2.0_f64, 0);
        let p = j.powi(-2);
        assert!((p.d[0] + 2.0 / 8.0).abs() < 1e-15);
        assert!((p.h[0] - 6.0 / 16.0).abs() < 1e-15);
    }
}
