//! Truncated Laurent series `sum_k c_k rho^k` with explicit error order.
//!
//! A series stores its coefficients from `min_pow` upward together with a
//! `cutoff`: the value is known up to `O(rho^cutoff)`. Exact polynomials
//! (constants, `rho`, their products) carry no cutoff. Truncation orders
//! propagate through arithmetic, so every result states how many of its
//! coefficients are trustworthy.
//!
//! Additions and products zero a coefficient that cancels to within a few
//! ulps of its operands' magnitudes; the unsnapped variants
//! [`LaurentSeries::add_exact`] and [`LaurentSeries::sub_exact`] keep the
//! residue so that vanishing coefficients can be measured.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mp::{precision_bits, MpComplex};
use crate::scalar::Scalar;

/// Relative order used when inverting an exact multi-term polynomial.
pub const DEFAULT_RELATIVE_ORDER: i32 = 32;

const EXACT: i32 = i32::MAX;

fn sat_add(a: i32, b: i32) -> i32 {
    if a == EXACT || b == EXACT {
        EXACT
    } else {
        a + b
    }
}

/// Coefficient field of a series.
pub trait Coefficient: Scalar {
    fn is_zero(&self) -> bool;

    /// Relative size below which a cancellation is treated as exact.
    fn snap_eps() -> f64;

    fn to_c64(&self) -> Complex64;
}

impl Coefficient for Complex64 {
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn snap_eps() -> f64 {
        f64::EPSILON * 64.0
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
}

impl Coefficient for MpComplex {
    fn is_zero(&self) -> bool {
        MpComplex::is_zero(self)
    }
    fn snap_eps() -> f64 {
        2f64.powi(16 - precision_bits() as i32)
    }
    fn to_c64(&self) -> Complex64 {
        MpComplex::to_c64(self)
    }
}

#[derive(Clone, PartialEq)]
pub struct LaurentSeries<T> {
    min_pow: i32,
    coeffs: Vec<T>,
    cutoff: i32,
}

impl<T: Coefficient> LaurentSeries<T> {
    fn normalized(mut min_pow: i32, mut coeffs: Vec<T>, cutoff: i32) -> Self {
        let lead = coeffs.iter().position(|c| !c.is_zero()).unwrap_or(coeffs.len());
        coeffs.drain(..lead);
        min_pow += lead as i32;
        if cutoff == EXACT {
            while coeffs.last().is_some_and(|c| c.is_zero()) {
                coeffs.pop();
            }
        } else {
            let keep = (cutoff - min_pow).max(0) as usize;
            coeffs.truncate(keep);
        }
        if coeffs.is_empty() {
            min_pow = if cutoff == EXACT { 0 } else { cutoff };
        }
        LaurentSeries { min_pow, coeffs, cutoff }
    }

    /// Builds `sum coeffs[i] rho^(min_pow + i)`, exact when `cutoff` is `None`.
    pub fn from_coeffs(min_pow: i32, coeffs: Vec<T>, cutoff: Option<i32>) -> Self {
        Self::normalized(min_pow, coeffs, cutoff.unwrap_or(EXACT))
    }

    pub fn zero() -> Self {
        LaurentSeries { min_pow: 0, coeffs: Vec::new(), cutoff: EXACT }
    }

    pub fn constant(c: T) -> Self {
        Self::normalized(0, vec![c], EXACT)
    }

    /// Exact monomial `c rho^k`.
    pub fn monomial(c: T, k: i32) -> Self {
        Self::normalized(k, vec![c], EXACT)
    }

    /// The expansion variable `rho`.
    pub fn variable() -> Self {
        Self::monomial(T::from_f64(1.0), 1)
    }

    pub fn is_exact(&self) -> bool {
        self.cutoff == EXACT
    }

    /// Error order: the series is known up to `O(rho^cutoff)`.
    pub fn cutoff(&self) -> Option<i32> {
        (self.cutoff != EXACT).then_some(self.cutoff)
    }

    /// Exponent and coefficient of the first nonzero term.
    pub fn leading(&self) -> Option<(i32, &T)> {
        self.coeffs.first().map(|c| (self.min_pow, c))
    }

    pub fn leading_exponent(&self) -> Option<i32> {
        self.leading().map(|(k, _)| k)
    }

    /// Number of reliable terms from the leading one up to the cutoff.
    pub fn valid_terms(&self) -> Option<i32> {
        match (self.leading_exponent(), self.cutoff()) {
            (Some(k), Some(c)) => Some(c - k),
            _ => None,
        }
    }

    /// Coefficient of `rho^k`, or `None` past the cutoff.
    pub fn coeff(&self, k: i32) -> Option<T> {
        if k >= self.cutoff {
            return None;
        }
        let i = k - self.min_pow;
        if i < 0 || i as usize >= self.coeffs.len() {
            Some(T::from_f64(0.0))
        } else {
            Some(self.coeffs[i as usize].clone())
        }
    }

    /// Iterator over stored `(exponent, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (i32, &T)> {
        self.coeffs.iter().enumerate().map(move |(i, c)| (self.min_pow + i as i32, c))
    }

    /// Truncates to `O(rho^cutoff)` (never extends the known order).
    pub fn with_cutoff(&self, cutoff: i32) -> Self {
        Self::normalized(self.min_pow, self.coeffs.clone(), cutoff.min(self.cutoff))
    }

    /// Term-wise derivative `d/d rho`.
    pub fn derivative(&self) -> Self {
        let coeffs = self.terms().map(|(k, c)| c.scale(k as f64)).collect();
        let cutoff = if self.cutoff == EXACT { EXACT } else { self.cutoff - 1 };
        Self::normalized(self.min_pow - 1, coeffs, cutoff)
    }

    /// Evaluates the stored terms at `rho`.
    pub fn eval(&self, rho: &T) -> T {
        let mut acc = T::from_f64(0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * rho.clone() + c.clone();
        }
        acc * rho.powi(self.min_pow)
    }

    fn combine(&self, other: &Self, sign: f64, snap: bool) -> Self {
        let cutoff = self.cutoff.min(other.cutoff);
        let lo = match (self.coeffs.is_empty(), other.coeffs.is_empty()) {
            (true, true) => return Self::normalized(cutoff, Vec::new(), cutoff),
            (false, true) => self.min_pow,
            (true, false) => other.min_pow,
            (false, false) => self.min_pow.min(other.min_pow),
        };
        let end = |s: &Self| s.min_pow + s.coeffs.len() as i32;
        let hi = end(self).max(end(other)).min(cutoff);
        let eps = T::snap_eps();
        let mut out = Vec::with_capacity((hi - lo).max(0) as usize);
        for k in lo..hi {
            let a = self.stored(k);
            let b = other.stored(k);
            let c = match (a, b) {
                (Some(a), Some(b)) => {
                    let b = if sign < 0.0 { -b.clone() } else { b.clone() };
                    let s = a.clone() + b.clone();
                    if snap && s.magnitude() <= eps * a.magnitude().max(b.magnitude()) {
                        T::from_f64(0.0)
                    } else {
                        s
                    }
                }
                (Some(a), None) => a.clone(),
                (None, Some(b)) => {
                    if sign < 0.0 {
                        -b.clone()
                    } else {
                        b.clone()
                    }
                }
                (None, None) => T::from_f64(0.0),
            };
            out.push(c);
        }
        Self::normalized(lo, out, cutoff)
    }

    fn stored(&self, k: i32) -> Option<&T> {
        let i = k - self.min_pow;
        if i < 0 {
            None
        } else {
            self.coeffs.get(i as usize)
        }
    }

    /// Sum without cancellation snapping.
    pub fn add_exact(&self, other: &Self) -> Self {
        self.combine(other, 1.0, false)
    }

    /// Difference without cancellation snapping.
    pub fn sub_exact(&self, other: &Self) -> Self {
        self.combine(other, -1.0, false)
    }

    fn product(&self, other: &Self) -> Self {
        if (self.is_exact() && self.coeffs.is_empty()) || (other.is_exact() && other.coeffs.is_empty()) {
            return Self::zero();
        }
        let ka = self.leading_exponent().unwrap_or(self.cutoff);
        let kb = other.leading_exponent().unwrap_or(other.cutoff);
        let cutoff = sat_add(ka, other.cutoff).min(sat_add(kb, self.cutoff));
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::normalized(cutoff, Vec::new(), cutoff);
        }
        let lo = ka + kb;
        let full = (self.coeffs.len() + other.coeffs.len() - 1) as i32;
        let n = if cutoff == EXACT { full } else { (cutoff - lo).min(full) }.max(0) as usize;
        let ma: Vec<f64> = self.coeffs.iter().map(|c| c.magnitude()).collect();
        let mb: Vec<f64> = other.coeffs.iter().map(|c| c.magnitude()).collect();
        let eps = T::snap_eps();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let i0 = k.saturating_sub(other.coeffs.len() - 1);
            let i1 = k.min(self.coeffs.len() - 1);
            let mut acc = T::from_f64(0.0);
            let mut biggest = 0.0f64;
            for i in i0..=i1 {
                let j = k - i;
                acc = acc + self.coeffs[i].clone() * other.coeffs[j].clone();
                biggest = biggest.max(ma[i] * mb[j]);
            }
            if i1 > i0 && acc.magnitude() <= eps * biggest {
                acc = T::from_f64(0.0);
            }
            out.push(acc);
        }
        Self::normalized(lo, out, cutoff)
    }

    fn relative_order(&self) -> i32 {
        if self.cutoff != EXACT {
            self.cutoff - self.min_pow
        } else if self.coeffs.len() == 1 {
            EXACT
        } else {
            DEFAULT_RELATIVE_ORDER
        }
    }

    /// Multiplicative inverse; fails on a series with no known nonzero term.
    pub fn try_recip(&self) -> Result<Self> {
        let (k, a0) = self.leading().ok_or(Error::DivideByZeroSeries)?;
        let rel = self.relative_order();
        let inv0 = a0.recip();
        if rel == EXACT {
            return Ok(Self::normalized(-k, vec![inv0], EXACT));
        }
        let n = rel as usize;
        let mut out: Vec<T> = Vec::with_capacity(n);
        out.push(inv0.clone());
        for m in 1..n {
            let mut acc = T::from_f64(0.0);
            for i in 1..=m.min(self.coeffs.len() - 1) {
                acc = acc + self.coeffs[i].clone() * out[m - i].clone();
            }
            out.push(-(acc * inv0.clone()));
        }
        Ok(Self::normalized(-k, out, -k + rel))
    }

    /// Principal square root; needs an even leading exponent.
    pub fn try_sqrt(&self) -> Result<Self> {
        let Some((k, a0)) = self.leading() else {
            // sqrt(O(rho^c)) = O(rho^{c/2})
            return Ok(if self.is_exact() { Self::zero() } else { Self::normalized(0, Vec::new(), self.cutoff.div_euclid(2)) });
        };
        if k % 2 != 0 {
            return Err(Error::SqrtBranch(k));
        }
        let rel = self.relative_order();
        let s0 = a0.sqrt();
        if rel == EXACT {
            return Ok(Self::normalized(k / 2, vec![s0], EXACT));
        }
        let n = rel as usize;
        let two_s0_inv = s0.scale(2.0).recip();
        let mut out: Vec<T> = Vec::with_capacity(n);
        out.push(s0);
        for m in 1..n {
            let mut acc = self.coeffs.get(m).cloned().unwrap_or_else(|| T::from_f64(0.0));
            for i in 1..m {
                acc = acc - out[i].clone() * out[m - i].clone();
            }
            out.push(acc * two_s0_inv.clone());
        }
        Ok(Self::normalized(k / 2, out, k / 2 + rel))
    }

    /// Coefficients as doubles, for reporting.
    pub fn to_c64_terms(&self) -> Vec<(i32, Complex64)> {
        self.terms().map(|(k, c)| (k, c.to_c64())).collect()
    }
}

impl<T: Coefficient> fmt::Debug for LaurentSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let z = c.to_c64();
            write!(f, "({:e}{:+e}i) rho^{k}", z.re, z.im)?;
        }
        if first {
            write!(f, "0")?;
        }
        if let Some(c) = self.cutoff() {
            write!(f, " + O(rho^{c})")?;
        }
        Ok(())
    }
}

impl<T: Coefficient> Add for LaurentSeries<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.combine(&o, 1.0, true)
    }
}

impl<T: Coefficient> Sub for LaurentSeries<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.combine(&o, -1.0, true)
    }
}

impl<T: Coefficient> Mul for LaurentSeries<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.product(&o)
    }
}

/// # Panics
///
/// Panics when the divisor has no known nonzero term; use
/// [`LaurentSeries::try_recip`] to handle that case.
impl<T: Coefficient> Div for LaurentSeries<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self.product(&o.try_recip().expect("division by a zero series"))
    }
}

impl<T: Coefficient> Neg for LaurentSeries<T> {
    type Output = Self;
    fn neg(self) -> Self {
        LaurentSeries { min_pow: self.min_pow, coeffs: self.coeffs.into_iter().map(|c| -c).collect(), cutoff: self.cutoff }
    }
}

/// Series as a scalar field.
///
/// # Panics
///
/// `sqrt` panics on an odd leading exponent, `recip` on a zero series and
/// `powf` on exponents that are not integers or half-integers. The fallible
/// forms are [`LaurentSeries::try_sqrt`] and [`LaurentSeries::try_recip`].
impl<T: Coefficient> Scalar for LaurentSeries<T> {
    fn from_f64(x: f64) -> Self {
        Self::constant(T::from_f64(x))
    }

    fn sqrt(&self) -> Self {
        self.try_sqrt().expect("series square root")
    }

    fn powf(&self, p: f64) -> Self {
        let twice = 2.0 * p;
        assert!(twice.fract() == 0.0, "series powers must be integers or half-integers");
        let n = twice as i32;
        if n % 2 == 0 {
            self.powi(n / 2)
        } else {
            self.sqrt() * self.powi((n - 1).div_euclid(2))
        }
    }

    fn magnitude(&self) -> f64 {
        self.leading().map_or(0.0, |(_, c)| c.magnitude())
    }

    fn recip(&self) -> Self {
        self.try_recip().expect("reciprocal of a zero series")
    }

    fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        LaurentSeries { min_pow: self.min_pow, coeffs: self.coeffs.iter().map(|x| x.scale(c)).collect(), cutoff: self.cutoff }
    }

    fn add_f64(&self, c: f64) -> Self {
        self.clone() + Self::from_f64(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type S = LaurentSeries<Complex64>;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rho() -> S {
        S::variable()
    }

    fn one() -> S {
        S::from_f64(1.0)
    }

    #[test]
    fn product_of_binomials() {
        let p = (one() + rho()) * (one() - rho());
        assert!(p.is_exact());
        assert_eq!((p.coeff(0), p.coeff(1), p.coeff(2), p.coeff(3)), (Some(c(1.0)), Some(c(0.0)), Some(c(-1.0)), Some(c(0.0))));
    }

    #[test]
    fn sqrt_of_square() {
        let a = one() + rho().scale(2.0) + rho() * rho();
        let s = a.sqrt();
        assert_eq!(s.coeff(0), Some(c(1.0)));
        assert_eq!(s.coeff(1), Some(c(1.0)));
        for k in 2..DEFAULT_RELATIVE_ORDER {
            assert!(s.coeff(k).unwrap().norm() < 1e-12);
        }
        assert_eq!(s.cutoff(), Some(DEFAULT_RELATIVE_ORDER));
    }

    #[test]
    fn geometric_series() {
        let g = (rho() * (one() - rho())).recip();
        assert_eq!(g.leading_exponent(), Some(-1));
        for k in -1..20 {
            assert!((g.coeff(k).unwrap() - c(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(rho().try_sqrt(), Err(Error::SqrtBranch(1))));
        assert!(matches!(S::zero().try_recip(), Err(Error::DivideByZeroSeries)));
        let vanished = S::from_coeffs(0, vec![], Some(3));
        assert!(matches!(vanished.try_recip(), Err(Error::DivideByZeroSeries)));
    }

    #[test]
    fn cutoff_bookkeeping() {
        // (1 + rho + O(rho^3)) * rho^-2 -> known to O(rho^1)
        let a = S::from_coeffs(0, vec![c(1.0), c(1.0), c(0.0)], Some(3));
        let b = S::monomial(c(1.0), -2);
        let p = a.clone() * b;
        assert_eq!(p.cutoff(), Some(1));
        let r = a.recip();
        assert_eq!(r.cutoff(), Some(3));
        assert_eq!(r.coeff(2), Some(c(1.0)));
        assert_eq!(r.coeff(3), None);
        let d = a.derivative();
        assert_eq!((d.coeff(0), d.cutoff()), (Some(c(1.0)), Some(2)));
    }

    #[test]
    fn snapping_and_exact_residue() {
        let a = S::from_coeffs(0, vec![c(1.0), c(0.1 + 0.2)], Some(4));
        let b = S::from_coeffs(0, vec![c(1.0), c(0.3)], Some(4));
        let snapped = a.clone() - b.clone();
        assert_eq!(snapped.leading_exponent(), None);
        let raw = a.sub_exact(&b);
        assert_eq!(raw.leading_exponent(), Some(1));
    }

    #[test]
    fn multiprecision_coefficients() {
        let x = LaurentSeries::<MpComplex>::variable();
        let one = LaurentSeries::<MpComplex>::from_f64(1.0);
        let inv = (one.clone() - x.clone()).recip();
        let back = inv * (one.clone() - x);
        let c0 = back.coeff(0).unwrap();
        assert!((c0.to_c64() - c(1.0)).norm() < 1e-35);
        assert!(back.coeff(5).unwrap().magnitude() < 1e-35);
    }

    fn compose(ops: &[u8], x: &S) -> S {
        let mut acc = x.clone().add_f64(2.0);
        for &op in ops {
            acc = match op % 5 {
                0 => acc.clone() * x.clone().add_f64(1.5),
                1 => acc.clone() + x.scale(0.7),
                2 => acc.recip().add_f64(3.0),
                3 => (acc.clone() * acc.clone()).sqrt().add_f64(0.5),
                _ => acc.clone() / x.clone().add_f64(-4.0),
            };
        }
        acc
    }

    fn compose_c(ops: &[u8], x: Complex64) -> Complex64 {
        let mut acc = x + 2.0;
        for &op in ops {
            acc = match op % 5 {
                0 => acc * (x + 1.5),
                1 => acc + x * 0.7,
                2 => 1.0 / acc + 3.0,
                3 => (acc * acc).sqrt() + 0.5,
                _ => acc / (x - 4.0),
            };
        }
        acc
    }

    proptest! {
        #[test]
        fn series_matches_direct_evaluation(ops in prop::collection::vec(any::<u8>(), 1..8)) {
            let x = rho();
            let s = compose(&ops, &x);
            let r0 = c(1e-4);
            let direct = compose_c(&ops, r0);
            let val = s.eval(&r0);
            prop_assert!((val - direct).norm() <= 1e-8 * direct.norm());
        }
    }
}
