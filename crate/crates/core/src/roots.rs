//! Simultaneous polynomial root finding (Aberth-Ehrlich) with Newton polish.

use num_complex::Complex64;

use crate::error::{Error, Result};

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    // coeffs[k] multiplies z^k
    let mut p = Complex64::default();
    let mut dp = Complex64::default();
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn error_bound(coeffs: &[Complex64], z: Complex64) -> f64 {
    let az = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * az + c.norm()) * f64::EPSILON * 8.0
}

/// All roots of `sum coeffs[k] z^k`, with multiplicity.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.last().is_some_and(|c| c.norm() == 0.0) {
        coeffs.pop();
    }
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Err(Error::RootFindingFailure("constant polynomial".into()));
    }
    let lead = coeffs[deg];
    if !coeffs.iter().all(|c| c.is_finite()) {
        return Err(Error::RootFindingFailure("non-finite coefficient".into()));
    }

    // Fujiwara-type bound sets the initial circle
    let radius = (0..deg)
        .map(|k| (coeffs[k] / lead).norm().powf(1.0 / (deg - k) as f64))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(radius, 0.4 + std::f64::consts::TAU * k as f64 / deg as f64))
        .collect();

    let mut converged = vec![false; deg];
    for _ in 0..500 {
        for i in 0..deg {
            if converged[i] {
                continue;
            }
            let (p, dp) = horner(&coeffs, z[i]);
            if p.norm() <= error_bound(&coeffs, z[i]) {
                converged[i] = true;
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..deg).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            z[i] -= step;
            if step.norm() <= 1e-16 * z[i].norm() {
                converged[i] = true;
            }
        }
        if converged.iter().all(|&c| c) {
            break;
        }
    }

    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(&coeffs, *zi);
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let next = *zi - p / dp;
            if horner(&coeffs, next).0.norm() < p.norm() {
                *zi = next;
            } else {
                break;
            }
        }
        let (p, _) = horner(&coeffs, *zi);
        if !zi.is_finite() || p.norm() > 1e6 * error_bound(&coeffs, *zi) {
            return Err(Error::RootFindingFailure(format!("residual {:e} at root {zi}", p.norm())));
        }
    }
    Ok(z)
}
