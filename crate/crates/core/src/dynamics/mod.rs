//! Equations of motion in Cartesian and reduced form, conserved quantities,
//! and trajectory integration.

mod integrator;
mod tables;
mod trajectory;

use num_complex::Complex64;

pub use integrator::{IntegratorConfig, Method, Stepper};
pub use trajectory::{
    integrate, is_homographic, lagrange_jacobi_residual, saari_relation_residual, HomographicCheck, Initial,
    ResidualSeries, Termination, Trajectory, TrajectorySample,
};

use crate::error::{Error, Result};
use crate::geometry::{mu_derivatives, ShapePoint};
use crate::model::{config_measure_eta, moment_of_inertia, wedge, Alpha, CartesianState, Masses, ReducedState, COLLISION_EPS};
use crate::scalar::neg_power;

/// Accelerations `qddot_k = sum_{i != k} m_i (q_i - q_k) / |q_i - q_k|^{alpha + 2}`.
pub fn cartesian_rhs(masses: &Masses, alpha: Alpha, state: &CartesianState) -> Result<[Complex64; 3]> {
    let a = alpha.value();
    let m = masses.as_array();
    let q = &state.q;
    let threshold = COLLISION_EPS * moment_of_inertia(masses, q).sqrt();
    let mut acc = [Complex64::default(); 3];
    for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
        let d = q[j] - q[i];
        let dist = d.norm();
        if a > 0.0 && dist <= threshold {
            return Err(Error::BinaryCollision { separation: dist, threshold });
        }
        let f = d * neg_power(&dist, a + 2.0);
        acc[i] += f * m[j];
        acc[j] -= f * m[i];
    }
    Ok(acc)
}

/// `C = sum m_k q_k ^ qdot_k`.
pub fn angular_momentum_cartesian(masses: &Masses, state: &CartesianState) -> f64 {
    let m = masses.as_array();
    (0..3).map(|k| m[k] * wedge(state.q[k], state.qdot[k])).sum()
}

/// `C = r^2 (phidot + eta ^ etadot / (1 + |eta|^2))`.
pub fn angular_momentum(state: &ReducedState) -> f64 {
    let w = 1.0 + state.eta.norm_sqr();
    state.r * state.r * (state.phidot + wedge(state.eta, state.etadot) / w)
}

fn check_size(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::TotalCollision { inertia: r * r });
    }
    Ok(())
}

/// `rddot = C^2/r^3 + r |etadot|^2 / (1 + |eta|^2)^2 - mu / r^{alpha + 1}`.
pub fn rdot2_rhs(masses: &Masses, alpha: Alpha, c: f64, state: &ReducedState) -> Result<f64> {
    check_size(state.r)?;
    let r = state.r;
    let w = 1.0 + state.eta.norm_sqr();
    let mu = config_measure_eta(masses, alpha, state.eta)?;
    Ok(c * c / r.powi(3) + r * state.etadot.norm_sqr() / (w * w) - mu * neg_power(&r, alpha.value() + 1.0))
}

/// Shape acceleration in `tau` time:
/// `eta'' = 2i(-C + eta ^ eta') eta' / (1 + |eta|^2) + (r^{2-alpha}/alpha) dmu/deta`,
/// with `dmu/deta = mu_x + i mu_y`.
pub fn eta_rhs_tau(masses: &Masses, alpha: Alpha, c: f64, r: f64, eta: Complex64, etaprime: Complex64) -> Result<Complex64> {
    check_size(r)?;
    let a = alpha.value();
    let d = mu_derivatives(masses, alpha, ShapePoint::from_eta(eta))?;
    let w = 1.0 + eta.norm_sqr();
    let magnetic = Complex64::i() * 2.0 * (-c + wedge(eta, etaprime)) / w * etaprime;
    Ok(magnetic + Complex64::new(d.mu_x, d.mu_y) * (r.powf(2.0 - a) / a))
}

/// `dtau/dt = (1 + |eta|^2) / r^2`.
pub fn tau_reparam(state: &ReducedState) -> Result<f64> {
    check_size(state.r)?;
    Ok((1.0 + state.eta.norm_sqr()) / (state.r * state.r))
}

/// `v^2 = r^4 |etadot|^2 / (1 + |eta|^2)^2 = |deta/dtau|^2`.
pub fn shape_speed_v2(state: &ReducedState) -> f64 {
    let w = 1.0 + state.eta.norm_sqr();
    state.r.powi(4) * state.etadot.norm_sqr() / (w * w)
}

/// `E = rdot^2/2 + (C^2 + v^2)/(2 r^2) - mu / (alpha r^alpha)`.
pub fn total_energy(masses: &Masses, alpha: Alpha, c: f64, state: &ReducedState) -> Result<f64> {
    check_size(state.r)?;
    let a = alpha.value();
    let r = state.r;
    let mu = config_measure_eta(masses, alpha, state.eta)?;
    Ok(0.5 * state.rdot * state.rdot + (c * c + shape_speed_v2(state)) / (2.0 * r * r) - mu * neg_power(&r, a) / a)
}

/// Time derivative of the reduced state `(rdot, rddot, phidot, etadot, etaddot, taudot)`
/// at fixed angular momentum `c`.
pub(crate) fn reduced_rhs(masses: &Masses, alpha: Alpha, c: f64, s: &ReducedState) -> Result<[f64; 8]> {
    check_size(s.r)?;
    let r2 = s.r * s.r;
    let w = 1.0 + s.eta.norm_sqr();
    let phidot = c / r2 - wedge(s.eta, s.etadot) / w;
    let rddot = rdot2_rhs(masses, alpha, c, s)?;
    let k = w / r2;
    let etaprime = s.etadot / k;
    let eta2 = eta_rhs_tau(masses, alpha, c, s.r, s.eta, etaprime)?;
    let kdot = 2.0 * (s.eta.conj() * s.etadot).re / r2 - 2.0 * w * s.rdot / (r2 * s.r);
    let etaddot = etaprime * kdot + eta2 * (k * k);
    Ok([s.rdot, rddot, phidot, s.etadot.re, s.etadot.im, etaddot.re, etaddot.im, k])
}
