//! Masses, coordinate charts between Cartesian and reduced variables, and
//! the scalar quantities `I`, `K`, `U` and the configurational measure `mu`.
//!
//! Positions and velocities live in the complex plane. The reduced chart is
//! `q_k = r e^{i phi} xi_k(eta) / sqrt(sum m |xi|^2)`, so `r^2` is the moment
//! of inertia and `eta` is the rescaled ratio of the two Jacobi vectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{half_power, neg_power, Scalar};

/// Relative separation below which two bodies are treated as collided.
pub const COLLISION_EPS: f64 = 1e-10;

/// The three point masses together with their derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Masses {
    m: [f64; 3],
    total: f64,
    n: f64,
}

impl Masses {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        for m in [m1, m2, m3] {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidInput(format!("masses must be positive and finite, got {m}")));
            }
        }
        let total = m1 + m2 + m3;
        let n = (m1 + m2) * (m1 + m2) * m3 / (total * m1 * m2);
        Ok(Masses { m: [m1, m2, m3], total, n })
    }

    /// Equal unit masses.
    pub fn equal() -> Self {
        Self::new(1.0, 1.0, 1.0).expect("unit masses")
    }

    pub fn m1(&self) -> f64 {
        self.m[0]
    }
    pub fn m2(&self) -> f64 {
        self.m[1]
    }
    pub fn m3(&self) -> f64 {
        self.m[2]
    }
    pub fn as_array(&self) -> [f64; 3] {
        self.m
    }

    /// Total mass `M`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Rescale factor `n = (m1+m2)^2 m3 / (M m1 m2)` relating `eta = sqrt(n) zeta`.
    pub fn n(&self) -> f64 {
        self.n
    }

    /// Relabeled masses `(m2, m1, m3)`.
    pub fn swap12(&self) -> Self {
        Self::new(self.m[1], self.m[0], self.m[2]).expect("already validated")
    }

    /// Reduced mass of the (1,2) pair, `m1 m2 / (m1 + m2)`.
    pub fn mu12(&self) -> f64 {
        self.m[0] * self.m[1] / (self.m[0] + self.m[1])
    }

    /// Collision points of the eta chart: bodies 2,3 at `a` and 3,1 at `-b`.
    pub fn collision_etas(&self) -> (f64, f64) {
        let s = self.n.sqrt();
        let m12 = self.m[0] + self.m[1];
        (s * self.m[0] / m12, -s * self.m[1] / m12)
    }
}

impl TryFrom<[f64; 3]> for Masses {
    type Error = Error;
    fn try_from(m: [f64; 3]) -> Result<Self> {
        Masses::new(m[0], m[1], m[2])
    }
}

impl From<Masses> for [f64; 3] {
    fn from(m: Masses) -> Self {
        m.m
    }
}

/// Exponent of the homogeneous potential `U = (1/alpha) sum m_i m_j / r_ij^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(Error::InvalidInput(format!("alpha must be finite and nonzero, got {alpha}")));
        }
        Ok(Alpha(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Alpha::new(a)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> Self {
        a.0
    }
}

/// Positions and velocities of the three bodies in the centre-of-mass frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub q: [Complex64; 3],
    pub qdot: [Complex64; 3],
}

impl CartesianState {
    pub fn new(q: [Complex64; 3], qdot: [Complex64; 3]) -> Self {
        CartesianState { q, qdot }
    }

    /// Shifts positions and velocities so both centre-of-mass sums vanish.
    pub fn to_com_frame(&self, masses: &Masses) -> Self {
        let m = masses.as_array();
        let mt = masses.total();
        let c: Complex64 = (0..3).map(|k| self.q[k] * m[k]).sum::<Complex64>() / mt;
        let cd: Complex64 = (0..3).map(|k| self.qdot[k] * m[k]).sum::<Complex64>() / mt;
        CartesianState {
            q: self.q.map(|z| z - c),
            qdot: self.qdot.map(|z| z - cd),
        }
    }

    /// Largest centre-of-mass violation relative to the configuration scale.
    pub fn com_residual(&self, masses: &Masses) -> f64 {
        let m = masses.as_array();
        let c: Complex64 = (0..3).map(|k| self.q[k] * m[k]).sum();
        let cd: Complex64 = (0..3).map(|k| self.qdot[k] * m[k]).sum();
        let scale = (0..3).map(|k| m[k] * self.q[k].norm()).sum::<f64>().max(f64::MIN_POSITIVE);
        let vscale = (0..3).map(|k| m[k] * self.qdot[k].norm()).sum::<f64>().max(f64::MIN_POSITIVE);
        (c.norm() / scale).max(cd.norm() / vscale)
    }

    /// Mutual distances `(r12, r23, r31)`.
    pub fn distances(&self) -> [f64; 3] {
        let q = &self.q;
        [(q[1] - q[0]).norm(), (q[2] - q[1]).norm(), (q[0] - q[2]).norm()]
    }
}

/// Size `r`, rotation `phi`, shape `eta` and their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub r: f64,
    pub phi: f64,
    pub eta: Complex64,
    pub rdot: f64,
    pub phidot: f64,
    pub etadot: Complex64,
}

/// 2D cross product `Im(conj(a) b)`.
pub fn wedge(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Jacobi vectors `J1 = q2 - q1` and `J2 = (M/(m1+m2)) q3`.
pub fn jacobi_vectors(masses: &Masses, q: &[Complex64; 3]) -> (Complex64, Complex64) {
    let j1 = q[1] - q[0];
    let j2 = q[2] * (masses.total() / (masses.m1() + masses.m2()));
    (j1, j2)
}

fn eta_factor(masses: &Masses) -> f64 {
    (masses.total() * masses.m3() / (masses.m1() * masses.m2())).sqrt()
}

/// Shape variable `eta = sqrt(n) J2 / J1`.
pub fn shape_eta(masses: &Masses, q: &[Complex64; 3]) -> Result<Complex64> {
    let j1 = q[1] - q[0];
    let threshold = COLLISION_EPS * moment_of_inertia(masses, q).sqrt();
    if j1.norm() <= threshold {
        return Err(Error::BinaryCollision { separation: j1.norm(), threshold });
    }
    Ok(q[2] / j1 * eta_factor(masses))
}

/// Normalized positions `xi_k(eta)` with `xi2 - xi1 = 1` and `sum m xi = 0`.
pub fn xi_from_eta(masses: &Masses, eta: Complex64) -> [Complex64; 3] {
    let (m1, m2, m3, mt) = (masses.m1(), masses.m2(), masses.m3(), masses.total());
    let m12 = m1 + m2;
    let shift = eta * ((m1 * m2 * m3 / mt).sqrt() / m12);
    [
        Complex64::from(-m2 / m12) - shift,
        Complex64::from(m1 / m12) - shift,
        eta * (m1 * m2 / (mt * m3)).sqrt(),
    ]
}

/// d xi_k / d eta; the map is affine in eta.
fn xi_slopes(masses: &Masses) -> [f64; 3] {
    let (m1, m2, m3, mt) = (masses.m1(), masses.m2(), masses.m3(), masses.total());
    let s = -(m1 * m2 * m3 / mt).sqrt() / (m1 + m2);
    [s, s, (m1 * m2 / (mt * m3)).sqrt()]
}

pub fn cartesian_from_reduced(masses: &Masses, state: &ReducedState) -> CartesianState {
    let m = masses.as_array();
    let xi = xi_from_eta(masses, state.eta);
    let b = xi_slopes(masses);
    let norm2: f64 = (0..3).map(|k| m[k] * xi[k].norm_sqr()).sum();
    let s = norm2.sqrt();
    let dnorm2: f64 = (0..3).map(|k| 2.0 * m[k] * (xi[k].conj() * state.etadot * b[k]).re).sum();
    let sdot = dnorm2 / (2.0 * s);
    let rot = Complex64::from_polar(1.0, state.phi);
    let radial = Complex64::new(state.rdot, state.r * state.phidot);
    let mut q = [Complex64::default(); 3];
    let mut qdot = [Complex64::default(); 3];
    for k in 0..3 {
        q[k] = rot * xi[k] * (state.r / s);
        let dxi = state.etadot * b[k] / s - xi[k] * (sdot / norm2);
        qdot[k] = rot * (radial * xi[k] / s + dxi * state.r);
    }
    CartesianState { q, qdot }
}

pub fn reduced_from_cartesian(masses: &Masses, state: &CartesianState) -> Result<ReducedState> {
    let m = masses.as_array();
    let q = &state.q;
    let qd = &state.qdot;
    let inertia = moment_of_inertia(masses, q);
    let scale = (0..3).map(|k| m[k] * q[k].norm_sqr()).sum::<f64>().max(inertia);
    if inertia <= COLLISION_EPS * COLLISION_EPS * scale || inertia == 0.0 {
        return Err(Error::TotalCollision { inertia });
    }
    let eta = shape_eta(masses, q)?;
    let r = inertia.sqrt();
    let rdot = (0..3).map(|k| m[k] * (q[k].conj() * qd[k]).re).sum::<f64>() / r;
    let j = q[1] - q[0];
    let jd = qd[1] - qd[0];
    let phi = j.arg();
    let phidot = (jd / j).im;
    let etadot = (qd[2] * j - q[2] * jd) / (j * j) * eta_factor(masses);
    Ok(ReducedState { r, phi, eta, rdot, phidot, etadot })
}

/// `I = sum_{i<j} m_i m_j |q_i - q_j|^2 / M`.
pub fn moment_of_inertia(masses: &Masses, q: &[Complex64; 3]) -> f64 {
    let m = masses.as_array();
    let pairs = [(0, 1), (1, 2), (2, 0)];
    pairs.iter().map(|&(i, j)| m[i] * m[j] * (q[i] - q[j]).norm_sqr()).sum::<f64>() / masses.total()
}

/// Kinetic energy `sum m |qdot|^2 / 2` from Cartesian velocities.
pub fn kinetic_energy(masses: &Masses, qdot: &[Complex64; 3]) -> f64 {
    let m = masses.as_array();
    0.5 * (0..3).map(|k| m[k] * qdot[k].norm_sqr()).sum::<f64>()
}

/// Size, rotation and shape parts of the kinetic energy.
pub fn kinetic_split(state: &ReducedState) -> (f64, f64, f64) {
    let w = 1.0 + state.eta.norm_sqr();
    let r2 = state.r * state.r;
    let size = 0.5 * state.rdot * state.rdot;
    let omega = state.phidot + wedge(state.eta, state.etadot) / w;
    let rot = 0.5 * r2 * omega * omega;
    let shape = 0.5 * r2 * state.etadot.norm_sqr() / (w * w);
    (size, rot, shape)
}

fn check_separations(masses: &Masses, q: &[Complex64; 3]) -> Result<[f64; 3]> {
    let d = [(q[1] - q[0]).norm(), (q[2] - q[1]).norm(), (q[0] - q[2]).norm()];
    let threshold = COLLISION_EPS * moment_of_inertia(masses, q).sqrt();
    for &sep in &d {
        if sep <= threshold {
            return Err(Error::BinaryCollision { separation: sep, threshold });
        }
    }
    Ok(d)
}

/// Homogeneous potential `U = (1/alpha) sum m_i m_j / r_ij^alpha`.
pub fn potential(masses: &Masses, alpha: Alpha, q: &[Complex64; 3]) -> Result<f64> {
    let a = alpha.value();
    let m = masses.as_array();
    let d = if a > 0.0 {
        check_separations(masses, q)?
    } else {
        [(q[1] - q[0]).norm(), (q[2] - q[1]).norm(), (q[0] - q[2]).norm()]
    };
    let u = m[0] * m[1] * neg_power(&d[0], a) + m[1] * m[2] * neg_power(&d[1], a) + m[2] * m[0] * neg_power(&d[2], a);
    Ok(u / a)
}

/// Configurational measure `mu = alpha I^{alpha/2} U`.
pub fn config_measure(masses: &Masses, alpha: Alpha, q: &[Complex64; 3]) -> Result<f64> {
    let u = potential(masses, alpha, q)?;
    let i = moment_of_inertia(masses, q);
    Ok(alpha.value() * half_power(&i, alpha.value()) * u)
}

/// `mu` as a function of the side-length ratios `r1 = r23/r12`, `r2 = r31/r12`.
///
/// Works over any [`Scalar`] and never takes a modulus, so it continues
/// analytically to complex or series-valued `r1`, `r2`.
pub fn measure_bipolar<S: Scalar>(masses: &Masses, alpha: f64, r1: &S, r2: &S) -> S {
    let (m1, m2, m3) = (masses.m1(), masses.m2(), masses.m3());
    let p = (r1.square().scale(m2 * m3) + r2.square().scale(m3 * m1)).add_f64(m1 * m2);
    let rho = (neg_power(r1, alpha).scale(m2 * m3) + neg_power(r2, alpha).scale(m3 * m1)).add_f64(m1 * m2);
    half_power(&p.scale(1.0 / masses.total()), alpha) * rho
}

/// `mu` in the `eta = x + iy` chart; `|eta|^2` is formed as `x^2 + y^2`.
pub fn measure_xy<S: Scalar>(masses: &Masses, alpha: f64, x: &S, y: &S) -> S {
    let (m1, m2) = (masses.m1(), masses.m2());
    let m12 = m1 + m2;
    let inv = 1.0 / masses.n().sqrt();
    let xs = x.scale(inv);
    let ys2 = y.scale(inv).square();
    let r1 = (xs.add_f64(-m1 / m12).square() + ys2.clone()).sqrt();
    let r2 = (xs.add_f64(m2 / m12).square() + ys2).sqrt();
    measure_bipolar(masses, alpha, &r1, &r2)
}

/// `mu(eta)` on doubles, rejecting the two finite collision points.
pub fn config_measure_eta(masses: &Masses, alpha: Alpha, eta: Complex64) -> Result<f64> {
    let (a, b) = masses.collision_etas();
    let scale = masses.n().sqrt();
    for c in [a, b] {
        let sep = (eta - c).norm();
        if sep <= COLLISION_EPS * scale {
            return Err(Error::BinaryCollision { separation: sep / scale, threshold: COLLISION_EPS });
        }
    }
    if !eta.is_finite() {
        return Err(Error::BinaryCollision { separation: 0.0, threshold: COLLISION_EPS });
    }
    Ok(measure_xy(masses, alpha.value(), &eta.re, &eta.im))
}
