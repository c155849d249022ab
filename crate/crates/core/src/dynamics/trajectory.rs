//! Trajectory sampling, finite-difference identities and the homographic test.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrator::{IntegratorConfig, Stepper};
use super::{angular_momentum, angular_momentum_cartesian, cartesian_rhs, reduced_rhs, shape_speed_v2};
use crate::error::{Error, Result};
use crate::model::{
    cartesian_from_reduced, config_measure, kinetic_energy, moment_of_inertia, potential, reduced_from_cartesian,
    shape_eta, Alpha, CartesianState, Masses, ReducedState, COLLISION_EPS,
};

/// Observables at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Reparametrized time, `tau(t0) = 0`.
    pub tau: f64,
    pub state: ReducedState,
    pub inertia: f64,
    pub potential: f64,
    /// `K = sum m_k |qdot_k|^2`, twice the kinetic energy.
    pub kinetic: f64,
    pub energy: f64,
    pub angular_momentum: f64,
    pub mu: f64,
    pub v2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Some mutual distance dropped below `COLLISION_EPS * sqrt(I)`.
    Collision { t: f64, separation: f64 },
    StepSizeUnderflow { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

/// Initial data; the formulation integrated follows the variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    Cartesian(CartesianState),
    Reduced(ReducedState),
}

fn cartesian_from_vec(y: &[f64]) -> CartesianState {
    let z = |i: usize| Complex64::new(y[2 * i], y[2 * i + 1]);
    CartesianState::new([z(0), z(1), z(2)], [z(3), z(4), z(5)])
}

fn reduced_from_vec(y: &[f64], c: f64) -> ReducedState {
    let (r, eta, etadot) = (y[0], Complex64::new(y[3], y[4]), Complex64::new(y[5], y[6]));
    let w = 1.0 + eta.norm_sqr();
    ReducedState { r, phi: y[2], eta, rdot: y[1], phidot: c / (r * r) - crate::model::wedge(eta, etadot) / w, etadot }
}

fn min_separation(state: &CartesianState) -> f64 {
    state.distances().into_iter().fold(f64::INFINITY, f64::min)
}

fn collision_separation(masses: &Masses, state: &CartesianState) -> Option<f64> {
    let sep = min_separation(state);
    (sep <= COLLISION_EPS * moment_of_inertia(masses, &state.q).sqrt()).then_some(sep)
}

fn is_collision(e: &Error) -> bool {
    matches!(e, Error::BinaryCollision { .. } | Error::TotalCollision { .. })
}

enum System {
    Cartesian,
    Reduced { c: f64 },
}

/// Integrates from `times[0]` and samples at every entry of `times` (sorted
/// ascending). Collisions and step-size underflow end the run early and keep
/// the samples produced so far.
pub fn integrate(masses: &Masses, alpha: Alpha, initial: Initial, times: &[f64], config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    if times.is_empty() {
        return Err(Error::InvalidInput("at least one output time is required".into()));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidInput("output times must be ascending".into()));
    }
    let (system, y0) = match initial {
        Initial::Cartesian(s) => {
            let s = s.to_com_frame(masses);
            let mut y: Vec<f64> = s.q.iter().chain(&s.qdot).flat_map(|z| [z.re, z.im]).collect();
            y.push(0.0);
            (System::Cartesian, y)
        }
        Initial::Reduced(s) => {
            let c = angular_momentum(&s);
            (System::Reduced { c }, vec![s.r, s.rdot, s.phi, s.eta.re, s.eta.im, s.etadot.re, s.etadot.im, 0.0])
        }
    };
    let m = *masses;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        match system {
            System::Cartesian => {
                let s = cartesian_from_vec(y);
                let acc = cartesian_rhs(&m, alpha, &s)?;
                for k in 0..3 {
                    dy[2 * k] = s.qdot[k].re;
                    dy[2 * k + 1] = s.qdot[k].im;
                    dy[6 + 2 * k] = acc[k].re;
                    dy[6 + 2 * k + 1] = acc[k].im;
                }
                let eta = shape_eta(&m, &s.q)?;
                dy[12] = (1.0 + eta.norm_sqr()) / moment_of_inertia(&m, &s.q);
            }
            System::Reduced { c } => {
                let d = reduced_rhs(&m, alpha, c, &reduced_from_vec(y, c))?;
                dy.copy_from_slice(&d);
            }
        }
        Ok(())
    };
    let sample = |t: f64, y: &[f64]| -> Result<TrajectorySample> {
        let (cart, red, tau) = match system {
            System::Cartesian => {
                let cs = cartesian_from_vec(y);
                (cs, reduced_from_cartesian(&m, &cs)?, y[12])
            }
            System::Reduced { c } => {
                let rs = reduced_from_vec(y, c);
                (cartesian_from_reduced(&m, &rs), rs, y[7])
            }
        };
        let u = potential(&m, alpha, &cart.q)?;
        let k = 2.0 * kinetic_energy(&m, &cart.qdot);
        Ok(TrajectorySample {
            t,
            tau,
            state: red,
            inertia: moment_of_inertia(&m, &cart.q),
            potential: u,
            kinetic: k,
            energy: 0.5 * k - u,
            angular_momentum: angular_momentum_cartesian(&m, &cart),
            mu: config_measure(&m, alpha, &cart.q)?,
            v2: shape_speed_v2(&red),
        })
    };
    let to_cart = |y: &[f64]| match system {
        System::Cartesian => cartesian_from_vec(y),
        System::Reduced { c } => cartesian_from_reduced(&m, &reduced_from_vec(y, c)),
    };

    let t_end = *times.last().expect("nonempty");
    let mut samples = Vec::with_capacity(times.len());
    let mut stepper = match Stepper::new(rhs, times[0], y0, t_end, config) {
        Ok(s) => s,
        Err(e) if is_collision(&e) => {
            return Ok(Trajectory { samples, termination: Termination::Collision { t: times[0], separation: 0.0 } });
        }
        Err(e) => return Err(e),
    };
    let mut next = 0;
    let termination = loop {
        while next < times.len() && times[next] <= stepper.t() {
            let y = stepper.interpolate(times[next])?;
            match sample(times[next], &y) {
                Ok(s) => samples.push(s),
                Err(e) if is_collision(&e) => {
                    break;
                }
                Err(e) => return Err(e),
            }
            next += 1;
        }
        if next >= times.len() {
            break Termination::Completed;
        }
        if config.collision_stop {
            if let Some(sep) = collision_separation(&m, &to_cart(stepper.y())) {
                break Termination::Collision { t: stepper.t(), separation: sep };
            }
        }
        match stepper.step() {
            Ok(_) => {}
            Err(Error::StepSizeUnderflow { t }) => break Termination::StepSizeUnderflow { t },
            Err(e) if is_collision(&e) => {
                break Termination::Collision { t: stepper.t(), separation: min_separation(&to_cart(stepper.y())) };
            }
            Err(e) => return Err(e),
        }
    };
    Ok(Trajectory { samples, termination })
}

/// Residual of a finite-difference identity on uniformly spaced samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub t: Vec<f64>,
    pub residual: Vec<f64>,
    /// Largest magnitude of the individual terms, for relative comparisons.
    /// The Saari residual also folds in `|mu| sqrt(|mu| / r^{alpha+2})`.
    pub scale: f64,
}

impl ResidualSeries {
    pub fn max_abs(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn uniform_step(samples: &[TrajectorySample]) -> Result<f64> {
    if samples.len() < 7 {
        return Err(Error::InsufficientSamples { needed: 7, got: samples.len() });
    }
    let h = (samples[samples.len() - 1].t - samples[0].t) / (samples.len() - 1) as f64;
    let uniform = samples.windows(2).all(|w| ((w[1].t - w[0].t) - h).abs() <= 1e-9 * h.abs());
    if !uniform || h <= 0.0 {
        return Err(Error::InvalidInput("finite-difference residuals need uniformly spaced samples".into()));
    }
    Ok(h)
}

// sixth-order central stencils: the interpolated samples carry noise near the
// integrator tolerance, and the wider stencil tolerates a larger spacing

fn d1(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] - 9.0 * f[i + 2] + f[i + 3]) / (60.0 * h)
}

fn d2(f: &[f64], i: usize, h: f64) -> f64 {
    (2.0 * f[i - 3] - 27.0 * f[i - 2] + 270.0 * f[i - 1] - 490.0 * f[i] + 270.0 * f[i + 1] - 27.0 * f[i + 2] + 2.0 * f[i + 3])
        / (180.0 * h * h)
}

/// `dmu/dt - (alpha r^{alpha-2} / 2) d(v^2)/dt` at interior samples.
pub fn saari_relation_residual(alpha: Alpha, samples: &[TrajectorySample]) -> Result<ResidualSeries> {
    let h = uniform_step(samples)?;
    let a = alpha.value();
    let mu: Vec<f64> = samples.iter().map(|s| s.mu).collect();
    let v2: Vec<f64> = samples.iter().map(|s| s.v2).collect();
    let mut out = ResidualSeries { t: Vec::new(), residual: Vec::new(), scale: 0.0 };
    for i in 3..samples.len() - 3 {
        let lhs = d1(&mu, i, h);
        let rhs = 0.5 * a * samples[i].state.r.powf(a - 2.0) * d1(&v2, i, h);
        out.t.push(samples[i].t);
        out.residual.push(lhs - rhs);
        // |mu| times the natural rate sqrt(|mu| / r^{alpha+2}) bounds the
        // terms on orbits where both sides vanish identically (alpha = -2).
        let s = &samples[i];
        let rate = (s.mu.abs() / s.state.r.powf(a + 2.0)).sqrt();
        out.scale = out.scale.max(lhs.abs()).max(rhs.abs()).max(s.mu.abs() * rate);
    }
    Ok(out)
}

/// `d^2I/dt^2 - 4E - 2(2 - alpha) U` at interior samples, `U` being the
/// potential with its `1/alpha` factor (the same identity reads
/// `4E + 2(2/alpha - 1) sum m_i m_j / r_ij^alpha`).
pub fn lagrange_jacobi_residual(alpha: Alpha, samples: &[TrajectorySample]) -> Result<ResidualSeries> {
    let h = uniform_step(samples)?;
    let a = alpha.value();
    let inertia: Vec<f64> = samples.iter().map(|s| s.inertia).collect();
    let mut out = ResidualSeries { t: Vec::new(), residual: Vec::new(), scale: 0.0 };
    for i in 3..samples.len() - 3 {
        let s = &samples[i];
        let iddot = d2(&inertia, i, h);
        let rhs = 4.0 * s.energy + 2.0 * (2.0 - a) * s.potential;
        out.t.push(s.t);
        out.residual.push(iddot - rhs);
        out.scale = out.scale.max(iddot.abs()).max((4.0 * s.energy).abs()).max((2.0 * (2.0 - a) * s.potential).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomographicCheck {
    pub homographic: bool,
    pub max_shape_deviation: f64,
    /// `z(t) = r(t) e^{i phi(t)} / (r(0) e^{i phi(0)})` when homographic.
    pub witness: Option<Vec<Complex64>>,
}

/// Decides `q_k(t) = z(t) q_k(0)` through constancy of `eta(t)`.
pub fn is_homographic(samples: &[TrajectorySample], tol: f64) -> HomographicCheck {
    let Some(first) = samples.first() else {
        return HomographicCheck { homographic: true, max_shape_deviation: 0.0, witness: Some(Vec::new()) };
    };
    let dev = samples.iter().map(|s| (s.state.eta - first.state.eta).norm()).fold(0.0, f64::max);
    let homographic = dev <= tol;
    let z0 = Complex64::from_polar(first.state.r, first.state.phi);
    let witness = homographic.then(|| samples.iter().map(|s| Complex64::from_polar(s.state.r, s.state.phi) / z0).collect());
    HomographicCheck { homographic, max_shape_deviation: dev, witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Method;

    fn lagrange(r: f64, omega: f64) -> ReducedState {
        ReducedState { r, phi: 0.0, eta: Complex64::i(), rdot: 0.0, phidot: omega, etadot: Complex64::default() }
    }

    fn tight() -> IntegratorConfig {
        IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-12, method: Method::Dop853, ..Default::default() }
    }

    fn grid(t1: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t1 * k as f64 / n as f64).collect()
    }

    #[test]
    fn lagrange_orbit_returns_after_one_period() {
        let m = Masses::equal();
        let period = std::f64::consts::TAU / 3f64.sqrt();
        let a1 = Alpha::new(1.0).unwrap();
        let traj = integrate(&m, a1, Initial::Reduced(lagrange(1.0, 3f64.sqrt())), &grid(period, 40), &tight()).unwrap();
        assert!(traj.completed());
        let last = traj.samples.last().unwrap();
        assert!((last.state.r - 1.0).abs() < 1e-9);
        assert!((last.state.eta - Complex64::i()).norm() < 1e-9);
        assert!((last.state.phi - std::f64::consts::TAU).abs() < 1e-9);
        let h = is_homographic(&traj.samples, 1e-9);
        assert!(h.homographic);
        assert!(h.witness.unwrap().iter().all(|z| (z.norm() - 1.0).abs() < 1e-9));
        for s in &traj.samples {
            assert!((s.mu - 3.0).abs() < 1e-9);
        }
        let lj = lagrange_jacobi_residual(a1, &traj.samples).unwrap();
        assert!(lj.max_abs() < 1e-8);
        let sr = saari_relation_residual(a1, &traj.samples).unwrap();
        assert!(sr.max_abs() < 1e-8);
    }

    #[test]
    fn cartesian_and_reduced_agree() {
        let m = Masses::equal();
        let s = ReducedState { r: 1.0, phi: 0.3, eta: Complex64::new(0.1, 1.05), rdot: 0.05, phidot: 1.6, etadot: Complex64::new(0.05, -0.1) };
        let a1 = Alpha::new(1.0).unwrap();
        let times = grid(3.0, 30);
        let red = integrate(&m, a1, Initial::Reduced(s), &times, &tight()).unwrap();
        let car = integrate(&m, a1, Initial::Cartesian(cartesian_from_reduced(&m, &s)), &times, &tight()).unwrap();
        assert!(red.completed() && car.completed());
        for (a, b) in red.samples.iter().zip(&car.samples) {
            assert!((a.inertia - b.inertia).abs() < 1e-8, "{} {}", a.inertia, b.inertia);
            assert!((a.mu - b.mu).abs() < 1e-8, "t={} {} {} eta {} {}", a.t, a.mu, b.mu, a.state.eta, b.state.eta);
            assert!((a.tau - b.tau).abs() < 1e-8 * (1.0 + a.tau), "t={} {} {}", a.t, a.tau, b.tau);
        }
    }

    #[test]
    fn homothetic_collapse_is_homographic_and_stops() {
        let m = Masses::equal();
        let s = ReducedState { r: 1.0, phi: 0.0, eta: Complex64::new(0.0, 0.0), rdot: 0.0, phidot: 0.0, etadot: Complex64::default() };
        let traj = integrate(&m, Alpha::new(1.0).unwrap(), Initial::Cartesian(cartesian_from_reduced(&m, &s)), &grid(5.0, 500), &tight()).unwrap();
        assert!(!traj.completed(), "{:?}", traj.termination);
        let h = is_homographic(&traj.samples, 1e-8);
        assert!(h.homographic, "{}", h.max_shape_deviation);
        assert!(h.witness.unwrap().iter().all(|z| z.im.abs() < 1e-8 && z.re > 0.0));
    }

    #[test]
    fn shape_change_is_not_homographic() {
        let m = Masses::equal();
        let s = ReducedState { etadot: Complex64::new(0.2, 0.0), ..lagrange(1.0, 1.7) };
        let traj = integrate(&m, Alpha::new(1.0).unwrap(), Initial::Reduced(s), &grid(1.0, 10), &tight()).unwrap();
        assert!(!is_homographic(&traj.samples, 1e-6).homographic);
    }

    #[test]
    fn residuals_need_samples() {
        let a1 = Alpha::new(1.0).unwrap();
        assert!(matches!(saari_relation_residual(a1, &[]), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn bad_times_rejected() {
        let m = Masses::equal();
        let a1 = Alpha::new(1.0).unwrap();
        assert!(integrate(&m, a1, Initial::Reduced(lagrange(1.0, 1.0)), &[1.0, 0.5], &tight()).is_err());
        assert!(integrate(&m, a1, Initial::Reduced(lagrange(1.0, 1.0)), &[], &tight()).is_err());
    }
}
