//! Adaptive embedded Runge-Kutta integration with dense output.

use serde::{Deserialize, Serialize};

use super::tables::*;
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Dormand-Prince 5(4).
    #[default]
    Dopri5,
    /// Dormand-Prince 8(5,3).
    Dop853,
}

impl Method {
    fn stages(self) -> usize {
        match self {
            Method::Dopri5 => 6,
            Method::Dop853 => 12,
        }
    }

    fn error_order(self) -> f64 {
        match self {
            Method::Dopri5 => 4.0,
            Method::Dop853 => 7.0,
        }
    }

    fn a(self, s: usize, j: usize) -> f64 {
        match self {
            Method::Dopri5 => DP5_A[s][j],
            Method::Dop853 => DP8_A[s][j],
        }
    }

    fn c(self, s: usize) -> f64 {
        match self {
            Method::Dopri5 => DP5_C[s],
            Method::Dop853 => DP8_C[s],
        }
    }

    fn b(self, s: usize) -> f64 {
        match self {
            Method::Dopri5 => DP5_B[s],
            Method::Dop853 => DP8_B[s],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Unbounded when omitted.
    #[serde(skip_serializing_if = "is_unbounded")]
    pub max_step: f64,
    /// Stop when some mutual distance falls below the collision threshold.
    pub collision_stop: bool,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, max_step: f64::INFINITY, collision_stop: true, method: Method::Dopri5 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("integrator tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidInput("max_step must be positive".into()));
        }
        Ok(())
    }
}

fn is_unbounded(x: &f64) -> bool {
    x.is_infinite()
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

enum Dense {
    Five(Vec<[f64; 4]>),
    Eight(Vec<[f64; 7]>),
}

/// Single-owner stepping state of an explicit Runge-Kutta pair.
pub struct Stepper<F> {
    f: F,
    method: Method,
    rtol: f64,
    atol: f64,
    max_step: f64,
    t: f64,
    y: Vec<f64>,
    fy: Vec<f64>,
    h_abs: f64,
    direction: f64,
    t_bound: f64,
    // last accepted step
    t_old: f64,
    y_old: Vec<f64>,
    h_prev: f64,
    k: Vec<Vec<f64>>,
    dense: Option<Dense>,
    pub evaluations: usize,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(mut f: F, t0: f64, y0: Vec<f64>, t_bound: f64, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let n = y0.len();
        let mut fy = vec![0.0; n];
        f(t0, &y0, &mut fy)?;
        let direction = if t_bound >= t0 { 1.0 } else { -1.0 };
        let mut s = Stepper {
            f,
            method: cfg.method,
            rtol: cfg.rel_tol,
            atol: cfg.abs_tol,
            max_step: cfg.max_step,
            t: t0,
            y: y0.clone(),
            fy,
            h_abs: 0.0,
            direction,
            t_bound,
            t_old: t0,
            y_old: y0,
            h_prev: 0.0,
            k: vec![vec![0.0; n]; 16],
            dense: None,
            evaluations: 1,
        };
        s.h_abs = s.initial_step()?;
        Ok(s)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.evaluations += 1;
        (self.f)(t, y, out)
    }

    fn initial_step(&mut self) -> Result<f64> {
        let n = self.y.len();
        let interval = (self.t_bound - self.t).abs();
        if interval == 0.0 {
            return Ok(0.0);
        }
        let scale: Vec<f64> = self.y.iter().map(|y| self.atol + y.abs() * self.rtol).collect();
        let d0 = rms(self.y.iter().zip(&scale).map(|(y, s)| y / s), n);
        let d1 = rms(self.fy.iter().zip(&scale).map(|(f, s)| f / s), n);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(interval);
        let y1: Vec<f64> = self.y.iter().zip(&self.fy).map(|(y, f)| y + h0 * self.direction * f).collect();
        let mut f1 = vec![0.0; n];
        let t1 = self.t + h0 * self.direction;
        self.eval(t1, &y1, &mut f1)?;
        let d2 = rms(f1.iter().zip(&self.fy).zip(&scale).map(|((a, b), s)| (a - b) / s), n) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / (self.method.error_order() + 1.0))
        };
        Ok((100.0 * h0).min(h1).min(interval).min(self.max_step))
    }

    /// Stages for a trial step of size `h`; fills `k[0..=stages]` and returns `y_new`.
    fn trial(&mut self, h: f64) -> Result<Vec<f64>> {
        let n = self.y.len();
        let stages = self.method.stages();
        let mut k = std::mem::take(&mut self.k);
        k[0].copy_from_slice(&self.fy);
        let mut tmp = vec![0.0; n];
        for s in 1..stages {
            for i in 0..n {
                let dy: f64 = (0..s).map(|j| self.method.a(s, j) * k[j][i]).sum();
                tmp[i] = self.y[i] + h * dy;
            }
            let ts = self.t + self.method.c(s) * h;
            let res = self.eval(ts, &tmp, &mut k[s]);
            if let Err(e) = res {
                self.k = k;
                return Err(e);
            }
        }
        let y_new: Vec<f64> = (0..n).map(|i| self.y[i] + h * (0..stages).map(|j| self.method.b(j) * k[j][i]).sum::<f64>()).collect();
        let res = self.eval(self.t + h, &y_new, &mut k[stages]);
        self.k = k;
        res.map(|_| y_new)
    }

    fn error_norm(&self, h: f64, y_new: &[f64]) -> f64 {
        let n = self.y.len();
        let scale: Vec<f64> = (0..n).map(|i| self.atol + self.y[i].abs().max(y_new[i].abs()) * self.rtol).collect();
        match self.method {
            Method::Dopri5 => rms((0..n).map(|i| h * (0..7).map(|j| DP5_E[j] * self.k[j][i]).sum::<f64>() / scale[i]), n),
            Method::Dop853 => {
                let mut e5 = 0.0;
                let mut e3 = 0.0;
                for i in 0..n {
                    let a: f64 = (0..13).map(|j| DP8_E5[j] * self.k[j][i]).sum::<f64>() / scale[i];
                    let b: f64 = (0..13).map(|j| DP8_E3[j] * self.k[j][i]).sum::<f64>() / scale[i];
                    e5 += a * a;
                    e3 += b * b;
                }
                if e5 == 0.0 && e3 == 0.0 {
                    return 0.0;
                }
                h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
            }
        }
    }

    /// Advances one accepted step; returns `false` once `t_bound` is reached.
    pub fn step(&mut self) -> Result<bool> {
        if self.t == self.t_bound {
            return Ok(false);
        }
        let exponent = -1.0 / (self.method.error_order() + 1.0);
        let min_step = 10.0 * (next_toward(self.t, self.direction) - self.t).abs();
        self.h_abs = self.h_abs.clamp(min_step, self.max_step.max(min_step));
        let mut rejected = false;
        loop {
            if self.h_abs < min_step {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let mut h = self.h_abs * self.direction;
            let mut t_new = self.t + h;
            if self.direction * (t_new - self.t_bound) > 0.0 {
                t_new = self.t_bound;
            }
            h = t_new - self.t;
            let h_abs = h.abs();
            let y_new = self.trial(h)?;
            let err = self.error_norm(h, &y_new);
            if err < 1.0 {
                let mut factor = if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(exponent)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.h_abs = h_abs * factor;
                self.t_old = self.t;
                self.y_old = std::mem::replace(&mut self.y, y_new);
                self.t = t_new;
                self.h_prev = h;
                self.fy.copy_from_slice(&self.k[self.method.stages()]);
                self.dense = None;
                return Ok(true);
            }
            self.h_abs = h_abs * MIN_FACTOR.max(SAFETY * err.powf(exponent));
            rejected = true;
        }
    }

    fn build_dense(&mut self) -> Result<()> {
        let n = self.y.len();
        let h = self.h_prev;
        let dense = match self.method {
            Method::Dopri5 => Dense::Five(
                (0..n)
                    .map(|i| {
                        let mut q = [0.0; 4];
                        for (c, qc) in q.iter_mut().enumerate() {
                            *qc = (0..7).map(|j| self.k[j][i] * DP5_P[j][c]).sum();
                        }
                        q
                    })
                    .collect(),
            ),
            Method::Dop853 => {
                let mut k = std::mem::take(&mut self.k);
                let mut tmp = vec![0.0; n];
                for s in 13..16 {
                    for i in 0..n {
                        tmp[i] = self.y_old[i] + h * (0..s).map(|j| DP8_A[s][j] * k[j][i]).sum::<f64>();
                    }
                    let ts = self.t_old + DP8_C[s] * h;
                    let res = self.eval(ts, &tmp, &mut k[s]);
                    if let Err(e) = res {
                        self.k = k;
                        return Err(e);
                    }
                }
                let coeffs = (0..n)
                    .map(|i| {
                        let dy = self.y[i] - self.y_old[i];
                        let f_old = k[0][i];
                        let mut c = [0.0; 7];
                        c[0] = dy;
                        c[1] = h * f_old - dy;
                        c[2] = 2.0 * dy - h * (self.fy[i] + f_old);
                        for r in 0..4 {
                            c[3 + r] = h * (0..16).map(|j| DP8_D[r][j] * k[j][i]).sum::<f64>();
                        }
                        c
                    })
                    .collect();
                self.k = k;
                Dense::Eight(coeffs)
            }
        };
        self.dense = Some(dense);
        Ok(())
    }

    /// Dense-output value inside the last accepted step.
    pub fn interpolate(&mut self, t: f64) -> Result<Vec<f64>> {
        if t == self.t {
            return Ok(self.y.clone());
        }
        if self.dense.is_none() {
            self.build_dense()?;
        }
        let x = (t - self.t_old) / self.h_prev;
        let h = self.h_prev;
        Ok(match self.dense.as_ref().expect("built above") {
            Dense::Five(q) => q
                .iter()
                .zip(&self.y_old)
                .map(|(q, y0)| {
                    let p = [x, x * x, x * x * x, x * x * x * x];
                    y0 + h * (0..4).map(|c| q[c] * p[c]).sum::<f64>()
                })
                .collect(),
            Dense::Eight(f) => f
                .iter()
                .zip(&self.y_old)
                .map(|(f, y0)| {
                    let mut y = 0.0;
                    for (i, c) in f.iter().rev().enumerate() {
                        y += c;
                        y *= if i % 2 == 0 { x } else { 1.0 - x };
                    }
                    y + y0
                })
                .collect(),
        })
    }
}

fn next_toward(t: f64, direction: f64) -> f64 {
    let up = |x: f64| if x == 0.0 { f64::from_bits(1) } else if x > 0.0 { f64::from_bits(x.to_bits() + 1) } else { f64::from_bits(x.to_bits() - 1) };
    if direction > 0.0 { up(t) } else { -up(-t) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: Method, tol: f64) -> IntegratorConfig {
        IntegratorConfig { rel_tol: tol, abs_tol: tol, method, ..Default::default() }
    }

    fn run(method: Method, tol: f64, times: &[f64]) -> Vec<Vec<f64>> {
        // harmonic oscillator y'' = -y
        let f = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
            Ok(())
        };
        let mut s = Stepper::new(f, 0.0, vec![1.0, 0.0], *times.last().unwrap(), &cfg(method, tol)).unwrap();
        let mut out = Vec::new();
        let mut i = 0;
        while i < times.len() {
            while i < times.len() && times[i] <= s.t() {
                out.push(s.interpolate(times[i]).unwrap());
                i += 1;
            }
            if i < times.len() {
                s.step().unwrap();
            }
        }
        out
    }

    #[test]
    fn oscillator_dense_output() {
        let times: Vec<f64> = (0..=50).map(|k| 0.2 * k as f64).collect();
        for m in [Method::Dopri5, Method::Dop853] {
            let out = run(m, 1e-11, &times);
            for (t, y) in times.iter().zip(&out) {
                assert!((y[0] - t.cos()).abs() < 1e-8, "{m:?} t={t} {y:?}");
                assert!((y[1] + t.sin()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn higher_order_takes_fewer_steps() {
        let f = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
            Ok(())
        };
        let count = |m| {
            let mut s = Stepper::new(f, 0.0, vec![1.0, 0.0], 20.0, &cfg(m, 1e-12)).unwrap();
            while s.step().unwrap() {}
            assert!((s.y()[0] - 20f64.cos()).abs() < 1e-9);
            s.evaluations
        };
        assert!(count(Method::Dop853) < count(Method::Dopri5));
    }

    #[test]
    fn rhs_error_propagates() {
        let f = |t: f64, _y: &[f64], d: &mut [f64]| {
            d[0] = 1.0;
            if t > 0.5 { Err(Error::TotalCollision { inertia: 0.0 }) } else { Ok(()) }
        };
        let mut s = Stepper::new(f, 0.0, vec![0.0], 1.0, &cfg(Method::Dopri5, 1e-8)).unwrap();
        let mut res = Ok(true);
        while matches!(res, Ok(true)) {
            res = s.step();
        }
        assert!(res.is_err());
    }

    #[test]
    fn finite_time_blowup_underflows() {
        // y' = y^2 from y = 1 blows up at t = 1
        let f = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[0] * y[0];
            Ok(())
        };
        let mut s = Stepper::new(f, 0.0, vec![1.0], 2.0, &cfg(Method::Dopri5, 1e-10)).unwrap();
        let mut res = Ok(true);
        while matches!(res, Ok(true)) {
            res = s.step();
        }
        assert!(matches!(res, Err(Error::StepSizeUnderflow { .. })), "{res:?}");
    }

    #[test]
    fn rejects_bad_tolerances() {
        assert!(IntegratorConfig { rel_tol: 0.0, ..Default::default() }.validate().is_err());
    }
}
