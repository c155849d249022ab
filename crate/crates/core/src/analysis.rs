//! Numerical companions to the asymptotic argument: central configurations,
//! level sets of `mu`, the constant-`mu` shape flow and scans of the
//! necessary condition along a level set.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipolar::{bipolar_from_eta, eta_from_bipolar, BipolarPoint, Sign};
use crate::dynamics::{IntegratorConfig, Method, Stepper};
use crate::error::{Error, Result};
use crate::geometry::{constant_mu_velocity, mu_derivatives, necessary_rhs, ShapePoint};
use crate::model::{config_measure_eta, Alpha, Masses};

/// Shape-sphere gradient norm below which a point counts as critical.
pub const CRITICAL_GRAD: f64 = 1e-8;
pub const DEFAULT_CONTOUR_STEP: f64 = 1e-2;
pub const DEFAULT_MAX_NODES: usize = 100_000;
/// Level-set tolerance of the contour corrector.
pub const CORRECTOR_TOL: f64 = 1e-12;
/// Spread of `F` (or the implied energy) that counts as non-constant.
pub const SPREAD_THRESHOLD: f64 = 1e-6;

const AXIS_SEEDS: usize = 32;
const CC_TOL: f64 = 1e-10;
const DEDUP_DIST: f64 = 1e-7;

fn conformal(p: ShapePoint) -> f64 {
    1.0 + p.x * p.x + p.y * p.y
}

/// `|grad mu|` in the shape-sphere metric.
pub fn gradient_norm(masses: &Masses, alpha: Alpha, p: ShapePoint) -> Result<f64> {
    let d = mu_derivatives(masses, alpha, p)?;
    Ok(conformal(p) * d.mu_x.hypot(d.mu_y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigType {
    Lagrange,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralConfig {
    pub eta: [f64; 2],
    #[serde(rename = "type")]
    pub kind: ConfigType,
    pub grad_norm: f64,
    /// Number of distinct seeds that converged here.
    pub seeds: usize,
}

impl CentralConfig {
    pub fn point(&self) -> ShapePoint {
        ShapePoint::new(self.eta[0], self.eta[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: [f64; 2],
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralConfigSet {
    pub configs: Vec<CentralConfig>,
    pub failures: Vec<SeedFailure>,
}

/// Angle coordinate of the real axis, `x = tan(theta/2)`, in which the
/// three collinear collision points split `(-pi, pi)` into bounded arcs.
fn axis_arcs(masses: &Masses) -> [(f64, f64); 3] {
    let (e1, e2) = masses.collision_etas();
    let (t1, t2) = (2.0 * e1.atan(), 2.0 * e2.atan());
    let pi = std::f64::consts::PI;
    [(-pi, t2), (t2, t1), (t1, pi)]
}

/// `d mu / d theta` and its derivative along the real axis.
fn axis_derivs(masses: &Masses, alpha: Alpha, theta: f64) -> Result<(f64, f64)> {
    let x = (0.5 * theta).tan();
    let xp = 0.5 * (1.0 + x * x);
    let d = mu_derivatives(masses, alpha, ShapePoint::new(x, 0.0))?;
    Ok((d.mu_x * xp, d.mu_xx * xp * xp + d.mu_x * x * xp))
}

/// Safeguarded Newton for `d mu / d theta = 0` inside one arc.
fn euler_on_arc(masses: &Masses, alpha: Alpha, arc: (f64, f64), seed: f64) -> Result<f64> {
    let width = arc.1 - arc.0;
    let (mut lo, mut hi) = (arc.0 + 1e-9 * width, arc.1 - 1e-9 * width);
    let (flo, fhi) = (axis_derivs(masses, alpha, lo)?.0, axis_derivs(masses, alpha, hi)?.0);
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::SolverStall(format!("no sign change of the axial derivative on ({lo}, {hi})")));
    }
    let mut th = seed.clamp(lo, hi);
    for _ in 0..200 {
        let (f, fp) = axis_derivs(masses, alpha, th)?;
        if f < 0.0 {
            lo = th;
        } else {
            hi = th;
        }
        let newton = th - f / fp;
        let next = if fp > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - th).abs() <= 1e-15 * (1.0 + th.abs()) || hi - lo <= 1e-15 * (1.0 + th.abs()) {
            return Ok(next);
        }
        th = next;
    }
    Err(Error::SolverStall(format!("axial Newton did not settle from seed theta = {seed}")))
}

/// Newton on `grad mu = 0` in the `(x, y)` chart.
fn newton_2d(masses: &Masses, alpha: Alpha, seed: ShapePoint) -> Result<ShapePoint> {
    let mut p = seed;
    for _ in 0..60 {
        let d = mu_derivatives(masses, alpha, p)?;
        let det = d.mu_xx * d.mu_yy - d.mu_xy * d.mu_xy;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SolverStall("singular Hessian".into()));
        }
        let dx = (d.mu_yy * d.mu_x - d.mu_xy * d.mu_y) / det;
        let dy = (d.mu_xx * d.mu_y - d.mu_xy * d.mu_x) / det;
        p = ShapePoint::new(p.x - dx, p.y - dy);
        if dx.hypot(dy) <= 1e-15 * (1.0 + p.eta().norm()) {
            break;
        }
    }
    if gradient_norm(masses, alpha, p)? >= CC_TOL {
        return Err(Error::SolverStall(format!("Newton ended at ({}, {}) with a nonzero gradient", p.x, p.y)));
    }
    Ok(p)
}

fn axis_seeds(masses: &Masses) -> Vec<(usize, f64)> {
    let arcs = axis_arcs(masses);
    let pi = std::f64::consts::PI;
    let mut seeds: Vec<(usize, f64)> = (0..AXIS_SEEDS)
        .map(|k| -pi + (k as f64 + 0.5) * 2.0 * pi / AXIS_SEEDS as f64)
        .filter_map(|th| arcs.iter().position(|a| th > a.0 && th < a.1).map(|i| (i, th)))
        .collect();
    // narrow arcs still get two seeds
    for (i, a) in arcs.iter().enumerate() {
        if seeds.iter().filter(|s| s.0 == i).count() < 2 {
            seeds.push((i, a.0 + (a.1 - a.0) / 3.0));
            seeds.push((i, a.0 + 2.0 * (a.1 - a.0) / 3.0));
        }
    }
    seeds
}

type SeedSolver<'a> = Box<dyn Fn() -> Result<ShapePoint> + Sync + 'a>;

/// Lagrange and Euler configurations of `mu` from a seed grid, deduplicated.
pub fn find_central_configs(masses: &Masses, alpha: Alpha) -> Result<CentralConfigSet> {
    let arcs = axis_arcs(masses);
    let mut seeds: Vec<(ShapePoint, ConfigType, SeedSolver<'_>)> = Vec::new();
    for (i, th) in axis_seeds(masses) {
        let x = (0.5 * th).tan();
        seeds.push((
            ShapePoint::new(x, 0.0),
            ConfigType::Euler,
            Box::new(move || {
                let t = euler_on_arc(masses, alpha, arcs[i], th)?;
                newton_2d(masses, alpha, ShapePoint::new((0.5 * t).tan(), 0.0))
            }),
        ));
    }
    for sign in [Sign::Plus, Sign::Minus] {
        for (r1, r2) in [(1.0, 1.0), (1.03, 0.98), (0.98, 1.03)] {
            let eta = eta_from_bipolar(masses, BipolarPoint::new(r1, r2), sign)?;
            let p = ShapePoint::from_eta(eta);
            seeds.push((p, ConfigType::Lagrange, Box::new(move || newton_2d(masses, alpha, p))));
        }
    }
    let outcomes: Vec<(ShapePoint, ConfigType, Result<ShapePoint>)> = seeds.par_iter().map(|(p, k, run)| (*p, *k, run())).collect();

    let mut configs: Vec<CentralConfig> = Vec::new();
    let mut failures = Vec::new();
    for (seed, kind, out) in outcomes {
        match out {
            Ok(p) => {
                let kind = if p.y.abs() <= 1e-12 * (1.0 + p.x.abs()) { ConfigType::Euler } else { kind };
                if let Some(c) = configs.iter_mut().find(|c| (c.point().eta() - p.eta()).norm() <= DEDUP_DIST * (1.0 + p.eta().norm())) {
                    c.seeds += 1;
                } else {
                    let grad_norm = gradient_norm(masses, alpha, p)?;
                    configs.push(CentralConfig { eta: [p.x, if kind == ConfigType::Euler { 0.0 } else { p.y }], kind, grad_norm, seeds: 1 });
                }
            }
            Err(e) => failures.push(SeedFailure { seed: [seed.x, seed.y], reason: e.to_string() }),
        }
    }
    configs.sort_by(|a, b| {
        let key = |c: &CentralConfig| (c.kind == ConfigType::Euler, -c.eta[1], c.eta[0]);
        key(a).partial_cmp(&key(b)).expect("finite")
    });
    Ok(CentralConfigSet { configs, failures })
}

/// Contour node with shape-sphere arclength `s` from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourNode {
    pub s: f64,
    pub point: ShapePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub mu_level: f64,
    pub points: Vec<ContourNode>,
    pub closed: bool,
}

impl Contour {
    /// Euclidean distance in the `eta` plane from `p` to the contour polyline.
    pub fn distance_to(&self, p: ShapePoint) -> f64 {
        let q = p.eta();
        let mut pts: Vec<Complex64> = self.points.iter().map(|n| n.point.eta()).collect();
        if self.closed {
            if let Some(&first) = pts.first() {
                pts.push(first);
            }
        }
        if pts.len() == 1 {
            return (pts[0] - q).norm();
        }
        pts.windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let t = if d.norm_sqr() == 0.0 { 0.0 } else { ((q - w[0]) * d.conj()).re / d.norm_sqr() };
                (w[0] + d * t.clamp(0.0, 1.0) - q).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn length(&self) -> f64 {
        self.points.last().map_or(0.0, |n| n.s)
    }
}

/// Moves `p` onto the level set along the gradient.
fn correct(masses: &Masses, alpha: Alpha, level: f64, mut p: ShapePoint) -> Result<ShapePoint> {
    let tol = CORRECTOR_TOL * level.abs().max(1.0);
    for _ in 0..50 {
        let d = mu_derivatives(masses, alpha, p)?;
        let res = d.mu - level;
        if res.abs() <= tol {
            return Ok(p);
        }
        let g2 = d.mu_x * d.mu_x + d.mu_y * d.mu_y;
        if g2 == 0.0 {
            return Err(Error::CriticalPoint { grad_norm: 0.0 });
        }
        p = ShapePoint::new(p.x - res * d.mu_x / g2, p.y - res * d.mu_y / g2);
    }
    Err(Error::NewtonDivergence(format!("level-set corrector did not reach mu = {level}")))
}

fn sphere_distance(a: ShapePoint, b: ShapePoint) -> f64 {
    // chordal distance on the shape sphere, which matches arclength to second order
    2.0 * (a.eta() - b.eta()).norm() / (conformal(a) * conformal(b)).sqrt()
}

/// Traces the level set through `seed`; on failure returns the nodes found so far.
pub fn trace_mu_contour_partial(
    masses: &Masses,
    alpha: Alpha,
    mu_level: f64,
    seed: ShapePoint,
    step: f64,
    max_nodes: usize,
) -> (Contour, Option<Error>) {
    let mut contour = Contour { mu_level, points: Vec::new(), closed: false };
    if !(step > 0.0) || max_nodes < 2 {
        return (contour, Some(Error::InvalidInput("contour step must be positive and max_nodes at least 2".into())));
    }
    let critical = |p: ShapePoint| -> Result<()> {
        let g = gradient_norm(masses, alpha, p)?;
        if g < CRITICAL_GRAD {
            return Err(Error::CriticalPoint { grad_norm: g });
        }
        Ok(())
    };
    let start = match critical(seed).and_then(|_| correct(masses, alpha, mu_level, seed)) {
        Ok(p) => p,
        Err(e) => return (contour, Some(e)),
    };
    contour.points.push(ContourNode { s: 0.0, point: start });
    let mut p = start;
    let mut s = 0.0;
    let mut left_seed = false;
    while contour.points.len() < max_nodes {
        let advance = || -> Result<ShapePoint> {
            critical(p)?;
            // midpoint predictor along the level-set tangent, step measured on the sphere
            let half = constant_mu_velocity(masses, alpha, p, 0.5 * step * conformal(p))?;
            let mid = ShapePoint::from_eta(p.eta() + half);
            let dir = constant_mu_velocity(masses, alpha, mid, step * conformal(mid))?;
            correct(masses, alpha, mu_level, ShapePoint::from_eta(p.eta() + dir))
        };
        let q = match advance() {
            Ok(q) => q,
            Err(e) => return (contour, Some(e)),
        };
        let to_start = sphere_distance(q, start);
        if left_seed && to_start <= 1.5 * step && s > 4.0 * step {
            // close the loop onto the seed
            contour.closed = true;
            return (contour, None);
        }
        if to_start > 2.0 * step {
            left_seed = true;
        }
        s += sphere_distance(p, q);
        contour.points.push(ContourNode { s, point: q });
        p = q;
    }
    let nodes = contour.points.len();
    (contour, Some(Error::OpenContourBudget { nodes }))
}

/// Predictor-corrector continuation of `mu = mu_level` from `seed`.
pub fn trace_mu_contour(masses: &Masses, alpha: Alpha, mu_level: f64, seed: ShapePoint, step: f64, max_nodes: usize) -> Result<Contour> {
    match trace_mu_contour_partial(masses, alpha, mu_level, seed, step, max_nodes) {
        (c, None) => Ok(c),
        (_, Some(e)) => Err(e),
    }
}

/// Point with `mu = mu_level` on the ray `from + t dir`, `t > 0`, found by
/// bisection; `mu(from)` must lie below the level.
pub fn seed_on_ray(masses: &Masses, alpha: Alpha, mu_level: f64, from: ShapePoint, dir: Complex64) -> Result<ShapePoint> {
    let at = |t: f64| ShapePoint::from_eta(from.eta() + dir * t);
    let mu = |t: f64| config_measure_eta(masses, alpha, at(t).eta());
    if mu(0.0)? >= mu_level {
        return Err(Error::InvalidInput(format!("mu at the ray origin is not below {mu_level}")));
    }
    let mut hi = 1e-3;
    while mu(hi).map(|m| m < mu_level).unwrap_or(false) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidInput(format!("level {mu_level} not reached along the ray")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match mu(mid) {
            Ok(m) if m < mu_level => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// One node of a necessary-condition scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanNode {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub r1: f64,
    pub r2: f64,
    pub mu: f64,
    pub f: f64,
    /// Size variable implied by `r^{2-alpha}/alpha = F` (absent for `alpha = 2`).
    pub implied_r: Option<f64>,
    /// Energy implied by that size along the contour at shape speed `v`.
    pub implied_e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub alpha: f64,
    pub mu_level: f64,
    pub c: f64,
    pub v: f64,
    pub closed: bool,
    pub nodes: Vec<ScanNode>,
    pub f_min: f64,
    pub f_max: f64,
    pub f_spread: f64,
    /// `max F - 1/2` and `min F - 1/2` for `alpha = 2`.
    pub f_minus_half_range: Option<[f64; 2]>,
    pub implied_e_spread: Option<f64>,
    /// The conjectured identity fails on this contour: `F` (for `alpha = 2`)
    /// or the implied energy varies by more than the spread threshold.
    pub conjecture_consistent: bool,
}

/// Evaluates the necessary condition at every contour node.
pub fn scan_necessary_condition(masses: &Masses, alpha: Alpha, contour: &Contour, c: f64, v: f64) -> Result<ScanReport> {
    let a = alpha.value();
    if contour.points.is_empty() {
        return Err(Error::InvalidInput("empty contour".into()));
    }
    let mut nodes: Vec<ScanNode> = contour
        .points
        .par_iter()
        .map(|n| {
            let p = n.point;
            let f = necessary_rhs(masses, alpha, p, c, v)?;
            let b = bipolar_from_eta(masses, p.eta());
            let implied_r = if a == 2.0 { None } else { Some((a * f).powf(1.0 / (2.0 - a))) };
            Ok(ScanNode {
                s: n.s,
                x: p.x,
                y: p.y,
                r1: b.r1,
                r2: b.r2,
                mu: config_measure_eta(masses, alpha, p.eta())?,
                f,
                implied_r,
                implied_e: None,
            })
        })
        .collect::<Result<_>>()?;

    if a != 2.0 && nodes.len() >= 3 {
        // rdot = (dr/d sigma) v (1 + |eta|^2) / r^2 with sigma the Euclidean arclength in eta
        let n = nodes.len();
        let pts: Vec<Complex64> = nodes.iter().map(|k| Complex64::new(k.x, k.y)).collect();
        let rs: Vec<f64> = nodes.iter().map(|k| k.implied_r.unwrap_or(f64::NAN)).collect();
        for i in 0..n {
            let (prev, next) = if contour.closed {
                ((i + n - 1) % n, (i + 1) % n)
            } else {
                (i.saturating_sub(1), (i + 1).min(n - 1))
            };
            let sigma = (pts[next] - pts[i]).norm() + (pts[i] - pts[prev]).norm();
            let r = rs[i];
            let drds = if sigma > 0.0 { (rs[next] - rs[prev]) / sigma } else { 0.0 };
            let w = 1.0 + pts[i].norm_sqr();
            let rdot = drds * v * w / (r * r);
            let mu = nodes[i].mu;
            nodes[i].implied_e = Some(0.5 * rdot * rdot + (c * c + v * v) / (2.0 * r * r) - mu / (a * r.powf(a)));
        }
    }

    let range = |vals: &mut dyn Iterator<Item = f64>| vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (f_min, f_max) = range(&mut nodes.iter().map(|k| k.f));
    let implied_e_spread = (a != 2.0).then(|| {
        let (lo, hi) = range(&mut nodes.iter().filter_map(|k| k.implied_e));
        hi - lo
    });
    let f_spread = f_max - f_min;
    let conjecture_consistent = if a == 2.0 { f_spread > SPREAD_THRESHOLD } else { implied_e_spread.is_some_and(|s| s > SPREAD_THRESHOLD) };
    Ok(ScanReport {
        alpha: a,
        mu_level: contour.mu_level,
        c,
        v,
        closed: contour.closed,
        f_min,
        f_max,
        f_spread,
        f_minus_half_range: (a == 2.0).then_some([f_min - 0.5, f_max - 0.5]),
        implied_e_spread,
        nodes,
        conjecture_consistent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub tau: f64,
    pub point: ShapePoint,
    pub mu: f64,
}

/// Integrates `deta/dtau = i v (dmu/deta) / |dmu/deta|` and samples it at
/// `n + 1` equally spaced `tau` values.
pub fn constant_mu_flow(masses: &Masses, alpha: Alpha, seed: ShapePoint, v: f64, tau_span: f64, n: usize) -> Result<Vec<FlowSample>> {
    if n == 0 || !(tau_span > 0.0) {
        return Err(Error::InvalidInput("flow needs a positive span and at least one interval".into()));
    }
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let p = ShapePoint::new(y[0], y[1]);
        if gradient_norm(masses, alpha, p)? < CRITICAL_GRAD {
            return Err(Error::CriticalPoint { grad_norm: gradient_norm(masses, alpha, p)? });
        }
        let d = constant_mu_velocity(masses, alpha, p, v)?;
        dy[0] = d.re;
        dy[1] = d.im;
        Ok(())
    };
    let cfg = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-13, method: Method::Dop853, ..Default::default() };
    let mut st = Stepper::new(rhs, 0.0, vec![seed.x, seed.y], tau_span, &cfg)?;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let tau = tau_span * k as f64 / n as f64;
        while st.t() < tau {
            st.step()?;
        }
        let y = st.interpolate(tau)?;
        let point = ShapePoint::new(y[0], y[1]);
        out.push(FlowSample { tau, point, mu: config_measure_eta(masses, alpha, point.eta())? });
    }
    Ok(out)
}
