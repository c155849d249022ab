//! Shape-sphere geometry: metric, the scalars `|grad mu|^2`, `Lap mu` and
//! `lambda`, the `D` operator and the right side `F` of the necessary
//! condition for a non-homographic motion with constant `mu`.
//!
//! Everything is written once against [`ShapeChart`] and evaluated through
//! second-order jets, so the `(x, y)` chart and the bipolar charts share one
//! implementation and can be compared against each other.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{config_measure_eta, measure_xy, Alpha, Masses};
use crate::scalar::{Jet2, Scalar};

/// Relative gradient size below which a point counts as critical.
pub const CRITICAL_EPS: f64 = 1e-12;

/// A coordinate chart on the shape sphere carrying the measure.
pub trait ShapeChart {
    /// `mu` at chart coordinates `(u, w)`.
    fn measure<S: Scalar>(&self, u: &S, w: &S) -> S;

    /// Upper-index metric `[g^11, g^12, g^22]`.
    fn inverse_metric<S: Scalar>(&self, u: &S, w: &S) -> [S; 3];

    /// Determinant of the lower-index metric.
    fn metric_det<S: Scalar>(&self, u: &S, w: &S) -> S;
}

/// The `eta = x + iy` chart with `ds^2 = (dx^2 + dy^2) / (1 + x^2 + y^2)^2`.
#[derive(Debug, Clone, Copy)]
pub struct XyChart {
    pub masses: Masses,
    pub alpha: f64,
}

impl ShapeChart for XyChart {
    fn measure<S: Scalar>(&self, u: &S, w: &S) -> S {
        measure_xy(&self.masses, self.alpha, u, w)
    }

    fn inverse_metric<S: Scalar>(&self, u: &S, w: &S) -> [S; 3] {
        let k = (u.square() + w.square()).add_f64(1.0).square();
        [k.clone(), S::from_f64(0.0), k]
    }

    fn metric_det<S: Scalar>(&self, u: &S, w: &S) -> S {
        (u.square() + w.square()).add_f64(1.0).powi(-4)
    }
}

/// Measure, its chart partials and the invariant scalars at one point.
#[derive(Debug, Clone)]
pub struct ChartScalars<S> {
    pub mu: S,
    pub mu_d: [S; 2],
    pub mu_h: [S; 3],
    /// Lower-index metric determinant.
    pub det: S,
    pub grad2: S,
    pub laplacian: S,
    pub lambda: S,
}

/// Evaluates the invariant scalars of `mu` in any chart over any scalar type.
pub fn chart_scalars<S: Scalar, C: ShapeChart>(chart: &C, u: S, w: S) -> ChartScalars<S> {
    let (ju, jw) = Jet2::pair(u, w);
    let m = chart.measure(&ju, &jw);
    let g = chart.inverse_metric(&ju, &jw);
    let det = chart.metric_det(&ju, &jw);

    let idx = [[0usize, 1], [1, 2]];
    let mu1 = [m.d[0].clone(), m.d[1].clone()];
    let gij = |i: usize, j: usize| g[idx[i][j]].v.clone();
    let dg = |k: usize, i: usize, j: usize| g[idx[i][j]].d[k].clone();
    let mij = |i: usize, j: usize| m.hess(i, j).clone();

    let zero = S::from_f64(0.0);
    let mut grad2 = zero.clone();
    for i in 0..2 {
        for j in 0..2 {
            grad2 = grad2 + gij(i, j) * mu1[i].clone() * mu1[j].clone();
        }
    }

    // Lap mu = d_i g^ij mu_j + g^ij mu_ij + g^ij mu_j d_i det / (2 det)
    let mut lap = zero.clone();
    let two_det = det.v.scale(2.0);
    for i in 0..2 {
        let log_d = det.d[i].clone() / two_det.clone();
        for j in 0..2 {
            lap = lap
                + dg(i, i, j) * mu1[j].clone()
                + gij(i, j) * mij(i, j)
                + gij(i, j) * mu1[j].clone() * log_d.clone();
        }
    }

    // d_j |grad mu|^2 = d_j g^kl mu_k mu_l + 2 g^kl mu_jk mu_l
    let mut dgrad = [zero.clone(), zero.clone()];
    for (jj, slot) in dgrad.iter_mut().enumerate() {
        let mut acc = zero.clone();
        for k in 0..2 {
            for l in 0..2 {
                acc = acc
                    + dg(jj, k, l) * mu1[k].clone() * mu1[l].clone()
                    + (gij(k, l) * mij(jj, k) * mu1[l].clone()).scale(2.0);
            }
        }
        *slot = acc;
    }
    let mut lambda = zero;
    for i in 0..2 {
        for j in 0..2 {
            lambda = lambda + gij(i, j) * mu1[i].clone() * dgrad[j].clone();
        }
    }

    ChartScalars {
        mu: m.v.clone(),
        mu_d: mu1,
        mu_h: m.h.clone(),
        det: det.v,
        grad2,
        laplacian: lap,
        lambda,
    }
}

/// `F = -2Cv/|grad mu| + v^2 lambda / (2|grad mu|^4) - v^2 Lap mu / |grad mu|^2`.
///
/// `|grad mu|` is the principal square root of `grad2`; on a continued branch
/// where `grad2` is negative this produces an imaginary first term.
pub fn necessary_rhs_from<S: Scalar>(s: &ChartScalars<S>, c: f64, v: f64) -> S {
    let g = s.grad2.sqrt();
    let t1 = g.recip().scale(-2.0 * c * v);
    let t2 = (s.lambda.clone() / s.grad2.square()).scale(0.5 * v * v);
    let t3 = (s.laplacian.clone() / s.grad2.clone()).scale(v * v);
    t1 + t2 - t3
}

/// A point `eta = x + iy` of the shape plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapePoint {
    pub x: f64,
    pub y: f64,
}

impl ShapePoint {
    pub fn new(x: f64, y: f64) -> Self {
        ShapePoint { x, y }
    }

    pub fn eta(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_eta(eta: Complex64) -> Self {
        ShapePoint { x: eta.re, y: eta.im }
    }

    fn conformal(&self) -> f64 {
        1.0 + self.x * self.x + self.y * self.y
    }
}

/// `mu`, `|grad mu|^2`, `Lap mu` and `lambda` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarBundle {
    pub mu: f64,
    pub grad_norm2: f64,
    pub laplacian: f64,
    pub lambda: f64,
}

/// Metric, inverse and square-root determinant of a 2D chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub g: [[f64; 2]; 2],
    pub inv: [[f64; 2]; 2],
    pub sqrt_det: f64,
}

pub fn metric_xy(p: ShapePoint) -> Metric {
    let k = p.conformal();
    let k2 = k * k;
    Metric {
        g: [[1.0 / k2, 0.0], [0.0, 1.0 / k2]],
        inv: [[k2, 0.0], [0.0, k2]],
        sqrt_det: 1.0 / k2,
    }
}

/// `mu` with its first and second partials in `x`, `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuDerivatives {
    pub mu: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_xx: f64,
    pub mu_xy: f64,
    pub mu_yy: f64,
}

impl MuDerivatives {
    fn grad_sq(&self) -> f64 {
        self.mu_x * self.mu_x + self.mu_y * self.mu_y
    }

    fn curvature_form(&self) -> f64 {
        self.mu_x * self.mu_x * self.mu_yy - 2.0 * self.mu_x * self.mu_y * self.mu_xy + self.mu_y * self.mu_y * self.mu_xx
    }
}

pub fn mu_derivatives(masses: &Masses, alpha: Alpha, p: ShapePoint) -> Result<MuDerivatives> {
    config_measure_eta(masses, alpha, p.eta())?;
    let (x, y) = Jet2::pair(p.x, p.y);
    let m = measure_xy(masses, alpha.value(), &x, &y);
    Ok(MuDerivatives { mu: m.v, mu_x: m.d[0], mu_y: m.d[1], mu_xx: m.h[0], mu_xy: m.h[1], mu_yy: m.h[2] })
}

pub fn scalars(masses: &Masses, alpha: Alpha, p: ShapePoint) -> Result<ScalarBundle> {
    config_measure_eta(masses, alpha, p.eta())?;
    let chart = XyChart { masses: *masses, alpha: alpha.value() };
    let s = chart_scalars(&chart, p.x, p.y);
    Ok(ScalarBundle { mu: s.mu, grad_norm2: s.grad2, laplacian: s.laplacian, lambda: s.lambda })
}

fn ensure_noncritical(d: &MuDerivatives, p: ShapePoint) -> Result<f64> {
    let grad = p.conformal() * d.grad_sq().sqrt();
    if grad < CRITICAL_EPS * (1.0 + d.mu.abs()) {
        return Err(Error::CriticalPoint { grad_norm: grad });
    }
    Ok(grad)
}

/// `Df = (1/sqrt g)(mu_x f_y - mu_y f_x)` for a field given as a jet function.
pub fn d_operator<F>(masses: &Masses, alpha: Alpha, p: ShapePoint, f: F) -> Result<f64>
where
    F: Fn(&Jet2<f64>, &Jet2<f64>) -> Jet2<f64>,
{
    let d = mu_derivatives(masses, alpha, p)?;
    let (x, y) = Jet2::pair(p.x, p.y);
    let fj = f(&x, &y);
    let k = p.conformal();
    Ok(k * k * (d.mu_x * fj.d[1] - d.mu_y * fj.d[0]))
}

/// Shape velocity `d eta / d tau = i v g / |g|` with `g = mu_x + i mu_y`.
pub fn constant_mu_velocity(masses: &Masses, alpha: Alpha, p: ShapePoint, v: f64) -> Result<Complex64> {
    let d = mu_derivatives(masses, alpha, p)?;
    ensure_noncritical(&d, p)?;
    let g = Complex64::new(d.mu_x, d.mu_y);
    Ok(Complex64::i() * v * g / g.norm())
}

/// `eta' ^ eta''` implied by moving along the level set of `mu` at speed `v`.
pub fn wedge_equipotential(masses: &Masses, alpha: Alpha, p: ShapePoint, v: f64) -> Result<f64> {
    let d = mu_derivatives(masses, alpha, p)?;
    ensure_noncritical(&d, p)?;
    Ok(v.powi(3) * d.curvature_form() / d.grad_sq().powf(1.5))
}

/// `eta' ^ eta''` implied by the shape equation of motion.
pub fn wedge_eom(masses: &Masses, alpha: Alpha, p: ShapePoint, c: f64, v: f64, r: f64) -> Result<f64> {
    let d = mu_derivatives(masses, alpha, p)?;
    ensure_noncritical(&d, p)?;
    let a = alpha.value();
    let gn = d.grad_sq().sqrt();
    let radial = p.x * d.mu_x + p.y * d.mu_y;
    Ok(2.0 * v * v * (-c + v * radial / gn) / p.conformal() - r.powf(2.0 - a) * v / a * gn)
}

/// Coordinate-free right side `F` of the necessary condition `r^{2-alpha}/alpha = F`.
pub fn necessary_rhs(masses: &Masses, alpha: Alpha, p: ShapePoint, c: f64, v: f64) -> Result<f64> {
    let d = mu_derivatives(masses, alpha, p)?;
    ensure_noncritical(&d, p)?;
    let chart = XyChart { masses: *masses, alpha: alpha.value() };
    Ok(necessary_rhs_from(&chart_scalars(&chart, p.x, p.y), c, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(x: f64) -> Alpha {
        Alpha::new(x).unwrap()
    }

    fn fd_derivatives(m: &Masses, al: Alpha, p: ShapePoint) -> [f64; 5] {
        // first partials: central step 1e-5; second partials: fourth-order stencil;
        // both shrink with the distance to the nearest collision
        let (c1, c2) = m.collision_etas();
        let e = p.eta();
        let near = (e - c1).norm().min((e - c2).norm());
        let h = 1e-5 * (1.0 + e.norm()).min(near);
        let k = 1e-3 * (1.0 + e.norm()).min(near);
        let f = |dx: f64, dy: f64| config_measure_eta(m, al, Complex64::new(p.x + dx, p.y + dy)).unwrap();
        let second = |ex: f64, ey: f64| {
            (-f(2.0 * k * ex, 2.0 * k * ey) + 16.0 * f(k * ex, k * ey) - 30.0 * f(0.0, 0.0) + 16.0 * f(-k * ex, -k * ey)
                - f(-2.0 * k * ex, -2.0 * k * ey))
                / (12.0 * k * k)
        };
        let fxx = second(1.0, 0.0);
        let fyy = second(0.0, 1.0);
        // mixed partial from the diagonal: f_dd = (fxx + 2 fxy + fyy) / 2 along (1,1)/sqrt2
        let fdd = second(1.0, 1.0);
        [
            (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h),
            (f(0.0, h) - f(0.0, -h)) / (2.0 * h),
            fxx,
            (fdd - fxx - fyy) / 2.0,
            fyy,
        ]
    }

    /// The raw `(x, y)` form of the necessary condition, written out by hand.
    fn raw_rhs(d: &MuDerivatives, p: ShapePoint, c: f64, v: f64) -> f64 {
        let k = p.conformal();
        let g2 = d.grad_sq();
        -2.0 * c * v / (k * g2.sqrt()) + 2.0 * v * v * (p.x * d.mu_x + p.y * d.mu_y) / (k * g2)
            - v * v * d.curvature_form() / (g2 * g2)
    }

    #[test]
    fn metric_examples() {
        let m = metric_xy(ShapePoint::new(0.0, 0.0));
        assert_eq!(m.g, [[1.0, 0.0], [0.0, 1.0]]);
        let m = metric_xy(ShapePoint::new(0.6, 0.8));
        assert!((m.g[0][0] - 0.25).abs() < 1e-15 && (m.g[1][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sphere_area_is_pi() {
        // radial integral of 2 pi rho / (1 + rho^2)^2 with rho = tan(t)
        let n = 20000;
        let h = std::f64::consts::FRAC_PI_2 / n as f64;
        let mut area = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let rho = t.tan();
            let jac = 1.0 / t.cos().powi(2);
            area += 2.0 * std::f64::consts::PI * rho * metric_xy(ShapePoint::new(rho, 0.0)).sqrt_det * jac * h;
        }
        assert!((area - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn lagrange_point_is_critical() {
        let d = mu_derivatives(&Masses::equal(), a(1.0), ShapePoint::new(0.0, 1.0)).unwrap();
        assert!(d.mu_x.abs() < 1e-14 && d.mu_y.abs() < 1e-14);
        let s = scalars(&Masses::equal(), a(1.0), ShapePoint::new(0.0, 1.0)).unwrap();
        assert!(s.grad_norm2 < 1e-26 && s.lambda.abs() < 1e-26);
        assert!(matches!(
            constant_mu_velocity(&Masses::equal(), a(1.0), ShapePoint::new(0.0, 1.0), 1.0),
            Err(Error::CriticalPoint { .. })
        ));
    }

    #[test]
    fn odd_in_x_for_equal_pair() {
        let m = Masses::new(1.3, 1.3, 0.4).unwrap();
        let p = mu_derivatives(&m, a(1.0), ShapePoint::new(0.37, 0.81)).unwrap();
        let q = mu_derivatives(&m, a(1.0), ShapePoint::new(-0.37, 0.81)).unwrap();
        assert!((p.mu_x + q.mu_x).abs() < 1e-13);
    }

    #[test]
    fn lambda_matches_nested_jets() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let p = ShapePoint::new(0.4, 0.7);
        let s = scalars(&m, a(1.0), p).unwrap();
        // |grad mu|^2 as a jet over jets, then contract with the gradient
        let (x, y) = Jet2::pair(Jet2::variable(p.x, 0), Jet2::variable(p.y, 1));
        let mu = measure_xy(&m, 1.0, &x, &y);
        let k = (x.square() + y.square()).add_f64(1.0).square();
        let g2 = k.v.clone() * (mu.d[0].square() + mu.d[1].square());
        let lam = k.v.v * (mu.d[0].v * g2.d[0] + mu.d[1].v * g2.d[1]);
        assert!((lam - s.lambda).abs() < 1e-9 * lam.abs());
    }

    #[test]
    fn d_operator_examples() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let p = ShapePoint::new(0.3, 0.9);
        let dmu = d_operator(&m, a(1.0), p, |x, y| measure_xy(&m, 1.0, x, y)).unwrap();
        assert!(dmu.abs() < 1e-12);
        let eq = Masses::equal();
        let collinear = ShapePoint::new(0.3, 0.0);
        let dx = d_operator(&eq, a(2.0), collinear, |x, _| x.clone()).unwrap();
        assert!(dx.abs() < 1e-13);
    }

    #[test]
    fn velocity_examples() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let p = ShapePoint::new(0.2, 0.5);
        let d = mu_derivatives(&m, a(1.0), p).unwrap();
        let w = constant_mu_velocity(&m, a(1.0), p, 1.7).unwrap();
        assert!((w * Complex64::new(d.mu_x, -d.mu_y)).re.abs() < 1e-12);
        assert!((w.norm() - 1.7).abs() < 1e-14);
        let wn = constant_mu_velocity(&m, a(1.0), p, -1.7).unwrap();
        assert!((w + wn).norm() < 1e-15);
    }

    #[test]
    fn wedge_examples() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let p = ShapePoint::new(0.2, 0.5);
        let w1 = wedge_equipotential(&m, a(1.0), p, 1.3).unwrap();
        let w2 = wedge_equipotential(&m, a(1.0), p, -1.3).unwrap();
        assert!((w1 + w2).abs() < 1e-12 * w1.abs());
        // on the symmetry axis of an equal pair mu_x = mu_xy = 0, leaving mu_xx / |mu_y|
        let eq = Masses::new(1.0, 1.0, 2.0).unwrap();
        let axis = ShapePoint::new(0.0, 0.4);
        let d = mu_derivatives(&eq, a(1.0), axis).unwrap();
        assert!(d.mu_x.abs() < 1e-14 && d.mu_xy.abs() < 1e-13);
        let w = wedge_equipotential(&eq, a(1.0), axis, 1.0).unwrap();
        assert!((w - d.mu_xx / d.mu_y.abs()).abs() < 1e-12 * w.abs());

        let c0 = wedge_eom(&m, a(1.0), p, 0.0, 1.1, 0.8).unwrap();
        let c1 = wedge_eom(&m, a(1.0), p, 1.0, 1.1, 0.8).unwrap();
        assert!((c1 - c0 + 2.0 * 1.1 * 1.1 / p.conformal()).abs() < 1e-12);
        let s1 = wedge_eom(&m, a(2.0), p, 0.5, 1.1, 0.8).unwrap();
        let s2 = wedge_eom(&m, a(2.0), p, 0.5, 1.1, 3.0).unwrap();
        assert!((s1 - s2).abs() < 1e-13);
    }

    #[test]
    fn wedges_balance_at_necessary_condition() {
        // with r^{2-alpha}/alpha = F the two wedge expressions coincide
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let p = ShapePoint::new(-0.3, 0.6);
        let (c, v) = (0.4, 0.9);
        let f = necessary_rhs(&m, a(1.0), p, c, v).unwrap();
        let r = f;
        let lhs = wedge_equipotential(&m, a(1.0), p, v).unwrap();
        let rhs = wedge_eom(&m, a(1.0), p, c, v, r).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn rhs_symmetric_for_equal_pair() {
        let m = Masses::equal();
        let f = |x, y| necessary_rhs(&m, a(2.0), ShapePoint::new(x, y), 0.0, 1.0).unwrap();
        assert!((f(0.3, 0.7) - f(-0.3, 0.7)).abs() < 1e-10 * f(0.3, 0.7).abs());
        assert!((f(0.3, 0.7) - f(0.3, -0.7)).abs() < 1e-10 * f(0.3, 0.7).abs());
    }

    fn point_strategy() -> impl Strategy<Value = (Masses, ShapePoint)> {
        (0.3f64..3.0, 0.3f64..3.0, 0.3f64..3.0, -2.0f64..2.0, 0.05f64..2.0).prop_filter_map("away from collisions", |(a1, a2, a3, x, y)| {
            let m = Masses::new(a1, a2, a3).unwrap();
            let (c1, c2) = m.collision_etas();
            let e = Complex64::new(x, y);
            ((e - c1).norm() > 0.1 && (e - c2).norm() > 0.1).then_some((m, ShapePoint::new(x, y)))
        })
    }

    proptest! {
        #[test]
        fn jet_partials_match_differences((m, p) in point_strategy(), alpha in prop::sample::select(vec![1.0, 2.0, 0.5])) {
            let d = mu_derivatives(&m, a(alpha), p).unwrap();
            let fd = fd_derivatives(&m, a(alpha), p);
            let jet = [d.mu_x, d.mu_y, d.mu_xx, d.mu_xy, d.mu_yy];
            let scale = jet.iter().fold(d.mu.abs(), |s, v| s.max(v.abs()));
            for k in 0..5 {
                prop_assert!((jet[k] - fd[k]).abs() <= 1e-6 * scale, "k={} jet={} fd={}", k, jet[k], fd[k]);
            }
        }

        #[test]
        fn scalars_match_closed_forms((m, p) in point_strategy(), alpha in prop::sample::select(vec![1.0, 2.0])) {
            let d = mu_derivatives(&m, a(alpha), p).unwrap();
            let s = scalars(&m, a(alpha), p).unwrap();
            let k = p.conformal();
            let g2 = k * k * d.grad_sq();
            let lap = k * k * (d.mu_xx + d.mu_yy);
            let lam = 4.0 * k.powi(3) * (p.x * d.mu_x + p.y * d.mu_y) * d.grad_sq()
                + 2.0 * k.powi(4) * (d.mu_x * d.mu_x * d.mu_xx + 2.0 * d.mu_x * d.mu_y * d.mu_xy + d.mu_y * d.mu_y * d.mu_yy);
            prop_assert!(s.grad_norm2 >= 0.0);
            prop_assert!((s.grad_norm2 - g2).abs() <= 1e-12 * g2);
            prop_assert!((s.laplacian - lap).abs() <= 1e-11 * lap.abs().max(k * k * (d.mu_xx.abs() + d.mu_yy.abs())));
            prop_assert!((s.lambda - lam).abs() <= 1e-11 * lam.abs().max(1e-300));
        }

        #[test]
        fn rhs_matches_raw_expression((m, p) in point_strategy(), c in -1.0f64..1.0, v in 0.2f64..2.0) {
            let d = mu_derivatives(&m, a(1.0), p).unwrap();
            prop_assume!(d.grad_sq().sqrt() > 1e-4 * d.mu);
            let f = necessary_rhs(&m, a(1.0), p, c, v).unwrap();
            let raw = raw_rhs(&d, p, c, v);
            prop_assert!((f - raw).abs() <= 1e-12 * (1.0 + raw.abs()), "F={} raw={}", f, raw);
        }

        #[test]
        fn d_of_mu_vanishes((m, p) in point_strategy()) {
            let val = d_operator(&m, a(2.0), p, |x, y| measure_xy(&m, 2.0, x, y)).unwrap();
            let d = mu_derivatives(&m, a(2.0), p).unwrap();
            prop_assert!(val.abs() <= 1e-12 * p.conformal().powi(2) * d.grad_sq().max(1.0));
        }
    }
}
