//! Two-center bipolar coordinates `r1 = r23/r12`, `r2 = r31/r12`, the
//! symmetric variables `(nu, rho)` and numeric inversion of the constant-`mu`
//! relations for `alpha = 2` (two roots) and `alpha = 1` (four roots).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Metric, ShapeChart};
use crate::model::{measure_bipolar, Alpha, Masses, COLLISION_EPS};
use crate::roots::polynomial_roots;
use crate::scalar::{neg_power, Scalar};

/// Radicand threshold of the collinear-singularity guard.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Orientation of a shape (`sgn y`) or the sign label of a series branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipolarPoint {
    pub r1: f64,
    pub r2: f64,
}

impl BipolarPoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        BipolarPoint { r1, r2 }
    }

    /// `(1 - (r1 - r2)^2)((r1 + r2)^2 - 1)`, non-negative on real triangles.
    pub fn radicand(&self) -> f64 {
        triangle_radicand(&self.r1, &self.r2)
    }

    pub fn is_physical(&self) -> bool {
        self.r1 > 0.0 && self.r2 > 0.0 && self.radicand() >= 0.0
    }

    pub fn swapped(&self) -> Self {
        BipolarPoint { r1: self.r2, r2: self.r1 }
    }
}

fn triangle_radicand<S: Scalar>(r1: &S, r2: &S) -> S {
    let d = r1.clone() - r2.clone();
    let s = r1.clone() + r2.clone();
    (-d.square()).add_f64(1.0) * s.square().add_f64(-1.0)
}

pub fn bipolar_from_eta(masses: &Masses, eta: Complex64) -> BipolarPoint {
    let zeta = eta / masses.n().sqrt();
    let m12 = masses.m1() + masses.m2();
    BipolarPoint {
        r1: (zeta - masses.m1() / m12).norm(),
        r2: (zeta + masses.m2() / m12).norm(),
    }
}

/// `(x, y)` of a bipolar point on any scalar type; `y` takes the given sign.
pub fn xy_from_bipolar<S: Scalar>(masses: &Masses, r1: &S, r2: &S, sign: Sign) -> (S, S) {
    let sn = masses.n().sqrt();
    let m12 = masses.m1() + masses.m2();
    let x = (r2.square() - r1.square()).scale(sn / 2.0).add_f64((masses.m1() - masses.m2()) * sn / (2.0 * m12));
    let y = triangle_radicand(r1, r2).sqrt().scale(sign.value() * sn / 2.0);
    (x, y)
}

pub fn eta_from_bipolar(masses: &Masses, p: BipolarPoint, sign: Sign) -> Result<Complex64> {
    let t = p.radicand();
    if t < 0.0 {
        return Err(Error::Unphysical { r1: p.r1, r2: p.r2, radicand: t });
    }
    let (x, y) = xy_from_bipolar(masses, &p.r1, &p.r2, sign);
    Ok(Complex64::new(x, y))
}

fn pair_products(masses: &Masses) -> (f64, f64, f64) {
    (masses.m1() * masses.m2(), masses.m2() * masses.m3(), masses.m3() * masses.m1())
}

/// `m1 m2 + m2 m3 s1 + m3 m1 s2` for squared ratios `s1`, `s2`.
fn nu_poly<S: Scalar>(masses: &Masses, s1: &S, s2: &S) -> S {
    let (a, b, c) = pair_products(masses);
    (s1.scale(b) + s2.scale(c)).add_f64(a)
}

/// The bipolar chart `(r1, r2)`.
#[derive(Debug, Clone, Copy)]
pub struct BipolarChart {
    pub masses: Masses,
    pub alpha: f64,
}

impl ShapeChart for BipolarChart {
    fn measure<S: Scalar>(&self, u: &S, w: &S) -> S {
        measure_bipolar(&self.masses, self.alpha, u, w)
    }

    fn inverse_metric<S: Scalar>(&self, u: &S, w: &S) -> [S; 3] {
        let q = self.masses.m1() * self.masses.m2() * self.masses.m3() * self.masses.total();
        let k = nu_poly(&self.masses, &u.square(), &w.square()).square().scale(1.0 / q);
        let off = (u.square() + w.square()).add_f64(-1.0) / (u.clone() * w.clone()).scale(2.0);
        [k.clone(), k.clone() * off, k]
    }

    fn metric_det<S: Scalar>(&self, u: &S, w: &S) -> S {
        let q = self.masses.m1() * self.masses.m2() * self.masses.m3() * self.masses.total();
        let p = nu_poly(&self.masses, &u.square(), &w.square());
        (u.square() * w.square()).scale(4.0 * q * q) / (triangle_radicand(u, w) * p.powi(4))
    }
}

/// The chart `(s1, s2) = (r1^2, r2^2)`, rational in the coordinates; used
/// for `alpha = 2` where the natural unknowns are the squared ratios.
#[derive(Debug, Clone, Copy)]
pub struct SquaredBipolarChart {
    pub masses: Masses,
}

impl ShapeChart for SquaredBipolarChart {
    fn measure<S: Scalar>(&self, u: &S, w: &S) -> S {
        let (a, b, c) = pair_products(&self.masses);
        let rho = (u.recip().scale(b) + w.recip().scale(c)).add_f64(a);
        nu_poly(&self.masses, u, w).scale(1.0 / self.masses.total()) * rho
    }

    fn inverse_metric<S: Scalar>(&self, u: &S, w: &S) -> [S; 3] {
        let q = self.masses.m1() * self.masses.m2() * self.masses.m3() * self.masses.total();
        let k = nu_poly(&self.masses, u, w).square().scale(1.0 / q);
        let off = (u.clone() + w.clone()).add_f64(-1.0).scale(2.0);
        [k.clone() * u.scale(4.0), k.clone() * off, k * w.scale(4.0)]
    }

    fn metric_det<S: Scalar>(&self, u: &S, w: &S) -> S {
        let q = self.masses.m1() * self.masses.m2() * self.masses.m3() * self.masses.total();
        let p = nu_poly(&self.masses, u, w);
        let t = (u.clone() * w.clone()).scale(4.0) - (u.clone() + w.clone()).add_f64(-1.0).square();
        (t * p.powi(4)).scale(4.0 / (q * q)).recip()
    }
}

/// Lower metric, inverse and `sqrt|g|` of the bipolar chart.
pub fn metric_bipolar(masses: &Masses, p: BipolarPoint) -> Result<Metric> {
    let t = p.radicand();
    if t <= DEGENERACY_EPS {
        return Err(Error::CollinearSingularity { radicand: t });
    }
    let (r1, r2) = (p.r1, p.r2);
    let q = masses.m1() * masses.m2() * masses.m3() * masses.total();
    let nu = nu_poly(masses, &(r1 * r1), &(r2 * r2));
    let pre = 4.0 * q * r1 * r2 / (t * nu * nu);
    let a = r1 * r2;
    let b = -(r1 * r1 + r2 * r2 - 1.0) / 2.0;
    let k = nu * nu / q;
    let c = (r1 * r1 + r2 * r2 - 1.0) / (2.0 * r1 * r2);
    Ok(Metric {
        g: [[pre * a, pre * b], [pre * b, pre * a]],
        inv: [[k, k * c], [k * c, k]],
        sqrt_det: 2.0 * q * r1 * r2 / (nu * nu * t.sqrt()),
    })
}

pub fn mu_bipolar(masses: &Masses, alpha: Alpha, p: BipolarPoint) -> Result<f64> {
    for r in [p.r1, p.r2] {
        if r.abs() <= COLLISION_EPS {
            return Err(Error::BinaryCollision { separation: r.abs(), threshold: COLLISION_EPS });
        }
    }
    Ok(measure_bipolar(masses, alpha.value(), &p.r1, &p.r2))
}

/// Symmetric variables of the constant-`mu` elimination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuRho {
    pub nu: f64,
    pub rho: f64,
    pub mu_tilde: f64,
}

/// `nu = m1m2 + m2m3 r1^2 + m3m1 r2^2`, `rho = m1m2 + m2m3/r1^a + m3m1/r2^a`.
pub fn nu_rho(masses: &Masses, alpha: Alpha, p: BipolarPoint) -> Result<NuRho> {
    let a = alpha.value();
    if a != 1.0 && a != 2.0 {
        return Err(Error::InvalidInput(format!("(nu, rho) variables need alpha in {{1, 2}}, got {a}")));
    }
    let mu = mu_bipolar(masses, alpha, p)?;
    let (m12, m23, m31) = pair_products(masses);
    let nu = nu_poly(masses, &(p.r1 * p.r1), &(p.r2 * p.r2));
    let rho = m12 + m23 * neg_power(&p.r1, a) + m31 * neg_power(&p.r2, a);
    let mu_tilde = if a == 2.0 { masses.total() * mu } else { mu * masses.total().sqrt() };
    Ok(NuRho { nu, rho, mu_tilde })
}

/// A solution `(r1^2, r2^2)` of the `alpha = 2` system.
pub type SquaredPair = (Complex64, Complex64);

/// Both solutions of `nu = mu_tilde / rho` with the `rho` definition, as
/// squared ratios. Branch 1 is the root with `|m2m3 r1^2| <= |m3m1 r2^2|`;
/// near `rho = 0` it is the branch with `r1^2 -> -m3/m1`.
pub fn solve_r_strong(masses: &Masses, mu_tilde: f64, rho: Complex64) -> Result<[SquaredPair; 2]> {
    let (m12, m23, m31) = pair_products(masses);
    if rho.norm() == 0.0 {
        return Err(Error::InvalidInput("rho must be nonzero".into()));
    }
    // A = m2m3 s1, B = m3m1 s2: A + B = S, m23^2/A + m31^2/B = R
    let s = mu_tilde / rho - m12;
    let r = rho - m12;
    let scale = r.norm().max(m12);
    if r.norm() <= 1e-14 * scale {
        return Err(Error::DegenerateDiscriminant);
    }
    let b = m31 * m31 - m23 * m23 - r * s;
    let c = s * (m23 * m23);
    let disc = b * b - r * c * 4.0;
    let sq = disc.sqrt();
    let q = if (b.conj() * sq).re >= 0.0 { -(b + sq) / 2.0 } else { -(b - sq) / 2.0 };
    if q.norm() == 0.0 {
        return Err(Error::DegenerateDiscriminant);
    }
    let roots = [q / r, c / q];
    let pairs = roots.map(|a| (a / m23, (s - a) / m31));
    let mut out = pairs;
    let weight = |p: &SquaredPair| (p.0 * m23).norm() - (p.1 * m31).norm();
    if weight(&out[0]) > weight(&out[1]) {
        out.swap(0, 1);
    }
    Ok(out)
}

/// A solution `(r1, r2)` of the `alpha = 1` system.
pub type RatioPair = (Complex64, Complex64);

/// Coefficients (ascending) of the quartic in `r1` obtained by eliminating
/// `r2 = m3m1 r1 / ((rho - m1m2) r1 - m2m3)`.
pub fn newton_quartic(masses: &Masses, mu_tilde: f64, rho: Complex64) -> [Complex64; 5] {
    let (m12, m23, m31) = pair_products(masses);
    let r = rho - m12;
    let k = Complex64::from(m12) - (Complex64::from(mu_tilde) / rho).powi(2);
    [
        k * (m23 * m23),
        -k * r * (2.0 * m23),
        k * r * r + m23.powi(3) + m31.powi(3),
        -r * (2.0 * m23 * m23),
        r * r * m23,
    ]
}

fn polish_newton_pair(masses: &Masses, mu_tilde: f64, rho: Complex64, mut p: RatioPair) -> RatioPair {
    let (m12, m23, m31) = pair_products(masses);
    let target = (Complex64::from(mu_tilde) / rho).powi(2);
    for _ in 0..4 {
        let (r1, r2) = p;
        let f1 = Complex64::from(m12) + r1 * r1 * m23 + r2 * r2 * m31 - target;
        let f2 = Complex64::from(m12) + m23 / r1 + m31 / r2 - rho;
        let j = [[r1 * (2.0 * m23), r2 * (2.0 * m31)], [-m23 / (r1 * r1), -m31 / (r2 * r2)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.norm() == 0.0 || !det.is_finite() {
            break;
        }
        let d1 = (f1 * j[1][1] - f2 * j[0][1]) / det;
        let d2 = (j[0][0] * f2 - j[1][0] * f1) / det;
        let next = (r1 - d1, r2 - d2);
        if !(next.0.is_finite() && next.1.is_finite()) {
            break;
        }
        p = next;
    }
    p
}

/// All four solutions `(r1, r2)` of `nu = (mu_tilde/rho)^2` with the `rho`
/// definition for `alpha = 1`, ordered by `(Re r1, Im r1)`.
pub fn solve_r_newton(masses: &Masses, mu_tilde: f64, rho: Complex64) -> Result<[RatioPair; 4]> {
    let (m12, m23, m31) = pair_products(masses);
    if rho.norm() == 0.0 {
        return Err(Error::InvalidInput("rho must be nonzero".into()));
    }
    let coeffs = newton_quartic(masses, mu_tilde, rho);
    let roots = polynomial_roots(&coeffs)?;
    if roots.len() != 4 {
        return Err(Error::RootFindingFailure(format!("quartic degenerated to degree {}", roots.len())));
    }
    let target = (Complex64::from(mu_tilde) / rho).powi(2);
    let mut out = Vec::with_capacity(4);
    for r1 in roots {
        let d = (rho - m12) * r1 - m23;
        if d.norm() == 0.0 {
            return Err(Error::RootFindingFailure(format!("r2 unbounded at r1 = {r1}")));
        }
        let quotient = r1 * m31 / d;
        // the nu relation gives r2 without the cancellation in d
        let r2sq = (target - m12 - r1 * r1 * m23) / m31;
        let root = r2sq.sqrt();
        let r2 = if (root - quotient).norm() <= (root + quotient).norm() { root } else { -root };
        out.push(polish_newton_pair(masses, mu_tilde, rho, (r1, r2)));
    }
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Ok([out[0], out[1], out[2], out[3]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chart_scalars, metric_xy, necessary_rhs_from, XyChart};
    use crate::geometry::ShapePoint;
    use crate::model::config_measure_eta;
    use crate::scalar::Jet2;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chart_examples() {
        let m = Masses::equal();
        let p = bipolar_from_eta(&m, c(0.0, 1.0));
        assert!((p.r1 - 1.0).abs() < 1e-15 && (p.r2 - 1.0).abs() < 1e-15);
        assert_eq!(bipolar_from_eta(&m, c(0.0, 0.0)), BipolarPoint::new(0.5, 0.5));
        let e = bipolar_from_eta(&m, c(-3f64.sqrt(), 0.0));
        assert!((e.r1 - 2.0).abs() < 1e-15 && (e.r2 - 1.0).abs() < 1e-15);

        let eta = eta_from_bipolar(&m, BipolarPoint::new(1.0, 1.0), Sign::Plus).unwrap();
        assert!((eta - c(0.0, 1.0)).norm() < 1e-15);
        assert_eq!(eta_from_bipolar(&m, BipolarPoint::new(0.3, 0.7), Sign::Plus).unwrap().im, 0.0);
        for s in [Sign::Plus, Sign::Minus] {
            let eta = eta_from_bipolar(&m, BipolarPoint::new(2.0, 1.0), s).unwrap();
            assert!((eta - c(-3f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        assert!(matches!(
            eta_from_bipolar(&m, BipolarPoint::new(3.0, 1.0), Sign::Plus),
            Err(Error::Unphysical { .. })
        ));
    }

    #[test]
    fn measure_examples() {
        let m = Masses::equal();
        let a1 = Alpha::new(1.0).unwrap();
        let a2 = Alpha::new(2.0).unwrap();
        assert!((mu_bipolar(&m, a1, BipolarPoint::new(1.0, 1.0)).unwrap() - 3.0).abs() < 1e-15);
        assert!((mu_bipolar(&m, a2, BipolarPoint::new(0.5, 0.5)).unwrap() - 4.5).abs() < 1e-14);
        assert!((mu_bipolar(&m, a2, BipolarPoint::new(1.0, 1.0)).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn nu_rho_examples() {
        let m = Masses::equal();
        let p = BipolarPoint::new(1.0, 1.0);
        let v2 = nu_rho(&m, Alpha::new(2.0).unwrap(), p).unwrap();
        assert!((v2.nu - 3.0).abs() < 1e-15 && (v2.rho - 3.0).abs() < 1e-15 && (v2.mu_tilde - 9.0).abs() < 1e-14);
        let v1 = nu_rho(&m, Alpha::new(1.0).unwrap(), p).unwrap();
        assert!((v1.mu_tilde - 3.0 * 3f64.sqrt()).abs() < 1e-14);
        assert!(nu_rho(&m, Alpha::new(3.0).unwrap(), p).is_err());
    }

    #[test]
    fn metric_degenerates_on_collinear_locus() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        assert!(matches!(metric_bipolar(&m, BipolarPoint::new(0.4, 0.6)), Err(Error::CollinearSingularity { .. })));
        let near = metric_bipolar(&m, BipolarPoint::new(0.4, 0.6 + 1e-6)).unwrap();
        let far = metric_bipolar(&m, BipolarPoint::new(0.4, 0.7)).unwrap();
        assert!(near.sqrt_det > 100.0 * far.sqrt_det);
    }

    #[test]
    fn strong_roots_examples() {
        let m = Masses::equal();
        let [b1, b2] = solve_r_strong(&m, 9.0, c(3.0, 0.0)).unwrap();
        for (s1, s2) in [b1, b2] {
            assert!((s1 - 1.0).norm() < 1e-7 && (s2 - 1.0).norm() < 1e-7);
        }
        // small rho: the roots of t^2 - s t + s/(rho - 1) with s = 9/rho - 1
        let rho = 0.01;
        let s = 9.0 / rho - 1.0;
        let p = s / (rho - 1.0);
        let d = (s * s - 4.0 * p).sqrt();
        let (lo, hi) = ((s - d) / 2.0, (s + d) / 2.0);
        let [b1, b2] = solve_r_strong(&m, 9.0, c(rho, 0.0)).unwrap();
        assert!((b1.0.re - lo).abs() < 1e-12 * hi && (b1.1.re - hi).abs() < 1e-10 * hi);
        assert!((b2.0.re - hi).abs() < 1e-10 * hi && (b2.1.re - lo).abs() < 1e-12 * hi);
        assert!((lo + 1.00895).abs() < 1e-4 && (hi - 900.00895).abs() < 1e-4);

        // relabeling 1 <-> 2 swaps the branches and the coordinates
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let rho = c(0.3, 0.1);
        let a = solve_r_strong(&m, 40.0, rho).unwrap();
        let b = solve_r_strong(&m.swap12(), 40.0, rho).unwrap();
        assert!((a[0].0 - b[1].1).norm() < 1e-10 * a[0].0.norm().max(1.0));
        assert!((a[0].1 - b[1].0).norm() < 1e-10 * a[0].1.norm().max(1.0));
        assert!(matches!(solve_r_strong(&m, 40.0, c(2.0, 0.0)), Err(Error::DegenerateDiscriminant)));
    }

    #[test]
    fn newton_roots_examples() {
        let m = Masses::equal();
        let roots = solve_r_newton(&m, 3.0 * 3f64.sqrt(), c(3.0, 0.0)).unwrap();
        assert_eq!(roots.len(), 4);
        assert!(roots.iter().any(|(a, b)| (a - 1.0).norm() < 1e-7 && (b - 1.0).norm() < 1e-7));

        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let rho = 1e-3;
        let roots = solve_r_newton(&m, 40.0, c(rho, 0.0)).unwrap();
        let near: Vec<_> = roots.iter().filter(|(a, _)| (a + 3.0).norm() < 0.1).collect();
        assert_eq!(near.len(), 2);
        let lead = 40.0 / (3f64.sqrt() * rho);
        for (_, r2) in near {
            assert!(((r2.norm() - lead) / lead).abs() < 1e-2);
        }
        for (r1, r2) in roots {
            let rho_back = 2.0 + 6.0 / r1 + 3.0 / r2;
            assert!((rho_back - rho).norm() < 1e-12 * (6.0 / r1.norm()).max(1.0));
        }
    }

    fn interior_point() -> impl Strategy<Value = (Masses, BipolarPoint)> {
        (0.3f64..3.0, 0.3f64..3.0, 0.3f64..3.0, 0.2f64..3.0, 0.2f64..3.0).prop_filter_map("interior", |(a, b, cc, r1, r2)| {
            let p = BipolarPoint::new(r1, r2);
            (p.radicand() > 1e-2).then(|| (Masses::new(a, b, cc).unwrap(), p))
        })
    }

    proptest! {
        #[test]
        fn round_trip(( m, p) in interior_point(), up in any::<bool>()) {
            let sign = if up { Sign::Plus } else { Sign::Minus };
            let eta = eta_from_bipolar(&m, p, sign).unwrap();
            prop_assert_eq!(eta.im > 0.0, up);
            let back = bipolar_from_eta(&m, eta);
            prop_assert!((back.r1 - p.r1).abs() < 1e-12 * p.r1.max(1.0));
            prop_assert!((back.r2 - p.r2).abs() < 1e-12 * p.r2.max(1.0));
        }

        #[test]
        fn measure_agrees_with_eta_chart((m, p) in interior_point(), alpha in prop::sample::select(vec![1.0, 2.0, 0.7])) {
            let al = Alpha::new(alpha).unwrap();
            let eta = eta_from_bipolar(&m, p, Sign::Plus).unwrap();
            let a = mu_bipolar(&m, al, p).unwrap();
            let b = config_measure_eta(&m, al, eta).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * a);
        }

        #[test]
        fn metric_is_pullback((m, p) in interior_point()) {
            let g = metric_bipolar(&m, p).unwrap();
            let (r1, r2) = Jet2::pair(p.r1, p.r2);
            let (x, y) = xy_from_bipolar(&m, &r1, &r2, Sign::Plus);
            let h = metric_xy(ShapePoint::new(x.v, y.v)).g[0][0];
            for i in 0..2 {
                for j in 0..2 {
                    let pull = h * (x.d[i] * x.d[j] + y.d[i] * y.d[j]);
                    prop_assert!((pull - g.g[i][j]).abs() < 1e-10 * g.g[0][0].abs().max(g.g[0][1].abs()));
                }
            }
            let det = g.g[0][0] * g.g[1][1] - g.g[0][1] * g.g[1][0];
            prop_assert!((det.sqrt() - g.sqrt_det).abs() < 1e-10 * g.sqrt_det);
            let inv = g.inv;
            prop_assert!((inv[0][0] * g.g[0][0] + inv[0][1] * g.g[1][0] - 1.0).abs() < 1e-10);
        }

        #[test]
        fn relabeling_symmetry((m, p) in interior_point()) {
            let s = m.swap12();
            let q = p.swapped();
            let g = metric_bipolar(&m, p).unwrap();
            let h = metric_bipolar(&s, q).unwrap();
            prop_assert!((g.g[0][0] - h.g[1][1]).abs() < 1e-12 * g.g[0][0].abs());
            prop_assert!((g.g[0][1] - h.g[1][0]).abs() < 1e-12 * g.g[0][0].abs());
            for alpha in [1.0, 2.0] {
                let al = Alpha::new(alpha).unwrap();
                let a = nu_rho(&m, al, p).unwrap();
                let b = nu_rho(&s, al, q).unwrap();
                prop_assert!((a.nu - b.nu).abs() < 1e-12 * a.nu && (a.rho - b.rho).abs() < 1e-12 * a.rho);
                prop_assert!((a.mu_tilde - b.mu_tilde).abs() < 1e-12 * a.mu_tilde);
            }
        }

        #[test]
        fn scalars_are_chart_invariant((m, p) in interior_point(), alpha in prop::sample::select(vec![1.0, 2.0]), cc in -1.0f64..1.0, v in 0.5f64..2.0) {
            let eta = eta_from_bipolar(&m, p, Sign::Plus).unwrap();
            let xy = chart_scalars(&XyChart { masses: m, alpha }, eta.re, eta.im);
            let bp = chart_scalars(&BipolarChart { masses: m, alpha }, p.r1, p.r2);
            let sq = chart_scalars(&SquaredBipolarChart { masses: m }, p.r1 * p.r1, p.r2 * p.r2);
            prop_assume!(xy.grad2 > 1e-6 * xy.mu * xy.mu);
            let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale;
            let others = if alpha == 2.0 { vec![&bp, &sq] } else { vec![&bp] };
            for o in others {
                prop_assert!(close(xy.mu, o.mu, xy.mu));
                prop_assert!(close(xy.grad2, o.grad2, xy.grad2));
                prop_assert!(close(xy.laplacian, o.laplacian, xy.laplacian.abs().max(xy.mu)));
                prop_assert!(close(xy.lambda, o.lambda, xy.lambda.abs().max(xy.grad2 * xy.mu)));
                let f = necessary_rhs_from(&xy, cc, v);
                let g = necessary_rhs_from(o, cc, v);
                prop_assert!(close(f, g, f.abs().max(1.0)), "F {} vs {}", f, g);
            }
        }

        #[test]
        fn nu_rho_product_is_scaled_measure((m, p) in interior_point()) {
            let v = nu_rho(&m, Alpha::new(2.0).unwrap(), p).unwrap();
            prop_assert!((v.nu * v.rho - v.mu_tilde).abs() < 1e-12 * v.mu_tilde);
        }

        #[test]
        fn strong_solve_inverts_forward_map((m, p) in interior_point()) {
            let v = nu_rho(&m, Alpha::new(2.0).unwrap(), p).unwrap();
            let roots = solve_r_strong(&m, v.mu_tilde, c(v.rho, 0.0)).unwrap();
            let hit = roots.iter().any(|(s1, s2)| {
                (s1 - p.r1 * p.r1).norm() < 1e-10 * (1.0 + p.r1 * p.r1) && (s2 - p.r2 * p.r2).norm() < 1e-10 * (1.0 + p.r2 * p.r2)
            });
            prop_assume!((roots[0].0 - roots[1].0).norm() > 1e-4);
            prop_assert!(hit, "{:?} vs {:?}", roots, p);
        }

        #[test]
        fn newton_solve_inverts_forward_map((m, p) in interior_point()) {
            let v = nu_rho(&m, Alpha::new(1.0).unwrap(), p).unwrap();
            let roots = solve_r_newton(&m, v.mu_tilde, c(v.rho, 0.0)).unwrap();
            let best = roots.iter().map(|(a, b)| (a - p.r1).norm() + (b - p.r2).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6, "{:?} vs {:?}", roots, p);
        }
    }
}
