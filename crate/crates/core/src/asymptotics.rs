//! Series expansions of the constant-`mu` locus near `rho = 0` and the
//! mechanical check of their leading coefficients.
//!
//! For `alpha = 2` the locus is parametrized by squared side ratios
//! `(r1^2, r2^2)(rho)`; the right side `F` of the necessary condition must
//! then equal `1/2` identically, but its expansion starts at `rho^2`.
//! For `alpha = 1` the four branches `(r1, r2)(rho)` give `r = F` and the
//! energy `E(rho)`, whose leading `rho^-8` coefficient is nonzero, so `E`
//! cannot be constant.
//!
//! Coefficients are carried in [`MpComplex`] at a configurable precision.
//! The branch expansions come from Newton iteration on series, and all
//! scalars are evaluated in bipolar charts through [`chart_scalars`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipolar::{BipolarChart, Sign, SquaredBipolarChart};
use crate::error::{Error, Result};
use crate::geometry::{chart_scalars, ChartScalars};
use crate::model::Masses;
use crate::mp::{with_digits, MpComplex, DEFAULT_DIGITS};
use crate::scalar::Scalar;
use crate::series::LaurentSeries;

pub type Series = LaurentSeries<MpComplex>;

/// Default number of series terms solved for in each branch.
pub const DEFAULT_ORDER: i32 = 8;
const MAX_ORDER: i32 = 64;

/// Relative size of a coefficient that must vanish.
pub const VANISHING_TOL: f64 = 1e-20;
/// Relative tolerance of a leading-coefficient comparison.
pub const COEFFICIENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Series terms per branch (raised automatically when too few survive).
    pub order: i32,
    /// Significant decimal digits of the coefficient arithmetic.
    pub digits: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { order: DEFAULT_ORDER, digits: DEFAULT_DIGITS }
    }
}

fn constant(x: f64) -> Series {
    Series::from_f64(x)
}

fn newton_steps(order: i32) -> usize {
    (order.max(1) as f64).log2().ceil() as usize + 3
}

fn residual_converged(f: &Series, scale: f64) -> bool {
    f.terms().all(|(_, c)| c.magnitude() <= 1e-25 * scale)
}

/// Squared ratios `(r1^2, r2^2)` along the `alpha = 2` branch `branch` (1 or 2),
/// known to `O(rho^order)` in the finite component.
pub fn branch_expansion_strong(masses: &Masses, mu_tilde: f64, branch: u8, order: i32) -> Result<(Series, Series)> {
    match branch {
        1 => strong_branch_one(masses, mu_tilde, order),
        2 => strong_branch_one(&masses.swap12(), mu_tilde, order).map(|(a, b)| (b, a)),
        _ => Err(Error::InvalidInput(format!("strong-force branch must be 1 or 2, got {branch}"))),
    }
}

fn strong_branch_one(masses: &Masses, mu_tilde: f64, order: i32) -> Result<(Series, Series)> {
    let (m1, m2, m3) = (masses.m1(), masses.m2(), masses.m3());
    let (m12, m23, m31) = (m1 * m2, m2 * m3, m3 * m1);
    let rho = Series::variable();
    let nu = rho.recip().scale(mu_tilde);
    // linear relation m23 s1 + m31 s2 = mu_tilde / rho - m12
    let s2_of = |s1: &Series| (nu.add_f64(-m12) - s1.scale(m23)).scale(1.0 / m31);
    let f_of = |s1: &Series, s2: &Series| s1.recip().scale(m23) + s2.recip().scale(m31) - rho.clone() + constant(m12);

    let mut s1 = constant(-m3 / m1);
    for _ in 0..newton_steps(order) {
        let s2 = s2_of(&s1);
        let f = f_of(&s1, &s2);
        let fp = (s2.square().recip() - s1.square().recip()).scale(m23);
        s1 = (s1 - f / fp).with_cutoff(order);
    }
    let s2 = s2_of(&s1);
    let f = f_of(&s1, &s2);
    if !residual_converged(&f, m12 + m23 + m31) {
        return Err(Error::NewtonDivergence(format!("strong-force branch residual {f:?}")));
    }
    Ok((s1, s2))
}

/// Ratios `(r1, r2)` along the `alpha = 1` branch labelled by `sign` and
/// `which` (1: `r1 -> -m3/m1`; 2: the relabeled image with `r2 -> -m3/m2`).
pub fn branch_expansion_newton(masses: &Masses, mu_tilde: f64, sign: Sign, which: u8, order: i32) -> Result<(Series, Series)> {
    match which {
        1 => newton_branch_one(masses, mu_tilde, sign, order),
        2 => newton_branch_one(&masses.swap12(), mu_tilde, sign, order).map(|(a, b)| (b, a)),
        _ => Err(Error::InvalidInput(format!("Newton branch must be 1 or 2, got {which}"))),
    }
}

fn newton_branch_one(masses: &Masses, mu_tilde: f64, sign: Sign, order: i32) -> Result<(Series, Series)> {
    let (m1, m2, m3) = (masses.m1(), masses.m2(), masses.m3());
    let (m12, m23, m31) = (m1 * m2, m2 * m3, m3 * m1);
    let a = (m1 * m3).powf(1.5);
    let rho = Series::variable();
    // -m3/m1 formed from the same pair products the chart uses, in working
    // precision, so that m1m2 + m2m3/r1 cancels exactly at rho = 0
    let k1 = -(constant(m23) / constant(m12));
    // r1 = -(m3/m1)(1 + rho u), r2 = m3m1 / (rho h), h = 1 - m1m2 u / (1 + rho u)
    let parts = |u: &Series| {
        let w = (rho.clone() * u.clone()).add_f64(1.0);
        let r1 = w.clone() * k1.clone();
        let h = constant(1.0) - (u.clone() / w.clone()).scale(m12);
        (w, r1, h)
    };
    let g_of = |r1: &Series, h: &Series| {
        let rho2 = rho.square();
        rho2.scale(m12) + rho2 * r1.square().scale(m23) + h.square().recip().scale(m31.powi(3)) - constant(mu_tilde * mu_tilde)
    };

    let mut u = constant((mu_tilde + sign.value() * a) / (m12 * mu_tilde));
    for _ in 0..newton_steps(order) {
        let (w, r1, h) = parts(&u);
        let g = g_of(&r1, &h);
        let dr1 = rho.clone() * k1.clone();
        let dh = w.square().recip().scale(-m12);
        let gp = (rho.square() * r1 * dr1).scale(2.0 * m23) - (h.powi(3).recip() * dh).scale(2.0 * m31.powi(3));
        u = (u - g / gp).with_cutoff(order);
    }
    let (_, r1, h) = parts(&u);
    let g = g_of(&r1, &h);
    if !residual_converged(&g, mu_tilde * mu_tilde) {
        return Err(Error::NewtonDivergence(format!("Newton-potential branch residual {g:?}")));
    }
    let r2 = (rho * h).recip().scale(m31);
    Ok((r1, r2))
}

/// `F = -2Cv/|grad mu| + v^2 lambda/(2|grad mu|^4) - v^2 Lap mu/|grad mu|^2`
/// with the final sum left unsnapped so that cancelled orders keep their residue.
fn rhs_series(s: &ChartScalars<Series>, c: f64, v: f64) -> Series {
    let t1 = s.grad2.sqrt().recip().scale(-2.0 * c * v);
    let t2 = (s.lambda.clone() / s.grad2.square()).scale(0.5 * v * v);
    let t3 = (s.laplacian.clone() / s.grad2.clone()).scale(v * v);
    t1.add_exact(&t2).sub_exact(&t3)
}

/// Right side `F(rho)` of the necessary condition on an `alpha = 2` branch.
pub fn strong_rhs(masses: &Masses, mu_tilde: f64, branch: u8, c: f64, v: f64, order: i32) -> Result<Series> {
    let (s1, s2) = branch_expansion_strong(masses, mu_tilde, branch, order)?;
    let s = chart_scalars(&SquaredBipolarChart { masses: *masses }, s1, s2);
    Ok(rhs_series(&s, c, v))
}

/// `(df/dt)^2 = v^2 (D f)^2 / (r^4 |grad mu|^2)` for a field with chart
/// gradient `grad_f`, using `d/dt = (v / (r^2 |grad mu|)) D`.
///
/// The square is rational in the chart data, so no branch of `|grad mu|` or
/// orientation of the chart enters.
pub fn time_derivative_series(s: &ChartScalars<Series>, grad_f: &[Series; 2], r: &Series, v: f64) -> Series {
    let df = s.mu_d[0].clone() * grad_f[1].clone() - s.mu_d[1].clone() * grad_f[0].clone();
    let d2 = df.square() / s.det.clone();
    (d2 / (r.powi(4) * s.grad2.clone())).scale(v * v)
}

/// Every series along one `alpha = 1` branch.
#[derive(Debug, Clone)]
pub struct NewtonBranchSeries {
    pub r1: Series,
    pub r2: Series,
    pub inv_grad2: Series,
    pub lambda: Series,
    pub laplacian: Series,
    /// Size variable fixed by the necessary condition.
    pub r: Series,
    /// `(d rho / dt)^2`.
    pub drho_dt_sq: Series,
    pub energy: Series,
}

pub fn newton_branch_series(masses: &Masses, mu_tilde: f64, sign: Sign, which: u8, c: f64, v: f64, order: i32) -> Result<NewtonBranchSeries> {
    let (r1, r2) = branch_expansion_newton(masses, mu_tilde, sign, which, order)?;
    let s = chart_scalars(&BipolarChart { masses: *masses, alpha: 1.0 }, r1.clone(), r2.clone());
    let r = rhs_series(&s, c, v);
    let grad_rho = [
        r1.square().recip().scale(-masses.m2() * masses.m3()),
        r2.square().recip().scale(-masses.m3() * masses.m1()),
    ];
    let x = time_derivative_series(&s, &grad_rho, &r, v);
    let dr = r.derivative();
    let mu = mu_tilde / masses.total().sqrt();
    let kinetic = (dr.square() * x.clone()).scale(0.5);
    let energy = kinetic + r.square().recip().scale(0.5 * (c * c + v * v)) - r.recip().scale(mu);
    Ok(NewtonBranchSeries {
        inv_grad2: s.grad2.recip(),
        lambda: s.lambda,
        laplacian: s.laplacian,
        r1,
        r2,
        r,
        drho_dt_sq: x,
        energy,
    })
}

/// Leading `rho^2` coefficient of `F` on `alpha = 2` branch 1.
pub fn strong_rho2_closed_form(masses: &Masses, mu_tilde: f64, c: f64, v: f64) -> Complex64 {
    let (m1, m2, m3, mt) = (masses.m1(), masses.m2(), masses.m3(), masses.total());
    let real = -v * (mu_tilde + m1 * m1 * (m2 * m2 + m2 * m3 - m3 * m3) + m1 * m2 * m3 * m3 + m2 * m2 * m3 * m3);
    let imag = 2.0 * c * m1 * m3 * (m2.powi(3) * mt).sqrt();
    Complex64::new(real, imag) * (mt * v / (2.0 * m1 * m1 * m2 * m2)) / (mu_tilde * mu_tilde)
}

/// Closed-form leading coefficients on `alpha = 1` branch 1, as coefficients
/// of plain powers of `rho`.
#[derive(Debug, Clone, Copy)]
pub struct NewtonClosedForms {
    pub inv_grad2: f64,
    pub lambda: f64,
    pub laplacian: f64,
    /// The `Lap mu` coefficient cancels identically (equal-mass type cases).
    pub laplacian_degenerate: bool,
    pub r: f64,
    pub drho_dt_sq: f64,
    pub energy_printed: f64,
    pub energy_consistent: f64,
}

pub fn newton_closed_forms(masses: &Masses, mu_tilde: f64, sign: Sign, v: f64) -> NewtonClosedForms {
    let (m1, m2, m3, mt) = (masses.m1(), masses.m2(), masses.m3(), masses.total());
    let s = sign.value();
    let a = (m1 * m3).powf(1.5);
    let mt2 = mu_tilde;
    let lap_terms = ((m1 + m2) * m3.powi(3), m1.powi(3) * (m2 + m3));
    let laplacian_degenerate = (lap_terms.0 - lap_terms.1).abs() <= 1e-14 * lap_terms.0.max(lap_terms.1);
    let kp = a + s * mt2;
    let r = -s * 3.0 * v * v * kp * mt.sqrt() / (4.0 * m1 * m1 * m2 * m2) / mt2.powi(2);
    // (rho / mu~^2 * drho/dt)^2 = X (mu~/rho)^8, so (drho/dt)^2 = X mu~^12 rho^-10
    let x = -64.0 * m1.powi(9) * m2.powi(7) / (81.0 * m3.powi(3) * mt.powi(3) * v.powi(6) * kp.powi(4));
    let e_printed = -16.0 * m1.powi(5) * m2.powi(3) / (9.0 * m3.powi(3) * mt * mt * kp * kp * v * v);
    NewtonClosedForms {
        inv_grad2: mt * mt * m3.powi(3) / (m1.powi(3) * m2) / mt2.powi(6),
        lambda: 3.0 * m1.powi(4) * (-s * a - mt2) / (2.0 * m3.powi(6) * mt.powf(3.5)) * mt2.powi(10),
        laplacian: (lap_terms.0 - lap_terms.1) / (m3.powi(3) * mt.powf(1.5)) * mt2.powi(3),
        laplacian_degenerate,
        r,
        drho_dt_sq: x * mt2.powi(12),
        energy_printed: e_printed * mt2.powi(8),
        // r = K rho^2 gives (dr/drho)^2 X / 2 = 2 K^2 X at order rho^-8
        energy_consistent: 2.0 * r * r * x * mt2.powi(12),
    }
}

/// Comparison of an engine coefficient with its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub expected_exponent: i32,
    pub observed_exponent: Option<i32>,
    pub engine: [f64; 2],
    pub closed_form: [f64; 2],
    pub rel_error: f64,
    pub tolerance: f64,
    /// Whether this comparison decides the verdict.
    pub gating: bool,
    pub passed: bool,
}

/// A coefficient that must vanish (or must not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeCheck {
    pub quantity: String,
    pub exponent: i32,
    /// `|c_k| mu~^k` relative to the reference term.
    pub relative_magnitude: f64,
    pub bound: f64,
    pub must_vanish: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: String,
    pub order_used: i32,
    pub comparisons: Vec<Comparison>,
    pub magnitudes: Vec<MagnitudeCheck>,
    pub flags: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub alpha: u8,
    pub masses: [f64; 3],
    pub mu_tilde: f64,
    pub c: f64,
    pub v: f64,
    pub digits: u32,
    pub order_requested: i32,
    pub branches: Vec<BranchReport>,
    pub passed: bool,
    pub conclusion: String,
}

impl ExpansionReport {
    /// Iterates every comparison across branches.
    pub fn comparisons(&self) -> impl Iterator<Item = (&str, &Comparison)> {
        self.branches.iter().flat_map(|b| b.comparisons.iter().map(move |c| (b.branch.as_str(), c)))
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = (&str, &MagnitudeCheck)> {
        self.branches.iter().flat_map(|b| b.magnitudes.iter().map(move |c| (b.branch.as_str(), c)))
    }
}

fn weight(c: &MpComplex, k: i32, mu_tilde: f64) -> f64 {
    c.magnitude() * mu_tilde.powi(k)
}

/// First exponent whose weighted coefficient is not negligible next to the
/// largest weighted coefficient among the reliable terms.
fn observed_leading(s: &Series, mu_tilde: f64, window: i32) -> Option<i32> {
    let (k0, _) = s.leading()?;
    let end = s.cutoff().unwrap_or(k0 + window).min(k0 + window);
    let weights: Vec<(i32, f64)> = (k0..end).map(|k| (k, weight(&s.coeff(k).unwrap(), k, mu_tilde))).collect();
    let max = weights.iter().map(|w| w.1).fold(0.0, f64::max);
    weights.iter().find(|w| w.1 > VANISHING_TOL * max).map(|w| w.0)
}

fn compare(quantity: &str, s: &Series, k: i32, closed: Complex64, mu_tilde: f64, gating: bool) -> Comparison {
    let engine = s.coeff(k).map(|c| c.to_c64());
    let observed = observed_leading(s, mu_tilde, 4);
    let (engine, rel) = match engine {
        Some(e) => (e, (e - closed).norm() / closed.norm()),
        None => (Complex64::new(f64::NAN, f64::NAN), f64::INFINITY),
    };
    let passed = observed == Some(k) && rel <= COEFFICIENT_TOL;
    Comparison {
        quantity: quantity.to_string(),
        expected_exponent: k,
        observed_exponent: observed,
        engine: [engine.re, engine.im],
        closed_form: [closed.re, closed.im],
        rel_error: rel,
        tolerance: COEFFICIENT_TOL,
        gating,
        passed,
    }
}

fn magnitude_check(quantity: &str, s: &Series, k: i32, reference: i32, mu_tilde: f64, must_vanish: bool) -> MagnitudeCheck {
    let rel = match (s.coeff(k), s.coeff(reference)) {
        (Some(c), Some(r)) => weight(&c, k, mu_tilde) / weight(&r, reference, mu_tilde),
        _ => f64::NAN,
    };
    let passed = if must_vanish { rel < VANISHING_TOL } else { rel > VANISHING_TOL };
    MagnitudeCheck { quantity: quantity.to_string(), exponent: k, relative_magnitude: rel, bound: VANISHING_TOL, must_vanish, passed }
}

fn check_digits(cfg: &EngineConfig) -> Result<()> {
    // resolving 1e-20 needs a comfortable margin of working digits
    if cfg.digits < 28 {
        return Err(Error::PrecisionExhausted(format!(
            "{} digits cannot resolve relative magnitudes of {VANISHING_TOL:e}; use at least 28",
            cfg.digits
        )));
    }
    Ok(())
}

/// Raises the order until `ok` accepts the result.
fn with_adaptive_order<T>(start: i32, mut run: impl FnMut(i32) -> Result<T>, ok: impl Fn(&T) -> bool) -> Result<(T, i32)> {
    let mut order = start.max(1);
    loop {
        let out = run(order)?;
        if ok(&out) {
            return Ok((out, order));
        }
        if order >= MAX_ORDER {
            return Err(Error::PrecisionExhausted(format!("series still lacks reliable terms at order {order}")));
        }
        order = (order + 4).min(MAX_ORDER);
    }
}

fn known_through(s: &Series, k: i32) -> bool {
    s.cutoff().is_none_or(|c| c > k)
}

fn strong_branch_report(masses: &Masses, mu_tilde: f64, branch: u8, c: f64, v: f64, cfg: &EngineConfig) -> Result<BranchReport> {
    with_digits(cfg.digits, || {
        let (f, order) = with_adaptive_order(cfg.order, |n| strong_rhs(masses, mu_tilde, branch, c, v, n), |f| known_through(f, 3))?;
        let closed_masses = if branch == 1 { *masses } else { masses.swap12() };
        let closed = strong_rho2_closed_form(&closed_masses, mu_tilde, c, v);
        let cmp = compare("F", &f, 2, closed, mu_tilde, true);
        let mags = vec![
            magnitude_check("F", &f, 0, 2, mu_tilde, true),
            magnitude_check("F", &f, 1, 2, mu_tilde, true),
        ];
        let mut flags = Vec::new();
        if let Some(k) = f.leading_exponent().filter(|&k| k < 0) {
            flags.push(format!("F carries a rho^{k} term"));
        }
        let passed = cmp.passed && mags.iter().all(|m| m.passed);
        Ok(BranchReport { branch: format!("strong-{branch}"), order_used: order, comparisons: vec![cmp], magnitudes: mags, flags, passed })
    })
}

/// Checks the `alpha = 2` expansion on both branches.
pub fn verify_strong(masses: &Masses, mu_tilde: f64, c: f64, v: f64, cfg: &EngineConfig) -> Result<ExpansionReport> {
    check_digits(cfg)?;
    if v == 0.0 || mu_tilde <= 0.0 {
        return Err(Error::InvalidInput("verification needs v != 0 and mu_tilde > 0".into()));
    }
    let branches: Vec<BranchReport> =
        [1u8, 2].par_iter().map(|&b| strong_branch_report(masses, mu_tilde, b, c, v, cfg)).collect::<Result<_>>()?;
    let passed = branches.iter().all(|b| b.passed);
    let conclusion = if passed {
        "F has no rho^0 term, so F = 1/2 cannot hold along either branch".to_string()
    } else {
        "expansion check failed".to_string()
    };
    Ok(ExpansionReport {
        alpha: 2,
        masses: masses.as_array(),
        mu_tilde,
        c,
        v,
        digits: cfg.digits,
        order_requested: cfg.order,
        branches,
        passed,
        conclusion,
    })
}

fn newton_branch_report(masses: &Masses, mu_tilde: f64, sign: Sign, which: u8, c: f64, v: f64, cfg: &EngineConfig) -> Result<BranchReport> {
    with_digits(cfg.digits, || {
        let (s, order) = with_adaptive_order(
            cfg.order,
            |n| newton_branch_series(masses, mu_tilde, sign, which, c, v, n),
            |s| known_through(&s.energy, -7) && known_through(&s.laplacian, -1) && known_through(&s.r, 3),
        )?;
        let closed_masses = if which == 1 { *masses } else { masses.swap12() };
        let cf = newton_closed_forms(&closed_masses, mu_tilde, sign, v);
        let re = |x: f64| Complex64::new(x, 0.0);
        let mut comparisons = vec![
            compare("inv_grad2", &s.inv_grad2, 6, re(cf.inv_grad2), mu_tilde, true),
            compare("lambda", &s.lambda, -10, re(cf.lambda), mu_tilde, true),
        ];
        let mut flags = Vec::new();
        let mut magnitudes = Vec::new();
        if cf.laplacian_degenerate {
            let m = magnitude_check("laplacian", &s.laplacian, -3, -2, mu_tilde, true);
            flags.push(format!(
                "DegenerateLeadingCoefficient: laplacian rho^-3 coefficient cancels; observed leading exponent {:?}",
                observed_leading(&s.laplacian, mu_tilde, 4)
            ));
            magnitudes.push(m);
        } else {
            comparisons.push(compare("laplacian", &s.laplacian, -3, re(cf.laplacian), mu_tilde, true));
        }
        comparisons.push(compare("r", &s.r, 2, re(cf.r), mu_tilde, true));
        comparisons.push(compare("drho_dt_sq", &s.drho_dt_sq, -10, re(cf.drho_dt_sq), mu_tilde, true));
        let printed = compare("energy_printed", &s.energy, -8, re(cf.energy_printed), mu_tilde, false);
        if !printed.passed {
            if let Some(e) = s.energy.coeff(-8) {
                flags.push(format!(
                    "energy leading coefficient / printed closed form = {:.12}",
                    e.to_c64().re / cf.energy_printed
                ));
            }
        }
        comparisons.push(printed);
        comparisons.push(compare("energy", &s.energy, -8, re(cf.energy_consistent), mu_tilde, true));
        let reference = s.energy.leading_exponent().unwrap_or(-8) + 1;
        let mut nz = magnitude_check("energy", &s.energy, -8, reference, mu_tilde, false);
        // nonzero relative to the next order of E itself
        nz.passed = nz.relative_magnitude.is_finite() && nz.relative_magnitude > VANISHING_TOL;
        magnitudes.push(nz);

        let passed = comparisons.iter().filter(|c| c.gating).all(|c| c.passed) && magnitudes.iter().all(|m| m.passed);
        let label = format!("newton-{which}{}", if sign == Sign::Plus { "+" } else { "-" });
        Ok(BranchReport { branch: label, order_used: order, comparisons, magnitudes, flags, passed })
    })
}

/// Checks the `alpha = 1` expansions on all four branches.
pub fn verify_newton(masses: &Masses, mu_tilde: f64, c: f64, v: f64, cfg: &EngineConfig) -> Result<ExpansionReport> {
    check_digits(cfg)?;
    if v == 0.0 || mu_tilde <= 0.0 {
        return Err(Error::InvalidInput("verification needs v != 0 and mu_tilde > 0".into()));
    }
    let labels = [(Sign::Plus, 1u8), (Sign::Minus, 1), (Sign::Plus, 2), (Sign::Minus, 2)];
    let branches: Vec<BranchReport> = labels
        .par_iter()
        .map(|&(s, w)| newton_branch_report(masses, mu_tilde, s, w, c, v, cfg))
        .collect::<Result<_>>()?;
    let passed = branches.iter().all(|b| b.passed);
    let conclusion = if passed {
        "E has a nonzero rho^-8 term on every branch, so E cannot be constant".to_string()
    } else {
        "expansion check failed".to_string()
    };
    Ok(ExpansionReport {
        alpha: 1,
        masses: masses.as_array(),
        mu_tilde,
        c,
        v,
        digits: cfg.digits,
        order_requested: cfg.order,
        branches,
        passed,
        conclusion,
    })
}

/// Smallest `mu_tilde` admitted by physical `alpha = 1` shapes.
pub fn newton_mu_tilde_bound(masses: &Masses) -> f64 {
    (masses.m1() * masses.m3()).powf(1.5).max((masses.m2() * masses.m3()).powf(1.5))
}

/// Largest relative mismatch between the truncated branch series evaluated
/// at `rho` and the nearest direct algebraic solution, over all branches.
pub fn series_numeric_mismatch(masses: &Masses, alpha: u8, mu_tilde: f64, rho: f64, cfg: &EngineConfig) -> Result<f64> {
    let z = Complex64::new(rho, 0.0);
    let at = |s: &Series| with_digits(cfg.digits, || s.eval(&MpComplex::from_f64s(rho, 0.0)).to_c64());
    let rel = |a: (Complex64, Complex64), b: (Complex64, Complex64)| ((a.0 - b.0).norm() / b.0.norm()).max((a.1 - b.1).norm() / b.1.norm());
    let nearest = |p: (Complex64, Complex64), roots: &[(Complex64, Complex64)]| roots.iter().map(|&q| rel(p, q)).fold(f64::INFINITY, f64::min);
    let mut worst = 0.0f64;
    match alpha {
        2 => {
            let roots = crate::bipolar::solve_r_strong(masses, mu_tilde, z)?;
            for b in [1, 2] {
                let (s1, s2) = with_digits(cfg.digits, || branch_expansion_strong(masses, mu_tilde, b, cfg.order))?;
                worst = worst.max(nearest((at(&s1), at(&s2)), &roots));
            }
        }
        1 => {
            let roots = crate::bipolar::solve_r_newton(masses, mu_tilde, z)?;
            for (sign, which) in [(Sign::Plus, 1), (Sign::Minus, 1), (Sign::Plus, 2), (Sign::Minus, 2)] {
                let (r1, r2) = with_digits(cfg.digits, || branch_expansion_newton(masses, mu_tilde, sign, which, cfg.order))?;
                worst = worst.max(nearest((at(&r1), at(&r2)), &roots));
            }
        }
        _ => return Err(Error::InvalidInput(format!("series branches exist for alpha 1 and 2 only, got {alpha}"))),
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn equal_mass_strong_coefficient() {
        let m = Masses::equal();
        let r = verify_strong(&m, 9.0, 0.0, 1.0, &cfg()).unwrap();
        assert!(r.passed);
        for (_, c) in r.comparisons() {
            assert!((c.engine[0] + 2.0 / 9.0).abs() < 1e-14, "{c:?}");
            assert!(c.engine[1].abs() < 1e-14);
        }
    }

    #[test]
    fn strong_low_orders_vanish() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let r = verify_strong(&m, 40.0, 0.7, 1.3, &cfg()).unwrap();
        assert!(r.passed, "{r:#?}");
        assert_eq!(r.magnitudes().count(), 4);
        assert!(r.magnitudes().all(|(_, m)| m.relative_magnitude < VANISHING_TOL));
    }

    #[test]
    fn newton_branches_pass_with_consistent_energy() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        let r = verify_newton(&m, 40.0, 0.3, 1.0, &cfg()).unwrap();
        assert!(r.passed);
        assert_eq!(r.branches.len(), 4);
        for (_, c) in r.comparisons().filter(|(_, c)| c.quantity == "energy_printed") {
            assert!(!c.gating);
            assert!((c.engine[0] / c.closed_form[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_mass_laplacian_degeneration_flagged() {
        let r = verify_newton(&Masses::equal(), 9.0, 0.0, 1.0, &cfg()).unwrap();
        assert!(r.passed);
        for b in &r.branches {
            assert!(b.flags.iter().any(|f| f.starts_with("DegenerateLeadingCoefficient")), "{b:?}");
        }
    }

    #[test]
    fn series_match_direct_solutions() {
        let m = Masses::new(1.0, 2.0, 3.0).unwrap();
        assert!(series_numeric_mismatch(&m, 2, 40.0, 1e-4, &cfg()).unwrap() < 1e-8);
        assert!(series_numeric_mismatch(&m, 1, 40.0, 1e-4, &cfg()).unwrap() < 1e-8);
        let m = Masses::new(0.7, 1.9, 0.4).unwrap();
        assert!(series_numeric_mismatch(&m, 1, 12.0, 1e-4, &cfg()).unwrap() < 1e-8);
    }

    #[test]
    fn low_precision_rejected() {
        let c = EngineConfig { digits: 16, ..cfg() };
        assert!(matches!(verify_strong(&Masses::equal(), 9.0, 0.0, 1.0, &c), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn bad_branch_label() {
        assert!(branch_expansion_strong(&Masses::equal(), 9.0, 3, 8).is_err());
    }
}
