//! Command-line front end: argument parsing, run configuration, command
//! execution and output schemas.
//!
//! CSV cells carry 17 significant digits; JSON numbers are shortest
//! round-trip decimals. Data files carry no timestamps, so identical
//! configurations give byte-identical output.

mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{ContourConfig, InitialState, Overrides, ReduceConfig, RunConfig, SimulateConfig, VerifyConfig};

use crate::analysis::{find_central_configs, scan_necessary_condition, seed_on_ray, trace_mu_contour_partial};
use crate::asymptotics::{verify_newton, verify_strong, ExpansionReport};
use crate::bipolar::{eta_from_bipolar, BipolarPoint, Sign};
use crate::dynamics::{integrate, Initial, Termination};
use crate::error::Error;
use crate::geometry::ShapePoint;
use crate::model::{cartesian_from_reduced, reduced_from_cartesian, Masses};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COLLISION: i32 = 3;
pub const EXIT_CRITICAL: i32 = 4;
pub const EXIT_PRECISION: i32 = 5;
pub const EXIT_VERIFICATION: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "homographic", version, about = "Three-body shape dynamics and series checks of the homographic conjecture")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 1)]
    pub masses: Option<Vec<f64>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub mu_level: Option<f64>,
    /// Angular momentum.
    #[arg(long = "C", global = true, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Shape speed.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub v: Option<f64>,
    #[arg(long, global = true)]
    pub mu_tilde: Option<f64>,
    #[arg(long, global = true)]
    pub order: Option<i32>,
    #[arg(long, global = true)]
    pub digits: Option<u32>,
    /// Integrator tolerance (relative and absolute).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 1, allow_negative_numbers = true)]
    pub tspan: Option<Vec<f64>>,
    /// Output file (stdout when absent); metadata goes to `<out>.meta.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Integrate a trajectory and write samples as CSV.
    Simulate,
    /// Find the Lagrange and Euler configurations (JSON).
    CentralConfigs,
    /// Trace a level set of mu and scan the necessary condition (CSV).
    ContourScan,
    /// Check the leading series coefficients for alpha = 1 or 2 (JSON).
    VerifyProof,
    /// Convert a state between Cartesian and reduced variables (JSON).
    Reduce,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) => exit_code(e),
            _ => EXIT_FAILURE,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) => EXIT_CONFIG,
        Error::BinaryCollision { .. } | Error::TotalCollision { .. } | Error::StepSizeUnderflow { .. } => EXIT_COLLISION,
        Error::CriticalPoint { .. } => EXIT_CRITICAL,
        Error::PrecisionExhausted(_) => EXIT_PRECISION,
        _ => EXIT_FAILURE,
    }
}

impl Cli {
    pub fn overrides(&self) -> Result<Overrides, Error> {
        let triple = |v: &Option<Vec<f64>>, name: &str, n: usize| -> Result<Option<Vec<f64>>, Error> {
            match v {
                Some(v) if v.len() != n => Err(Error::InvalidInput(format!("--{name} takes {n} comma-separated values"))),
                other => Ok(other.clone()),
            }
        };
        Ok(Overrides {
            masses: triple(&self.masses, "masses", 3)?.map(|v| [v[0], v[1], v[2]]),
            alpha: self.alpha,
            mu_level: self.mu_level,
            c: self.c,
            v: self.v,
            mu_tilde: self.mu_tilde,
            order: self.order,
            digits: self.digits,
            tol: self.tol,
            tspan: triple(&self.tspan, "tspan", 2)?.map(|v| [v[0], v[1]]),
        })
    }

    /// Merges the config file (if any) with flag overrides and validates.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let o = self.overrides()?;
        let cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
                let mut cfg = RunConfig::from_json(&text)?;
                cfg.apply(&o);
                cfg
            }
            None => RunConfig::from_overrides(&o)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: Command,
    pub version: &'static str,
    /// SHA-256 of the command, crate version and resolved configuration.
    pub config_hash: String,
    pub config: RunConfig,
    pub exit_code: i32,
    pub notes: Vec<String>,
}

pub fn config_hash(command: Command, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&command).expect("serializable"));
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(serde_json::to_vec(cfg).expect("serializable"));
    hex::encode(h.finalize())
}

/// Result of a command that ran to completion or stopped with partial output.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub notes: Vec<String>,
}

impl Outcome {
    fn ok() -> Self {
        Outcome { exit_code: EXIT_OK, notes: Vec::new() }
    }

    pub fn metadata(&self, command: Command, cfg: &RunConfig) -> Metadata {
        Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config_hash(command, cfg),
            config: cfg.clone(),
            exit_code: self.exit_code,
            notes: self.notes.clone(),
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn csv_row(out: &mut dyn Write, cells: &[f64]) -> std::io::Result<()> {
    let row: Vec<String> = cells.iter().map(|&x| fmt_f64(x)).collect();
    writeln!(out, "{}", row.join(","))
}

fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, Error> {
    block.as_ref().ok_or_else(|| Error::InvalidInput(format!("the `{name}` block is required for this command")))
}

pub const SIMULATE_COLUMNS: [&str; 16] =
    ["t", "r", "phi", "eta_x", "eta_y", "rdot", "phidot", "etadot_x", "etadot_y", "I", "U", "K", "E", "C", "mu", "v2"];

/// Runs one command, writing its data product to `out`.
pub fn execute(command: Command, cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate => simulate(cfg, out),
        Command::CentralConfigs => central_configs(cfg, out),
        Command::ContourScan => contour_scan(cfg, out),
        Command::VerifyProof => verify_proof(cfg, out),
        Command::Reduce => reduce(cfg, out),
    }
}

fn simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let sim = require(&cfg.simulate, "simulate")?;
    let masses = cfg.masses()?;
    let initial = match sim.initial {
        InitialState::Reduced(s) => Initial::Reduced(s),
        InitialState::Cartesian(s) => Initial::Cartesian(s),
    };
    let n = sim.samples - 1;
    let [t0, t1] = sim.tspan;
    let times: Vec<f64> = (0..=n).map(|k| if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 }).collect();
    let traj = integrate(&masses, cfg.alpha()?, initial, &times, &sim.integrator)?;
    writeln!(out, "{}", SIMULATE_COLUMNS.join(","))?;
    for s in &traj.samples {
        let st = &s.state;
        csv_row(
            out,
            &[
                s.t, st.r, st.phi, st.eta.re, st.eta.im, st.rdot, st.phidot, st.etadot.re, st.etadot.im, s.inertia, s.potential,
                s.kinetic, s.energy, s.angular_momentum, s.mu, s.v2,
            ],
        )?;
    }
    let mut outcome = Outcome::ok();
    match traj.termination {
        Termination::Completed => {}
        Termination::Collision { t, separation } => {
            outcome.exit_code = EXIT_COLLISION;
            outcome.notes.push(format!("collision stop at t = {t:e}, separation {separation:e}"));
        }
        Termination::StepSizeUnderflow { t } => {
            outcome.exit_code = EXIT_COLLISION;
            outcome.notes.push(format!("step size underflow at t = {t:e} (near-collision)"));
        }
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct CentralConfigRow {
    eta: [f64; 2],
    #[serde(rename = "type")]
    kind: crate::analysis::ConfigType,
    grad_norm: f64,
}

fn central_configs(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let set = find_central_configs(&cfg.masses()?, cfg.alpha()?)?;
    let rows: Vec<CentralConfigRow> =
        set.configs.iter().map(|c| CentralConfigRow { eta: c.eta, kind: c.kind, grad_norm: c.grad_norm }).collect();
    serde_json::to_writer_pretty(&mut *out, &rows)?;
    writeln!(out)?;
    let mut outcome = Outcome::ok();
    for f in &set.failures {
        outcome.notes.push(format!("seed ({}, {}): {}", f.seed[0], f.seed[1], f.reason));
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct ScanFooter {
    nodes: usize,
    closed: bool,
    f_min: f64,
    f_max: f64,
    f_spread: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    implied_e_spread: Option<f64>,
    conjecture_consistent: bool,
    max_mu_drift: f64,
}

fn default_seed(masses: &Masses, cfg: &RunConfig, level: f64) -> Result<ShapePoint, Error> {
    let lag = ShapePoint::from_eta(eta_from_bipolar(masses, BipolarPoint::new(1.0, 1.0), Sign::Plus)?);
    seed_on_ray(masses, cfg.alpha()?, level, lag, Complex64::i())
}

fn contour_scan(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let cc = require(&cfg.contour, "contour")?;
    let masses = cfg.masses()?;
    let alpha = cfg.alpha()?;
    let seed = match cc.seed {
        Some([x, y]) => ShapePoint::new(x, y),
        None => default_seed(&masses, cfg, cc.mu_level)?,
    };
    let (contour, stop) = trace_mu_contour_partial(&masses, alpha, cc.mu_level, seed, cc.step, cc.max_nodes);
    let mut outcome = Outcome::ok();
    if let Some(e) = &stop {
        match e {
            Error::CriticalPoint { .. } => outcome.exit_code = EXIT_CRITICAL,
            Error::OpenContourBudget { .. } => outcome.notes.push(e.to_string()),
            other => return Err(other.clone().into()),
        }
        outcome.notes.push(format!("tracing stopped: {e}"));
    }
    let strong = alpha.value() == 2.0;
    let header = if strong { "s,x,y,r1,r2,mu,F,F_minus_half" } else { "s,x,y,r1,r2,mu,F,implied_r,implied_E" };
    writeln!(out, "{header}")?;
    if contour.points.is_empty() {
        return Ok(outcome);
    }
    let scan = scan_necessary_condition(&masses, alpha, &contour, cc.c, cc.v)?;
    for n in &scan.nodes {
        let last = if strong {
            vec![n.f - 0.5]
        } else {
            vec![n.implied_r.unwrap_or(f64::NAN), n.implied_e.unwrap_or(f64::NAN)]
        };
        let mut row = vec![n.s, n.x, n.y, n.r1, n.r2, n.mu, n.f];
        row.extend(last);
        csv_row(out, &row)?;
    }
    let footer = ScanFooter {
        nodes: scan.nodes.len(),
        closed: scan.closed,
        f_min: scan.f_min,
        f_max: scan.f_max,
        f_spread: scan.f_spread,
        implied_e_spread: scan.implied_e_spread,
        conjecture_consistent: scan.conjecture_consistent,
        max_mu_drift: scan.nodes.iter().map(|n| (n.mu - cc.mu_level).abs()).fold(0.0, f64::max),
    };
    writeln!(out, "# {}", serde_json::to_string(&footer)?)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct VerifyOutput {
    passed: bool,
    reports: Vec<ExpansionReport>,
}

fn verify_proof(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let vc = require(&cfg.verify, "verify")?;
    let triples = vc.mass_triples.clone().unwrap_or_else(|| vec![cfg.masses]);
    let engine = vc.engine();
    let mut reports = Vec::new();
    let mut notes = Vec::new();
    for m in triples {
        let masses = Masses::new(m[0], m[1], m[2])?;
        let report = match cfg.alpha {
            2.0 => verify_strong(&masses, vc.mu_tilde, vc.c, vc.v, &engine)?,
            1.0 => {
                let bound = crate::asymptotics::newton_mu_tilde_bound(&masses);
                if vc.mu_tilde <= bound {
                    notes.push(format!("mu_tilde = {} is not above the physical bound {bound} for masses {m:?}", vc.mu_tilde));
                }
                verify_newton(&masses, vc.mu_tilde, vc.c, vc.v, &engine)?
            }
            a => return Err(Error::InvalidInput(format!("verify-proof supports alpha 1 and 2, got {a}")).into()),
        };
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    serde_json::to_writer_pretty(&mut *out, &VerifyOutput { passed, reports })?;
    writeln!(out)?;
    Ok(Outcome { exit_code: if passed { EXIT_OK } else { EXIT_VERIFICATION }, notes })
}

#[derive(Serialize)]
struct ReduceOutput {
    cartesian: crate::model::CartesianState,
    reduced: crate::model::ReducedState,
}

fn reduce(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let rc = require(&cfg.reduce, "reduce")?;
    let masses = cfg.masses()?;
    let (cartesian, reduced) = match rc.state {
        InitialState::Cartesian(c) => {
            let c = c.to_com_frame(&masses);
            (c, reduced_from_cartesian(&masses, &c)?)
        }
        InitialState::Reduced(r) => (cartesian_from_reduced(&masses, &r), r),
    };
    serde_json::to_writer_pretty(&mut *out, &ReduceOutput { cartesian, reduced })?;
    writeln!(out)?;
    Ok(Outcome::ok())
}
