//! Run configuration: a JSON file with flag overrides.

use serde::{Deserialize, Serialize};

use crate::analysis::{DEFAULT_CONTOUR_STEP, DEFAULT_MAX_NODES};
use crate::asymptotics::{DEFAULT_ORDER, EngineConfig};
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::model::{Alpha, CartesianState, Masses, ReducedState};
use crate::mp::DEFAULT_DIGITS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub masses: [f64; 3],
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduce: Option<ReduceConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InitialState {
    Reduced(ReducedState),
    Cartesian(CartesianState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial: InitialState,
    pub tspan: [f64; 2],
    /// Output rows, including both endpoints.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

fn default_samples() -> usize {
    1001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub mu_level: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "one")]
    pub v: f64,
    /// Start point; defaults to the level crossing above the upper Lagrange point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<[f64; 2]>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn one() -> f64 {
    1.0
}

fn default_step() -> f64 {
    DEFAULT_CONTOUR_STEP
}

fn default_max_nodes() -> usize {
    DEFAULT_MAX_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub mu_tilde: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default = "default_order")]
    pub order: i32,
    #[serde(default = "default_digits")]
    pub digits: u32,
    /// Mass triples to check; the top-level masses when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_triples: Option<Vec<[f64; 3]>>,
}

fn default_order() -> i32 {
    DEFAULT_ORDER
}

fn default_digits() -> u32 {
    DEFAULT_DIGITS
}

impl VerifyConfig {
    pub fn engine(&self) -> EngineConfig {
        EngineConfig { order: self.order, digits: self.digits }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceConfig {
    pub state: InitialState,
}

/// Flag values that win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub masses: Option<[f64; 3]>,
    pub alpha: Option<f64>,
    pub mu_level: Option<f64>,
    pub c: Option<f64>,
    pub v: Option<f64>,
    pub mu_tilde: Option<f64>,
    pub order: Option<i32>,
    pub digits: Option<u32>,
    pub tol: Option<f64>,
    pub tspan: Option<[f64; 2]>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Config built from flags alone.
    pub fn from_overrides(o: &Overrides) -> Result<Self> {
        let masses = o.masses.ok_or_else(|| Error::InvalidInput("masses are required (config file or --masses)".into()))?;
        let alpha = o.alpha.ok_or_else(|| Error::InvalidInput("alpha is required (config file or --alpha)".into()))?;
        let mut cfg = RunConfig { masses, alpha, simulate: None, contour: None, verify: None, reduce: None };
        cfg.apply(o);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.masses {
            self.masses = m;
        }
        if let Some(a) = o.alpha {
            self.alpha = a;
        }
        if o.mu_level.is_some() && self.contour.is_none() {
            self.contour = Some(ContourConfig {
                mu_level: 0.0,
                c: 0.0,
                v: 1.0,
                seed: None,
                step: DEFAULT_CONTOUR_STEP,
                max_nodes: DEFAULT_MAX_NODES,
            });
        }
        if o.mu_tilde.is_some() && self.verify.is_none() {
            self.verify = Some(VerifyConfig {
                mu_tilde: 0.0,
                c: 0.0,
                v: 1.0,
                order: DEFAULT_ORDER,
                digits: DEFAULT_DIGITS,
                mass_triples: None,
            });
        }
        if let Some(c) = self.contour.as_mut() {
            c.mu_level = o.mu_level.unwrap_or(c.mu_level);
            c.c = o.c.unwrap_or(c.c);
            c.v = o.v.unwrap_or(c.v);
        }
        if let Some(vc) = self.verify.as_mut() {
            vc.mu_tilde = o.mu_tilde.unwrap_or(vc.mu_tilde);
            vc.c = o.c.unwrap_or(vc.c);
            vc.v = o.v.unwrap_or(vc.v);
            vc.order = o.order.unwrap_or(vc.order);
            vc.digits = o.digits.unwrap_or(vc.digits);
        }
        if let Some(s) = self.simulate.as_mut() {
            if let Some(t) = o.tol {
                s.integrator.rel_tol = t;
                s.integrator.abs_tol = t;
            }
            s.tspan = o.tspan.unwrap_or(s.tspan);
        }
    }

    pub fn masses(&self) -> Result<Masses> {
        Masses::new(self.masses[0], self.masses[1], self.masses[2])
    }

    pub fn alpha(&self) -> Result<Alpha> {
        Alpha::new(self.alpha)
    }

    /// Checks everything that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.masses()?;
        self.alpha()?;
        if let Some(s) = &self.simulate {
            s.integrator.validate()?;
            if !(s.tspan[1] > s.tspan[0]) || s.samples < 2 {
                return Err(Error::InvalidInput("simulate needs tspan[1] > tspan[0] and at least 2 samples".into()));
            }
        }
        if let Some(c) = &self.contour {
            if !(c.step > 0.0) || c.max_nodes < 2 || !c.mu_level.is_finite() {
                return Err(Error::InvalidInput("contour needs a finite mu_level, step > 0 and max_nodes >= 2".into()));
            }
        }
        if let Some(v) = &self.verify {
            if !(v.mu_tilde > 0.0) || v.v == 0.0 || v.order < 1 {
                return Err(Error::InvalidInput("verify needs mu_tilde > 0, v != 0 and order >= 1".into()));
            }
            for m in v.mass_triples.iter().flatten() {
                Masses::new(m[0], m[1], m[2])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"masses":[1,1,1],"alpha":1,"bogus":3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"masses":[1,1,1],"alpha":1,"contour":{"mu_level":3.5,"nope":1}}"#).is_err());
    }

    #[test]
    fn flags_win() {
        let mut c = RunConfig::from_json(r#"{"masses":[1,1,1],"alpha":2,"verify":{"mu_tilde":9}}"#).unwrap();
        c.apply(&Overrides { alpha: Some(1.0), mu_tilde: Some(40.0), ..Default::default() });
        assert_eq!(c.alpha, 1.0);
        let v = c.verify.unwrap();
        assert_eq!((v.mu_tilde, v.order, v.digits), (40.0, DEFAULT_ORDER, DEFAULT_DIGITS));
    }

    #[test]
    fn initial_state_forms() {
        let c = RunConfig::from_json(
            r#"{"masses":[1,1,1],"alpha":1,"simulate":{"tspan":[0,1],
                "initial":{"reduced":{"r":1,"phi":0,"eta":[0,1],"rdot":0,"phidot":1.7320508075688772,"etadot":[0,0]}}}}"#,
        )
        .unwrap();
        assert!(c.validate().is_ok());
        let s = c.simulate.unwrap();
        assert_eq!(s.samples, 1001);
        assert!(matches!(s.initial, InitialState::Reduced(_)));
    }

    #[test]
    fn bad_values_rejected() {
        let c = RunConfig::from_json(r#"{"masses":[1,-1,1],"alpha":1}"#).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(r#"{"masses":[1,1,1],"alpha":0}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
