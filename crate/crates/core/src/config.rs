//! JSON experiment descriptions and their resolution into SI-unit inputs
//! for the feasibility check and the simulator.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControllerError, ControllerGains};
use crate::envelopes::{error_envelopes, phi_r_envelope, select_alpha, Envelope, EnvelopeError, EnvelopeSet, TimeGrid};
use crate::feasibility::FeasibilityInputs;
use crate::plant::{default_bounds, BoundConstants, ElState, Helicopter, HelicopterParams, PlantError};
use crate::sim::{reference_eval, DisturbanceSpec, ReferenceSpec, SimConfig};
use crate::{Mat2, Mat6, ParamVec, Vec2};

pub const HELICOPTER_QUANSER: &str = include_str!("../configs/helicopter_quanser.json");
pub const HELICOPTER_UNSATURATED: &str = include_str!("../configs/helicopter_unsaturated.json");
pub const HELICOPTER_DISTURBED: &str = include_str!("../configs/helicopter_disturbed.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnits {
    #[default]
    Rad,
    Deg,
}

impl AngleUnits {
    /// Multiplier taking angle-valued config entries to radians.
    pub fn to_rad(self) -> f64 {
        match self {
            AngleUnits::Rad => 1.0,
            AngleUnits::Deg => std::f64::consts::PI / 180.0,
        }
    }
}

fn default_gamma_scale() -> f64 {
    2.0
}

fn default_theta_bar() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(rename = "K")]
    pub k: [[f64; 2]; 2],
    #[serde(rename = "Gamma_scale", default = "default_gamma_scale")]
    pub gamma_scale: f64,
    /// Full adaptation gain; overrides `Gamma_scale`.
    #[serde(rename = "Gamma", default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<[[f64; 6]; 6]>,
    /// Projection radius used by the running controller.
    #[serde(rename = "thetaBar", default = "default_theta_bar")]
    pub theta_bar: f64,
    #[serde(rename = "thetaHat0", default)]
    pub theta_hat0: [f64; 6],
    /// Boundary-layer width of the projection; defaults to 5% of `thetaBar`.
    #[serde(rename = "epsProj", default, skip_serializing_if = "Option::is_none")]
    pub eps_proj: Option<f64>,
    /// Fixed filter gain; selected from the envelopes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn default_eps1() -> f64 {
    0.05
}

fn default_grid_step() -> f64 {
    0.01
}

/// Either error envelopes (`phi_e`, `phi_edot`) or state envelopes
/// (`phi_q`, `phi_qdot`) per pair; angles in the config's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_e: Option<Envelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_edot: Option<Envelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_q: Option<Envelope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_qdot: Option<Envelope>,
    /// Torque bound (N m); never unit-converted.
    pub phi_tau: Envelope,
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub q: [f64; 2],
    pub qdot: [f64; 2],
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    #[serde(default = "one")]
    pub substeps: usize,
    pub horizon: f64,
    pub log_every: usize,
    pub seed: u64,
    /// Measurement noise standard deviation, in the config's angle units.
    pub noise_std: f64,
    pub zoh: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { dt: 1e-3, substeps: 1, horizon: 60.0, log_every: 10, seed: 0, noise_std: 0.0, zoh: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub units: AngleUnits,
    #[serde(default)]
    pub plant: HelicopterParams,
    /// Model bounds for the certificate; the stock rig values when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundConstants>,
    pub controller: ControllerSection,
    pub envelopes: EnvelopeSection,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    /// Initial state; defaults to the reference at `t = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub sim: SimSection,
}

/// Envelopes in one unit system, before `alpha` and `phi_r` are chosen.
struct Resolved {
    phi_e: Envelope,
    phi_edot: Envelope,
    phi_q: Envelope,
    phi_qdot: Envelope,
    phi_qd: Envelope,
    phi_qdotd: Envelope,
    phi_qddotd: Envelope,
    reference: ReferenceSpec,
    grid: TimeGrid,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn helicopter_quanser() -> Self {
        Self::from_json_str(HELICOPTER_QUANSER).expect("bundled config parses")
    }

    pub fn helicopter_unsaturated() -> Self {
        Self::from_json_str(HELICOPTER_UNSATURATED).expect("bundled config parses")
    }

    pub fn helicopter_disturbed() -> Self {
        Self::from_json_str(HELICOPTER_DISTURBED).expect("bundled config parses")
    }

    pub fn bounds(&self) -> BoundConstants {
        self.bounds.unwrap_or_else(|| default_bounds(&self.plant))
    }

    pub fn is_disturbed(&self) -> bool {
        !self.disturbance.is_none()
    }

    pub fn k(&self) -> Mat2 {
        let k = self.controller.k;
        Mat2::new(k[0][0], k[0][1], k[1][0], k[1][1])
    }

    pub fn gamma(&self) -> Mat6 {
        match &self.controller.gamma {
            Some(g) => Mat6::from_fn(|i, j| g[i][j]),
            None => Mat6::identity() * self.controller.gamma_scale,
        }
    }

    fn resolve(&self, factor: f64) -> Result<Resolved, ConfigError> {
        let env = &self.envelopes;
        let grid = TimeGrid::new(self.sim.horizon, env.grid_step)?;
        self.reference.validate().map_err(ConfigError::Invalid)?;
        let reference = self.reference.scaled(factor);
        let (phi_qd, phi_qdotd, phi_qddotd) = reference.norm_envelopes();
        let scaled = |e: &Option<Envelope>| e.as_ref().map(|e| e.scaled(factor));
        let pick = |err: Option<Envelope>, state: Option<Envelope>, name: &str| match (err, state) {
            (Some(e), None) => Ok((Some(e), None)),
            (None, Some(s)) => Ok((None, Some(s))),
            (Some(_), Some(_)) => Err(ConfigError::Invalid(format!("give either the error or the state envelope for {name}, not both"))),
            (None, None) => Err(ConfigError::Invalid(format!("missing envelope for {name}"))),
        };
        let (pe, pq) = pick(scaled(&env.phi_e), scaled(&env.phi_q), "position")?;
        let (ped, pqd) = pick(scaled(&env.phi_edot), scaled(&env.phi_qdot), "velocity")?;
        let sum = |a: &Envelope, b: &Envelope| Envelope::Sum { terms: vec![(1.0, a.clone()), (1.0, b.clone())] };
        let (phi_e, phi_q) = match (pe, pq) {
            (Some(e), _) => {
                let q = sum(&e, &phi_qd);
                (e, q)
            }
            (None, Some(q)) => {
                let (e, _) = error_envelopes(&q, &Envelope::constant(1.0), &phi_qd, &Envelope::constant(0.0), &grid)?;
                (e, q)
            }
            (None, None) => unreachable!(),
        };
        let (phi_edot, phi_qdot) = match (ped, pqd) {
            (Some(e), _) => {
                let q = sum(&e, &phi_qdotd);
                (e, q)
            }
            (None, Some(q)) => {
                let (_, e) = error_envelopes(&Envelope::constant(1.0), &q, &Envelope::constant(0.0), &phi_qdotd, &grid)?;
                (e, q)
            }
            (None, None) => unreachable!(),
        };
        Ok(Resolved { phi_e, phi_edot, phi_q, phi_qdot, phi_qd, phi_qdotd, phi_qddotd, reference, grid })
    }

    fn feasibility_with(&self, factor: f64) -> Result<FeasibilityInputs, ConfigError> {
        let r = self.resolve(factor)?;
        let bounds = self.bounds();
        bounds.validate()?;
        Ok(FeasibilityInputs {
            bounds,
            phi_e: r.phi_e,
            phi_edot: r.phi_edot,
            phi_tau: self.envelopes.phi_tau.clone(),
            phi_qdotd: r.phi_qdotd,
            phi_qddotd: r.phi_qddotd,
            k: self.k(),
            eps1: self.envelopes.eps1,
            eps2: self.envelopes.eps2.map(|e| e * factor),
            alpha: self.controller.alpha,
            grid: r.grid,
            disturbed: self.is_disturbed(),
        })
    }

    /// Certificate inputs in SI units.
    pub fn feasibility_inputs(&self) -> Result<FeasibilityInputs, ConfigError> {
        self.feasibility_with(self.units.to_rad())
    }

    /// Certificate inputs with the angle entries taken as written.
    pub fn feasibility_inputs_unconverted(&self) -> Result<FeasibilityInputs, ConfigError> {
        self.feasibility_with(1.0)
    }

    /// Resolves everything the simulator needs, selecting `alpha` and
    /// `phi_r` the same way the certificate does.
    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let factor = self.units.to_rad();
        let r = self.resolve(factor)?;
        self.plant.validate()?;
        let plant = Helicopter::new(self.plant)?;
        let bounds = self.bounds();
        bounds.validate()?;
        let alpha = match self.controller.alpha {
            Some(a) => a,
            None => select_alpha(&r.phi_e, &r.phi_edot, &r.grid, self.envelopes.eps1)?,
        };
        let (phi_r, _) = phi_r_envelope(&r.phi_e, &r.phi_edot, alpha, &r.grid, self.envelopes.eps2.map(|e| e * factor))?;
        let c = &self.controller;
        let eps_proj = c.eps_proj.unwrap_or(0.05 * c.theta_bar);
        let gains = ControllerGains::new(alpha, self.k(), self.gamma(), c.theta_bar, eps_proj)?;
        let theta_hat0 = ParamVec::from_row_slice(&c.theta_hat0);
        if theta_hat0.norm() > c.theta_bar {
            return Err(ConfigError::Invalid(format!(
                "|thetaHat0| = {} exceeds thetaBar = {}",
                theta_hat0.norm(),
                c.theta_bar
            )));
        }
        let initial = match &self.initial {
            Some(i) => ElState::new(Vec2::new(i.q[0], i.q[1]) * factor, Vec2::new(i.qdot[0], i.qdot[1]) * factor),
            None => {
                let rf = reference_eval(&r.reference, 0.0);
                ElState::new(rf.q, rf.qdot)
            }
        };
        let env = EnvelopeSet {
            phi_q: r.phi_q,
            phi_qdot: r.phi_qdot,
            phi_qd: r.phi_qd,
            phi_qdotd: r.phi_qdotd,
            phi_qddotd: r.phi_qddotd,
            phi_e: r.phi_e,
            phi_edot: r.phi_edot,
            phi_r,
            phi_tau: self.envelopes.phi_tau.clone(),
            alpha,
        };
        let s = &self.sim;
        Ok(SimConfig {
            plant,
            bounds,
            gains,
            theta_hat0,
            env,
            reference: r.reference,
            disturbance: self.disturbance.clone(),
            initial,
            dt: s.dt,
            substeps: s.substeps,
            horizon: s.horizon,
            log_every: s.log_every,
            seed: s.seed,
            noise_std: s.noise_std * factor,
            zoh: s.zoh,
            check_grid: r.grid,
        })
    }
}
