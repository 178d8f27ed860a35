//! Adaptive tracking control of Euler-Lagrange systems under time-varying
//! state and input constraints.
//!
//! The crate is organized around the workflow of the method:
//!
//! * [`envelopes`] designs the time-varying bounds and converts state bounds
//!   into bounds on the tracking and filtered tracking errors.
//! * [`plant`] holds the Euler-Lagrange model (the pitch/yaw helicopter).
//! * [`controller`] is the saturated barrier-Lyapunov adaptive law.
//! * [`feasibility`] certifies offline that an envelope set is compatible
//!   with the input bound.
//! * [`sim`] closes the loop numerically and monitors every constraint.
//! * [`config`] reads experiment descriptions from JSON.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod envelopes;
pub mod feasibility;
pub mod integrate;
pub mod linalg;
pub mod plant;
pub mod sim;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;
pub type Mat6 = nalgebra::Matrix6<f64>;
pub type ParamVec = nalgebra::SVector<f64, 6>;
pub type Regressor = nalgebra::SMatrix<f64, 2, 6>;

pub use config::{ConfigError, ExperimentConfig};
pub use controller::{ControllerGains, ControllerState, TvblfController};
pub use envelopes::{Envelope, EnvelopeSet, PpfEnvelope, TimeGrid};
pub use feasibility::{check_feasibility, FeasibilityInputs, FeasibilityReport};
pub use plant::{BoundConstants, ElState, EulerLagrange, Helicopter, HelicopterParams};
pub use sim::{run, SimConfig, SimOutcome, SummaryReport, TrajectoryRecord};
