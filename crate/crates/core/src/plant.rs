//! Euler-Lagrange plant models.
//!
//! `M(q) q'' + V_m(q, q') q' + G_r(q) + F_d(q') = tau + d`, with the model
//! linear in a constant parameter vector. The shipped instance is the
//! two-axis (pitch/yaw) helicopter.

use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{spectral_norm2, sym_eigen2};
use crate::{Mat2, ParamVec, Regressor, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("invalid plant parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("thrust-torque map is singular (det = {det})")]
    SingularMap { det: f64 },
    #[error("invalid bound constants: {0}")]
    InvalidBounds(String),
}

/// Generalized position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElState {
    pub q: Vec2,
    pub qdot: Vec2,
}

impl ElState {
    pub fn new(q: Vec2, qdot: Vec2) -> Self {
        Self { q, qdot }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

/// A two-degree-of-freedom Euler-Lagrange model, linearly parameterized by a
/// six-element parameter vector.
pub trait EulerLagrange {
    fn mass_matrix(&self, q: &Vec2) -> Mat2;
    /// Time derivative of the inertia matrix along `qdot`.
    fn mass_matrix_rate(&self, q: &Vec2, qdot: &Vec2) -> Mat2;
    fn coriolis_matrix(&self, q: &Vec2, qdot: &Vec2) -> Mat2;
    fn gravity(&self, q: &Vec2) -> Vec2;
    fn friction(&self, qdot: &Vec2) -> Vec2;
    /// True parameter vector of this model instance.
    fn theta(&self) -> ParamVec;
    /// `Y` such that `Y theta = M(q) accel + V_m(q, qdot) vel - F_d(qdot) - G_r(q)`.
    ///
    /// The controller passes `accel = alpha edot - qddot_d` and `vel = r - qdot`.
    fn regressor(&self, q: &Vec2, qdot: &Vec2, accel: &Vec2, vel: &Vec2) -> Regressor;

    /// `M^-1 (tau + d - V_m qdot - G_r - F_d)`.
    fn forward_dynamics(&self, s: &ElState, tau: &Vec2, d: &Vec2) -> Vec2 {
        let rhs = tau + d
            - self.coriolis_matrix(&s.q, &s.qdot) * s.qdot
            - self.gravity(&s.q)
            - self.friction(&s.qdot);
        let m = self.mass_matrix(&s.q);
        m.cholesky()
            .expect("inertia matrix is positive definite")
            .solve(&rhs)
    }
}

/// Physical constants of the pitch/yaw helicopter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelicopterParams {
    /// Pitch-axis moment of inertia (kg m^2).
    #[serde(rename = "Jp")]
    pub j_p: f64,
    /// Yaw-axis moment of inertia (kg m^2).
    #[serde(rename = "Jy")]
    pub j_y: f64,
    /// Total mass (kg).
    pub m: f64,
    /// Pitch-yaw lever distance (m).
    pub l: f64,
    /// Viscous damping, pitch (N m s/rad).
    #[serde(rename = "Bp")]
    pub b_p: f64,
    /// Viscous damping, yaw (N m s/rad).
    #[serde(rename = "By")]
    pub b_y: f64,
    #[serde(rename = "Kpp")]
    pub k_pp: f64,
    #[serde(rename = "Kpy")]
    pub k_py: f64,
    #[serde(rename = "Kyp")]
    pub k_yp: f64,
    #[serde(rename = "Kyy")]
    pub k_yy: f64,
    pub g: f64,
}

impl Default for HelicopterParams {
    // 0.318 is the measured yaw friction, not 1/pi.
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            j_p: 0.0384,
            j_y: 0.0432,
            m: 1.38,
            l: 0.1857,
            b_p: 0.8,
            b_y: 0.318,
            k_pp: 0.2041,
            k_py: 0.0068,
            k_yp: 0.0219,
            k_yy: 0.0720,
            g: 9.81,
        }
    }
}

impl HelicopterParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("Jp", self.j_p),
            ("Jy", self.j_y),
            ("m", self.m),
            ("l", self.l),
            ("Bp", self.b_p),
            ("By", self.b_y),
            ("Kpp", self.k_pp),
            ("Kyy", self.k_yy),
            ("g", self.g),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(PlantError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("Kpy", self.k_py), ("Kyp", self.k_yp)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(PlantError::InvalidParameter { name, value });
            }
        }
        let det = self.thrust_matrix().determinant();
        if det == 0.0 {
            return Err(PlantError::SingularMap { det });
        }
        Ok(())
    }

    /// `m l^2`
    #[inline]
    pub fn ml2(&self) -> f64 {
        self.m * self.l * self.l
    }

    /// `T = [[Kpp, Kpy], [Kyp, Kyy]]`, mapping motor voltages to torques.
    pub fn thrust_matrix(&self) -> Mat2 {
        Matrix2::new(self.k_pp, self.k_py, self.k_yp, self.k_yy)
    }

    pub fn torque_from_voltage(&self, v: &Vec2) -> Vec2 {
        self.thrust_matrix() * v
    }

    pub fn voltage_from_torque(&self, tau: &Vec2) -> Result<Vec2, PlantError> {
        let t = self.thrust_matrix();
        let det = t.determinant();
        match t.try_inverse() {
            Some(inv) if det != 0.0 => Ok(inv * tau),
            _ => Err(PlantError::SingularMap { det }),
        }
    }
}

/// Pitch/yaw helicopter with
/// `M = diag(Jp + m l^2, Jy + m l^2 cos^2(theta))`,
/// `V_m = [[0, c psi'], [-c psi', -c theta']]`, `c = m l^2 sin(2 theta) / 2`,
/// `G_r = (m g l cos(theta), 0)` and `F_d = (Bp theta', By psi')`.
///
/// Parameter vector: `(Jp + m l^2, Jy, m l^2, m g l, Bp, By)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Helicopter {
    pub params: HelicopterParams,
}

impl Helicopter {
    pub fn new(params: HelicopterParams) -> Result<Self, PlantError> {
        params.validate()?;
        Ok(Self { params })
    }
}

/// `(Jp + m l^2, Jy, m l^2, m g l, Bp, By)`
pub fn theta_true(p: &HelicopterParams) -> ParamVec {
    let ml2 = p.ml2();
    ParamVec::from([p.j_p + ml2, p.j_y, ml2, p.m * p.g * p.l, p.b_p, p.b_y])
}

impl EulerLagrange for Helicopter {
    fn mass_matrix(&self, q: &Vec2) -> Mat2 {
        let p = &self.params;
        let c = q[0].cos();
        Matrix2::new(p.j_p + p.ml2(), 0.0, 0.0, p.j_y + p.ml2() * c * c)
    }

    fn mass_matrix_rate(&self, q: &Vec2, qdot: &Vec2) -> Mat2 {
        let d22 = -self.params.ml2() * (2.0 * q[0]).sin() * qdot[0];
        Matrix2::new(0.0, 0.0, 0.0, d22)
    }

    fn coriolis_matrix(&self, q: &Vec2, qdot: &Vec2) -> Mat2 {
        let c = 0.5 * self.params.ml2() * (2.0 * q[0]).sin();
        Matrix2::new(0.0, c * qdot[1], -c * qdot[1], -c * qdot[0])
    }

    fn gravity(&self, q: &Vec2) -> Vec2 {
        let p = &self.params;
        Vec2::new(p.m * p.g * p.l * q[0].cos(), 0.0)
    }

    fn friction(&self, qdot: &Vec2) -> Vec2 {
        Vec2::new(self.params.b_p * qdot[0], self.params.b_y * qdot[1])
    }

    fn theta(&self) -> ParamVec {
        theta_true(&self.params)
    }

    fn regressor(&self, q: &Vec2, qdot: &Vec2, accel: &Vec2, vel: &Vec2) -> Regressor {
        let cos = q[0].cos();
        let half_s2 = 0.5 * (2.0 * q[0]).sin();
        let mut y = Regressor::zeros();
        // M accel
        y[(0, 0)] = accel[0];
        y[(1, 1)] = accel[1];
        y[(1, 2)] = cos * cos * accel[1];
        // V_m vel, all proportional to m l^2
        y[(0, 2)] += half_s2 * qdot[1] * vel[1];
        y[(1, 2)] -= half_s2 * (qdot[1] * vel[0] + qdot[0] * vel[1]);
        // -G_r, -F_d
        y[(0, 3)] = -cos;
        y[(0, 4)] = -qdot[0];
        y[(1, 5)] = -qdot[1];
        y
    }
}

/// Known bounds on the model used by the feasibility certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub km1: f64,
    pub km2: f64,
    pub kv: f64,
    pub kg: f64,
    pub kf1: f64,
    pub kf2: f64,
    #[serde(rename = "thetaBar")]
    pub theta_bar: f64,
    #[serde(rename = "dBar", default)]
    pub d_bar: f64,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<(), PlantError> {
        let all = [self.km1, self.km2, self.kv, self.kg, self.kf1, self.kf2, self.theta_bar, self.d_bar];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::InvalidBounds("non-finite constant".into()));
        }
        if !(self.km1 > 0.0 && self.km2 >= self.km1) {
            return Err(PlantError::InvalidBounds(format!(
                "need km2 >= km1 > 0, got km1 = {}, km2 = {}",
                self.km1, self.km2
            )));
        }
        if self.kv < 0.0 || self.kg < 0.0 || self.kf1 < 0.0 || self.kf2 < 0.0 || self.d_bar < 0.0 {
            return Err(PlantError::InvalidBounds("kv, kg, kf1, kf2, dBar must be nonnegative".into()));
        }
        if !(self.theta_bar > 0.0) {
            return Err(PlantError::InvalidBounds(format!("thetaBar must be positive, got {}", self.theta_bar)));
        }
        Ok(())
    }
}

/// The stock constants for the helicopter rig, with `km1` taken as the
/// infimum of the inertia eigenvalues (`Jy`, reached at `cos(theta) = 0`).
pub fn default_bounds(p: &HelicopterParams) -> BoundConstants {
    BoundConstants {
        km1: p.j_y,
        km2: 0.0908,
        kv: 0.03365,
        kg: 2.514,
        kf1: 0.0,
        kf2: 0.8,
        theta_bar: 0.91,
        d_bar: 0.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub property: &'static str,
    pub q: [f64; 2],
    pub qdot: [f64; 2],
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub samples: usize,
    pub violations: Vec<BoundViolation>,
    /// Largest observed `lhs / rhs` per property (1.0 means tight).
    pub worst_ratio: [f64; 4],
}

/// Samples random states and reports every counterexample to the inertia,
/// Coriolis, gravity and friction bounds. Angles are drawn from `[-pi, pi]`
/// and rates from `[-rate_range, rate_range]`.
pub fn verify_bounds<P: EulerLagrange, R: Rng>(
    plant: &P,
    b: &BoundConstants,
    samples: usize,
    rate_range: f64,
    rng: &mut R,
) -> BoundCheckReport {
    let pi = std::f64::consts::PI;
    let mut report = BoundCheckReport { samples, ..Default::default() };
    let record = |report: &mut BoundCheckReport, k: usize, property, q: &Vec2, qd: &Vec2, lhs: f64, rhs: f64| {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        report.worst_ratio[k] = report.worst_ratio[k].max(ratio);
        if lhs > rhs {
            report.violations.push(BoundViolation { property, q: [q[0], q[1]], qdot: [qd[0], qd[1]], lhs, rhs });
        }
    };
    for _ in 0..samples {
        let q = Vec2::new(rng.gen_range(-pi..pi), rng.gen_range(-pi..pi));
        let qd = Vec2::new(rng.gen_range(-rate_range..rate_range), rng.gen_range(-rate_range..rate_range));
        let (lo, hi) = sym_eigen2(&plant.mass_matrix(&q));
        record(&mut report, 0, "inertia_upper", &q, &qd, hi, b.km2);
        record(&mut report, 0, "inertia_lower", &q, &qd, b.km1, lo);
        let vm = spectral_norm2(&plant.coriolis_matrix(&q, &qd));
        record(&mut report, 1, "coriolis", &q, &qd, vm, b.kv * qd.norm());
        record(&mut report, 2, "gravity", &q, &qd, plant.gravity(&q).norm(), b.kg);
        record(&mut report, 3, "friction", &q, &qd, plant.friction(&qd).norm(), b.kf1 + b.kf2 * qd.norm());
    }
    report
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn heli() -> Helicopter {
        Helicopter::default()
    }

    #[test]
    fn mass_matrix_examples() {
        let h = heli();
        let m0 = h.mass_matrix(&Vec2::zeros());
        assert!((m0[(0, 0)] - 0.085988).abs() < 1e-6);
        assert!((m0[(1, 1)] - 0.090788).abs() < 1e-6);
        assert_eq!(m0[(0, 1)], 0.0);
        let m90 = h.mass_matrix(&Vec2::new(FRAC_PI_2, 0.0));
        assert!((m90[(1, 1)] - 0.0432).abs() < 1e-15);
        let q = Vec2::new(0.7, 0.3);
        assert_eq!(h.mass_matrix(&q), h.mass_matrix(&-q));
    }

    #[test]
    fn coriolis_examples() {
        let h = heli();
        assert_eq!(h.coriolis_matrix(&Vec2::new(0.4, 0.0), &Vec2::zeros()), Mat2::zeros());
        assert_eq!(h.coriolis_matrix(&Vec2::zeros(), &Vec2::new(1.0, 2.0)), Mat2::zeros());
        let v = h.coriolis_matrix(&Vec2::new(FRAC_PI_4, 0.0), &Vec2::new(1.0, 2.0));
        let c: f64 = 0.5 * 1.38 * 0.1857 * 0.1857;
        assert!((c - 0.023794).abs() < 1e-6);
        assert!((v[(0, 1)] - 2.0 * c).abs() < 1e-15);
        assert!((v[(1, 0)] + 2.0 * c).abs() < 1e-15);
        assert!((v[(1, 1)] + c).abs() < 1e-15);
    }

    #[test]
    fn gravity_and_friction_examples() {
        let h = heli();
        assert!((h.gravity(&Vec2::zeros())[0] - 2.5139).abs() < 1e-4);
        assert!(h.gravity(&Vec2::new(FRAC_PI_2, 0.0)).norm() < 1e-15);
        assert_eq!(h.friction(&Vec2::zeros()), Vec2::zeros());
        assert_eq!(h.friction(&Vec2::new(1.0, 1.0)), Vec2::new(0.8, 0.318));
    }

    #[test]
    fn forward_dynamics_examples() {
        let h = heli();
        let p = h.params;
        let rest = ElState::new(Vec2::zeros(), Vec2::zeros());
        let hold = Vec2::new(p.m * p.g * p.l, 0.0);
        assert!(h.forward_dynamics(&rest, &hold, &Vec2::zeros()).norm() < 1e-12);
        let fall = h.forward_dynamics(&rest, &Vec2::zeros(), &Vec2::zeros());
        assert!((fall[0] + 29.235).abs() < 2e-3, "{fall}");
        assert_eq!(fall[1], 0.0);

        let s = ElState::new(Vec2::new(0.3, -0.2), Vec2::new(0.5, -1.5));
        let tau = Vec2::new(0.7, -0.1);
        let d = Vec2::new(0.2, 0.05);
        let a = h.forward_dynamics(&s, &tau, &d);
        let b = h.forward_dynamics(&s, &(tau + d), &Vec2::zeros());
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn regressor_examples() {
        let h = heli();
        let theta = h.theta();
        let z = Vec2::zeros();
        let y = h.regressor(&z, &z, &z, &z);
        let yt = y * theta;
        assert!((yt[0] + 2.5139).abs() < 1e-4 && yt[1] == 0.0);
        let q = Vec2::new(0.4, 1.0);
        let qd = Vec2::new(-0.3, 0.8);
        let a = Vec2::new(0.2, -0.6);
        let v = Vec2::new(1.1, 0.5);
        let y = h.regressor(&q, &qd, &a, &v);
        assert!((y * (2.0 * theta) - 2.0 * (y * theta)).norm() < 1e-15);
    }

    #[test]
    fn theta_true_examples() {
        let t = theta_true(&HelicopterParams::default());
        let expect = [0.085988, 0.0432, 0.047588, 2.5139, 0.8, 0.318];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!((t.norm() - 2.659).abs() < 1e-3);
        let massless = theta_true(&HelicopterParams { m: 0.0, ..Default::default() });
        assert_eq!(massless[0], 0.0384);
        assert_eq!(massless[2], 0.0);
        assert_eq!(massless[3], 0.0);
    }

    #[test]
    fn thrust_map_examples() {
        let p = HelicopterParams::default();
        assert_eq!(p.torque_from_voltage(&Vec2::new(1.0, 0.0)), Vec2::new(0.2041, 0.0219));
        assert_eq!(p.torque_from_voltage(&Vec2::zeros()), Vec2::zeros());
        let v = Vec2::new(3.2, -7.5);
        let back = p.voltage_from_torque(&p.torque_from_voltage(&v)).unwrap();
        assert!((back - v).norm() < 1e-12);
        let singular = HelicopterParams { k_pp: 1.0, k_py: 1.0, k_yp: 1.0, k_yy: 1.0, ..p };
        assert!(matches!(singular.voltage_from_torque(&v), Err(PlantError::SingularMap { .. })));
        assert!(singular.validate().is_err());
    }

    #[test]
    fn default_bounds_hold_for_table_values() {
        let h = heli();
        let b = default_bounds(&h.params);
        assert_eq!(b.km1, 0.0432);
        assert_eq!((b.km2, b.kv, b.kg, b.kf1, b.kf2, b.theta_bar, b.d_bar), (0.0908, 0.03365, 2.514, 0.0, 0.8, 0.91, 0.5));
        b.validate().unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let report = verify_bounds(&h, &b, 1000, 5.0, &mut rng);
        assert!(report.violations.is_empty(), "{:?}", report.violations.first());
        // m g l = 2.5139 sits just under kg.
        assert!(report.worst_ratio[2] > 0.99 && report.worst_ratio[2] <= 1.0);
    }

    #[test]
    fn verify_bounds_reports_counterexamples() {
        let h = heli();
        let b = BoundConstants { kg: 2.0, kv: 0.01, ..default_bounds(&h.params) };
        let mut rng = StdRng::seed_from_u64(1);
        let report = verify_bounds(&h, &b, 200, 5.0, &mut rng);
        assert!(report.violations.iter().any(|v| v.property == "gravity"));
        assert!(report.violations.iter().any(|v| v.property == "coriolis"));
    }
}
