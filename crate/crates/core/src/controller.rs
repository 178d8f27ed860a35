//! Saturated barrier-Lyapunov adaptive tracking law.
//!
//! The auxiliary input `tau_a = -Y theta_hat - K r + (phi_r'/phi_r) km2 r` is
//! clamped radially onto the ball of radius `phi_tau(t)`, and the parameter
//! estimate follows `proj(Gamma Y^T r / (km2 (phi_r^2 - |r|^2)))` inside the
//! ball of radius `theta_bar`.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::sym_eigen2;
use crate::plant::{ElState, EulerLagrange};
use crate::{Mat2, Mat6, ParamVec, Regressor, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("barrier violated: |r| = {r_norm} >= phi_r = {phi_r}")]
    BarrierViolation { r_norm: f64, phi_r: f64 },
    #[error("{name} is not symmetric positive definite")]
    NotPositiveDefinite { name: &'static str },
    #[error("invalid gain {name} = {value}")]
    InvalidGain { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerGains {
    pub alpha: f64,
    pub k: Mat2,
    pub gamma: Mat6,
    pub theta_bar: f64,
    pub eps_proj: f64,
}

impl ControllerGains {
    pub fn new(alpha: f64, k: Mat2, gamma: Mat6, theta_bar: f64, eps_proj: f64) -> Result<Self, ControllerError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ControllerError::InvalidGain { name: "alpha", value: alpha });
        }
        if !(theta_bar > 0.0) || !theta_bar.is_finite() {
            return Err(ControllerError::InvalidGain { name: "thetaBar", value: theta_bar });
        }
        if !(eps_proj > 0.0 && eps_proj < theta_bar) {
            return Err(ControllerError::InvalidGain { name: "epsProj", value: eps_proj });
        }
        if !is_spd(&k) {
            return Err(ControllerError::NotPositiveDefinite { name: "K" });
        }
        if !is_spd(&gamma) {
            return Err(ControllerError::NotPositiveDefinite { name: "Gamma" });
        }
        Ok(Self { alpha, k, gamma, theta_bar, eps_proj })
    }

    pub fn k_eigen(&self) -> (f64, f64) {
        sym_eigen2(&self.k)
    }
}

fn is_spd<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> bool {
    let asym = (m - m.transpose()).amax();
    asym <= 1e-12 * (1.0 + m.amax()) && m.cholesky().is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerState {
    pub theta_hat: ParamVec,
}

#[inline]
pub fn filtered_error(e: &Vec2, edot: &Vec2, alpha: f64) -> Vec2 {
    edot + alpha * e
}

/// `-Y theta_hat - K r + (phi_r_dot / phi_r) km2 r`
#[inline]
pub fn auxiliary_control(
    y: &Regressor,
    theta_hat: &ParamVec,
    k: &Mat2,
    r: &Vec2,
    phi_r: f64,
    phi_r_dot: f64,
    km2: f64,
) -> Vec2 {
    -(y * theta_hat) - k * r + (phi_r_dot / phi_r * km2) * r
}

/// Radial clamp onto the ball of radius `phi_tau`.
#[inline]
pub fn saturate(tau_a: &Vec2, phi_tau: f64) -> Vec2 {
    let n = tau_a.norm();
    if n <= phi_tau {
        *tau_a
    } else {
        let mut tau = (phi_tau / n) * tau_a;
        // Rounding can leave the result an ulp outside the ball.
        while tau.norm() > phi_tau {
            tau *= 1.0 - f64::EPSILON;
        }
        tau
    }
}

/// `tau - tau_a`; zero while unsaturated.
#[inline]
pub fn saturation_error(tau: &Vec2, tau_a: &Vec2) -> Vec2 {
    tau - tau_a
}

/// Smooth projection onto the ball `|theta| <= theta_bar` with a boundary
/// layer of width `eps_proj`. Inside `|theta| <= theta_bar - eps_proj`, or
/// whenever `y` points inward, `y` passes through unchanged; in the layer the
/// outward normal component is scaled down, reaching zero on the boundary.
pub fn projection(theta_hat: &ParamVec, y: &ParamVec, theta_bar: f64, eps_proj: f64) -> ParamVec {
    let n2 = theta_hat.norm_squared();
    let inner = theta_bar - eps_proj;
    let f = (n2 - inner * inner) / (theta_bar * theta_bar - inner * inner);
    let radial = theta_hat.dot(y);
    if f <= 0.0 || radial <= 0.0 {
        return *y;
    }
    y - (f * radial / n2) * theta_hat
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationRate {
    pub theta_hat_dot: ParamVec,
    /// The barrier denominator fell below `eps_den` and was clamped.
    pub clamped: bool,
}

/// Right-hand side of the parameter update,
/// `proj(Gamma Y^T r / max(km2 (phi_r^2 - |r|^2), eps_den))`.
#[allow(clippy::too_many_arguments)]
pub fn adaptation_rhs(
    y: &Regressor,
    r: &Vec2,
    gamma: &Mat6,
    phi_r: f64,
    km2: f64,
    theta_hat: &ParamVec,
    theta_bar: f64,
    eps_proj: f64,
    eps_den: f64,
) -> Result<AdaptationRate, ControllerError> {
    let r2 = r.norm_squared();
    if !(r2 < phi_r * phi_r) {
        return Err(ControllerError::BarrierViolation { r_norm: r2.sqrt(), phi_r });
    }
    let den = km2 * (phi_r * phi_r - r2);
    let clamped = den < eps_den;
    let raw = gamma * (y.transpose() * r) / den.max(eps_den);
    Ok(AdaptationRate { theta_hat_dot: projection(theta_hat, &raw, theta_bar, eps_proj), clamped })
}

/// `1/2 log(phi'^2 / (phi'^2 - r^T M r))` with `phi'^2 = km2 phi_r^2`.
pub fn blf_value(r: &Vec2, m: &Mat2, phi_r: f64, km2: f64) -> Result<f64, ControllerError> {
    let cap = km2 * phi_r * phi_r;
    let quad = r.dot(&(m * r));
    if !(quad < cap) {
        return Err(ControllerError::BarrierViolation { r_norm: r.norm(), phi_r });
    }
    // ln(cap / (cap - quad)) = -ln(1 - quad/cap)
    Ok(-0.5 * (-quad / cap).ln_1p())
}

/// Barrier term plus `1/2 theta_tilde^T Gamma^-1 theta_tilde`.
pub fn lyapunov_value(
    r: &Vec2,
    m: &Mat2,
    phi_r: f64,
    km2: f64,
    theta_tilde: &ParamVec,
    gamma: &Mat6,
) -> Result<f64, ControllerError> {
    let vr = blf_value(r, m, phi_r, km2)?;
    let chol = gamma
        .cholesky()
        .ok_or(ControllerError::NotPositiveDefinite { name: "Gamma" })?;
    Ok(vr + 0.5 * theta_tilde.dot(&chol.solve(theta_tilde)))
}

/// Reference sample `(q_d, qdot_d, qddot_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub q: Vec2,
    pub qdot: Vec2,
    pub qddot: Vec2,
}

/// Envelope values the law needs at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    pub phi_r: f64,
    pub phi_r_dot: f64,
    pub phi_tau: f64,
}

/// Everything computed in one evaluation of the law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub e: Vec2,
    pub edot: Vec2,
    pub r: Vec2,
    pub tau_a: Vec2,
    pub tau: Vec2,
    pub theta_hat_dot: ParamVec,
    pub denominator_clamped: bool,
}

impl ControlOutput {
    pub fn saturation_error(&self) -> Vec2 {
        saturation_error(&self.tau, &self.tau_a)
    }
}

/// The complete control law for one plant.
#[derive(Debug, Clone)]
pub struct TvblfController {
    pub gains: ControllerGains,
    pub km2: f64,
    /// Floor for the adaptation denominator.
    pub eps_den: f64,
}

impl TvblfController {
    /// `eps_den = 1e-9 km2 phi_r(0)^2`.
    pub fn new(gains: ControllerGains, km2: f64, phi_r0: f64) -> Self {
        Self { gains, km2, eps_den: 1e-9 * km2 * phi_r0 * phi_r0 }
    }

    pub fn evaluate<P: EulerLagrange>(
        &self,
        plant: &P,
        s: &ElState,
        reference: &ReferenceSample,
        env: &EnvelopeSample,
        theta_hat: &ParamVec,
    ) -> Result<ControlOutput, ControllerError> {
        let g = &self.gains;
        let e = s.q - reference.q;
        let edot = s.qdot - reference.qdot;
        let r = filtered_error(&e, &edot, g.alpha);
        if !(r.norm() < env.phi_r) {
            return Err(ControllerError::BarrierViolation { r_norm: r.norm(), phi_r: env.phi_r });
        }
        let accel = g.alpha * edot - reference.qddot;
        let vel = r - s.qdot;
        let y = plant.regressor(&s.q, &s.qdot, &accel, &vel);
        let tau_a = auxiliary_control(&y, theta_hat, &g.k, &r, env.phi_r, env.phi_r_dot, self.km2);
        let tau = saturate(&tau_a, env.phi_tau);
        let rate = adaptation_rhs(
            &y,
            &r,
            &g.gamma,
            env.phi_r,
            self.km2,
            theta_hat,
            g.theta_bar,
            g.eps_proj,
            self.eps_den,
        )?;
        Ok(ControlOutput {
            e,
            edot,
            r,
            tau_a,
            tau,
            theta_hat_dot: rate.theta_hat_dot,
            denominator_clamped: rate.clamped,
        })
    }
}
