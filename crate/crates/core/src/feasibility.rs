//! Offline feasibility certificate for a set of time-varying state and input
//! envelopes.
//!
//! Worst-case bounds on the auxiliary control give
//! `|tau_a| <= psi1 |r|^2 + (psi2 + |phi_r'|/phi_r km2) |r| + psi3`, and the
//! certificate asks that the input envelope dominate this bound on the
//! filtered-error envelope:
//!
//! ```text
//! phi_tau > (psi1 phi_r + psi2 - lambda_min(K) + |phi_r'| km2) phi_r + psi3 (+ d_bar)
//! ```
//!
//! [`check_feasibility`] runs the whole procedure: pick the filter gain, build
//! `phi_r`, evaluate the margin on a time grid.

use serde::Serialize;

use crate::envelopes::{phi_r_envelope, select_alpha, Envelope, EnvelopeError, TimeGrid};
use crate::linalg::sym_eigen2;
use crate::plant::BoundConstants;
use crate::Mat2;

/// `6 theta_bar kv`
pub fn psi1(b: &BoundConstants) -> f64 {
    6.0 * b.theta_bar * b.kv
}

/// `theta_bar (2 alpha km2 + 5 kv (alpha phi_e(0) + phi_qdotd(t)) + 2 kf2) + lambda_max(K)`
pub fn psi2(t: f64, b: &BoundConstants, alpha: f64, k: &Mat2, phi_e0: f64, phi_qdotd: &Envelope) -> f64 {
    let vel = alpha * phi_e0 + phi_qdotd.value(t);
    b.theta_bar * (2.0 * alpha * b.km2 + 5.0 * b.kv * vel + 2.0 * b.kf2) + sym_eigen2(k).1
}

/// `theta_bar (km2 (alpha^2 phi_e(0) + phi_qddotd(t)) + kv v^2 + kg + kf1 + kf2 v)`
/// with `v = alpha phi_e(0) + phi_qdotd(t)`.
pub fn psi3(
    t: f64,
    b: &BoundConstants,
    alpha: f64,
    phi_e0: f64,
    phi_qdotd: &Envelope,
    phi_qddotd: &Envelope,
) -> f64 {
    let vel = alpha * phi_e0 + phi_qdotd.value(t);
    b.theta_bar
        * (b.km2 * (alpha * alpha * phi_e0 + phi_qddotd.value(t))
            + b.kv * vel * vel
            + b.kg
            + b.kf1
            + b.kf2 * vel)
}

/// Terms of the certificate at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginPoint {
    pub t: f64,
    pub phi_tau: f64,
    pub phi_r: f64,
    pub phi_r_dot: f64,
    pub psi2_prime: f64,
    pub psi3: f64,
    /// Required input bound (right side of the certificate).
    pub required: f64,
    pub margin: f64,
}

/// Margin `phi_tau - required` at one instant. `psi2` is the unprimed value;
/// `lambda_min(K)` is subtracted here. With `disturbed`, `d_bar` is added to
/// `psi3`.
#[allow(clippy::too_many_arguments)]
pub fn c1_margin(
    t: f64,
    phi_tau: &Envelope,
    phi_r: &Envelope,
    b: &BoundConstants,
    psi1: f64,
    psi2_at: f64,
    psi3_at: f64,
    k: &Mat2,
    disturbed: bool,
) -> Result<MarginPoint, EnvelopeError> {
    let pr = phi_r.value(t);
    let pr_dot = phi_r.derivative(t)?;
    let psi2_prime = psi2_at - sym_eigen2(k).0;
    let psi3_eff = if disturbed { psi3_at + b.d_bar } else { psi3_at };
    let required = (psi1 * pr + psi2_prime + pr_dot.abs() * b.km2) * pr + psi3_eff;
    let pt = phi_tau.value(t);
    Ok(MarginPoint {
        t,
        phi_tau: pt,
        phi_r: pr,
        phi_r_dot: pr_dot,
        psi2_prime,
        psi3: psi3_eff,
        required,
        margin: pt - required,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityInputs {
    pub bounds: BoundConstants,
    pub phi_e: Envelope,
    pub phi_edot: Envelope,
    pub phi_tau: Envelope,
    pub phi_qdotd: Envelope,
    pub phi_qddotd: Envelope,
    pub k: Mat2,
    pub eps1: f64,
    /// `None` selects 5% of the smallest admissible `phi_r` on the grid.
    pub eps2: Option<f64>,
    /// Use this filter gain instead of selecting one from the envelopes.
    pub alpha: Option<f64>,
    pub grid: TimeGrid,
    pub disturbed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    GainDegenerate,
    EnvelopeDegenerate,
    InputBoundInsufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub alpha: Option<f64>,
    pub eps1: f64,
    pub eps2: Option<f64>,
    pub disturbed: bool,
    pub grid_step: f64,
    pub horizon: f64,
    pub psi1: f64,
    pub phi_r: Option<Envelope>,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub failure_reason: Option<FailureReason>,
    pub failure_detail: Option<String>,
    #[serde(skip)]
    pub margins: Vec<MarginPoint>,
}

impl FeasibilityReport {
    fn failed(inp: &FeasibilityInputs, reason: FailureReason, detail: String, alpha: Option<f64>) -> Self {
        Self {
            feasible: false,
            alpha,
            eps1: inp.eps1,
            eps2: inp.eps2,
            disturbed: inp.disturbed,
            grid_step: inp.grid.step,
            horizon: inp.grid.horizon(),
            psi1: psi1(&inp.bounds),
            phi_r: None,
            worst_margin: f64::NEG_INFINITY,
            worst_time: 0.0,
            failure_reason: Some(reason),
            failure_detail: Some(detail),
            margins: Vec::new(),
        }
    }
}

/// Writes the per-grid-point margin series as CSV.
pub fn write_margins_csv<W: std::io::Write>(w: W, margins: &[MarginPoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for m in margins {
        out.serialize(m)?;
    }
    out.flush()?;
    Ok(())
}

/// Selects `alpha`, builds `phi_r` and evaluates the certificate margin on
/// every grid point. Degenerate envelopes are reported, not raised.
pub fn check_feasibility(inp: &FeasibilityInputs) -> FeasibilityReport {
    let alpha = match inp.alpha {
        Some(a) => {
            let bad = inp
                .grid
                .iter()
                .find(|&t| !(a > 0.0 && a < inp.phi_edot.value(t) / inp.phi_e.value(t)));
            if let Some(t) = bad {
                let detail = format!(
                    "alpha = {a} violates alpha < phi_edot/phi_e = {} at t = {t}",
                    inp.phi_edot.value(t) / inp.phi_e.value(t)
                );
                return FeasibilityReport::failed(inp, FailureReason::GainDegenerate, detail, Some(a));
            }
            a
        }
        None => match select_alpha(&inp.phi_e, &inp.phi_edot, &inp.grid, inp.eps1) {
            Ok(a) => a,
            Err(e) => return FeasibilityReport::failed(inp, FailureReason::GainDegenerate, e.to_string(), None),
        },
    };
    let (phi_r, eps2) = match phi_r_envelope(&inp.phi_e, &inp.phi_edot, alpha, &inp.grid, inp.eps2) {
        Ok(v) => v,
        Err(e) => {
            return FeasibilityReport::failed(inp, FailureReason::EnvelopeDegenerate, e.to_string(), Some(alpha))
        }
    };

    let b = &inp.bounds;
    let p1 = psi1(b);
    let phi_e0 = inp.phi_e.value(0.0);
    let mut margins = Vec::with_capacity(inp.grid.points);
    for t in inp.grid.iter() {
        let p2 = psi2(t, b, alpha, &inp.k, phi_e0, &inp.phi_qdotd);
        let p3 = psi3(t, b, alpha, phi_e0, &inp.phi_qdotd, &inp.phi_qddotd);
        match c1_margin(t, &inp.phi_tau, &phi_r, b, p1, p2, p3, &inp.k, inp.disturbed) {
            Ok(point) => margins.push(point),
            Err(e) => {
                return FeasibilityReport::failed(inp, FailureReason::EnvelopeDegenerate, e.to_string(), Some(alpha))
            }
        }
    }
    let worst = margins
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .copied()
        .expect("grid has at least one point");
    let feasible = worst.margin > 0.0;
    FeasibilityReport {
        feasible,
        alpha: Some(alpha),
        eps1: inp.eps1,
        eps2: Some(eps2),
        disturbed: inp.disturbed,
        grid_step: inp.grid.step,
        horizon: inp.grid.horizon(),
        psi1: p1,
        phi_r: Some(phi_r),
        worst_margin: worst.margin,
        worst_time: worst.t,
        failure_reason: (!feasible).then_some(FailureReason::InputBoundInsufficient),
        failure_detail: (!feasible).then(|| {
            format!(
                "input bound {} below required {} at t = {}",
                worst.phi_tau, worst.required, worst.t
            )
        }),
        margins,
    }
}
