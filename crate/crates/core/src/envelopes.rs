//! Time-varying constraint envelopes.
//!
//! An envelope is a positive function of time bounding the norm of some
//! signal. The prescribed-performance shape
//! `(phi0 - phi_inf) / (1 + kappa t^nu) + phi_inf` is the workhorse; the other variants exist to compose error
//! bounds out of state bounds and to build the filtered-error envelope.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Step of the central difference used wherever an envelope has no closed-form
/// derivative.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("invalid envelope parameters: {0}")]
    InvalidParameters(String),
    #[error("derivative undefined at t = {t} (nu = {nu} < 1)")]
    DerivativeDomain { t: f64, nu: f64 },
    #[error("target {eps} outside the open interval ({phi_inf}, {phi0})")]
    TargetOutOfRange { eps: f64, phi_inf: f64, phi0: f64 },
    #[error("infeasible reference: {what} margin is {margin} at t = {t}")]
    InfeasibleReference { what: &'static str, t: f64, margin: f64 },
    #[error("degenerate filter gain: alpha = {alpha}")]
    DegenerateGain { alpha: f64 },
    #[error("degenerate filtered-error envelope: phi_r = {value} at t = {t}")]
    DegenerateEnvelope { t: f64, value: f64 },
    #[error("time grid must be non-empty with a positive step")]
    EmptyGrid,
}

/// Prescribed performance function `(phi0 - phi_inf) (1 + kappa t^nu)^-1 + phi_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpfEnvelope {
    pub phi0: f64,
    #[serde(rename = "phiInf")]
    pub phi_inf: f64,
    pub kappa: f64,
    pub nu: f64,
}

impl PpfEnvelope {
    /// `phi0 == phi_inf` is accepted and yields a constant envelope.
    pub fn new(phi0: f64, phi_inf: f64, kappa: f64, nu: f64) -> Result<Self, EnvelopeError> {
        let env = Self { phi0, phi_inf, kappa, nu };
        env.check()?;
        Ok(env)
    }

    pub fn check(&self) -> Result<(), EnvelopeError> {
        let all_finite = [self.phi0, self.phi_inf, self.kappa, self.nu]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(EnvelopeError::InvalidParameters("non-finite parameter".into()));
        }
        if !(self.phi_inf > 0.0) {
            return Err(EnvelopeError::InvalidParameters(format!(
                "phiInf must be positive, got {}",
                self.phi_inf
            )));
        }
        if self.phi0 < self.phi_inf {
            return Err(EnvelopeError::InvalidParameters(format!(
                "phi0 ({}) must not be below phiInf ({})",
                self.phi0, self.phi_inf
            )));
        }
        if !(self.kappa > 0.0) || !(self.nu > 0.0) {
            return Err(EnvelopeError::InvalidParameters(format!(
                "kappa and nu must be positive, got kappa = {}, nu = {}",
                self.kappa, self.nu
            )));
        }
        Ok(())
    }

    #[inline]
    fn t_pow(&self, t: f64) -> f64 {
        if self.nu == 1.0 {
            t
        } else {
            t.powf(self.nu)
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        (self.phi0 - self.phi_inf) / (1.0 + self.kappa * self.t_pow(t)) + self.phi_inf
    }

    /// Analytic time derivative. For `nu < 1` the slope diverges at `t = 0` and
    /// the query is rejected there.
    pub fn derivative(&self, t: f64) -> Result<f64, EnvelopeError> {
        let span = self.phi0 - self.phi_inf;
        if span == 0.0 {
            return Ok(0.0);
        }
        if t <= 0.0 {
            return if self.nu > 1.0 {
                Ok(0.0)
            } else if self.nu == 1.0 {
                Ok(-span * self.kappa)
            } else {
                Err(EnvelopeError::DerivativeDomain { t, nu: self.nu })
            };
        }
        let denom = 1.0 + self.kappa * self.t_pow(t);
        let t_nu_minus_1 = if self.nu == 1.0 { 1.0 } else { t.powf(self.nu - 1.0) };
        Ok(-span * self.kappa * self.nu * t_nu_minus_1 / (denom * denom))
    }

    /// Time at which the envelope falls to `eps`.
    pub fn convergence_time(&self, eps: f64) -> Result<f64, EnvelopeError> {
        if !(eps > self.phi_inf && eps < self.phi0) {
            return Err(EnvelopeError::TargetOutOfRange {
                eps,
                phi_inf: self.phi_inf,
                phi0: self.phi0,
            });
        }
        // (phi0 - phi_inf)/(eps - phi_inf) - 1, without the cancellation.
        let excess = (self.phi0 - eps) / (eps - self.phi_inf);
        let base = excess / self.kappa;
        Ok(if self.nu == 1.0 { base } else { base.powf(1.0 / self.nu) })
    }

    /// Same shape with both bounds multiplied by `factor` (unit conversion).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            phi0: self.phi0 * factor,
            phi_inf: self.phi_inf * factor,
            ..*self
        }
    }
}

/// A positive, (piecewise) continuously differentiable function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Ppf(PpfEnvelope),
    #[serde(rename = "const")]
    Constant { value: f64 },
    /// Pointwise minimum of the members; its derivative is taken numerically.
    PointwiseMin { members: Vec<Envelope> },
    Shifted { base: Box<Envelope>, offset: f64 },
    /// Weighted sum `sum_i w_i f_i(t)`.
    Sum { terms: Vec<(f64, Envelope)> },
    /// The time derivative of `base`, used as an envelope in its own right.
    Rate { base: Box<Envelope> },
}

impl From<PpfEnvelope> for Envelope {
    fn from(p: PpfEnvelope) -> Self {
        Envelope::Ppf(p)
    }
}

impl Envelope {
    pub fn constant(value: f64) -> Self {
        Envelope::Constant { value }
    }

    pub fn shifted(self, offset: f64) -> Self {
        match self {
            Envelope::Constant { value } => Envelope::Constant { value: value + offset },
            Envelope::Shifted { base, offset: o } => Envelope::Shifted { base, offset: o + offset },
            other => Envelope::Shifted { base: Box::new(other), offset },
        }
    }

    /// `factor * self` for `factor > 0`, e.g. a unit conversion.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Envelope::Ppf(p) => Envelope::Ppf(p.scaled(factor)),
            Envelope::Constant { value } => Envelope::Constant { value: value * factor },
            Envelope::PointwiseMin { members } => {
                Envelope::PointwiseMin { members: members.iter().map(|m| m.scaled(factor)).collect() }
            }
            Envelope::Shifted { base, offset } => {
                Envelope::Shifted { base: Box::new(base.scaled(factor)), offset: offset * factor }
            }
            Envelope::Sum { terms } => Envelope::Sum { terms: terms.iter().map(|(w, e)| (*w, e.scaled(factor))).collect() },
            Envelope::Rate { base } => Envelope::Rate { base: Box::new(base.scaled(factor)) },
        }
    }

    /// `self - other`, folding the constant cases.
    pub fn minus(self, other: Envelope) -> Self {
        match other {
            Envelope::Constant { value } => match self {
                Envelope::Ppf(p) if p.phi_inf - value > 0.0 => Envelope::Ppf(PpfEnvelope {
                    phi0: p.phi0 - value,
                    phi_inf: p.phi_inf - value,
                    ..p
                }),
                base => base.shifted(-value),
            },
            other => Envelope::Sum { terms: vec![(1.0, self), (-1.0, other)] },
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Envelope::Ppf(p) => p.value(t),
            Envelope::Constant { value } => *value,
            Envelope::PointwiseMin { members } => members
                .iter()
                .map(|m| m.value(t))
                .fold(f64::INFINITY, f64::min),
            Envelope::Shifted { base, offset } => base.value(t) + offset,
            Envelope::Sum { terms } => terms.iter().map(|(w, e)| w * e.value(t)).sum(),
            // A decaying PPF with nu < 1 has slope -inf at the origin.
            Envelope::Rate { base } => base.derivative(t).unwrap_or(f64::NEG_INFINITY),
        }
    }

    pub fn derivative(&self, t: f64) -> Result<f64, EnvelopeError> {
        match self {
            Envelope::Ppf(p) => p.derivative(t),
            Envelope::Constant { .. } => Ok(0.0),
            Envelope::Shifted { base, .. } => base.derivative(t),
            Envelope::Sum { terms } => {
                let mut acc = 0.0;
                for (w, e) in terms {
                    acc += w * e.derivative(t)?;
                }
                Ok(acc)
            }
            Envelope::PointwiseMin { .. } | Envelope::Rate { .. } => Ok(self.numerical_derivative(t)),
        }
    }

    /// Central difference with step [`FD_STEP`], one-sided near the origin.
    pub fn numerical_derivative(&self, t: f64) -> f64 {
        finite_difference(|s| self.value(s), t, FD_STEP)
    }

    /// False when the derivative is only piecewise defined (min-composition).
    pub fn is_smooth(&self) -> bool {
        match self {
            Envelope::Ppf(_) | Envelope::Constant { .. } => true,
            Envelope::PointwiseMin { .. } => false,
            Envelope::Shifted { base, .. } | Envelope::Rate { base } => base.is_smooth(),
            Envelope::Sum { terms } => terms.iter().all(|(_, e)| e.is_smooth()),
        }
    }

    fn collect_ppfs<'a>(&'a self, out: &mut Vec<&'a PpfEnvelope>) {
        match self {
            Envelope::Ppf(p) => out.push(p),
            Envelope::Constant { .. } => {}
            Envelope::PointwiseMin { members } => members.iter().for_each(|m| m.collect_ppfs(out)),
            Envelope::Shifted { base, .. } | Envelope::Rate { base } => base.collect_ppfs(out),
            Envelope::Sum { terms } => terms.iter().for_each(|(_, e)| e.collect_ppfs(out)),
        }
    }
}

/// Derivative estimate of `f` at `t >= 0`: central where `t >= h`, forward otherwise.
pub fn finite_difference(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    if t >= h {
        (f(t + h) - f(t - h)) / (2.0 * h)
    } else {
        (f(t + h) - f(t)) / h
    }
}

/// Uniform grid `0, step, 2 step, ..., horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, step: f64) -> Result<Self, EnvelopeError> {
        if !(step > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(EnvelopeError::EmptyGrid);
        }
        let intervals = (horizon / step).round() as usize;
        Ok(Self { step, points: intervals + 1 })
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.points - 1) as f64
    }

    pub fn at(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.at(i))
    }
}

/// Error envelopes from state envelopes and reference bounds:
/// `phi_e = phi_q - phi_qd`, `phi_edot = phi_qdot - phi_qdotd`.
pub fn error_envelopes(
    phi_q: &Envelope,
    phi_qdot: &Envelope,
    phi_qd: &Envelope,
    phi_qdotd: &Envelope,
    grid: &TimeGrid,
) -> Result<(Envelope, Envelope), EnvelopeError> {
    let phi_e = phi_q.clone().minus(phi_qd.clone());
    let phi_edot = phi_qdot.clone().minus(phi_qdotd.clone());
    for (what, env) in [("position", &phi_e), ("velocity", &phi_edot)] {
        if let Some(t) = grid.iter().find(|&t| !(env.value(t) > 0.0)) {
            return Err(EnvelopeError::InfeasibleReference { what, t, margin: env.value(t) });
        }
    }
    Ok((phi_e, phi_edot))
}

/// Largest admissible filter gain on the grid, backed off by `eps1`.
pub fn select_alpha(
    phi_e: &Envelope,
    phi_edot: &Envelope,
    grid: &TimeGrid,
    eps1: f64,
) -> Result<f64, EnvelopeError> {
    if grid.points == 0 {
        return Err(EnvelopeError::EmptyGrid);
    }
    let inf_ratio = grid
        .iter()
        .map(|t| phi_edot.value(t) / phi_e.value(t))
        .fold(f64::INFINITY, f64::min);
    let alpha = inf_ratio - eps1;
    if !(alpha > 0.0) {
        return Err(EnvelopeError::DegenerateGain { alpha });
    }
    Ok(alpha)
}

/// The two branches bounding the filtered error:
/// `d/dt phi_e + alpha phi_e` and `phi_edot - alpha phi_e`.
pub fn phi_r_branches(phi_e: &Envelope, phi_edot: &Envelope, alpha: f64) -> [Envelope; 2] {
    [
        Envelope::Sum {
            terms: vec![
                (1.0, Envelope::Rate { base: Box::new(phi_e.clone()) }),
                (alpha, phi_e.clone()),
            ],
        },
        Envelope::Sum { terms: vec![(1.0, phi_edot.clone()), (-alpha, phi_e.clone())] },
    ]
}

/// Upper limit for the filtered-error envelope (before the `eps2` back-off).
pub fn phi_r_max(phi_e: &Envelope, phi_edot: &Envelope, alpha: f64) -> Envelope {
    Envelope::PointwiseMin { members: phi_r_branches(phi_e, phi_edot, alpha).into() }
}

/// Default back-off: 5% of the smallest `phi_r_max` on the grid.
pub fn default_eps2(phi_r_max: &Envelope, grid: &TimeGrid) -> f64 {
    0.05 * grid.iter().map(|t| phi_r_max.value(t)).fold(f64::INFINITY, f64::min)
}

/// Filtered-error envelope `phi_r = phi_r_max - eps2`; `eps2 = None` selects
/// [`default_eps2`]. Returns the envelope together with the back-off used.
pub fn phi_r_envelope(
    phi_e: &Envelope,
    phi_edot: &Envelope,
    alpha: f64,
    grid: &TimeGrid,
    eps2: Option<f64>,
) -> Result<(Envelope, f64), EnvelopeError> {
    let max = phi_r_max(phi_e, phi_edot, alpha);
    let eps2 = eps2.unwrap_or_else(|| default_eps2(&max, grid));
    let phi_r = max.shifted(-eps2);
    for t in grid.iter() {
        let v = phi_r.value(t);
        if !(v > 0.0) {
            return Err(EnvelopeError::DegenerateEnvelope { t, value: v });
        }
    }
    Ok((phi_r, eps2))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Grid times where the envelope is not strictly positive.
    pub positivity_violations: Vec<f64>,
    /// Largest gap between the derivative evaluator and a grid-scale central difference.
    pub max_derivative_discrepancy: f64,
    pub discrepancy_time: f64,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.positivity_violations.is_empty() && self.warnings.is_empty()
    }
}

/// Audits an envelope on `grid`. The derivative check uses a central
/// difference spanning one grid step, so kinks of min-composed envelopes show
/// up at the nearest grid point.
pub fn validate(env: &Envelope, grid: &TimeGrid) -> ValidationReport {
    let mut report = ValidationReport::default();
    let h = if grid.points > 1 { grid.step } else { 1e-3 };
    for t in grid.iter() {
        if !(env.value(t) > 0.0) {
            report.positivity_violations.push(t);
        }
        // nu < 1 envelopes are singular at the origin; skip it there.
        let Ok(d) = env.derivative(t) else { continue };
        let fd = if t >= h {
            finite_difference(|s| env.value(s), t, h)
        } else {
            (-3.0 * env.value(t) + 4.0 * env.value(t + h) - env.value(t + 2.0 * h)) / (2.0 * h)
        };
        let gap = (d - fd).abs();
        if gap > report.max_derivative_discrepancy {
            report.max_derivative_discrepancy = gap;
            report.discrepancy_time = t;
        }
    }
    let mut ppfs = Vec::new();
    env.collect_ppfs(&mut ppfs);
    for p in ppfs {
        if p.nu < 1.0 && p.phi0 > p.phi_inf {
            report.warnings.push(format!(
                "ppf with nu = {} < 1 is not differentiable at t = 0 (slope unbounded)",
                p.nu
            ));
        }
    }
    report
}

/// Every bound the controller and the monitor need, in consistent units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSet {
    pub phi_q: Envelope,
    pub phi_qdot: Envelope,
    pub phi_qd: Envelope,
    pub phi_qdotd: Envelope,
    pub phi_qddotd: Envelope,
    pub phi_e: Envelope,
    pub phi_edot: Envelope,
    pub phi_r: Envelope,
    pub phi_tau: Envelope,
    pub alpha: f64,
}

/// Which envelope invariant failed, and where.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeSetViolation {
    #[error("{name} is not positive at t = {t} (value {value})")]
    NotPositive { name: &'static str, t: f64, value: f64 },
    #[error("gain condition alpha < phi_edot/phi_e fails at t = {t}: alpha = {alpha}, ratio = {ratio}")]
    GainCondition { t: f64, alpha: f64, ratio: f64 },
    #[error("phi_r = {phi_r} is not below its admissible limit {limit} at t = {t}")]
    FilteredErrorBound { t: f64, phi_r: f64, limit: f64 },
    #[error("{name} does not match the state/reference difference at t = {t}")]
    Inconsistent { name: &'static str, t: f64 },
}

impl EnvelopeSet {
    /// Checks positivity, the error-envelope identities, the gain condition
    /// and the admissibility of `phi_r` on every grid point.
    pub fn check(&self, grid: &TimeGrid) -> Result<(), EnvelopeSetViolation> {
        let [b1, b2] = phi_r_branches(&self.phi_e, &self.phi_edot, self.alpha);
        for t in grid.iter() {
            for (name, env) in [
                ("phi_e", &self.phi_e),
                ("phi_edot", &self.phi_edot),
                ("phi_r", &self.phi_r),
                ("phi_tau", &self.phi_tau),
            ] {
                let value = env.value(t);
                if !(value > 0.0) {
                    return Err(EnvelopeSetViolation::NotPositive { name, t, value });
                }
            }
            let tol = 1e-9;
            let pe = self.phi_e.value(t);
            let ped = self.phi_edot.value(t);
            if (self.phi_q.value(t) - self.phi_qd.value(t) - pe).abs() > tol * (1.0 + pe.abs()) {
                return Err(EnvelopeSetViolation::Inconsistent { name: "phi_e", t });
            }
            if (self.phi_qdot.value(t) - self.phi_qdotd.value(t) - ped).abs() > tol * (1.0 + ped.abs()) {
                return Err(EnvelopeSetViolation::Inconsistent { name: "phi_edot", t });
            }
            let ratio = ped / pe;
            if !(self.alpha < ratio) {
                return Err(EnvelopeSetViolation::GainCondition { t, alpha: self.alpha, ratio });
            }
            let limit = b1.value(t).min(b2.value(t));
            let phi_r = self.phi_r.value(t);
            if !(phi_r < limit) {
                return Err(EnvelopeSetViolation::FilteredErrorBound { t, phi_r, limit });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppf(phi0: f64, phi_inf: f64, kappa: f64, nu: f64) -> PpfEnvelope {
        PpfEnvelope::new(phi0, phi_inf, kappa, nu).unwrap()
    }

    #[test]
    fn ppf_value_examples() {
        let p = ppf(11.0, 1.0, 0.2, 1.0);
        assert_eq!(p.value(0.0), 11.0);
        assert!((p.value(20.0) - 3.0).abs() < 1e-12);
        assert!((p.value(1e12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ppf_derivative_examples() {
        let p = ppf(11.0, 1.0, 0.2, 1.0);
        assert!((p.derivative(0.0).unwrap() + 2.0).abs() < 1e-12);
        let q = ppf(2.0, 0.1, 1.0, 1.0);
        assert!((q.derivative(1.0).unwrap() + 0.475).abs() < 1e-12);
        let flat = ppf(3.0, 3.0, 0.7, 0.4);
        assert_eq!(flat.derivative(0.0).unwrap(), 0.0);
        assert_eq!(flat.derivative(5.0).unwrap(), 0.0);
        assert_eq!(ppf(2.0, 1.0, 1.0, 2.0).derivative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn ppf_derivative_rejects_origin_for_small_nu() {
        let p = ppf(2.0, 0.1, 1.0, 0.5);
        assert!(matches!(p.derivative(0.0), Err(EnvelopeError::DerivativeDomain { .. })));
        assert!(p.derivative(0.3).unwrap() < 0.0);
    }

    #[test]
    fn ppf_rejects_bad_parameters() {
        assert!(PpfEnvelope::new(1.0, 2.0, 1.0, 1.0).is_err());
        assert!(PpfEnvelope::new(2.0, 0.0, 1.0, 1.0).is_err());
        assert!(PpfEnvelope::new(2.0, 1.0, 0.0, 1.0).is_err());
        assert!(PpfEnvelope::new(2.0, 1.0, 1.0, -1.0).is_err());
        assert!(PpfEnvelope::new(f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn convergence_time_examples() {
        assert_eq!(ppf(2.0, 0.1, 1.0, 1.0).convergence_time(0.2).unwrap(), 18.0);
        assert!((ppf(11.0, 1.0, 0.2, 1.0).convergence_time(3.0).unwrap() - 20.0).abs() < 1e-12);
        let p = ppf(2.0, 0.1, 1.0, 1.0);
        assert!(p.convergence_time(2.0 - 1e-12).unwrap() < 1e-9);
        assert!(p.convergence_time(0.1).is_err());
        assert!(p.convergence_time(2.0).is_err());
    }

    #[test]
    fn error_envelopes_examples() {
        let grid = TimeGrid::new(10.0, 0.1).unwrap();
        let (e, ed) = error_envelopes(
            &Envelope::constant(5.0),
            &Envelope::constant(4.0),
            &Envelope::constant(2.0),
            &Envelope::constant(1.0),
            &grid,
        )
        .unwrap();
        assert_eq!(e.value(3.0), 3.0);
        assert_eq!(ed.value(3.0), 3.0);

        let err = error_envelopes(
            &Envelope::constant(2.0),
            &Envelope::constant(4.0),
            &Envelope::constant(2.0),
            &Envelope::constant(1.0),
            &grid,
        )
        .unwrap_err();
        assert!(matches!(err, EnvelopeError::InfeasibleReference { t, .. } if t == 0.0));

        let phi_q = Envelope::Ppf(ppf(47.0, 37.0, 0.2, 1.0));
        let (e, _) = error_envelopes(
            &phi_q,
            &Envelope::constant(4.0),
            &Envelope::constant(36.0),
            &Envelope::constant(1.0),
            &grid,
        )
        .unwrap();
        assert_eq!(e, Envelope::Ppf(ppf(11.0, 1.0, 0.2, 1.0)));
    }

    #[test]
    fn infeasible_reference_reports_first_offending_time() {
        let grid = TimeGrid::new(10.0, 0.5).unwrap();
        // phi_q decays from 3 to 1 and crosses the reference bound 2 at t = 1.
        let phi_q = Envelope::Ppf(ppf(3.0, 1.0, 1.0, 1.0));
        let err = error_envelopes(
            &phi_q,
            &Envelope::constant(4.0),
            &Envelope::constant(2.0),
            &Envelope::constant(1.0),
            &grid,
        )
        .unwrap_err();
        assert!(matches!(err, EnvelopeError::InfeasibleReference { what: "position", t, .. } if t == 1.0));
    }

    #[test]
    fn select_alpha_examples() {
        let grid = TimeGrid::new(5.0, 0.5).unwrap();
        let two = Envelope::constant(2.0);
        assert!((select_alpha(&two, &two, &grid, 0.1).unwrap() - 0.9).abs() < 1e-15);
        let pe = Envelope::Ppf(ppf(3.0, 1.0, 0.5, 1.0));
        let ped = Envelope::Ppf(ppf(3.0 * 1.7, 1.7, 0.5, 1.0));
        assert!((select_alpha(&pe, &ped, &grid, 0.2).unwrap() - 1.5).abs() < 1e-12);
        assert!(matches!(
            select_alpha(&two, &two, &grid, 1.0),
            Err(EnvelopeError::DegenerateGain { .. })
        ));
    }

    #[test]
    fn phi_r_static_examples() {
        let grid = TimeGrid::new(5.0, 0.5).unwrap();
        let two = Envelope::constant(2.0);
        let (phi_r, eps2) = phi_r_envelope(&two, &two, 0.5, &grid, Some(0.0)).unwrap();
        assert_eq!(eps2, 0.0);
        assert!((phi_r.value(2.0) - 1.0).abs() < 1e-15);

        // Symmetric crossover: alpha = phi_edot / (2 phi_e).
        let pe = Envelope::constant(3.0);
        let ped = Envelope::constant(1.2);
        let [b1, b2] = phi_r_branches(&pe, &ped, 0.2);
        assert!((b1.value(1.0) - 0.6).abs() < 1e-12);
        assert!((b2.value(1.0) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn shrinking_phi_e_lowers_first_branch() {
        let pe = Envelope::Ppf(ppf(11.0, 1.0, 0.2, 1.0));
        let ped = Envelope::Ppf(ppf(4.5, 1.5, 0.1, 1.0));
        let alpha = 0.359;
        let [b1, _] = phi_r_branches(&pe, &ped, alpha);
        // Direct evaluation: -2 + 0.359 * 11.
        assert!((b1.value(0.0) - (-2.0 + alpha * 11.0)).abs() < 1e-9);
        assert!(b1.value(0.0) < alpha * pe.value(0.0));
    }

    #[test]
    fn phi_r_degenerate_when_second_branch_collapses() {
        let grid = TimeGrid::new(5.0, 0.5).unwrap();
        let pe = Envelope::constant(1.0);
        let ped = Envelope::constant(0.5 + 1e-12);
        let err = phi_r_envelope(&pe, &ped, 0.5, &grid, Some(1e-6)).unwrap_err();
        assert!(matches!(err, EnvelopeError::DegenerateEnvelope { .. }));
    }

    #[test]
    fn validate_examples() {
        let grid = TimeGrid::new(10.0, 0.01).unwrap();
        assert!(validate(&Envelope::constant(1.0), &grid).is_clean());

        let report = validate(&Envelope::Ppf(ppf(2.0, 0.1, 1.0, 0.5)), &grid);
        assert_eq!(report.warnings.len(), 1);

        let negative = validate(&Envelope::constant(1.0).shifted(-2.0), &grid);
        assert_eq!(negative.positivity_violations.len(), grid.points);
    }

    #[test]
    fn validate_localizes_kink_of_crossing_min() {
        // a(t) = 2/(1+t)+1 and b(t) = 1/(1+0.1t)+1 cross where 2/(1+t) = 1/(1+0.1t),
        // i.e. 2 + 0.2t = 1 + t, t = 1.25.
        let a = Envelope::Ppf(ppf(3.0, 1.0, 1.0, 1.0));
        let b = Envelope::Ppf(ppf(2.0, 1.0, 0.1, 1.0));
        assert!((a.value(1.25) - b.value(1.25)).abs() < 1e-12);
        let min = Envelope::PointwiseMin { members: vec![a, b] };
        let grid = TimeGrid::new(5.0, 0.03).unwrap();
        let report = validate(&min, &grid);
        assert!((report.discrepancy_time - 1.25).abs() <= grid.step, "{report:?}");
        // Slope jump at the crossing: a' = -2/(2.25)^2, b' = -0.1/(1.125)^2.
        let jump = (-2.0 / 2.25f64.powi(2) + 0.1 / 1.125f64.powi(2)).abs();
        assert!(report.max_derivative_discrepancy > 0.2 * jump);

        let smooth = validate(&Envelope::Ppf(ppf(3.0, 1.0, 1.0, 1.0)), &grid);
        assert!(smooth.max_derivative_discrepancy < 5e-3);
    }

    #[test]
    fn envelope_set_check_catches_gain_condition() {
        let grid = TimeGrid::new(2.0, 0.5).unwrap();
        let pe = Envelope::constant(2.0);
        let ped = Envelope::constant(2.0);
        let (phi_r, _) = phi_r_envelope(&pe, &ped, 0.5, &grid, Some(0.1)).unwrap();
        let mut set = EnvelopeSet {
            phi_q: Envelope::constant(3.0),
            phi_qdot: Envelope::constant(3.0),
            phi_qd: Envelope::constant(1.0),
            phi_qdotd: Envelope::constant(1.0),
            phi_qddotd: Envelope::constant(1.0),
            phi_e: pe,
            phi_edot: ped,
            phi_r,
            phi_tau: Envelope::constant(1.0),
            alpha: 0.5,
        };
        set.check(&grid).unwrap();
        set.alpha = 1.0;
        assert!(matches!(set.check(&grid), Err(EnvelopeSetViolation::GainCondition { .. })));
    }

    #[test]
    fn envelope_json_shape() {
        let env: Envelope =
            serde_json::from_str(r#"{"kind":"ppf","phi0":11,"phiInf":1,"kappa":0.2,"nu":1}"#).unwrap();
        assert_eq!(env, Envelope::Ppf(ppf(11.0, 1.0, 0.2, 1.0)));
        let c: Envelope = serde_json::from_str(r#"{"kind":"const","value":2.5}"#).unwrap();
        assert_eq!(c, Envelope::constant(2.5));
    }
}
