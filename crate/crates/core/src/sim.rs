//! Fixed-step closed-loop simulation with constraint monitoring.

use std::cell::Cell;
use std::io::Write;

use nalgebra::SVector;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    blf_value, lyapunov_value, ControlOutput, ControllerError, ControllerGains, EnvelopeSample,
    ReferenceSample, TvblfController,
};
use crate::envelopes::{Envelope, EnvelopeSet, EnvelopeSetViolation, TimeGrid};
use crate::integrate::rk4_step;
use crate::plant::{BoundConstants, ElState, EulerLagrange, Helicopter};
use crate::{ParamVec, Vec2};

/// Closed-loop state `(q, qdot, theta_hat)`.
pub type LoopState = SVector<f64, 10>;

/// Tolerance on the input constraint; the radial clamp can overshoot by an ulp.
pub const INPUT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// `q_d(t) = offset + amplitude sin(omega t)`.
    Sinusoid { offset: [f64; 2], amplitude: [f64; 2], omega: f64 },
    /// Samples interpolated linearly and held beyond the ends.
    Table { t: Vec<f64>, q: Vec<[f64; 2]>, qdot: Vec<[f64; 2]>, qddot: Vec<[f64; 2]> },
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ReferenceSpec::Sinusoid { offset, amplitude, omega } => {
                if offset.iter().chain(amplitude).chain([omega]).any(|v| !v.is_finite()) {
                    return Err("reference has non-finite parameters".into());
                }
            }
            ReferenceSpec::Table { t, q, qdot, qddot } => {
                if t.is_empty() || q.len() != t.len() || qdot.len() != t.len() || qddot.len() != t.len() {
                    return Err("reference table columns must be non-empty and of equal length".into());
                }
                if t.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("reference table times must be strictly increasing".into());
                }
            }
        }
        Ok(())
    }

    /// Multiplies every angle-valued entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64; 2]| [v[0] * factor, v[1] * factor];
        match self {
            ReferenceSpec::Sinusoid { offset, amplitude, omega } => {
                ReferenceSpec::Sinusoid { offset: s(offset), amplitude: s(amplitude), omega: *omega }
            }
            ReferenceSpec::Table { t, q, qdot, qddot } => ReferenceSpec::Table {
                t: t.clone(),
                q: q.iter().map(s).collect(),
                qdot: qdot.iter().map(s).collect(),
                qddot: qddot.iter().map(s).collect(),
            },
        }
    }

    /// Norm bounds `(phi_qd, phi_qdotd, phi_qddotd)`, constant in time.
    pub fn norm_envelopes(&self) -> (Envelope, Envelope, Envelope) {
        let n = |v: &[f64; 2]| Vec2::new(v[0], v[1]).norm();
        match self {
            ReferenceSpec::Sinusoid { offset, amplitude, omega } => {
                let a = n(amplitude);
                (
                    Envelope::constant(n(offset) + a),
                    Envelope::constant(a * omega.abs()),
                    Envelope::constant(a * omega * omega),
                )
            }
            ReferenceSpec::Table { q, qdot, qddot, .. } => {
                // Linear interpolation stays inside the convex hull of the samples.
                let max = |c: &Vec<[f64; 2]>| c.iter().map(n).fold(0.0, f64::max);
                (Envelope::constant(max(q)), Envelope::constant(max(qdot)), Envelope::constant(max(qddot)))
            }
        }
    }
}

pub fn reference_eval(spec: &ReferenceSpec, t: f64) -> ReferenceSample {
    match spec {
        ReferenceSpec::Sinusoid { offset, amplitude, omega } => {
            let (s, c) = (omega * t).sin_cos();
            let a = Vec2::new(amplitude[0], amplitude[1]);
            ReferenceSample {
                q: Vec2::new(offset[0], offset[1]) + a * s,
                qdot: a * (omega * c),
                qddot: -a * (omega * omega * s),
            }
        }
        ReferenceSpec::Table { t: ts, q, qdot, qddot } => {
            let v = |c: &[f64; 2]| Vec2::new(c[0], c[1]);
            let i = ts.partition_point(|&x| x <= t);
            if i == 0 {
                return ReferenceSample { q: v(&q[0]), qdot: v(&qdot[0]), qddot: v(&qddot[0]) };
            }
            if i == ts.len() {
                let j = ts.len() - 1;
                return ReferenceSample { q: v(&q[j]), qdot: v(&qdot[j]), qddot: v(&qddot[j]) };
            }
            let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
            let lerp = |c: &Vec<[f64; 2]>| v(&c[i - 1]) * (1.0 - w) + v(&c[i]) * w;
            ReferenceSample { q: lerp(q), qdot: lerp(qdot), qddot: lerp(qddot) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSpec {
    #[default]
    None,
    /// `d_i(t) = amplitude_i sin(omega t + phase_i)`.
    Sinusoid {
        amplitude: [f64; 2],
        omega: f64,
        #[serde(default)]
        phase: [f64; 2],
    },
    Constant { value: [f64; 2] },
}

impl DisturbanceSpec {
    pub fn eval(&self, t: f64) -> Vec2 {
        match self {
            DisturbanceSpec::None => Vec2::zeros(),
            DisturbanceSpec::Sinusoid { amplitude, omega, phase } => Vec2::new(
                amplitude[0] * (omega * t + phase[0]).sin(),
                amplitude[1] * (omega * t + phase[1]).sin(),
            ),
            DisturbanceSpec::Constant { value } => Vec2::new(value[0], value[1]),
        }
    }

    /// An upper bound on `sup_t |d(t)|`.
    pub fn bound(&self) -> f64 {
        match self {
            DisturbanceSpec::None => 0.0,
            DisturbanceSpec::Sinusoid { amplitude, .. } => Vec2::new(amplitude[0], amplitude[1]).norm(),
            DisturbanceSpec::Constant { value } => Vec2::new(value[0], value[1]).norm(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, DisturbanceSpec::None)
    }
}

/// A fully resolved run description in SI units.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub plant: Helicopter,
    pub bounds: BoundConstants,
    pub gains: ControllerGains,
    pub theta_hat0: ParamVec,
    pub env: EnvelopeSet,
    pub reference: ReferenceSpec,
    pub disturbance: DisturbanceSpec,
    pub initial: ElState,
    pub dt: f64,
    /// RK4 steps per control step.
    pub substeps: usize,
    pub horizon: f64,
    pub log_every: usize,
    pub seed: u64,
    /// Standard deviation of additive noise on measured `q` and `qdot`.
    pub noise_std: f64,
    /// Hold the control and the adaptation rate over each control step.
    pub zoh: bool,
    /// Grid used for the pre-run envelope checks.
    pub check_grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Precondition(String),
    #[error("initial state outside the safe set: |{what}(0)| = {value} {relation} {bound_name}(0) = {bound}")]
    InitialCondition { what: &'static str, value: f64, relation: &'static str, bound_name: &'static str, bound: f64 },
    #[error("reference not dominated by {name} at t = {t}: {value} > {bound}")]
    ReferenceNotDominated { name: &'static str, t: f64, value: f64, bound: f64 },
    #[error(transparent)]
    Envelope(#[from] EnvelopeSetViolation),
    #[error("t = {t}: {source}")]
    Barrier { t: f64, source: ControllerError },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Step-size rules, reference domination and the initial-state condition.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Precondition(m));
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return bad(format!("dt = {} must lie in (0, 1e-2]", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon = {} must be positive", self.horizon));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad(format!("horizon / dt = {ratio} is not an integer"));
        }
        if self.substeps == 0 || self.log_every == 0 {
            return bad("substeps and log_every must be at least 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std = {} must be nonnegative", self.noise_std));
        }
        self.reference.validate().map_err(SimError::Precondition)?;
        if self.disturbance.bound() > self.bounds.d_bar + 1e-12 && !self.disturbance.is_none() {
            return bad(format!(
                "disturbance bound {} exceeds dBar = {}",
                self.disturbance.bound(),
                self.bounds.d_bar
            ));
        }
        self.env.check(&self.check_grid)?;
        for t in self.check_grid.iter() {
            let rf = reference_eval(&self.reference, t);
            for (name, value, env) in [
                ("phi_qd", rf.q.norm(), &self.env.phi_qd),
                ("phi_qdotd", rf.qdot.norm(), &self.env.phi_qdotd),
                ("phi_qddotd", rf.qddot.norm(), &self.env.phi_qddotd),
            ] {
                let bound = env.value(t);
                if value > bound * (1.0 + 1e-12) {
                    return Err(SimError::ReferenceNotDominated { name, t, value, bound });
                }
            }
        }
        let rf = reference_eval(&self.reference, 0.0);
        let e0 = (self.initial.q - rf.q).norm();
        let phi_e0 = self.env.phi_e.value(0.0);
        if e0 > phi_e0 {
            return Err(SimError::InitialCondition {
                what: "e",
                value: e0,
                relation: ">",
                bound_name: "phi_e",
                bound: phi_e0,
            });
        }
        let r0 = ((self.initial.qdot - rf.qdot) + self.gains.alpha * (self.initial.q - rf.q)).norm();
        let phi_r0 = self.env.phi_r.value(0.0);
        if !(r0 < phi_r0) {
            return Err(SimError::InitialCondition {
                what: "r",
                value: r0,
                relation: ">=",
                bound_name: "phi_r",
                bound: phi_r0,
            });
        }
        Ok(())
    }
}

/// The four constraint margins; positive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins {
    pub e: f64,
    pub edot: f64,
    pub r: f64,
    pub tau: f64,
}

impl Margins {
    /// Strict for the state-type constraints, non-strict (with [`INPUT_TOL`]) for the input.
    pub fn violations(&self) -> [bool; 4] {
        [!(self.e > 0.0), !(self.edot > 0.0), !(self.r > 0.0), !(self.tau >= -INPUT_TOL)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeValues {
    pub phi_e: f64,
    pub phi_edot: f64,
    pub phi_r: f64,
    pub phi_tau: f64,
}

impl EnvelopeValues {
    pub fn at(env: &EnvelopeSet, t: f64) -> Self {
        Self {
            phi_e: env.phi_e.value(t),
            phi_edot: env.phi_edot.value(t),
            phi_r: env.phi_r.value(t),
            phi_tau: env.phi_tau.value(t),
        }
    }
}

pub fn monitor(e: &Vec2, edot: &Vec2, r: &Vec2, tau: &Vec2, env: &EnvelopeValues) -> Margins {
    Margins {
        e: env.phi_e - e.norm(),
        edot: env.phi_edot - edot.norm(),
        r: env.phi_r - r.norm(),
        tau: env.phi_tau - tau.norm(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub q: Vec2,
    pub qd: Vec2,
    pub qdot: Vec2,
    pub e: Vec2,
    pub edot: Vec2,
    pub r: Vec2,
    pub theta_hat: ParamVec,
    pub tau: Vec2,
    pub tau_a: Vec2,
    pub dtau_norm: f64,
    pub env: EnvelopeValues,
    pub v_r: f64,
    /// Full Lyapunov value, available because the simulated parameters are known.
    pub v: Option<f64>,
    pub margins: Margins,
    /// Denominator clamp hits during the integration step that ends here.
    pub clamp_hits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ViolationCounts {
    pub e: usize,
    pub edot: usize,
    pub r: usize,
    pub tau: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.e + self.edot + self.r + self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinMargin {
    pub value: f64,
    pub t: f64,
}

impl Default for MinMargin {
    fn default() -> Self {
        Self { value: f64::INFINITY, t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MinMargins {
    pub e: MinMargin,
    pub edot: MinMargin,
    pub r: MinMargin,
    pub tau: MinMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortInfo {
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryReport {
    /// Control steps evaluated (including the initial one).
    pub steps: usize,
    pub dt: f64,
    pub substeps: usize,
    pub horizon: f64,
    pub violations: ViolationCounts,
    pub min_margins: MinMargins,
    pub terminal_error_norm: f64,
    pub max_theta_hat_norm: f64,
    /// Fraction of control steps where the clamp was active.
    pub saturation_duty_cycle: f64,
    /// Denominator clamp hits over all stage evaluations.
    pub anomalies: u64,
    /// Largest one-step increase of the Lyapunov value.
    pub max_lyapunov_increase: Option<f64>,
    pub aborted: Option<AbortInfo>,
}

impl SummaryReport {
    pub fn is_clean(&self) -> bool {
        self.violations.total() == 0 && self.anomalies == 0 && self.aborted.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trajectory: Vec<TrajectoryRecord>,
    pub summary: SummaryReport,
}

/// Plant, controller and exogenous signals bound together.
pub struct Simulator<'a> {
    pub cfg: &'a SimConfig,
    pub controller: TvblfController,
    clamp_hits: Cell<u32>,
    cache: Cell<Option<(f64, EnvelopeSample)>>,
}

fn split(x: &LoopState) -> (ElState, ParamVec) {
    (
        ElState::new(Vec2::new(x[0], x[1]), Vec2::new(x[2], x[3])),
        x.fixed_rows::<6>(4).into_owned(),
    )
}

fn join(s: &ElState, theta_hat: &ParamVec) -> LoopState {
    let mut x = LoopState::zeros();
    x.fixed_rows_mut::<2>(0).copy_from(&s.q);
    x.fixed_rows_mut::<2>(2).copy_from(&s.qdot);
    x.fixed_rows_mut::<6>(4).copy_from(theta_hat);
    x
}

/// Measurement noise held over one control step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Noise {
    pub q: Vec2,
    pub qdot: Vec2,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a SimConfig) -> Self {
        let controller = TvblfController::new(cfg.gains.clone(), cfg.bounds.km2, cfg.env.phi_r.value(0.0));
        Self { cfg, controller, clamp_hits: Cell::new(0), cache: Cell::new(None) }
    }

    pub fn initial_state(&self) -> LoopState {
        join(&self.cfg.initial, &self.cfg.theta_hat0)
    }

    fn envelope_sample(&self, t: f64) -> Result<EnvelopeSample, SimError> {
        if let Some((tc, s)) = self.cache.get() {
            if tc == t {
                return Ok(s);
            }
        }
        let env = &self.cfg.env;
        let phi_r_dot = env
            .phi_r
            .derivative(t)
            .map_err(|e| SimError::Precondition(e.to_string()))?;
        let s = EnvelopeSample { phi_r: env.phi_r.value(t), phi_r_dot, phi_tau: env.phi_tau.value(t) };
        self.cache.set(Some((t, s)));
        Ok(s)
    }

    /// Evaluates the law at `(t, x)` from the measured state.
    pub fn control(&self, t: f64, x: &LoopState, noise: &Noise) -> Result<ControlOutput, SimError> {
        let (s, theta_hat) = split(x);
        let measured = ElState::new(s.q + noise.q, s.qdot + noise.qdot);
        let reference = reference_eval(&self.cfg.reference, t);
        let env = self.envelope_sample(t)?;
        let out = self
            .controller
            .evaluate(&self.cfg.plant, &measured, &reference, &env, &theta_hat)
            .map_err(|source| SimError::Barrier { t, source })?;
        if out.denominator_clamped {
            self.clamp_hits.set(self.clamp_hits.get() + 1);
        }
        Ok(out)
    }

    fn field(&self, t: f64, x: &LoopState, tau: &Vec2, theta_hat_dot: &ParamVec) -> Result<LoopState, SimError> {
        let (s, _) = split(x);
        let d = self.cfg.disturbance.eval(t);
        let qddot = self.cfg.plant.forward_dynamics(&s, tau, &d);
        let dx = join(&ElState::new(s.qdot, qddot), theta_hat_dot);
        if dx.iter().all(|v| v.is_finite()) {
            Ok(dx)
        } else {
            Err(SimError::NonFinite { t })
        }
    }

    /// Coupled vector field `(qdot, qddot, theta_hat_dot)` with the law
    /// evaluated at the current state.
    pub fn closed_loop_rhs(&self, t: f64, x: &LoopState, noise: &Noise) -> Result<(LoopState, ControlOutput), SimError> {
        let out = self.control(t, x, noise)?;
        Ok((self.field(t, x, &out.tau, &out.theta_hat_dot)?, out))
    }

    /// Advances one control step of length `dt` using `substeps` RK4 steps.
    /// `held` carries the control of a zero-order-hold step.
    pub fn integrate_step(
        &self,
        x: &LoopState,
        t: f64,
        dt: f64,
        noise: &Noise,
        held: Option<&ControlOutput>,
    ) -> Result<LoopState, SimError> {
        let h = dt / self.cfg.substeps as f64;
        let mut x = *x;
        for i in 0..self.cfg.substeps {
            let ti = t + i as f64 * h;
            x = match held {
                Some(out) => rk4_step(&mut |s, y: &LoopState| self.field(s, y, &out.tau, &out.theta_hat_dot), ti, &x, h)?,
                None => rk4_step(&mut |s, y: &LoopState| self.closed_loop_rhs(s, y, noise).map(|r| r.0), ti, &x, h)?,
            };
        }
        Ok(x)
    }

    fn record(&self, t: f64, x: &LoopState, out: &ControlOutput) -> TrajectoryRecord {
        let (s, theta_hat) = split(x);
        let cfg = self.cfg;
        let reference = reference_eval(&cfg.reference, t);
        // Monitor the true state even when the law sees a noisy one.
        let e = s.q - reference.q;
        let edot = s.qdot - reference.qdot;
        let r = edot + cfg.gains.alpha * e;
        let env = EnvelopeValues::at(&cfg.env, t);
        let m = cfg.plant.mass_matrix(&s.q);
        let km2 = cfg.bounds.km2;
        let v_r = blf_value(&r, &m, env.phi_r, km2).unwrap_or(f64::NAN);
        let tilde = cfg.plant.theta() - theta_hat;
        let v = lyapunov_value(&r, &m, env.phi_r, km2, &tilde, &cfg.gains.gamma).ok();
        TrajectoryRecord {
            t,
            q: s.q,
            qd: reference.q,
            qdot: s.qdot,
            e,
            edot,
            r,
            theta_hat,
            tau: out.tau,
            tau_a: out.tau_a,
            dtau_norm: out.saturation_error().norm(),
            env,
            v_r,
            v,
            margins: monitor(&e, &edot, &r, &out.tau, &env),
            clamp_hits: self.clamp_hits.replace(0),
        }
    }
}

/// Runs the configured experiment. Precondition failures are errors; a
/// barrier hit during the run ends it early and is reported in the summary.
pub fn run(cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    cfg.validate()?;
    let sim = Simulator::new(cfg);
    let n = cfg.steps();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.noise_std).map_err(|e| SimError::Precondition(e.to_string()))?;
    let draw = |rng: &mut StdRng| {
        if cfg.noise_std > 0.0 {
            Noise {
                q: Vec2::new(normal.sample(rng), normal.sample(rng)),
                qdot: Vec2::new(normal.sample(rng), normal.sample(rng)),
            }
        } else {
            Noise::default()
        }
    };

    let mut summary = SummaryReport {
        steps: 0,
        dt: cfg.dt,
        substeps: cfg.substeps,
        horizon: cfg.horizon,
        violations: ViolationCounts::default(),
        min_margins: MinMargins::default(),
        terminal_error_norm: f64::NAN,
        max_theta_hat_norm: 0.0,
        saturation_duty_cycle: 0.0,
        anomalies: 0,
        max_lyapunov_increase: None,
        aborted: None,
    };
    let mut trajectory = Vec::with_capacity(n / cfg.log_every + 2);
    let mut saturated = 0usize;
    let mut last_v: Option<f64> = None;
    let mut x = sim.initial_state();
    let mut last_logged = None;

    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        let noise = draw(&mut rng);
        let out = match sim.control(t, &x, &noise) {
            Ok(out) => out,
            Err(err) => {
                summary.aborted = Some(AbortInfo { t, reason: err.to_string() });
                break;
            }
        };
        let rec = sim.record(t, &x, &out);
        summary.steps += 1;
        summary.anomalies += rec.clamp_hits as u64;
        tally(&mut summary, &rec);
        if rec.dtau_norm > 0.0 {
            saturated += 1;
        }
        if let (Some(prev), Some(v)) = (last_v, rec.v) {
            let inc = v - prev;
            summary.max_lyapunov_increase = Some(summary.max_lyapunov_increase.map_or(inc, |m: f64| m.max(inc)));
        }
        last_v = rec.v;
        summary.terminal_error_norm = rec.e.norm();
        if k % cfg.log_every == 0 || k == n {
            last_logged = Some(k);
            trajectory.push(rec.clone());
        }
        if k == n {
            break;
        }
        let held = cfg.zoh.then_some(&out);
        match sim.integrate_step(&x, t, cfg.dt, &noise, held) {
            Ok(next) => x = next,
            Err(err) => {
                let at = match &err {
                    SimError::Barrier { t, .. } | SimError::NonFinite { t } => *t,
                    _ => t,
                };
                summary.aborted = Some(AbortInfo { t: at, reason: err.to_string() });
                // Keep the last evaluated step in the partial trajectory.
                if last_logged != Some(k) {
                    trajectory.push(rec);
                }
                break;
            }
        }
    }
    summary.anomalies += sim.clamp_hits.get() as u64;
    // An aborted run left the barrier interior.
    if summary.aborted.is_some() && summary.violations.total() == 0 {
        summary.violations.r += 1;
    }
    summary.saturation_duty_cycle = if summary.steps > 0 { saturated as f64 / summary.steps as f64 } else { 0.0 };
    Ok(SimOutcome { trajectory, summary })
}

fn tally(summary: &mut SummaryReport, rec: &TrajectoryRecord) {
    let m = &rec.margins;
    let [ve, ved, vr, vt] = m.violations();
    let c = &mut summary.violations;
    c.e += ve as usize;
    c.edot += ved as usize;
    c.r += vr as usize;
    c.tau += vt as usize;
    let mm = &mut summary.min_margins;
    for (slot, value) in [(&mut mm.e, m.e), (&mut mm.edot, m.edot), (&mut mm.r, m.r), (&mut mm.tau, m.tau)] {
        if value < slot.value {
            *slot = MinMargin { value, t: rec.t };
        }
    }
    summary.max_theta_hat_norm = summary.max_theta_hat_norm.max(rec.theta_hat.norm());
}

pub const CSV_HEADER: &str = "t,q1,q2,qd1,qd2,qdot1,qdot2,e_norm,edot_norm,r_norm,phi_e,phi_edot,phi_r,\
tau1,tau2,tau_norm,phi_tau,dtau_norm,thetaHat_norm,V_r,margin_e,margin_edot,margin_r,margin_tau";

/// Writes the trajectory with 17 significant digits per value.
pub fn write_csv<W: Write>(w: W, records: &[TrajectoryRecord]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER.split(','))?;
    for r in records {
        let row = [
            r.t,
            r.q[0],
            r.q[1],
            r.qd[0],
            r.qd[1],
            r.qdot[0],
            r.qdot[1],
            r.e.norm(),
            r.edot.norm(),
            r.r.norm(),
            r.env.phi_e,
            r.env.phi_edot,
            r.env.phi_r,
            r.tau[0],
            r.tau[1],
            r.tau.norm(),
            r.env.phi_tau,
            r.dtau_norm,
            r.theta_hat.norm(),
            r.v_r,
            r.margins.e,
            r.margins.edot,
            r.margins.r,
            r.margins.tau,
        ];
        out.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    out.flush()?;
    Ok(())
}
