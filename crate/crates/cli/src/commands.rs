use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use tvblf_core::config::AngleUnits;
use tvblf_core::envelopes::{EnvelopeError, PpfEnvelope};
use tvblf_core::feasibility::{check_feasibility, write_margins_csv, FeasibilityReport};
use tvblf_core::sim::{run, write_csv, SimError, SummaryReport};
use tvblf_core::{ConfigError, ExperimentConfig};

use crate::manifest::{sha256_hex, CertificateVerdict, RunManifest};
use crate::{CheckArgs, EnvelopeArgs, SimulateArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Violations,
    Uncertified,
    Error,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Clean => 0,
            Outcome::Error => 1,
            Outcome::Violations => 2,
            Outcome::Uncertified => 3,
        }
    }

    fn severity(self) -> u8 {
        match self {
            Outcome::Clean => 0,
            Outcome::Uncertified => 1,
            Outcome::Violations => 2,
            Outcome::Error => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn verdict(rep: &FeasibilityReport) -> CertificateVerdict {
    CertificateVerdict {
        feasible: rep.feasible,
        worst_margin: rep.worst_margin,
        worst_time: rep.worst_time,
        failure_detail: rep.failure_detail.clone(),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulationReport<'a> {
    config: String,
    certificate: &'a CertificateVerdict,
    forced: bool,
    summary: &'a SummaryReport,
}

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<Outcome, CliError> {
    if !a.config.is_dir() {
        return simulate_one(&a.config, &a.out, a, argv);
    }
    let mut configs: Vec<PathBuf> = fs::read_dir(&a.config)
        .map_err(io_err(&a.config))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(CliError::Invalid(format!("no *.json configs in {}", a.config.display())));
    }
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(Outcome::Clean);
    std::thread::scope(|s| {
        for _ in 0..a.jobs.max(1).min(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = configs.get(i) else { break };
                let stem = path.file_stem().unwrap_or_default();
                let outcome = simulate_one(path, &a.out.join(stem), a, argv).unwrap_or_else(|e| {
                    eprintln!("error: {}: {e}", path.display());
                    Outcome::Error
                });
                let mut w = worst.lock().unwrap();
                if outcome.severity() > w.severity() {
                    *w = outcome;
                }
            });
        }
    });
    Ok(worst.into_inner().unwrap())
}

fn simulate_one(path: &Path, out: &Path, a: &SimulateArgs, argv: &[String]) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let text = fs::read(path).map_err(io_err(path))?;
    let mut cfg = ExperimentConfig::from_json_str(&String::from_utf8_lossy(&text))?;
    if let Some(dt) = a.dt {
        cfg.sim.dt = dt;
    }
    if let Some(h) = a.horizon {
        cfg.sim.horizon = h;
    }
    if let Some(n) = a.substeps {
        cfg.sim.substeps = n;
    }
    let cert = verdict(&check_feasibility(&cfg.feasibility_inputs()?));
    let sim_cfg = cfg.sim_config()?;
    sim_cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let mut manifest = RunManifest {
        config_path: path.display().to_string(),
        config_sha256: sha256_hex(&text),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: argv.to_vec(),
        outputs: Vec::new(),
        wall_clock_seconds: 0.0,
        certificate: cert.clone(),
        forced: a.force,
        exit_code: 0,
    };
    if !cert.feasible && !a.force {
        eprintln!(
            "refusing to simulate {}: feasibility certificate fails ({}); pass --force to run anyway",
            path.display(),
            cert.failure_detail.as_deref().unwrap_or("no detail")
        );
        manifest.exit_code = Outcome::Uncertified.code();
        manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
        manifest.write(out).map_err(io_err(out))?;
        return Ok(Outcome::Uncertified);
    }

    log::info!("simulating {} for {} s", path.display(), sim_cfg.horizon);
    let result = run(&sim_cfg)?;
    let summary = &result.summary;

    let csv_path = out.join("trajectory.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(std::io::BufWriter::new(file), &result.trajectory)?;
    let summary_path = out.join("summary.json");
    let report = SimulationReport {
        config: path.display().to_string(),
        certificate: &cert,
        forced: a.force,
        summary,
    };
    write_json(&summary_path, &report)?;

    let outcome = if summary.is_clean() { Outcome::Clean } else { Outcome::Violations };
    if let Some(abort) = &summary.aborted {
        eprintln!("{}: run aborted at t = {}: {}", path.display(), abort.t, abort.reason);
    }
    if outcome == Outcome::Violations {
        let v = &summary.violations;
        eprintln!(
            "{}: violations e={} edot={} r={} tau={}, anomalies={}",
            path.display(),
            v.e,
            v.edot,
            v.r,
            v.tau,
            summary.anomalies
        );
    }
    manifest.outputs = vec![csv_path.display().to_string(), summary_path.display().to_string()];
    manifest.exit_code = outcome.code();
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(out).map_err(io_err(out))?;
    println!("{}", serde_json::to_string(&report).map_err(|e| CliError::Invalid(e.to_string()))?);
    Ok(outcome)
}

fn margin_series(rep: &FeasibilityReport, dir: Option<&Path>, name: &str) -> Result<Option<String>, CliError> {
    let Some(dir) = dir else { return Ok(None) };
    if rep.margins.is_empty() {
        return Ok(None);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_margins_csv(std::io::BufWriter::new(file), &rep.margins)?;
    Ok(Some(path.display().to_string()))
}

pub fn check(a: &CheckArgs) -> Result<Outcome, CliError> {
    let mut cfg = ExperimentConfig::from_path(&a.config)?;
    if let Some(h) = a.grid_step {
        cfg.envelopes.grid_step = h;
    }
    let start = Instant::now();
    let rep = check_feasibility(&cfg.feasibility_inputs()?);
    log::info!("certificate evaluated in {:.3} s", start.elapsed().as_secs_f64());
    let mut value = serde_json::to_value(&rep).map_err(|e| CliError::Invalid(e.to_string()))?;
    value["units"] = json!("rad");
    value["marginSeries"] = json!(margin_series(&rep, a.out.as_deref(), "margins.csv")?);
    if cfg.units == AngleUnits::Deg {
        // Same check with the degree values taken literally, for comparison.
        let raw = check_feasibility(&cfg.feasibility_inputs_unconverted()?);
        value["unconverted"] = json!({
            "units": "deg",
            "feasible": raw.feasible,
            "alpha": raw.alpha,
            "worstMargin": raw.worst_margin,
            "worstTime": raw.worst_time,
            "failureReason": raw.failure_reason,
            "marginSeries": margin_series(&raw, a.out.as_deref(), "margins_unconverted.csv")?,
        });
    }
    println!("{}", serde_json::to_string_pretty(&value).map_err(|e| CliError::Invalid(e.to_string()))?);
    Ok(if rep.feasible { Outcome::Clean } else { Outcome::Uncertified })
}

pub fn envelope(a: &EnvelopeArgs) -> Result<Outcome, CliError> {
    let p = PpfEnvelope::new(a.phi0, a.phi_inf, a.kappa, a.nu)?;
    let tc = p.convergence_time(a.eps)?;
    if a.points < 2 {
        return Err(CliError::Invalid("--points must be at least 2".into()));
    }
    let horizon = a.horizon.unwrap_or(if tc > 0.0 { 2.0 * tc } else { 1.0 });
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::Invalid(format!("--horizon must be positive, got {horizon}")));
    }
    let table: Vec<_> = (0..a.points)
        .map(|i| {
            let t = horizon * i as f64 / (a.points - 1) as f64;
            json!({ "t": t, "value": p.value(t), "derivative": p.derivative(t).ok() })
        })
        .collect();
    let value = json!({
        "phi0": a.phi0,
        "phiInf": a.phi_inf,
        "kappa": a.kappa,
        "nu": a.nu,
        "eps": a.eps,
        "convergenceTime": tc,
        "table": table,
    });
    println!("{}", serde_json::to_string_pretty(&value).map_err(|e| CliError::Invalid(e.to_string()))?);
    Ok(Outcome::Clean)
}
