//! Monte Carlo campaigns for two-node atom teleportation with a
//! time-resolved photonic Bell-state measurement, and the reductions that
//! turn them into fidelity, contrast and tomography reports.

pub mod calibrate;
pub mod campaign;
pub mod config;
pub mod eventlog;
pub mod metadata;
pub mod reports;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use teleport_core::photonics::ContrastModel;

use crate::calibrate::{Calibration, CalibrationError};
use crate::campaign::{run_campaign, CampaignResult, Setup};
use crate::config::{ExperimentConfig, LoadError};
use crate::eventlog::EventRecord;
use crate::metadata::Metadata;
use crate::reports::Reports;

pub const GIT_DESCRIBE: &str = env!("TELEPORTSIM_GIT_DESCRIBE");
pub const THREADS_ENV: &str = "TELEPORTSIM_THREADS";

/// Failures mapped to the CLI's exit codes.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Unreachable(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 3,
            AppError::Unreachable(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        AppError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<LoadError> for AppError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(p, err) => AppError::io(&p, err),
            LoadError::Config(c) => AppError::Config(c.to_string()),
        }
    }
}

impl From<CalibrationError> for AppError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::OutOfRange(_) => AppError::Config(e.to_string()),
            CalibrationError::Unreachable { .. } => AppError::Unreachable(e.to_string()),
        }
    }
}

/// Worker cap from `TELEPORTSIM_THREADS`.
pub fn threads_from_env() -> Result<Option<usize>, AppError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(AppError::Config(format!("{THREADS_ENV}: `{v}` is not a positive integer"))),
        },
    }
}

/// Where the frequency jitter of a run came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedSigma {
    pub sigma_omega: f64,
    pub source: String,
    pub calibration: Option<Calibration>,
}

pub fn contrast_model(cfg: &ExperimentConfig) -> Result<ContrastModel, AppError> {
    let (a, c) = cfg.envelopes()?;
    Ok(ContrastModel::default_for(&a, &c))
}

/// Explicit `noise.sigma_omega`, else a calibration file, else calibration
/// against `calibration.target_contrast`, else zero.
pub fn resolve_sigma(cfg: &ExperimentConfig) -> Result<ResolvedSigma, AppError> {
    if let Some(s) = cfg.noise.sigma_omega {
        return Ok(ResolvedSigma { sigma_omega: s, source: "config".into(), calibration: None });
    }
    if let Some(file) = &cfg.calibration.file {
        let path = cfg.resolve_path(file);
        let text = fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
        let cal: Calibration = serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("calibration.file: {}: {e}", path.display())))?;
        if !(cal.sigma_omega_rad_s >= 0.0 && cal.sigma_omega_rad_s.is_finite()) {
            return Err(AppError::Config(format!("calibration.file: {}: invalid sigma_omega_rad_s", path.display())));
        }
        return Ok(ResolvedSigma {
            sigma_omega: cal.sigma_omega_rad_s,
            source: format!("calibration file {}", path.display()),
            calibration: Some(cal),
        });
    }
    if let Some(target) = cfg.calibration.target_contrast {
        let cal = calibrate::calibrate(&contrast_model(cfg)?, target)?;
        return Ok(ResolvedSigma {
            sigma_omega: cal.sigma_omega_rad_s,
            source: format!("calibrated to contrast {target}"),
            calibration: Some(cal),
        });
    }
    Ok(ResolvedSigma { sigma_omega: 0.0, source: "default".into(), calibration: None })
}

pub struct Simulation {
    pub campaign: CampaignResult,
    pub events: Vec<EventRecord>,
    pub reports: Reports,
    pub metadata: Metadata,
}

/// Runs a campaign and reduces it.
pub fn simulate(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Simulation, AppError> {
    let start = Instant::now();
    let sigma = resolve_sigma(cfg)?;
    let setup = Setup::from_config(cfg, sigma.sigma_omega)?;
    let t0 = Instant::now();
    let campaign = run_campaign(&setup, threads);
    let campaign_s = t0.elapsed().as_secs_f64();
    let events = campaign.events();
    let t1 = Instant::now();
    let reports = reports::compute(&events, &cfg.windows(), cfg.bin_width_ns * 1e-9);
    let reports_s = t1.elapsed().as_secs_f64();
    let metadata =
        Metadata::for_simulation(cfg, &sigma, &setup, &campaign.tallies, threads, campaign_s, reports_s, start);
    Ok(Simulation { campaign, events, reports, metadata })
}

pub fn read_log_file(path: &Path) -> Result<Vec<EventRecord>, AppError> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    eventlog::read_log(BufReader::new(file)).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

/// Reduces an existing log with the windows and bin width of `cfg`.
pub fn analyze(cfg: &ExperimentConfig, log: &Path) -> Result<(Reports, Metadata), AppError> {
    let start = Instant::now();
    let events = read_log_file(log)?;
    let reports = reports::compute(&events, &cfg.windows(), cfg.bin_width_ns * 1e-9);
    Ok((reports, Metadata::for_analysis(cfg, log, events.len(), start)))
}

pub fn create_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<(), AppError> {
    let file = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    eventlog::write_log(events, BufWriter::new(file)).map_err(|e| AppError::io(path, e))
}

pub fn write_reports(dir: &Path, reports: &Reports) -> Result<(), AppError> {
    reports.write(dir).map_err(|e| AppError::io(dir, e))
}

/// Writes the event log, every report and `metadata.json` into `dir`.
pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<Vec<PathBuf>, AppError> {
    create_dir(dir)?;
    write_events(&dir.join("events.jsonl"), &sim.events)?;
    write_reports(dir, &sim.reports)?;
    write_json(&dir.join("metadata.json"), &sim.metadata)?;
    let mut files = vec![dir.join("events.jsonl")];
    files.extend(reports::FILES.iter().map(|f| dir.join(f)));
    files.push(dir.join("metadata.json"));
    Ok(files)
}
