//! `metadata.json`: provenance, jitter calibration, tallies, timings and
//! lab-time rate bookkeeping.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use teleport_core::protocol::success_probability;
use teleport_core::stats;

use crate::calibrate::Calibration;
use crate::campaign::{Setup, Tallies};
use crate::config::ExperimentConfig;
use crate::{ResolvedSigma, GIT_DESCRIBE};

#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub git_describe: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_log: Option<String>,
    pub events: u64,
    pub windows_ns: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_omega_rad_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_omega_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tallies: Option<Tallies>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Rates>,
    pub timings_s: Timings,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseInfo {
    pub p_a: f64,
    pub p_ent: f64,
    pub f_a: f64,
    pub f_ent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Rates {
    pub xi_a: f64,
    pub xi_b: f64,
    pub storage_efficiency: f64,
    /// `¼ ξ_A ξ_B` times the storage efficiency.
    pub success_probability: f64,
    pub coincidence_probability: f64,
    /// Heralded `Ψ⁻` trials over attempts in this campaign.
    pub mc_psi_minus_fraction: f64,
    pub mc_psi_minus_stderr: f64,
    pub losses_simulated: bool,
    pub repetition_rate_hz: f64,
    pub duty_cycle: f64,
    /// While both atoms are trapped.
    pub seconds_per_event_trapped: f64,
    /// Averaged over all lab time.
    pub seconds_per_event_lab: f64,
    pub events_per_lab_second: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub campaign: Option<f64>,
    pub reports: f64,
    pub total: f64,
}

fn base(command: &'static str, windows_ns: &[f64]) -> Metadata {
    Metadata {
        tool: "teleportsim",
        version: env!("CARGO_PKG_VERSION"),
        git_describe: GIT_DESCRIBE,
        command,
        seed: None,
        trials: None,
        threads: None,
        event_log: None,
        events: 0,
        windows_ns: windows_ns.to_vec(),
        noise: None,
        sigma_omega_rad_s: None,
        sigma_omega_source: None,
        calibration: None,
        tallies: None,
        rates: None,
        timings_s: Timings { campaign: None, reports: 0.0, total: 0.0 },
    }
}

impl Metadata {
    #[allow(clippy::too_many_arguments)]
    pub fn for_simulation(
        cfg: &ExperimentConfig,
        sigma: &ResolvedSigma,
        setup: &Setup,
        tallies: &Tallies,
        threads: Option<usize>,
        campaign_s: f64,
        reports_s: f64,
        start: Instant,
    ) -> Self {
        let p = success_probability(&setup.sender, &setup.receiver);
        let success = p.success * setup.storage_efficiency;
        let per_trapped = cfg.lab.repetition_rate_hz * success;
        let frac = tallies.psi_minus as f64 / tallies.attempts as f64;
        let noise = setup.noise;
        Metadata {
            seed: Some(cfg.seed),
            trials: Some(cfg.trials),
            threads,
            events: tallies.two_click,
            noise: Some(NoiseInfo { p_a: noise.p_a, p_ent: noise.p_ent, f_a: noise.f_a(), f_ent: noise.f_ent() }),
            sigma_omega_rad_s: Some(sigma.sigma_omega),
            sigma_omega_source: Some(sigma.source.clone()),
            calibration: sigma.calibration.clone(),
            tallies: Some(*tallies),
            rates: Some(Rates {
                xi_a: setup.sender.xi(),
                xi_b: setup.receiver.xi(),
                storage_efficiency: setup.storage_efficiency,
                success_probability: success,
                coincidence_probability: p.coincidence * setup.storage_efficiency,
                mc_psi_minus_fraction: frac,
                mc_psi_minus_stderr: stats::binomial_stderr(frac, tallies.attempts).map_or(0.0, |e| e.value),
                losses_simulated: setup.losses,
                repetition_rate_hz: cfg.lab.repetition_rate_hz,
                duty_cycle: cfg.lab.duty_cycle,
                seconds_per_event_trapped: 1.0 / per_trapped,
                seconds_per_event_lab: 1.0 / (per_trapped * cfg.lab.duty_cycle),
                events_per_lab_second: per_trapped * cfg.lab.duty_cycle,
            }),
            timings_s: Timings { campaign: Some(campaign_s), reports: reports_s, total: start.elapsed().as_secs_f64() },
            ..base("simulate", &cfg.windows_ns)
        }
    }

    pub fn for_analysis(cfg: &ExperimentConfig, log: &Path, events: usize, start: Instant) -> Self {
        let total = start.elapsed().as_secs_f64();
        Metadata {
            event_log: Some(log.display().to_string()),
            events: events as u64,
            timings_s: Timings { campaign: None, reports: total, total },
            ..base("analyze", &cfg.windows_ns)
        }
    }
}
