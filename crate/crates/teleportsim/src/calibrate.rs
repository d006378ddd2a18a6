//! Frequency-jitter calibration against a target unwindowed contrast.

use std::fmt;

use serde::{Deserialize, Serialize};
use teleport_core::photonics::ContrastModel;

/// Large enough that only the zero-lag bin of the model keeps coherence.
const SIGMA_CEILING: f64 = 1e15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_contrast: f64,
    pub sigma_omega_rad_s: f64,
    /// Contrast of the quadrature model at the calibrated jitter.
    pub model_contrast: f64,
    /// Final bisection bracket on σ_ω.
    pub bracket_rad_s: (f64, f64),
    pub iterations: u32,
    /// Monte Carlo check, filled in by the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub contrast: f64,
    pub stderr: f64,
    pub n_psi_minus: u64,
    pub n_ni: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CalibrationError {
    /// The target lies outside [0, 1].
    OutOfRange(f64),
    /// The envelopes cannot produce the target; contrasts in
    /// `(floor, max]` are reachable.
    Unreachable { target: f64, floor: f64, max: f64 },
}

impl fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationError::OutOfRange(t) => write!(f, "target contrast {t} is outside [0, 1]"),
            CalibrationError::Unreachable { target, floor, max } => write!(
                f,
                "target contrast {target} is unreachable: sigma_omega = 0 gives {max:.6}, \
                 sigma_omega -> inf approaches {floor:.6}; reachable range is ({floor:.6}, {max:.6}]"
            ),
        }
    }
}

impl std::error::Error for CalibrationError {}

/// Bisects σ_ω so that the modeled unwindowed contrast equals `target`.
/// The model contrast falls monotonically with σ_ω.
pub fn calibrate(model: &ContrastModel, target: f64) -> Result<Calibration, CalibrationError> {
    if !(0.0..=1.0).contains(&target) {
        return Err(CalibrationError::OutOfRange(target));
    }
    let c = |s: f64| model.contrast(s, f64::INFINITY).unwrap_or(0.0);
    let max = model.max_contrast();
    let floor = c(SIGMA_CEILING);
    let done = |sigma: f64, bracket, iterations| Calibration {
        target_contrast: target,
        sigma_omega_rad_s: sigma,
        model_contrast: c(sigma),
        bracket_rad_s: bracket,
        iterations,
        mc: None,
    };
    if target > max + 1e-12 || target <= floor {
        return Err(CalibrationError::Unreachable { target, floor, max });
    }
    if target >= max - 1e-12 {
        return Ok(done(0.0, (0.0, 0.0), 0));
    }
    let mut hi = 1e6;
    while c(hi) > target {
        hi *= 2.0;
        if hi > SIGMA_CEILING {
            return Err(CalibrationError::Unreachable { target, floor, max });
        }
    }
    let mut lo = 0.0;
    let mut iterations = 0;
    while hi - lo > 1e-9 * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if c(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(done(0.5 * (lo + hi), (lo, hi), iterations))
}
