//! Bell-state measurement bookkeeping: click-pair classification, the
//! interference contrast `C = 1 − N_ni/N_Ψ⁻` and detection-time-difference
//! filtering.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::photonics::{ClickRecord, Detector};
use crate::qubit::BellLabel;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    PsiMinus,
    PsiPlus,
    NoInterference,
    Unresolved,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::PsiMinus, Outcome::PsiPlus, Outcome::NoInterference, Outcome::Unresolved];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::PsiMinus => "psi_minus",
            Outcome::PsiPlus => "psi_plus",
            Outcome::NoInterference => "no_interference",
            Outcome::Unresolved => "unresolved",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s)
    }

    /// Bell state projected onto, for the two heralding patterns.
    pub fn bell_label(self) -> Option<BellLabel> {
        match self {
            Outcome::PsiMinus => Some(BellLabel::PsiMinus),
            Outcome::PsiPlus => Some(BellLabel::PsiPlus),
            _ => None,
        }
    }
}

/// Classifies an unordered pair of detectors.
///
/// Opposite ports with orthogonal polarizations herald `Ψ⁻`, one port with
/// both polarizations heralds `Ψ⁺`, opposite ports with equal polarization
/// reveal photons that did not interfere, and a repeated detector is
/// unresolved. Same port, same polarization on two different detectors does
/// not exist: each port has one detector per polarization.
pub fn classify_detectors(a: Detector, b: Detector) -> Outcome {
    if a == b {
        return Outcome::Unresolved;
    }
    let same_port = a.port() == b.port();
    let same_pol = a.polarization() == b.polarization();
    match (same_port, same_pol) {
        (false, false) => Outcome::PsiMinus,
        (true, false) => Outcome::PsiPlus,
        (false, true) => Outcome::NoInterference,
        (true, true) => unreachable!("one detector per port and polarization"),
    }
}

pub fn classify(clicks: (ClickRecord, ClickRecord)) -> Outcome {
    classify_detectors(clicks.0.detector, clicks.1.detector)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsmEvent {
    pub clicks: (ClickRecord, ClickRecord),
    pub outcome: Outcome,
    /// `|t1 − t2|` in seconds.
    pub dt: f64,
}

impl BsmEvent {
    pub fn new(first: ClickRecord, second: ClickRecord) -> Self {
        Self { clicks: (first, second), outcome: classify((first, second)), dt: (first.time - second.time).abs() }
    }

    /// Closed window: `dt == tau_max` is kept.
    pub fn within(&self, tau_max: f64) -> bool {
        self.dt <= tau_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastEstimate {
    pub contrast: f64,
    pub n_psi_minus: u64,
    pub n_ni: u64,
    pub stderr: f64,
}

/// Counts `Ψ⁻` and no-interference events with `dt ≤ tau_max`.
pub fn window_counts<'a>(events: impl IntoIterator<Item = &'a BsmEvent>, tau_max: f64) -> (u64, u64) {
    events.into_iter().filter(|e| e.within(tau_max)).fold((0, 0), |(psi, ni), e| match e.outcome {
        Outcome::PsiMinus => (psi + 1, ni),
        Outcome::NoInterference => (psi, ni + 1),
        _ => (psi, ni),
    })
}

/// Contrast from the two counts; `NoEvents` when no `Ψ⁻` remains.
pub fn contrast_from_counts(n_psi_minus: u64, n_ni: u64) -> Result<ContrastEstimate> {
    if n_psi_minus == 0 {
        return Err(Error::NoEvents(Outcome::PsiMinus));
    }
    let (ratio, ratio_err) = stats::count_ratio(n_ni, n_psi_minus);
    Ok(ContrastEstimate { contrast: 1.0 - ratio, n_psi_minus, n_ni, stderr: ratio_err })
}

pub fn contrast<'a>(events: impl IntoIterator<Item = &'a BsmEvent>, tau_max: f64) -> Result<ContrastEstimate> {
    let (psi, ni) = window_counts(events, tau_max);
    contrast_from_counts(psi, ni)
}

/// Fraction of `Ψ⁻` events with `dt ≤ tau_max`; zero when there are none.
pub fn retained_fraction(events: &[BsmEvent], tau_max: f64) -> f64 {
    let (kept, all) = events
        .iter()
        .filter(|e| e.outcome == Outcome::PsiMinus)
        .fold((0u64, 0u64), |(k, a), e| (k + u64::from(e.within(tau_max)), a + 1));
    if all == 0 {
        0.0
    } else {
        kept as f64 / all as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    /// Left-closed `[start, stop)` in seconds.
    pub start: f64,
    pub stop: f64,
    pub n_psi_minus: u64,
    pub n_ni: u64,
    pub n_psi_plus: u64,
    pub n_unresolved: u64,
}

impl HistogramBin {
    /// `N_ni / N_Ψ⁻` with its standard error; `None` for an empty Ψ⁻ bin.
    pub fn ratio(&self) -> Option<(f64, f64)> {
        (self.n_psi_minus > 0).then(|| stats::count_ratio(self.n_ni, self.n_psi_minus))
    }

    pub fn total(&self) -> u64 {
        self.n_psi_minus + self.n_ni + self.n_psi_plus + self.n_unresolved
    }
}

/// Bins events by `dt` into left-closed bins of `bin_width` seconds, from 0
/// up to the largest observed `dt`.
pub fn dt_histogram(events: &[BsmEvent], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::OutOfRange { name: "bin_width", value: bin_width, min: 0.0, max: f64::INFINITY });
    }
    let max_dt = events.iter().map(|e| e.dt).fold(0.0, f64::max);
    let nbins = if events.is_empty() { 0 } else { libm::floor(max_dt / bin_width) as usize + 1 };
    let mut bins: Vec<HistogramBin> = (0..nbins)
        .map(|i| HistogramBin {
            start: i as f64 * bin_width,
            stop: (i + 1) as f64 * bin_width,
            n_psi_minus: 0,
            n_ni: 0,
            n_psi_plus: 0,
            n_unresolved: 0,
        })
        .collect();
    for e in events {
        let idx = (libm::floor(e.dt / bin_width) as usize).min(nbins - 1);
        let bin = &mut bins[idx];
        match e.outcome {
            Outcome::PsiMinus => bin.n_psi_minus += 1,
            Outcome::NoInterference => bin.n_ni += 1,
            Outcome::PsiPlus => bin.n_psi_plus += 1,
            Outcome::Unresolved => bin.n_unresolved += 1,
        }
    }
    Ok(bins)
}
