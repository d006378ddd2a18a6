//! JSON-lines event log: one line per two-click trial.
//!
//! ```text
//! {"trial_id":17,"input":"down_y","detector_1":"P1H","t1_s":1.2e-7,"detector_2":"P2V",
//!  "t2_s":1.9e-7,"outcome":"psi_minus","domega_rad_s":-3.1e6,"fidelity":0.93,"basis":"x","result":1}
//! ```
//!
//! `domega_rad_s`, `fidelity`, `basis` and `result` are optional; `basis`
//! and `result` appear together. The outcome must agree with the detector
//! pair.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use teleport_core::bsm::{BsmEvent, Outcome};
use teleport_core::photonics::{ClickRecord, Detector};
use teleport_core::protocol::InputState;
use teleport_core::tomography::Basis;

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub trial_id: u64,
    pub input: InputState,
    pub event: BsmEvent,
    /// Frequency difference of the photons, when both were present.
    pub domega: Option<f64>,
    /// `⟨target|ρ_B|target⟩` for heralding outcomes.
    pub fidelity: Option<f64>,
    /// Tomography basis and outcome (`true` for +1).
    pub tomography: Option<(Basis, bool)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    trial_id: u64,
    input: String,
    detector_1: String,
    t1_s: f64,
    detector_2: String,
    t2_s: f64,
    outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domega_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    result: Option<i8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogError {
    /// 1-based line number; 0 for whole-file problems.
    pub line: usize,
    pub trial_id: Option<u64>,
    pub message: String,
}

impl fmt::Display for LogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.trial_id) {
            (0, _) => write!(f, "{}", self.message),
            (l, Some(id)) => write!(f, "line {l} (trial {id}): {}", self.message),
            (l, None) => write!(f, "line {l}: {}", self.message),
        }
    }
}

impl std::error::Error for LogError {}

impl EventRecord {
    fn to_line(&self) -> Line {
        let (c1, c2) = self.event.clicks;
        Line {
            trial_id: self.trial_id,
            input: self.input.name().into(),
            detector_1: c1.detector.name().into(),
            t1_s: c1.time,
            detector_2: c2.detector.name().into(),
            t2_s: c2.time,
            outcome: self.event.outcome.name().into(),
            domega_rad_s: self.domega,
            fidelity: self.fidelity,
            basis: self.tomography.map(|(b, _)| b.letter().to_string()),
            result: self.tomography.map(|(_, r)| if r { 1 } else { -1 }),
        }
    }

    fn from_line(l: Line) -> Result<Self, String> {
        let input = InputState::from_name(&l.input).ok_or_else(|| format!("unknown input `{}`", l.input))?;
        let det = |s: &str| Detector::from_name(s).ok_or_else(|| format!("unknown detector `{s}`"));
        let (d1, d2) = (det(&l.detector_1)?, det(&l.detector_2)?);
        for (k, v) in [("t1_s", l.t1_s), ("t2_s", l.t2_s)] {
            if !v.is_finite() {
                return Err(format!("{k} is not finite"));
            }
        }
        let event =
            BsmEvent::new(ClickRecord { detector: d1, time: l.t1_s }, ClickRecord { detector: d2, time: l.t2_s });
        let outcome = Outcome::from_name(&l.outcome).ok_or_else(|| format!("unknown outcome `{}`", l.outcome))?;
        if outcome != event.outcome {
            return Err(format!(
                "outcome `{}` contradicts detectors {}/{} (expected `{}`)",
                l.outcome,
                l.detector_1,
                l.detector_2,
                event.outcome.name()
            ));
        }
        if let Some(f) = l.fidelity {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("fidelity {f} is outside [0, 1]"));
            }
        }
        let tomography = match (l.basis, l.result) {
            (None, None) => None,
            (Some(b), Some(r)) => {
                let mut chars = b.chars();
                let basis = match (chars.next(), chars.next()) {
                    (Some(c), None) => Basis::from_letter(c),
                    _ => None,
                }
                .ok_or_else(|| format!("unknown basis `{b}`"))?;
                match r {
                    1 => Some((basis, true)),
                    -1 => Some((basis, false)),
                    _ => return Err(format!("result must be 1 or -1, found {r}")),
                }
            }
            _ => return Err("basis and result must appear together".into()),
        };
        Ok(Self { trial_id: l.trial_id, input, event, domega: l.domega_rad_s, fidelity: l.fidelity, tomography })
    }
}

pub fn write_log<W: Write>(records: &[EventRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &r.to_line())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses a log; blank lines are skipped. An empty log is an error.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<EventRecord>, LogError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LogError { line: i + 1, trial_id: None, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| LogError {
            line: i + 1,
            trial_id: None,
            message: e.to_string(),
        })?;
        let id = parsed.trial_id;
        let rec =
            EventRecord::from_line(parsed).map_err(|message| LogError { line: i + 1, trial_id: Some(id), message })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(LogError { line: 0, trial_id: None, message: "event log contains no events".into() });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> EventRecord {
        EventRecord {
            trial_id: 3,
            input: InputState::UpY,
            event: BsmEvent::new(
                ClickRecord { detector: Detector::P2V, time: 1.234_567_890_123e-7 },
                ClickRecord { detector: Detector::P1H, time: 2.0e-7 + 1e-22 },
            ),
            domega: Some(-7.1e6 / 3.0),
            fidelity: Some(0.1 + 0.2),
            tomography: Some((Basis::Y, false)),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let recs = vec![record(), EventRecord { domega: None, fidelity: None, tomography: None, ..record() }];
        let mut buf = Vec::new();
        write_log(&recs, &mut buf).unwrap();
        assert_eq!(read_log(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn schema_violations_name_the_line() {
        let mut buf = Vec::new();
        write_log(&[record()], &mut buf).unwrap();
        let good = String::from_utf8(buf).unwrap();
        let bad = good.replace("psi_minus", "psi_plus");
        let e = read_log(format!("{good}{bad}").as_bytes()).unwrap_err();
        assert_eq!((e.line, e.trial_id), (2, Some(3)));
        let e = read_log("{\"trial_id\":1}\n".as_bytes()).unwrap_err();
        assert_eq!(e.line, 1);
        let e = read_log("\n\n".as_bytes()).unwrap_err();
        assert_eq!(e.line, 0);
    }
}
