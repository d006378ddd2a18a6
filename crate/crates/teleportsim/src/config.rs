//! Campaign configuration: TOML schema, presets, dotted-key overrides and
//! validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use teleport_core::photonics::{Envelope, Shape, TabulatedDensity};
use teleport_core::protocol::{EfficiencyBudget, InputState, NoiseModel};

pub const SCHEMA_VERSION: u32 = 1;

/// Every key a config file or `--set` may name.
pub const VALID_KEYS: &[&str] = &[
    "schema_version",
    "trials",
    "seed",
    "input_schedule",
    "windows_ns",
    "bin_width_ns",
    "noise.p_a",
    "noise.p_ent",
    "noise.sigma_omega",
    "budget.losses",
    "budget.storage_efficiency",
    "budget.a.eta",
    "budget.a.p_det",
    "budget.a.t_out",
    "budget.a.t_opt",
    "budget.a.epsilon",
    "budget.b.eta",
    "budget.b.p_det",
    "budget.b.t_out",
    "budget.b.t_opt",
    "budget.b.epsilon",
    "envelope.a.kind",
    "envelope.a.rise_ns",
    "envelope.a.fall_ns",
    "envelope.a.delay_ns",
    "envelope.a.gate_start_ns",
    "envelope.a.gate_stop_ns",
    "envelope.a.table_csv",
    "envelope.c.kind",
    "envelope.c.rise_ns",
    "envelope.c.fall_ns",
    "envelope.c.delay_ns",
    "envelope.c.gate_start_ns",
    "envelope.c.gate_stop_ns",
    "envelope.c.table_csv",
    "detector.jitter_ns",
    "detector.dark_rate_hz",
    "lab.repetition_rate_hz",
    "lab.duty_cycle",
    "calibration.target_contrast",
    "calibration.file",
];

pub const PRESETS: &[(&str, &str)] = &[
    ("paper-table1", include_str!("../presets/paper-table1.toml")),
    ("paper-fig2", include_str!("../presets/paper-fig2.toml")),
    ("paper-fig3", include_str!("../presets/paper-fig3.toml")),
    ("noiseless", include_str!("../presets/noiseless.toml")),
    ("lossless", include_str!("../presets/lossless.toml")),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub trials: u64,
    pub seed: u64,
    pub input_schedule: Vec<String>,
    pub windows_ns: Vec<f64>,
    pub bin_width_ns: f64,
    pub noise: NoiseSection,
    pub budget: BudgetSection,
    pub envelope: EnvelopeSection,
    pub detector: DetectorSection,
    pub lab: LabSection,
    pub calibration: CalibrationSection,
    /// Directory holding the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub p_a: f64,
    pub p_ent: f64,
    /// rad/s; when absent the value comes from the calibration section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    /// `false` simulates every trial with both photons present.
    pub losses: bool,
    /// Probability that storing the input at the sender succeeds.
    pub storage_efficiency: f64,
    pub a: NodeBudget,
    pub b: NodeBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeBudget {
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_det: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_opt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSection {
    pub a: EnvelopeSpec,
    pub c: EnvelopeSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeSpec {
    /// `double_exponential` or `table`.
    pub kind: String,
    pub rise_ns: f64,
    pub fall_ns: f64,
    pub delay_ns: f64,
    pub gate_start_ns: f64,
    pub gate_stop_ns: f64,
    /// Two-column CSV `t_ns,density` used when `kind = "table"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    /// RMS Gaussian timing jitter.
    pub jitter_ns: f64,
    /// Dark-count rate per detector.
    pub dark_rate_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabSection {
    pub repetition_rate_hz: f64,
    /// Fraction of lab time with an atom trapped at both nodes.
    pub duty_cycle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_contrast: Option<f64>,
    /// JSON written by `teleportsim calibrate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            trials: 8000,
            seed: 1,
            input_schedule: InputState::ALL.iter().map(|l| l.name().to_string()).collect(),
            windows_ns: vec![20.0, 40.0, 80.0, 160.0],
            bin_width_ns: 40.0,
            noise: NoiseSection::default(),
            budget: BudgetSection::default(),
            envelope: EnvelopeSection::default(),
            detector: DetectorSection::default(),
            lab: LabSection::default(),
            calibration: CalibrationSection::default(),
            base_dir: None,
        }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        // F_A = 0.95 and F_ent = 0.89.
        Self { p_a: 0.9, p_ent: 0.8533333333333334, sigma_omega: None }
    }
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            losses: true,
            storage_efficiency: 1.0,
            a: NodeBudget { eta: 0.39, p_det: Some(0.31), t_out: None, t_opt: None, epsilon: None },
            b: NodeBudget { eta: 0.25, p_det: Some(0.12), t_out: None, t_opt: None, epsilon: None },
        }
    }
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self {
            kind: "double_exponential".into(),
            rise_ns: 40.0,
            fall_ns: 150.0,
            delay_ns: 0.0,
            gate_start_ns: 0.0,
            gate_stop_ns: 600.0,
            table_csv: None,
        }
    }
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { jitter_ns: 0.0, dark_rate_hz: 0.0 }
    }
}

impl Default for LabSection {
    fn default() -> Self {
        Self { repetition_rate_hz: 10_000.0, duty_cycle: 0.25 }
    }
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { target_contrast: Some(0.64), file: None }
    }
}

/// One or more problems with a configuration, each tied to a key.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<(String, String)>,
}

impl ConfigError {
    fn one(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Self { problems: vec![(key.into(), msg.into())] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (key, msg)) in self.problems.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            if key.is_empty() {
                write!(f, "{msg}")?;
            } else {
                write!(f, "{key}: {msg}")?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn unknown_key(key: &str) -> (String, String) {
    (key.to_string(), format!("unknown key; valid keys are: {}", VALID_KEYS.join(", ")))
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) if !VALID_KEYS.contains(&key.as_str()) => flatten(&key, t, out),
            _ => out.push(key),
        }
    }
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::one(key, format!("`{part}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Where the base configuration comes from.
#[derive(Clone, Debug, Default)]
pub enum Source {
    #[default]
    Defaults,
    Preset(String),
    File(PathBuf),
}

pub fn preset_text(name: &str) -> Result<&'static str, ConfigError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        ConfigError::one("--preset", format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })
}

/// Failure while loading: either the file could not be read or its content
/// is invalid.
#[derive(Debug)]
pub enum LoadError {
    Io(PathBuf, std::io::Error),
    Config(ConfigError),
}

impl From<ConfigError> for LoadError {
    fn from(e: ConfigError) -> Self {
        LoadError::Config(e)
    }
}

/// Reads the base config, applies `key=value` overrides in order (last
/// writer wins), deserializes and validates.
pub fn load(source: &Source, overrides: &[String]) -> Result<ExperimentConfig, LoadError> {
    let (text, base_dir) = match source {
        Source::Defaults => (String::new(), None),
        Source::Preset(name) => (preset_text(name)?.to_string(), None),
        Source::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.clone(), e))?;
            (text, path.parent().map(Path::to_path_buf))
        }
    };
    let mut cfg = from_toml_str(&text, overrides)?;
    cfg.base_dir = base_dir;
    Ok(cfg)
}

pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::one("", e.to_string()))?;
    let mut keys = Vec::new();
    flatten("", &table, &mut keys);
    let mut problems: Vec<_> =
        keys.iter().filter(|k| !VALID_KEYS.contains(&k.as_str())).map(|k| unknown_key(k)).collect();
    for item in overrides {
        let Some((key, value)) = item.split_once('=') else {
            problems.push((item.clone(), "override must look like key=value".into()));
            continue;
        };
        let key = key.trim();
        if !VALID_KEYS.contains(&key) {
            problems.push(unknown_key(key));
            continue;
        }
        if let Err(e) = set_dotted(&mut table, key, parse_value(value)) {
            problems.extend(e.problems);
        }
    }
    if !problems.is_empty() {
        return Err(ConfigError { problems });
    }
    let cfg: ExperimentConfig =
        table.try_into().map_err(|e: toml::de::Error| ConfigError::one("", e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_unit(problems: &mut Vec<(String, String)>, key: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        problems.push((key.into(), format!("{v} is outside [0, 1]")));
    }
}

fn check_nonneg(problems: &mut Vec<(String, String)>, key: &str, v: f64) {
    if !(v >= 0.0 && v.is_finite()) {
        problems.push((key.into(), format!("{v} must be finite and >= 0")));
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut p = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            p.push((
                "schema_version".into(),
                format!("{} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.trials == 0 {
            p.push(("trials".into(), "must be > 0".into()));
        }
        if self.input_schedule.is_empty() {
            p.push(("input_schedule".into(), "must name at least one input state".into()));
        }
        for name in &self.input_schedule {
            if InputState::from_name(name).is_none() {
                let valid: Vec<_> = InputState::ALL.iter().map(|l| l.name()).collect();
                p.push(("input_schedule".into(), format!("unknown input `{name}`; valid: {}", valid.join(", "))));
            }
        }
        if self.windows_ns.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            p.push(("windows_ns".into(), "windows must be finite and > 0".into()));
        }
        if self.windows_ns.windows(2).any(|w| w[0] >= w[1]) {
            p.push(("windows_ns".into(), "windows must be strictly ascending".into()));
        }
        if !(self.bin_width_ns > 0.0 && self.bin_width_ns.is_finite()) {
            p.push(("bin_width_ns".into(), "must be > 0".into()));
        }
        check_unit(&mut p, "noise.p_a", self.noise.p_a);
        check_unit(&mut p, "noise.p_ent", self.noise.p_ent);
        if let Some(s) = self.noise.sigma_omega {
            check_nonneg(&mut p, "noise.sigma_omega", s);
        }
        check_unit(&mut p, "budget.storage_efficiency", self.budget.storage_efficiency);
        for (node, b) in [("a", &self.budget.a), ("b", &self.budget.b)] {
            check_unit(&mut p, &format!("budget.{node}.eta"), b.eta);
            for (k, v) in [("p_det", b.p_det), ("t_out", b.t_out), ("t_opt", b.t_opt), ("epsilon", b.epsilon)] {
                if let Some(v) = v {
                    check_unit(&mut p, &format!("budget.{node}.{k}"), v);
                }
            }
            let factors = [b.t_out, b.t_opt, b.epsilon].iter().filter(|v| v.is_some()).count();
            match (b.p_det.is_some(), factors) {
                (true, 0) | (false, 3) => {}
                (true, _) => {
                    p.push((format!("budget.{node}"), "give either p_det or t_out/t_opt/epsilon, not both".into()))
                }
                (false, _) => p.push((format!("budget.{node}"), "needs p_det or all of t_out, t_opt, epsilon".into())),
            }
        }
        for (node, e) in [("a", &self.envelope.a), ("c", &self.envelope.c)] {
            let key = |k: &str| format!("envelope.{node}.{k}");
            match e.kind.as_str() {
                "double_exponential" => {
                    check_nonneg(&mut p, &key("rise_ns"), e.rise_ns);
                    if !(e.fall_ns > 0.0 && e.fall_ns.is_finite()) {
                        p.push((key("fall_ns"), "must be > 0".into()));
                    }
                    if !e.delay_ns.is_finite() {
                        p.push((key("delay_ns"), "must be finite".into()));
                    }
                }
                "table" => {
                    if e.table_csv.is_none() {
                        p.push((key("table_csv"), "required when kind = \"table\"".into()));
                    }
                }
                other => p.push((key("kind"), format!("`{other}` is not one of double_exponential, table"))),
            }
            if !(e.gate_start_ns.is_finite() && e.gate_stop_ns.is_finite() && e.gate_stop_ns > e.gate_start_ns) {
                p.push((key("gate_stop_ns"), "gate must satisfy start < stop".into()));
            }
        }
        check_nonneg(&mut p, "detector.jitter_ns", self.detector.jitter_ns);
        check_nonneg(&mut p, "detector.dark_rate_hz", self.detector.dark_rate_hz);
        if !(self.lab.repetition_rate_hz > 0.0 && self.lab.repetition_rate_hz.is_finite()) {
            p.push(("lab.repetition_rate_hz".into(), "must be > 0".into()));
        }
        if !(self.lab.duty_cycle > 0.0 && self.lab.duty_cycle <= 1.0) {
            p.push(("lab.duty_cycle".into(), "must be in (0, 1]".into()));
        }
        if let Some(t) = self.calibration.target_contrast {
            check_unit(&mut p, "calibration.target_contrast", t);
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems: p })
        }
    }

    pub fn schedule(&self) -> Vec<InputState> {
        self.input_schedule.iter().filter_map(|n| InputState::from_name(n)).collect()
    }

    /// Windows in seconds.
    pub fn windows(&self) -> Vec<f64> {
        self.windows_ns.iter().map(|w| w * 1e-9).collect()
    }

    /// Noise model with the given frequency jitter.
    pub fn noise_model(&self, sigma_omega: f64) -> NoiseModel {
        NoiseModel::new(self.noise.p_a, self.noise.p_ent, sigma_omega).expect("validated")
    }

    pub fn budgets(&self) -> (EfficiencyBudget, EfficiencyBudget) {
        let build = |b: &NodeBudget| match b.p_det {
            Some(p) => EfficiencyBudget::lumped(b.eta, p),
            None => EfficiencyBudget::from_factors(
                b.eta,
                b.t_out.unwrap_or(0.0),
                b.t_opt.unwrap_or(0.0),
                b.epsilon.unwrap_or(0.0),
            ),
        };
        (build(&self.budget.a).expect("validated"), build(&self.budget.b).expect("validated"))
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = PathBuf::from(p);
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path,
        }
    }

    /// Builds both temporal envelopes, reading table files if needed.
    pub fn envelopes(&self) -> Result<(Envelope, Envelope), LoadError> {
        Ok((self.build_envelope("a", &self.envelope.a)?, self.build_envelope("c", &self.envelope.c)?))
    }

    fn build_envelope(&self, node: &str, e: &EnvelopeSpec) -> Result<Envelope, LoadError> {
        let gate = (e.gate_start_ns * 1e-9, e.gate_stop_ns * 1e-9);
        let shape = if e.kind == "table" {
            let path = self.resolve_path(e.table_csv.as_deref().unwrap_or_default());
            let points = read_table(&path)?;
            let table = TabulatedDensity::new(&points)
                .map_err(|err| ConfigError::one(format!("envelope.{node}.table_csv"), err.to_string()))?;
            Shape::Table(table)
        } else {
            Shape::DoubleExponential { rise: e.rise_ns * 1e-9, fall: e.fall_ns * 1e-9, delay: e.delay_ns * 1e-9 }
        };
        Envelope::single(shape, gate)
            .map_err(|err| ConfigError::one(format!("envelope.{node}"), err.to_string()).into())
    }
}

/// Reads `t_ns,density` rows; a non-numeric first row is taken as a header.
fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| LoadError::Io(path.to_path_buf(), std::io::Error::other(e.to_string())))?;
    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| LoadError::Io(path.to_path_buf(), std::io::Error::other(e.to_string())))?;
        let parse = |j: usize| row.get(j).and_then(|s| s.parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(t), Some(v)) => points.push((t * 1e-9, v)),
            _ if i == 0 => continue,
            _ => {
                return Err(ConfigError::one(
                    "table_csv",
                    format!("{}: row {} is not `t_ns,density`", path.display(), i + 1),
                )
                .into())
            }
        }
    }
    Ok(points)
}
