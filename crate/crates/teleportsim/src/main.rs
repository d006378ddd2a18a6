use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teleport_core::bsm;
use teleport_core::protocol::{predict_fidelity, FidelityClass, NoiseModel};

use teleportsim::calibrate::{self, McCheck};
use teleportsim::campaign::{run_campaign, Setup};
use teleportsim::config::{self, ExperimentConfig, Source};
use teleportsim::reports::Reports;
use teleportsim::{contrast_model, threads_from_env, AppError};

#[derive(Parser)]
#[command(
    name = "teleportsim",
    version,
    about = "Simulate quantum teleportation between two remote single-atom memories"
)]
struct Cli {
    /// Suppress summaries on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write the event log, reports and metadata.
    Simulate(Common),
    /// Find the frequency jitter that yields a target unwindowed contrast.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Target contrast; defaults to calibration.target_contrast.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Reduce an existing event log to the report CSVs.
    Analyze {
        log: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print closed-form fidelities for a contrast and node fidelities.
    Predict {
        #[arg(allow_negative_numbers = true)]
        contrast: f64,
        #[arg(allow_negative_numbers = true)]
        f_ent: f64,
        #[arg(allow_negative_numbers = true)]
        f_a: f64,
    },
    /// Summarize the reports in an output directory next to the model.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Built-in configuration: paper-table1, paper-fig2, paper-fig3, noiseless, lossless.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set noise.p_a=0.9`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Coincidence windows in ns, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    windows: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, AppError> {
        let source = match (&self.preset, &self.config) {
            (Some(p), _) => Source::Preset(p.clone()),
            (None, Some(c)) => Source::File(c.clone()),
            (None, None) => Source::Defaults,
        };
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(t) = self.trials {
            overrides.push(format!("trials={t}"));
        }
        if let Some(w) = &self.windows {
            let list: Vec<String> = w.iter().map(|x| format!("{x:?}")).collect();
            overrides.push(format!("windows_ns=[{}]", list.join(",")));
        }
        Ok(config::load(&source, &overrides)?)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate(common) => simulate(&common, quiet),
        Command::Calibrate { common, target } => calibrate_cmd(&common, target, quiet),
        Command::Analyze { log, common } => analyze(&log, &common, quiet),
        Command::Predict { contrast, f_ent, f_a } => predict(contrast, f_ent, f_a),
        Command::Report { dir } => report(&dir),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn summarize(reports: &Reports) {
    println!("state              fidelity  stderr   events");
    for r in &reports.table1 {
        println!(
            "{:<18} {:>8}  {:>7}  {:>6}",
            r.state,
            fmt_opt(r.fidelity.map(|e| e.value)),
            fmt_opt(r.fidelity.map(|e| e.stderr)),
            r.events
        );
    }
    println!();
    println!("tau_max_ns  contrast  retained  f_perp  f_par   f_avg   events");
    for r in &reports.fig3a {
        let tau =
            if r.window.tau_max.is_infinite() { "inf".to_string() } else { format!("{:.1}", r.window.tau_max * 1e9) };
        println!(
            "{:>10}  {:>8}  {:>8.4}  {:>6}  {:>6}  {:>6}  {:>6}",
            tau,
            fmt_opt(r.window.contrast.map(|c| c.contrast)),
            r.window.retained_fraction,
            fmt_opt(r.f_perp.map(|e| e.value)),
            fmt_opt(r.f_parallel.map(|e| e.value)),
            fmt_opt(r.f_avg.map(|e| e.value)),
            r.events
        );
    }
}

fn simulate(common: &Common, quiet: bool) -> Result<(), AppError> {
    let cfg = common.load()?;
    let threads = threads_from_env()?;
    let sim = teleportsim::simulate(&cfg, threads)?;
    teleportsim::write_simulation(&common.out, &sim)?;
    if !quiet {
        let t = &sim.campaign.tallies;
        println!(
            "{} trials (seed {}), sigma_omega = {:.6e} rad/s ({})",
            t.attempts,
            cfg.seed,
            sim.metadata.sigma_omega_rad_s.unwrap_or(0.0),
            sim.metadata.sigma_omega_source.as_deref().unwrap_or("")
        );
        println!(
            "clicks: none {}, one {}, two {}, more {}; psi_minus {}, psi_plus {}, no_interference {}, unresolved {}",
            t.no_click,
            t.one_click,
            t.two_click,
            t.multi_click,
            t.psi_minus,
            t.psi_plus,
            t.no_interference,
            t.unresolved
        );
        println!();
        summarize(&sim.reports);
        println!();
        println!("wrote {}", common.out.display());
    }
    Ok(())
}

fn calibrate_cmd(common: &Common, target: Option<f64>, quiet: bool) -> Result<(), AppError> {
    let cfg = common.load()?;
    let target = target.or(cfg.calibration.target_contrast).unwrap_or(0.64);
    let model = contrast_model(&cfg)?;
    let mut cal = calibrate::calibrate(&model, target)?;

    // Check the calibration with heralded trials only.
    let mut mc_cfg = cfg.clone();
    mc_cfg.budget.losses = false;
    let setup = Setup::from_config(&mc_cfg, cal.sigma_omega_rad_s)?;
    let result = run_campaign(&setup, threads_from_env()?);
    let events: Vec<bsm::BsmEvent> = result.records.iter().map(|r| r.event).collect();
    if let Ok(c) = bsm::contrast(&events, f64::INFINITY) {
        cal.mc = Some(McCheck { contrast: c.contrast, stderr: c.stderr, n_psi_minus: c.n_psi_minus, n_ni: c.n_ni });
    }

    teleportsim::create_dir(&common.out)?;
    let path = common.out.join("calibration.json");
    teleportsim::write_json(&path, &cal)?;
    if !quiet {
        println!("target contrast   {target}");
        println!("sigma_omega       {:.6e} rad/s", cal.sigma_omega_rad_s);
        println!("model contrast    {:.6}", cal.model_contrast);
        if let Some(mc) = &cal.mc {
            println!(
                "simulated         {:.4} +/- {:.4} ({} psi_minus, {} ni)",
                mc.contrast, mc.stderr, mc.n_psi_minus, mc.n_ni
            );
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn analyze(log: &Path, common: &Common, quiet: bool) -> Result<(), AppError> {
    let cfg = common.load()?;
    let (reports, meta) = teleportsim::analyze(&cfg, log)?;
    teleportsim::create_dir(&common.out)?;
    teleportsim::write_reports(&common.out, &reports)?;
    teleportsim::write_json(&common.out.join("metadata.json"), &meta)?;
    if !quiet {
        summarize(&reports);
        println!();
        println!("wrote {}", common.out.display());
    }
    Ok(())
}

fn predict(contrast: f64, f_ent: f64, f_a: f64) -> Result<(), AppError> {
    let mut out = Vec::new();
    for (name, class) in [
        ("perpendicular", FidelityClass::Perpendicular),
        ("parallel", FidelityClass::Parallel),
        ("average", FidelityClass::Average),
    ] {
        let f = predict_fidelity(contrast, f_ent, f_a, class).map_err(|e| AppError::Config(e.to_string()))?;
        out.push((name, f));
    }
    for (name, f) in out {
        println!("{name:<14} {f:.4}");
    }
    Ok(())
}

fn read_csv(path: &Path) -> Result<Vec<csv::StringRecord>, AppError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| AppError::io(path, e))?;
    r.records().collect::<Result<_, _>>().map_err(|e| AppError::io(path, e))
}

fn report(dir: &Path) -> Result<(), AppError> {
    let table1 = read_csv(&dir.join("table1.csv"))?;
    let fig3a = read_csv(&dir.join("fig3a.csv"))?;
    let meta_path = dir.join("metadata.json");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&meta_path).map_err(|e| AppError::io(&meta_path, e))?)
            .map_err(|e| AppError::io(&meta_path, e))?;
    let noise = meta.get("noise").and_then(|n| {
        let p = |k: &str| n.get(k).and_then(serde_json::Value::as_f64);
        NoiseModel::new(p("p_a")?, p("p_ent")?, 0.0).ok()
    });

    println!("{}", dir.display());
    if let Some(s) = meta.get("sigma_omega_rad_s").and_then(serde_json::Value::as_f64) {
        println!("sigma_omega {s:.6e} rad/s");
    }
    println!();
    println!("state              fidelity  stderr   events");
    for r in &table1 {
        println!("{:<18} {:>8}  {:>7}  {:>6}", &r[0], &r[1], &r[2], &r[3]);
    }
    println!();
    println!("tau_max_ns  contrast   f_avg      model  events");
    for r in &fig3a {
        let model = match (noise, r[1].parse::<f64>()) {
            (Some(n), Ok(c)) => predict_fidelity(c.clamp(0.0, 1.0), n.f_ent(), n.f_a(), FidelityClass::Average)
                .map(|f| format!("{f:.4}"))
                .unwrap_or_default(),
            _ => "-".into(),
        };
        println!("{:>10}  {:>8}  {:>8}  {:>8}  {:>6}", &r[0], &r[1], &r[8], model, &r[10]);
    }
    Ok(())
}
