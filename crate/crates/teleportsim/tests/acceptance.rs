//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teleport_core::protocol::{predict_fidelity, success_probability, EfficiencyBudget, FidelityClass};
use teleport_core::qubit::{bell_decompose, singlet, BellBasis, DensityMatrix, PureState};
use teleport_core::tomography::{reconstruct, Basis, BasisCounts};
use teleport_core::C64;
use teleportsim::calibrate::calibrate;
use teleportsim::config::{self, ExperimentConfig, Source};
use teleportsim::reports::Reports;

const F_ENT: f64 = 0.89;
const F_A: f64 = 0.95;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn load(source: Source, overrides: &[String]) -> ExperimentConfig {
    config::load(&source, overrides).expect("acceptance configuration is valid")
}

fn avg(c: f64) -> f64 {
    predict_fidelity(c, F_ENT, F_A, FidelityClass::Average).unwrap()
}

fn closed_form() -> Verdict {
    let t = Instant::now();
    let f = avg(0.64);
    let elapsed = t.elapsed();
    let table = (f - 0.789).abs() <= 0.011;
    verdict(
        (f - 0.7918).abs() <= 1e-4 && elapsed.as_secs_f64() < 1e-3 && table,
        format!("F_avg(0.64) = {f:.6}, {:.1} µs; measured 0.789 ± 0.011", elapsed.as_secs_f64() * 1e6),
    )
}

fn windowed() -> Verdict {
    let f = avg(0.928);
    verdict(
        (f - 0.8656).abs() <= 1e-4 && (f - 0.880).abs() <= 2.0 * 0.015,
        format!("F_avg(0.928) = {f:.6}; measured 0.880 ± 0.015"),
    )
}

fn success() -> Verdict {
    let p = success_probability(&EfficiencyBudget::sender_reported(), &EfficiencyBudget::receiver_reported()).success;
    let t = Instant::now();
    let cfg = load(Source::Defaults, &["trials=10000000".into()]);
    let sim = teleportsim::simulate(&cfg, None).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let rates = sim.metadata.rates.unwrap();
    let z = (rates.mc_psi_minus_fraction - p) / rates.mc_psi_minus_stderr;
    verdict(
        (p - 9.07e-4).abs() <= 1e-6 && z.abs() <= 3.0 && secs < 30.0,
        format!(
            "¼ξAξB = {p:.4e}; MC {:.4e} ± {:.1e} over 1e7 trials (z = {z:+.2}), {secs:.1} s",
            rates.mc_psi_minus_fraction, rates.mc_psi_minus_stderr
        ),
    )
}

fn hom_null() -> Verdict {
    let cfg = load(Source::Preset("noiseless".into()), &["trials=1000000".into()]);
    let sim = teleportsim::simulate(&cfg, None).unwrap();
    let t = sim.campaign.tallies;
    verdict(
        t.no_interference == 0 && t.two_click == 1_000_000,
        format!("{} no-interference events in {} two-photon trials", t.no_interference, t.two_click),
    )
}

fn calibration_loop() -> Verdict {
    let cfg = load(Source::Preset("lossless".into()), &["trials=400000".into(), "windows_ns=[20, 40, 80, 160]".into()]);
    let cal = calibrate(&teleportsim::contrast_model(&cfg).unwrap(), 0.64).unwrap();
    let cfg = load(
        Source::Preset("lossless".into()),
        &[
            "trials=400000".into(),
            "windows_ns=[20, 40, 80, 160]".into(),
            format!("noise.sigma_omega={:?}", cal.sigma_omega_rad_s),
        ],
    );
    let sim = teleportsim::simulate(&cfg, None).unwrap();
    let c: Vec<f64> = sim.reports.fig2c.iter().map(|r| r.contrast.unwrap().contrast).collect();
    // Rows: 20, 40, 80, 160 ns, unwindowed.
    let increasing = c[..4].windows(2).all(|w| w[0] > w[1]) && c[3] > c[4];
    verdict(
        (c[4] - 0.64).abs() <= 0.02 && increasing && c[0] >= 0.97,
        format!(
            "σω = {:.4e} rad/s; C(∞) = {:.4}, C(160/80/40/20 ns) = {:.4}/{:.4}/{:.4}/{:.4}",
            cal.sigma_omega_rad_s, c[4], c[3], c[2], c[1], c[0]
        ),
    )
}

fn fig3_run() -> Reports {
    let cfg = load(Source::Preset("paper-fig3".into()), &["trials=400000".into()]);
    teleportsim::simulate(&cfg, None).unwrap().reports
}

fn mc_vs_analytic(reports: &Reports) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let inf = reports.fig3a.last().unwrap().f_parallel.unwrap();
    for row in &reports.fig3a {
        let (Some(c), Some(f)) = (row.window.contrast, row.f_avg) else {
            pass = false;
            continue;
        };
        let model = avg(c.contrast.clamp(0.0, 1.0));
        let z = (f.value - model).abs() / f.stderr;
        worst = worst.max(z);
        pass &= z <= 3.0;
        let par = row.f_parallel.unwrap();
        pass &= (par.value - inf.value).abs() <= 3.0 * par.stderr;
    }
    verdict(pass, format!("{} rows, worst |F_avg − model| = {worst:.2} stderr; F_parallel flat", reports.fig3a.len()))
}

fn bell_oracle() -> Verdict {
    let basis = BellBasis::detection();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_amp, mut worst_p): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let phi = PureState::normalized(vec![
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
        ])
        .unwrap();
        let target = phi.tensor(&singlet()).unwrap();
        let mut sum = [C64::new(0.0, 0.0); 8];
        for br in bell_decompose(&phi).unwrap() {
            worst_p = worst_p.max((br.probability() - 0.25).abs());
            let bell = basis.state(br.label).amplitudes();
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        sum[a * 4 + b * 2 + c] += br.amplitude * bell[a * 2 + c] * br.state.amplitudes()[b];
                    }
                }
            }
        }
        for (x, y) in sum.iter().zip(target.amplitudes()) {
            worst_amp = worst_amp.max((x - y).norm());
        }
    }
    verdict(
        worst_amp <= 1e-12 && worst_p <= 1e-12,
        format!("1000 states; max amplitude error {worst_amp:.1e}, max |p − ¼| {worst_p:.1e}"),
    )
}

fn tomography(reports: &Reports) -> Verdict {
    let s0 = [0.55, -0.3, 0.4];
    let rho = DensityMatrix::from_bloch(s0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reps = 200;
    let ns = [1_000u64, 10_000, 100_000];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let mut total = 0.0;
            for _ in 0..reps {
                let mut counts = BasisCounts::default();
                for k in 0..n {
                    let basis = Basis::ALL[(k % 3) as usize];
                    counts.record(basis, basis.measure(&rho, &mut rng));
                }
                let s = reconstruct(&counts).unwrap().bloch;
                total += s.iter().zip(s0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            }
            total / reps as f64
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log10()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.log10()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    let axes = reports.bloch.iter().rev().find(|r| r.state == "semi_axes" && r.tau_max.is_infinite()).unwrap().s;
    let elliptic = axes[0] > axes[1] && axes[0] > axes[2];
    verdict(
        (slope + 0.5).abs() <= 0.1 && elliptic,
        format!(
            "slope {slope:.3} (errors {:.4}/{:.4}/{:.5}); semi-axes x {:.3}, y {:.3}, z {:.3}",
            errs[0], errs[1], errs[2], axes[0], axes[1], axes[2]
        ),
    )
}

fn determinism() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let run = |threads: &str| {
        let out = tmp.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_teleportsim"))
            .args(["simulate", "-q", "--preset", "paper-fig3", "--trials", "100000", "--out"])
            .arg(&out)
            .env("TELEPORTSIM_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        out
    };
    let dirs: Vec<_> = ["1", "2", "7", "16"].iter().map(|t| run(t)).collect();
    let read = |d: &Path| -> Vec<Vec<u8>> {
        teleportsim::reports::FILES.iter().map(|f| fs::read(d.join(f)).unwrap()).collect()
    };
    let reference = read(&dirs[0]);
    let same = dirs[1..].iter().all(|d| read(d) == reference);
    verdict(same, format!("{} CSVs byte-identical across TELEPORTSIM_THREADS = 1, 2, 7, 16", reference.len()))
}

fn main() -> ExitCode {
    let fig3 = fig3_run();
    type Check<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);
    let checks: Vec<Check> = vec![
        ("closed-form fidelity", Box::new(closed_form)),
        ("windowed fidelity", Box::new(windowed)),
        ("success probability", Box::new(success)),
        ("HOM null", Box::new(hom_null)),
        ("contrast calibration loop", Box::new(calibration_loop)),
        ("MC vs analytic fidelity", Box::new(|| mc_vs_analytic(&fig3))),
        ("Bell-decomposition oracle", Box::new(bell_oracle)),
        ("tomography convergence", Box::new(|| tomography(&fig3))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!("criterion {}: {} {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
