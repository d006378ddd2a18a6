//! Reductions of an event log to the fidelity table, coincidence histogram,
//! contrast-versus-window, fidelity-versus-contrast and Bloch-vector reports.
//!
//! Everything here reads only [`EventRecord`]s, so reports from a fresh
//! campaign and from a re-imported log are identical.

use std::io;
use std::path::Path;

use teleport_core::bsm::{self, BsmEvent, Outcome};
use teleport_core::protocol::{target_state, FidelityClass, InputState};
use teleport_core::stats;
use teleport_core::tomography::{self, BasisCounts};

use crate::eventlog::EventRecord;

/// Rows with fewer heralded events than this are flagged.
pub const LOW_STATISTICS: u64 = 10;

/// Fidelity estimate for one group of heralded events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Row {
    pub state: String,
    pub fidelity: Option<Estimate>,
    pub events: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2bRow {
    pub bin: bsm::HistogramBin,
    pub ratio: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2cRow {
    pub tau_max: f64,
    pub contrast: Option<bsm::ContrastEstimate>,
    pub retained_fraction: f64,
    pub n_psi_minus: u64,
    pub n_ni: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3aRow {
    pub window: Fig2cRow,
    pub f_perp: Option<Estimate>,
    pub f_parallel: Option<Estimate>,
    pub f_avg: Option<Estimate>,
    pub events: u64,
    pub low_statistics: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlochRow {
    pub tau_max: f64,
    /// An input label, or `semi_axes` for the ellipsoid half-lengths.
    pub state: String,
    pub s: [f64; 3],
    pub stderr: [f64; 3],
    pub n: u64,
    pub projected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reports {
    pub table1: Vec<Table1Row>,
    pub fig2b: Vec<Fig2bRow>,
    pub fig2c: Vec<Fig2cRow>,
    pub fig3a: Vec<Fig3aRow>,
    pub bloch: Vec<BlochRow>,
}

/// Configured windows followed by the unwindowed row.
fn window_list(windows: &[f64]) -> Vec<f64> {
    windows.iter().copied().chain(std::iter::once(f64::INFINITY)).collect()
}

fn heralded(
    records: &[EventRecord],
    outcome: Outcome,
    label: InputState,
    tau_max: f64,
) -> impl Iterator<Item = &EventRecord> {
    records.iter().filter(move |r| r.event.outcome == outcome && r.input == label && r.event.within(tau_max))
}

/// Mean per-trial fidelity with a binomial standard error, or, for logs
/// without per-trial fidelities, the tomographic overlap with the target.
pub fn label_fidelity(
    records: &[EventRecord],
    outcome: Outcome,
    label: InputState,
    tau_max: f64,
) -> Option<(Estimate, u64)> {
    let group: Vec<&EventRecord> = heralded(records, outcome, label, tau_max).collect();
    let n = group.len() as u64;
    if n == 0 {
        return None;
    }
    if group.iter().all(|r| r.fidelity.is_some()) {
        let mean = group.iter().map(|r| r.fidelity.unwrap_or(0.0)).sum::<f64>() / n as f64;
        let se = stats::binomial_stderr(mean, n).map_or(0.0, |e| e.value);
        return Some((Estimate { value: mean, stderr: se }, n));
    }
    let counts: BasisCounts = group.iter().filter_map(|r| r.tomography).collect();
    let tomo = tomography::reconstruct(&counts).ok()?;
    let target = target_state(outcome, label).ok()?.projector().bloch();
    let dot: f64 = (0..3).map(|i| tomo.bloch[i] * target[i]).sum();
    let var: f64 = (0..3).map(|i| (target[i] * tomo.stderr[i]).powi(2)).sum();
    Some((Estimate { value: 0.5 * (1.0 + dot), stderr: 0.5 * var.sqrt() }, n))
}

/// Mean over the labels of `class`; `None` unless every label is present.
fn class_fidelity(records: &[EventRecord], outcome: Outcome, class: FidelityClass, tau_max: f64) -> Option<Estimate> {
    let labels: Vec<InputState> =
        InputState::ALL.into_iter().filter(|l| class == FidelityClass::Average || l.class() == class).collect();
    let mut values = Vec::with_capacity(labels.len());
    let mut errs = Vec::with_capacity(labels.len());
    for l in labels {
        let (e, _) = label_fidelity(records, outcome, l, tau_max)?;
        values.push(e.value);
        errs.push(e.stderr);
    }
    Some(Estimate { value: values.iter().sum::<f64>() / values.len() as f64, stderr: stats::mean_stderr(&errs) })
}

pub fn table1(records: &[EventRecord]) -> Vec<Table1Row> {
    let inf = f64::INFINITY;
    let mut rows: Vec<Table1Row> = InputState::ALL
        .into_iter()
        .map(|l| {
            let est = label_fidelity(records, Outcome::PsiMinus, l, inf);
            Table1Row {
                state: l.name().into(),
                fidelity: est.map(|e| e.0),
                events: heralded(records, Outcome::PsiMinus, l, inf).count() as u64,
            }
        })
        .collect();
    let events = rows.iter().map(|r| r.events).sum();
    rows.push(Table1Row {
        state: "average".into(),
        fidelity: class_fidelity(records, Outcome::PsiMinus, FidelityClass::Average, inf),
        events,
    });
    rows.push(Table1Row {
        state: "psi_plus_average".into(),
        fidelity: class_fidelity(records, Outcome::PsiPlus, FidelityClass::Average, inf),
        events: records.iter().filter(|r| r.event.outcome == Outcome::PsiPlus).count() as u64,
    });
    rows
}

fn events_of(records: &[EventRecord]) -> Vec<BsmEvent> {
    records.iter().map(|r| r.event).collect()
}

pub fn fig2b(events: &[BsmEvent], bin_width: f64) -> Vec<Fig2bRow> {
    bsm::dt_histogram(events, bin_width)
        .expect("bin width validated by the config")
        .into_iter()
        .map(|bin| Fig2bRow { ratio: bin.ratio(), bin })
        .collect()
}

fn window_row(events: &[BsmEvent], tau_max: f64) -> Fig2cRow {
    let (n_psi_minus, n_ni) = bsm::window_counts(events, tau_max);
    Fig2cRow {
        tau_max,
        contrast: bsm::contrast_from_counts(n_psi_minus, n_ni).ok(),
        retained_fraction: bsm::retained_fraction(events, tau_max),
        n_psi_minus,
        n_ni,
    }
}

pub fn fig2c(events: &[BsmEvent], windows: &[f64]) -> Vec<Fig2cRow> {
    window_list(windows).into_iter().map(|w| window_row(events, w)).collect()
}

pub fn fig3a(records: &[EventRecord], events: &[BsmEvent], windows: &[f64]) -> Vec<Fig3aRow> {
    window_list(windows)
        .into_iter()
        .map(|w| {
            let window = window_row(events, w);
            let events = window.n_psi_minus;
            Fig3aRow {
                f_perp: class_fidelity(records, Outcome::PsiMinus, FidelityClass::Perpendicular, w),
                f_parallel: class_fidelity(records, Outcome::PsiMinus, FidelityClass::Parallel, w),
                f_avg: class_fidelity(records, Outcome::PsiMinus, FidelityClass::Average, w),
                window,
                events,
                low_statistics: events < LOW_STATISTICS,
            }
        })
        .collect()
}

/// Per-label Bloch vectors of the heralded receiver state plus, where both
/// eigenstates of an axis are present, the ellipsoid semi-axis along it.
pub fn bloch(records: &[EventRecord], windows: &[f64]) -> Vec<BlochRow> {
    let mut rows = Vec::new();
    for w in window_list(windows) {
        let mut found = Vec::new();
        for l in InputState::ALL {
            let counts: BasisCounts = heralded(records, Outcome::PsiMinus, l, w).filter_map(|r| r.tomography).collect();
            let Ok(t) = tomography::reconstruct(&counts) else { continue };
            let n = (0..3).map(|i| counts.plus[i] + counts.minus[i]).sum();
            rows.push(BlochRow {
                tau_max: w,
                state: l.name().into(),
                s: t.bloch,
                stderr: t.stderr,
                n,
                projected: t.projected,
            });
            found.push((l, t, n));
        }
        let get = |l: InputState| found.iter().find(|(x, _, _)| *x == l);
        let axes = [
            (InputState::DownX, InputState::UpX),
            (InputState::DownY, InputState::UpY),
            (InputState::Down, InputState::Up),
        ];
        if let [Some(_), Some(_), Some(_), Some(_), Some(_), Some(_)] = InputState::ALL.map(get) {
            let mut s = [0.0; 3];
            let mut se = [0.0; 3];
            let mut n = 0;
            for (axis, (plus, minus)) in axes.into_iter().enumerate() {
                let (p, m) = (get(plus).expect("checked"), get(minus).expect("checked"));
                let d: Vec<f64> = (0..3).map(|i| p.1.bloch[i] - m.1.bloch[i]).collect();
                let len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                s[axis] = 0.5 * len;
                let var: f64 = if len > 0.0 {
                    (0..3).map(|i| (d[i] / len).powi(2) * (p.1.stderr[i].powi(2) + m.1.stderr[i].powi(2))).sum()
                } else {
                    0.0
                };
                se[axis] = 0.5 * var.sqrt();
                n += p.2 + m.2;
            }
            rows.push(BlochRow { tau_max: w, state: "semi_axes".into(), s, stderr: se, n, projected: false });
        }
    }
    rows
}

pub fn compute(records: &[EventRecord], windows: &[f64], bin_width: f64) -> Reports {
    let events = events_of(records);
    Reports {
        table1: table1(records),
        fig2b: fig2b(&events, bin_width),
        fig2c: fig2c(&events, windows),
        fig3a: fig3a(records, &events, windows),
        bloch: bloch(records, windows),
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn ns(seconds: f64) -> String {
    if seconds.is_infinite() {
        "inf".into()
    } else {
        format!("{:.3}", seconds * 1e9)
    }
}

fn est_cells(e: Option<Estimate>) -> [String; 2] {
    [opt(e.map(|e| e.value)), opt(e.map(|e| e.stderr))]
}

pub const TABLE1_HEADER: &[&str] = &["state", "fidelity", "stderr", "events"];
pub const FIG2B_HEADER: &[&str] = &["dt_start_ns", "dt_stop_ns", "n_psi_minus", "n_ni", "ratio", "ratio_stderr"];
pub const FIG2C_HEADER: &[&str] =
    &["tau_max_ns", "contrast", "contrast_stderr", "retained_fraction", "n_psi_minus", "n_ni"];
pub const FIG3A_HEADER: &[&str] = &[
    "tau_max_ns",
    "contrast",
    "contrast_stderr",
    "retained_fraction",
    "f_perp",
    "f_perp_stderr",
    "f_parallel",
    "f_parallel_stderr",
    "f_avg",
    "f_avg_stderr",
    "events",
    "low_statistics",
];
pub const BLOCH_HEADER: &[&str] =
    &["tau_max_ns", "state", "s_x", "s_y", "s_z", "se_x", "se_y", "se_z", "n", "projected"];

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io::Error::other)?;
    w.write_record(header).map_err(io::Error::other)?;
    for row in rows {
        w.write_record(&row).map_err(io::Error::other)?;
    }
    w.flush()
}

fn window_cells(r: &Fig2cRow) -> Vec<String> {
    vec![
        ns(r.tau_max),
        opt(r.contrast.map(|c| c.contrast)),
        opt(r.contrast.map(|c| c.stderr)),
        num(r.retained_fraction),
    ]
}

pub const FILES: [&str; 5] = ["table1.csv", "fig2b.csv", "fig2c.csv", "fig3a.csv", "bloch.csv"];

impl Reports {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        write_csv(
            &dir.join("table1.csv"),
            TABLE1_HEADER,
            self.table1.iter().map(|r| {
                let [f, se] = est_cells(r.fidelity);
                vec![r.state.clone(), f, se, r.events.to_string()]
            }),
        )?;
        write_csv(
            &dir.join("fig2b.csv"),
            FIG2B_HEADER,
            self.fig2b.iter().map(|r| {
                vec![
                    ns(r.bin.start),
                    ns(r.bin.stop),
                    r.bin.n_psi_minus.to_string(),
                    r.bin.n_ni.to_string(),
                    opt(r.ratio.map(|x| x.0)),
                    opt(r.ratio.map(|x| x.1)),
                ]
            }),
        )?;
        write_csv(
            &dir.join("fig2c.csv"),
            FIG2C_HEADER,
            self.fig2c.iter().map(|r| {
                let mut row = window_cells(r);
                row.extend([r.n_psi_minus.to_string(), r.n_ni.to_string()]);
                row
            }),
        )?;
        write_csv(
            &dir.join("fig3a.csv"),
            FIG3A_HEADER,
            self.fig3a.iter().map(|r| {
                let mut row = window_cells(&r.window);
                for e in [r.f_perp, r.f_parallel, r.f_avg] {
                    row.extend(est_cells(e));
                }
                row.extend([r.events.to_string(), r.low_statistics.to_string()]);
                row
            }),
        )?;
        write_csv(
            &dir.join("bloch.csv"),
            BLOCH_HEADER,
            self.bloch.iter().map(|r| {
                let mut row = vec![ns(r.tau_max), r.state.clone()];
                row.extend(r.s.iter().map(|x| num(*x)));
                row.extend(r.stderr.iter().map(|x| num(*x)));
                row.extend([r.n.to_string(), r.projected.to_string()]);
                row
            }),
        )
    }
}
