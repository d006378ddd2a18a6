//! Monte Carlo campaign: one trial per attempt, chunked into fixed-size
//! trial ranges with their own RNG streams so the output never depends on
//! the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use teleport_core::bsm::{BsmEvent, Outcome};
use teleport_core::photonics::{
    detection_amplitude, pattern_weight, sample_click_pair, sample_freq_offset, ClickRecord, Detector, Envelope,
    TemporalPhoton,
};
use teleport_core::protocol::{
    herald_receiver, herald_single, joint_state, photon_pair_state, receiver_marginal, target_state, EfficiencyBudget,
    InputState, NoiseModel, Photon,
};
use teleport_core::qubit::{fidelity, DensityMatrix, PureState};
use teleport_core::tomography::Basis;

use crate::config::{ExperimentConfig, LoadError};
use crate::eventlog::EventRecord;

/// Trials per RNG stream.
pub const CHUNK: u64 = 8192;

/// Keys the tomography stream apart from the trial streams.
const TOMOGRAPHY_SALT: u64 = 0x746f_6d6f_6772_6170;

/// Everything a trial needs, fixed for the whole campaign.
#[derive(Clone, Debug)]
pub struct Setup {
    pub trials: u64,
    pub seed: u64,
    pub schedule: Vec<InputState>,
    pub noise: NoiseModel,
    pub sender: EfficiencyBudget,
    pub receiver: EfficiencyBudget,
    pub losses: bool,
    pub storage_efficiency: f64,
    pub env_a: Envelope,
    pub env_c: Envelope,
    /// RMS detector jitter, seconds.
    pub jitter: f64,
    /// Dark counts per detector per second.
    pub dark_rate: f64,
}

impl Setup {
    pub fn from_config(cfg: &ExperimentConfig, sigma_omega: f64) -> Result<Self, LoadError> {
        let (env_a, env_c) = cfg.envelopes()?;
        let (sender, receiver) = cfg.budgets();
        Ok(Self {
            trials: cfg.trials,
            seed: cfg.seed,
            schedule: cfg.schedule(),
            noise: cfg.noise_model(sigma_omega),
            sender,
            receiver,
            losses: cfg.budget.losses,
            storage_efficiency: cfg.budget.storage_efficiency,
            env_a,
            env_c,
            jitter: cfg.detector.jitter_ns * 1e-9,
            dark_rate: cfg.detector.dark_rate_hz,
        })
    }

    /// Detection gate covering both envelopes.
    pub fn gate(&self) -> (f64, f64) {
        (self.env_a.gate().0.min(self.env_c.gate().0), self.env_a.gate().1.max(self.env_c.gate().1))
    }
}

/// Trial counts by number of registered clicks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Tallies {
    pub attempts: u64,
    pub no_click: u64,
    pub one_click: u64,
    pub two_click: u64,
    pub multi_click: u64,
    /// Two-click trials by outcome, in `Outcome::ALL` order.
    pub psi_minus: u64,
    pub psi_plus: u64,
    pub no_interference: u64,
    pub unresolved: u64,
}

impl Tallies {
    fn merge(&mut self, o: &Tallies) {
        self.attempts += o.attempts;
        self.no_click += o.no_click;
        self.one_click += o.one_click;
        self.two_click += o.two_click;
        self.multi_click += o.multi_click;
        self.psi_minus += o.psi_minus;
        self.psi_plus += o.psi_plus;
        self.no_interference += o.no_interference;
        self.unresolved += o.unresolved;
    }

    fn count_outcome(&mut self, o: Outcome) {
        match o {
            Outcome::PsiMinus => self.psi_minus += 1,
            Outcome::PsiPlus => self.psi_plus += 1,
            Outcome::NoInterference => self.no_interference += 1,
            Outcome::Unresolved => self.unresolved += 1,
        }
    }
}

/// A trial that produced exactly two clicks.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub input: InputState,
    /// Whether the sender's and the receiver's photon reached a detector.
    pub photons: (bool, bool),
    pub event: BsmEvent,
    pub domega: Option<f64>,
    /// Receiver state, present iff the outcome is `Ψ⁻` or `Ψ⁺`.
    pub receiver: Option<DensityMatrix>,
    pub fidelity: Option<f64>,
    pub tomography: Option<(Basis, bool)>,
}

impl TrialRecord {
    pub fn to_event(&self) -> EventRecord {
        EventRecord {
            trial_id: self.trial_id,
            input: self.input,
            event: self.event,
            domega: self.domega,
            fidelity: self.fidelity,
            tomography: self.tomography,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub tallies: Tallies,
    pub records: Vec<TrialRecord>,
}

impl CampaignResult {
    pub fn events(&self) -> Vec<EventRecord> {
        self.records.iter().map(TrialRecord::to_event).collect()
    }
}

struct Prepared {
    joint: DensityMatrix,
    pair: DensityMatrix,
    /// Probability that the lone sender or receiver photon is V.
    p_vertical: [f64; 2],
}

#[derive(Clone, Copy)]
enum Source {
    /// One of the two clicks of an interfering pair.
    Pair,
    Single(Photon, usize),
    Dark,
}

#[derive(Clone, Copy)]
struct Click {
    rec: ClickRecord,
    source: Source,
}

struct Trial<'a> {
    setup: &'a Setup,
    prepared: &'a [Prepared],
    dark: Option<Poisson<f64>>,
    jitter: Option<Normal<f64>>,
}

impl Trial<'_> {
    fn run(&self, trial_id: u64, rng: &mut ChaCha8Rng, tallies: &mut Tallies) -> Option<TrialRecord> {
        let s = self.setup;
        let idx = (trial_id % s.schedule.len() as u64) as usize;
        let input = s.schedule[idx];
        let prep = &self.prepared[idx];
        let (has_a, has_c) = if s.losses {
            let a = rng.random::<f64>() < s.storage_efficiency * s.sender.xi();
            let c = rng.random::<f64>() < s.receiver.xi();
            (a, c)
        } else {
            (true, true)
        };

        let mut clicks: Vec<Click> = Vec::new();
        let mut domega = None;
        let mut pair_times = None;
        if has_a && has_c {
            let dw = sample_freq_offset(s.noise.sigma_omega, rng);
            domega = Some(dw);
            let pa = TemporalPhoton { polarization: PureState::horizontal(), envelope: &s.env_a, freq_offset: 0.0 };
            let pc = TemporalPhoton { polarization: PureState::horizontal(), envelope: &s.env_c, freq_offset: dw };
            let d = sample_click_pair(&pa, &pc, &prep.pair, rng).detection().clone();
            pair_times = Some((d.first.time, d.second.time, d.operator));
            clicks.push(Click { rec: d.first, source: Source::Pair });
            clicks.push(Click { rec: d.second, source: Source::Pair });
        } else if has_a || has_c {
            let (photon, env, pv) = if has_a {
                (Photon::Sender, &s.env_a, prep.p_vertical[0])
            } else {
                (Photon::Receiver, &s.env_c, prep.p_vertical[1])
            };
            let port = if rng.random::<bool>() { 1 } else { 2 };
            let pol = usize::from(rng.random::<f64>() < pv);
            let time = env.sample_time(rng);
            clicks.push(Click {
                rec: ClickRecord { detector: Detector::new(port, pol == 1), time },
                source: Source::Single(photon, pol),
            });
        }

        if let Some(j) = &self.jitter {
            let (lo, hi) = s.gate();
            for c in &mut clicks {
                c.rec.time += j.sample(rng);
            }
            clicks.retain(|c| (lo..=hi).contains(&c.rec.time));
        }
        if let Some(p) = &self.dark {
            let (lo, hi) = s.gate();
            for d in Detector::ALL {
                let k = p.sample(rng) as u64;
                for _ in 0..k {
                    let time = lo + rng.random::<f64>() * (hi - lo);
                    clicks.push(Click { rec: ClickRecord { detector: d, time }, source: Source::Dark });
                }
            }
        }

        tallies.attempts += 1;
        match clicks.len() {
            0 => {
                tallies.no_click += 1;
                return None;
            }
            1 => {
                tallies.one_click += 1;
                return None;
            }
            2 => tallies.two_click += 1,
            _ => {
                tallies.multi_click += 1;
                return None;
            }
        }
        clicks.sort_by(|x, y| x.rec.time.total_cmp(&y.rec.time));
        let event = BsmEvent::new(clicks[0].rec, clicks[1].rec);
        tallies.count_outcome(event.outcome);

        let (receiver, fid) = if event.outcome.bell_label().is_some() {
            let pair_left = clicks.iter().filter(|c| matches!(c.source, Source::Pair)).count();
            let rho = if pair_left == 2 {
                let (_, _, op) = pair_times.expect("pair clicks imply a pair");
                herald_receiver(&prep.joint, &op)
            } else if pair_left == 1 {
                let survivor = clicks.iter().find(|c| matches!(c.source, Source::Pair)).expect("one pair click");
                self.lost_partner(prep, survivor.rec, pair_times.expect("pair"), domega.unwrap_or(0.0))
            } else if let Some(Source::Single(photon, pol)) =
                clicks.iter().map(|c| c.source).find(|src| matches!(src, Source::Single(..)))
            {
                herald_single(&prep.joint, photon, pol)
            } else {
                None
            };
            let rho = match rho {
                Some(r) => r,
                None => receiver_marginal(&prep.joint).expect("three-qubit joint state"),
            };
            let target = target_state(event.outcome, input).expect("heralding outcome");
            let f = fidelity(&rho, &target);
            (Some(rho), Some(f))
        } else {
            (None, None)
        };

        Some(TrialRecord {
            trial_id,
            input,
            photons: (has_a, has_c),
            event,
            domega,
            receiver,
            fidelity: fid,
            tomography: None,
        })
    }

    /// Receiver state when one click of a detected pair fell outside the
    /// gate: average over the unobserved detector of its partner.
    fn lost_partner(
        &self,
        prep: &Prepared,
        seen: ClickRecord,
        (t1, t2, _): (f64, f64, [teleport_core::C64; 4]),
        dw: f64,
    ) -> Option<DensityMatrix> {
        let s = self.setup;
        // The surviving click may have been jittered; use the sampled times.
        let seen_first = (seen.time - t1).abs() <= (seen.time - t2).abs();
        let mut acc: Option<(DensityMatrix, f64)> = None;
        for d in Detector::ALL {
            let (first, second) = if seen_first {
                (ClickRecord { detector: seen.detector, time: t1 }, ClickRecord { detector: d, time: t2 })
            } else {
                (ClickRecord { detector: d, time: t1 }, ClickRecord { detector: seen.detector, time: t2 })
            };
            let bra = detection_amplitude(first, second, &s.env_a, &s.env_c, dw);
            let w = pattern_weight(&bra, &prep.pair);
            if w <= 0.0 {
                continue;
            }
            let Some(rho) = herald_receiver(&prep.joint, &bra) else { continue };
            acc = Some(match acc {
                None => (rho, w),
                Some((prev, wp)) => (prev.mix(&rho, wp / (wp + w)).expect("weights in [0, 1]"), wp + w),
            });
        }
        acc.map(|(r, _)| r)
    }
}

fn prepare(setup: &Setup) -> Vec<Prepared> {
    setup
        .schedule
        .iter()
        .map(|&label| {
            let joint = joint_state(label, &setup.noise).expect("valid noise model");
            let pair = photon_pair_state(&joint).expect("three-qubit joint state");
            let p_vertical = [pair.get(2, 2).re + pair.get(3, 3).re, pair.get(1, 1).re + pair.get(3, 3).re];
            Prepared { joint, pair, p_vertical }
        })
        .collect()
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs every trial. `threads` caps the worker pool; `None` uses rayon's
/// global pool.
pub fn run_campaign(setup: &Setup, threads: Option<usize>) -> CampaignResult {
    let prepared = prepare(setup);
    let (lo, hi) = setup.gate();
    let trial = Trial {
        setup,
        prepared: &prepared,
        dark: (setup.dark_rate > 0.0).then(|| Poisson::new(setup.dark_rate * (hi - lo)).expect("positive mean")),
        jitter: (setup.jitter > 0.0).then(|| Normal::new(0.0, setup.jitter).expect("positive sigma")),
    };
    let chunks = setup.trials.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = chunk_rng(setup.seed, k);
                let mut tallies = Tallies::default();
                let start = k * CHUNK;
                let stop = (start + CHUNK).min(setup.trials);
                let records: Vec<_> = (start..stop).filter_map(|id| trial.run(id, &mut rng, &mut tallies)).collect();
                (tallies, records)
            })
            .collect::<Vec<_>>()
    };
    let parts = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool").install(work),
        None => work(),
    };
    let mut tallies = Tallies::default();
    let mut records = Vec::new();
    for (t, r) in parts {
        tallies.merge(&t);
        records.extend(r);
    }
    assign_tomography(&mut records, setup.seed);
    CampaignResult { tallies, records }
}

/// Measures atom B on `Ψ⁻`-heralded trials, cycling Z, X, Y per input state.
pub fn assign_tomography(records: &mut [TrialRecord], seed: u64) {
    const ORDER: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];
    let mut next = [0usize; 6];
    for rec in records.iter_mut() {
        if rec.event.outcome != Outcome::PsiMinus {
            continue;
        }
        let Some(rho) = &rec.receiver else { continue };
        let slot = InputState::ALL.iter().position(|l| *l == rec.input).expect("known input");
        let basis = ORDER[next[slot] % 3];
        next[slot] += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ TOMOGRAPHY_SALT);
        rng.set_stream(rec.trial_id);
        rec.tomography = Some((basis, basis.measure(rho, &mut rng)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(trials: u64) -> Setup {
        Setup {
            trials,
            seed: 5,
            schedule: InputState::ALL.to_vec(),
            noise: NoiseModel::noiseless(),
            sender: EfficiencyBudget::ideal(),
            receiver: EfficiencyBudget::ideal(),
            losses: false,
            storage_efficiency: 1.0,
            env_a: Envelope::default_vstirap(),
            env_c: Envelope::default_vstirap(),
            jitter: 0.0,
            dark_rate: 0.0,
        }
    }

    #[test]
    fn tallies_are_conserved() {
        let mut s = setup(20_000);
        s.losses = true;
        s.sender = EfficiencyBudget::lumped(0.5, 0.5).unwrap();
        s.receiver = EfficiencyBudget::lumped(0.6, 0.5).unwrap();
        s.dark_rate = 2e5;
        s.jitter = 5e-9;
        let r = run_campaign(&s, Some(2));
        let t = r.tallies;
        assert_eq!(t.attempts, 20_000);
        assert_eq!(t.no_click + t.one_click + t.two_click + t.multi_click, t.attempts);
        assert_eq!(t.psi_minus + t.psi_plus + t.no_interference + t.unresolved, t.two_click);
        assert_eq!(r.records.len() as u64, t.two_click);
        for rec in &r.records {
            assert_eq!(rec.receiver.is_some(), rec.event.outcome.bell_label().is_some());
            if let Some(rho) = &rec.receiver {
                rho.validate().unwrap();
            }
        }
    }

    #[test]
    fn noiseless_heralds_are_perfect() {
        let r = run_campaign(&setup(3000), None);
        for rec in &r.records {
            if let Some(f) = rec.fidelity {
                assert!((f - 1.0).abs() < 1e-9, "{rec:?}");
            }
        }
        assert_eq!(r.tallies.no_interference, 0);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let s = setup(3 * CHUNK + 17);
        let a = run_campaign(&s, Some(1)).events();
        let b = run_campaign(&s, Some(4)).events();
        assert_eq!(a, b);
    }
}
