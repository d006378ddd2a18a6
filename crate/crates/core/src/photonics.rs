//! Temporal photon modes and time-resolved two-photon interference at a
//! nonpolarizing beam splitter followed by a polarizing beam splitter in each
//! output port.
//!
//! Photon `a` (from the sender) and photon `c` (from the receiver's entangled
//! pair) enter opposite input ports. Port amplitudes are `a → (1 + 2)/√2` and
//! `c → (1 − 2)/√2`. Polarization indices refer to the analyser basis,
//! 0 = H and 1 = V.
//!
//! Envelope functions are probability densities of the detection time; the
//! mode amplitude is their square root. Each trial carries one frequency
//! offset per photon, so the exchange term of a coincidence picks up the
//! phase `dω·(t2 − t1)` with `dω = ω_c − ω_a`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::qubit::{DensityMatrix, PureState};
use crate::C64;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// A normalized piecewise-linear density given by sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedDensity {
    times: Vec<f64>,
    values: Vec<f64>,
    /// Integral from `times[0]` up to each point.
    cumulative: Vec<f64>,
}

impl TabulatedDensity {
    /// Builds from `(time_s, density)` points; values are renormalized.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Envelope("a table needs at least two points"));
        }
        let mut times = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len());
        for (i, &(t, d)) in points.iter().enumerate() {
            if !t.is_finite() || !d.is_finite() {
                return Err(Error::Envelope("non-finite table entry"));
            }
            if d < 0.0 {
                return Err(Error::Envelope("negative density"));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::Envelope("table times must increase strictly"));
            }
            times.push(t);
            values.push(d);
        }
        let mut table = Self { times, values, cumulative: Vec::new() };
        table.accumulate();
        let total = *table.cumulative.last().unwrap_or(&0.0);
        if total <= 0.0 {
            return Err(Error::EmptyGate);
        }
        for v in &mut table.values {
            *v /= total;
        }
        table.accumulate();
        Ok(table)
    }

    fn accumulate(&mut self) {
        self.cumulative.clear();
        self.cumulative.push(0.0);
        for i in 1..self.times.len() {
            let h = self.times[i] - self.times[i - 1];
            let prev = self.cumulative[i - 1];
            self.cumulative.push(prev + 0.5 * h * (self.values[i] + self.values[i - 1]));
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    fn density(&self, t: f64) -> f64 {
        let (first, last) = (self.times[0], *self.times.last().unwrap());
        if t < first || t > last {
            return 0.0;
        }
        let i = self.segment(t);
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    fn cdf(&self, t: f64) -> f64 {
        let (first, last) = (self.times[0], *self.times.last().unwrap());
        if t <= first {
            return 0.0;
        }
        if t >= last {
            return *self.cumulative.last().unwrap();
        }
        let i = self.segment(t);
        let dt = t - self.times[i];
        self.cumulative[i] + 0.5 * dt * (self.values[i] + self.density(t))
    }

    /// Index of the segment `[times[i], times[i + 1]]` containing `t`.
    fn segment(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&x| x <= t);
        idx.saturating_sub(1).min(self.times.len() - 2)
    }

    /// Inverse of `cdf` for `u` in `[0, total mass]`.
    fn quantile(&self, u: f64) -> f64 {
        let n = self.times.len();
        let i = self.cumulative.partition_point(|&c| c <= u).saturating_sub(1).min(n - 2);
        let (t0, d0, d1) = (self.times[i], self.values[i], self.values[i + 1]);
        let h = self.times[i + 1] - t0;
        let target = (u - self.cumulative[i]).max(0.0);
        let slope = (d1 - d0) / h;
        // Solve d0·s + ½·slope·s² = target for s in [0, h].
        let s = if slope.abs() < 1e-300 * (1.0 + d0.abs()) {
            if d0 > 0.0 {
                target / d0
            } else {
                0.0
            }
        } else {
            let disc = (d0 * d0 + 2.0 * slope * target).max(0.0);
            // Stable root of the quadratic.
            2.0 * target / (d0 + libm::sqrt(disc))
        };
        t0 + s.clamp(0.0, h)
    }
}

/// A single emission profile.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Density of the sum of two exponential delays with time constants
    /// `rise` and `fall` seconds, shifted by `delay` seconds.
    DoubleExponential {
        rise: f64,
        fall: f64,
        delay: f64,
    },
    Table(TabulatedDensity),
}

impl Shape {
    fn validate(&self) -> Result<()> {
        match *self {
            Shape::DoubleExponential { rise, fall, delay } => {
                if !(rise >= 0.0 && fall > 0.0 && rise.is_finite() && fall.is_finite() && delay.is_finite()) {
                    return Err(Error::Envelope("rise must be >= 0 and fall > 0"));
                }
                Ok(())
            }
            Shape::Table(_) => Ok(()),
        }
    }

    fn density(&self, t: f64) -> f64 {
        match self {
            Shape::DoubleExponential { rise, fall, delay } => {
                let s = t - delay;
                if s < 0.0 {
                    return 0.0;
                }
                let (r, f) = (*rise, *fall);
                if r == 0.0 {
                    libm::exp(-s / f) / f
                } else if (f - r).abs() <= 1e-12 * f {
                    s * libm::exp(-s / f) / (f * f)
                } else {
                    (libm::exp(-s / f) - libm::exp(-s / r)) / (f - r)
                }
            }
            Shape::Table(table) => table.density(t),
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        match self {
            Shape::DoubleExponential { rise, fall, delay } => {
                let s = t - delay;
                if s <= 0.0 {
                    return 0.0;
                }
                let (r, f) = (*rise, *fall);
                if r == 0.0 {
                    -libm::expm1(-s / f)
                } else if (f - r).abs() <= 1e-12 * f {
                    1.0 - libm::exp(-s / f) * (1.0 + s / f)
                } else {
                    1.0 - (f * libm::exp(-s / f) - r * libm::exp(-s / r)) / (f - r)
                }
            }
            Shape::Table(table) => table.cdf(t),
        }
    }

    /// Draws a time inside `[lo, hi]` from the density truncated to it.
    fn sample_in<R: Rng + ?Sized>(&self, lo: f64, hi: f64, mass: f64, rng: &mut R) -> f64 {
        match self {
            Shape::DoubleExponential { rise, fall, delay } if mass > 0.25 => loop {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                let t = delay + e1 * rise + e2 * fall;
                if (lo..=hi).contains(&t) {
                    return t;
                }
            },
            Shape::DoubleExponential { .. } => {
                let (c0, c1) = (self.cdf(lo), self.cdf(hi));
                let u = c0 + rng.random::<f64>() * (c1 - c0);
                let (mut a, mut b) = (lo, hi);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if self.cdf(m) < u {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
            Shape::Table(table) => {
                let (c0, c1) = (table.cdf(lo), table.cdf(hi));
                let u = c0 + rng.random::<f64>() * (c1 - c0);
                table.quantile(u).clamp(lo, hi)
            }
        }
    }
}

/// Detection-time density, normalized over the detection gate.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    components: Vec<(f64, Shape)>,
    /// Weighted in-gate mass of each component.
    masses: Vec<f64>,
    total: f64,
    gate: (f64, f64),
}

impl Envelope {
    /// Mixture of shapes with nonnegative weights, gated to `[start, stop]`.
    pub fn mixture(components: Vec<(f64, Shape)>, gate: (f64, f64)) -> Result<Self> {
        let (start, stop) = gate;
        if !(start.is_finite() && stop.is_finite() && stop > start) {
            return Err(Error::Envelope("gate must satisfy start < stop"));
        }
        if components.is_empty() {
            return Err(Error::Envelope("no components"));
        }
        let mut masses = Vec::with_capacity(components.len());
        for (w, shape) in &components {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::Envelope("mixture weights must be nonnegative"));
            }
            shape.validate()?;
            masses.push(w * (shape.cdf(stop) - shape.cdf(start)).max(0.0));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 1e-12) {
            return Err(Error::EmptyGate);
        }
        Ok(Self { components, masses, total, gate })
    }

    pub fn single(shape: Shape, gate: (f64, f64)) -> Result<Self> {
        Self::mixture(alloc::vec![(1.0, shape)], gate)
    }

    pub fn double_exponential(rise: f64, fall: f64, gate: (f64, f64)) -> Result<Self> {
        Self::single(Shape::DoubleExponential { rise, fall, delay: 0.0 }, gate)
    }

    /// 40 ns rise, 150 ns fall, gated to `[0, 600 ns]`.
    pub fn default_vstirap() -> Self {
        Self::double_exponential(40e-9, 150e-9, (0.0, 600e-9)).expect("default envelope is valid")
    }

    pub fn gate(&self) -> (f64, f64) {
        self.gate
    }

    pub fn components(&self) -> &[(f64, Shape)] {
        &self.components
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < self.gate.0 || t > self.gate.1 {
            return 0.0;
        }
        let raw: f64 = self.components.iter().map(|(w, s)| w * s.density(t)).sum();
        raw / self.total
    }

    /// `√density`, the temporal mode amplitude.
    pub fn amplitude(&self, t: f64) -> f64 {
        libm::sqrt(self.density(t))
    }

    pub fn sample_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let idx = if self.components.len() == 1 {
            0
        } else {
            let mut u = rng.random::<f64>() * self.total;
            let mut pick = self.masses.len() - 1;
            for (i, m) in self.masses.iter().enumerate() {
                if u < *m {
                    pick = i;
                    break;
                }
                u -= m;
            }
            pick
        };
        let (w, shape) = &self.components[idx];
        shape.sample_in(self.gate.0, self.gate.1, self.masses[idx] / w.max(f64::MIN_POSITIVE), rng)
    }
}

/// A single photon with its polarization, temporal mode and per-trial
/// angular frequency offset (rad/s).
#[derive(Clone, Debug)]
pub struct TemporalPhoton<'a> {
    pub polarization: PureState,
    pub envelope: &'a Envelope,
    pub freq_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detector {
    P1H,
    P1V,
    P2H,
    P2V,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::P1H, Detector::P1V, Detector::P2H, Detector::P2V];

    pub fn new(port: u8, vertical: bool) -> Self {
        match (port, vertical) {
            (1, false) => Detector::P1H,
            (1, true) => Detector::P1V,
            (_, false) => Detector::P2H,
            (_, true) => Detector::P2V,
        }
    }

    /// Beam-splitter output port, 1 or 2.
    pub fn port(self) -> u8 {
        match self {
            Detector::P1H | Detector::P1V => 1,
            Detector::P2H | Detector::P2V => 2,
        }
    }

    /// Polarization index in the analyser basis (0 = H, 1 = V).
    pub fn polarization(self) -> usize {
        match self {
            Detector::P1H | Detector::P2H => 0,
            Detector::P1V | Detector::P2V => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Detector::P1H => "P1H",
            Detector::P1V => "P1V",
            Detector::P2H => "P2H",
            Detector::P2V => "P2V",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickRecord {
    pub detector: Detector,
    /// Seconds after the start of the photon-generation pulse.
    pub time: f64,
}

/// Amplitude of the input photon named by `from_a` reaching `port`.
fn port_amplitude(from_a: bool, port: u8) -> f64 {
    if from_a || port == 1 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    }
}

/// Linear functional on the joint polarization of `(a, c)` giving the
/// amplitude of the ordered click pair. Index is `2·pol_a + pol_c`.
///
/// Summed over all 16 detector assignments, `K†K` equals
/// `ζa(t1)ζc(t2) + ζa(t2)ζc(t1)` times the identity.
pub fn detection_amplitude(
    first: ClickRecord,
    second: ClickRecord,
    env_a: &Envelope,
    env_c: &Envelope,
    d_omega: f64,
) -> [C64; 4] {
    let (t1, t2) = (first.time, second.time);
    let (p1, k1) = (first.detector.port(), first.detector.polarization());
    let (p2, k2) = (second.detector.port(), second.detector.polarization());
    let mut bra = [C64::new(0.0, 0.0); 4];
    // a at t1 and c at t2.
    let direct = port_amplitude(true, p1) * port_amplitude(false, p2) * env_a.amplitude(t1) * env_c.amplitude(t2);
    bra[2 * k1 + k2] += C64::new(direct, 0.0);
    // c at t1 and a at t2.
    let exchange = port_amplitude(false, p1) * port_amplitude(true, p2) * env_c.amplitude(t1) * env_a.amplitude(t2);
    let phase = d_omega * (t2 - t1);
    bra[2 * k2 + k1] += C64::new(libm::cos(phase), libm::sin(phase)) * exchange;
    bra
}

/// `Σ_ij K_i ρ_ij K_j*` for a two-photon polarization state.
pub fn pattern_weight(bra: &[C64; 4], joint: &DensityMatrix) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            acc += bra[i] * joint.get(i, j) * bra[j].conj();
        }
    }
    acc.re.max(0.0)
}

/// Joint density for a port-1 click at `t1` and a port-2 click at `t2`.
///
/// With `same_pol` both photons share a polarization and the exchange term
/// interferes: `¼|√(ζa(t1)ζc(t2)) − √(ζa(t2)ζc(t1))·e^{i dω (t2−t1)}|²`.
/// Otherwise the photons are orthogonally polarized and the density is
/// `¼ζa(t1)ζc(t2) + ¼ζa(t2)ζc(t1)`.
pub fn coincidence_density(t1: f64, t2: f64, env_a: &Envelope, env_c: &Envelope, d_omega: f64, same_pol: bool) -> f64 {
    let x2 = env_a.density(t1) * env_c.density(t2);
    let y2 = env_a.density(t2) * env_c.density(t1);
    if same_pol {
        let (x, y) = (libm::sqrt(x2), libm::sqrt(y2));
        let phase = d_omega * (t2 - t1);
        let re = x - y * libm::cos(phase);
        let im = -y * libm::sin(phase);
        0.25 * (re * re + im * im)
    } else {
        0.25 * (x2 + y2)
    }
}

/// A sampled pair of clicks plus the normalized detection functional used to
/// update the state of anything entangled with the photons.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub first: ClickRecord,
    pub second: ClickRecord,
    /// Kraus row on the `(a, c)` polarization space; `Σ K†K = I`.
    pub operator: [C64; 4],
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairSample {
    Resolved(Detection),
    /// Both photons on one detector; detectors do not resolve photon number.
    Unresolved(Detection),
}

impl PairSample {
    pub fn detection(&self) -> &Detection {
        match self {
            PairSample::Resolved(d) | PairSample::Unresolved(d) => d,
        }
    }
}

/// Samples detection times from the two envelopes and a detector pattern from
/// the linear-optics output distribution of `joint` (order `a`, `c`, analyser
/// basis). `first` always holds the earlier click.
pub fn sample_click_pair<R: Rng + ?Sized>(
    photon_a: &TemporalPhoton<'_>,
    photon_c: &TemporalPhoton<'_>,
    joint: &DensityMatrix,
    rng: &mut R,
) -> PairSample {
    debug_assert_eq!(joint.qubits(), 2);
    let d_omega = photon_c.freq_offset - photon_a.freq_offset;
    loop {
        let ta = photon_a.envelope.sample_time(rng);
        let tc = photon_c.envelope.sample_time(rng);
        let (t1, t2) = if ta <= tc { (ta, tc) } else { (tc, ta) };
        let norm = photon_a.envelope.density(t1) * photon_c.envelope.density(t2)
            + photon_a.envelope.density(t2) * photon_c.envelope.density(t1);
        if !(norm > 0.0) {
            continue;
        }
        let scale = 1.0 / libm::sqrt(norm);

        let mut candidates = [(Detector::P1H, Detector::P1H, [C64::new(0.0, 0.0); 4], 0.0f64); 16];
        let mut total = 0.0;
        for (slot, (d1, d2)) in
            candidates.iter_mut().zip(Detector::ALL.iter().flat_map(|&a| Detector::ALL.iter().map(move |&b| (a, b))))
        {
            let mut bra = detection_amplitude(
                ClickRecord { detector: d1, time: t1 },
                ClickRecord { detector: d2, time: t2 },
                photon_a.envelope,
                photon_c.envelope,
                d_omega,
            );
            for b in &mut bra {
                *b *= scale;
            }
            let w = pattern_weight(&bra, joint);
            total += w;
            *slot = (d1, d2, bra, w);
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for cand in &candidates {
            acc += cand.3;
            if cand.3 > 0.0 && u < acc {
                chosen = Some(cand);
                break;
            }
        }
        let Some(&(d1, d2, operator, w)) = chosen.or_else(|| candidates.iter().rev().find(|c| c.3 > 0.0)) else {
            continue;
        };
        let detection = Detection {
            first: ClickRecord { detector: d1, time: t1 },
            second: ClickRecord { detector: d2, time: t2 },
            operator,
            probability: w / total,
        };
        return if d1 == d2 { PairSample::Unresolved(detection) } else { PairSample::Resolved(detection) };
    }
}

/// Zero-mean Gaussian angular frequency offset with standard deviation
/// `sigma` (rad/s). Always consumes one normal draw.
pub fn sample_freq_offset<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z + 0.0
}

/// Ensemble-averaged contrast and retained fraction of opposite-port
/// coincidences as a function of the window on `|t1 − t2|`, by quadrature of
/// `coincidence_density` over the gate with Gaussian frequency jitter.
///
/// For unpolarized receiver photons, N_Ψ⁻ has density `∝ x² + y²` and N_ni
/// `∝ x² + y² − 2xy·cos(dω Δt)`, so after averaging over dω,
/// `C(τ) = Σ_{|Δ|≤τ} 2xy·e^{−σ²Δ²/2} / Σ_{|Δ|≤τ} (x² + y²)`.
#[derive(Clone, Debug)]
pub struct ContrastModel {
    step: f64,
    /// Per-lag sums of `2xy` and `x² + y²`.
    interfering: Vec<f64>,
    total: Vec<f64>,
}

impl ContrastModel {
    pub fn new(env_a: &Envelope, env_c: &Envelope, points: usize) -> Self {
        let lo = env_a.gate().0.min(env_c.gate().0);
        let hi = env_a.gate().1.max(env_c.gate().1);
        let n = points.max(8);
        let step = (hi - lo) / n as f64;
        let mid = |i: usize| lo + (i as f64 + 0.5) * step;
        let amp_a: Vec<f64> = (0..n).map(|i| env_a.amplitude(mid(i))).collect();
        let amp_c: Vec<f64> = (0..n).map(|i| env_c.amplitude(mid(i))).collect();
        let mut interfering = alloc::vec![0.0; n];
        let mut total = alloc::vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let x = amp_a[i] * amp_c[j];
                let y = amp_a[j] * amp_c[i];
                let lag = i.abs_diff(j);
                interfering[lag] += 2.0 * x * y;
                total[lag] += x * x + y * y;
            }
        }
        Self { step, interfering, total }
    }

    pub fn default_for(env_a: &Envelope, env_c: &Envelope) -> Self {
        Self::new(env_a, env_c, 1200)
    }

    fn lags(&self, tau_max: f64) -> usize {
        if tau_max.is_infinite() {
            return self.total.len();
        }
        if tau_max < 0.0 {
            return 0;
        }
        let k = libm::floor(tau_max / self.step + 1e-9) as usize;
        (k + 1).min(self.total.len())
    }

    /// Modeled contrast; `None` when the window holds no weight.
    pub fn contrast(&self, sigma: f64, tau_max: f64) -> Option<f64> {
        let k = self.lags(tau_max);
        let (mut num, mut den) = (0.0, 0.0);
        for lag in 0..k {
            let dt = lag as f64 * self.step;
            num += self.interfering[lag] * libm::exp(-0.5 * sigma * sigma * dt * dt);
            den += self.total[lag];
        }
        (den > 0.0).then(|| num / den)
    }

    /// Fraction of opposite-port orthogonal-polarization coincidences with
    /// `|Δt| ≤ tau_max`.
    pub fn retained_fraction(&self, tau_max: f64) -> f64 {
        let k = self.lags(tau_max);
        let all: f64 = self.total.iter().sum();
        self.total[..k].iter().sum::<f64>() / all
    }

    /// Largest reachable contrast (σ = 0); below 1 only for mismatched envelopes.
    pub fn max_contrast(&self) -> f64 {
        self.contrast(0.0, f64::INFINITY).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{singlet, DensityMatrix};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> Envelope {
        Envelope::default_vstirap()
    }

    #[test]
    fn default_envelope_integrates_to_one() {
        let e = env();
        let n = 200_000;
        let h = 600e-9 / n as f64;
        let integral: f64 = (0..n).map(|i| e.density((i as f64 + 0.5) * h) * h).sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-9);
        assert_eq!(e.density(-1e-9), 0.0);
        assert_eq!(e.density(601e-9), 0.0);
    }

    #[test]
    fn mixture_with_late_tail_is_normalized() {
        let e = Envelope::mixture(
            alloc::vec![
                (0.9, Shape::DoubleExponential { rise: 40e-9, fall: 150e-9, delay: 0.0 }),
                (0.1, Shape::DoubleExponential { rise: 50e-9, fall: 300e-9, delay: 400e-9 }),
            ],
            (0.0, 600e-9),
        )
        .unwrap();
        let n = 200_000;
        let h = 600e-9 / n as f64;
        let integral: f64 = (0..n).map(|i| e.density((i as f64 + 0.5) * h) * h).sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let t = e.sample_time(&mut rng);
            assert!((0.0..=600e-9).contains(&t));
        }
    }

    #[test]
    fn table_density_normalizes_and_samples() {
        let table = TabulatedDensity::new(&[(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]).unwrap();
        let e = Envelope::single(Shape::Table(table), (0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(e.density(1.0), 1.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let below = (0..n).filter(|_| e.sample_time(&mut rng) < 0.5).count() as f64 / n as f64;
        // Triangle: P(t < 0.5) = 0.125.
        assert!((below - 0.125).abs() < 4.0 * (0.125f64 * 0.875 / n as f64).sqrt());
        assert!(TabulatedDensity::new(&[(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(TabulatedDensity::new(&[(0.0, -1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn hom_suppression_for_identical_photons() {
        let e = env();
        for &(t1, t2) in &[(10e-9, 200e-9), (100e-9, 101e-9), (300e-9, 50e-9)] {
            assert_eq!(coincidence_density(t1, t2, &e, &e, 0.0, true), 0.0);
        }
    }

    #[test]
    fn pi_phase_doubles_distinguishable_density() {
        let e = env();
        let (t1, t2) = (100e-9, 180e-9);
        let d_omega = core::f64::consts::PI / (t2 - t1);
        let same = coincidence_density(t1, t2, &e, &e, d_omega, true);
        let dist = coincidence_density(t1, t2, &e, &e, d_omega, false);
        assert_abs_diff_eq!(same, 2.0 * dist, epsilon = 1e-12 * same);
    }

    #[test]
    fn distinguishable_density_integrates_to_half() {
        let e = env();
        let n = 600;
        let h = 600e-9 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (t1, t2) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                s += coincidence_density(t1, t2, &e, &e, 3e6, false) * h * h;
            }
        }
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn amplitudes_resolve_identity() {
        let ea = env();
        let ec = Envelope::double_exponential(30e-9, 170e-9, (0.0, 600e-9)).unwrap();
        let (t1, t2, dw) = (70e-9, 230e-9, 4.1e6);
        let mut sum = [[C64::new(0.0, 0.0); 4]; 4];
        for d1 in Detector::ALL {
            for d2 in Detector::ALL {
                let k = detection_amplitude(
                    ClickRecord { detector: d1, time: t1 },
                    ClickRecord { detector: d2, time: t2 },
                    &ea,
                    &ec,
                    dw,
                );
                for i in 0..4 {
                    for j in 0..4 {
                        sum[i][j] += k[i].conj() * k[j];
                    }
                }
            }
        }
        let norm = ea.density(t1) * ec.density(t2) + ea.density(t2) * ec.density(t1);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { norm } else { 0.0 };
                assert_abs_diff_eq!(sum[i][j].re, expect, epsilon = 1e-9 * norm);
                assert_abs_diff_eq!(sum[i][j].im, 0.0, epsilon = 1e-9 * norm);
            }
        }
    }

    #[test]
    fn singlet_always_exits_opposite_ports_orthogonal() {
        let e = env();
        let joint = singlet().projector();
        let pol = PureState::horizontal();
        let a = TemporalPhoton { polarization: pol.clone(), envelope: &e, freq_offset: 0.0 };
        let c = TemporalPhoton { polarization: pol, envelope: &e, freq_offset: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5000 {
            let PairSample::Resolved(d) = sample_click_pair(&a, &c, &joint, &mut rng) else {
                panic!("singlet never bunches");
            };
            assert_ne!(d.first.detector.port(), d.second.detector.port());
            assert_ne!(d.first.detector.polarization(), d.second.detector.polarization());
        }
    }

    #[test]
    fn hh_photons_bunch() {
        let e = env();
        let hh = PureState::basis(2, 0).unwrap().projector();
        let a = TemporalPhoton { polarization: PureState::basis(1, 0).unwrap(), envelope: &e, freq_offset: 0.0 };
        let c = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5000 {
            let s = sample_click_pair(&a, &c, &hh, &mut rng);
            let d = s.detection();
            assert_eq!(d.first.detector.port(), d.second.detector.port());
        }
    }

    #[test]
    fn output_distribution_sums_to_one() {
        let e = env();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let a = TemporalPhoton { polarization: PureState::horizontal(), envelope: &e, freq_offset: 1e6 };
        let c = TemporalPhoton { polarization: PureState::horizontal(), envelope: &e, freq_offset: -2e6 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s = sample_click_pair(&a, &c, &mixed, &mut rng);
            let d = s.detection();
            assert!(d.probability > 0.0 && d.probability <= 1.0);
        }
    }

    #[test]
    fn frequency_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..100).all(|_| sample_freq_offset(0.0, &mut rng) == 0.0));
        let n = 1_000_000;
        let sigma = 2.0e6;
        let mean = (0..n).map(|_| sample_freq_offset(sigma, &mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sigma / 1000.0);
    }

    #[test]
    fn contrast_model_limits() {
        let e = env();
        let m = ContrastModel::default_for(&e, &e);
        assert_abs_diff_eq!(m.contrast(0.0, f64::INFINITY).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.retained_fraction(f64::INFINITY), 1.0, epsilon = 1e-12);
        assert!(m.contrast(1e7, 20e-9).unwrap() > m.contrast(1e7, 80e-9).unwrap());
        assert!(m.contrast(1e13, f64::INFINITY).unwrap() > 0.0);
        let mut last = 1.0;
        for k in 1..60 {
            let c = m.contrast(5e6, k as f64 * 10e-9).unwrap();
            assert!(c <= last + 1e-15);
            last = c;
        }
    }
}
