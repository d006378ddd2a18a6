//! The teleportation protocol: noisy preparation of the sender's qubit,
//! noisy atom-photon entanglement at the receiver, closed-form fidelity
//! predictions, the efficiency budget, and the receiver state after a
//! heralding detection.
//!
//! Qubit order of the three-particle state is `(A′, B, C)`: the sender's
//! photon, the receiver atom, and the receiver's photon. Photons are written
//! in the analyser's H/V basis, the atom in the logical `↓/↑` basis.

use alloc::vec;
use num_complex::Complex;

use crate::bsm::Outcome;
use crate::error::{Error, Result};
use crate::qubit::{
    branch_operator, depolarize, partial_trace, singlet, BellLabel, DensityMatrix, Operator, PureState,
};
use crate::C64;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Which closed-form fidelity a set of input states follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FidelityClass {
    /// Inputs whose polarization is a superposition of H and V; they need
    /// two-photon interference.
    Perpendicular,
    /// Analyser eigenpolarizations (the x basis); classical correlations
    /// suffice.
    Parallel,
    /// Mean over all six inputs.
    Average,
}

/// The six input states of three mutually unbiased bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputState {
    Down,
    Up,
    DownY,
    UpY,
    DownX,
    UpX,
}

impl InputState {
    pub const ALL: [InputState; 6] =
        [InputState::Down, InputState::Up, InputState::DownY, InputState::UpY, InputState::DownX, InputState::UpX];

    pub fn name(self) -> &'static str {
        match self {
            InputState::Down => "down",
            InputState::Up => "up",
            InputState::DownY => "down_y",
            InputState::UpY => "up_y",
            InputState::DownX => "down_x",
            InputState::UpX => "up_x",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }

    pub fn state(self) -> PureState {
        let h = FRAC_1_SQRT_2;
        let (a, b) = match self {
            InputState::Down => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            InputState::Up => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            InputState::DownY => (C64::new(h, 0.0), C64::new(0.0, h)),
            InputState::UpY => (C64::new(h, 0.0), C64::new(0.0, -h)),
            InputState::DownX => (C64::new(h, 0.0), C64::new(h, 0.0)),
            InputState::UpX => (C64::new(h, 0.0), C64::new(-h, 0.0)),
        };
        PureState::qubit(a, b).expect("input states are normalized")
    }

    pub fn class(self) -> FidelityClass {
        match self {
            InputState::DownX | InputState::UpX => FidelityClass::Parallel,
            _ => FidelityClass::Perpendicular,
        }
    }
}

/// Depolarizing strengths of the sender's preparation and readout (`p_a`)
/// and of the receiver's atom-photon entanglement (`p_ent`), plus the RMS
/// angular frequency jitter between the photons (rad/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub p_a: f64,
    pub p_ent: f64,
    pub sigma_omega: f64,
}

impl NoiseModel {
    pub fn new(p_a: f64, p_ent: f64, sigma_omega: f64) -> Result<Self> {
        for (name, v) in [("p_a", p_a), ("p_ent", p_ent)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v, min: 0.0, max: 1.0 });
            }
        }
        if !(sigma_omega >= 0.0 && sigma_omega.is_finite()) {
            return Err(Error::OutOfRange { name: "sigma_omega", value: sigma_omega, min: 0.0, max: f64::INFINITY });
        }
        Ok(Self { p_a, p_ent, sigma_omega })
    }

    /// Inverts `F_A = (1 + p_a)/2` and `F_ent = (1 + 3 p_ent)/4`.
    pub fn from_fidelities(f_a: f64, f_ent: f64, sigma_omega: f64) -> Result<Self> {
        check_range("f_a", f_a, 0.5, 1.0)?;
        check_range("f_ent", f_ent, 0.25, 1.0)?;
        Self::new(2.0 * f_a - 1.0, (4.0 * f_ent - 1.0) / 3.0, sigma_omega)
    }

    pub fn noiseless() -> Self {
        Self { p_a: 1.0, p_ent: 1.0, sigma_omega: 0.0 }
    }

    pub fn f_a(&self) -> f64 {
        0.5 * (1.0 + self.p_a)
    }

    pub fn f_ent(&self) -> f64 {
        0.25 * (1.0 + 3.0 * self.p_ent)
    }
}

fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, min, max })
    }
}

/// How a node's photons reach the detectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DetectionPath {
    /// Outcoupling, path transmission and detector quantum efficiency.
    Factors { t_out: f64, t_opt: f64, epsilon: f64 },
    /// A measured end-to-end detection probability.
    Lumped { p_det: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyBudget {
    /// Photon production probability into the cavity mode.
    pub eta: f64,
    pub path: DetectionPath,
}

impl EfficiencyBudget {
    pub fn from_factors(eta: f64, t_out: f64, t_opt: f64, epsilon: f64) -> Result<Self> {
        for (name, v) in [("eta", eta), ("t_out", t_out), ("t_opt", t_opt), ("epsilon", epsilon)] {
            check_range(name, v, 0.0, 1.0)?;
        }
        Ok(Self { eta, path: DetectionPath::Factors { t_out, t_opt, epsilon } })
    }

    pub fn lumped(eta: f64, p_det: f64) -> Result<Self> {
        check_range("eta", eta, 0.0, 1.0)?;
        check_range("p_det", p_det, 0.0, 1.0)?;
        Ok(Self { eta, path: DetectionPath::Lumped { p_det } })
    }

    pub fn ideal() -> Self {
        Self { eta: 1.0, path: DetectionPath::Lumped { p_det: 1.0 } }
    }

    /// Sender node: η = 0.39, P_det = 0.31.
    pub fn sender_reported() -> Self {
        Self { eta: 0.39, path: DetectionPath::Lumped { p_det: 0.31 } }
    }

    /// Receiver node: η = 0.25, P_det = 0.12.
    pub fn receiver_reported() -> Self {
        Self { eta: 0.25, path: DetectionPath::Lumped { p_det: 0.12 } }
    }

    /// `P_det = T_out·T_opt·ε`, or the lumped value.
    pub fn p_det(&self) -> f64 {
        match self.path {
            DetectionPath::Factors { t_out, t_opt, epsilon } => t_out * t_opt * epsilon,
            DetectionPath::Lumped { p_det } => p_det,
        }
    }

    /// Probability of a detector click per attempt, `ξ = η·P_det`.
    pub fn xi(&self) -> f64 {
        self.eta * self.p_det()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessProbability {
    /// Both photons detected, `ξ_A·ξ_B`.
    pub coincidence: f64,
    /// A `Ψ⁻` herald, `¼·ξ_A·ξ_B`.
    pub success: f64,
}

pub fn success_probability(sender: &EfficiencyBudget, receiver: &EfficiencyBudget) -> SuccessProbability {
    let coincidence = sender.xi() * receiver.xi();
    SuccessProbability { coincidence, success: 0.25 * coincidence }
}

/// Closed-form teleportation fidelity conditioned on a `Ψ⁻` herald.
///
/// With `k = (F_ent − ¼)(F_A − ½)`:
/// perpendicular `½ + 4/3·C·k`, parallel `½ + 4/3·k`, average
/// `½ + 8/9·(C + ½)·k`.
pub fn predict_fidelity(contrast: f64, f_ent: f64, f_a: f64, class: FidelityClass) -> Result<f64> {
    check_range("contrast", contrast, 0.0, 1.0)?;
    check_range("f_ent", f_ent, 0.25, 1.0)?;
    check_range("f_a", f_a, 0.5, 1.0)?;
    let k = (f_ent - 0.25) * (f_a - 0.5);
    Ok(match class {
        FidelityClass::Perpendicular => 0.5 + 4.0 / 3.0 * contrast * k,
        FidelityClass::Parallel => 0.5 + 4.0 / 3.0 * k,
        FidelityClass::Average => 0.5 + 8.0 / 9.0 * (contrast + 0.5) * k,
    })
}

/// Sender qubit after preparation and mapping noise, in the logical basis.
pub fn prepare_input(label: InputState, noise: &NoiseModel) -> Result<DensityMatrix> {
    depolarize(&label.state(), noise.p_a)
}

/// Receiver atom-photon pair `(B, C)` in the logical basis.
pub fn prepare_entangled(noise: &NoiseModel) -> Result<DensityMatrix> {
    depolarize(&singlet(), noise.p_ent)
}

/// State the receiver should hold after `outcome`: `|φ⟩` for `Ψ⁻` and the
/// uncorrected `σx|φ⟩` for `Ψ⁺`.
pub fn target_state(outcome: Outcome, input: InputState) -> Result<PureState> {
    let label = outcome.bell_label().ok_or(Error::NotHeralding(outcome))?;
    Ok(branch_operator(label).apply(&input.state()))
}

/// Receiver state under the depolarizing mixture model.
///
/// With probability `p_ent·p_a` the receiver holds the ideal branch state of
/// the detected Bell outcome, otherwise `I/2`. Perpendicular inputs need
/// `interfered`; for analyser eigenpolarizations the polarization
/// correlations alone deliver the branch state.
pub fn conditioned_state(
    outcome: Outcome,
    input: InputState,
    noise: &NoiseModel,
    interfered: bool,
) -> Result<DensityMatrix> {
    let target = target_state(outcome, input)?;
    let mixed = DensityMatrix::maximally_mixed(1)?;
    if !interfered && input.class() == FidelityClass::Perpendicular {
        return Ok(mixed);
    }
    target.projector().mix(&mixed, noise.p_ent * noise.p_a)
}

/// Logical-to-analyser map applied to both photons.
fn photon_basis_change() -> Operator {
    let h = Operator::hadamard();
    h.kron(&Operator::identity(2)).kron(&h)
}

/// Joint `(A′, B, C)` state with both photons in the analyser basis.
pub fn joint_state(input: InputState, noise: &NoiseModel) -> Result<DensityMatrix> {
    let logical = prepare_input(input, noise)?.tensor(&prepare_entangled(noise)?)?;
    Ok(photon_basis_change().conjugate(&logical))
}

/// Polarization state of the two photons, `Tr_B`, order `(A′, C)`.
pub fn photon_pair_state(joint: &DensityMatrix) -> Result<DensityMatrix> {
    partial_trace(joint, &[1])
}

/// Receiver state after a two-photon detection with Kraus row `operator` on
/// `(A′, C)`; `None` if the detection has zero probability.
pub fn herald_receiver(joint: &DensityMatrix, operator: &[C64; 4]) -> Option<DensityMatrix> {
    let mut out = [Complex::new(0.0, 0.0); 4];
    for a in 0..2 {
        for c in 0..2 {
            let k = operator[2 * a + c];
            if k == C64::new(0.0, 0.0) {
                continue;
            }
            for a2 in 0..2 {
                for c2 in 0..2 {
                    let k2 = operator[2 * a2 + c2].conj();
                    if k2 == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for b in 0..2 {
                        for b2 in 0..2 {
                            out[2 * b + b2] += k * joint.get(a * 4 + b * 2 + c, a2 * 4 + b2 * 2 + c2) * k2;
                        }
                    }
                }
            }
        }
    }
    normalize_qubit(out)
}

/// Which photon produced a lone detector click.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Photon {
    Sender,
    Receiver,
}

/// Receiver state when only one photon is detected, in analyser polarization
/// `pol`, and the other is lost.
pub fn herald_single(joint: &DensityMatrix, photon: Photon, pol: usize) -> Option<DensityMatrix> {
    let mut out = [Complex::new(0.0, 0.0); 4];
    for other in 0..2 {
        let idx = |b: usize| match photon {
            Photon::Sender => pol * 4 + b * 2 + other,
            Photon::Receiver => other * 4 + b * 2 + pol,
        };
        for b in 0..2 {
            for b2 in 0..2 {
                out[2 * b + b2] += joint.get(idx(b), idx(b2));
            }
        }
    }
    normalize_qubit(out)
}

/// Receiver state with no information from the photons.
pub fn receiver_marginal(joint: &DensityMatrix) -> Result<DensityMatrix> {
    partial_trace(joint, &[0, 2])
}

fn normalize_qubit(raw: [C64; 4]) -> Option<DensityMatrix> {
    let tr = raw[0].re + raw[3].re;
    if !(tr > 1e-300) {
        return None;
    }
    // Restore exact Hermiticity after rounding.
    let off = (raw[2] + raw[1].conj()) * 0.5;
    let data = vec![C64::new(raw[0].re / tr, 0.0), off.conj() / tr, off / tr, C64::new(raw[3].re / tr, 0.0)];
    Some(DensityMatrix::from_raw(1, data))
}

/// Branch label for a heralding outcome; re-exported for callers that only
/// see detection results.
pub fn heralded_label(outcome: Outcome) -> Option<BellLabel> {
    outcome.bell_label()
}
