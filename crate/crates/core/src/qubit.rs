//! Dense linear algebra for one to three qubits.
//!
//! Basis convention: index 0 is `|↓⟩`, index 1 is `|↑⟩`, and qubit 0 is the
//! most significant (leftmost) factor of a tensor product. The photonic
//! detection basis of the Bell-state analyser is the x basis of that logical
//! qubit: `|H⟩ = |↓_x⟩ = (|↓⟩ + |↑⟩)/√2` and `|V⟩ = |↑_x⟩ = (|↓⟩ − |↑⟩)/√2`.
//! Atomic states written in `↓/↑` are mapped onto photons so that the x-basis
//! inputs become the H/V eigenpolarizations of the analyser.
//!
//! Global phases carry no meaning; comparisons go through projectors or
//! `|⟨a|b⟩|`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::C64;

pub const MAX_QUBITS: usize = 3;
pub(crate) const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

fn check_qubits(n: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::QubitCount(n))
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A normalized state vector over `2^n` amplitudes.
#[derive(Clone, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
    n: usize,
}

impl PureState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let n = qubits_for_len(amps.len())?;
        let norm = libm::sqrt(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps, n })
    }

    /// Normalizes `amps` instead of rejecting them.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n = qubits_for_len(amps.len())?;
        let norm = libm::sqrt(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(Self { amps, n })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1 << n;
        if index >= dim {
            return Err(Error::Dimension { expected: dim, found: index + 1 });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps, n })
    }

    /// `α|↓⟩ + β|↑⟩`.
    pub fn qubit(alpha: C64, beta: C64) -> Result<Self> {
        Self::new(vec![alpha, beta])
    }

    pub fn down() -> Self {
        Self { amps: vec![c(1.0, 0.0), c(0.0, 0.0)], n: 1 }
    }

    pub fn up() -> Self {
        Self { amps: vec![c(0.0, 0.0), c(1.0, 0.0)], n: 1 }
    }

    /// Detection-basis horizontal polarization, `|↓_x⟩`.
    pub fn horizontal() -> Self {
        Self { amps: vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], n: 1 }
    }

    /// Detection-basis vertical polarization, `|↑_x⟩`.
    pub fn vertical() -> Self {
        Self { amps: vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)], n: 1 }
    }

    /// `(|H⟩ + i|V⟩)/√2`.
    pub fn circular_left() -> Self {
        Self::superpose(&Self::horizontal(), &Self::vertical(), c(0.0, 1.0))
    }

    /// `(|H⟩ − i|V⟩)/√2`.
    pub fn circular_right() -> Self {
        Self::superpose(&Self::horizontal(), &Self::vertical(), c(0.0, -1.0))
    }

    fn superpose(a: &Self, b: &Self, phase: C64) -> Self {
        let amps = a.amps.iter().zip(&b.amps).map(|(x, y)| (x + phase * y) * FRAC_1_SQRT_2).collect();
        Self { amps, n: a.n }
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.inner(other).norm()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let amps = self.amps.iter().flat_map(|a| other.amps.iter().map(move |b| a * b)).collect();
        Ok(Self { amps, n })
    }

    pub fn projector(&self) -> DensityMatrix {
        let dim = self.dim();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix { data, n: self.n }
    }

    /// Whether the two states agree up to a global phase.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        self.n == other.n && (self.overlap(other) - 1.0).abs() <= tol
    }
}

impl fmt::Debug for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PureState").field("n", &self.n).field("amps", &self.amps).finish()
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    match len {
        2 => Ok(1),
        4 => Ok(2),
        8 => Ok(3),
        _ => Err(Error::Dimension { expected: 2, found: len }),
    }
}

/// Square complex matrix acting on `n` qubits, row-major.
#[derive(Clone, PartialEq, Debug)]
pub struct Operator {
    data: Vec<C64>,
    dim: usize,
}

impl Operator {
    pub fn from_rows(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, found: data.len() });
        }
        Ok(Self { data, dim })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0, 0.0);
        }
        Self { data, dim }
    }

    /// Hadamard: maps the logical basis onto the analyser's H/V basis.
    pub fn hadamard() -> Self {
        let h = FRAC_1_SQRT_2;
        Self { data: vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)], dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let d = self.dim;
        debug_assert_eq!(d, rhs.dim);
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        Self { data, dim: d }
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        Self { data, dim: d }
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        let (da, db) = (self.dim, rhs.dim);
        let d = da * db;
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.data[i * da + j];
                for k in 0..db {
                    for l in 0..db {
                        data[(i * db + k) * d + (j * db + l)] = a * rhs.data[k * db + l];
                    }
                }
            }
        }
        Self { data, dim: d }
    }

    pub fn apply(&self, state: &PureState) -> PureState {
        let d = self.dim;
        debug_assert_eq!(d, state.dim());
        let amps = (0..d).map(|i| (0..d).map(|j| self.data[i * d + j] * state.amps[j]).sum()).collect();
        PureState { amps, n: state.n }
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, rho: &DensityMatrix) -> DensityMatrix {
        let m = Operator { data: rho.data.clone(), dim: rho.dim() };
        let out = self.matmul(&m).matmul(&self.adjoint());
        DensityMatrix { data: out.data, n: rho.n }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = self.matmul(&self.adjoint());
        let id = Operator::identity(self.dim);
        prod.data.iter().zip(&id.data).all(|(a, b)| (a - b).norm() <= tol)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..d).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Whether `self = e^{iθ} other` for some θ.
    pub fn equals_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let Some((idx, pivot)) = other.data.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())) else {
            return true;
        };
        if pivot.norm() == 0.0 {
            return self.data.iter().all(|a| a.norm() <= tol);
        }
        let phase = self.data[idx] / pivot;
        if (phase.norm() - 1.0).abs() > tol {
            return false;
        }
        self.data.iter().zip(&other.data).all(|(a, b)| (a - phase * b).norm() <= tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Operator {
        let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
        let data = match self {
            Pauli::I => vec![o, z, z, o],
            Pauli::X => vec![z, o, o, z],
            Pauli::Y => vec![z, c(0.0, -1.0), c(0.0, 1.0), z],
            Pauli::Z => vec![o, z, z, -o],
        };
        Operator { data, dim: 2 }
    }
}

/// Density matrix over `2^n` dimensions, row-major.
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    data: Vec<C64>,
    n: usize,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMatrix").field("n", &self.n).field("data", &self.data).finish()
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(n: usize, data: Vec<C64>) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1 << n;
        if data.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, found: data.len() });
        }
        let rho = Self { data, n };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(n: usize, data: Vec<C64>) -> Self {
        Self { data, n }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { data, n })
    }

    /// Single-qubit state `½(I + s·σ)`; `s` must lie in the unit ball.
    pub fn from_bloch(s: [f64; 3]) -> Result<Self> {
        let len = libm::sqrt(s.iter().map(|x| x * x).sum::<f64>());
        if len > 1.0 + NORM_TOL {
            return Err(Error::NotPositive);
        }
        let data = vec![
            c(0.5 * (1.0 + s[2]), 0.0),
            c(0.5 * s[0], -0.5 * s[1]),
            c(0.5 * s[0], 0.5 * s[1]),
            c(0.5 * (1.0 - s[2]), 0.0),
        ];
        Ok(Self { data, n: 1 })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let mut dev = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Trace(tr));
        }
        if !self.is_positive_semidefinite(PSD_TOL) {
            return Err(Error::NotPositive);
        }
        Ok(())
    }

    /// Cholesky of `ρ + tol·I`; succeeds iff every eigenvalue exceeds `−tol`.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let d = self.dim();
        let mut l = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            let mut diag = self.get(j, j).re + tol;
            for k in 0..j {
                diag -= l[j * d + k].norm_sqr();
            }
            if diag <= 0.0 {
                return false;
            }
            let ljj = libm::sqrt(diag);
            l[j * d + j] = C64::new(ljj, 0.0);
            for i in (j + 1)..d {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k].conj();
                }
                l[i * d + j] = s / ljj;
            }
        }
        true
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ.
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &PureState) -> f64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..d {
                row += self.data[i * d + j] * psi.amps[j];
            }
            acc += psi.amps[i].conj() * row;
        }
        acc.re
    }

    pub fn expectation_op(&self, op: &Operator) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += self.data[i * d + j] * op.data[j * d + i];
            }
        }
        acc
    }

    /// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a single-qubit state.
    pub fn bloch(&self) -> [f64; 3] {
        debug_assert_eq!(self.n, 1);
        [2.0 * self.get(1, 0).re, 2.0 * self.get(1, 0).im, (self.get(0, 0) - self.get(1, 1)).re]
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let a = Operator { data: self.data.clone(), dim: self.dim() };
        let b = Operator { data: other.data.clone(), dim: other.dim() };
        Ok(Self { data: a.kron(&b).data, n })
    }

    /// `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Probability(w));
        }
        if self.n != other.n {
            return Err(Error::Dimension { expected: self.data.len(), found: other.data.len() });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * w + b * (1.0 - w)).collect();
        Ok(Self { data, n: self.n })
    }

    /// Largest entrywise deviation from `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `⟨φ|ρ|φ⟩`, clamped to `[0, 1]` against rounding.
pub fn fidelity(rho: &DensityMatrix, phi: &PureState) -> f64 {
    rho.expectation(phi).clamp(0.0, 1.0)
}

/// Convex mixture `p|ψ⟩⟨ψ| + (1 − p) I/d`.
pub fn depolarize(state: &PureState, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Probability(p));
    }
    let proj = state.projector();
    let mixed = DensityMatrix::maximally_mixed(state.qubits())?;
    proj.mix(&mixed, p)
}

/// Traces out the qubits listed in `trace_out`. An empty list returns the
/// input unchanged; tracing out every qubit is rejected.
pub fn partial_trace(rho: &DensityMatrix, trace_out: &[usize]) -> Result<DensityMatrix> {
    let n = rho.qubits();
    let mut mask = 0usize;
    for &q in trace_out {
        if q >= n || mask & (1 << q) != 0 {
            return Err(Error::Subsystem(trace_out.to_vec()));
        }
        mask |= 1 << q;
    }
    if trace_out.is_empty() {
        return Ok(rho.clone());
    }
    let keep: Vec<usize> = (0..n).filter(|q| mask & (1 << q) == 0).collect();
    if keep.is_empty() {
        return Err(Error::Subsystem(trace_out.to_vec()));
    }
    let gone: Vec<usize> = (0..n).filter(|q| mask & (1 << q) != 0).collect();
    let (nk, ng) = (keep.len(), gone.len());
    let dk = 1usize << nk;
    let d = rho.dim();

    // Bit position of qubit q inside a full index (qubit 0 is the MSB).
    let bit = |q: usize| n - 1 - q;
    let compose = |k: usize, g: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in keep.iter().enumerate() {
            if (k >> (nk - 1 - pos)) & 1 == 1 {
                idx |= 1 << bit(q);
            }
        }
        for (pos, &q) in gone.iter().enumerate() {
            if (g >> (ng - 1 - pos)) & 1 == 1 {
                idx |= 1 << bit(q);
            }
        }
        idx
    };

    let mut data = vec![C64::new(0.0, 0.0); dk * dk];
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for g in 0..(1usize << ng) {
                acc += rho.data[compose(i, g) * d + compose(j, g)];
            }
            data[i * dk + j] = acc;
        }
    }
    Ok(DensityMatrix { data, n: nk })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [BellLabel::PhiPlus, BellLabel::PhiMinus, BellLabel::PsiPlus, BellLabel::PsiMinus];

    fn index(self) -> usize {
        match self {
            BellLabel::PhiPlus => 0,
            BellLabel::PhiMinus => 1,
            BellLabel::PsiPlus => 2,
            BellLabel::PsiMinus => 3,
        }
    }
}

/// Four Bell states built from an orthonormal single-qubit pair `(h, v)`:
/// `Φ± = (|hh⟩ ± |vv⟩)/√2`, `Ψ± = (|hv⟩ ± |vh⟩)/√2`.
#[derive(Clone, Debug)]
pub struct BellBasis {
    states: [PureState; 4],
}

impl BellBasis {
    pub fn from_pair(h: &PureState, v: &PureState) -> Result<Self> {
        if h.qubits() != 1 || v.qubits() != 1 {
            return Err(Error::QubitCount(h.qubits().max(v.qubits())));
        }
        let hh = h.tensor(h)?;
        let vv = v.tensor(v)?;
        let hv = h.tensor(v)?;
        let vh = v.tensor(h)?;
        let comb = |a: &PureState, b: &PureState, sign: f64| {
            PureState::normalized(a.amps.iter().zip(&b.amps).map(|(x, y)| x + y * sign).collect())
        };
        Ok(Self { states: [comb(&hh, &vv, 1.0)?, comb(&hh, &vv, -1.0)?, comb(&hv, &vh, 1.0)?, comb(&hv, &vh, -1.0)?] })
    }

    /// Bell states in the analyser's H/V basis.
    pub fn detection() -> Self {
        Self::from_pair(&PureState::horizontal(), &PureState::vertical()).expect("H and V are single-qubit states")
    }

    /// Bell states in the logical `↓/↑` basis.
    pub fn computational() -> Self {
        Self::from_pair(&PureState::down(), &PureState::up()).expect("basis states are single-qubit")
    }

    pub fn state(&self, label: BellLabel) -> &PureState {
        &self.states[label.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BellLabel, &PureState)> {
        BellLabel::ALL.into_iter().map(move |l| (l, self.state(l)))
    }
}

/// `|Ψ⁻⟩ = (|↓↑⟩ − |↑↓⟩)/√2`, the singlet. It is the same ray in every
/// product basis, so it also equals the detection-basis `Ψ⁻`.
pub fn singlet() -> PureState {
    let h = FRAC_1_SQRT_2;
    PureState { amps: vec![c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)], n: 2 }
}

/// One term of `|φ⟩_A |Ψ⁻⟩_BC = Σ_k amplitude_k |Bell_k⟩_AC |branch_k⟩_B`.
#[derive(Clone, Debug)]
pub struct BellBranch {
    pub label: BellLabel,
    pub amplitude: C64,
    pub state: PureState,
}

impl BellBranch {
    pub fn probability(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// Expands `|φ⟩_A ⊗ |Ψ⁻⟩_BC` over the detection Bell basis of qubits A and C.
///
/// Branch states are `σxσz|φ⟩`, `σz|φ⟩`, `σx|φ⟩` and `|φ⟩` for `Φ⁺`, `Φ⁻`,
/// `Ψ⁺`, `Ψ⁻`; each amplitude has modulus ½ and carries the relative sign.
pub fn bell_decompose(phi: &PureState) -> Result<[BellBranch; 4]> {
    if phi.qubits() != 1 {
        return Err(Error::QubitCount(phi.qubits()));
    }
    let norm = phi.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let basis = BellBasis::detection();
    let joint = phi.tensor(&singlet())?; // order A, B, C
    let branch = |label: BellLabel| -> BellBranch {
        let bell = basis.state(label);
        // ⟨Bell|_AC contracted against the A and C slots.
        let mut out = [C64::new(0.0, 0.0); 2];
        for a in 0..2 {
            for cc in 0..2 {
                let coeff = bell.amps[a * 2 + cc].conj();
                for (b, o) in out.iter_mut().enumerate() {
                    *o += coeff * joint.amps[a * 4 + b * 2 + cc];
                }
            }
        }
        let expected = branch_operator(label).apply(phi);
        let amplitude = expected.inner(&PureState { amps: out.to_vec(), n: 1 });
        BellBranch { label, amplitude, state: expected }
    };
    Ok(BellLabel::ALL.map(branch))
}

/// Operator that carries `|φ⟩` to the receiver's branch state for `label`.
pub fn branch_operator(label: BellLabel) -> Operator {
    match label {
        BellLabel::PhiPlus => Pauli::X.matrix().matmul(&Pauli::Z.matrix()),
        BellLabel::PhiMinus => Pauli::Z.matrix(),
        BellLabel::PsiPlus => Pauli::X.matrix(),
        BellLabel::PsiMinus => Pauli::I.matrix(),
    }
}

/// Unitary that undoes the branch rotation for a detected Bell state.
pub fn correction_for(label: BellLabel) -> Operator {
    match label {
        BellLabel::PsiMinus => Pauli::I.matrix(),
        BellLabel::PsiPlus => Pauli::X.matrix(),
        BellLabel::PhiMinus => Pauli::Z.matrix(),
        BellLabel::PhiPlus => Pauli::Z.matrix().matmul(&Pauli::X.matrix()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_qubit(seed: u64) -> PureState {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<C64> = (0..2).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        PureState::normalized(v).unwrap()
    }

    #[test]
    fn basis_product() {
        let s = PureState::down().tensor(&PureState::down()).unwrap();
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn tensor_rejects_four_qubits() {
        let two = singlet();
        assert_eq!(two.tensor(&two).unwrap_err(), Error::TooManyQubits(4));
    }

    #[test]
    fn down_times_singlet_has_minus_half_down_in_psi_minus() {
        // |↓⟩|Ψ⁻⟩ expanded by hand: the Ψ⁻_AC component is −½|↓⟩_B.
        let branches = bell_decompose(&PureState::down()).unwrap();
        let psi = &branches[3];
        assert_eq!(psi.label, BellLabel::PsiMinus);
        assert_abs_diff_eq!(psi.probability(), 0.25, epsilon = 1e-15);
        assert!(psi.state.same_ray(&PureState::down(), 1e-12));
        assert_abs_diff_eq!(psi.amplitude.re, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        let bad = PureState { amps: vec![c(1.0, 0.0), c(1.0, 0.0)], n: 1 };
        assert!(matches!(bell_decompose(&bad), Err(Error::NotNormalized { .. })));
        assert!(PureState::new(vec![c(1.0, 0.0), c(0.1, 0.0)]).is_err());
    }

    #[test]
    fn corrections_recover_input() {
        for seed in 0..20 {
            let phi = random_qubit(seed);
            for b in bell_decompose(&phi).unwrap() {
                let fixed = correction_for(b.label).apply(&b.state);
                assert_abs_diff_eq!(fixed.overlap(&phi), 1.0, epsilon = 1e-12);
            }
        }
        assert!(correction_for(BellLabel::PsiMinus).equals_up_to_phase(&Operator::identity(2), 0.0));
        assert!(correction_for(BellLabel::PsiPlus).equals_up_to_phase(&Pauli::X.matrix(), 0.0));
    }

    #[test]
    fn fidelity_limits() {
        let phi = random_qubit(3);
        assert_abs_diff_eq!(fidelity(&phi.projector(), &phi), 1.0, epsilon = 1e-12);
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert_abs_diff_eq!(fidelity(&mixed, &phi), 0.5, epsilon = 1e-15);
        let rho = depolarize(&phi, 0.9).unwrap();
        assert_abs_diff_eq!(fidelity(&rho, &phi), 0.95, epsilon = 1e-12);
    }

    #[test]
    fn depolarize_limits_and_range() {
        let phi = random_qubit(5);
        assert!(depolarize(&phi, 1.0).unwrap().distance(&phi.projector()) < 1e-15);
        let full = depolarize(&singlet(), 0.0).unwrap();
        assert!(full.distance(&DensityMatrix::maximally_mixed(2).unwrap()) < 1e-15);
        assert_eq!(depolarize(&phi, 1.5).unwrap_err(), Error::Probability(1.5));
        assert!(depolarize(&phi, -0.1).is_err());
    }

    #[test]
    fn entanglement_fidelity_from_p_ent() {
        let p_ent = 4.0 / 3.0 * (0.89 - 0.25);
        let rho = depolarize(&singlet(), p_ent).unwrap();
        assert_abs_diff_eq!(fidelity(&rho, &singlet()), 0.89, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_cases() {
        let s = singlet().projector();
        let half = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(partial_trace(&s, &[0]).unwrap().distance(&half) < 1e-15);
        assert!(partial_trace(&s, &[1]).unwrap().distance(&half) < 1e-15);
        assert_eq!(partial_trace(&s, &[]).unwrap(), s);
        assert!(partial_trace(&s, &[2]).is_err());
        assert!(partial_trace(&s, &[0, 0]).is_err());
        assert!(partial_trace(&s, &[0, 1]).is_err());
    }

    #[test]
    fn partial_trace_of_product_keeps_factor() {
        let a = depolarize(&random_qubit(1), 0.7).unwrap();
        let b = depolarize(&random_qubit(2), 0.4).unwrap();
        let c3 = random_qubit(9).projector();
        let abc = a.tensor(&b).unwrap().tensor(&c3).unwrap();
        assert!(partial_trace(&abc, &[0, 2]).unwrap().distance(&b) < 1e-14);
        assert!(partial_trace(&abc, &[1, 2]).unwrap().distance(&a) < 1e-14);
        assert!(partial_trace(&abc, &[0, 1]).unwrap().distance(&c3) < 1e-14);
    }

    #[test]
    fn pauli_properties() {
        for p in Pauli::ALL {
            let m = p.matrix();
            assert!(m.is_unitary(1e-15));
            assert!(m.is_hermitian(1e-15));
            if p != Pauli::I {
                assert_eq!(m.trace(), C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn bell_bases_are_orthonormal_and_maximally_entangled() {
        for basis in [BellBasis::detection(), BellBasis::computational()] {
            for (la, a) in basis.iter() {
                let reduced = partial_trace(&a.projector(), &[1]).unwrap();
                assert!(reduced.distance(&DensityMatrix::maximally_mixed(1).unwrap()) < 1e-12);
                for (lb, b) in basis.iter() {
                    let expect = if la == lb { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(a.overlap(b), expect, epsilon = 1e-12);
                }
            }
        }
        // Ψ⁻ is basis independent.
        assert!(BellBasis::detection().state(BellLabel::PsiMinus).same_ray(&singlet(), 1e-15));
    }

    #[test]
    fn validation_catches_bad_matrices() {
        let z = c(0.0, 0.0);
        assert!(matches!(DensityMatrix::new(1, vec![c(1.0, 0.0), c(0.0, 1.0), z, z]), Err(Error::NotHermitian(_))));
        assert!(matches!(DensityMatrix::new(1, vec![c(0.7, 0.0), z, z, c(0.7, 0.0)]), Err(Error::Trace(_))));
        assert_eq!(DensityMatrix::new(1, vec![c(1.5, 0.0), z, z, c(-0.5, 0.0)]).unwrap_err(), Error::NotPositive);
        assert!(DensityMatrix::new(1, vec![c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).is_ok());
    }

    #[test]
    fn bloch_round_trip() {
        let phi = random_qubit(11);
        let rho = phi.projector();
        let back = DensityMatrix::from_bloch(rho.bloch()).unwrap();
        assert!(back.distance(&rho) < 1e-14);
        assert_eq!(PureState::down().projector().bloch(), [0.0, 0.0, 1.0]);
        let x = PureState::horizontal().projector().bloch();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
    }
}
