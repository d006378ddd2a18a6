//! Single-qubit state tomography from counts in three mutually unbiased
//! bases.

use rand::Rng;

use crate::error::{Error, Result};
use crate::qubit::DensityMatrix;
use crate::stats;

/// Measurement basis, named by the Pauli axis it resolves. `X` is the
/// analyser's H/V basis, `Y` the circular basis, `Z` the `↓/↑` basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn axis(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
            Basis::Z => 2,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Basis::X => 'x',
            Basis::Y => 'y',
            Basis::Z => 'z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.letter() == c)
    }

    /// Samples a ±1 outcome (`true` for +1) of measuring `rho` along this axis.
    pub fn measure<R: Rng + ?Sized>(self, rho: &DensityMatrix, rng: &mut R) -> bool {
        let s = rho.bloch()[self.axis()];
        rng.random::<f64>() < 0.5 * (1.0 + s)
    }
}

/// `(N⁺, N⁻)` per basis, indexed by `Basis::axis`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BasisCounts {
    pub plus: [u64; 3],
    pub minus: [u64; 3],
}

impl BasisCounts {
    pub fn record(&mut self, basis: Basis, plus: bool) {
        if plus {
            self.plus[basis.axis()] += 1;
        } else {
            self.minus[basis.axis()] += 1;
        }
    }

    pub fn total(&self, basis: Basis) -> u64 {
        self.plus[basis.axis()] + self.minus[basis.axis()]
    }
}

impl FromIterator<(Basis, bool)> for BasisCounts {
    fn from_iter<I: IntoIterator<Item = (Basis, bool)>>(iter: I) -> Self {
        let mut counts = Self::default();
        for (b, r) in iter {
            counts.record(b, r);
        }
        counts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult {
    pub bloch: [f64; 3],
    pub rho: DensityMatrix,
    /// Standard error of each Bloch component.
    pub stderr: [f64; 3],
    pub counts: BasisCounts,
    /// The raw vector left the unit ball and was scaled back onto it.
    pub projected: bool,
}

/// Linear inversion `s_i = (N⁺ − N⁻)/(N⁺ + N⁻)` followed by radial
/// projection onto the Bloch ball.
pub fn reconstruct(counts: &BasisCounts) -> Result<TomographyResult> {
    let mut s = [0.0; 3];
    let mut err = [0.0; 3];
    for basis in Basis::ALL {
        let i = basis.axis();
        let n = counts.total(basis);
        if n == 0 {
            return Err(Error::EmptyBasis(basis.letter()));
        }
        let p_plus = counts.plus[i] as f64 / n as f64;
        s[i] = 2.0 * p_plus - 1.0;
        // s = 2p − 1, so its error is twice the binomial error of p.
        err[i] = 2.0 * stats::binomial_stderr(p_plus, n).map_or(0.0, |e| e.value);
    }
    let len = libm::sqrt(s.iter().map(|x| x * x).sum::<f64>());
    let projected = len > 1.0;
    if projected {
        for x in &mut s {
            *x /= len;
        }
    }
    let rho = DensityMatrix::from_bloch(s)?;
    Ok(TomographyResult { bloch: s, rho, stderr: err, counts: *counts, projected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{fidelity, PureState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn all_h_in_z_basis() {
        let counts = BasisCounts { plus: [50, 50, 100], minus: [50, 50, 0] };
        let t = reconstruct(&counts).unwrap();
        assert_eq!(t.bloch, [0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(fidelity(&t.rho, &PureState::down()), 1.0, epsilon = 1e-15);
        assert!(!t.projected);
    }

    #[test]
    fn projection_onto_ball() {
        let counts = BasisCounts { plus: [10, 10, 10], minus: [0, 0, 0] };
        let t = reconstruct(&counts).unwrap();
        assert!(t.projected);
        let len: f64 = t.bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_abs_diff_eq!(len, 1.0, epsilon = 1e-12);
        t.rho.validate().unwrap();
    }

    #[test]
    fn missing_basis_is_named() {
        let counts = BasisCounts { plus: [3, 0, 2], minus: [1, 0, 2] };
        assert_eq!(reconstruct(&counts).unwrap_err(), Error::EmptyBasis('y'));
    }
}
