//! Standard errors for proportions and count ratios.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdErr {
    pub value: f64,
    /// `p̂ ∈ {0, 1}`: the binomial formula collapses to zero.
    pub degenerate: bool,
}

/// `√(p̂(1 − p̂)/n)`. Returns `None` for `n == 0`.
pub fn binomial_stderr(p_hat: f64, n: u64) -> Option<StdErr> {
    if n == 0 {
        return None;
    }
    let p = p_hat.clamp(0.0, 1.0);
    Some(StdErr { value: libm::sqrt(p * (1.0 - p) / n as f64), degenerate: p == 0.0 || p == 1.0 })
}

/// Ratio `num/den` of two independent Poisson counts with its propagated
/// error `r·√(1/num + 1/den)` (zero when `num == 0`). `den` must be positive.
pub fn count_ratio(num: u64, den: u64) -> (f64, f64) {
    debug_assert!(den > 0);
    let (n, d) = (num as f64, den as f64);
    let r = n / d;
    let err = if num == 0 { 0.0 } else { r * libm::sqrt(1.0 / n + 1.0 / d) };
    (r, err)
}

/// Standard error of the mean of `k` independent estimates.
pub fn mean_stderr(errs: &[f64]) -> f64 {
    if errs.is_empty() {
        return 0.0;
    }
    libm::sqrt(errs.iter().map(|e| e * e).sum::<f64>()) / errs.len() as f64
}
