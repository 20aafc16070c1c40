//! Analytic complex-multiplication (CM) cost models.
//!
//! The closed forms contain halves and thirds (e.g. β³/2, 2β/3), so counts
//! are held exactly as integer multiples of one sixth of a CM. All cost
//! bookkeeping in the equalizers uses [`CmCount`]; conversion to f64 happens
//! only at reporting time.

use crate::error::{AfdmError, Result};

/// An exact CM count in units of 1/6 CM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct CmCount {
    sixths: u128,
}

impl CmCount {
    pub fn zero() -> Self {
        Self { sixths: 0 }
    }

    pub fn from_sixths(sixths: u128) -> Self {
        Self { sixths }
    }

    pub fn from_cms(cms: u128) -> Self {
        Self { sixths: cms * 6 }
    }

    pub fn sixths(&self) -> u128 {
        self.sixths
    }

    pub fn as_f64(&self) -> f64 {
        self.sixths as f64 / 6.0
    }

    /// Exact textual form: integer when exact, otherwise "sixths/6".
    pub fn to_exact_string(&self) -> String {
        if self.sixths % 6 == 0 {
            format!("{}", self.sixths / 6)
        } else {
            format!("{}/6", self.sixths)
        }
    }
}

impl std::ops::Add for CmCount {
    type Output = CmCount;
    fn add(self, rhs: CmCount) -> CmCount {
        CmCount { sixths: self.sixths + rhs.sixths }
    }
}

impl std::ops::AddAssign for CmCount {
    fn add_assign(&mut self, rhs: CmCount) {
        self.sixths += rhs.sixths;
    }
}

impl std::ops::Mul<u128> for CmCount {
    type Output = CmCount;
    fn mul(self, rhs: u128) -> CmCount {
        CmCount { sixths: self.sixths * rhs }
    }
}

impl std::fmt::Display for CmCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

/// Per-scheme CM model for frame length N, total band approximation width β
/// (odd), and alphabet size |X|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityModel {
    pub n: usize,
    pub beta: usize,
    pub alphabet_size: usize,
    /// Stage-1 banded LMMSE + error variances:
    /// η₀ = N(3β²+11β+5/2) − β³/2 − 3β² − 2β/3.
    pub eta0: CmCount,
    /// Soft iteration:
    /// η_soft = 2N·log₂N + (N/12)(2β³+45β²+109β) + 11N + (17N/4)|X|.
    pub eta_soft: CmCount,
    /// Hard-fallback iteration: η_hard = 2N·log₂N + N(2β+7+|X|/2).
    pub eta_hard: CmCount,
}

impl ComplexityModel {
    /// Total CMs for a recorded iteration split:
    /// η₀ + i_hard·η_hard + i_soft·η_soft.
    pub fn total(&self, i_soft: usize, i_hard: usize) -> CmCount {
        self.eta0 + self.eta_hard * i_hard as u128 + self.eta_soft * i_soft as u128
    }
}

fn log2_exact(n: usize) -> Result<u128> {
    if !n.is_power_of_two() {
        return Err(AfdmError::InvalidParameter(format!(
            "CM formulas use log2(N); N must be a power of two, got {n}"
        )));
    }
    Ok(n.trailing_zeros() as u128)
}

pub fn complexity_model(n: usize, beta: usize, alphabet_size: usize) -> Result<ComplexityModel> {
    if beta % 2 == 0 || beta == 0 {
        return Err(AfdmError::InvalidParameter(format!("β must be odd and positive, got {beta}")));
    }
    if n < 2 {
        return Err(AfdmError::InvalidParameter("N must be at least 2".into()));
    }
    let log2n = log2_exact(n)?;
    let (nn, b, x) = (n as i128, beta as i128, alphabet_size as i128);

    let eta0_sixths = 6 * nn * (3 * b * b + 11 * b) + 15 * nn - 3 * b * b * b - 18 * b * b - 4 * b;
    debug_assert!(eta0_sixths > 0);

    // N is a power of two ≥ 2, so the N/2 terms stay integral
    let eta_soft_sixths = 12 * nn * log2n as i128
        + (nn / 2) * (2 * b * b * b + 45 * b * b + 109 * b)
        + 66 * nn
        + 51 * nn * x / 2;

    let eta_hard_sixths = 12 * nn * log2n as i128 + 6 * nn * (2 * b + 7) + 3 * nn * x;

    Ok(ComplexityModel {
        n,
        beta,
        alphabet_size,
        eta0: CmCount::from_sixths(eta0_sixths as u128),
        eta_soft: CmCount::from_sixths(eta_soft_sixths as u128),
        eta_hard: CmCount::from_sixths(eta_hard_sixths as u128),
    })
}

/// Cost model for the dense full-block LMMSE stage 1 (Gram product,
/// Cholesky, diagonal of the inverse, solves): N³ + N³/3 + N³/2 + 4N².
pub fn eta_full_dense(n: usize) -> CmCount {
    let nn = n as u128;
    CmCount::from_sixths(11 * nn * nn * nn + 24 * nn * nn)
}

/// One DAFT-domain transform pair (2N·log₂N CMs), the demapping cost added
/// to stage-1-only equalization. log₂N rounds up for non-power-of-two N.
pub fn eta_transform_pair(n: usize) -> CmCount {
    let log2n = (usize::BITS - (n.max(2) - 1).leading_zeros()) as u128;
    CmCount::from_sixths(12 * n as u128 * log2n)
}
