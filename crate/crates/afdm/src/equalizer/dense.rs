//! Dense full-block LMMSE: the O(N³) reference and the exact stage-1 used
//! by the full-lmmse scheme.

use num_complex::Complex64;

use crate::banded::CyclicBandedMatrix;
use crate::channel::{ChannelMatrix, Domain};
use crate::equalizer::complexity::eta_full_dense;
use crate::equalizer::stage1::{clamp_var, stage1_banded_lmmse, Stage1Output};
use crate::equalizer::{chol_flat, chol_solve_flat};
use crate::error::{AfdmError, Result};
use crate::mat::CMat;
use crate::transforms::dft_unitary;

/// Full-block LMMSE ŝ = Hᴴ(HHᴴ+σ²I)⁻¹r via a dense Cholesky solve.
/// Applicable in any domain; O(N³).
pub fn full_block_lmmse(
    h: &ChannelMatrix,
    r: &[Complex64],
    sigma2: f64,
) -> Result<Vec<Complex64>> {
    let n = h.n();
    assert_eq!(r.len(), n, "full_block_lmmse: length mismatch");
    if sigma2 < 0.0 {
        return Err(AfdmError::InvalidParameter("sigma2 must be nonnegative".into()));
    }
    let mut g = h.entries.matmul(&h.entries.adjoint());
    for i in 0..n {
        g[(i, i)] += sigma2;
    }
    chol_flat(g.data_mut(), n)?;
    let mut u = r.to_vec();
    chol_solve_flat(g.data(), n, &mut u);
    Ok(h.entries.adjoint_mul_vec(&u))
}

/// Dense LMMSE in the Gram form ŝ = (HᴴH+σ²I)⁻¹Hᴴr, with the exact
/// per-symbol error variances e[n] = σ²·[(HᴴH+σ²I)⁻¹]_{nn}.
pub fn dense_lmmse_with_variances(
    h: &CMat,
    r: &[Complex64],
    sigma2: f64,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let n = h.nrows();
    if sigma2 <= 0.0 {
        return Err(AfdmError::InvalidParameter("dense LMMSE variances require sigma2 > 0".into()));
    }
    let mut a = h.adjoint().matmul(h);
    for i in 0..n {
        a[(i, i)] += sigma2;
    }
    chol_flat(a.data_mut(), n)?;
    let l = a.data();
    let mut s_hat = h.adjoint_mul_vec(r);
    chol_solve_flat(l, n, &mut s_hat);

    // [(A)⁻¹]_{nn} = ‖L⁻¹e_n‖²; forward-solve from row n down.
    let mut err = Vec::with_capacity(n);
    let mut y = vec![Complex64::ZERO; n];
    for n0 in 0..n {
        let mut norm = 0.0;
        for i in n0..n {
            let mut acc = if i == n0 { Complex64::ONE } else { Complex64::ZERO };
            for k in n0..i {
                acc -= l[i * n + k] * y[k];
            }
            y[i] = acc / l[i * n + i];
            norm += y[i].norm_sqr();
        }
        err.push(clamp_var(sigma2 * norm));
    }
    Ok((s_hat, err))
}

/// Exact band of a matrix: the smallest (lo, hi) covering all nonzero
/// entries in the centered cyclic-lag sense, or None when no centered band
/// narrower than the matrix exists.
fn exact_band(m: &CMat) -> Option<(usize, usize)> {
    let n = m.nrows();
    let half = n as i64 / 2;
    let mut lo = 0i64;
    let mut hi = 0i64;
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] != Complex64::ZERO {
                let mut lag = (i as i64 - j as i64).rem_euclid(n as i64);
                if lag > half {
                    lag -= n as i64;
                }
                lo = lo.max(lag);
                hi = hi.max(-lag);
            }
        }
    }
    if lo + hi < n as i64 {
        Some((lo as usize, hi as usize))
    } else {
        None
    }
}

/// Stage 1 of the full-lmmse scheme: the exact full-block LMMSE estimate.
///
/// Computed in the time domain, where the simulated channel matrix is
/// exactly cyclically banded (truncated composition filter), with the
/// partitioned cyclic Cholesky over the full exact band; by unitary
/// equivalence this is identical to the dense frequency-domain estimator.
/// Falls back to the dense Gram solve when the band does not fit the
/// partitioned solver. The estimate is returned in the frequency domain;
/// error variances keep their time-domain ordering (only their mean feeds
/// stage 2). The CM count is the dense full-block model.
pub fn full_lmmse_stage1(
    h_td: &ChannelMatrix,
    r_td: &[Complex64],
    sigma2: f64,
) -> Result<Stage1Output> {
    if h_td.domain != Domain::Time {
        return Err(AfdmError::DomainMismatch { expected: Domain::Time, got: h_td.domain });
    }
    let n = h_td.n();
    let banded = exact_band(&h_td.entries).and_then(|(lo, hi)| {
        if 2 * (lo + hi + 1) < n {
            CyclicBandedMatrix::from_dense(&h_td.entries, lo, hi).ok()
        } else {
            None
        }
    });
    let (s_td, err_var) = match banded {
        Some(hb) => {
            let out = stage1_banded_lmmse(&hb, r_td, sigma2)?;
            (out.s_hat, out.err_var)
        }
        None => dense_lmmse_with_variances(&h_td.entries, r_td, sigma2)?,
    };
    Ok(Stage1Output { s_hat: dft_unitary(&s_td), err_var, cm: eta_full_dense(n) })
}
