//! Detection algorithms: banded block-Cholesky LMMSE (stage 1),
//! cross-domain iterative MMSE with hard-decision fallback (stage 2), the
//! dense full-block LMMSE reference, the time-domain two-stage comparator,
//! and analytic complexity models.

mod complexity;
mod dense;
mod stage1;
mod stage2;

pub use complexity::{
    complexity_model, eta_full_dense, eta_transform_pair, CmCount, ComplexityModel,
};
pub use dense::{dense_lmmse_with_variances, full_block_lmmse, full_lmmse_stage1};
pub use stage1::{cholesky_reconstruction_error, stage1_banded_lmmse, Stage1Output};
pub(crate) use stage2::window_source_half;
pub use stage2::{
    fd_prior, intermediate_daft_estimate, local_mmse_sweep, symbol_posteriors,
    td_two_stage_equalize, two_stage_equalize, two_stage_from_banded, two_stage_with_stage1,
    EqualizeResult, EqualizerOpts, StageDomain, SweepMode,
};

use crate::error::{AfdmError, Result};
use num_complex::Complex64;

/// In-place lower Cholesky of a Hermitian positive-definite matrix stored
/// row-major in a flat slice. The strict upper triangle is left untouched.
pub(crate) fn chol_flat(m: &mut [Complex64], dim: usize) -> Result<()> {
    debug_assert_eq!(m.len(), dim * dim);
    for j in 0..dim {
        let mut diag = m[j * dim + j].re;
        for k in 0..j {
            diag -= m[j * dim + k].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(AfdmError::NotPositiveDefinite);
        }
        let diag = diag.sqrt();
        m[j * dim + j] = Complex64::new(diag, 0.0);
        for i in j + 1..dim {
            let mut v = m[i * dim + j];
            for k in 0..j {
                v -= m[i * dim + k] * m[j * dim + k].conj();
            }
            m[i * dim + j] = v / diag;
        }
    }
    Ok(())
}

/// Solve L·Lᴴ·x = b in place given the factor from [`chol_flat`].
pub(crate) fn chol_solve_flat(l: &[Complex64], dim: usize, b: &mut [Complex64]) {
    debug_assert_eq!(l.len(), dim * dim);
    debug_assert_eq!(b.len(), dim);
    for i in 0..dim {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[i * dim + k] * b[k];
        }
        b[i] = acc / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut acc = b[i];
        for k in i + 1..dim {
            acc -= l[k * dim + i].conj() * b[k];
        }
        b[i] = acc / l[i * dim + i];
    }
}
