//! Cyclically banded complex matrices with compact diagonal storage.
//!
//! An N×N matrix is cyclically banded with lower half-bandwidth `lo` and
//! upper half-bandwidth `hi` when entry (i,j) can be nonzero only if the
//! centered cyclic lag i−j (wrapped into [−hi, lo]) exists, i.e. nonzeros
//! live on lo+hi+1 cyclic diagonals. Storage is diagonal-major and indexed
//! by column, so column windows and banded products stay contiguous.

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{AfdmError, Result};
use crate::mat::CMat;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBandedMatrix {
    n: usize,
    lo: usize,
    hi: usize,
    /// data[(d + hi)·n + col] holds entry (row, col) with row = (col + d) mod N,
    /// for d ∈ [−hi, lo].
    data: Vec<Complex64>,
}

impl CyclicBandedMatrix {
    pub fn zeros(n: usize, lo: usize, hi: usize) -> Result<Self> {
        if lo + hi >= n {
            return Err(AfdmError::InvalidParameter(format!(
                "band lo+hi = {} must be < N = {n} for unambiguous cyclic storage",
                lo + hi
            )));
        }
        Ok(Self { n, lo, hi, data: vec![Complex64::ZERO; (lo + hi + 1) * n] })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    /// Centered cyclic lag i−j in [−hi, lo], or None when (i,j) is outside
    /// the band.
    #[inline]
    fn lag(&self, row: usize, col: usize) -> Option<i64> {
        let raw = (row as i64 - col as i64).rem_euclid(self.n as i64);
        if raw <= self.lo as i64 {
            Some(raw)
        } else if raw >= self.n as i64 - self.hi as i64 {
            Some(raw - self.n as i64)
        } else {
            None
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        match self.lag(row, col) {
            Some(d) => self.data[(d + self.hi as i64) as usize * self.n + col],
            None => Complex64::ZERO,
        }
    }

    /// Mutable entry on cyclic diagonal `d` (row = (col+d) mod N).
    #[inline]
    pub fn diag_entry_mut(&mut self, d: i64, col: usize) -> &mut Complex64 {
        debug_assert!(-(self.hi as i64) <= d && d <= self.lo as i64);
        &mut self.data[(d + self.hi as i64) as usize * self.n + col]
    }

    #[inline]
    pub fn diag_entry(&self, d: i64, col: usize) -> Complex64 {
        debug_assert!(-(self.hi as i64) <= d && d <= self.lo as i64);
        self.data[(d + self.hi as i64) as usize * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        let d = self
            .lag(row, col)
            .expect("CyclicBandedMatrix::set outside the stored band");
        self.data[(d + self.hi as i64) as usize * self.n + col] = value;
    }

    /// Keep exactly the stored band of `m`.
    pub fn from_dense(m: &CMat, lo: usize, hi: usize) -> Result<Self> {
        assert_eq!(m.nrows(), m.ncols(), "from_dense: square matrices only");
        let mut out = Self::zeros(m.nrows(), lo, hi)?;
        let n = out.n;
        for d in -(hi as i64)..=(lo as i64) {
            for col in 0..n {
                let row = (col as i64 + d).rem_euclid(n as i64) as usize;
                *out.diag_entry_mut(d, col) = m[(row, col)];
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for d in -(self.hi as i64)..=(self.lo as i64) {
            for col in 0..self.n {
                let row = (col as i64 + d).rem_euclid(self.n as i64) as usize;
                m[(row, col)] = self.diag_entry(d, col);
            }
        }
        m
    }

    /// y = M x.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "mul_vec: length mismatch");
        let n = self.n;
        let mut y = vec![Complex64::ZERO; n];
        for d in -(self.hi as i64)..=(self.lo as i64) {
            let band = &self.data[(d + self.hi as i64) as usize * n..][..n];
            let shift = d.rem_euclid(n as i64) as usize;
            // row = col + shift for col < n−shift, wraps after
            for col in 0..n - shift {
                y[col + shift] += band[col] * x[col];
            }
            for col in n - shift..n {
                y[col + shift - n] += band[col] * x[col];
            }
        }
        y
    }

    /// y = Mᴴ x.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "adjoint_mul_vec: length mismatch");
        let n = self.n;
        let mut y = vec![Complex64::ZERO; n];
        for d in -(self.hi as i64)..=(self.lo as i64) {
            let band = &self.data[(d + self.hi as i64) as usize * n..][..n];
            let shift = d.rem_euclid(n as i64) as usize;
            for col in 0..n - shift {
                y[col] += band[col].conj() * x[col + shift];
            }
            for col in n - shift..n {
                y[col] += band[col].conj() * x[col + shift - n];
            }
        }
        y
    }

    /// Column `col` restricted to its band support: entries at rows
    /// (col−hi ..= col+lo) mod N, in that order.
    pub fn column_window(&self, col: usize) -> Vec<Complex64> {
        (-(self.hi as i64)..=(self.lo as i64))
            .map(|d| self.diag_entry(d, col))
            .collect()
    }

    /// Copy of the central (lo, hi) band; diagonals outside the requested
    /// band are dropped.
    pub fn narrowed(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > self.lo || hi > self.hi {
            return Err(AfdmError::InvalidParameter(format!(
                "cannot widen band ({}, {}) to ({lo}, {hi})",
                self.lo, self.hi
            )));
        }
        let mut out = Self::zeros(self.n, lo, hi)?;
        for d in -(hi as i64)..=(lo as i64) {
            for col in 0..self.n {
                *out.diag_entry_mut(d, col) = self.diag_entry(d, col);
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// G = M·Mᴴ + σ²I as a cyclic banded matrix with symmetric half-bandwidth
    /// `out_half_bw` (must cover the structural band lo+hi; extra diagonals
    /// are stored as zeros).
    pub fn gram_plus_diag(&self, sigma2: f64, out_half_bw: usize) -> Result<CyclicBandedMatrix> {
        let b = self.lo + self.hi;
        if out_half_bw < b {
            return Err(AfdmError::InvalidParameter(format!(
                "gram band {out_half_bw} cannot hold structural band {b}"
            )));
        }
        let n = self.n;
        let mut g = CyclicBandedMatrix::zeros(n, out_half_bw, out_half_bw)?;
        let (lo, hi) = (self.lo as i64, self.hi as i64);
        for i in 0..n {
            for e in -(b as i64)..=(b as i64) {
                // G[i, i−e] = Σ_o M[i, i+o]·conj(M[i−e, i+o])
                let o_lo = (-lo).max(-lo - e);
                let o_hi = hi.min(hi - e);
                let mut acc = Complex64::ZERO;
                for o in o_lo..=o_hi {
                    let col = (i as i64 + o).rem_euclid(n as i64) as usize;
                    acc += self.diag_entry(-o, col) * self.diag_entry(-e - o, col).conj();
                }
                if e == 0 {
                    acc += sigma2;
                }
                let gcol = (i as i64 - e).rem_euclid(n as i64) as usize;
                *g.diag_entry_mut(e, gcol) = acc;
            }
        }
        Ok(g)
    }
}

/// Band approximation H̆ = Ḣ ⊙ Ξ: keep the 2·half_bw+1 cyclic diagonals
/// around the main diagonal and drop everything else.
pub fn band_approximate(m: &ChannelMatrix, half_bw: usize) -> Result<CyclicBandedMatrix> {
    let n = m.n();
    if 2 * half_bw >= n {
        return Err(AfdmError::InvalidParameter(format!(
            "band half-width {half_bw} out of range for N = {n}"
        )));
    }
    CyclicBandedMatrix::from_dense(&m.entries, half_bw, half_bw)
}
