//! Stage 1: banded block-Cholesky LMMSE.
//!
//! Solves ŝ⁽⁰⁾ = H̆ᴴ(H̆H̆ᴴ + σ²I)⁻¹ṙ for a cyclically banded H̆ in O(Nβ²).
//! G = H̆H̆ᴴ + σ²I is cyclically banded with half-bandwidth β; partitioning
//! with Q = N−β,
//!
//!   G = [[G¹ Q×Q, G² Q×β], [G³, G⁴ β×β]] = L·Lᴴ,
//!   L = [[A, 0], [B, C]],
//!
//! puts all cyclic corner entries into G²/G³/G⁴, so A is a plain band
//! Cholesky factor, Bᴴ = A⁻¹G² comes from band-forward substitution, and C
//! is the dense Cholesky factor of the β×β Schur complement G⁴ − BBᴴ.
//!
//! Per-symbol error variances use e⁽⁰⁾[n] = 1 − ‖L⁻¹h̆_n‖² with the forward
//! substitution restricted to the band window of column n; columns whose
//! window wraps or touches the corner block fall back to a full (exact)
//! forward solve with the norm still taken over the window.

use num_complex::Complex64;

use crate::banded::CyclicBandedMatrix;
use crate::equalizer::complexity::CmCount;
use crate::error::{AfdmError, Result};

/// Initial estimate ŝ⁽⁰⁾, per-symbol error variances e⁽⁰⁾ ∈ (0, 1], and the
/// analytic CM cost η₀.
#[derive(Debug, Clone)]
pub struct Stage1Output {
    pub s_hat: Vec<Complex64>,
    pub err_var: Vec<f64>,
    pub cm: CmCount,
}

pub(crate) const VAR_FLOOR: f64 = 1e-8;

pub(crate) fn clamp_var(e: f64) -> f64 {
    e.clamp(VAR_FLOOR, 1.0)
}

/// Lower-triangular banded matrix (non-cyclic), column-major band storage:
/// data[col·(bw+1) + r] = A[col+r, col].
struct BandedLower {
    bw: usize,
    data: Vec<Complex64>,
}

impl BandedLower {
    #[inline]
    fn get(&self, row: usize, col: usize) -> Complex64 {
        debug_assert!(row >= col && row - col <= self.bw);
        self.data[col * (self.bw + 1) + (row - col)]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[col * (self.bw + 1) + (row - col)] = v;
    }
}

/// L = [[A, 0], [B, C]] from the partitioned factorization.
pub(crate) struct PartitionedCholesky {
    n: usize,
    beta: usize,
    q: usize,
    a: BandedLower,
    /// Bᴴ stored as Q×β (column c of Bᴴ = A⁻¹·(column c of G²)).
    bh: Vec<Complex64>,
    /// C lower-triangular β×β, row-major.
    c: Vec<Complex64>,
}

impl PartitionedCholesky {
    pub(crate) fn factor(g: &CyclicBandedMatrix, beta: usize) -> Result<Self> {
        let n = g.n();
        if 2 * beta + 1 > n {
            return Err(AfdmError::InvalidParameter(format!(
                "partitioned Cholesky needs N ≥ 2β+1 (N = {n}, β = {beta})"
            )));
        }
        let q = n - beta;
        let bw = beta;

        // A: band Cholesky of the leading Q×Q block (strictly banded there).
        let mut a = BandedLower { bw, data: vec![Complex64::ZERO; q * (bw + 1)] };
        for j in 0..q {
            let k_lo = j.saturating_sub(bw);
            let mut diag = g.get(j, j).re;
            for k in k_lo..j {
                diag -= a.get(j, k).norm_sqr();
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(AfdmError::NotPositiveDefinite);
            }
            let diag = diag.sqrt();
            a.set(j, j, Complex64::new(diag, 0.0));
            for i in j + 1..=(j + bw).min(q - 1) {
                let mut v = g.get(i, j);
                let k_lo2 = k_lo.max(i.saturating_sub(bw));
                for k in k_lo2..j {
                    v -= a.get(i, k) * a.get(j, k).conj();
                }
                a.set(i, j, v / diag);
            }
        }

        // Bᴴ = A⁻¹ G², column by band-forward substitution.
        let mut bh = vec![Complex64::ZERO; q * beta];
        for c in 0..beta {
            for i in 0..q {
                let mut v = g.get(i, q + c);
                let k_lo = i.saturating_sub(bw);
                for k in k_lo..i {
                    let x = bh[k * beta + c];
                    if x != Complex64::ZERO {
                        v -= a.get(i, k) * x;
                    }
                }
                bh[i * beta + c] = v / a.get(i, i);
            }
        }

        // Schur complement S = G⁴ − BBᴴ, then its dense Cholesky C.
        let mut s = vec![Complex64::ZERO; beta * beta];
        for r in 0..beta {
            for c in 0..=r {
                let mut v = g.get(q + r, q + c);
                for k in 0..q {
                    // B[r,k] = conj(Bᴴ[k,r])
                    v -= bh[k * beta + r].conj() * bh[k * beta + c];
                }
                s[r * beta + c] = v;
            }
        }
        let mut cfac = vec![Complex64::ZERO; beta * beta];
        for j in 0..beta {
            let mut diag = s[j * beta + j].re;
            for k in 0..j {
                diag -= cfac[j * beta + k].norm_sqr();
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(AfdmError::NotPositiveDefinite);
            }
            let diag = diag.sqrt();
            cfac[j * beta + j] = Complex64::new(diag, 0.0);
            for i in j + 1..beta {
                let mut v = s[i * beta + j];
                for k in 0..j {
                    v -= cfac[i * beta + k] * cfac[j * beta + k].conj();
                }
                cfac[i * beta + j] = v / diag;
            }
        }

        Ok(Self { n, beta, q, a, bh, c: cfac })
    }

    /// z = L⁻¹ v.
    pub(crate) fn forward_solve(&self, v: &[Complex64]) -> Vec<Complex64> {
        let (q, beta, bw) = (self.q, self.beta, self.a.bw);
        let mut z = vec![Complex64::ZERO; self.n];
        for i in 0..q {
            let mut acc = v[i];
            let k_lo = i.saturating_sub(bw);
            for k in k_lo..i {
                acc -= self.a.get(i, k) * z[k];
            }
            z[i] = acc / self.a.get(i, i);
        }
        for c in 0..beta {
            let mut acc = v[q + c];
            for k in 0..q {
                acc -= self.bh[k * beta + c].conj() * z[k];
            }
            for c2 in 0..c {
                acc -= self.c[c * beta + c2] * z[q + c2];
            }
            z[q + c] = acc / self.c[c * beta + c];
        }
        z
    }

    /// u = L⁻ᴴ z.
    pub(crate) fn backward_solve(&self, z: &[Complex64]) -> Vec<Complex64> {
        let (q, beta, bw) = (self.q, self.beta, self.a.bw);
        let mut u = vec![Complex64::ZERO; self.n];
        for c in (0..beta).rev() {
            let mut acc = z[q + c];
            for c2 in c + 1..beta {
                acc -= self.c[c2 * beta + c].conj() * u[q + c2];
            }
            u[q + c] = acc / self.c[c * beta + c].conj();
        }
        for i in (0..q).rev() {
            let mut acc = z[i];
            for c in 0..beta {
                acc -= self.bh[i * beta + c] * u[q + c];
            }
            for k in i + 1..=(i + bw).min(q - 1) {
                acc -= self.a.get(k, i).conj() * u[k];
            }
            u[i] = acc / self.a.get(i, i).conj();
        }
        u
    }

    /// Dense N×N L, for reconstruction checks.
    pub(crate) fn dense_l(&self) -> crate::mat::CMat {
        let (q, beta, bw) = (self.q, self.beta, self.a.bw);
        let mut l = crate::mat::CMat::zeros(self.n, self.n);
        for col in 0..q {
            for row in col..=(col + bw).min(q - 1) {
                l[(row, col)] = self.a.get(row, col);
            }
        }
        for r in 0..beta {
            for k in 0..q {
                l[(q + r, k)] = self.bh[k * beta + r].conj();
            }
            for c in 0..=r {
                l[(q + r, q + c)] = self.c[r * beta + c];
            }
        }
        l
    }
}

/// Error variance e⁽⁰⁾[n] = 1 − ‖L⁻¹h̆_n‖² over the band window of column n.
fn error_variances(chol: &PartitionedCholesky, hb: &CyclicBandedMatrix) -> Vec<f64> {
    let n = hb.n();
    let (lo, hi) = (hb.lo(), hb.hi());
    let window = lo + hi + 1;
    let q = chol.q;
    let bw = chol.a.bw;
    let mut out = Vec::with_capacity(n);
    let mut x = vec![Complex64::ZERO; window];
    for col in 0..n {
        let h = hb.column_window(col); // rows (col−hi ..= col+lo) mod N
        let fast = col >= hi && col + lo < q;
        let e = if fast {
            let r0 = col - hi;
            for i in 0..window {
                let row = r0 + i;
                let mut acc = h[i];
                let k_lo = row.saturating_sub(bw).max(r0);
                for k in k_lo..row {
                    acc -= chol.a.get(row, k) * x[k - r0];
                }
                x[i] = acc / chol.a.get(row, row);
            }
            1.0 - x.iter().map(|z| z.norm_sqr()).sum::<f64>()
        } else {
            let mut full = vec![Complex64::ZERO; n];
            for (i, &v) in h.iter().enumerate() {
                let row = (col + n - hi + i) % n;
                full[row] = v;
            }
            let z = chol.forward_solve(&full);
            let norm: f64 = (0..window)
                .map(|i| z[(col + n - hi + i) % n].norm_sqr())
                .sum();
            1.0 - norm
        };
        out.push(clamp_var(e));
    }
    out
}

/// Stage-1 banded LMMSE with per-symbol error variances.
///
/// `hb` is the band approximation of the channel matrix in the equalization
/// domain; the prior is unit-variance symbols (unitary transforms of a
/// unit-energy constellation). The CM count is the analytic η₀ evaluated at
/// β = lo + hi + 1.
pub fn stage1_banded_lmmse(
    hb: &CyclicBandedMatrix,
    r: &[Complex64],
    sigma2: f64,
) -> Result<Stage1Output> {
    if sigma2 <= 0.0 {
        return Err(AfdmError::InvalidParameter("stage 1 requires sigma2 > 0".into()));
    }
    let n = hb.n();
    assert_eq!(r.len(), n, "stage1: length mismatch");
    let beta = hb.lo() + hb.hi() + 1;
    if 2 * beta >= n {
        return Err(AfdmError::InvalidParameter(format!(
            "band too wide for partitioned solver: β = {beta}, N = {n}"
        )));
    }
    let g = hb.gram_plus_diag(sigma2, beta)?;
    let chol = PartitionedCholesky::factor(&g, beta)?;
    let z = chol.forward_solve(r);
    let u = chol.backward_solve(&z);
    let s_hat = hb.adjoint_mul_vec(&u);
    let err_var = error_variances(&chol, hb);
    let cm = cm_eta0(n, beta);
    Ok(Stage1Output { s_hat, err_var, cm })
}

/// η₀ evaluated directly: the formula has no log term, so it extends to any
/// N and to the generalized (possibly even) β = lo + hi + 1.
pub(crate) fn cm_eta0(n: usize, beta: usize) -> CmCount {
    let (nn, b) = (n as i128, beta as i128);
    let sixths = 6 * nn * (3 * b * b + 11 * b) + 15 * nn - 3 * b * b * b - 18 * b * b - 4 * b;
    CmCount::from_sixths(sixths.max(0) as u128)
}

/// ‖L·Lᴴ − G‖_F/‖G‖_F for the partitioned factorization of
/// G = H̆H̆ᴴ + σ²I, including the cyclic corner blocks. Diagnostic hook for
/// factorization-validity checks.
pub fn cholesky_reconstruction_error(hb: &CyclicBandedMatrix, sigma2: f64) -> Result<f64> {
    let beta = hb.lo() + hb.hi() + 1;
    let g = hb.gram_plus_diag(sigma2, beta)?;
    let chol = PartitionedCholesky::factor(&g, beta)?;
    let l = chol.dense_l();
    let rec = l.matmul(&l.adjoint());
    let gd = g.to_dense();
    Ok(rec.frobenius_distance(&gd) / gd.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{rel_l2_error, CMat};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_banded(n: usize, half: usize, seed: u64) -> CyclicBandedMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = CyclicBandedMatrix::zeros(n, half, half).unwrap();
        for d in -(half as i64)..=(half as i64) {
            for col in 0..n {
                *m.diag_entry_mut(d, col) =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        m
    }

    fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    /// Dense LMMSE oracle: H̆ᴴ(H̆H̆ᴴ+σ²I)⁻¹r by Gaussian elimination.
    fn dense_lmmse(hd: &CMat, r: &[Complex64], sigma2: f64) -> Vec<Complex64> {
        let n = hd.nrows();
        let mut g = hd.matmul(&hd.adjoint());
        for i in 0..n {
            g[(i, i)] += sigma2;
        }
        let u = solve_dense(&g, r);
        hd.adjoint_mul_vec(&u)
    }

    /// Plain partial-pivot solve, independent of any Cholesky code.
    fn solve_dense(m: &CMat, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = m.nrows();
        let mut a: Vec<Vec<Complex64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| {
                a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap()
            }).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            for i in col + 1..n {
                let f = a[i][col] / d;
                for j in col..n {
                    let v = a[col][j];
                    a[i][j] -= f * v;
                }
                let bc = b[col];
                b[i] -= f * bc;
            }
        }
        let mut x = vec![Complex64::ZERO; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= a[i][j] * x[j];
            }
            x[i] = acc / a[i][i];
        }
        x
    }

    #[test]
    fn identity_channel_small_noise() {
        let n = 16;
        let mut hb = CyclicBandedMatrix::zeros(n, 1, 1).unwrap();
        for col in 0..n {
            *hb.diag_entry_mut(0, col) = Complex64::ONE;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let r = random_vec(n, &mut rng);
        let sigma2 = 1e-6;
        let out = stage1_banded_lmmse(&hb, &r, sigma2).unwrap();
        let rel = rel_l2_error(&out.s_hat, &r);
        assert!(rel < 1e-5, "shrinkage error {rel}");
        let expected = sigma2 / (1.0 + sigma2);
        for &e in &out.err_var {
            assert!((e - expected.max(VAR_FLOOR)).abs() < 1e-9, "e = {e}");
        }
    }

    #[test]
    fn matches_dense_lmmse_when_band_is_lossless() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        for seed in 0..5u64 {
            let hb = random_banded(16, 3, 100 + seed);
            let r = random_vec(16, &mut rng);
            let out = stage1_banded_lmmse(&hb, &r, 0.05).unwrap();
            let oracle = dense_lmmse(&hb.to_dense(), &r, 0.05);
            let rel = rel_l2_error(&out.s_hat, &oracle);
            assert!(rel < 1e-8, "seed {seed}: rel {rel}");
        }
    }

    #[test]
    fn asymmetric_band_matches_dense() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let n = 24;
        let mut hb = CyclicBandedMatrix::zeros(n, 4, 2).unwrap();
        for d in -2i64..=4 {
            for col in 0..n {
                *hb.diag_entry_mut(d, col) =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        let r = random_vec(n, &mut rng);
        let out = stage1_banded_lmmse(&hb, &r, 0.1).unwrap();
        let oracle = dense_lmmse(&hb.to_dense(), &r, 0.1);
        let rel = rel_l2_error(&out.s_hat, &oracle);
        assert!(rel < 1e-9, "rel {rel}");
    }

    #[test]
    fn cholesky_reconstructs_gram() {
        let hb = random_banded(64, 3, 41);
        let beta = 7;
        let g = hb.gram_plus_diag(0.01, beta).unwrap();
        let chol = PartitionedCholesky::factor(&g, beta).unwrap();
        let l = chol.dense_l();
        let rec = l.matmul(&l.adjoint());
        let gd = g.to_dense();
        let rel = rec.frobenius_distance(&gd) / gd.frobenius_norm();
        assert!(rel < 1e-9, "reconstruction error {rel}");
    }

    #[test]
    fn error_variance_matches_dense_covariance() {
        // the windowed forward substitution is accurate for the structure it
        // is used on: a near-diagonal FD channel matrix, where L⁻¹ decays
        // fast along the band
        use crate::banded::band_approximate;
        use crate::channel::{fd_channel_matrix, sample_channel, ChannelProfile};
        use crate::config::SystemConfig;
        let sys = SystemConfig {
            n: 16,
            bandwidth_hz: 0.96e6,
            frame_duration_s: None,
            c1: None,
            c2: 0.0,
            l_cpp: None,
            rolloff: 0.1,
            trunc_threshold: 1e-3,
            gamma: 4,
            tap_convention: Default::default(),
        };
        let pc = sys.pulse_config().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(34);
        let ch = sample_channel(&ChannelProfile::eva(), 6e9, 500.0 / 3.6, &mut rng, &sys).unwrap();
        let hb = band_approximate(&fd_channel_matrix(&ch, &sys, &pc), 2).unwrap();
        let r = random_vec(16, &mut rng);
        let sigma2 = 0.2;
        let out = stage1_banded_lmmse(&hb, &r, sigma2).unwrap();

        // diag(I − H̆ᴴG⁻¹H̆) by columns of the dense inverse
        let hd = hb.to_dense();
        let mut g = hd.matmul(&hd.adjoint());
        for i in 0..16 {
            g[(i, i)] += sigma2;
        }
        for n0 in 0..16 {
            let col: Vec<Complex64> = (0..16).map(|i| hd[(i, n0)]).collect();
            let gi = solve_dense(&g, &col);
            let quad: Complex64 = col.iter().zip(&gi).map(|(a, b)| a.conj() * b).sum();
            let exact = 1.0 - quad.re;
            assert!(
                (out.err_var[n0] - clamp_var(exact)).abs() < 1e-3,
                "n={n0}: windowed {} vs exact {exact}",
                out.err_var[n0]
            );
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let hb = random_banded(16, 3, 43);
        let r = vec![Complex64::ZERO; 16];
        assert!(stage1_banded_lmmse(&hb, &r, 0.0).is_err());
        let wide = random_banded(16, 5, 44); // β = 11, 2β ≥ 16
        assert!(stage1_banded_lmmse(&wide, &r, 0.1).is_err());
    }
}
