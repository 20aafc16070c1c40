//! Unitary chirp transforms (DAFT/DFT) and the Dirichlet kernel.
//!
//! The DAFT kernel is φ(n,m) = exp(−j2π(c₁n² + c₂m² + nm/N)). The forward
//! transform multiplies by the kernel, the inverse by its conjugate, both
//! with 1/√N normalization, so the transform pair is exactly unitary.
//!
//! Every transform exists in two forms: an explicit matrix (used by the
//! consistency oracles) and an O(N log N) fast path that factors the kernel
//! into pre-chirp × DFT × post-chirp.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{AfdmError, Result};
use crate::mat::CMat;

/// DAFT frame parameters: length N, post-chirp c₁, pre-chirp c₂.
///
/// Constrained to N even and 2c₁N ∈ ℤ, which makes the chirp-periodic
/// prefix coincide with a plain cyclic prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaftParams {
    n: usize,
    c1: f64,
    c2: f64,
}

impl DaftParams {
    pub fn new(n: usize, c1: f64, c2: f64) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(AfdmError::InvalidParameter(format!(
                "frame length N must be positive and even, got {n}"
            )));
        }
        let two_c1_n = 2.0 * c1 * n as f64;
        if (two_c1_n - two_c1_n.round()).abs() > 1e-9 {
            return Err(AfdmError::InvalidParameter(format!(
                "2*c1*N must be an integer, got {two_c1_n}"
            )));
        }
        Ok(Self { n, c1, c2 })
    }

    /// Degenerate chirps c₁ = c₂ = 0: the plain unitary DFT.
    pub fn dft(n: usize) -> Result<Self> {
        Self::new(n, 0.0, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// 2c₁N, rounded to the nearest integer (exact under the constructor
    /// constraint).
    pub fn two_c1_n(&self) -> i64 {
        (2.0 * self.c1 * self.n as f64).round() as i64
    }
}

/// exp(+j2π·turns), with the argument reduced to [−0.5, 0.5] turns first to
/// keep precision for large quadratic phases.
#[inline]
pub(crate) fn cis_turns(turns: f64) -> Complex64 {
    let t = turns - turns.round();
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

/// DAFT kernel φ(n,m) = exp(−j2π(c₁n² + c₂m² + nm/N)).
///
/// Defined for all integer indices; callers may pass shifted ones.
pub fn daft_kernel(n: i64, m: i64, p: &DaftParams) -> Complex64 {
    let nn = n as f64;
    let mm = m as f64;
    let turns = p.c1 * nn * nn + p.c2 * mm * mm + (nn * mm) / p.n as f64;
    cis_turns(-turns)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn fft_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Cached chirp vectors and FFT plans for one parameter set. Use this in
/// loops that transform many frames with the same parameters.
pub struct DaftPlan {
    params: DaftParams,
    // exp(−j2π c1 n²) and exp(−j2π c2 m²)
    chirp1: Vec<Complex64>,
    chirp2: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl DaftPlan {
    pub fn new(params: DaftParams) -> Self {
        let n = params.n;
        let chirp1 = (0..n)
            .map(|i| cis_turns(-params.c1 * (i * i) as f64))
            .collect();
        let chirp2 = (0..n)
            .map(|i| cis_turns(-params.c2 * (i * i) as f64))
            .collect();
        Self {
            params,
            chirp1,
            chirp2,
            fwd: fft_forward(n),
            inv: fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn params(&self) -> &DaftParams {
        &self.params
    }

    /// y[m] = (1/√N) Σ_n r[n] φ(n,m).
    pub fn forward(&self, r: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(r.len(), self.params.n, "daft: length mismatch");
        let mut buf: Vec<Complex64> = r
            .iter()
            .zip(&self.chirp1)
            .map(|(x, c)| x * c)
            .collect();
        self.fwd.process(&mut buf);
        for (y, c) in buf.iter_mut().zip(&self.chirp2) {
            *y *= c * self.scale;
        }
        buf
    }

    /// s[n] = (1/√N) Σ_m x[m] φ*(n,m).
    pub fn inverse(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.params.n, "idaft: length mismatch");
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(&self.chirp2)
            .map(|(v, c)| v * c.conj())
            .collect();
        self.inv.process(&mut buf);
        for (s, c) in buf.iter_mut().zip(&self.chirp1) {
            *s *= c.conj() * self.scale;
        }
        buf
    }
}

/// Forward DAFT (analysis). One-shot convenience over [`DaftPlan`].
pub fn daft(r: &[Complex64], p: &DaftParams) -> Vec<Complex64> {
    DaftPlan::new(*p).forward(r)
}

/// Inverse DAFT (synthesis), Eq.-(1) sense: the AFDM time-domain signal.
pub fn idaft(x: &[Complex64], p: &DaftParams) -> Vec<Complex64> {
    DaftPlan::new(*p).inverse(x)
}

/// Explicit DAFT matrix Φ with Φ[m,n] = (1/√N)·φ(n,m), so daft(r) = Φr and
/// idaft(x) = Φᴴx. Unitary.
pub fn daft_matrix(p: &DaftParams) -> CMat {
    let scale = 1.0 / (p.n as f64).sqrt();
    CMat::from_fn(p.n, p.n, |m, n| scale * daft_kernel(n as i64, m as i64, p))
}

/// Unitary DFT, 1/√N normalization.
pub fn dft_unitary(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    let mut buf = v.to_vec();
    fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

/// Unitary inverse DFT.
pub fn idft_unitary(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    let mut buf = v.to_vec();
    fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

/// Dirichlet function Ω(k) = Σ_{n=0}^{N−1} exp(j2πnk/N).
///
/// Closed form exp(jπk(N−1)/N)·sin(πk)/sin(πk/N); the removable singularity
/// at k ≡ 0 (mod N) returns N, detected by an integer-congruence test so
/// on-grid Doppler never hits 0/0.
pub fn dirichlet(k: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let residue = k - nf * (k / nf).round();
    if residue.abs() < 1e-9 {
        return Complex64::new(nf, 0.0);
    }
    let magnitude = (PI * k).sin() / (PI * k / nf).sin();
    let phase = cis_turns(0.5 * k * (nf - 1.0) / nf);
    phase * magnitude
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn kernel_at_origin_is_one() {
        let p = DaftParams::new(8, 1.0 / 8.0, 0.3).unwrap();
        assert!((daft_kernel(0, 0, &p) - Complex64::ONE).norm() < 1e-15);
    }

    #[test]
    fn kernel_degenerates_to_dft() {
        let p = DaftParams::dft(8).unwrap();
        for n in 0..8i64 {
            for m in 0..8i64 {
                let expected = cis_turns(-(n * m) as f64 / 8.0);
                assert!((daft_kernel(n, m, &p) - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn kernel_hand_value() {
        // N=4, c1=1/4, c2=0, n=3, m=0: exp(−j2π·9/4) = −j
        let p = DaftParams::new(4, 0.25, 0.0).unwrap();
        let k = daft_kernel(3, 0, &p);
        assert!((k - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn idaft_impulse_hand_value() {
        // x = e_0, N=4, c1=1/4: s[n] = 0.5·exp(j2π n²/4)
        let p = DaftParams::new(4, 0.25, 0.0).unwrap();
        let x = vec![Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO];
        let s = idaft(&x, &p);
        let expected = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
        ];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).norm() < 1e-14, "got {a}, want {b}");
        }
        // and daft inverts it
        let back = daft(&s, &p);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn daft_idaft_round_trip_and_parseval() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let p = DaftParams::new(64, 1.0 / 64.0, 0.11).unwrap();
        let x = random_vec(64, &mut rng);
        let s = idaft(&x, &p);
        let back = daft(&s, &p);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
        let ex: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let es: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        assert!((ex - es).abs() < 1e-12 * ex);
    }

    #[test]
    fn fast_path_matches_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let p = DaftParams::new(8, 1.0 / 8.0, 0.2).unwrap();
        let phi = daft_matrix(&p);
        let r = random_vec(8, &mut rng);
        let fast = daft(&r, &p);
        let slow = phi.mul_vec(&r);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-13);
        }
        let x = random_vec(8, &mut rng);
        let fast_inv = idaft(&x, &p);
        let slow_inv = phi.adjoint_mul_vec(&x);
        for (a, b) in fast_inv.iter().zip(&slow_inv) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn daft_matrix_row0_hand_values() {
        // Row 0 of Φ for (N=4, c1=1/4, c2=0) is 0.5·exp(−j2π c1 n²) over n,
        // i.e. [0.5, −0.5j, 0.5, −0.5j]; cross-checked against the kernel.
        let p = DaftParams::new(4, 0.25, 0.0).unwrap();
        let phi = daft_matrix(&p);
        let expected = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.5),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.5),
        ];
        for n in 0..4 {
            assert!((phi[(0, n)] - expected[n]).norm() < 1e-14);
            assert!((phi[(0, n)] - 0.5 * daft_kernel(n as i64, 0, &p)).norm() < 1e-15);
        }
    }

    #[test]
    fn daft_matrix_unitary() {
        for &n in &[4usize, 64] {
            let p = DaftParams::new(n, 1.0 / n as f64, 0.07).unwrap();
            let phi = daft_matrix(&p);
            let prod = phi.matmul(&phi.adjoint());
            let err = prod.frobenius_distance(&CMat::identity(n));
            assert!(err < 1e-10 * n as f64, "N={n}: {err}");
        }
    }

    #[test]
    fn dft_unitary_examples() {
        let n = 16;
        let ones = vec![Complex64::ONE; n];
        let spec = dft_unitary(&ones);
        assert!((spec[0] - Complex64::new((n as f64).sqrt(), 0.0)).norm() < 1e-12);
        for z in &spec[1..] {
            assert!(z.norm() < 1e-12);
        }

        let mut imp = vec![Complex64::ZERO; 4];
        imp[0] = Complex64::ONE;
        for z in dft_unitary(&imp) {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }

        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let v = random_vec(32, &mut rng);
        let back = idft_unitary(&dft_unitary(&v));
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_on_grid() {
        let n = 32;
        assert!((dirichlet(0.0, n) - Complex64::new(n as f64, 0.0)).norm() < 1e-12);
        assert!((dirichlet(32.0, n) - Complex64::new(n as f64, 0.0)).norm() < 1e-9);
        for m in 1..n {
            assert!(dirichlet(m as f64, n).norm() < 1e-9, "m={m}");
        }
    }

    fn dirichlet_direct(k: f64, n: usize) -> Complex64 {
        (0..n).map(|i| cis_turns(i as f64 * k / n as f64)).sum()
    }

    #[test]
    fn dirichlet_matches_direct_sum() {
        let n = 512;
        let d = dirichlet(0.5, n);
        assert!((d - dirichlet_direct(0.5, n)).norm() < 1e-10);

        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let k = (rng.random::<f64>() - 0.5) * 2.0 * n as f64;
            let closed = dirichlet(k, n);
            let direct = dirichlet_direct(k, n);
            assert!((closed - direct).norm() < 1e-9, "k={k}");
            assert!(closed.norm() <= n as f64 + 1e-9);
        }
    }
}
