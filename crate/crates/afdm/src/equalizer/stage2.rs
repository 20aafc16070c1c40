//! Stage 2: cross-domain iterative MMSE detection with hard-decision
//! fallback.
//!
//! Each iteration transforms the domain estimate to the DAFT domain, forms
//! per-symbol posteriors (softmax over the alphabet, or hard decisions with
//! zero variance once the intermediate variance ε drops below the fallback
//! threshold), transforms the posterior statistics back as priors, and
//! re-estimates every sample from its local banded window using only
//! extrinsic information (the center prior is overridden to mean 0,
//! variance 1).

use num_complex::Complex64;

use crate::banded::{band_approximate, CyclicBandedMatrix};
use crate::channel::{ChannelMatrix, Domain};
use crate::equalizer::complexity::{CmCount, ComplexityModel};
use crate::equalizer::stage1::{clamp_var, stage1_banded_lmmse, Stage1Output};
use crate::equalizer::{chol_flat, chol_solve_flat};
use crate::error::{AfdmError, Result};
use crate::qam::Constellation;
use crate::transforms::{daft, dft_unitary, idaft, idft_unitary, DaftParams, DaftPlan};

/// Domain the banded equalizer operates in; fixes the cross-domain
/// transform pair used between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageDomain {
    Frequency,
    Time,
}

/// Options for the two-stage equalizers.
#[derive(Debug, Clone)]
pub struct EqualizerOpts {
    /// Band approximation half-width β̇ (total band β = 2β̇+1).
    pub half_bw: usize,
    pub i_max: usize,
    /// Halt threshold ς for ‖x̃⁽ⁱ⁾−x̃⁽ⁱ⁻¹⁾‖₂; None selects 1e-2·√N.
    pub halt_threshold: Option<f64>,
    /// Fallback to hard decisions when the intermediate variance ε drops
    /// below this.
    pub fallback_threshold: f64,
    pub fallback_enabled: bool,
    pub constellation: Constellation,
    pub daft: DaftParams,
}

impl EqualizerOpts {
    pub fn new(daft: DaftParams, constellation: Constellation) -> Self {
        Self {
            half_bw: 3,
            i_max: 15,
            halt_threshold: None,
            fallback_threshold: 0.1,
            fallback_enabled: true,
            constellation,
            daft,
        }
    }
}

/// Final detection output of a two-stage run.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizeResult {
    /// Hard symbol indices argmin_a |a − x̃[m]| (lowest index on ties).
    pub x_hard: Vec<usize>,
    /// Final soft posterior means in the DAFT domain.
    pub x_soft_final: Vec<Complex64>,
    pub iterations_soft: usize,
    pub iterations_hard: usize,
    /// η_base + i_hard·η_hard + i_soft·η_soft, exact.
    pub cm_total: CmCount,
    /// Whether the posterior change dropped below ς before i_max.
    pub converged: bool,
}

struct CrossPlans {
    domain: StageDomain,
    plan: DaftPlan,
}

impl CrossPlans {
    fn new(domain: StageDomain, daft: DaftParams) -> Self {
        Self { domain, plan: DaftPlan::new(daft) }
    }

    /// Domain estimate → DAFT domain (Φ·Fᴴ·ŝ in FD, Φ·ŝ in TD).
    fn estimate_to_daft(&self, s_hat: &[Complex64]) -> Vec<Complex64> {
        match self.domain {
            StageDomain::Frequency => self.plan.forward(&idft_unitary(s_hat)),
            StageDomain::Time => self.plan.forward(s_hat),
        }
    }

    /// DAFT-domain posterior mean → prior mean in the equalizer domain
    /// (F·Φᴴ·x̃ in FD, Φᴴ·x̃ in TD).
    fn daft_to_domain(&self, x: &[Complex64]) -> Vec<Complex64> {
        match self.domain {
            StageDomain::Frequency => dft_unitary(&self.plan.inverse(x)),
            StageDomain::Time => self.plan.inverse(x),
        }
    }
}

/// Intermediate DAFT-domain estimate x̂̂ = Φ·Fᴴ·ŝ⁽ⁱ⁻¹⁾ and the scalar
/// variance ε = mean(e⁽ⁱ⁻¹⁾) (frequency-domain flavor).
pub fn intermediate_daft_estimate(
    s_hat_fd: &[Complex64],
    err_var: &[f64],
    p: &DaftParams,
) -> (Vec<Complex64>, f64) {
    let x_hat = daft(&idft_unitary(s_hat_fd), p);
    (x_hat, mean(err_var))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-symbol softmax posteriors over the alphabet:
/// weights ∝ exp(−|x̂̂[m]−a|²/ε), stabilized by subtracting the max exponent.
pub fn symbol_posteriors(
    x_hat: &[Complex64],
    eps: f64,
    constellation: &Constellation,
) -> (Vec<Complex64>, Vec<f64>) {
    assert!(eps > 0.0, "symbol_posteriors requires eps > 0");
    let points = constellation.points();
    let mut mean = Vec::with_capacity(x_hat.len());
    let mut var = Vec::with_capacity(x_hat.len());
    let mut exps = vec![0.0f64; points.len()];
    for &z in x_hat {
        let mut emax = f64::NEG_INFINITY;
        for (e, p) in exps.iter_mut().zip(points) {
            *e = -(z - p).norm_sqr() / eps;
            emax = emax.max(*e);
        }
        let mut total = 0.0;
        for e in exps.iter_mut() {
            *e = (*e - emax).exp();
            total += *e;
        }
        let mut m = Complex64::ZERO;
        for (&w, p) in exps.iter().zip(points) {
            m += p * (w / total);
        }
        let mut v = 0.0;
        for (&w, p) in exps.iter().zip(points) {
            v += (w / total) * (p - m).norm_sqr();
        }
        mean.push(m);
        var.push(v);
    }
    (mean, var)
}

/// Posterior statistics → frequency-domain prior: s̄ = F·Φᴴ·x̃ and the
/// uniform variance vector ψ = 1_N·μ with μ = mean(ṽ).
pub fn fd_prior(
    x_tilde: &[Complex64],
    v_tilde: &[f64],
    p: &DaftParams,
) -> (Vec<Complex64>, Vec<f64>, f64) {
    let s_bar = dft_unitary(&idaft(x_tilde, p));
    let mu = mean(v_tilde);
    (s_bar, vec![mu; x_tilde.len()], mu)
}

/// Local-window cache: per sample n, the window
/// H̆_n = Ḣ[n−β̇:n+β̇, n−2β̇:n+2β̇] (modulo-N indexing), its Gram matrix
/// W·Wᴴ, the center column h̆_n, and ‖h̆_n‖². The window half-width β̇ is
/// independent of the source matrix band: entries outside the stored band
/// of `source` read as zero.
struct LocalWindows {
    n: usize,
    half: usize,
    rows: usize,
    cols: usize,
    w: Vec<Complex64>,
    wwh: Vec<Complex64>,
    h_norm_sqr: Vec<f64>,
}

impl LocalWindows {
    fn build(source: &CyclicBandedMatrix, half: usize) -> Result<Self> {
        let n = source.n();
        let hb = source;
        let rows = 2 * half + 1;
        let cols = 4 * half + 1;
        if cols > n {
            return Err(AfdmError::InvalidParameter(format!(
                "window width 4β̇+1 = {cols} exceeds N = {n}"
            )));
        }
        let mut w = vec![Complex64::ZERO; n * rows * cols];
        let mut wwh = vec![Complex64::ZERO; n * rows * rows];
        let mut h_norm_sqr = vec![0.0; n];
        for n0 in 0..n {
            let wn = &mut w[n0 * rows * cols..(n0 + 1) * rows * cols];
            for ri in 0..rows {
                let row = (n0 + n - half + ri) % n;
                for ci in 0..cols {
                    let col = (n0 + n - 2 * half + ci) % n;
                    wn[ri * cols + ci] = hb.get(row, col);
                }
            }
            let gn = &mut wwh[n0 * rows * rows..(n0 + 1) * rows * rows];
            for a in 0..rows {
                for b in 0..rows {
                    let mut acc = Complex64::ZERO;
                    for c in 0..cols {
                        acc += wn[a * cols + c] * wn[b * cols + c].conj();
                    }
                    gn[a * rows + b] = acc;
                }
            }
            h_norm_sqr[n0] = (0..rows).map(|ri| wn[ri * cols + 2 * half].norm_sqr()).sum();
        }
        Ok(Self { n, half, rows, cols, w, wwh, h_norm_sqr })
    }

    #[inline]
    fn window(&self, n0: usize) -> &[Complex64] {
        &self.w[n0 * self.rows * self.cols..(n0 + 1) * self.rows * self.cols]
    }

    #[inline]
    fn gram(&self, n0: usize) -> &[Complex64] {
        &self.wwh[n0 * self.rows * self.rows..(n0 + 1) * self.rows * self.rows]
    }
}

/// Prior variance layout for one sweep.
enum PriorVariance<'a> {
    /// ψ ≡ μ off-center (the paper's uniform approximation).
    Uniform(f64),
    /// Arbitrary per-sample ψ (center still overridden to 1).
    Vector(&'a [f64]),
    /// Hard decisions: ψ ≡ 0 off-center, scalar matched-filter form.
    Hard,
}

/// Local extrinsic MMSE over all N samples.
fn sweep(
    windows: &LocalWindows,
    r: &[Complex64],
    s_bar: &[Complex64],
    prior: &PriorVariance,
    sigma2: f64,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let (n, half, rows, cols) = (windows.n, windows.half, windows.rows, windows.cols);
    let center = 2 * half;
    let mut s_hat = Vec::with_capacity(n);
    let mut err = Vec::with_capacity(n);
    let mut resid = vec![Complex64::ZERO; rows];
    let mut m = vec![Complex64::ZERO; rows * rows];
    let mut y = vec![Complex64::ZERO; rows];
    let mut h = vec![Complex64::ZERO; rows];
    let mut sb = vec![Complex64::ZERO; cols];

    for n0 in 0..n {
        let w = windows.window(n0);
        for ri in 0..rows {
            h[ri] = w[ri * cols + center];
        }
        // extrinsic prior mean: center forced to zero
        for (ci, v) in sb.iter_mut().enumerate() {
            let col = (n0 + n - 2 * half + ci) % n;
            *v = if ci == center { Complex64::ZERO } else { s_bar[col] };
        }
        for ri in 0..rows {
            let row = (n0 + n - half + ri) % n;
            let mut acc = r[row];
            for ci in 0..cols {
                if sb[ci] != Complex64::ZERO {
                    acc -= w[ri * cols + ci] * sb[ci];
                }
            }
            resid[ri] = acc;
        }

        match prior {
            PriorVariance::Hard => {
                let denom = windows.h_norm_sqr[n0] + sigma2;
                if denom == 0.0 {
                    return Err(AfdmError::NotPositiveDefinite);
                }
                let num: Complex64 = h.iter().zip(&resid).map(|(a, b)| a.conj() * b).sum();
                s_hat.push(num / denom);
                err.push(clamp_var(sigma2 / denom));
            }
            PriorVariance::Uniform(mu) => {
                let gram = windows.gram(n0);
                let one_minus = 1.0 - mu;
                for a in 0..rows {
                    for b in 0..rows {
                        let mut v = gram[a * rows + b] * *mu + h[a] * h[b].conj() * one_minus;
                        if a == b {
                            v += sigma2;
                        }
                        m[a * rows + b] = v;
                    }
                }
                let (est, e) = solve_window(&mut m, rows, &resid, &h, &mut y)?;
                s_hat.push(est);
                err.push(e);
            }
            PriorVariance::Vector(psi) => {
                for a in 0..rows {
                    for b in 0..rows {
                        let mut acc = Complex64::ZERO;
                        for ci in 0..cols {
                            let col = (n0 + n - 2 * half + ci) % n;
                            let p = if ci == center { 1.0 } else { psi[col] };
                            if p != 0.0 {
                                acc += w[a * cols + ci] * w[b * cols + ci].conj() * p;
                            }
                        }
                        if a == b {
                            acc += sigma2;
                        }
                        m[a * rows + b] = acc;
                    }
                }
                let (est, e) = solve_window(&mut m, rows, &resid, &h, &mut y)?;
                s_hat.push(est);
                err.push(e);
            }
        }
    }
    Ok((s_hat, err))
}

/// ŝ[n] = h̆ᴴM⁻¹resid and e[n] = 1 − h̆ᴴM⁻¹h̆ for one window.
fn solve_window(
    m: &mut [Complex64],
    rows: usize,
    resid: &[Complex64],
    h: &[Complex64],
    y: &mut [Complex64],
) -> Result<(Complex64, f64)> {
    chol_flat(m, rows)?;
    y.copy_from_slice(resid);
    chol_solve_flat(m, rows, y);
    let est: Complex64 = h.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
    y.copy_from_slice(h);
    chol_solve_flat(m, rows, y);
    let quad: Complex64 = h.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok((est, clamp_var(1.0 - quad.re)))
}

/// Sweep mode for the public per-sample estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Soft,
    Hard,
}

/// Local extrinsic MMSE estimates for every sample: windows of half-width
/// `half_bw` drawn from `h` (entries outside h's stored band read as zero),
/// received vector, prior mean s̄ and prior variance vector ψ. In `Hard`
/// mode ψ is ignored (taken as zero off-center) and the scalar
/// matched-filter form is used.
pub fn local_mmse_sweep(
    h: &CyclicBandedMatrix,
    r: &[Complex64],
    s_bar: &[Complex64],
    psi: &[f64],
    sigma2: f64,
    half_bw: usize,
    mode: SweepMode,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let windows = LocalWindows::build(h, half_bw)?;
    let prior = match mode {
        SweepMode::Soft => PriorVariance::Vector(psi),
        SweepMode::Hard => PriorVariance::Hard,
    };
    sweep(&windows, r, s_bar, &prior, sigma2)
}

/// CM model for the iteration loop; log₂N is exact for power-of-two N and
/// rounded up otherwise.
fn iteration_model(n: usize, beta: usize, alphabet: usize) -> ComplexityModel {
    let log2n = (usize::BITS - (n - 1).leading_zeros()) as u128;
    let (nn, b, x) = (n as i128, beta as i128, alphabet as i128);
    let eta_soft_sixths = 12 * nn * log2n as i128
        + (nn * (2 * b * b * b + 45 * b * b + 109 * b)) / 2
        + 66 * nn
        + 51 * nn * x / 2;
    let eta_hard_sixths = 12 * nn * log2n as i128 + 6 * nn * (2 * b + 7) + 3 * nn * x;
    ComplexityModel {
        n,
        beta,
        alphabet_size: alphabet,
        eta0: crate::equalizer::stage1::cm_eta0(n, beta),
        eta_soft: CmCount::from_sixths(eta_soft_sixths as u128),
        eta_hard: CmCount::from_sixths(eta_hard_sixths as u128),
    }
}

/// Iterative stage 2 on top of a supplied stage-1 output. Local windows of
/// half-width opts.half_bw are drawn from `window_source` (which may be a
/// wider band of the channel matrix than the stage-1 approximation; window
/// corners reach cyclic lag 3β̇). `base_cm` is the stage-1 CM cost added to
/// the iteration terms. Counted iterations are completed local sweeps; the
/// halting pass (posterior change < ς, which exits before its sweep) is not
/// counted.
pub fn two_stage_with_stage1(
    window_source: &CyclicBandedMatrix,
    r: &[Complex64],
    sigma2: f64,
    stage1: Stage1Output,
    opts: &EqualizerOpts,
    domain: StageDomain,
    base_cm: CmCount,
) -> Result<EqualizeResult> {
    let n = window_source.n();
    assert_eq!(r.len(), n, "two_stage: length mismatch");
    let windows = LocalWindows::build(window_source, opts.half_bw)?;
    let cross = CrossPlans::new(domain, opts.daft);
    let model = iteration_model(n, 2 * opts.half_bw + 1, opts.constellation.order());
    let halt = opts.halt_threshold.unwrap_or(1e-2 * (n as f64).sqrt());

    let mut s_hat = stage1.s_hat;
    let mut err_var = stage1.err_var;
    let mut x_prev: Option<Vec<Complex64>> = None;
    let mut iters_soft = 0usize;
    let mut iters_hard = 0usize;
    let mut converged = false;

    loop {
        let x_hat = cross.estimate_to_daft(&s_hat);
        let eps = mean(&err_var);
        let hard = (opts.fallback_enabled && eps < opts.fallback_threshold)
            || eps < crate::equalizer::stage1::VAR_FLOOR * 2.0;
        let (x_tilde, mu) = if hard {
            let x: Vec<Complex64> = x_hat
                .iter()
                .map(|&z| opts.constellation.points()[opts.constellation.nearest_index(z)])
                .collect();
            (x, 0.0)
        } else {
            let (x, v) = symbol_posteriors(&x_hat, eps, &opts.constellation);
            let mu = mean(&v);
            (x, mu)
        };

        if let Some(prev) = &x_prev {
            let dist: f64 = x_tilde
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if dist < halt {
                x_prev = Some(x_tilde);
                converged = true;
                break;
            }
        }
        x_prev = Some(x_tilde.clone());
        if iters_soft + iters_hard >= opts.i_max {
            break;
        }

        let s_bar = cross.daft_to_domain(&x_tilde);
        let prior = if hard { PriorVariance::Hard } else { PriorVariance::Uniform(mu) };
        let (s_new, e_new) = sweep(&windows, r, &s_bar, &prior, sigma2)?;
        s_hat = s_new;
        err_var = e_new;
        if hard {
            iters_hard += 1;
        } else {
            iters_soft += 1;
        }
    }

    let x_soft_final = x_prev.expect("at least one posterior pass always runs");
    let x_hard = x_soft_final
        .iter()
        .map(|&z| opts.constellation.nearest_index(z))
        .collect();
    let cm_total =
        base_cm + model.eta_hard * iters_hard as u128 + model.eta_soft * iters_soft as u128;
    Ok(EqualizeResult {
        x_hard,
        x_soft_final,
        iterations_soft: iters_soft,
        iterations_hard: iters_hard,
        cm_total,
        converged,
    })
}

/// Window-source half-width: window corners reach cyclic lag 3β̇, capped by
/// the banded-storage capacity.
pub(crate) fn window_source_half(n: usize, half_bw: usize) -> usize {
    (3 * half_bw).min((n - 1) / 2)
}

/// Full two-stage run from an already banded matrix. Stage 1 uses the
/// central β̇ band of `hb`; stage-2 windows read the full stored band.
pub fn two_stage_from_banded(
    hb: &CyclicBandedMatrix,
    r: &[Complex64],
    sigma2: f64,
    opts: &EqualizerOpts,
    domain: StageDomain,
) -> Result<EqualizeResult> {
    let stage1_band = if hb.lo() == opts.half_bw && hb.hi() == opts.half_bw {
        None
    } else {
        Some(hb.narrowed(opts.half_bw, opts.half_bw)?)
    };
    let stage1 = stage1_banded_lmmse(stage1_band.as_ref().unwrap_or(hb), r, sigma2)?;
    let base = stage1.cm;
    two_stage_with_stage1(hb, r, sigma2, stage1, opts, domain, base)
}

/// Proposed two-stage FD equalization: band-approximate Ḣ to β̇ for the
/// banded block-Cholesky LMMSE, then iterate cross-domain MMSE detection
/// with local windows indexing Ḣ.
pub fn two_stage_equalize(
    h_fd: &ChannelMatrix,
    r_fd: &[Complex64],
    sigma2: f64,
    opts: &EqualizerOpts,
) -> Result<EqualizeResult> {
    if h_fd.domain != Domain::Frequency {
        return Err(AfdmError::DomainMismatch { expected: Domain::Frequency, got: h_fd.domain });
    }
    let hb = band_approximate(h_fd, window_source_half(h_fd.n(), opts.half_bw))?;
    two_stage_from_banded(&hb, r_fd, sigma2, opts, StageDomain::Frequency)
}

/// The same two-stage pipeline operating in the time domain with band
/// approximation half-width (α−1)/2 = opts.half_bw; the cross-domain step
/// uses x̂̂ = Φ·ŝ directly.
pub fn td_two_stage_equalize(
    h_td: &ChannelMatrix,
    r_td: &[Complex64],
    sigma2: f64,
    opts: &EqualizerOpts,
) -> Result<EqualizeResult> {
    if h_td.domain != Domain::Time {
        return Err(AfdmError::DomainMismatch { expected: Domain::Time, got: h_td.domain });
    }
    let hb = band_approximate(h_td, window_source_half(h_td.n(), opts.half_bw))?;
    two_stage_from_banded(&hb, r_td, sigma2, opts, StageDomain::Time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::l2_norm;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

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

    #[test]
    fn intermediate_estimate_degenerate_and_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let p0 = DaftParams::dft(16).unwrap();
        let s = random_vec(16, &mut rng);
        let e = vec![0.25; 16];
        let (x_hat, eps) = intermediate_daft_estimate(&s, &e, &p0);
        for (a, b) in x_hat.iter().zip(&s) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((eps - 0.25).abs() < 1e-15);

        let p = DaftParams::new(16, 1.0 / 16.0, 0.1).unwrap();
        let x = random_vec(16, &mut rng);
        let s_fd = dft_unitary(&idaft(&x, &p));
        let (x_back, _) = intermediate_daft_estimate(&s_fd, &e, &p);
        for (a, b) in x_back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn posteriors_limiting_cases() {
        let c = Constellation::qam(4).unwrap();
        let x_hat = vec![Complex64::new(0.3, -0.2); 8];
        let (m, v) = symbol_posteriors(&x_hat, 1e9, &c);
        for (a, b) in m.iter().zip(&v) {
            assert!(a.norm() < 1e-6, "uninformative mean {a}");
            assert!((b - 1.0).abs() < 1e-6, "uninformative var {b}");
        }
        let on_point = vec![c.points()[2]; 4];
        let (m, v) = symbol_posteriors(&on_point, 1e-6, &c);
        for (a, b) in m.iter().zip(&v) {
            assert!((a - c.points()[2]).norm() < 1e-9);
            assert!(*b < 1e-9);
        }
    }

    #[test]
    fn posteriors_match_direct_softmax() {
        let c = Constellation::qam(4).unwrap();
        let z = Complex64::new(0.4, 0.35);
        let eps = 0.5;
        let (m, v) = symbol_posteriors(&[z], eps, &c);
        let weights: Vec<f64> =
            c.points().iter().map(|a| (-(z - a).norm_sqr() / eps).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mean_direct: Complex64 = c
            .points()
            .iter()
            .zip(&weights)
            .map(|(a, w)| a * (w / total))
            .sum();
        let var_direct: f64 = c
            .points()
            .iter()
            .zip(&weights)
            .map(|(a, w)| (w / total) * (a - mean_direct).norm_sqr())
            .sum();
        assert!((m[0] - mean_direct).norm() < 1e-12);
        assert!((v[0] - var_direct).abs() < 1e-12);
    }

    #[test]
    fn fd_prior_properties() {
        let mut rng = ChaCha12Rng::seed_from_u64(62);
        let p = DaftParams::new(16, 1.0 / 16.0, 0.0).unwrap();
        let x = random_vec(16, &mut rng);
        let (s_bar, psi, mu) = fd_prior(&x, &vec![0.0; 16], &p);
        assert_eq!(mu, 0.0);
        assert!(psi.iter().all(|&v| v == 0.0));
        assert!((l2_norm(&s_bar) - l2_norm(&x)).abs() < 1e-12);

        // exact posterior mean gives the true FD signal
        let frame_s = idaft(&x, &p);
        let true_fd = dft_unitary(&frame_s);
        for (a, b) in s_bar.iter().zip(&true_fd) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn sweep_diagonal_reduces_to_scalar_mmse() {
        let n = 12;
        let mut rng = ChaCha12Rng::seed_from_u64(63);
        let mut hb = CyclicBandedMatrix::zeros(n, 0, 0).unwrap();
        let diag: Vec<Complex64> = random_vec(n, &mut rng);
        for (col, &d) in diag.iter().enumerate() {
            *hb.diag_entry_mut(0, col) = d;
        }
        let r = random_vec(n, &mut rng);
        let s_bar = random_vec(n, &mut rng);
        let psi = vec![0.4; n];
        let sigma2 = 0.05;
        let (s_hat, err) =
            local_mmse_sweep(&hb, &r, &s_bar, &psi, sigma2, 0, SweepMode::Soft).unwrap();
        for i in 0..n {
            let h = diag[i];
            let expected = h.conj() * r[i] / (h.norm_sqr() + sigma2);
            assert!((s_hat[i] - expected).norm() < 1e-12, "i={i}");
            let e_expected = clamp_var(1.0 - h.norm_sqr() / (h.norm_sqr() + sigma2));
            assert!((err[i] - e_expected).abs() < 1e-12);
        }
    }

    #[test]
    fn hard_mode_equals_soft_with_zero_offcenter_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(64);
        for seed in 0..10u64 {
            let hb = random_banded(20, 2, 200 + seed);
            let r = random_vec(20, &mut rng);
            let s_bar = random_vec(20, &mut rng);
            let zeros = vec![0.0; 20];
            let sigma2 = 0.07;
            let (soft, es) =
                local_mmse_sweep(&hb, &r, &s_bar, &zeros, sigma2, 2, SweepMode::Soft).unwrap();
            let (hard, eh) =
                local_mmse_sweep(&hb, &r, &s_bar, &zeros, sigma2, 2, SweepMode::Hard).unwrap();
            for i in 0..20 {
                assert!((soft[i] - hard[i]).norm() < 1e-10, "seed {seed} i {i}");
                assert!((es[i] - eh[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uniform_prior_fast_path_matches_vector_path() {
        let mut rng = ChaCha12Rng::seed_from_u64(65);
        let hb = random_banded(24, 3, 300);
        let windows = LocalWindows::build(&hb, 3).unwrap();
        let r = random_vec(24, &mut rng);
        let s_bar = random_vec(24, &mut rng);
        let mu = 0.37;
        let psi = vec![mu; 24];
        let (a1, e1) = sweep(&windows, &r, &s_bar, &PriorVariance::Uniform(mu), 0.02).unwrap();
        let (a2, e2) = sweep(&windows, &r, &s_bar, &PriorVariance::Vector(&psi), 0.02).unwrap();
        for i in 0..24 {
            assert!((a1[i] - a2[i]).norm() < 1e-11);
            assert!((e1[i] - e2[i]).abs() < 1e-11);
        }
    }

    /// Full-width windows against an explicit dense construction of the
    /// local LMMSE (independent Gaussian elimination).
    #[test]
    fn sweep_matches_dense_local_oracle() {
        let n = 17;
        let half = 4; // 4β̇+1 = 17 = N
        let mut rng = ChaCha12Rng::seed_from_u64(66);
        let hb = random_banded(n, half, 400);
        let r = random_vec(n, &mut rng);
        let s_bar = random_vec(n, &mut rng);
        let psi: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let sigma2 = 0.09;
        let (s_hat, err) =
            local_mmse_sweep(&hb, &r, &s_bar, &psi, sigma2, half, SweepMode::Soft).unwrap();

        let rows = 2 * half + 1;
        let cols = 4 * half + 1;
        for n0 in 0..n {
            // dense local model
            let mut w = vec![vec![Complex64::ZERO; cols]; rows];
            for (ri, wrow) in w.iter_mut().enumerate() {
                let row = (n0 + n - half + ri) % n;
                for (ci, v) in wrow.iter_mut().enumerate() {
                    let col = (n0 + n - 2 * half + ci) % n;
                    *v = hb.get(row, col);
                }
            }
            let mut m = vec![vec![Complex64::ZERO; rows]; rows];
            for a in 0..rows {
                for b in 0..rows {
                    let mut acc = if a == b {
                        Complex64::new(sigma2, 0.0)
                    } else {
                        Complex64::ZERO
                    };
                    for ci in 0..cols {
                        let col = (n0 + n - 2 * half + ci) % n;
                        let p = if ci == 2 * half { 1.0 } else { psi[col] };
                        acc += w[a][ci] * w[b][ci].conj() * p;
                    }
                    m[a][b] = acc;
                }
            }
            let mut resid = vec![Complex64::ZERO; rows];
            for ri in 0..rows {
                let row = (n0 + n - half + ri) % n;
                let mut acc = r[row];
                for ci in 0..cols {
                    if ci == 2 * half {
                        continue;
                    }
                    let col = (n0 + n - 2 * half + ci) % n;
                    acc -= w[ri][ci] * s_bar[col];
                }
                resid[ri] = acc;
            }
            // Gaussian elimination on the dense system
            let y = gauss_solve(&m, &resid);
            let h: Vec<Complex64> = (0..rows).map(|ri| w[ri][2 * half]).collect();
            let est: Complex64 = h.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
            let y2 = gauss_solve(&m, &h);
            let quad: Complex64 = h.iter().zip(&y2).map(|(a, b)| a.conj() * b).sum();
            assert!((s_hat[n0] - est).norm() < 1e-9, "n0 = {n0}");
            assert!((err[n0] - clamp_var(1.0 - quad.re)).abs() < 1e-9);
        }
    }

    fn gauss_solve(m: &[Vec<Complex64>], rhs: &[Complex64]) -> Vec<Complex64> {
        let n = m.len();
        let mut a: Vec<Vec<Complex64>> = m.to_vec();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
                .unwrap();
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
    fn noise_free_identity_converges_in_one_iteration() {
        let n = 16;
        let p = DaftParams::new(n, 1.0 / n as f64, 0.0).unwrap();
        let c = Constellation::qam(4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(67);
        let bits: Vec<u8> = (0..n * 2).map(|_| rng.random::<bool>() as u8).collect();
        let x = c.map_bits(&bits).unwrap();
        let s = idaft(&x, &p);
        let r_fd = dft_unitary(&s);

        let mut hb = CyclicBandedMatrix::zeros(n, 1, 1).unwrap();
        for col in 0..n {
            *hb.diag_entry_mut(0, col) = Complex64::ONE;
        }
        let mut opts = EqualizerOpts::new(p, c.clone());
        opts.half_bw = 1;
        let out = two_stage_from_banded(&hb, &r_fd, 1e-9, &opts, StageDomain::Frequency).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations_soft + out.iterations_hard, 1);
        let expected: Vec<usize> = x.iter().map(|&z| c.nearest_index(z)).collect();
        assert_eq!(out.x_hard, expected);
    }

    #[test]
    fn cm_total_matches_model_identity() {
        let n = 16;
        let p = DaftParams::new(n, 1.0 / n as f64, 0.0).unwrap();
        let c = Constellation::qam(4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(68);
        let hb = random_banded(n, 1, 500);
        let r = random_vec(n, &mut rng);
        let mut opts = EqualizerOpts::new(p, c);
        opts.half_bw = 1;
        opts.i_max = 4;
        let out = two_stage_from_banded(&hb, &r, 0.05, &opts, StageDomain::Frequency).unwrap();
        let model = iteration_model(n, 3, 4);
        let expected = crate::equalizer::stage1::cm_eta0(n, 3)
            + model.eta_hard * out.iterations_hard as u128
            + model.eta_soft * out.iterations_soft as u128;
        assert_eq!(out.cm_total, expected);
    }
}
