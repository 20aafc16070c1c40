//! Prototype/composition filters and the AFDM transmit chain.
//!
//! The prototype filter a(t) is a unit-energy root raised cosine; the
//! composition filter g(t) = a(t) ∗ a*(−t) is then the raised cosine,
//! evaluated in closed form so its Nyquist zeros are exact. The transmit
//! chain maps DAFT-domain symbols to the discrete time-domain signal with a
//! chirp-periodic prefix; an oversampled continuous-time synthesizer is
//! provided as a validation oracle.

use num_complex::Complex64;

use crate::error::{AfdmError, Result};
use crate::transforms::{cis_turns, idaft, DaftParams};

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Pulse shaping parameters. `d` (the effective two-sided support of g in
/// symbol periods, even) and `a_half` (the prototype truncation radius) are
/// derived from `trunc_threshold` at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseConfig {
    rolloff: f64,
    symbol_period: f64,
    trunc_threshold: f64,
    d: usize,
    a_half: usize,
}

/// Largest |u| (symbol periods) where |f(u)| ≥ thr, scanned on a 1/64 grid.
fn support_radius(f: impl Fn(f64) -> f64, thr: f64) -> Result<f64> {
    const CAP: f64 = 512.0;
    const STEP: f64 = 1.0 / 64.0;
    let mut u = CAP;
    while u > 0.0 {
        if f(u).abs() >= thr {
            return Ok(u);
        }
        u -= STEP;
    }
    Ok(0.0)
}

impl PulseConfig {
    pub fn new(rolloff: f64, symbol_period: f64, trunc_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(AfdmError::InvalidParameter(format!(
                "rolloff must be in [0,1], got {rolloff}"
            )));
        }
        if symbol_period <= 0.0 {
            return Err(AfdmError::InvalidParameter("symbol_period must be positive".into()));
        }
        if !(trunc_threshold > 0.0 && trunc_threshold < 1.0) {
            return Err(AfdmError::InvalidParameter(format!(
                "trunc_threshold must be in (0,1), got {trunc_threshold}"
            )));
        }
        let g_radius = support_radius(|u| raised_cosine(u, rolloff), trunc_threshold)?;
        let d = 2 * (g_radius.ceil() as usize).max(1);
        let a0 = rrc(0.0, rolloff);
        let a_radius = support_radius(|u| rrc(u, rolloff) / a0, trunc_threshold)?;
        let a_half = (a_radius.ceil() as usize).max(1);
        Ok(Self { rolloff, symbol_period, trunc_threshold, d, a_half })
    }

    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }

    pub fn symbol_period(&self) -> f64 {
        self.symbol_period
    }

    pub fn trunc_threshold(&self) -> f64 {
        self.trunc_threshold
    }

    /// Effective support of g in symbol periods (two-sided, even): |g| is
    /// below the truncation threshold for all |t| > (d/2)·T_s.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Truncation radius of the prototype a(t), in symbol periods.
    pub fn a_half(&self) -> usize {
        self.a_half
    }
}

/// Raised cosine in normalized time u = t/T_s; unit peak g(0) = 1, Nyquist
/// zeros at nonzero integers. The removable singularity at |u| = 1/(2β) is
/// evaluated by the analytic limit (π/4)·sinc(u).
fn raised_cosine(u: f64, rolloff: f64) -> f64 {
    if rolloff == 0.0 {
        return sinc(u);
    }
    let x = 2.0 * rolloff * u;
    let den = 1.0 - x * x;
    if den.abs() < 1e-7 {
        return std::f64::consts::FRAC_PI_4 * sinc(u);
    }
    sinc(u) * (std::f64::consts::PI * rolloff * u).cos() / den
}

/// Unit-energy root raised cosine in normalized time (∫a(u)² du = 1).
fn rrc(u: f64, rolloff: f64) -> f64 {
    use std::f64::consts::PI;
    if rolloff == 0.0 {
        return sinc(u);
    }
    if u.abs() < 1e-10 {
        return 1.0 - rolloff + 4.0 * rolloff / PI;
    }
    let quarter = 1.0 / (4.0 * rolloff);
    if (u.abs() - quarter).abs() < 1e-9 {
        let arg = PI * quarter;
        return rolloff / 2f64.sqrt()
            * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * u * (1.0 - rolloff)).sin() + 4.0 * rolloff * u * (PI * u * (1.0 + rolloff)).cos();
    let den = PI * u * (1.0 - (4.0 * rolloff * u) * (4.0 * rolloff * u));
    num / den
}

/// Composition filter g(t) = a(t) ∗ a*(−t): the raised cosine, with t in
/// seconds.
pub fn composition_filter(t: f64, pc: &PulseConfig) -> f64 {
    raised_cosine(t / pc.symbol_period, pc.rolloff)
}

/// Prototype filter a(t) in seconds, unit energy (∫a(t)²dt = 1).
pub fn prototype_filter(t: f64, pc: &PulseConfig) -> f64 {
    rrc(t / pc.symbol_period, pc.rolloff) / pc.symbol_period.sqrt()
}

/// One AFDM frame: DAFT-domain symbols, discrete TD signal, and the signal
/// with chirp-periodic prefix.
#[derive(Debug, Clone)]
pub struct AfdmFrame {
    pub x: Vec<Complex64>,
    pub s: Vec<Complex64>,
    pub s_cpp: Vec<Complex64>,
    pub l_cpp: usize,
}

/// Prepend the chirp-periodic prefix: s_cpp[n] = s[N+n]·exp(−j2πc₁(N²+2Nn))
/// for −L_cpp ≤ n ≤ −1. Under 2c₁N ∈ ℤ and N even the phase factor is 1 and
/// the prefix is a plain cyclic prefix.
pub fn add_cpp(s: &[Complex64], p: &DaftParams, l_cpp: usize) -> Result<Vec<Complex64>> {
    let n = p.n();
    assert_eq!(s.len(), n, "add_cpp: length mismatch");
    if l_cpp > n {
        return Err(AfdmError::InvalidParameter(format!(
            "L_cpp = {l_cpp} exceeds frame length N = {n}"
        )));
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(n + l_cpp);
    for i in 0..l_cpp {
        let neg = i as f64 - l_cpp as f64; // n ∈ [−L_cpp, −1]
        let phase = cis_turns(-p.c1() * (nf * nf + 2.0 * nf * neg));
        out.push(s[n - l_cpp + i] * phase);
    }
    out.extend_from_slice(s);
    Ok(out)
}

/// DAFT-domain symbols → AFDM frame: s = idaft(x), then the CPP.
pub fn modulate(x: &[Complex64], p: &DaftParams, l_cpp: usize) -> Result<AfdmFrame> {
    assert_eq!(x.len(), p.n(), "modulate: length mismatch");
    let s = idaft(x, p);
    let s_cpp = add_cpp(&s, p, l_cpp)?;
    Ok(AfdmFrame { x: x.to_vec(), s, s_cpp, l_cpp })
}

/// Table of the prototype filter on the oversampled grid: entry j holds
/// a((j − center)/osf − frac_offset) in normalized time, for j covering the
/// truncated support. Returns (table, center).
pub(crate) fn prototype_table(pc: &PulseConfig, osf: usize, frac_offset: f64) -> (Vec<f64>, i64) {
    let half = (pc.a_half as i64 + frac_offset.abs().ceil() as i64 + 1) * osf as i64;
    let table: Vec<f64> = (-half..=half)
        .map(|j| rrc(j as f64 / osf as f64 - frac_offset, pc.rolloff))
        .collect();
    (table, half)
}

/// Continuous-time filtered-AFDM waveform on the grid t = q·T_s/osf
/// (normalized amplitude: the 1/√T_s of a(t) is omitted, which cancels in
/// the matched filter). The grid starts at symbol index
/// −(l_cpp + a_half); use [`waveform_grid_start`] to locate it.
pub fn synthesize_oversampled(frame: &AfdmFrame, pc: &PulseConfig, osf: usize) -> Vec<Complex64> {
    assert!(osf >= 4, "synthesize_oversampled: osf must be at least 4");
    let first = -(frame.l_cpp as i64);
    synthesize_from_samples(&frame.s_cpp, first, pc, osf)
}

/// Grid start of [`synthesize_oversampled`] in units of T_s/osf.
pub fn waveform_grid_start(frame: &AfdmFrame, pc: &PulseConfig, osf: usize) -> i64 {
    (-(frame.l_cpp as i64) - pc.a_half as i64) * osf as i64
}

/// Σ_n samples[n]·a(t − n_sym(n)·T_s) on the oversampled grid, where sample
/// k sits at symbol index first_index + k. Grid spans the samples padded by
/// the prototype support.
pub(crate) fn synthesize_from_samples(
    samples: &[Complex64],
    first_index: i64,
    pc: &PulseConfig,
    osf: usize,
) -> Vec<Complex64> {
    let (table, center) = prototype_table(pc, osf, 0.0);
    let a_half = pc.a_half as i64;
    let q0 = (first_index - a_half) * osf as i64;
    let q1 = (first_index + samples.len() as i64 - 1 + a_half) * osf as i64;
    let mut wave = vec![Complex64::ZERO; (q1 - q0 + 1) as usize];
    for (k, &s) in samples.iter().enumerate() {
        if s == Complex64::ZERO {
            continue;
        }
        let sym_q = (first_index + k as i64) * osf as i64;
        for (j, &a) in table.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let q = sym_q + j as i64 - center;
            if q >= q0 && q <= q1 {
                wave[(q - q0) as usize] += s * a;
            }
        }
    }
    wave
}

/// Matched-filter the waveform with a*(−t) and sample at integer symbol
/// indices `out_first..out_first+count` (Riemann quadrature at the grid
/// resolution). `grid_start` is in units of T_s/osf.
pub(crate) fn matched_filter_sample(
    wave: &[Complex64],
    grid_start: i64,
    pc: &PulseConfig,
    osf: usize,
    out_first: i64,
    count: usize,
) -> Vec<Complex64> {
    let (table, center) = prototype_table(pc, osf, 0.0);
    let dt = 1.0 / osf as f64;
    (0..count)
        .map(|i| {
            let sym_q = (out_first + i as i64) * osf as i64;
            let mut acc = Complex64::ZERO;
            for (j, &a) in table.iter().enumerate() {
                let q = sym_q + j as i64 - center;
                let idx = q - grid_start;
                if idx >= 0 && (idx as usize) < wave.len() {
                    acc += wave[idx as usize] * a;
                }
            }
            acc * dt
        })
        .collect()
}
