//! Doubly selective physical channels and their exact channel matrices.
//!
//! A channel is a set of paths with complex gain, continuous delay, and
//! continuous Doppler shift (off-grid: the normalized delay l_p = τ_p/T_s
//! and Doppler k_p = ν_p·T_f are real-valued). The module builds the exact
//! N×N input-output matrices in the time, frequency, and DAFT domains, and
//! provides an oversampled continuous-time propagation oracle for
//! validating the time-domain matrix.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::banded::CyclicBandedMatrix;
use crate::config::{SystemConfig, TapConvention};
use crate::error::{AfdmError, Result};
use crate::mat::CMat;
use crate::pulse::{composition_filter, prototype_table, AfdmFrame, PulseConfig};
use crate::transforms::{cis_turns, dirichlet, DaftParams};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One propagation path.
#[derive(Debug, Clone, Copy)]
pub struct PathParams {
    /// Complex gain h_p.
    pub gain: Complex64,
    /// Delay τ_p in seconds.
    pub delay_s: f64,
    /// Doppler shift ν_p in Hz.
    pub doppler_hz: f64,
    /// Normalized delay l_p = τ_p/T_s.
    pub l: f64,
    /// Normalized Doppler k_p = ν_p·T_f.
    pub k: f64,
}

impl PathParams {
    pub fn new(gain: Complex64, delay_s: f64, doppler_hz: f64, sys: &SystemConfig) -> Self {
        Self {
            gain,
            delay_s,
            doppler_hz,
            l: delay_s / sys.ts(),
            k: doppler_hz * sys.tf(),
        }
    }

    /// h̃_p = h_p·exp(−j2π ν_p τ_p).
    pub fn gain_tilde(&self) -> Complex64 {
        self.gain * cis_turns(-self.doppler_hz * self.delay_s)
    }
}

/// Power-delay profile (average statistics, not a realization).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ChannelProfile {
    pub name: String,
    /// Tap delays in seconds, nondecreasing.
    pub tap_delays_s: Vec<f64>,
    /// Average tap powers in dB.
    pub avg_powers_db: Vec<f64>,
    /// Scale gains so the total average power is 1.
    pub normalize: bool,
}

impl ChannelProfile {
    pub fn new(
        name: impl Into<String>,
        tap_delays_s: Vec<f64>,
        avg_powers_db: Vec<f64>,
        normalize: bool,
    ) -> Result<Self> {
        if tap_delays_s.is_empty() {
            return Err(AfdmError::InvalidParameter("channel profile has no taps".into()));
        }
        if tap_delays_s.len() != avg_powers_db.len() {
            return Err(AfdmError::InvalidParameter(
                "tap delay and power vectors must have the same length".into(),
            ));
        }
        if tap_delays_s.windows(2).any(|w| w[1] < w[0]) {
            return Err(AfdmError::InvalidParameter("tap delays must be nondecreasing".into()));
        }
        Ok(Self { name: name.into(), tap_delays_s, avg_powers_db, normalize })
    }

    /// 3GPP Extended Vehicular A: 9 taps, delays up to 2510 ns.
    pub fn eva() -> Self {
        let delays_ns = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];
        let powers_db = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];
        Self {
            name: "eva".into(),
            tap_delays_s: delays_ns.iter().map(|d| d * 1e-9).collect(),
            avg_powers_db: powers_db.to_vec(),
            normalize: true,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "eva" => Ok(Self::eva()),
            other => Err(AfdmError::Config(format!(
                "unknown channel profile '{other}' (built-in: eva)"
            ))),
        }
    }

    /// Parse a plain-text profile: `name = ...`, `delays_ns = a, b, ...`,
    /// `powers_db = a, b, ...`, optional `normalize = true|false`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut delays_ns: Option<Vec<f64>> = None;
        let mut powers_db: Option<Vec<f64>> = None;
        let mut normalize = true;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AfdmError::Config(format!("profile line is not 'key = value': {line}"))
            })?;
            let value = value.trim();
            let parse_list = |v: &str| -> Result<Vec<f64>> {
                v.split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|_| {
                            AfdmError::Config(format!("bad number '{t}' in profile"))
                        })
                    })
                    .collect()
            };
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "delays_ns" => delays_ns = Some(parse_list(value)?),
                "powers_db" => powers_db = Some(parse_list(value)?),
                "normalize" => {
                    normalize = value.parse::<bool>().map_err(|_| {
                        AfdmError::Config(format!("bad bool '{value}' for normalize"))
                    })?
                }
                other => {
                    return Err(AfdmError::Config(format!("unknown profile key '{other}'")));
                }
            }
        }
        let delays = delays_ns
            .ok_or_else(|| AfdmError::Config("profile missing delays_ns".into()))?
            .iter()
            .map(|d| d * 1e-9)
            .collect();
        let powers =
            powers_db.ok_or_else(|| AfdmError::Config("profile missing powers_db".into()))?;
        Self::new(name.unwrap_or_else(|| "custom".into()), delays, powers, normalize)
    }

    pub fn len(&self) -> usize {
        self.tap_delays_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tap_delays_s.is_empty()
    }

    fn linear_power_weights(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.avg_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        if self.normalize {
            let total: f64 = lin.iter().sum();
            lin.iter().map(|p| p / total).collect()
        } else {
            lin
        }
    }
}

/// A channel realization.
#[derive(Debug, Clone)]
pub struct DoublySelectiveChannel {
    pub paths: Vec<PathParams>,
    pub l_max: f64,
    pub k_max: f64,
}

impl DoublySelectiveChannel {
    pub fn new(paths: Vec<PathParams>) -> Result<Self> {
        if paths.is_empty() {
            return Err(AfdmError::InvalidParameter("channel must have at least one path".into()));
        }
        let l_max = paths.iter().map(|p| p.l).fold(0.0, f64::max);
        let k_max = paths.iter().map(|p| p.k.abs()).fold(0.0, f64::max);
        Ok(Self { paths, l_max, k_max })
    }
}

/// Draw a channel realization: Rayleigh gains from the profile powers and
/// per-path Doppler ν_p = f_d,max·cosθ_p with θ_p uniform (Jakes' model).
pub fn sample_channel(
    profile: &ChannelProfile,
    carrier_hz: f64,
    v_max_mps: f64,
    rng: &mut impl Rng,
    sys: &SystemConfig,
) -> Result<DoublySelectiveChannel> {
    if profile.is_empty() {
        return Err(AfdmError::InvalidParameter("channel profile has no taps".into()));
    }
    let fd_max = v_max_mps * carrier_hz / SPEED_OF_LIGHT;
    let weights = profile.linear_power_weights();
    let paths = profile
        .tap_delays_s
        .iter()
        .zip(&weights)
        .map(|(&delay, &w)| {
            let std = (w / 2.0).sqrt();
            let gain = Complex64::new(
                std * rng.sample::<f64, _>(StandardNormal),
                std * rng.sample::<f64, _>(StandardNormal),
            );
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let doppler = fd_max * theta.cos();
            PathParams::new(gain, delay, doppler, sys)
        })
        .collect();
    DoublySelectiveChannel::new(paths)
}

/// Build a deterministic realization from per-path powers (dB) and signed
/// speeds (km/h), as in a published channel snapshot. Gains take the listed
/// magnitudes with zero phase, normalized to unit total power when the
/// profile asks for it.
pub fn channel_from_realization(
    profile: &ChannelProfile,
    powers_db: &[f64],
    speeds_kmh: &[f64],
    carrier_hz: f64,
    sys: &SystemConfig,
) -> Result<DoublySelectiveChannel> {
    if powers_db.len() != profile.len() || speeds_kmh.len() != profile.len() {
        return Err(AfdmError::InvalidParameter(
            "realization powers/speeds must match the profile tap count".into(),
        ));
    }
    let lin: Vec<f64> = powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let total: f64 = if profile.normalize { lin.iter().sum() } else { 1.0 };
    let paths = profile
        .tap_delays_s
        .iter()
        .zip(lin.iter().zip(speeds_kmh))
        .map(|(&delay, (&p, &v_kmh))| {
            let gain = Complex64::new((p / total).sqrt(), 0.0);
            let doppler = v_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT;
            PathParams::new(gain, delay, doppler, sys)
        })
        .collect();
    DoublySelectiveChannel::new(paths)
}

/// Per-path powers (dB) of the documented wideband demo snapshot.
pub const DEMO_SNAPSHOT_POWERS_DB: [f64; 9] =
    [-3.6, -5.9, -10.5, -4.2, -5.0, -6.8, -6.5, -9.2, -11.7];

/// Signed per-path speeds (km/h) of the documented wideband demo snapshot.
pub const DEMO_SNAPSHOT_SPEEDS_KMH: [f64; 9] =
    [153.0, -472.0, 472.0, -380.0, 3.0, 189.0, 496.0, 482.0, -486.0];

/// The fixed wideband demo channel snapshot: EVA delays with the documented
/// per-path powers and signed speeds at f_c = 6 GHz.
pub fn demo_wideband_snapshot(sys: &SystemConfig) -> Result<DoublySelectiveChannel> {
    channel_from_realization(
        &ChannelProfile::eva(),
        &DEMO_SNAPSHOT_POWERS_DB,
        &DEMO_SNAPSHOT_SPEEDS_KMH,
        6e9,
        sys,
    )
}

/// Matrix domain tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Frequency,
    Daft,
}

/// Dense N×N channel matrix tagged with its domain.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub domain: Domain,
    pub entries: CMat,
}

impl ChannelMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// Composition-filter taps of one path: indices d with g(d·T_s − τ_p) inside
/// the truncated support.
fn path_taps(l: f64, pc: &PulseConfig, conv: TapConvention) -> (i64, Vec<f64>) {
    let half = (pc.d() / 2) as i64;
    let (lo, hi) = match conv {
        TapConvention::Symmetric => (l.ceil() as i64 - half, l.floor() as i64 + half),
        TapConvention::Causal => (l.ceil() as i64, pc.d() as i64 + l.floor() as i64),
    };
    let ts = pc.symbol_period();
    let taps = (lo..=hi)
        .map(|d| composition_filter(d as f64 * ts - l * ts, pc))
        .collect();
    (lo, taps)
}

/// Time-domain channel matrix:
/// H[n,n'] = Σ_p h̃_p·g((n−n')_N·T_s − τ_p)·exp(j2π k_p n/N), with the
/// cyclic lag interpreted over each path's truncated tap range.
pub fn td_channel_matrix(
    ch: &DoublySelectiveChannel,
    sys: &SystemConfig,
    pc: &PulseConfig,
) -> ChannelMatrix {
    let n = sys.n;
    let mut m = CMat::zeros(n, n);
    for path in &ch.paths {
        let ht = path.gain_tilde();
        let (d_lo, taps) = path_taps(path.l, pc, sys.tap_convention);
        let ramp: Vec<Complex64> =
            (0..n).map(|i| cis_turns(path.k * i as f64 / n as f64) * ht).collect();
        for (row, &r) in ramp.iter().enumerate() {
            let dst = m.row_mut(row);
            for (j, &g) in taps.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let col = (row as i64 - (d_lo + j as i64)).rem_euclid(n as i64) as usize;
                dst[col] += r * g;
            }
        }
    }
    ChannelMatrix { domain: Domain::Time, entries: m }
}

/// Per-path frequency-domain ingredients shared by the FD and DAFT builders:
/// ġ_p[n̄] = Σ_d g(dT_s−τ_p)e^{−j2πn̄d/N} and Ω(q + k_p) for q = 0..N−1.
struct PathSpectrum {
    gain_tilde: Complex64,
    g_dot: Vec<Complex64>,
    omega: Vec<Complex64>,
    d_lo: i64,
    taps: Vec<f64>,
}

fn path_spectra(
    ch: &DoublySelectiveChannel,
    sys: &SystemConfig,
    pc: &PulseConfig,
) -> Vec<PathSpectrum> {
    let n = sys.n;
    let roots: Vec<Complex64> = (0..n).map(|j| cis_turns(-(j as f64) / n as f64)).collect();
    ch.paths
        .iter()
        .map(|path| {
            let (d_lo, taps) = path_taps(path.l, pc, sys.tap_convention);
            let g_dot = (0..n)
                .map(|nb| {
                    taps.iter()
                        .enumerate()
                        .map(|(j, &g)| {
                            let d = d_lo + j as i64;
                            let idx = (nb as i64 * d).rem_euclid(n as i64) as usize;
                            roots[idx] * g
                        })
                        .sum()
                })
                .collect();
            let omega = (0..n).map(|q| dirichlet(q as f64 + path.k, n)).collect();
            PathSpectrum { gain_tilde: path.gain_tilde(), g_dot, omega, d_lo, taps }
        })
        .collect()
}

/// Frequency-domain channel matrix:
/// Ḣ[ṅ,n̄] = (1/N)·Σ_p h̃_p·ġ_p[n̄]·Ω(n̄−ṅ+k_p), normalized so that
/// Ḣ = F·H·Fᴴ with the unitary DFT.
pub fn fd_channel_matrix(
    ch: &DoublySelectiveChannel,
    sys: &SystemConfig,
    pc: &PulseConfig,
) -> ChannelMatrix {
    let n = sys.n;
    let spectra = path_spectra(ch, sys, pc);
    let mut m = CMat::zeros(n, n);
    let inv_n = 1.0 / n as f64;
    for sp in &spectra {
        for row in 0..n {
            let dst = m.row_mut(row);
            for (col, dv) in dst.iter_mut().enumerate() {
                let q = (col + n - row) % n;
                *dv += sp.gain_tilde * sp.g_dot[col] * sp.omega[q] * inv_n;
            }
        }
    }
    ChannelMatrix { domain: Domain::Frequency, entries: m }
}

/// Band-limited FD builder: fills only the cyclic diagonals within
/// ±half_bw. Identical entries to [`fd_channel_matrix`] restricted to the
/// band; used by the Monte Carlo loop where the dense matrix is never
/// needed.
pub fn fd_channel_matrix_banded(
    ch: &DoublySelectiveChannel,
    sys: &SystemConfig,
    pc: &PulseConfig,
    half_bw: usize,
) -> Result<CyclicBandedMatrix> {
    let n = sys.n;
    let spectra = path_spectra(ch, sys, pc);
    let mut hb = CyclicBandedMatrix::zeros(n, half_bw, half_bw)?;
    let inv_n = 1.0 / n as f64;
    for sp in &spectra {
        for col in 0..n {
            let base = sp.gain_tilde * sp.g_dot[col] * inv_n;
            for diag in -(half_bw as i64)..=(half_bw as i64) {
                // row − col = diag, Ω argument q ≡ col − row = −diag
                let q = (-diag).rem_euclid(n as i64) as usize;
                let add = base * sp.omega[q];
                *hb.diag_entry_mut(diag, col) += add;
            }
        }
    }
    Ok(hb)
}

/// DAFT-domain channel matrix (requires 2c₁N ∈ ℤ, N even — enforced by
/// [`DaftParams`]):
/// Ḧ[ṁ,m] = (1/N)·e^{−j2πc₂ṁ²}·Σ_p h̃_p Σ_d g(dT_s−τ_p)e^{j2πc₁d²}
///          ·e^{j2π(c₂m²−dm/N)}·Ω(m−ṁ−2c₁Nd+k_p),
/// normalized so that Ḧ = Φ·H·Φᴴ.
pub fn daft_channel_matrix(
    ch: &DoublySelectiveChannel,
    sys: &SystemConfig,
    pc: &PulseConfig,
    p: &DaftParams,
) -> ChannelMatrix {
    let n = sys.n;
    debug_assert_eq!(n, p.n());
    let spectra = path_spectra(ch, sys, pc);
    let two_c1_n = p.two_c1_n();
    let mut m = CMat::zeros(n, n);
    let inv_n = 1.0 / n as f64;
    for sp in &spectra {
        for (j, &g) in sp.taps.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let d = sp.d_lo + j as i64;
            let coeff = sp.gain_tilde * g * cis_turns(p.c1() * (d * d) as f64) * inv_n;
            let shift = two_c1_n * d;
            for col in 0..n {
                let colf = coeff
                    * cis_turns(p.c2() * (col * col) as f64 - (d * col as i64) as f64 / n as f64);
                for row in 0..n {
                    let q = (col as i64 - row as i64 - shift).rem_euclid(n as i64) as usize;
                    m[(row, col)] += colf * sp.omega[q];
                }
            }
        }
    }
    for row in 0..n {
        let pre = cis_turns(-p.c2() * (row * row) as f64);
        for v in m.row_mut(row) {
            *v *= pre;
        }
    }
    ChannelMatrix { domain: Domain::Daft, entries: m }
}

/// r = H·s + w over one frame (time domain, prefix already absorbed by the
/// cyclic model). w is i.i.d. circular complex Gaussian, variance `sigma2`
/// per sample.
pub fn propagate(
    frame: &AfdmFrame,
    h: &ChannelMatrix,
    sigma2: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    if h.domain != Domain::Time {
        return Err(AfdmError::DomainMismatch { expected: Domain::Time, got: h.domain });
    }
    if sigma2 < 0.0 {
        return Err(AfdmError::InvalidParameter("sigma2 must be nonnegative".into()));
    }
    let mut r = h.entries.mul_vec(&frame.s);
    if sigma2 > 0.0 {
        let std = (sigma2 / 2.0).sqrt();
        for v in &mut r {
            *v += Complex64::new(
                std * rng.sample::<f64, _>(StandardNormal),
                std * rng.sample::<f64, _>(StandardNormal),
            );
        }
    }
    Ok(r)
}

/// Ground-truth propagation oracle: synthesizes the filtered waveform,
/// applies each path's continuous delay and Doppler phase ramp analytically,
/// matched-filters with a*(−t), and samples at t = nT_s.
///
/// The transmitted samples are extended cyclically on both sides by the
/// pulse support (the CPP coincides with a CP under the frame constraints,
/// so the cyclic extension is the prefix semantics the discrete model
/// assumes).
pub fn oversampled_propagate(
    frame: &AfdmFrame,
    ch: &DoublySelectiveChannel,
    pc: &PulseConfig,
    osf: usize,
    sigma2: f64,
    rng: &mut impl Rng,
) -> Vec<Complex64> {
    assert!(osf >= 8, "oversampled_propagate: osf must be at least 8");
    let n = frame.s.len() as i64;
    let a_half = pc.a_half() as i64;
    let ext = 2 * a_half + ch.l_max.ceil() as i64 + 2;
    let first = -ext;
    let last = n - 1 + ext;
    let s_ext: Vec<Complex64> = (first..=last)
        .map(|idx| frame.s[idx.rem_euclid(n) as usize])
        .collect();

    // received grid covers the matched-filter support of samples 0..N−1
    let q_lo = -a_half * osf as i64;
    let q_hi = (n - 1 + a_half) * osf as i64;
    let mut received = vec![Complex64::ZERO; (q_hi - q_lo + 1) as usize];

    for path in &ch.paths {
        let int_delay = path.l.floor() as i64;
        let frac = path.l - int_delay as f64;
        let (table, center) = prototype_table(pc, osf, frac);
        let mut y = vec![Complex64::ZERO; received.len()];
        for (k, &s) in s_ext.iter().enumerate() {
            if s == Complex64::ZERO {
                continue;
            }
            let sym_q = (first + k as i64 + int_delay) * osf as i64;
            for (j, &a) in table.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let q = sym_q + j as i64 - center;
                if q >= q_lo && q <= q_hi {
                    y[(q - q_lo) as usize] += s * a;
                }
            }
        }
        // Doppler ramp e^{j2πν_p(t−τ_p)} and path gain
        let turns_per_grid = path.k / (n as f64 * osf as f64);
        for (i, v) in y.iter().enumerate() {
            if *v == Complex64::ZERO {
                continue;
            }
            let u_q = (q_lo + i as i64) as f64;
            let ramp = cis_turns(turns_per_grid * u_q - path.k * path.l / n as f64);
            received[i] += path.gain * v * ramp;
        }
    }

    let mut out =
        crate::pulse::matched_filter_sample(&received, q_lo, pc, osf, 0, n as usize);
    if sigma2 > 0.0 {
        let std = (sigma2 / 2.0).sqrt();
        for v in &mut out {
            *v += Complex64::new(
                std * rng.sample::<f64, _>(StandardNormal),
                std * rng.sample::<f64, _>(StandardNormal),
            );
        }
    }
    out
}

/// Analytic band-occupancy figures for the three domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthEstimates {
    /// Lower bandwidth of the TD matrix (symmetric-g convention:
    /// D/2 + ⌈l_max⌉).
    pub td_lower_bw: usize,
    /// Half-bandwidth of the FD matrix: γ + ⌈k_max⌉.
    pub fd_half_bw: usize,
    /// Total DAFT-domain spread λ = |2c₁N|(D+⌈l_max⌉) + 2(γ+⌈k_max⌉) + 1.
    pub daft_total_bw: usize,
}

pub fn bandwidth_estimates(
    ch: &DoublySelectiveChannel,
    pc: &PulseConfig,
    p: &DaftParams,
    gamma: usize,
) -> BandwidthEstimates {
    let l_ceil = ch.l_max.ceil() as usize;
    let k_ceil = ch.k_max.ceil() as usize;
    let fd_half_bw = gamma + k_ceil;
    BandwidthEstimates {
        td_lower_bw: pc.d() / 2 + l_ceil,
        fd_half_bw,
        daft_total_bw: p.two_c1_n().unsigned_abs() as usize * (pc.d() + l_ceil) + 2 * fd_half_bw + 1,
    }
}
