//! Simulation configuration types.
//!
//! These mirror the CLI config file sections. All fields are plain data;
//! derived quantities (symbol period, DAFT parameters, pulse support) come
//! from accessor methods so a config can be validated once and used
//! everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{AfdmError, Result};
use crate::pulse::PulseConfig;
use crate::transforms::DaftParams;

/// Tap-range convention for the composition filter in channel-matrix
/// construction. `Symmetric` centers g's support on each path's delay;
/// `Causal` replicates the one-sided convention with taps in
/// [⌈l_p⌉, D+⌊l_p⌋].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TapConvention {
    #[default]
    Symmetric,
    Causal,
}

/// Waveform and frame numerology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Frame length (DAFT-domain symbols). Must be even.
    pub n: usize,
    /// Nominal bandwidth B in Hz; the symbol period is 1/B.
    pub bandwidth_hz: f64,
    /// Frame duration T_f in seconds. Optional: derived as N/B when absent,
    /// cross-checked within 1% when present (stated values are often
    /// rounded).
    #[serde(default)]
    pub frame_duration_s: Option<f64>,
    /// Post-chirp parameter c₁. Defaults to 1/N; set 0 for the OFDM
    /// degenerate case.
    #[serde(default)]
    pub c1: Option<f64>,
    /// Pre-chirp parameter c₂ (phase-only effect; default 0).
    #[serde(default)]
    pub c2: f64,
    /// CPP length. Defaults to D/2 + ⌈l_max⌉ + 1 once the channel is known.
    #[serde(default)]
    pub l_cpp: Option<usize>,
    /// RRC roll-off factor.
    pub rolloff: f64,
    /// Relative amplitude below which the composition filter is truncated.
    pub trunc_threshold: f64,
    /// Dirichlet half-support estimate γ used by bandwidth figures.
    #[serde(default = "default_gamma")]
    pub gamma: usize,
    #[serde(default)]
    pub tap_convention: TapConvention,
}

fn default_gamma() -> usize {
    4
}

impl SystemConfig {
    /// The demonstrative wideband system: B = 7.68 MHz, N = 512,
    /// c₁ = 1/N, RRC roll-off 0.1.
    pub fn wideband_512() -> Self {
        Self {
            n: 512,
            bandwidth_hz: 7.68e6,
            frame_duration_s: None,
            c1: None,
            c2: 0.0,
            l_cpp: None,
            rolloff: 0.1,
            trunc_threshold: 1e-3,
            gamma: 4,
            tap_convention: TapConvention::Symmetric,
        }
    }

    pub fn ts(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    pub fn tf(&self) -> f64 {
        self.n as f64 * self.ts()
    }

    pub fn c1(&self) -> f64 {
        self.c1.unwrap_or(1.0 / self.n as f64)
    }

    pub fn daft_params(&self) -> Result<DaftParams> {
        DaftParams::new(self.n, self.c1(), self.c2)
    }

    pub fn pulse_config(&self) -> Result<PulseConfig> {
        PulseConfig::new(self.rolloff, self.ts(), self.trunc_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 2 != 0 {
            return Err(AfdmError::Config(format!("N must be even and positive, got {}", self.n)));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(AfdmError::Config("bandwidth must be positive".into()));
        }
        if let Some(tf) = self.frame_duration_s {
            let derived = self.tf();
            if ((tf - derived) / derived).abs() > 0.01 {
                return Err(AfdmError::Config(format!(
                    "frame_duration_s = {tf} inconsistent with N/B = {derived}"
                )));
            }
        }
        self.daft_params()?;
        self.pulse_config()?;
        Ok(())
    }
}

/// Physical channel description: profile taps plus mobility parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSetup {
    /// Profile name; "eva" selects the built-in EVA table.
    #[serde(default = "default_profile")]
    pub profile: String,
    /// Inline tap delays (ns), overriding the named profile.
    #[serde(default)]
    pub tap_delays_ns: Option<Vec<f64>>,
    /// Inline average tap powers (dB), paired with `tap_delays_ns`.
    #[serde(default)]
    pub tap_powers_db: Option<Vec<f64>>,
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Maximum UE speed in m/s (Jakes' model draws per-path Doppler as
    /// f_d,max·cosθ).
    pub v_max_mps: f64,
}

fn default_profile() -> String {
    "eva".into()
}

/// Equalization scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Proposed two-stage frequency-domain equalizer.
    FdTwoStage,
    /// Same two-stage pipeline band-approximated and run in the time domain.
    TdTwoStage,
    /// Stage 1 only (banded LMMSE, hard decision).
    BandedLmmseOnly,
    /// Exact full-block LMMSE stage 1 followed by the same stage 2.
    FullLmmse,
    /// OFDM baseline: the c₁ = 0 degenerate AFDM case, FD two-stage.
    OfdmFd,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::FdTwoStage => "fd-two-stage",
            Scheme::TdTwoStage => "td-two-stage",
            Scheme::BandedLmmseOnly => "banded-lmmse-only",
            Scheme::FullLmmse => "full-lmmse",
            Scheme::OfdmFd => "ofdm-fd",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = AfdmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd-two-stage" => Ok(Scheme::FdTwoStage),
            "td-two-stage" => Ok(Scheme::TdTwoStage),
            "banded-lmmse-only" => Ok(Scheme::BandedLmmseOnly),
            "full-lmmse" => Ok(Scheme::FullLmmse),
            "ofdm-fd" => Ok(Scheme::OfdmFd),
            other => Err(AfdmError::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Equalizer options (spec-level; `band` is the total cyclic bandwidth β
/// for FD schemes or α for the TD scheme, odd).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualizerConfig {
    pub scheme: Scheme,
    /// Total band approximation width (β = 2β̇+1 or α), odd.
    #[serde(default = "default_band")]
    pub band: usize,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    /// Halt threshold ς for ‖x̃⁽ⁱ⁾−x̃⁽ⁱ⁻¹⁾‖₂; default 1e-2·√N.
    #[serde(default)]
    pub halt_threshold: Option<f64>,
    #[serde(default = "default_fallback_threshold")]
    pub fallback_threshold: f64,
    #[serde(default = "default_true")]
    pub fallback_enabled: bool,
}

fn default_band() -> usize {
    7
}

fn default_i_max() -> usize {
    15
}

fn default_fallback_threshold() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

/// Monte Carlo sweep control.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub esn0_db: Vec<f64>,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    #[serde(default = "default_target_errors")]
    pub target_bit_errors: u64,
}

fn default_max_frames() -> u64 {
    20_000
}

fn default_target_errors() -> u64 {
    100
}

/// Complete simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub system: SystemConfig,
    pub channel: ChannelSetup,
    pub equalizer: EqualizerConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_order")]
    pub constellation_order: usize,
}

fn default_workers() -> usize {
    1
}

fn default_order() -> usize {
    4
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.sweep.esn0_db.is_empty() {
            return Err(AfdmError::Config("esn0_db list must be nonempty".into()));
        }
        if self.sweep.max_frames == 0 {
            return Err(AfdmError::Config("max_frames must be positive".into()));
        }
        if self.equalizer.band % 2 == 0 || self.equalizer.band == 0 {
            return Err(AfdmError::Config(format!(
                "band approximation width must be odd, got {}",
                self.equalizer.band
            )));
        }
        if self.workers == 0 {
            return Err(AfdmError::Config("workers must be at least 1".into()));
        }
        if !matches!(self.constellation_order, 4 | 16 | 64) {
            return Err(AfdmError::Config(format!(
                "constellation order must be 4, 16, or 64, got {}",
                self.constellation_order
            )));
        }
        if self.channel.tap_delays_ns.is_some() != self.channel.tap_powers_db.is_some() {
            return Err(AfdmError::Config(
                "inline taps require both tap_delays_ns and tap_powers_db".into(),
            ));
        }
        Ok(())
    }
}
