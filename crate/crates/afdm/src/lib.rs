//! Filtered-AFDM over general doubly selective channels.
//!
//! Simulation library for AFDM transmission through physical channels with
//! off-grid (continuous-valued) delay and Doppler. Provides:
//!
//! - exact unitary chirp transforms (DAFT/DFT) with both matrix and
//!   O(N log N) fast paths ([`transforms`]),
//! - the RRC prototype / raised-cosine composition filter and the AFDM
//!   transmit chain with chirp-periodic prefix ([`pulse`]),
//! - analytic channel matrices in time, frequency, and DAFT domains plus an
//!   oversampled continuous-time propagation oracle ([`channel`]),
//! - the two-stage frequency-domain equalizer: banded block-Cholesky LMMSE
//!   followed by cross-domain iterative MMSE with hard-decision fallback,
//!   together with the full-block LMMSE reference and time-domain
//!   comparator ([`equalizer`]),
//! - Gray-mapped QAM and seed-reproducible Monte Carlo BER sweeps ([`sim`]).
//!
//! All operations are pure functions of their inputs (random draws take an
//! explicit seeded generator), so independent trials can run concurrently.

pub mod banded;
pub mod channel;
pub mod config;
pub mod equalizer;
pub mod error;
pub mod mat;
pub mod pulse;
pub mod qam;
pub mod sim;
pub mod transforms;
pub mod validate;

pub use banded::CyclicBandedMatrix;
pub use channel::{ChannelMatrix, ChannelProfile, Domain, DoublySelectiveChannel, PathParams};
pub use config::{ChannelSetup, EqualizerConfig, Scheme, SimConfig, SweepConfig, SystemConfig};
pub use equalizer::{
    complexity_model, full_block_lmmse, two_stage_equalize, CmCount, EqualizeResult,
    EqualizerOpts, Stage1Output,
};
pub use error::{AfdmError, Result};
pub use pulse::{AfdmFrame, PulseConfig};
pub use qam::Constellation;
pub use sim::{run_point, run_sweep, TrialRecord};
pub use transforms::DaftParams;
