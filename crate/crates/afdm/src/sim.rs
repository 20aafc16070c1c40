//! Monte Carlo BER/complexity experiments.
//!
//! A sweep point runs independent frames: draw a channel realization and
//! data bits, modulate, propagate through the exact time-domain matrix with
//! AWGN, equalize with the configured scheme, demap, and accumulate bit
//! errors and analytic CM counts. Every frame is seeded by a counter
//! derivation from the master seed, so results are bit-identical for any
//! worker count, and a point stops at max_frames or once the target bit
//! errors are collected, whichever comes first (evaluated in frame order).

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::banded::band_approximate;
use crate::channel::{
    fd_channel_matrix_banded, propagate, sample_channel, td_channel_matrix, ChannelMatrix,
    ChannelProfile,
};
use crate::config::{Scheme, SimConfig, SystemConfig};
use crate::equalizer::{
    eta_transform_pair, full_lmmse_stage1, two_stage_from_banded, two_stage_with_stage1,
    window_source_half, EqualizerOpts, StageDomain,
};
use crate::error::{AfdmError, Result};
use crate::pulse::{modulate, PulseConfig};
use crate::qam::Constellation;
use crate::transforms::{dft_unitary, DaftParams};

/// One sweep-point result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub esn0_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_cm: f64,
    pub mean_iter_soft: f64,
    pub mean_iter_hard: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// [`TrialRecord`] plus per-frame second moments for Monte Carlo standard
/// errors.
#[derive(Debug, Clone)]
pub struct RunStats {
    pub record: TrialRecord,
    /// Σ over frames of (bit errors per frame)².
    pub frame_err_sq_sum: f64,
    pub bits_per_frame: u64,
}

impl RunStats {
    /// Standard error of the BER estimate from per-frame error counts.
    pub fn ber_std_err(&self) -> f64 {
        let f = self.record.frames as f64;
        if f < 2.0 {
            return f64::INFINITY;
        }
        let mean = self.record.bit_errors as f64 / f;
        let var = (self.frame_err_sq_sum - f * mean * mean) / (f - 1.0);
        (var.max(0.0) / f).sqrt() / self.bits_per_frame as f64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based per-frame sub-seed: independent of worker partitioning.
pub fn frame_seed(master: u64, esn0_db: f64, frame: u64) -> u64 {
    let point = ((esn0_db * 1000.0).round() as i64) as u64;
    splitmix64(splitmix64(master ^ point.rotate_left(17)) ^ frame)
}

struct PointContext {
    sys: SystemConfig,
    pc: PulseConfig,
    daft: DaftParams,
    profile: ChannelProfile,
    carrier_hz: f64,
    v_max_mps: f64,
    constellation: Constellation,
    scheme: Scheme,
    opts: EqualizerOpts,
    l_cpp: usize,
    sigma2: f64,
}

impl PointContext {
    fn build(cfg: &SimConfig, esn0_db: f64) -> Result<Self> {
        cfg.validate()?;
        let mut sys = cfg.system.clone();
        if cfg.equalizer.scheme == Scheme::OfdmFd {
            sys.c1 = Some(0.0);
            sys.c2 = 0.0;
        }
        let daft = sys.daft_params()?;
        let pc = sys.pulse_config()?;
        let profile = match (&cfg.channel.tap_delays_ns, &cfg.channel.tap_powers_db) {
            (Some(delays), Some(powers)) => ChannelProfile::new(
                cfg.channel.profile.clone(),
                delays.iter().map(|d| d * 1e-9).collect(),
                powers.clone(),
                true,
            )?,
            _ => ChannelProfile::by_name(&cfg.channel.profile)?,
        };
        let l_max_profile = profile.tap_delays_s.last().copied().unwrap_or(0.0) / sys.ts();
        let l_cpp = match sys.l_cpp {
            Some(l) => l,
            None => pc.d() / 2 + l_max_profile.ceil() as usize + 1,
        };
        if l_cpp > sys.n {
            return Err(AfdmError::Config(format!(
                "CPP length {l_cpp} exceeds frame length {} (reduce pulse support or delay spread)",
                sys.n
            )));
        }
        let constellation = Constellation::qam(cfg.constellation_order)?;
        let mut opts = EqualizerOpts::new(daft, constellation.clone());
        opts.half_bw = (cfg.equalizer.band - 1) / 2;
        opts.i_max = if cfg.equalizer.scheme == Scheme::BandedLmmseOnly {
            0
        } else {
            cfg.equalizer.i_max
        };
        opts.halt_threshold = cfg.equalizer.halt_threshold;
        opts.fallback_threshold = cfg.equalizer.fallback_threshold;
        opts.fallback_enabled = cfg.equalizer.fallback_enabled;
        Ok(Self {
            sys,
            pc,
            daft,
            profile,
            carrier_hz: cfg.channel.carrier_hz,
            v_max_mps: cfg.channel.v_max_mps,
            constellation,
            scheme: cfg.equalizer.scheme,
            opts,
            l_cpp,
            sigma2: 10f64.powf(-esn0_db / 10.0),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct FrameOutcome {
    bit_errors: u64,
    cm_sixths: u128,
    i_soft: usize,
    i_hard: usize,
}

fn run_frame(ctx: &PointContext, seed: u64) -> Result<FrameOutcome> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = ctx.sys.n;
    let ch = sample_channel(&ctx.profile, ctx.carrier_hz, ctx.v_max_mps, &mut rng, &ctx.sys)?;
    let bits: Vec<u8> = (0..n * ctx.constellation.bits_per_symbol())
        .map(|_| rng.random::<bool>() as u8)
        .collect();
    let x = ctx.constellation.map_bits(&bits)?;
    let frame = modulate(&x, &ctx.daft, ctx.l_cpp)?;
    let h_td = td_channel_matrix(&ch, &ctx.sys, &ctx.pc);
    let r_td = propagate(&frame, &h_td, ctx.sigma2, &mut rng)?;

    let result = match ctx.scheme {
        Scheme::FdTwoStage | Scheme::OfdmFd => {
            let w = window_source_half(n, ctx.opts.half_bw);
            let hb = fd_channel_matrix_banded(&ch, &ctx.sys, &ctx.pc, w)?;
            let r_fd = dft_unitary(&r_td);
            two_stage_from_banded(&hb, &r_fd, ctx.sigma2, &ctx.opts, StageDomain::Frequency)?
        }
        Scheme::BandedLmmseOnly => {
            let hb = fd_channel_matrix_banded(&ch, &ctx.sys, &ctx.pc, ctx.opts.half_bw)?;
            let r_fd = dft_unitary(&r_td);
            let mut res =
                two_stage_from_banded(&hb, &r_fd, ctx.sigma2, &ctx.opts, StageDomain::Frequency)?;
            // demapping needs one cross-domain transform pair on top of η₀
            res.cm_total += eta_transform_pair(n);
            res
        }
        Scheme::TdTwoStage => {
            let w = window_source_half(n, ctx.opts.half_bw);
            let hb = band_approximate(&h_td, w)?;
            two_stage_from_banded(&hb, &r_td, ctx.sigma2, &ctx.opts, StageDomain::Time)?
        }
        Scheme::FullLmmse => {
            let stage1 = full_lmmse_stage1(&h_td, &r_td, ctx.sigma2)?;
            let w = window_source_half(n, ctx.opts.half_bw);
            let hb = fd_channel_matrix_banded(&ch, &ctx.sys, &ctx.pc, w)?;
            let r_fd = dft_unitary(&r_td);
            let base = stage1.cm;
            two_stage_with_stage1(
                &hb,
                &r_fd,
                ctx.sigma2,
                stage1,
                &ctx.opts,
                StageDomain::Frequency,
                base,
            )?
        }
    };

    let mut rx_bits = Vec::with_capacity(bits.len());
    for &idx in &result.x_hard {
        ctx.constellation.index_bits(idx, &mut rx_bits);
    }
    let bit_errors = bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count() as u64;
    Ok(FrameOutcome {
        bit_errors,
        cm_sixths: result.cm_total.sixths(),
        i_soft: result.iterations_soft,
        i_hard: result.iterations_hard,
    })
}

/// Run one Es/N0 point with per-frame detail for standard errors.
pub fn run_point_detailed(cfg: &SimConfig, esn0_db: f64) -> Result<RunStats> {
    let started = std::time::Instant::now();
    let ctx = PointContext::build(cfg, esn0_db)?;
    let max_frames = cfg.sweep.max_frames;
    let target = cfg.sweep.target_bit_errors;
    let workers = cfg.workers.max(1);
    let wave = (workers * 8).max(8) as u64;

    let mut outcomes: Vec<FrameOutcome> = Vec::new();
    let mut cum_errors: u64 = 0;
    let mut stop_at: Option<usize> = None;
    let mut next = 0u64;
    while next < max_frames && stop_at.is_none() {
        let hi = (next + wave).min(max_frames);
        let idxs: Vec<u64> = (next..hi).collect();
        let wave_outcomes: Vec<FrameOutcome> = if workers == 1 {
            idxs.iter()
                .map(|&i| run_frame(&ctx, frame_seed(cfg.seed, esn0_db, i)))
                .collect::<Result<_>>()?
        } else {
            let chunk = idxs.len().div_ceil(workers);
            std::thread::scope(|scope| {
                let handles: Vec<_> = idxs
                    .chunks(chunk)
                    .map(|part| {
                        let ctx = &ctx;
                        let part = part.to_vec();
                        scope.spawn(move || {
                            part.into_iter()
                                .map(|i| run_frame(ctx, frame_seed(cfg.seed, esn0_db, i)))
                                .collect::<Result<Vec<_>>>()
                        })
                    })
                    .collect();
                let mut all = Vec::with_capacity(idxs.len());
                for h in handles {
                    all.extend(h.join().expect("worker panicked")?);
                }
                Ok::<_, AfdmError>(all)
            })?
        };
        for (off, out) in wave_outcomes.iter().enumerate() {
            cum_errors += out.bit_errors;
            if cum_errors >= target && stop_at.is_none() {
                stop_at = Some(outcomes.len() + off);
            }
        }
        outcomes.extend(wave_outcomes);
        next = hi;
    }
    if let Some(at) = stop_at {
        outcomes.truncate(at + 1);
    }

    let frames = outcomes.len() as u64;
    let bit_errors: u64 = outcomes.iter().map(|o| o.bit_errors).sum();
    let bits_per_frame = (ctx.sys.n * ctx.constellation.bits_per_symbol()) as u64;
    let total_bits = frames * bits_per_frame;
    let cm_sum: u128 = outcomes.iter().map(|o| o.cm_sixths).sum();
    let record = TrialRecord {
        esn0_db,
        frames,
        bit_errors,
        ber: if total_bits > 0 { bit_errors as f64 / total_bits as f64 } else { 0.0 },
        mean_cm: if frames > 0 { cm_sum as f64 / 6.0 / frames as f64 } else { 0.0 },
        mean_iter_soft: mean_of(&outcomes, |o| o.i_soft as f64),
        mean_iter_hard: mean_of(&outcomes, |o| o.i_hard as f64),
        wall_time_s: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
    };
    let frame_err_sq_sum = outcomes.iter().map(|o| (o.bit_errors as f64).powi(2)).sum();
    Ok(RunStats { record, frame_err_sq_sum, bits_per_frame })
}

fn mean_of(outcomes: &[FrameOutcome], f: impl Fn(&FrameOutcome) -> f64) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(f).sum::<f64>() / outcomes.len() as f64
}

/// Run one Es/N0 point.
pub fn run_point(cfg: &SimConfig, esn0_db: f64) -> Result<TrialRecord> {
    run_point_detailed(cfg, esn0_db).map(|s| s.record)
}

/// Run the configured Es/N0 sweep, invoking `on_point` as each point
/// completes (for incremental emission).
pub fn run_sweep(
    cfg: &SimConfig,
    mut on_point: impl FnMut(&TrialRecord),
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.sweep.esn0_db.len());
    for &esn0 in &cfg.sweep.esn0_db {
        let rec = run_point(cfg, esn0)?;
        on_point(&rec);
        records.push(rec);
    }
    Ok(records)
}

/// Sparse occupancy triplets (row, col, magnitude_db) for entries within
/// `threshold_db` (negative) of the matrix maximum.
pub fn occupancy_triplets(
    m: &ChannelMatrix,
    threshold_db: f64,
) -> Result<Vec<(usize, usize, f64)>> {
    if threshold_db >= 0.0 {
        return Err(AfdmError::InvalidParameter("threshold_db must be negative".into()));
    }
    let n = m.n();
    let max = m
        .entries
        .data()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let floor = max * 10f64.powf(threshold_db / 20.0);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mag = m.entries[(i, j)].norm();
            if mag >= floor {
                out.push((i, j, 20.0 * (mag / max).log10()));
            }
        }
    }
    Ok(out)
}

/// Largest cyclic distance |i−j| (wrapped) among occupied entries.
pub fn occupied_half_width(m: &ChannelMatrix, threshold_db: f64) -> Result<usize> {
    let n = m.n();
    let triplets = occupancy_triplets(m, threshold_db)?;
    Ok(triplets
        .iter()
        .map(|&(i, j, _)| {
            let fwd = (i + n - j) % n;
            fwd.min(n - fwd)
        })
        .max()
        .unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Domain;
    use crate::config::{ChannelSetup, EqualizerConfig, SweepConfig};
    use crate::mat::CMat;

    fn small_cfg(scheme: Scheme) -> SimConfig {
        SimConfig {
            system: SystemConfig {
                n: 32,
                bandwidth_hz: 0.96e6,
                frame_duration_s: None,
                c1: None,
                c2: 0.0,
                l_cpp: None,
                rolloff: 0.1,
                trunc_threshold: 1e-3,
                gamma: 4,
                tap_convention: Default::default(),
            },
            channel: ChannelSetup {
                profile: "eva".into(),
                tap_delays_ns: None,
                tap_powers_db: None,
                carrier_hz: 6e9,
                v_max_mps: 500.0 / 3.6,
            },
            equalizer: EqualizerConfig {
                scheme,
                band: 7,
                i_max: 8,
                halt_threshold: None,
                fallback_threshold: 0.1,
                fallback_enabled: true,
            },
            sweep: SweepConfig { esn0_db: vec![15.0], max_frames: 40, target_bit_errors: 1_000_000 },
            seed: 42,
            workers: 1,
            constellation_order: 4,
        }
    }

    #[test]
    fn determinism_and_worker_invariance() {
        let cfg = small_cfg(Scheme::FdTwoStage);
        let a = run_point(&cfg, 15.0).unwrap();
        let b = run_point(&cfg, 15.0).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.bit_errors, b.bit_errors);
        assert_eq!(a.ber.to_bits(), b.ber.to_bits());
        assert_eq!(a.mean_cm.to_bits(), b.mean_cm.to_bits());

        let mut cfg4 = cfg.clone();
        cfg4.workers = 4;
        let c = run_point(&cfg4, 15.0).unwrap();
        assert_eq!(a.bit_errors, c.bit_errors);
        assert_eq!(a.frames, c.frames);
        assert_eq!(a.ber.to_bits(), c.ber.to_bits());
    }

    #[test]
    fn effectively_noiseless_full_lmmse_is_error_free() {
        let mut cfg = small_cfg(Scheme::FullLmmse);
        cfg.sweep.max_frames = 10;
        let rec = run_point(&cfg, 200.0).unwrap();
        assert_eq!(rec.bit_errors, 0);
        assert_eq!(rec.ber, 0.0);
        assert_eq!(rec.frames, 10);
    }

    #[test]
    fn stopping_rules() {
        // low SNR: plenty of errors → stops at the target, not max_frames
        let mut cfg = small_cfg(Scheme::BandedLmmseOnly);
        cfg.sweep.max_frames = 5_000;
        cfg.sweep.target_bit_errors = 50;
        let rec = run_point(&cfg, -5.0).unwrap();
        assert!(rec.bit_errors >= 50, "errors {}", rec.bit_errors);
        assert!(rec.frames < 5_000);
        // check the stop frame is minimal: removing the last frame drops
        // below the target
        let per_frame_max = (cfg.system.n * 2) as u64;
        assert!(rec.bit_errors < 50 + per_frame_max);

        // high SNR: no errors → runs to max_frames
        let mut cfg = small_cfg(Scheme::FdTwoStage);
        cfg.sweep.max_frames = 12;
        cfg.sweep.target_bit_errors = 1;
        let rec = run_point(&cfg, 60.0).unwrap();
        assert_eq!(rec.frames, 12);
        assert_eq!(rec.bit_errors, 0);
    }

    #[test]
    fn ber_bookkeeping_identity() {
        let cfg = small_cfg(Scheme::TdTwoStage);
        let rec = run_point(&cfg, 10.0).unwrap();
        let bits = rec.frames * 32 * 2;
        assert!((rec.ber - rec.bit_errors as f64 / bits as f64).abs() < 1e-15);
    }

    #[test]
    fn esn0_calibration_within_tolerance() {
        // measured E[|Hs|²]/E[|w|²] per sample ≈ configured linear Es/N0
        use crate::pulse::modulate;
        use rand::SeedableRng;
        let cfg = small_cfg(Scheme::FdTwoStage);
        let ctx = PointContext::build(&cfg, 10.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let frames = 2000;
        let mut sig = 0.0;
        for _ in 0..frames {
            let ch = sample_channel(&ctx.profile, ctx.carrier_hz, ctx.v_max_mps, &mut rng, &ctx.sys)
                .unwrap();
            let bits: Vec<u8> = (0..64).map(|_| rng.random::<bool>() as u8).collect();
            let x = ctx.constellation.map_bits(&bits).unwrap();
            let frame = modulate(&x, &ctx.daft, ctx.l_cpp).unwrap();
            let h = td_channel_matrix(&ch, &ctx.sys, &ctx.pc);
            let r = propagate(&frame, &h, 0.0, &mut rng).unwrap();
            sig += r.iter().map(|z| z.norm_sqr()).sum::<f64>() / 32.0;
        }
        let es_measured = sig / frames as f64;
        let esn0_measured = es_measured / ctx.sigma2;
        let esn0_target = 10f64.powf(1.0);
        assert!(
            (esn0_measured / esn0_target - 1.0).abs() < 0.05,
            "measured Es/N0 {esn0_measured} vs {esn0_target}"
        );
    }

    #[test]
    fn occupancy_identity_matrix() {
        let m = ChannelMatrix { domain: Domain::Time, entries: CMat::identity(16) };
        let t = occupancy_triplets(&m, -30.0).unwrap();
        assert_eq!(t.len(), 16);
        assert!(t.iter().all(|&(i, j, db)| i == j && db == 0.0));
        assert_eq!(occupied_half_width(&m, -30.0).unwrap(), 0);
        assert!(occupancy_triplets(&m, 3.0).is_err());
    }

    #[test]
    fn run_sweep_emits_incrementally() {
        let mut cfg = small_cfg(Scheme::FdTwoStage);
        cfg.sweep.esn0_db = vec![5.0, 10.0];
        cfg.sweep.max_frames = 6;
        let mut seen = Vec::new();
        let recs = run_sweep(&cfg, |r| seen.push(r.esn0_db)).unwrap();
        assert_eq!(seen, vec![5.0, 10.0]);
        assert_eq!(recs.len(), 2);
    }
}
