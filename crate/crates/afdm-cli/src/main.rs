//! Benchmark CLI for filtered-AFDM over doubly selective channels.

mod output;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use afdm::channel::{
    bandwidth_estimates, daft_channel_matrix, demo_wideband_snapshot, fd_channel_matrix,
    sample_channel, td_channel_matrix, ChannelProfile,
};
use afdm::config::{ChannelSetup, EqualizerConfig, Scheme, SimConfig, SweepConfig, SystemConfig};
use afdm::equalizer::complexity_model;
use afdm::sim::{occupancy_triplets, occupied_half_width, run_sweep};
use afdm::validate::run_validation;
use output::{CsvSink, Timing};

#[derive(Parser)]
#[command(
    name = "afdm",
    about = "Filtered-AFDM link simulator: BER/complexity sweeps, channel-matrix occupancy, and validation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo BER/complexity sweep over Es/N0 points.
    Sweep(SweepArgs),
    /// Emit channel-matrix occupancy triplets for the three domains.
    Occupancy(OccupancyArgs),
    /// Evaluate the analytic complex-multiplication cost formulas.
    Complexity(ComplexityArgs),
    /// Run the oracle/invariant validation suite.
    Validate,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel profile file (plain text: name, delays_ns, powers_db).
    #[arg(long)]
    profile_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Equalization scheme.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// FD band approximation width β (odd).
    #[arg(long)]
    beta: Option<usize>,
    /// TD band approximation width α (odd); alias of --beta for the
    /// td-two-stage scheme.
    #[arg(long)]
    alpha: Option<usize>,
    /// Comma-separated Es/N0 list in dB.
    #[arg(long, value_delimiter = ',')]
    esn0: Option<Vec<f64>>,
    #[arg(long)]
    max_frames: Option<u64>,
    #[arg(long)]
    target_errors: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Wall-clock column: 'zero' keeps output byte-reproducible, 'real'
    /// records measured times.
    #[arg(long, default_value = "zero")]
    timing: Timing,
    /// QAM order (4, 16, 64).
    #[arg(long)]
    order: Option<usize>,
    /// Disable the hard-decision fallback.
    #[arg(long)]
    no_fallback: bool,
}

#[derive(Args)]
struct OccupancyArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output path prefix; writes <prefix>_time.csv, <prefix>_frequency.csv,
    /// <prefix>_daft.csv.
    #[arg(long, default_value = "occupancy")]
    out: PathBuf,
    /// Occupancy threshold relative to the matrix maximum, in dB (negative).
    #[arg(long, default_value_t = -30.0)]
    threshold_db: f64,
    /// Draw a random channel realization instead of the built-in snapshot
    /// (uses --seed).
    #[arg(long)]
    random: bool,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    beta: usize,
    /// Constellation size |X|.
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 0)]
    i_soft: usize,
    #[arg(long, default_value_t = 0)]
    i_hard: usize,
}

fn default_config() -> SimConfig {
    SimConfig {
        system: SystemConfig::wideband_512(),
        channel: ChannelSetup {
            profile: "eva".into(),
            tap_delays_ns: None,
            tap_powers_db: None,
            carrier_hz: 6e9,
            v_max_mps: 500.0 / 3.6,
        },
        equalizer: EqualizerConfig {
            scheme: Scheme::FdTwoStage,
            band: 7,
            i_max: 15,
            halt_threshold: None,
            fallback_threshold: 0.1,
            fallback_enabled: true,
        },
        sweep: SweepConfig {
            esn0_db: vec![10.0, 15.0, 20.0, 25.0],
            max_frames: 20_000,
            target_bit_errors: 100,
        },
        seed: 0,
        workers: 1,
        constellation_order: 4,
    }
}

fn load_config(common: &ConfigArgs) -> Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => default_config(),
    };
    if let Some(path) = &common.profile_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let profile = ChannelProfile::parse(&text)?;
        cfg.channel.profile = profile.name.clone();
        cfg.channel.tap_delays_ns = Some(profile.tap_delays_s.iter().map(|d| d * 1e9).collect());
        cfg.channel.tap_powers_db = Some(profile.avg_powers_db.clone());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_sweep_cmd(args: &SweepArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(scheme) = args.scheme {
        cfg.equalizer.scheme = scheme;
    }
    let band = match cfg.equalizer.scheme {
        Scheme::TdTwoStage => args.alpha.or(args.beta),
        _ => args.beta.or(args.alpha),
    };
    if let Some(b) = band {
        cfg.equalizer.band = b;
    }
    if let Some(esn0) = &args.esn0 {
        cfg.sweep.esn0_db = esn0.clone();
    }
    if let Some(mf) = args.max_frames {
        cfg.sweep.max_frames = mf;
    }
    if let Some(te) = args.target_errors {
        cfg.sweep.target_bit_errors = te;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(order) = args.order {
        cfg.constellation_order = order;
    }
    if args.no_fallback {
        cfg.equalizer.fallback_enabled = false;
    }
    cfg.validate()?;

    let scheme = cfg.equalizer.scheme.as_str();
    let band = cfg.equalizer.band;
    match args.format.as_str() {
        "csv" => {
            let writer: Box<dyn Write> = match &args.out {
                Some(path) => Box::new(
                    std::fs::File::create(path)
                        .with_context(|| format!("creating {}", path.display()))?,
                ),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut sink = CsvSink::new(writer, args.timing)?;
            run_sweep(&cfg, |rec| {
                eprintln!(
                    "esn0 {:>5} dB: {} frames, {} bit errors, ber {:.3e}",
                    rec.esn0_db, rec.frames, rec.bit_errors, rec.ber
                );
                sink.emit(rec, scheme, band).expect("emitting CSV record");
            })?;
        }
        "json" => {
            let path = args
                .out
                .clone()
                .ok_or_else(|| anyhow::anyhow!("--format json requires --out"))?;
            let mut records = Vec::new();
            run_sweep(&cfg, |rec| {
                eprintln!(
                    "esn0 {:>5} dB: {} frames, {} bit errors, ber {:.3e}",
                    rec.esn0_db, rec.frames, rec.bit_errors, rec.ber
                );
                records.push(rec.clone());
                output::write_json(&path, &cfg, &records, args.timing)
                    .expect("emitting JSON records");
            })?;
        }
        other => anyhow::bail!("unknown format '{other}'"),
    }
    Ok(())
}

fn run_occupancy_cmd(args: &OccupancyArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let sys = cfg.system.clone();
    sys.validate()?;
    let pc = sys.pulse_config()?;
    let daft = sys.daft_params()?;
    let ch = if args.random {
        let profile = ChannelProfile::by_name(&cfg.channel.profile)?;
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
        sample_channel(&profile, cfg.channel.carrier_hz, cfg.channel.v_max_mps, &mut rng, &sys)?
    } else {
        demo_wideband_snapshot(&sys)?
    };

    let est = bandwidth_estimates(&ch, &pc, &daft, sys.gamma);
    eprintln!(
        "analytic bands: td lower {} | fd half {} | daft total {}",
        est.td_lower_bw, est.fd_half_bw, est.daft_total_bw
    );

    let matrices = [
        ("time", td_channel_matrix(&ch, &sys, &pc)),
        ("frequency", fd_channel_matrix(&ch, &sys, &pc)),
        ("daft", daft_channel_matrix(&ch, &sys, &pc, &daft)),
    ];
    let mut counts = std::collections::HashMap::new();
    for (name, m) in &matrices {
        let triplets = occupancy_triplets(m, args.threshold_db)?;
        let half = occupied_half_width(m, args.threshold_db)?;
        let path = args.out.with_file_name(format!(
            "{}_{name}.csv",
            args.out.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
        ));
        output::write_occupancy(&path, &triplets)?;
        println!(
            "{name:<9} occupied {:>7} entries at {} dB, half-width {half}, wrote {}",
            triplets.len(),
            args.threshold_db,
            path.display()
        );
        counts.insert(*name, triplets.len());
    }
    let (t, f, d) = (counts["time"], counts["frequency"], counts["daft"]);
    println!("occupancy ordering daft > time > frequency: {}", d > t && t > f);
    Ok(())
}

fn run_complexity_cmd(args: &ComplexityArgs) -> Result<()> {
    let model = complexity_model(args.n, args.beta, args.order)?;
    println!(
        "N = {}, beta = {}, |X| = {}",
        model.n, model.beta, model.alphabet_size
    );
    println!("eta0      = {:>16} CMs ({})", model.eta0.to_exact_string(), model.eta0);
    println!("eta_soft  = {:>16} CMs ({})", model.eta_soft.to_exact_string(), model.eta_soft);
    println!("eta_hard  = {:>16} CMs ({})", model.eta_hard.to_exact_string(), model.eta_hard);
    let total = model.total(args.i_soft, args.i_hard);
    println!(
        "total     = {:>16} CMs ({}) with i_soft = {}, i_hard = {}",
        total.to_exact_string(),
        total,
        args.i_soft,
        args.i_hard
    );
    Ok(())
}

fn run_validate_cmd() -> Result<()> {
    let checks = run_validation();
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", c.name, c.detail);
        if !c.passed {
            failed += 1;
        }
    }
    anyhow::ensure!(failed == 0, "{failed} validation check(s) failed");
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep(args) => run_sweep_cmd(&args),
        Command::Occupancy(args) => run_occupancy_cmd(&args),
        Command::Complexity(args) => run_complexity_cmd(&args),
        Command::Validate => run_validate_cmd(),
    }
}
