//! `baryid`: frequency-domain identification from the command line.
//!
//! Frequencies on the command line are in Hz and are converted to rad/s
//! internally. Exit codes: 0 success, 2 infeasible problem or no steady
//! state, 3 file I/O or parse failure, 4 invalid input, 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use baryid::eval::{
    self, detect_in_file, evaluate, gen_plant, hz_to_rad, identify, CampaignConfig, PlantSource,
    Strategy, SweepKind,
};
use baryid::plant::PlantSpec;
use baryid::strategy::Optimizer;
use baryid::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "baryid",
    version,
    about = "Barycentric-interpolant system identification"
)]
struct Cli {
    /// Seed for generated plants (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON campaign configuration; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print per-iteration progress and extra diagnostics.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Directory for all written artifacts (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a lightly damped modal plant and write it as a state-space file.
    GenPlant(GenPlantArgs),
    /// Run an identification campaign and write the model, trace and run records.
    Identify(IdentifyArgs),
    /// Compare a model against a plant: H² and L∞ of the error, Bode CSV.
    Evaluate(EvaluateArgs),
    /// Error norms against model order for two strategies or two optimizers.
    Sweep(SweepArgs),
    /// Run the steady-state detector over a recorded t,u,y CSV.
    SsDetect(SsDetectArgs),
}

#[derive(Debug, Args)]
struct GenPlantArgs {
    /// Number of modes (two states each).
    #[arg(long, default_value_t = 20)]
    modes: usize,
    /// Natural-frequency band `lo:hi` in Hz.
    #[arg(long, value_parser = parse_range, default_value = "0.5:90")]
    band: [f64; 2],
    /// Damping-ratio range `lo:hi`.
    #[arg(long, value_parser = parse_range, default_value = "0.02:0.05")]
    zeta: [f64; 2],
    /// Overall gain scale of the residues.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    /// Output file [default: <output-dir>/plant.ss].
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Gridded,
    Adaptive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Stable,
    Explicit,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Args)]
struct CampaignArgs {
    /// Identify a plant stored in a state-space or model file.
    #[arg(long, value_name = "FILE")]
    plant_file: Option<PathBuf>,
    /// Identification band `lo:hi` in Hz.
    #[arg(long, value_parser = parse_range)]
    band: Option<[f64; 2]>,
    #[arg(long)]
    optimizer: Option<OptimizerArg>,
    /// Decay margin α in 1/s.
    #[arg(long)]
    alpha: Option<f64>,
    /// Sample rate of the experiments in Hz.
    #[arg(long)]
    fs: Option<f64>,
    /// Regularize a rank-deficient covariance instead of failing.
    #[arg(long)]
    ridge: bool,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    #[arg(long)]
    strategy: Option<StrategyArg>,
    /// Interpolation points: grid size, or the adaptive maximum.
    #[arg(long)]
    budget: Option<usize>,
    /// Adaptive stop threshold relative to the largest measured |G|.
    #[arg(long)]
    stop_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Identified model, or any state-space file
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Reference plant, state-space or model file
    #[arg(long, value_name = "FILE")]
    plant: PathBuf,
    /// Evaluation band `lo:hi` in Hz [default: the config band].
    #[arg(long, value_parser = parse_range)]
    band: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepKindArg {
    Strategy,
    Optimizer,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Model orders: a list `5,9,13` or a range `lo:hi[:step]` (odd, ≥ 5).
    #[arg(long)]
    orders: String,
    #[arg(long, value_enum, default_value_t = SweepKindArg::Strategy)]
    kind: SweepKindArg,
}

#[derive(Debug, Args)]
struct SsDetectArgs {
    /// CSV with t, u, y columns.
    csv: PathBuf,
    /// Drive frequency in Hz.
    #[arg(long)]
    freq: f64,
    /// Residual-ratio threshold γ.
    #[arg(long, default_value_t = 1e-3)]
    gamma: f64,
    /// Full periods per test block.
    #[arg(long, default_value_t = 4)]
    chunk_cycles: usize,
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok([num(a)?, num(b)?])
}

fn parse_orders(s: &str) -> Result<Vec<usize>, String> {
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (num(lo)?, num(hi)?, 2),
            [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
            _ => return Err(format!("expected lo:hi[:step], got {s:?}")),
        };
        if step == 0 || hi < lo {
            return Err(format!("empty order range {s:?}"));
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Infeasible(_) | Error::SteadyStateTimeout { .. } => 2,
        Error::Io(_) | Error::Parse(_) => 3,
        Error::Validation(_)
        | Error::DimensionMismatch(_)
        | Error::DuplicateFrequency { .. }
        | Error::NonuniformSampling { .. } => 4,
        _ => 1,
    }
}

fn base_config(cli: &Cli) -> baryid::Result<CampaignConfig> {
    let mut cfg = match &cli.config {
        Some(path) => CampaignConfig::load(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn apply_campaign(cfg: &mut CampaignConfig, args: &CampaignArgs) {
    if let Some(path) = &args.plant_file {
        cfg.plant = PlantSource::File(path.clone());
    }
    if let Some(band) = args.band {
        cfg.band = band;
    }
    if let Some(o) = args.optimizer {
        cfg.optimizer = match o {
            OptimizerArg::Stable => Optimizer::Stable,
            OptimizerArg::Explicit => Optimizer::Explicit,
        };
    }
    if let Some(a) = args.alpha {
        cfg.alpha = Some(a);
    }
    if let Some(fs) = args.fs {
        cfg.experiment.fs = fs;
    }
    if args.ridge {
        cfg.ridge = true;
    }
}

fn create_dir(dir: &Path) -> baryid::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).context(dir.display().to_string()))
}

fn cmd_gen_plant(cli: &Cli, args: &GenPlantArgs) -> baryid::Result<()> {
    let spec = PlantSpec {
        seed: cli.seed.unwrap_or(0),
        n_modes: args.modes,
        band: args.band,
        damping_range: args.zeta,
        gain_scale: args.gain,
    };
    let path = match &args.output {
        Some(p) => p.clone(),
        None => {
            let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            create_dir(&dir)?;
            dir.join(eval::PLANT_FILE)
        }
    };
    let (sys, modes) = gen_plant(&spec, &path)?;
    println!("wrote {} ({} states)", path.display(), sys.n_states());
    println!(
        "{:>4} {:>14} {:>10} {:>14}",
        "mode", "f_n (Hz)", "zeta", "residue"
    );
    for (i, m) in modes.iter().enumerate() {
        println!(
            "{:>4} {:>14.6} {:>10.6} {:>14.6e}",
            i + 1,
            m.frequency_hz,
            m.zeta,
            m.residue
        );
    }
    Ok(())
}

fn cmd_identify(cli: &Cli, args: &IdentifyArgs) -> baryid::Result<()> {
    let mut cfg = base_config(cli)?;
    apply_campaign(&mut cfg, &args.campaign);
    if let Some(s) = args.strategy {
        cfg.strategy = match s {
            StrategyArg::Gridded => Strategy::Gridded,
            StrategyArg::Adaptive => Strategy::Adaptive,
        };
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(t) = args.stop_tol {
        cfg.stop_tol = t;
    }
    let (state, summary) = identify(&cfg)?;
    if cli.verbose {
        for s in &state.trace {
            println!(
                "iter {:>3}  order {:>3}  experiments {:>3}  max test error {:.3e}  abscissa {:.3e}",
                s.iteration, s.model_order, s.experiments, s.max_test_error, s.spectral_abscissa
            );
        }
    }
    println!("output dir        {}", cfg.output_dir.display());
    println!("model order       {}", summary.order);
    println!("experiments       {}", summary.experiments);
    println!("max test error    {:.6e}", summary.max_test_error);
    println!("spectral abscissa {:.6e}", summary.spectral_abscissa);
    Ok(())
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> baryid::Result<()> {
    let cfg = base_config(cli)?;
    let band = args.band.unwrap_or(cfg.band);
    create_dir(&cfg.output_dir)?;
    let metrics = evaluate(&args.model, &args.plant, band, Some(&cfg.output_dir))?;
    match (metrics.h2, &metrics.h2_undefined) {
        (Some(h2), _) => println!("H2   {h2:.6e}"),
        (None, Some(why)) => println!("H2   undefined: {why}"),
        (None, None) => println!("H2   undefined"),
    }
    println!(
        "Linf {:.6e} at {:.6} Hz",
        metrics.linf, metrics.linf_frequency_hz
    );
    println!("model spectral abscissa {:.6e}", metrics.model_abscissa);
    if cli.verbose {
        println!(
            "wrote {} and {}",
            cfg.output_dir.join(eval::BODE_FILE).display(),
            cfg.output_dir.join(eval::METRICS_FILE).display()
        );
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> baryid::Result<()> {
    let mut cfg = base_config(cli)?;
    apply_campaign(&mut cfg, &args.campaign);
    let orders =
        parse_orders(&args.orders).map_err(|e| Error::Validation(format!("--orders: {e}")))?;
    let kind = match args.kind {
        SweepKindArg::Strategy => SweepKind::Strategy,
        SweepKindArg::Optimizer => SweepKind::Optimizer,
    };
    create_dir(&cfg.output_dir)?;
    let rows = eval::sweep(&cfg, &orders, kind)?;
    let [a, b] = kind.columns();
    println!("{:>5} {:>14} {:>14}", "order", a, b);
    for r in &rows {
        println!(
            "{:>5} {:>14.6e} {:>14.6e}",
            r.order, r.first.value, r.second.value
        );
        for (name, cell) in [(a, &r.first), (b, &r.second)] {
            if !cell.note.is_empty() && (cli.verbose || cell.value.is_nan()) {
                println!("      {name}: {}", cell.note);
            }
        }
    }
    Ok(())
}

fn cmd_ss_detect(args: &SsDetectArgs) -> baryid::Result<bool> {
    let report = detect_in_file(
        &args.csv,
        hz_to_rad(args.freq),
        args.gamma,
        args.chunk_cycles,
    )?;
    println!(
        "fs {} Hz, block length {} samples",
        report.fs, report.chunk_len
    );
    for (i, g) in report.gamma_hats.iter().enumerate() {
        println!("block {:>4}  gamma_hat {g:.6e}", i + 1);
    }
    match (report.detected_at, report.response) {
        (Some(at), Some(g)) => {
            println!(
                "detected at sample {at} (block {})",
                at / report.chunk_len + 1
            );
            println!("x1 {:.9e}  x2 {:.9e}", report.x1, report.x2);
            println!(
                "response {:.9e} {:+.9e}j  |G| {:.6e}  phase {:.6} rad",
                g.re,
                g.im,
                g.norm(),
                g.arg()
            );
            Ok(true)
        }
        _ => {
            println!(
                "timeout: no block below gamma {} in {} blocks",
                args.gamma,
                report.gamma_hats.len()
            );
            Ok(false)
        }
    }
}

fn run(cli: &Cli) -> baryid::Result<u8> {
    match &cli.command {
        Command::GenPlant(a) => cmd_gen_plant(cli, a)?,
        Command::Identify(a) => cmd_identify(cli, a)?,
        Command::Evaluate(a) => cmd_evaluate(cli, a)?,
        Command::Sweep(a) => cmd_sweep(cli, a)?,
        Command::SsDetect(a) => return Ok(if cmd_ss_detect(a)? { 0 } else { 2 }),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
