use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qtomo_core::design::{MubAlignment, Strategy};
use qtomo_core::priors::{sample_prior, slab_density_profile, PriorKind};
use qtomo_core::runner::compare::write_comparison;
use qtomo_core::runner::output::{read_curve_csv, write_experiment, write_trajectory_csv};
use qtomo_core::runner::{compare_strategies, fit_power_law, replay, CompareConfig, RunConfig};
use qtomo_core::simlab::read_event_log;
use qtomo_core::QubitState;

#[derive(Parser)]
#[command(
    name = "qtomo",
    version,
    about = "Adaptive Bayesian qubit tomography simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-run experiment from a TOML config.
    Simulate(SimulateArgs),
    /// Fit `1 - F = c N^a` to a curve CSV.
    Fit(FitArgs),
    /// Run several strategies on identical seeds and true states.
    Compare(CompareArgs),
    /// Rebuild a posterior trajectory from an event log.
    Replay(ReplayArgs),
    /// Radial density histogram of prior samples in an equatorial slab.
    PriorHist(PriorHistArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Adaptive,
    Random,
    MubGeneric,
    MubBest,
    MubWorst,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Adaptive => Strategy::adaptive(),
            StrategyArg::Random => Strategy::Random,
            StrategyArg::MubGeneric => Strategy::MubCycle {
                alignment: MubAlignment::Generic,
            },
            StrategyArg::MubBest => Strategy::MubCycle {
                alignment: MubAlignment::Best,
            },
            StrategyArg::MubWorst => Strategy::MubCycle {
                alignment: MubAlignment::Worst,
            },
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_total: Option<u64>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long)]
    blocks: Option<bool>,
    #[arg(long)]
    waveplates: Option<bool>,
    #[arg(long)]
    checkpoints: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig, with_strategy: bool) {
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.n_total {
            cfg.n_total = v;
        }
        if let Some(v) = self.n_runs {
            cfg.n_runs = v;
        }
        if let Some(v) = self.particles {
            cfg.filter.particles = v;
        }
        if let (Some(v), true) = (self.strategy, with_strategy) {
            cfg.strategy = v.into();
        }
        if let Some(v) = self.blocks {
            cfg.blocks = v;
        }
        if let Some(v) = self.waveplates {
            cfg.waveplates = v;
        }
        if let Some(v) = self.checkpoints {
            cfg.checkpoints = v;
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct FitArgs {
    curve: PathBuf,
    /// Column holding the infidelity.
    #[arg(long, default_value = "infid_to_true")]
    column: String,
    #[arg(long)]
    n_min: Option<f64>,
    #[arg(long)]
    n_max: Option<f64>,
    /// Write the fit as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ReplayArgs {
    events: PathBuf,
    /// Run config supplying prior, filter and inference noise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Filter seed of the original run (see `seeds.filter` in summary.json).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// True Stokes vector, to also report infidelity to truth.
    #[arg(long, num_args = 3, allow_negative_numbers = true)]
    truth: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Bures,
    Induced,
}

#[derive(Args)]
struct PriorHistArgs {
    #[arg(long, value_enum, default_value = "bures")]
    prior: PriorArg,
    /// Environment dimension for the induced measure.
    #[arg(long, default_value_t = 2)]
    env_dim: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    halfwidth: f64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    args.overrides.apply(&mut cfg, true);
    cfg.validate()?;
    let res = qtomo_core::runner::run_experiment(&cfg)?;
    write_experiment(&res, &args.out_dir)?;
    match &res.fit_to_true {
        Some(f) => println!(
            "a = {} +- {}, c = {} ({} points)",
            f.exponent, f.exponent_std_err, f.prefactor, f.points
        ),
        None => println!("no fit: {}", res.fit_note.as_deref().unwrap_or("")),
    }
    if let Some(e) = res.first_failure() {
        bail!(
            "{e} (partial results written to {})",
            args.out_dir.display()
        );
    }
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let curve = read_curve_csv(
        File::open(&args.curve).with_context(|| format!("opening {}", args.curve.display()))?,
        &args.column,
    )?;
    let n_max = args
        .n_max
        .unwrap_or_else(|| curve.iter().map(|p| p.0).fold(0.0, f64::max));
    let window = (
        args.n_min
            .unwrap_or_else(|| qtomo_core::runner::default_fit_window(n_max as u64).0),
        n_max,
    );
    let f = fit_power_law(&curve, window)?;
    let mut out = output(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &f)?;
    writeln!(out)?;
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = CompareConfig::from_toml(&text)?;
    args.overrides.apply(&mut cfg.base, false);
    let results = compare_strategies(&cfg)?;
    let rows = write_comparison(&results, &args.out_dir)?;
    for r in &rows {
        match (r.exponent, r.exponent_std_err) {
            (Some(a), Some(se)) => println!("{}: a = {a} +- {se}", r.name),
            _ => println!("{}: no fit", r.name),
        }
    }
    if let Some(e) = results.iter().find_map(|(_, r)| r.first_failure()) {
        bail!(
            "{e} (partial results written to {})",
            args.out_dir.display()
        );
    }
    Ok(())
}

fn replay_cmd(args: ReplayArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(1),
    };
    let events = read_event_log(BufReader::new(
        File::open(&args.events).with_context(|| format!("opening {}", args.events.display()))?,
    ))?;
    let truth = match &args.truth {
        Some(v) => Some(QubitState::from_stokes([v[0], v[1], v[2]])?),
        None => None,
    };
    let traj = replay(
        &events,
        cfg.prior,
        cfg.filter.clone(),
        cfg.inference_noise(),
        args.seed,
        truth.as_ref(),
    )?;
    write_trajectory_csv(&traj, output(&args.out)?)?;
    Ok(())
}

fn prior_hist(args: PriorHistArgs) -> Result<()> {
    let kind = match args.prior {
        PriorArg::Bures => PriorKind::BuresHaar,
        PriorArg::Induced => PriorKind::InducedPure {
            env_dim: args.env_dim,
        },
    };
    let samples = sample_prior(kind, args.samples, args.seed)?;
    let hist = slab_density_profile(&samples, args.halfwidth, args.bins)?;
    hist.write_csv(output(&args.out)?)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
        Command::Replay(a) => replay_cmd(a),
        Command::PriorHist(a) => prior_hist(a),
    }
}
