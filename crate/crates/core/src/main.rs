use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use aris_mec::bcd::Context;
use aris_mec::channel::{self, ChannelSet};
use aris_mec::config::ScenarioConfig;
use aris_mec::experiments::{self, Variant};
use aris_mec::Result;

#[derive(Parser)]
#[command(
    name = "aris-mec",
    version,
    about = "Maximum computational latency minimization for active-RIS-aided edge computing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; defaults to the built-in three-user setting.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of Monte-Carlo drops (seeds 0..N).
    #[arg(long, default_value_t = experiments::DEFAULT_SEEDS)]
    seeds: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every user at its maximum transmit power.
    #[arg(long)]
    fixed_power: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Per-iteration traces for several element counts.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = experiments::CONVERGENCE_ELEMENTS)]
        elements: Vec<usize>,
    },
    /// Final MCL versus the number of elements.
    SweepM {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = experiments::SWEEP_ELEMENTS)]
        elements: Vec<usize>,
        /// Total power budgets in mW.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 20.0])]
        total_power_mw: Vec<f64>,
        /// Variants to run; all by default.
        #[arg(long, value_delimiter = ',')]
        variant: Vec<Variant>,
    },
    /// Final MCL and per-user latency versus the RIS x-coordinate.
    SweepLoc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = experiments::SWEEP_RIS_X_M)]
        x_ris: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        variant: Vec<Variant>,
    },
    /// Solves one drop and prints a JSON summary; `--out` receives the trace.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Drop seed; defaults to the config's `rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Channel dump to use instead of drawing channels.
        #[arg(long)]
        channels: Option<PathBuf>,
        #[arg(long, default_value = "active")]
        variant: Variant,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        fixed_power: bool,
    },
}

fn load_config(path: Option<&PathBuf>, fixed_power: bool) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::baseline(),
    };
    cfg.algorithm.fixed_power |= fixed_power;
    Ok(cfg)
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn variants_or_all(v: Vec<Variant>) -> Vec<Variant> {
    if v.is_empty() {
        Variant::ALL.to_vec()
    } else {
        v
    }
}

#[derive(Serialize)]
struct SolveSummary {
    variant: Variant,
    converged: bool,
    iterations: usize,
    mcl_s: f64,
    user_latency_s: Vec<f64>,
    local_latency_s: Vec<f64>,
    edge_latency_s: Vec<f64>,
    rates_bps: Vec<f64>,
    offload_bits: Vec<u64>,
    edge_cpu_hz: Vec<f64>,
    power_w: Vec<f64>,
    theta: Vec<[f64; 2]>,
    ris_power_w: f64,
}

/// Runs the command and reports whether every run converged.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Converge { common, elements } => {
            let cfg = load_config(common.config.as_ref(), common.fixed_power)?;
            let seeds: Vec<u64> = (0..common.seeds).collect();
            let runs = experiments::run_convergence(&cfg, &elements, &seeds)?;
            experiments::write_convergence_csv(
                output(common.out.as_ref())?,
                &runs,
                cfg.num_users(),
            )?;
            let done = runs.iter().filter(|r| r.trace.converged).count();
            eprintln!("{done}/{} runs converged", runs.len());
            Ok(done == runs.len())
        }
        Command::SweepM {
            common,
            elements,
            total_power_mw,
            variant,
        } => {
            let cfg = load_config(common.config.as_ref(), common.fixed_power)?;
            let seeds: Vec<u64> = (0..common.seeds).collect();
            let p_tot: Vec<f64> = total_power_mw.iter().map(|p| p * 1e-3).collect();
            let rows =
                experiments::sweep_m(&cfg, &elements, &p_tot, &seeds, &variants_or_all(variant))?;
            experiments::write_sweep_m_csv(output(common.out.as_ref())?, &rows)?;
            let done = rows.iter().filter(|r| r.converged).count();
            eprintln!("{done}/{} runs converged", rows.len());
            Ok(done == rows.len())
        }
        Command::SweepLoc {
            common,
            x_ris,
            variant,
        } => {
            let cfg = load_config(common.config.as_ref(), common.fixed_power)?;
            let seeds: Vec<u64> = (0..common.seeds).collect();
            let rows =
                experiments::sweep_location(&cfg, &x_ris, &seeds, &variants_or_all(variant))?;
            experiments::write_sweep_loc_csv(output(common.out.as_ref())?, &rows, cfg.num_users())?;
            let done = rows.iter().filter(|r| r.converged).count();
            eprintln!("{done}/{} runs converged", rows.len());
            Ok(done == rows.len())
        }
        Command::Solve {
            config,
            seed,
            channels,
            variant,
            out,
            fixed_power,
        } => {
            let mut cfg = load_config(config.as_ref(), fixed_power)?;
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            let scenario = cfg.validate()?;
            let channels = match channels {
                Some(path) => ChannelSet::load(path)?,
                None => channel::draw(scenario.config(), scenario.config().rng_seed)?.1,
            };
            let result = experiments::solve_variant(&scenario, &channels, variant)?;
            if let Some(path) = out.as_ref() {
                result.trace.write_csv(File::create(path)?)?;
            }
            let ctx = Context::new(&scenario, &channels, result.variant)?;
            let summary = SolveSummary {
                variant,
                converged: result.trace.converged,
                iterations: result.trace.iterations(),
                mcl_s: result.mcl(),
                user_latency_s: result.latency.totals(),
                local_latency_s: result.latency.local(),
                edge_latency_s: result.latency.edge(),
                rates_bps: result.rates.clone(),
                offload_bits: result.state.offload_bits.clone(),
                edge_cpu_hz: result.state.edge_cpu.clone(),
                power_w: result.state.power.clone(),
                theta: result.state.theta.iter().map(|t| [t.re, t.im]).collect(),
                ris_power_w: ctx.ris_power(&result.state.theta, &result.state.power),
            };
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(result.trace.converged)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
