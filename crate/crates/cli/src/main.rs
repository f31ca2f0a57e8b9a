use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use relaybound_core::experiment::{format_float, parse_config, report_gains, run_sweep, ExperimentConfig, CONFIG_KEYS};
use relaybound_core::{
    montecarlo, policy_iteration, simulate_original, upper_bound, FiniteChannel, HeuristicPolicy,
    MdpModel, RelayModel, SimulationConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "relaybound",
    version,
    about = "Success-probability bound and heuristic for a battery-assisted power-splitting relay",
    after_help = config_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Source transmit power, mW.
    #[arg(long, global = true, value_name = "MW")]
    source_power: Option<String>,
    /// Noise power, mW.
    #[arg(long, global = true, value_name = "MW")]
    noise_power: Option<String>,
    /// Block duration, ms.
    #[arg(long, global = true, value_name = "MS")]
    block_duration: Option<String>,
    /// Energy conversion efficiency in (0,1).
    #[arg(long, global = true)]
    efficiency: Option<String>,
    /// Source rate, bits/s/Hz.
    #[arg(long, global = true)]
    rate: Option<String>,
    /// Battery capacity, µJ.
    #[arg(long, global = true, value_name = "UJ")]
    battery_capacity: Option<String>,
    /// Channel states of the Rayleigh quantization.
    #[arg(long, global = true, value_name = "N")]
    channel_states: Option<String>,
    /// Sweep axis: battery or power.
    #[arg(long, global = true)]
    sweep: Option<String>,
    /// Sweep points, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    sweep_values: Option<String>,
    /// Battery grid sizes, comma separated (e.g. 5,9).
    #[arg(long, global = true, value_name = "LIST")]
    levels: Option<String>,
    /// Monte Carlo blocks.
    #[arg(long, global = true, value_name = "M")]
    blocks: Option<String>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output CSV path (stdout when absent or -).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<String>,
    /// Raise residuals lying exactly on a grid level to the next level (true/false).
    #[arg(long, global = true, value_name = "BOOL")]
    round_exact_up: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the quantized channel as `index,gain,probability`.
    Channel,
    /// Closed-form success probability of the battery-depleting heuristic.
    Heuristic,
    /// Upper bound from policy iteration, one row per battery grid size.
    Bound,
    /// Simulate the heuristic on the continuous-energy system.
    Simulate,
    /// Run the parameter sweep and write the result table.
    Sweep,
}

fn config_help() -> String {
    let mut s = String::from("Config keys (file `key = value`, `#` comments) and defaults:\n");
    for (key, default, doc) in CONFIG_KEYS {
        s.push_str(&format!("  {key:<18} {default:<22} {doc}\n"));
    }
    s
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        let flags = [
            ("source_power", &self.source_power),
            ("noise_power", &self.noise_power),
            ("block_duration", &self.block_duration),
            ("efficiency", &self.efficiency),
            ("rate", &self.rate),
            ("battery_capacity", &self.battery_capacity),
            ("n_channel_states", &self.channel_states),
            ("sweep", &self.sweep),
            ("sweep_values", &self.sweep_values),
            ("n_levels", &self.levels),
            ("blocks", &self.blocks),
            ("seed", &self.seed),
            ("out", &self.out),
            ("round_exact_up", &self.round_exact_up),
        ];
        flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    fn experiment_config(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(path) => Some(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?),
            None => None,
        };
        Ok(parse_config(text.as_deref(), &self.overrides())?)
    }
}

fn output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = cli.experiment_config()?;
    let mut out = output(&cfg)?;
    match cli.command {
        Command::Channel => {
            FiniteChannel::equiprobable_exponential(cfg.n_channel_states)?.write_csv(&mut out)?;
        }
        Command::Heuristic => {
            let relay = RelayModel::rayleigh(cfg.params, cfg.n_channel_states)?;
            writeln!(out, "source_power,battery_capacity,p_heuristic_analytic")?;
            writeln!(
                out,
                "{},{},{}",
                cfg.params.source_power(),
                cfg.params.battery_capacity(),
                format_float(relay.heuristic_average_success())
            )?;
        }
        Command::Bound => {
            let relay = RelayModel::rayleigh(cfg.params, cfg.n_channel_states)?;
            writeln!(out, "n_levels,p_upper_bound,p_heuristic_analytic,iterations")?;
            for &n in &cfg.n_levels {
                let model = MdpModel::build(&relay, n, cfg.rounding)?;
                let res = policy_iteration(&model, &model.default_rule())?;
                let pu = upper_bound(&model, &res)?;
                writeln!(
                    out,
                    "{n},{},{},{}",
                    format_float(pu),
                    format_float(relay.heuristic_average_success()),
                    res.iterations
                )?;
            }
        }
        Command::Simulate => {
            let relay = RelayModel::rayleigh(cfg.params, cfg.n_channel_states)?;
            let sim = simulate_original(&relay, &HeuristicPolicy, &SimulationConfig::new(cfg.blocks, cfg.seed))?;
            montecarlo::write_csv(&[sim], &mut out)?;
        }
        Command::Sweep => {
            let table = run_sweep(&cfg)?;
            table.write_csv(&mut out)?;
            for row in table.rows.iter().filter(|r| !r.is_ok()) {
                if let Err(msg) = &row.outcome {
                    eprintln!("row failed: {msg}");
                }
            }
            if let Ok(report) = report_gains(&table) {
                eprint!("{report}");
            }
            out.flush()?;
            return Ok(table.all_ok());
        }
    }
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
