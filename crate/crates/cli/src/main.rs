use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bmf_cli::commands::{self, DiagnoseArgs, Scale, SimulateArgs};
use bmf_cli::{CliError, CliResult, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bmf", version, about = "Bayesian matrix factorization experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment config file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides the config's base seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for concurrent chains
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic low-rank matrix and a random subset of noisy entries
    Simulate {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        /// Fraction of entries observed, in (0, 1]
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        /// Noise precision of the observations
        #[arg(long)]
        tau_eta: Option<f64>,
    },
    /// Run the configured chains
    Sample,
    /// ACF, integrated autocorrelation times, RMSE and scatter pairs from traces
    Diagnose {
        /// Directory holding trace_chain_*.csv (defaults to the output directory)
        #[arg(long)]
        input_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        max_lag: usize,
        /// True matrix CSV to score reconstruction.csv against
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Two monitor names, comma separated, e.g. `A[0][0],A[0][1]`
        #[arg(long)]
        scatter: Option<String>,
    },
    /// Report the symmetry certificate of the configured priors
    CheckSymmetry,
    /// Paired zero-mean / non-zero-mean reproduction of a built-in example
    Repro {
        #[arg(long)]
        example: u32,
        #[arg(long, default_value = "desk")]
        scale: String,
    },
}

fn load_config(global: &Global) -> CliResult<ExperimentConfig> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| CliError::usage("--config is required for this command"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    let out = g.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if g.threads == Some(0) {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    match cli.command {
        Command::Simulate {
            m,
            n,
            rank,
            fraction,
            tau_eta,
        } => {
            let cfg = g.config.as_ref().map(|_| load_config(g)).transpose()?;
            let pick = |flag: Option<usize>, from_cfg: Option<usize>, name: &str| {
                flag.or(from_cfg)
                    .ok_or_else(|| CliError::usage(format!("--{name} is required without a config")))
            };
            let args = SimulateArgs {
                m: pick(m, cfg.as_ref().map(|c| c.m), "m")?,
                n: pick(n, cfg.as_ref().map(|c| c.n), "n")?,
                rank: pick(rank, cfg.as_ref().map(|c| c.rank), "rank")?,
                fraction,
                tau_eta: tau_eta.or(cfg.as_ref().map(|c| c.tau_eta)).unwrap_or(1e4),
                seed: g.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0),
            };
            let data = commands::simulate(&args, &out)?;
            println!("wrote {} observations to {}", data.obs.len(), out.display());
        }
        Command::Sample => {
            let cfg = load_config(g)?;
            let outcome = commands::sample(&cfg, &out, g.threads)?;
            println!("{} chains written to {}", outcome.traces.len(), out.display());
            if let Some(r) = outcome.rmse {
                println!("pooled rmse: {r}");
            }
        }
        Command::Diagnose {
            input_dir,
            max_lag,
            truth,
            scatter,
        } => {
            let truth = match (truth, &g.config) {
                (Some(t), _) => Some(t),
                (None, Some(_)) => load_config(g)?.truth_path,
                (None, None) => None,
            };
            let scatter = scatter
                .map(|s| {
                    s.split_once(',')
                        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                        .ok_or_else(|| CliError::usage("--scatter expects two monitor names separated by a comma"))
                })
                .transpose()?;
            let args = DiagnoseArgs {
                input_dir: input_dir.unwrap_or_else(|| out.clone()),
                max_lag,
                truth,
                scatter,
            };
            let report = commands::diagnose(&args, &out)?;
            if let Some(r) = report.rmse {
                println!("rmse: {r}");
            }
        }
        Command::CheckSymmetry => {
            let cfg = load_config(g)?;
            let report = commands::check_symmetry(&cfg, &out)?;
            println!("broken: {}", report.certificate.broken);
        }
        Command::Repro { example, scale } => {
            let scale: Scale = scale.parse()?;
            let seed = g.seed.unwrap_or(1);
            let outcome = commands::repro(example, scale, seed, &out, g.threads)?;
            println!(
                "rmse zero={} nonzero={}; see {}",
                outcome.zero.rmse.unwrap_or(f64::NAN),
                outcome.nonzero.rmse.unwrap_or(f64::NAN),
                Path::new(&out).join("comparison.txt").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
