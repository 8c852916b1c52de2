use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqtherm_cli::{exit_code, run_estimate, run_fig2_sweep, run_fisher, run_simulate, run_spectrum, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "seqtherm", version, about = "Thermometry from sequential qubit measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config with [bath], [protocol] and [run]; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Number of sampled records.
    #[arg(long, global = true, value_name = "M")]
    trials: Option<usize>,
    /// Largest N of the `fig2` sweep.
    #[arg(long, global = true, value_name = "N")]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    beta_lo: Option<f64>,
    #[arg(long, global = true)]
    beta_hi: Option<f64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Independent and sequential precision bounds.
    Fisher,
    /// Lag ratio, N_cor and enhancement curves.
    Fig2,
    /// Sample outcome records.
    Simulate,
    /// Maximum-likelihood temperature from a records CSV.
    Estimate { records: PathBuf },
    /// Correlation lags and noise spectrum from a records CSV.
    Spectrum { records: PathBuf },
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = Overrides {
        out: cli.out,
        seed: cli.seed,
        trials: cli.trials,
        n_max: cli.n_max,
        beta_lo: cli.beta_lo,
        beta_hi: cli.beta_hi,
    }
    .apply(base)?;
    let out = cfg.run.out.clone();
    match cli.command {
        Command::Fisher => {
            let r = run_fisher(&cfg, &out)?;
            emit(&serde_json::to_string_pretty(&r)?);
        }
        Command::Fig2 => {
            let r = run_fig2_sweep(&cfg, cfg.run.n_max, &out)?;
            emit(&serde_json::to_string_pretty(&r.summary)?);
        }
        Command::Simulate => {
            let r = run_simulate(&cfg, &out)?;
            emit(&format!("wrote {} records to {}", r.metadata.n_records, r.records_path.display()));
        }
        Command::Estimate { records } => {
            let r = run_estimate(&records, &cfg, (cfg.run.beta_lo, cfg.run.beta_hi), &out)?;
            let e = &r.estimate;
            emit(&format!(
                "beta_hat = {:.6} ± {:.6} (95% CI [{:.6}, {:.6}]){}",
                e.beta_hat,
                e.std_error,
                e.ci[0],
                e.ci[1],
                if e.boundary_warning { " [boundary]" } else { "" }
            ));
        }
        Command::Spectrum { records } => {
            let r = run_spectrum(&records, &cfg, &out)?;
            emit(&serde_json::to_string_pretty(&r)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
