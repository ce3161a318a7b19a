//! `maxorder`: command-line front end for the extremal-order toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, EXIT_AUDIT, EXIT_OK};
use config::{Format, FunctionKind, RunConfig, SystemKind};

#[derive(Parser)]
#[command(name = "maxorder", version, about = "Extremal orders of multiplicative functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    system: Option<SystemArg>,

    #[arg(long, global = true, value_enum)]
    function: Option<FunctionArg>,

    #[arg(long, global = true)]
    cutoff: Option<u64>,

    /// Comma-separated, strictly increasing.
    #[arg(long, global = true, value_delimiter = ',')]
    x_grid: Option<Vec<u64>>,

    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Print the configuration after defaults and overrides, then exit.
    #[arg(long, global = true)]
    print_effective_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// `rho(p)` for primes up to `analysis.prime_bound`.
    Rho,
    /// Enclosure of the maximal-order constant, or the minimal-order constant of `phi_A`.
    Constant,
    /// Champion ratios along the x grid.
    Champion,
    /// Record values of `f(n)` up to `analysis.n_max`.
    Scan,
    /// Construction for a non-thin prime set, with its probe scan.
    Counterexample,
    /// `phi_A(p^nu)` tables or `phi_A(n)` for listed `n`.
    Phi,
    /// Multiplicativity and reconstruction-identity audit.
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Standard,
    Unitary,
    Exponential,
}

#[derive(Clone, Copy, ValueEnum)]
enum FunctionArg {
    Sigma,
    Phi,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl Cli {
    fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = self.system {
            cfg.system.kind = match s {
                SystemArg::Standard => SystemKind::Standard,
                SystemArg::Unitary => SystemKind::Unitary,
                SystemArg::Exponential => SystemKind::Exponential,
            };
        }
        if let Some(f) = self.function {
            cfg.function.kind = match f {
                FunctionArg::Sigma => FunctionKind::Sigma,
                FunctionArg::Phi => FunctionKind::Phi,
            };
        }
        if let Some(c) = self.cutoff {
            cfg.analysis.cutoff = c;
        }
        if let Some(g) = &self.x_grid {
            cfg.analysis.x_grid = g.clone();
        }
        if let Some(p) = &self.out {
            cfg.output.path = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = cli.effective_config()?;
    if cli.print_effective_config {
        print!("{}", cfg.to_toml());
        return Ok(EXIT_OK);
    }
    let report = match cli.command {
        Command::Rho => commands::cmd_rho(&cfg),
        Command::Constant => commands::cmd_constant(&cfg),
        Command::Champion => commands::cmd_champion(&cfg),
        Command::Scan => commands::cmd_scan(&cfg),
        Command::Counterexample => commands::cmd_counterexample(&cfg),
        Command::Phi => commands::cmd_phi(&cfg),
        Command::Check => commands::cmd_check(&cfg),
    }?;
    let text = report.render(cfg.output.format);
    match &cfg.output.path {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{text}"),
    }
    match &report.failure {
        Some(msg) => {
            eprintln!("audit failed: {msg}");
            Ok(EXIT_AUDIT)
        }
        None => Ok(EXIT_OK),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run(&cli).unwrap_or_else(|e| {
        eprintln!("error: {}", e.message);
        e.code
    });
    ExitCode::from(code as u8)
}
