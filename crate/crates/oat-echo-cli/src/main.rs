//! Command-line front end for the twisting-echo sensitivity toolkit.
//!
//! Five subcommands: `landscape` (full `(mu, nu)` sweep), `slice`
//! (inversion-optimized sensitivity vs `mu` with Fisher bounds), `scaling`
//! (power-law fits of the class optima vs particle number), `wigner` (the
//! split double-inversion fields), and `verify` (oracle cross-check suite).
//!
//! Exit codes: 0 success, 1 validation error, 2 verification failure,
//! 3 I/O error.

mod commands;
mod config;
mod output;
mod verify;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, F64List, FileConfig, GridArg, PowerLawArg, RangeArg, U32List};
use oat_echo::optimizer::ProtocolClass;
use oat_echo::protocol::NoiseModel;
use output::Format;

#[derive(Parser)]
#[command(
    name = "oat-echo",
    version,
    about = "Sensitivity analysis for Ramsey interferometry with generalized one-axis-twisting echoes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value configuration file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for grid evaluation (default: machine concurrency).
    /// Output bytes do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path, or `-` for stdout.
    #[arg(long)]
    out: Option<String>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimized sensitivity over a (mu, nu) grid.
    Landscape {
        #[command(flatten)]
        common: CommonArgs,
        /// Particle number.
        #[arg(long)]
        n: Option<u32>,
        /// Collective dephasing strength.
        #[arg(long)]
        sigma: Option<f64>,
        /// Individual dephasing strength.
        #[arg(long = "Sigma")]
        individual: Option<f64>,
        /// Twisting-strength range lo:hi.
        #[arg(long, allow_hyphen_values = true)]
        mu_range: Option<RangeArg>,
        /// Excess-inversion range lo:hi.
        #[arg(long, allow_hyphen_values = true)]
        nu_range: Option<RangeArg>,
        /// Grid resolution MUxNU, e.g. 257x513.
        #[arg(long)]
        grid: Option<GridArg>,
    },
    /// Inversion-optimized sensitivity and Fisher bounds along mu.
    Slice {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long = "Sigma")]
        individual: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        mu_range: Option<RangeArg>,
        /// Number of mu samples.
        #[arg(long)]
        mu_count: Option<usize>,
        /// Resolution of the nu search grid over [-pi, pi].
        #[arg(long)]
        nu_count: Option<usize>,
    },
    /// Power-law fits of the per-class optima against particle number.
    Scaling {
        #[command(flatten)]
        common: CommonArgs,
        /// Protocol classes: comma list of squeezing,out,ghz (default all).
        #[arg(long)]
        classes: Option<String>,
        /// Collective dephasing strengths (comma list).
        #[arg(long)]
        sigma: Option<F64List>,
        /// Individual dephasing strengths (comma list).
        #[arg(long = "Sigma")]
        individual: Option<F64List>,
        /// Particle numbers (comma list, increasing).
        #[arg(long)]
        n_list: Option<U32List>,
        /// Replace measured optima by an exact c*N^alpha power law (fit
        /// self-test).
        #[arg(long)]
        synthetic: Option<PowerLawArg>,
    },
    /// Wigner fields of the split double-inversion readout.
    Wigner {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: Option<u32>,
        /// Twisting strength of the protocol (nu = -mu implied).
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
        /// Signal rotation angle.
        #[arg(long, allow_negative_numbers = true)]
        phi: Option<f64>,
        /// Colatitude sample count (default 2N+1).
        #[arg(long)]
        theta_count: Option<usize>,
        /// Azimuth sample count (default 4N+2).
        #[arg(long)]
        phi_count: Option<usize>,
    },
    /// Oracle cross-checks and invariants; exit 0 iff all pass.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Small-register subset (N <= 8), finishes in seconds.
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Validation(_) => ExitCode::from(1),
                CliError::Io(_) => ExitCode::from(3),
            }
        }
    }
}

fn setup_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Validation("threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Landscape {
            common,
            n,
            sigma,
            individual,
            mu_range,
            nu_range,
            grid,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            setup_threads(file.resolve_opt(common.threads, "threads")?)?;
            let n = file.resolve(n, "n", 32)?;
            let noise = NoiseModel::new(
                file.resolve(sigma, "sigma", 0.0)?,
                file.resolve(individual, "Sigma", 0.0)?,
            )?;
            let mu_range = file.resolve(mu_range, "mu-range", RangeArg { lo: 0.0, hi: PI })?;
            let nu_range = file.resolve(nu_range, "nu-range", RangeArg { lo: -PI, hi: PI })?;
            let grid = file.resolve(
                grid,
                "grid",
                GridArg {
                    mu_count: 257,
                    nu_count: 513,
                },
            )?;
            let table = commands::run_landscape(&commands::LandscapeConfig {
                n,
                noise,
                mu_range: (mu_range.lo, mu_range.hi),
                nu_range: (nu_range.lo, nu_range.hi),
                mu_count: grid.mu_count,
                nu_count: grid.nu_count,
            })?;
            emit(&file, &common, table, "landscape.csv")?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Slice {
            common,
            n,
            sigma,
            individual,
            mu_range,
            mu_count,
            nu_count,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            setup_threads(file.resolve_opt(common.threads, "threads")?)?;
            let n = file.resolve(n, "n", 32)?;
            let noise = NoiseModel::new(
                file.resolve(sigma, "sigma", 0.0)?,
                file.resolve(individual, "Sigma", 0.0)?,
            )?;
            let mu_range = file.resolve(mu_range, "mu-range", RangeArg { lo: 0.0, hi: PI })?;
            let mu_count = file.resolve(mu_count, "mu-count", 129)?;
            let nu_count = file.resolve(nu_count, "nu-count", 257)?;
            if mu_count < 2 || nu_count < 3 {
                return Err(CliError::Validation(
                    "slice needs mu-count >= 2 and nu-count >= 3".into(),
                ));
            }
            let table = commands::run_slice(&commands::SliceConfig {
                n,
                noise,
                mu_range: (mu_range.lo, mu_range.hi),
                mu_count,
                nu_count,
            })?;
            emit(&file, &common, table, "slice.csv")?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scaling {
            common,
            classes,
            sigma,
            individual,
            n_list,
            synthetic,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            setup_threads(file.resolve_opt(common.threads, "threads")?)?;
            let classes = parse_classes(&file.resolve(
                classes,
                "classes",
                "squeezing,out,ghz".to_string(),
            )?)?;
            let sigmas = file.resolve(sigma, "sigma", F64List(vec![0.0]))?.0;
            let individuals = file.resolve(individual, "Sigma", F64List(vec![0.0]))?.0;
            let n_list = file
                .resolve(
                    n_list,
                    "n-list",
                    U32List(vec![64, 128, 256, 512, 1024, 2048, 4096]),
                )?
                .0;
            let synthetic = file
                .resolve_opt(synthetic, "synthetic")?
                .map(|p| (p.c, p.alpha));
            let table = commands::run_scaling(&commands::ScalingConfig {
                classes,
                sigmas,
                individuals,
                n_list,
                synthetic,
            })?;
            emit(&file, &common, table, "scaling.csv")?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Wigner {
            common,
            n,
            mu,
            phi,
            theta_count,
            phi_count,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            setup_threads(file.resolve_opt(common.threads, "threads")?)?;
            let n = file.resolve(n, "n", 32)?;
            let mu = file.resolve(mu, "mu", PI / 2.0)?;
            let phi = file.resolve(phi, "phi", -0.02)?;
            let theta_count = file.resolve(theta_count, "theta-count", 2 * n as usize + 1)?;
            let phi_count = file.resolve(phi_count, "phi-count", 4 * n as usize + 2)?;
            if theta_count == 0 || phi_count == 0 {
                return Err(CliError::Validation(
                    "wigner export needs nonzero sample counts".into(),
                ));
            }
            let (state, measurement) = commands::run_wigner(&commands::WignerConfig {
                n,
                mu,
                phi,
                theta_count,
                phi_count,
            })?;
            let format = file.resolve(common.format, "format", Format::Csv)?;
            let prefix = file.resolve(common.out.clone(), "out", "wigner".to_string())?;
            if prefix == "-" {
                output::write_output("-", &state.render(format))?;
                output::write_output("-", &measurement.render(format))?;
            } else {
                let ext = match format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                };
                output::write_output(&format!("{prefix}_state.{ext}"), &state.render(format))?;
                output::write_output(
                    &format!("{prefix}_measurement.{ext}"),
                    &measurement.render(format),
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { common, quick } => {
            let file = FileConfig::load(common.config.as_deref())?;
            setup_threads(file.resolve_opt(common.threads, "threads")?)?;
            let quick = file.resolve(if quick { Some(true) } else { None }, "quick", false)?;
            let results = verify::run_suite(quick);
            let mut all_passed = true;
            for r in &results {
                let tag = if r.passed { "ok  " } else { "FAIL" };
                println!("{tag} {:<20} {}", r.name, r.detail);
                all_passed &= r.passed;
            }
            if all_passed {
                println!("verify: {} checks passed", results.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verify: FAILURES present");
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn parse_classes(s: &str) -> Result<Vec<ProtocolClass>, CliError> {
    s.split(',')
        .map(|p| match p.trim() {
            "squeezing" => Ok(ProtocolClass::Squeezing),
            "out" => Ok(ProtocolClass::OverUnTwisting),
            "ghz" => Ok(ProtocolClass::Ghz),
            other => Err(CliError::Validation(format!(
                "unknown class '{other}' (expected squeezing, out, ghz)"
            ))),
        })
        .collect()
}

fn emit(
    file: &FileConfig,
    common: &CommonArgs,
    table: output::Table,
    _default_name: &str,
) -> Result<(), CliError> {
    let format = file.resolve(common.format, "format", Format::Csv)?;
    let out = file.resolve(common.out.clone(), "out", "-".to_string())?;
    output::write_output(&out, &table.render(format))?;
    Ok(())
}
