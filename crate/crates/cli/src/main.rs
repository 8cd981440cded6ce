mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{load_table, Settings};
use crate::error::CliError;

/// Environment variable naming the root under which run directories are created.
pub const OUTPUT_ROOT_ENV: &str = "GFQ_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(
    name = "gfq",
    version,
    about = "Stabilized continuous FEM for 2D linear acoustics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with one flat table per subcommand; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (default: $GFQ_OUTPUT_ROOT/<label>, or runs/<label>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TimeFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// DeC subtimesteps.
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    /// DeC iterations.
    #[arg(long = "P", alias = "p")]
    p: Option<usize>,
    /// sample | llrr | opt | longtime[:T]
    #[arg(long)]
    init: Option<String>,
    #[arg(long = "T", alias = "t-final")]
    t_final: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve one case on one mesh and record diagnostics over time.
    Run {
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long = "K", alias = "k")]
        k: Option<usize>,
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
        #[command(flatten)]
        time: TimeFlags,
        /// Diagnostics every this many steps.
        #[arg(long)]
        cadence: Option<usize>,
        /// Also write the final nodal state.
        #[arg(long)]
        state: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Error and convergence-order table over a list of meshes.
    Converge {
        #[arg(long)]
        case: Option<String>,
        /// One scheme or a comma-separated list.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long = "K", alias = "k")]
        k: Option<usize>,
        #[arg(long = "Ns", alias = "ns", value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[command(flatten)]
        time: TimeFlags,
        /// Schemes evaluated concurrently.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Fourier-symbol audits: det, torus or involution.
    Symbols {
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long = "K", alias = "k")]
        k: Option<usize>,
        /// Cells per direction (sets h and the torus resolution).
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        audit: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the line-by-line and optimization projections of a vortex.
    Project {
        #[arg(long)]
        case: Option<String>,
        #[arg(long = "K", alias = "k")]
        k: Option<usize>,
        #[arg(long = "Ns", alias = "ns", value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[command(flatten)]
        common: Common,
    },
    /// Rank and kernel audit of the 1D GFq operators.
    KernelAudit {
        /// A single degree (default: 1 to 4).
        #[arg(long = "K", alias = "k")]
        k: Option<usize>,
        #[arg(long)]
        cells: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

impl TimeFlags {
    fn into_settings(self) -> Settings {
        Settings {
            alpha: self.alpha,
            cfl: self.cfl,
            m: self.m,
            p: self.p,
            init: self.init,
            t_final: self.t_final,
            ..Default::default()
        }
    }
}

fn resolve(name: &str, flags: Settings, common: &Common) -> Result<Settings, CliError> {
    let flags = Settings {
        seed: common.seed,
        ..flags
    };
    match &common.config {
        Some(path) => Ok(flags.over(load_table(path, name)?)),
        None => Ok(flags),
    }
}

fn dispatch(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::Run {
            case,
            scheme,
            k,
            n,
            time,
            cadence,
            state,
            common,
        } => {
            let flags = Settings {
                case,
                scheme,
                k,
                n,
                cadence,
                state: state.then_some(true),
                ..Default::default()
            }
            .over(time.into_settings());
            commands::run(resolve("run", flags, &common)?, common.out)
        }
        Command::Converge {
            case,
            scheme,
            k,
            ns,
            time,
            jobs,
            common,
        } => {
            let flags = Settings {
                case,
                scheme,
                k,
                ns,
                jobs,
                ..Default::default()
            }
            .over(time.into_settings());
            commands::converge(resolve("converge", flags, &common)?, common.out)
        }
        Command::Symbols {
            scheme,
            k,
            n,
            alpha,
            audit,
            samples,
            common,
        } => {
            let flags = Settings {
                scheme,
                k,
                n,
                alpha,
                audit,
                samples,
                ..Default::default()
            };
            commands::symbols(resolve("symbols", flags, &common)?, common.out)
        }
        Command::Project {
            case,
            k,
            ns,
            common,
        } => {
            let flags = Settings {
                case,
                k,
                ns,
                ..Default::default()
            };
            commands::project(resolve("project", flags, &common)?, common.out)
        }
        Command::KernelAudit { k, cells, common } => {
            let flags = Settings {
                k,
                cells,
                ..Default::default()
            };
            commands::kernel_audit(resolve("kernel-audit", flags, &common)?, common.out)
        }
    }
}

fn report(category: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "category": category, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("config", e.to_string().trim(), 2),
    };
    match dispatch(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(e.category().as_str(), &e.to_string(), e.exit_code() as u8),
    }
}
