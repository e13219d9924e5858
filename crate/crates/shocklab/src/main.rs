//! Command-line entry point: `run`, `compare` and `certify-profile`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shocklab::runner::{compare, run_file, run_text, Overrides, RunFailure, RunReport};

#[derive(Parser)]
#[command(name = "shocklab", version, about = "Self-similar shock formation lab for the Euler-Poisson system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a configuration file.
    Run {
        config: PathBuf,
        /// Write a snapshot every N steps.
        #[arg(long)]
        snapshots_every: Option<usize>,
        /// Audit every N steps.
        #[arg(long)]
        audit_every: Option<usize>,
        /// Stop once min d1 w falls below this value.
        #[arg(long, allow_hyphen_values = true)]
        stop_slope: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare T*/epsilon^2 between two completed runs.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
    /// Certify the weighted bounds of the stationary profile.
    CertifyProfile {
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn finish(result: Result<RunReport, RunFailure>) -> ExitCode {
    match result {
        Ok(rep) => {
            println!("{}", rep.summary);
            println!("outputs: {}", rep.out.display());
            if rep.all_pass {
                println!("all audits passed");
                ExitCode::SUCCESS
            } else {
                println!("failed audits: {}", rep.failures.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, snapshots_every, audit_every, stop_slope, out } => {
            let ov = Overrides { snapshots_every, audit_every, stop_slope, out };
            finish(run_file(&config, &ov))
        }
        Command::Compare { dir_a, dir_b } => match compare(&dir_a, &dir_b) {
            Ok(r) => {
                print!("{}", r.to_text());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::CertifyProfile { out } => {
            let ov = Overrides { out, ..Overrides::default() };
            finish(run_text("mode = profile-certify\n", &ov))
        }
    }
}
