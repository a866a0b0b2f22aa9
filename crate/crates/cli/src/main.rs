use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualpair_cli::report::{self, Overrides};

#[derive(Parser)]
#[command(name = "dualpair", version, about = "Polar distributions, dual pairs and von Neumann checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a JSON scenario and emit its report.
    Run {
        scenario: PathBuf,
        /// Report path; overrides the scenario's output.report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides numeric.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides numeric.degree.
        #[arg(long)]
        degree: Option<usize>,
    },
    /// List builtin systems.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::List => {
            print!("{}", dualpair_cli::builtin_listing());
            ExitCode::SUCCESS
        }
        Cmd::Run { scenario, out, seed, degree } => {
            let overrides = Overrides { seed, degree, out };
            match report::run_file(&scenario, &overrides) {
                Ok((r, path)) => {
                    for (i, c) in r.results.iter().enumerate() {
                        eprintln!("[{i}] {:<18} {}", c.command, c.verdict);
                    }
                    match path {
                        Some(p) => eprintln!("report written to {}", p.display()),
                        None => print!("{}", report::to_json(&r)),
                    }
                    ExitCode::from(r.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
