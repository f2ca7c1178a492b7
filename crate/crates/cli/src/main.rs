use std::path::PathBuf;
use std::process::ExitCode;

use attractor_lab_cli::{exit, execute, report, Experiment, Request, RunError, ENV_OUT};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "attractor-lab", version, about = "Attractor experiments for u_t − Δu + f(u) = h on (0, π)")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for parallel job pools.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,

    /// Artifact directory; ATTRACTORLAB_OUT takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory or a branching ensemble.
    Simulate(RunArgs),
    /// Find and classify stationary solutions.
    Equilibria(RunArgs),
    /// Build the connection graph between equilibria.
    Attractor(RunArgs),
    /// Fit and check dissipativity and smoothing constants.
    Certify(RunArgs),
    /// Tabulate unstable dimensions at 0 for the remark3 family.
    DimensionScan(RunArgs),
    /// Growth conditions and semiflow axioms for the configured bundle.
    Audit(RunArgs),
    /// Summarize an artifact directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("attractor-lab: cannot set up {n} threads: {e}");
            return ExitCode::from(exit::USAGE as u8);
        }
    }
    let (experiment, args) = match cli.command {
        Command::Report { dir } => {
            return match report(&dir) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("attractor-lab: {e}");
                    ExitCode::from(exit::USAGE as u8)
                }
            };
        }
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Equilibria(a) => (Experiment::Equilibria, a),
        Command::Attractor(a) => (Experiment::Attractor, a),
        Command::Certify(a) => (Experiment::Certify, a),
        Command::DimensionScan(a) => (Experiment::DimensionScan, a),
        Command::Audit(a) => (Experiment::Audit, a),
    };
    let req = Request {
        experiment,
        config: args.config,
        out: args.out,
        env_out: std::env::var(ENV_OUT).ok(),
        seed: args.seed,
    };
    match execute(&req) {
        Ok(done) => {
            if let Some(e) = &done.error {
                eprintln!("attractor-lab: {e}");
                eprintln!("diagnostics in {}", done.out.join("diagnostics.txt").display());
            } else if let Some(s) = &done.summary {
                if !cli.quiet || !s.passed {
                    for c in s.certificates.iter().filter(|c| !cli.quiet || !c.passed) {
                        println!("{:<22} {:<20} {:>14.6e}  {}", c.name, c.constant, c.value, if c.passed { "pass" } else { "FAIL" });
                    }
                    if !cli.quiet {
                        println!("artifacts in {}", done.out.display());
                    }
                }
            }
            ExitCode::from(done.code as u8)
        }
        Err(e) => {
            eprintln!("attractor-lab: {e}");
            let code = match e {
                RunError::Solver(_) | RunError::Io(_) => exit::SOLVER,
                _ => exit::USAGE,
            };
            ExitCode::from(code as u8)
        }
    }
}
