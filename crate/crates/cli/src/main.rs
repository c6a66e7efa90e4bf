use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaugekit_cli::{cmd_generate, cmd_solve, run_suite, Outcome, Suite};

#[derive(Parser)]
#[command(name = "gaugekit", version, about = "Sparse atomic solutions of gauge-regularized inverse problems")]
struct Cli {
    /// Worker threads for `verify` (0 picks the number of cores).
    #[arg(long, global = true, env = "GAUGEKIT_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem spec, sparsify the solution and write a report.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the data-generation seed of the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a randomized oracle suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: u64,
    },
    /// Write resolved specs with synthetic measurements.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "generated")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
}

fn exit(o: Outcome) -> ExitCode {
    ExitCode::from(o as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit(Outcome::Usage) } else { exit(Outcome::Success) };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return exit(Outcome::Usage);
    }
    match cli.command {
        Command::Solve { spec, out, seed } => match cmd_solve(&spec, &out, seed) {
            Ok((r, outcome)) => {
                println!(
                    "objective {:.12e}  gap {:.3e}  atoms {} -> {}  bound {}  {}",
                    r.objective,
                    r.dual_gap,
                    r.r_before,
                    r.r_after,
                    r.bound,
                    if r.bound_met { "met" } else { "NOT met" }
                );
                println!("wrote {}", out.display());
                exit(outcome)
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit(e.outcome())
            }
        },
        Command::Verify { suite, seed, count } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return exit(Outcome::Usage);
                }
            };
            let summary = run_suite(suite, seed, count);
            for f in &summary.failures {
                println!("FAIL seed {}: {}", f.seed, f.reason);
            }
            println!("{suite}: {}/{} pass (seeds {}..{})", summary.passed, summary.count, seed, seed + count);
            exit(if summary.ok() { Outcome::Success } else { Outcome::NumericFailure })
        }
        Command::Generate { spec, out, seed, count } => match cmd_generate(&spec, &out, seed, count) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                exit(Outcome::Success)
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit(e.outcome())
            }
        },
    }
}
