use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jostdet_cli::{run, Command, RunOptions};

/// Fredholm determinants of semi-separable kernels and Jost functions of matrix Schrödinger operators.
#[derive(Parser, Debug)]
#[command(name = "jostdet", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON job file.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for the parameter sweep.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory (overrides the job file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero wall times for reproducible output files.
    #[arg(long)]
    fixed_timing: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions {
        command: args.command,
        config: args.config,
        threads: args.threads,
        out: args.out,
        fixed_timing: args.fixed_timing,
    };
    match run(&opts, std::env::vars()) {
        Ok(report) => {
            let failed = report.output.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                eprintln!("{failed} consistency checks failed; see {}", report.summary.display());
            }
            println!("{}", report.csv.display());
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("jostdet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
