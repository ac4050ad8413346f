use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use quadric_cli::{parse_config, run, CliError, RunOptions};

/// Kohn Laplacian kernels on quadric CR submanifolds.
#[derive(Debug, Parser)]
#[command(name = "quadric", version)]
struct Args {
    /// Job document (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Relative quadrature tolerance, overriding the document.
    #[arg(long)]
    tol: Option<f64>,
    /// Output path, overriding the document; stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for point batches.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed of the sphere sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checks for `verify`: `all` or a comma-separated list.
    #[arg(long)]
    suite: Option<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::config(e.to_string().trim_end())),
    };
    let result = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", args.config.display())))
        .and_then(|text| parse_config(&text))
        .and_then(|job| {
            let opts = RunOptions {
                tol: args.tol,
                out: args.out,
                threads: args.threads,
                seed: args.seed,
                suite: args.suite,
            };
            run(&job, &opts, std::io::stdout().lock())
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}
