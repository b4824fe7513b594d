use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lyapdim_cli::{load, run, CliError, Overrides};

/// Run a dimension-theory experiment described by a TOML config.
///
/// Exit codes: 0 success, 1 failed identity checks, 2 invalid config,
/// 3 computation infeasible or non-finite, 4 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "lyapdim", version)]
struct Args {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Also box-count the realized horseshoes (horseshoe-approx only).
    #[arg(long)]
    geometric_check: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        geometric_check: args.geometric_check,
    };
    let result = (|| -> Result<_, CliError> {
        let config = load(&args.config, &overrides)?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = args.threads {
            if n == 0 {
                return Err(CliError::schema("--threads", "must be at least 1"));
            }
            pool = pool.num_threads(n);
        }
        let pool = pool
            .build()
            .map_err(|e| CliError::schema("--threads", e.to_string()))?;
        pool.install(|| run(&config, overrides.out.as_deref()))
    })();
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("{} ({} rows)", summary.out.join(&f.file).display(), f.rows);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lyapdim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
