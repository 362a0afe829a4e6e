use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use elastrm::{tasks, CliError, RunConfig, Task};

/// Elastic multiple scattering and time-reversal imaging.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Scene file (TOML).
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    /// GMRES relative tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Polar (Gauss-Legendre) direction count.
    #[arg(long, default_value_t = 11)]
    ntheta: usize,
    /// Azimuthal direction count.
    #[arg(long, default_value_t = 21)]
    nphi: usize,
    /// Relative Gaussian noise added to far-field data.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shape-extraction threshold on the imaging function.
    #[arg(long, default_value_t = 1.0)]
    cutoff: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::load(
        &args.scene,
        args.task,
        args.tol,
        args.ntheta,
        args.nphi,
        args.noise,
        args.seed,
        args.cutoff,
        args.out.clone(),
    )
    .and_then(|cfg| tasks::run(&cfg));
    match result {
        Ok(report) => {
            println!("{}", serde_json::to_string(&report).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, &args.out),
    }
}

fn fail(e: &CliError, out: &std::path::Path) -> ExitCode {
    let report = e.report();
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    // best effort: the output directory may itself be the problem
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(out.join("error.json"), format!("{text}\n"));
    }
    eprintln!("{text}");
    ExitCode::from(e.exit_code() as u8)
}
