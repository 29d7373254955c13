use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtensor_cli::{
    cmd_contraction, cmd_eigen, cmd_linearize, cmd_simulate, cmd_verify, load_config, resolve_out_dir, CliError,
};

#[derive(Parser)]
#[command(name = "qtensor", version, about = "Spectral-Galerkin Q-tensor nematic flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the Galerkin system and write energy log and snapshots.
    Simulate(Common),
    /// Run the verification checks; exits 1 if any fails.
    Verify(Common),
    /// List the eigenpairs of the bases.
    Eigen(Common),
    /// Solve by Picard iteration of the linearized problem.
    Linearize(Common),
    /// Scan contraction ratios over the configured horizons.
    Contraction(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides QTENSOR_OUT_DIR and the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let (Cmd::Simulate(c) | Cmd::Verify(c) | Cmd::Eigen(c) | Cmd::Linearize(c) | Cmd::Contraction(c)) = &cli.command;
    let mut cfg = load_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = resolve_out_dir(c.out.as_deref(), &cfg);
    match cli.command {
        Cmd::Simulate(_) => {
            let s = cmd_simulate(&cfg, &out)?;
            println!(
                "steps={} rejected={} snapshots={} identity_residual={:e}",
                s.steps,
                s.rejected,
                s.snapshots.len(),
                s.identity_residual
            );
        }
        Cmd::Verify(_) => {
            let reports = cmd_verify(&cfg, &out)?;
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().any(|r| !r.passed) {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Eigen(_) => println!("{}", cmd_eigen(&cfg, &out)?.display()),
        Cmd::Linearize(_) => {
            let s = cmd_linearize(&cfg, &out)?;
            println!("iterations={} direct_l2_difference={:e}", s.iterations, s.direct_difference);
        }
        Cmd::Contraction(_) => {
            for r in cmd_contraction(&cfg, &out)? {
                println!("T={} ratio={:.6e} picard_ratio={:.6e}", r.t, r.ratio, r.picard_ratio);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
