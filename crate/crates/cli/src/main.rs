use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use raman_twa_cli::commands::{self, exit, Common};
use raman_twa_cli::config::Profile;
use raman_twa_cli::oracle::{OracleOptions, Suite};

#[derive(Parser)]
#[command(name = "raman-twa", version, about = "Truncated Wigner simulations of multimode Raman-cavity hybrids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a single band-gap point.
    Run(RunArgs),
    /// Sweep the band gap over the configured grid.
    Sweep(RunArgs),
    /// Check the simulator against independently known results.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Paper,
    Ci,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration merged over the scenario template.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set kappa=0.05` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<u64>,
    /// Trajectory budget: paper (3500) or ci (500).
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// flatflat, quadraman, quadcavity, thermal, singlemode-ref,
    /// singlemode-eff, singlemode (both references) or all.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "output")]
    output: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "TWA_WORKERS", default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct OracleArgs {
    /// drift, fdt, thermal, squeezing or all.
    suite: Suite,
    #[arg(long, default_value_t = OracleOptions::default().trajectories)]
    trajectories: u64,
    #[arg(long, default_value_t = OracleOptions::default().seed)]
    seed: u64,
    #[arg(long, env = "TWA_WORKERS", default_value_t = 0)]
    workers: usize,
}

impl RunArgs {
    fn common(self) -> Common {
        Common {
            config: self.config,
            set: self.set,
            seed: self.seed,
            trajectories: self.trajectories,
            profile: self.profile.map(|p| match p {
                ProfileArg::Paper => Profile::Paper,
                ProfileArg::Ci => Profile::Ci,
            }),
            scenario: self.scenario,
            output: self.output,
            force: self.force,
            workers: self.workers,
            arguments: std::env::args().collect(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::cmd_run(&a.common()),
        Command::Sweep(a) => commands::cmd_sweep(&a.common()),
        Command::Oracle(a) => {
            let opts = OracleOptions {
                trajectories: a.trajectories,
                seed: a.seed,
            };
            commands::cmd_oracle(a.suite, &opts, a.workers)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code().max(exit::FAILURE))
        }
    }
}
