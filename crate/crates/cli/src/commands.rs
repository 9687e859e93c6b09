//! `run`, `sweep` and `oracle`.

use std::path::{Path, PathBuf};

use log::info;
use raman_twa::parallel::{with_workers, Execution};
use raman_twa::sweep::{run_point, run_sweep_with, ScenarioKind, SweepRow};

use crate::config::{self, Config, ConfigError, Overrides, Profile};
use crate::csv_io::{self, CsvRow};
use crate::manifest::{sha256_hex, OutputFile, PointRecord, RunManifest, ScenarioRecord, Status};
use crate::oracle::{self, OracleOptions, Suite};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// I/O failure or failed oracle check.
    pub const FAILURE: u8 = 1;
    /// Invalid configuration or arguments, or an output collision.
    pub const INVALID: u8 = 2;
    /// Some points failed or some trajectories aborted.
    pub const PARTIAL: u8 = 3;
    /// No point produced results.
    pub const FAILED: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0} exists; pass --force to overwrite")]
    Collision(PathBuf),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] raman_twa::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Collision(_) => exit::INVALID,
            CliError::Sim(raman_twa::Error::Validation(_)) => exit::INVALID,
            CliError::Io(_) | CliError::Sim(_) => exit::FAILURE,
        }
    }
}

/// Options shared by `run` and `sweep`.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub trajectories: Option<u64>,
    pub profile: Option<Profile>,
    /// Scenario selector: a scenario name, `singlemode` or `all`.
    pub scenario: Option<String>,
    pub output: PathBuf,
    pub force: bool,
    /// Worker threads; zero uses every core.
    pub workers: usize,
    /// Command line, recorded in the manifest.
    pub arguments: Vec<String>,
}

/// Output files grouped by stem: the single-mode references share one.
fn selection(name: &str) -> Result<Vec<(String, Vec<ScenarioKind>)>, ConfigError> {
    let single = vec![ScenarioKind::SingleModeRef, ScenarioKind::SingleModeEff];
    Ok(match name.to_ascii_lowercase().as_str() {
        "all" => {
            let mut groups: Vec<_> = ScenarioKind::ALL[..4]
                .iter()
                .map(|k| (k.name().to_owned(), vec![*k]))
                .collect();
            groups.push(("singlemode".into(), single));
            groups
        }
        "singlemode" => vec![("singlemode".into(), single)],
        _ => {
            let k: ScenarioKind = name.parse()?;
            vec![(k.name().to_owned(), vec![k])]
        }
    })
}

struct Plan {
    selector: String,
    groups: Vec<(String, Vec<(ScenarioKind, Config)>)>,
}

fn plan(c: &Common) -> Result<Plan, CliError> {
    let file = match &c.config {
        Some(p) => Some(Overrides::read_file(p)?),
        None => None,
    };
    let ov = Overrides {
        file,
        profile: c.profile,
        set: c.set.clone(),
        seed: c.seed,
        trajectories: c.trajectories,
    };
    let selector = match &c.scenario {
        Some(s) => s.clone(),
        None => ov
            .file_scenario()?
            .map_or_else(|| ScenarioKind::FlatFlat.name().to_owned(), |k| k.name().to_owned()),
    };
    let mut groups = Vec::new();
    for (stem, kinds) in selection(&selector)? {
        let mut configs = Vec::new();
        for kind in kinds {
            configs.push((kind, config::load(kind, &ov)?));
        }
        groups.push((stem, configs));
    }
    Ok(Plan {
        selector: selector.to_ascii_lowercase(),
        groups,
    })
}

fn check_free(paths: &[PathBuf], force: bool) -> Result<(), CliError> {
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::Collision(p.clone()));
        }
    }
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Complete => exit::SUCCESS,
        Status::Partial => exit::PARTIAL,
        Status::Failed => exit::FAILED,
    }
}

fn execute(
    c: &Common,
    command: &str,
    csv_name: impl Fn(&str) -> String,
    manifest_name: impl Fn(&str) -> String,
    mut run: impl FnMut(ScenarioKind, &Config) -> Result<(Vec<PointRecord>, Vec<SweepRow>), CliError> + Send,
) -> Result<u8, CliError> {
    let plan = plan(c)?;
    let manifest_path = c.output.join(manifest_name(&plan.selector));
    let mut targets: Vec<PathBuf> = plan
        .groups
        .iter()
        .map(|(stem, _)| c.output.join(csv_name(stem)))
        .collect();
    targets.push(manifest_path.clone());
    check_free(&targets, c.force)?;

    let mut manifest = RunManifest::new(
        command,
        c.arguments.clone(),
        c.profile.map(|p| p.name().to_owned()),
    );
    for ((stem, configs), path) in plan.groups.iter().zip(&targets) {
        let mut rows = Vec::new();
        for (kind, cfg) in configs {
            let (points, r) = with_workers(c.workers, || run(*kind, cfg))?;
            rows.extend(r.iter().map(CsvRow::from_sweep));
            manifest.runs.push(ScenarioRecord {
                scenario: kind.name().to_owned(),
                master_seed: cfg.protocol.seed,
                config: cfg.to_toml(),
                output: csv_name(stem),
                points,
            });
        }
        let bytes = csv_io::to_bytes(&rows);
        write(path, &bytes)?;
        manifest.outputs.push(OutputFile {
            path: csv_name(stem),
            sha256: sha256_hex(&bytes),
        });
    }
    let status = manifest.settle_status();
    write(&manifest_path, manifest.to_json().as_bytes())?;
    info!(
        "{command}: {status:?}, {} aborted trajectories; manifest {}",
        manifest.aborted_trajectories(),
        manifest_path.display()
    );
    Ok(status_code(status))
}

/// One `(scenario, bandgap)` point per selected scenario.
pub fn cmd_run(c: &Common) -> Result<u8, CliError> {
    execute(
        c,
        "run",
        |stem| format!("{stem}-point.csv"),
        |sel| format!("{sel}-point.manifest.json"),
        |kind, cfg| {
            let scenario = cfg.scenario()?;
            let protocol = cfg.protocol();
            info!("{kind}: omega0c={} with {} trajectories", cfg.bandgap, protocol.n_trajectories);
            let (outcome, rows) = run_point(&scenario, cfg.bandgap, &protocol, Execution::Parallel);
            if let Some(e) = &outcome.error {
                log::warn!("{kind}: omega0c={}: {e}", outcome.omega0c);
            }
            Ok((vec![PointRecord::from(&outcome)], rows))
        },
    )
}

/// The band-gap grid for every selected scenario, one CSV per group.
pub fn cmd_sweep(c: &Common) -> Result<u8, CliError> {
    execute(
        c,
        "sweep",
        |stem| format!("{stem}.csv"),
        |sel| format!("{sel}.manifest.json"),
        |kind, cfg| {
            let scenario = cfg.scenario()?;
            let grid = cfg.bandgaps();
            let total = grid.len();
            let mut done = 0;
            let result = run_sweep_with(&scenario, &grid, &cfg.protocol(), Execution::Parallel, |p| {
                done += 1;
                match &p.error {
                    None => info!(
                        "{kind}: omega0c={} done ({} aborted) [{done}/{total}]",
                        p.omega0c, p.aborted
                    ),
                    Some(e) => log::warn!("{kind}: omega0c={} failed: {e} [{done}/{total}]", p.omega0c),
                }
            })?;
            Ok((result.points.iter().map(PointRecord::from).collect(), result.rows))
        },
    )
}

/// Run oracle suites, printing one line per check.
pub fn cmd_oracle(suite: Suite, opts: &OracleOptions, workers: usize) -> Result<u8, CliError> {
    let checks = with_workers(workers, || oracle::run_suite(suite, opts))?;
    let mut failed = 0;
    for c in &checks {
        println!("{c}");
        failed += usize::from(!c.passed());
    }
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { exit::SUCCESS } else { exit::FAILURE })
}
