//! Run manifests: the JSON sidecar written next to every output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use raman_twa::observables::RamanShiftReport;
use raman_twa::sweep::PointOutcome;

use crate::csv_io::SCHEMA_VERSION;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub system: String,
    pub variances: String,
    pub raman_shift: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            system: "natural units: hbar = 1, omega_0^R = 1; times in 1/omega_0^R".into(),
            variances: "V(X_k) = <|X_k|^2> - |<X_k>|^2 over Wigner samples, \
                        X_k = x_k + conj(x_-k); vacuum V = 1"
                .into(),
            raman_shift: RamanShiftReport::UNIT_NOTE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub omega0c: f64,
    pub seed: u64,
    pub trajectories: u64,
    pub aborted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&PointOutcome> for PointRecord {
    fn from(p: &PointOutcome) -> Self {
        Self {
            omega0c: p.omega0c,
            seed: p.seed,
            trajectories: p.trajectories,
            aborted: p.aborted,
            error: p.error.clone(),
        }
    }
}

/// One scenario run: the resolved configuration and what came of each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario: String,
    pub master_seed: u64,
    /// Complete TOML configuration; pass it back with `--config` to rerun.
    pub config: String,
    pub output: String,
    pub points: Vec<PointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub csv_schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub arguments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub units: Units,
    pub status: Status,
    pub runs: Vec<ScenarioRecord>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, arguments: Vec<String>, profile: Option<String>) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            csv_schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            arguments,
            profile,
            started_at: timestamp(),
            finished_at: String::new(),
            units: Units::default(),
            status: Status::Complete,
            runs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn aborted_trajectories(&self) -> usize {
        self.runs.iter().flat_map(|r| &r.points).map(|p| p.aborted).sum()
    }

    /// Complete when every point finished without aborts, failed when no
    /// point finished at all.
    pub fn settle_status(&mut self) -> Status {
        let points: Vec<&PointRecord> = self.runs.iter().flat_map(|r| &r.points).collect();
        let failed = points.iter().filter(|p| p.error.is_some()).count();
        self.status = if !points.is_empty() && failed == points.len() {
            Status::Failed
        } else if failed > 0 || self.aborted_trajectories() > 0 {
            Status::Partial
        } else {
            Status::Complete
        };
        self.finished_at = timestamp();
        self.status
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
