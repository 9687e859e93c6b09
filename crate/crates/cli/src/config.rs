//! Run configuration.
//!
//! A configuration is a TOML document. Every scenario ships a complete
//! template under `configs/`; a user file only needs the keys it changes and
//! is merged over the template of the scenario it selects. Schema:
//!
//! ```toml
//! scenario = "flatflat"     # flatflat | quadraman | quadcavity | thermal |
//!                           # singlemode-ref | singlemode-eff
//! bandgap = 0.5             # omega_0^c for `run`
//!
//! [sweep]
//! bandgap_min = 0.2         # uniform grid for `sweep` ...
//! bandgap_max = 1.4
//! points = 31
//! # bandgaps = [0.4, 0.5]   # ... or an explicit increasing list
//!
//! [system]
//! modes = 11                # N = 2M + 1, odd
//! wrap = "wrap"             # wrap | truncate: momentum sums leaving the grid
//! g = 0.04                  # Raman-light coupling
//! g4 = 0.01                 # quartic photon coupling
//! kappa = 0.02              # cavity loss
//! gamma = 0.02              # Raman damping
//! temperature = 0.0         # k_B T / hbar omega_0^R, both baths
//!
//! [system.cavity]           # minimum is the band gap
//! shape = "flat"            # flat | quadratic
//! bandwidth = 0.0           # omega(M) - omega(0) for quadratic bands
//!
//! [system.raman]
//! shape = "flat"
//! base = 1.0
//! bandwidth = 0.0
//!
//! [protocol]
//! trajectories = 500
//! seed = 42
//! dt = 0.005
//! paired_baseline = true    # g = 0 reference on the same noise
//! blocks_per_trajectory = 1
//!
//! [protocol.ramp]
//! shape = "tanh"            # tanh | linear
//! t_ramp = 600.0
//! t_settle = 200.0
//! t_window = 200.0
//! sample_stride = 1.0
//! ```
//!
//! All quantities are in natural units (`hbar = 1`, `omega_0^R = 1`).
//!
//! Overrides use dotted keys (`system.kappa=0.05`); a bare key is accepted
//! when it names exactly one leaf (`kappa=0.05`, `seed=7`). Values are
//! parsed as TOML and fall back to plain strings.

use std::fmt;
use std::path::Path;

use raman_twa::ensemble::{RunProtocol, CI_TRAJECTORIES, PAPER_TRAJECTORIES};
use raman_twa::model::{
    Dispersion, DispersionKind, ModeGrid, RampSchedule, RampShape, SystemSpec, WrapPolicy,
};
use raman_twa::sweep::{uniform_grid, validate_bandgap_grid, Scenario, ScenarioKind};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// A configuration problem, reported before any simulation starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<raman_twa::Error> for ConfigError {
    fn from(e: raman_twa::Error) -> Self {
        ConfigError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

/// Shipped scenario templates.
pub fn preset_source(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::FlatFlat => include_str!("../../../configs/flatflat.toml"),
        ScenarioKind::QuadRaman => include_str!("../../../configs/quadraman.toml"),
        ScenarioKind::QuadCavity => include_str!("../../../configs/quadcavity.toml"),
        ScenarioKind::ThermalFlatFlat => include_str!("../../../configs/thermal.toml"),
        ScenarioKind::SingleModeRef => include_str!("../../../configs/singlemode-ref.toml"),
        ScenarioKind::SingleModeEff => include_str!("../../../configs/singlemode-eff.toml"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Flat,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wrap {
    Wrap,
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampKind {
    Tanh,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub bandgap_min: f64,
    pub bandgap_max: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandgaps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityBand {
    pub shape: Shape,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanBand {
    pub shape: Shape,
    pub base: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub modes: usize,
    pub wrap: Wrap,
    pub g: f64,
    pub g4: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub temperature: f64,
    pub cavity: CavityBand,
    pub raman: RamanBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampConfig {
    pub shape: RampKind,
    pub t_ramp: f64,
    pub t_settle: f64,
    pub t_window: f64,
    pub sample_stride: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub trajectories: u64,
    pub seed: u64,
    pub dt: f64,
    pub paired_baseline: bool,
    pub blocks_per_trajectory: usize,
    pub ramp: RampConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: String,
    pub bandgap: f64,
    pub sweep: SweepConfig,
    pub system: SystemConfig,
    pub protocol: ProtocolConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Paper,
    Ci,
}

impl Profile {
    pub fn trajectories(self) -> u64 {
        match self {
            Profile::Paper => PAPER_TRAJECTORIES,
            Profile::Ci => CI_TRAJECTORIES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Ci => "ci",
        }
    }
}

/// Everything that shapes a configuration besides the scenario template.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Parsed user config file.
    pub file: Option<Table>,
    pub profile: Option<Profile>,
    /// `key=value` pairs, applied in order.
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub trajectories: Option<u64>,
}

impl Overrides {
    pub fn read_file(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        text.parse::<Table>()
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Scenario named by the user file, if any.
    pub fn file_scenario(&self) -> Result<Option<ScenarioKind>> {
        match self.file.as_ref().and_then(|t| t.get("scenario")) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.parse()?)),
            Some(v) => err(format!("scenario: expected a string, got {v}")),
        }
    }
}

/// Recursively overlay `top` onto `base`.
fn merge(base: &mut Table, top: &Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn leaves(t: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in t {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => leaves(inner, &path, out),
            _ => out.push(path),
        }
    }
}

/// Expand a bare key to the unique leaf it names.
fn resolve_key(t: &Table, key: &str) -> Result<Vec<String>> {
    if key.contains('.') {
        return Ok(key.split('.').map(str::to_owned).collect());
    }
    let mut all = Vec::new();
    leaves(t, "", &mut all);
    let hits: Vec<&String> = all
        .iter()
        .filter(|p| p.rsplit('.').next() == Some(key))
        .collect();
    match hits.as_slice() {
        [one] => Ok(one.split('.').map(str::to_owned).collect()),
        [] => Ok(vec![key.to_owned()]),
        many => err(format!(
            "{key}: ambiguous key, use one of {}",
            many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )),
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

/// Apply one `key=value` override.
pub fn apply_set(t: &mut Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        return err(format!("override '{assignment}' is not of the form key=value"));
    };
    let path = resolve_key(t, key.trim())?;
    let mut value = parse_value(raw.trim());
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut node = &mut *t;
    for p in parents {
        node = match node.get_mut(p) {
            Some(Value::Table(inner)) => inner,
            _ => return err(format!("{key}: unknown configuration key")),
        };
    }
    // Dotted keys may add optional leaves; the schema rejects unknown ones.
    if !node.contains_key(last) && !parents.is_empty() {
        node.insert(last.clone(), value);
        return Ok(());
    }
    let Some(slot) = node.get_mut(last) else {
        return err(format!("{key}: unknown configuration key"));
    };
    // Integers given where a float is expected, and vice versa.
    value = match (&*slot, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Integer(_), Value::Float(x)) if x.fract() == 0.0 => Value::Integer(x as i64),
        (_, v) => v,
    };
    *slot = value;
    Ok(())
}

/// Merge template, user file and overrides for one scenario.
pub fn build_table(kind: ScenarioKind, ov: &Overrides) -> Result<Table> {
    let mut t: Table = preset_source(kind)
        .parse()
        .map_err(|e| ConfigError(format!("preset {kind}: {e}")))?;
    if let Some(file) = &ov.file {
        let mut file = file.clone();
        file.remove("scenario");
        merge(&mut t, &file);
    }
    let protocol = |t: &mut Table| match t.get_mut("protocol") {
        Some(Value::Table(p)) => Ok(p.clone()),
        _ => err("protocol: missing section"),
    };
    if let Some(p) = ov.profile {
        let mut section = protocol(&mut t)?;
        section.insert("trajectories".into(), Value::Integer(p.trajectories() as i64));
        t.insert("protocol".into(), Value::Table(section));
    }
    for s in &ov.set {
        apply_set(&mut t, s)?;
    }
    if let Some(Value::String(s)) = t.get("scenario") {
        if s.parse::<ScenarioKind>()? != kind {
            return err(format!("scenario: cannot change the scenario of a {kind} template"));
        }
    }
    let mut section = protocol(&mut t)?;
    if let Some(seed) = ov.seed {
        section.insert("seed".into(), Value::Integer(seed as i64));
    }
    if let Some(n) = ov.trajectories {
        section.insert("trajectories".into(), Value::Integer(n as i64));
    }
    t.insert("protocol".into(), Value::Table(section));
    Ok(t)
}

/// Fully resolved configuration for one scenario.
pub fn load(kind: ScenarioKind, ov: &Overrides) -> Result<Config> {
    let t = build_table(kind, ov)?;
    let cfg: Config = t
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(e.message().trim().to_owned()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn band(shape: Shape, base: f64, bandwidth: f64) -> Dispersion {
    match shape {
        Shape::Flat => Dispersion {
            kind: DispersionKind::Flat,
            base,
            bandwidth,
        },
        Shape::Quadratic => Dispersion::quadratic(base, bandwidth),
    }
}

impl Config {
    pub fn kind(&self) -> Result<ScenarioKind> {
        Ok(self.scenario.parse()?)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.system;
        let wrap = match s.wrap {
            Wrap::Wrap => WrapPolicy::Wrap,
            Wrap::Truncate => WrapPolicy::Truncate,
        };
        let template = SystemSpec {
            grid: ModeGrid::from_mode_count(s.modes, wrap)?,
            cavity: band(s.cavity.shape, self.bandgap, s.cavity.bandwidth),
            raman: band(s.raman.shape, s.raman.base, s.raman.bandwidth),
            g: s.g,
            g4: s.g4,
            kappa: s.kappa,
            gamma: s.gamma,
            temperature: s.temperature,
        };
        Ok(Scenario::new(self.kind()?, template))
    }

    pub fn protocol(&self) -> RunProtocol {
        let p = &self.protocol;
        RunProtocol {
            n_trajectories: p.trajectories,
            master_seed: p.seed,
            ramp: RampSchedule {
                shape: match p.ramp.shape {
                    RampKind::Tanh => RampShape::SmoothTanh,
                    RampKind::Linear => RampShape::Linear,
                },
                t_ramp: p.ramp.t_ramp,
                t_settle: p.ramp.t_settle,
                t_window: p.ramp.t_window,
                sample_stride: p.ramp.sample_stride,
            },
            dt: p.dt,
            paired_baseline: p.paired_baseline,
            blocks_per_trajectory: p.blocks_per_trajectory,
        }
    }

    pub fn bandgaps(&self) -> Vec<f64> {
        match &self.sweep.bandgaps {
            Some(list) => list.clone(),
            None => uniform_grid(self.sweep.bandgap_min, self.sweep.bandgap_max, self.sweep.points),
        }
    }

    /// Check every field; messages name the offending key.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let scenario = self.scenario();
        match &scenario {
            Ok(sc) => {
                if let Err(raman_twa::Error::Validation(v)) = sc.spec_at(self.bandgap).validate() {
                    problems.extend(v.iter().map(|v| v.to_string()));
                }
            }
            Err(e) => problems.push(e.0.clone()),
        }
        if let Err(raman_twa::Error::Validation(v)) = self.protocol().validate() {
            problems.extend(v.iter().map(|v| v.to_string()));
        }
        if self.sweep.bandgaps.is_none() && self.sweep.points == 0 {
            problems.push("sweep.points: at least one point is required".into());
        }
        if let Err(raman_twa::Error::Validation(v)) = validate_bandgap_grid(&self.bandgaps()) {
            problems.extend(v.iter().map(|v| format!("sweep.{v}")));
        }
        if let Ok(sc) = &scenario {
            for w in self.bandgaps() {
                if let Err(raman_twa::Error::Validation(v)) = sc.spec_at(w).validate() {
                    problems.extend(v.iter().map(|v| format!("{v} (band gap {w})")));
                }
            }
        }
        problems.dedup();
        if problems.is_empty() {
            Ok(())
        } else {
            err(problems.join("; "))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(set: &[&str]) -> Overrides {
        Overrides {
            set: set.iter().map(|s| s.to_string()).collect(),
            ..Overrides::default()
        }
    }

    #[test]
    fn presets_match_builtin_templates() {
        for kind in ScenarioKind::ALL {
            let cfg = load(kind, &Overrides::default()).unwrap();
            let sc = cfg.scenario().unwrap();
            let builtin = Scenario::preset(kind);
            assert_eq!(sc.kind, kind);
            assert_eq!(sc.spec_at(0.7), builtin.spec_at(0.7), "{kind}");
            assert_eq!(cfg.protocol(), RunProtocol::ci(42), "{kind}");
            assert_eq!(cfg.bandgaps(), raman_twa::sweep::default_bandgap_grid());
        }
    }

    #[test]
    fn bare_keys_resolve_to_unique_leaf() {
        let cfg = load(ScenarioKind::FlatFlat, &ov(&["kappa=0.05", "seed=7", "bandgap=0.6"])).unwrap();
        assert_eq!(cfg.system.kappa, 0.05);
        assert_eq!(cfg.protocol.seed, 7);
        assert_eq!(cfg.bandgap, 0.6);
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        let cfg = load(ScenarioKind::FlatFlat, &ov(&["protocol.ramp.t_ramp=20", "bandgap=1"])).unwrap();
        assert_eq!(cfg.protocol.ramp.t_ramp, 20.0);
        assert_eq!(cfg.bandgap, 1.0);
    }

    #[test]
    fn ambiguous_and_unknown_keys_are_rejected() {
        let e = load(ScenarioKind::FlatFlat, &ov(&["bandwidth=1"])).unwrap_err();
        assert!(e.0.contains("ambiguous"), "{e}");
        let e = load(ScenarioKind::FlatFlat, &ov(&["kapa=1"])).unwrap_err();
        assert!(e.0.contains("kapa"), "{e}");
        let e = load(ScenarioKind::FlatFlat, &ov(&["nonsense"])).unwrap_err();
        assert!(e.0.contains("key=value"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let e = load(ScenarioKind::FlatFlat, &ov(&["kappa=0"])).unwrap_err();
        assert!(e.0.contains("kappa"), "{e}");
        let e = load(ScenarioKind::FlatFlat, &ov(&["modes=4"])).unwrap_err();
        assert!(e.0.contains("modes"), "{e}");
        let e = load(ScenarioKind::FlatFlat, &ov(&["wrap=sideways"])).unwrap_err();
        assert!(e.0.contains("sideways"), "{e}");
        let e = load(ScenarioKind::FlatFlat, &ov(&["sweep.bandgaps=[0.5, 0.4]"])).unwrap_err();
        assert!(e.0.contains("bandgap"), "{e}");
    }

    #[test]
    fn profile_flags_and_file_layer_in_order() {
        let file: Table = "scenario = \"flatflat\"\n[system]\ng = 0.05\n[protocol]\ntrajectories = 10"
            .parse()
            .unwrap();
        let mut o = Overrides {
            file: Some(file),
            ..ov(&[])
        };
        assert_eq!(load(ScenarioKind::FlatFlat, &o).unwrap().protocol.trajectories, 10);
        o.profile = Some(Profile::Paper);
        let cfg = load(ScenarioKind::FlatFlat, &o).unwrap();
        assert_eq!(cfg.protocol.trajectories, 3500);
        assert_eq!(cfg.system.g, 0.05);
        o.set = vec!["trajectories=20".into()];
        assert_eq!(load(ScenarioKind::FlatFlat, &o).unwrap().protocol.trajectories, 20);
        o.trajectories = Some(30);
        o.seed = Some(9);
        let cfg = load(ScenarioKind::FlatFlat, &o).unwrap();
        assert_eq!((cfg.protocol.trajectories, cfg.protocol.seed), (30, 9));
    }

    #[test]
    fn snapshot_reloads_to_same_config() {
        let cfg = load(ScenarioKind::QuadRaman, &ov(&["g=0.03", "sweep.bandgaps=[0.3, 0.6]"])).unwrap();
        let o = Overrides {
            file: Some(cfg.to_toml().parse().unwrap()),
            ..Overrides::default()
        };
        assert_eq!(load(ScenarioKind::QuadRaman, &o).unwrap(), cfg);
    }
}
