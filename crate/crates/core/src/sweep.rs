//! Band-gap sweeps over the reference scenarios.
//!
//! A scenario is a template [`SystemSpec`] whose cavity band minimum is left
//! free; a sweep sets it to each point of a band-gap grid, runs the coupled
//! ensemble with its paired `g = 0` reference, and emits one row per
//! `(omega0c, k >= 0)`.

use std::fmt;
use std::str::FromStr;

use crate::ensemble::{run_paired, PairedRun, RunProtocol};
use crate::error::{Error, Result, Violation};
use crate::model::{Dispersion, DispersionKind, ModeGrid, SystemSpec, WrapPolicy};
use crate::observables::{
    delta_variances, raman_shift, squeezing_scan, thermal_deltas, SqueezingReport, DEFAULT_ANGLES,
};
use crate::parallel::Execution;
use crate::rng::derive_seed;
use crate::stats::Estimate;

/// Mode count of the multimode reference system.
pub const REFERENCE_MODES: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    FlatFlat,
    QuadRaman,
    QuadCavity,
    ThermalFlatFlat,
    SingleModeRef,
    SingleModeEff,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::FlatFlat,
        ScenarioKind::QuadRaman,
        ScenarioKind::QuadCavity,
        ScenarioKind::ThermalFlatFlat,
        ScenarioKind::SingleModeRef,
        ScenarioKind::SingleModeEff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FlatFlat => "flatflat",
            ScenarioKind::QuadRaman => "quadraman",
            ScenarioKind::QuadCavity => "quadcavity",
            ScenarioKind::ThermalFlatFlat => "thermal",
            ScenarioKind::SingleModeRef => "singlemode-ref",
            ScenarioKind::SingleModeEff => "singlemode-eff",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Argument(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Template system; the cavity band minimum is replaced per point.
    pub template: SystemSpec,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, template: SystemSpec) -> Self {
        Self { kind, template }
    }

    /// Built-in template with the reference parameters.
    pub fn preset(kind: ScenarioKind) -> Self {
        let base = SystemSpec::paper_defaults(1.0);
        let single = SystemSpec {
            grid: ModeGrid::new(0, WrapPolicy::Wrap),
            ..base.clone()
        };
        let template = match kind {
            ScenarioKind::FlatFlat => base,
            ScenarioKind::QuadRaman => SystemSpec {
                raman: Dispersion::quadratic(1.0, 1.0),
                ..base
            },
            ScenarioKind::QuadCavity => SystemSpec {
                cavity: Dispersion::quadratic(1.0, 1.0),
                ..base
            },
            ScenarioKind::ThermalFlatFlat => SystemSpec {
                temperature: 2.0,
                ..base
            },
            ScenarioKind::SingleModeRef => SystemSpec {
                g: base.g / (REFERENCE_MODES as f64).sqrt(),
                ..single
            },
            ScenarioKind::SingleModeEff => single,
        };
        Self { kind, template }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// The system at band gap `omega0c`.
    pub fn spec_at(&self, omega0c: f64) -> SystemSpec {
        SystemSpec {
            cavity: self.template.cavity.with_base(omega0c),
            ..self.template.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceKind {
    /// Parametric resonance `2 omega0c = omega_k^R`.
    Line,
    /// Upper edge of the band-gap range admitting any resonance.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// Mode the line belongs to; `None` applies to every mode.
    pub k: Option<i64>,
    pub omega0c: f64,
    pub kind: ResonanceKind,
}

/// Resonance annotations derived from the scenario's band shapes.
///
/// A dispersive Raman band gives one line per mode at `omega_k^R / 2`; a
/// dispersive cavity band only admits resonances below `omega_0^R / 2`;
/// flat bands share a single line at `omega_0^R / 2`.
pub fn resonance_lines(scenario: &Scenario, grid: &ModeGrid) -> Vec<Resonance> {
    let t = &scenario.template;
    let raman0 = t.raman.base;
    if t.raman.kind == DispersionKind::Quadratic && grid.half_width() > 0 {
        (0..=grid.half_width() as i64)
            .map(|k| Resonance {
                k: Some(k),
                omega0c: t.raman.eval(grid, k).unwrap_or(raman0) / 2.0,
                kind: ResonanceKind::Line,
            })
            .collect()
    } else if t.cavity.kind == DispersionKind::Quadratic && grid.half_width() > 0 {
        vec![Resonance {
            k: None,
            omega0c: raman0 / 2.0,
            kind: ResonanceKind::Threshold,
        }]
    } else {
        vec![Resonance {
            k: None,
            omega0c: raman0 / 2.0,
            kind: ResonanceKind::Line,
        }]
    }
}

/// Annotation tokens for one row.
fn annotations(lines: &[Resonance], omega0c: f64, k: i64) -> Vec<String> {
    let mut out = Vec::new();
    for r in lines.iter().filter(|r| r.k.map_or(true, |q| q == k)) {
        match r.kind {
            ResonanceKind::Line => out.push(format!("line={}", r.omega0c)),
            ResonanceKind::Threshold => {
                out.push(format!("threshold={}", r.omega0c));
                if omega0c > r.omega0c {
                    out.push("nonresonant".to_owned());
                }
            }
        }
    }
    out
}

/// `n` uniform points on `[lo, hi]`, rounded to 12 decimals.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x * 1e12).round() / 1e12
        })
        .collect()
}

/// 31 points on `[0.2, 1.4]`.
pub fn default_bandgap_grid() -> Vec<f64> {
    uniform_grid(0.2, 1.4, 31)
}

pub fn validate_bandgap_grid(grid: &[f64]) -> Result<()> {
    let bad = |message: String| {
        Err(Error::Validation(vec![Violation {
            field: "bandgap",
            message,
        }]))
    };
    if grid.is_empty() {
        return bad("band-gap grid is empty".into());
    }
    if let Some(x) = grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return bad(format!("band gap {x} must be positive"));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return bad(format!(
            "band-gap grid must be strictly increasing ({} then {})",
            w[0], w[1]
        ));
    }
    Ok(())
}

/// Seed of the sweep point at `omega0c`; shared by every scenario so that
/// comparisons at equal band gap see the same streams.
pub fn point_seed(master_seed: u64, omega0c: f64) -> u64 {
    derive_seed(master_seed, omega0c.to_bits())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: ScenarioKind,
    pub omega0c: f64,
    pub k: i64,
    pub dv_e: Option<Estimate>,
    pub dv_q: Option<Estimate>,
    pub v_e_g: Option<Estimate>,
    pub v_e_0: Option<Estimate>,
    pub v_q_g: Option<Estimate>,
    pub v_q_0: Option<Estimate>,
    pub dv_e_th: Option<Estimate>,
    pub dv_q_th: Option<Estimate>,
    pub dvp_q_th: Option<Estimate>,
    pub mean_q: Option<Estimate>,
    /// Zero-mode squeezing; only on the `k = 0` row.
    pub squeezing: Option<SqueezingReport>,
    pub annotations: Vec<String>,
}

impl SweepRow {
    fn empty(scenario: ScenarioKind, omega0c: f64, k: i64) -> Self {
        Self {
            scenario,
            omega0c,
            k,
            dv_e: None,
            dv_q: None,
            v_e_g: None,
            v_e_0: None,
            v_q_g: None,
            v_q_0: None,
            dv_e_th: None,
            dv_q_th: None,
            dvp_q_th: None,
            mean_q: None,
            squeezing: None,
            annotations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub omega0c: f64,
    pub seed: u64,
    pub trajectories: u64,
    pub aborted: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub protocol: RunProtocol,
    pub bandgaps: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub points: Vec<PointOutcome>,
}

impl SweepResult {
    pub fn rows_at(&self, omega0c: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.omega0c == omega0c)
    }

    pub fn row(&self, omega0c: f64, k: i64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.omega0c == omega0c && r.k == k)
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }

    pub fn aborted_trajectories(&self) -> usize {
        self.points.iter().map(|p| p.aborted).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.failed_points() == 0 && self.aborted_trajectories() == 0
    }
}

fn fill_rows(
    spec: &SystemSpec,
    run: &PairedRun,
    rows: &mut [SweepRow],
) -> Result<()> {
    let deltas = delta_variances(&run.coupled, &run.baseline)?;
    let shift = raman_shift(&run.coupled)?;
    let thermal = if spec.temperature > 0.0 {
        Some(thermal_deltas(&run.coupled, &run.baseline)?)
    } else {
        None
    };
    let squeezing = squeezing_scan(&run.coupled, DEFAULT_ANGLES)?;
    for row in rows.iter_mut() {
        let k = row.k;
        let (e, q) = (deltas.e(k), deltas.q(k));
        row.dv_e = e.map(|m| m.delta);
        row.dv_q = q.map(|m| m.delta);
        row.v_e_g = e.map(|m| m.coupled);
        row.v_e_0 = e.map(|m| m.baseline);
        row.v_q_g = q.map(|m| m.coupled);
        row.v_q_0 = q.map(|m| m.baseline);
        row.mean_q = shift.shift(k);
        if let Some(t) = &thermal {
            row.dv_e_th = t.deltas.e(k).map(|m| m.delta);
            row.dv_q_th = t.deltas.q(k).map(|m| m.delta);
            row.dvp_q_th = t.cross.iter().find(|(q, _)| *q == k).map(|(_, e)| *e);
        }
        if k == 0 {
            row.squeezing = Some(squeezing);
        }
    }
    Ok(())
}

/// Run one band-gap point. Failures are recorded in the outcome and in an
/// `error=` annotation on every row of the point.
pub fn run_point(
    scenario: &Scenario,
    omega0c: f64,
    protocol: &RunProtocol,
    exec: Execution,
) -> (PointOutcome, Vec<SweepRow>) {
    let spec = scenario.spec_at(omega0c);
    let seed = point_seed(protocol.master_seed, omega0c);
    let lines = resonance_lines(scenario, &spec.grid);
    let mut rows: Vec<SweepRow> = (0..=spec.grid.half_width() as i64)
        .map(|k| {
            let mut r = SweepRow::empty(scenario.kind, omega0c, k);
            r.annotations = annotations(&lines, omega0c, k);
            r
        })
        .collect();
    let point_protocol = RunProtocol {
        master_seed: seed,
        ..protocol.clone()
    };
    let mut outcome = PointOutcome {
        omega0c,
        seed,
        trajectories: protocol.n_trajectories,
        aborted: 0,
        error: None,
    };
    let result = run_paired(&spec, &point_protocol, exec).and_then(|run| {
        outcome.aborted = run.coupled.aborts().len();
        fill_rows(&spec, &run, &mut rows)
    });
    if let Err(e) = result {
        if let Error::TooManyAborts { aborted, .. } = e {
            outcome.aborted = aborted;
        }
        let msg = e.to_string().replace([';', '\n'], ",");
        for r in &mut rows {
            r.annotations.push(format!("error={msg}"));
        }
        outcome.error = Some(e.to_string());
    }
    (outcome, rows)
}

/// Sweep `scenario` over `bandgaps`. Invalid inputs fail up front; failures
/// at individual points are recorded and the sweep continues.
pub fn run_sweep(
    scenario: &Scenario,
    bandgaps: &[f64],
    protocol: &RunProtocol,
    exec: Execution,
) -> Result<SweepResult> {
    run_sweep_with(scenario, bandgaps, protocol, exec, |_| {})
}

/// [`run_sweep`] with a callback after each completed point.
pub fn run_sweep_with(
    scenario: &Scenario,
    bandgaps: &[f64],
    protocol: &RunProtocol,
    exec: Execution,
    mut on_point: impl FnMut(&PointOutcome),
) -> Result<SweepResult> {
    validate_bandgap_grid(bandgaps)?;
    let protocol = protocol.clone().validate()?;
    for &w in bandgaps {
        scenario.spec_at(w).validate()?;
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &w in bandgaps {
        let (outcome, r) = run_point(scenario, w, &protocol, exec);
        on_point(&outcome);
        points.push(outcome);
        rows.extend(r);
    }
    Ok(SweepResult {
        scenario: scenario.clone(),
        protocol,
        bandgaps: bandgaps.to_vec(),
        rows,
        points,
    })
}

/// Deviation of a multimode sweep from a single-mode one at one band gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveComparison {
    pub omega0c: f64,
    /// Largest `|dV_multi(E_k) - dV_single(E_0)|` over `k`, with the pooled
    /// error at that `k`.
    pub e: Estimate,
    pub q: Estimate,
    /// Largest deviation in units of its pooled error over `k`.
    pub max_sigma_e: f64,
    pub max_sigma_q: f64,
}

/// Compare a multimode sweep against a single-mode sweep on the same grid.
/// Points that failed in either sweep are skipped.
pub fn compare_effective(multi: &SweepResult, single: &SweepResult) -> Result<Vec<EffectiveComparison>> {
    if multi.bandgaps != single.bandgaps {
        return Err(Error::Argument(
            "sweeps are on different band-gap grids".into(),
        ));
    }
    let mut out = Vec::new();
    for &w in &multi.bandgaps {
        let Some(reference) = single.row(w, 0) else {
            continue;
        };
        let pick = |f: fn(&SweepRow) -> Option<Estimate>| -> Option<(Estimate, f64)> {
            let r = f(reference)?;
            let mut best = Estimate::new(f64::NEG_INFINITY, f64::NAN);
            let mut max_sigma: f64 = 0.0;
            for row in multi.rows_at(w) {
                let m = f(row)?;
                let d = Estimate::new(
                    (m.value - r.value).abs(),
                    (m.err * m.err + r.err * r.err).sqrt(),
                );
                if d.value > 0.0 {
                    max_sigma = max_sigma.max(d.value / d.err);
                }
                if d.value > best.value {
                    best = d;
                }
            }
            best.value.is_finite().then_some((best, max_sigma))
        };
        let (Some((e, se)), Some((q, sq))) = (pick(|r| r.dv_e), pick(|r| r.dv_q)) else {
            continue;
        };
        out.push(EffectiveComparison {
            omega0c: w,
            e,
            q,
            max_sigma_e: se,
            max_sigma_q: sq,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RampSchedule;

    #[test]
    fn scenario_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert_eq!("FlatFlat".parse::<ScenarioKind>().unwrap(), ScenarioKind::FlatFlat);
        assert_eq!(
            "singlemode_ref".parse::<ScenarioKind>().unwrap(),
            ScenarioKind::SingleModeRef
        );
        assert!("bogus".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn presets_follow_the_scenario_table() {
        let ff = Scenario::preset(ScenarioKind::FlatFlat).template;
        assert_eq!(ff.cavity.kind, DispersionKind::Flat);
        assert_eq!(ff.raman.kind, DispersionKind::Flat);
        assert_eq!(ff.mode_count(), 11);
        let qr = Scenario::preset(ScenarioKind::QuadRaman).template;
        assert_eq!(qr.raman, Dispersion::quadratic(1.0, 1.0));
        assert_eq!(qr.cavity.kind, DispersionKind::Flat);
        let qc = Scenario::preset(ScenarioKind::QuadCavity).template;
        assert_eq!(qc.cavity.kind, DispersionKind::Quadratic);
        assert_eq!(qc.cavity.bandwidth, 1.0);
        assert_eq!(Scenario::preset(ScenarioKind::ThermalFlatFlat).template.temperature, 2.0);
        let r = Scenario::preset(ScenarioKind::SingleModeRef).template;
        let e = Scenario::preset(ScenarioKind::SingleModeEff).template;
        assert_eq!(r.mode_count(), 1);
        assert!((r.g * 11f64.sqrt() - e.g).abs() < 1e-15);
        assert_eq!(e.g, ff.g);
        let s = Scenario::preset(ScenarioKind::QuadCavity).spec_at(0.7);
        assert_eq!(s.cavity.base, 0.7);
        assert_eq!(s.cavity.bandwidth, 1.0);
    }

    #[test]
    fn flat_bands_resonate_at_half_the_raman_frequency() {
        let s = Scenario::preset(ScenarioKind::FlatFlat);
        let lines = resonance_lines(&s, &s.template.grid);
        assert_eq!(
            lines,
            vec![Resonance {
                k: None,
                omega0c: 0.5,
                kind: ResonanceKind::Line
            }]
        );
    }

    #[test]
    fn dispersive_raman_band_gives_a_line_per_mode() {
        let s = Scenario::preset(ScenarioKind::QuadRaman);
        let lines = resonance_lines(&s, &s.template.grid);
        assert_eq!(lines.len(), 6);
        let edge = lines.iter().find(|r| r.k == Some(5)).unwrap();
        assert!((edge.omega0c - 1.0).abs() < 1e-15);
        assert!((lines[0].omega0c - 0.5).abs() < 1e-15);
        assert_eq!(annotations(&lines, 0.8, 5), vec!["line=1".to_owned()]);
    }

    #[test]
    fn dispersive_cavity_band_has_a_threshold() {
        let s = Scenario::preset(ScenarioKind::QuadCavity);
        let lines = resonance_lines(&s, &s.template.grid);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].kind, ResonanceKind::Threshold);
        assert_eq!(lines[0].omega0c, 0.5);
        assert_eq!(annotations(&lines, 0.6, 2), vec!["threshold=0.5", "nonresonant"]);
        assert_eq!(annotations(&lines, 0.5, 2), vec!["threshold=0.5"]);
    }

    #[test]
    fn default_grid() {
        let g = default_bandgap_grid();
        assert_eq!(g.len(), 31);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[30], 1.4);
        assert_eq!(g[8], 0.52);
        validate_bandgap_grid(&g).unwrap();
        assert!(validate_bandgap_grid(&[0.5, 0.5]).is_err());
        assert!(validate_bandgap_grid(&[0.0, 0.5]).is_err());
        assert!(validate_bandgap_grid(&[]).is_err());
    }

    #[test]
    fn point_seeds_depend_on_band_gap_only() {
        assert_eq!(point_seed(7, 0.5), point_seed(7, 0.5));
        assert_ne!(point_seed(7, 0.5), point_seed(7, 0.54));
        assert_ne!(point_seed(7, 0.5), point_seed(8, 0.5));
    }

    fn tiny_protocol() -> RunProtocol {
        RunProtocol {
            ramp: RampSchedule {
                t_ramp: 10.0,
                t_settle: 20.0,
                t_window: 100.0,
                ..RampSchedule::default()
            },
            ..RunProtocol::with_trajectories(128, 3)
        }
    }

    #[test]
    fn sweep_emits_one_row_per_point_and_mode() {
        let s = Scenario::preset(ScenarioKind::SingleModeEff);
        let grid = [0.4, 0.5, 0.6];
        let r = run_sweep(&s, &grid, &tiny_protocol(), Execution::Sequential).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.is_clean());
        let row = r.row(0.5, 0).unwrap();
        assert!(row.dv_e.is_some() && row.squeezing.is_some() && row.dvp_q_th.is_none());
        assert_eq!(row.annotations, vec!["line=0.5"]);
        let again = run_sweep(&s, &grid, &tiny_protocol(), Execution::Sequential).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn thermal_rows_carry_thermal_columns() {
        let mut s = Scenario::preset(ScenarioKind::ThermalFlatFlat);
        s.template.grid = ModeGrid::new(1, WrapPolicy::Wrap);
        let r = run_sweep(&s, &[0.5], &tiny_protocol(), Execution::Sequential).unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            assert_eq!(row.dv_e_th, row.dv_e);
            assert!(row.dvp_q_th.is_some());
            assert_eq!(row.squeezing.is_some(), row.k == 0);
        }
    }

    #[test]
    fn invalid_sweeps_fail_up_front() {
        let s = Scenario::preset(ScenarioKind::SingleModeEff);
        assert!(run_sweep(&s, &[0.6, 0.5], &tiny_protocol(), Execution::Sequential).is_err());
        let mut bad = s.clone();
        bad.template.kappa = 0.0;
        match run_sweep(&bad, &[0.5], &tiny_protocol(), Execution::Sequential) {
            Err(Error::Validation(v)) => assert_eq!(v[0].field, "kappa"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failing_points_are_recorded_and_the_sweep_continues() {
        let mut s = Scenario::preset(ScenarioKind::SingleModeEff);
        s.template.g = 50.0;
        s.template.g4 = 0.0;
        let r = run_sweep(&s, &[0.5, 0.6], &tiny_protocol(), Execution::Sequential).unwrap();
        assert_eq!(r.points.len(), 2);
        assert_eq!(r.failed_points(), 2);
        assert!(r.aborted_trajectories() > 0);
        assert!(r.rows.iter().all(|row| row.dv_e.is_none()
            && row.annotations.iter().any(|a| a.starts_with("error="))));
    }

    #[test]
    fn identical_sweeps_compare_to_zero() {
        let s = Scenario::preset(ScenarioKind::SingleModeEff);
        let r = run_sweep(&s, &[0.5, 0.7], &tiny_protocol(), Execution::Sequential).unwrap();
        let c = compare_effective(&r, &r).unwrap();
        assert_eq!(c.len(), 2);
        for x in c {
            assert_eq!(x.e.value, 0.0);
            assert_eq!(x.q.value, 0.0);
            assert_eq!(x.max_sigma_e, 0.0);
        }
        let other = run_sweep(&s, &[0.5], &tiny_protocol(), Execution::Sequential).unwrap();
        assert!(compare_effective(&r, &other).is_err());
    }
}
