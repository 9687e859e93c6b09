//! Trajectory ensembles: Wigner sampling of the initial state, the
//! ramp-settle-sample protocol, and deterministic reduction of statistics.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{Integrator, PairedIntegrator, TrajectoryState};
use crate::error::{Error, Result, Violation};
use crate::model::{thermal_variance, RampSchedule, SystemSpec};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{derive_seed, trajectory_rng};
use crate::stats::{EnsembleStats, TrajectoryAbort, TrajectoryRecorder};

pub const PAPER_TRAJECTORIES: u64 = 3500;
pub const CI_TRAJECTORIES: u64 = 500;
pub const DEFAULT_DT: f64 = 0.005;

/// Salt for the baseline seed when the baseline is not paired.
const UNPAIRED_SALT: u64 = 0x6261_7365_6c69_6e65;

#[derive(Debug, Clone, PartialEq)]
pub struct RunProtocol {
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub ramp: RampSchedule,
    pub dt: f64,
    /// Drive the `g = 0` reference with the same random streams.
    pub paired_baseline: bool,
    /// Contiguous blocks per trajectory window for error estimation.
    pub blocks_per_trajectory: usize,
}

impl RunProtocol {
    pub fn with_trajectories(n_trajectories: u64, master_seed: u64) -> Self {
        Self {
            n_trajectories,
            master_seed,
            ramp: RampSchedule::default(),
            dt: DEFAULT_DT,
            paired_baseline: true,
            blocks_per_trajectory: 1,
        }
    }

    pub fn paper(master_seed: u64) -> Self {
        Self::with_trajectories(PAPER_TRAJECTORIES, master_seed)
    }

    pub fn ci(master_seed: u64) -> Self {
        Self::with_trajectories(CI_TRAJECTORIES, master_seed)
    }

    pub fn baseline_seed(&self) -> u64 {
        if self.paired_baseline {
            self.master_seed
        } else {
            derive_seed(self.master_seed, UNPAIRED_SALT)
        }
    }

    fn steps(&self, duration: f64, field: &'static str) -> Result<usize> {
        let x = duration / self.dt;
        let n = x.round();
        if (x - n).abs() > 1e-6 * x.max(1.0) {
            return Err(Error::Validation(vec![Violation {
                field,
                message: format!("{field} = {duration} is not a multiple of dt = {}", self.dt),
            }]));
        }
        Ok(n as usize)
    }

    /// Steps before the window and steps between samples.
    pub fn step_counts(&self) -> Result<(usize, usize)> {
        Ok((
            self.steps(self.ramp.window_start(), "t_settle")?,
            self.steps(self.ramp.sample_stride, "sample_stride")?,
        ))
    }

    pub fn validate(self) -> Result<Self> {
        let mut v = Vec::new();
        if self.n_trajectories < 2 {
            v.push(Violation {
                field: "trajectories",
                message: "at least two trajectories are required".into(),
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push(Violation {
                field: "dt",
                message: "dt must be positive".into(),
            });
        }
        if self.blocks_per_trajectory == 0 {
            v.push(Violation {
                field: "blocks_per_trajectory",
                message: "blocks_per_trajectory must be at least 1".into(),
            });
        }
        if let Err(Error::Validation(r)) = self.ramp.validate() {
            v.extend(r);
        }
        if v.is_empty() {
            if let Err(Error::Validation(r)) = self.step_counts() {
                v.extend(r);
            }
        }
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Draw a Wigner sample of the uncoupled thermal (or vacuum) state.
pub fn sample_initial<R: Rng + ?Sized>(spec: &SystemSpec, rng: &mut R) -> TrajectoryState {
    let grid = spec.grid;
    let mut state = TrajectoryState::zeros(grid.len());
    let draw = |rng: &mut R, omega: f64| {
        let sd = (0.5 * thermal_variance(omega, spec.temperature)).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sd, im * sd)
    };
    for (z, w) in state.a.iter_mut().zip(spec.cavity.frequencies(&grid)) {
        *z = draw(rng, w);
    }
    for (z, w) in state.b.iter_mut().zip(spec.raman.frequencies(&grid)) {
        *z = draw(rng, w);
    }
    state
}

fn tag_abort(seed: u64, index: u64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite {
            time, field, mode, ..
        } => Error::NonFinite {
            trajectory: index,
            seed,
            time,
            field,
            mode,
        },
        e => e,
    }
}

fn abort_record(e: &Error, seed: u64, index: u64) -> Option<TrajectoryAbort> {
    match e {
        Error::NonFinite { time, .. } => Some(TrajectoryAbort {
            trajectory: index,
            seed,
            time: *time,
            message: e.to_string(),
        }),
        _ => None,
    }
}

/// Integrate one trajectory through ramp, settle and sampling window.
pub fn run_trajectory(
    spec: &SystemSpec,
    protocol: &RunProtocol,
    seed: u64,
    index: u64,
) -> Result<EnsembleStats> {
    let (pre, stride) = protocol.step_counts()?;
    let samples = protocol.ramp.samples();
    let mut rng = trajectory_rng(seed, index);
    let mut state = sample_initial(spec, &mut rng);
    let mut integ = Integrator::new(spec, protocol.ramp, protocol.dt)?;
    let mut rec = TrajectoryRecorder::new(
        spec.grid.half_width(),
        index,
        samples,
        protocol.blocks_per_trajectory,
    );
    let tag = tag_abort(seed, index);
    for _ in 0..pre {
        integ.step_in_place(&mut state, &mut rng).map_err(&tag)?;
    }
    for _ in 0..samples {
        for _ in 0..stride {
            integ.step_in_place(&mut state, &mut rng).map_err(&tag)?;
        }
        rec.record(&state);
    }
    Ok(rec.finish())
}

/// Integrate one trajectory and its `g = 0` reference on shared noise.
pub fn run_paired_trajectory(
    spec: &SystemSpec,
    protocol: &RunProtocol,
    seed: u64,
    index: u64,
) -> Result<(EnsembleStats, EnsembleStats)> {
    let (pre, stride) = protocol.step_counts()?;
    let samples = protocol.ramp.samples();
    let half = spec.grid.half_width();
    let mut rng = trajectory_rng(seed, index);
    let mut coupled = sample_initial(spec, &mut rng);
    let mut baseline = coupled.clone();
    let mut integ = PairedIntegrator::new(spec, protocol.ramp, protocol.dt)?;
    let blocks = protocol.blocks_per_trajectory;
    let mut rec_c = TrajectoryRecorder::new(half, index, samples, blocks);
    let mut rec_b = TrajectoryRecorder::new(half, index, samples, blocks);
    let tag = tag_abort(seed, index);
    for _ in 0..pre {
        integ
            .step_in_place(&mut coupled, &mut baseline, &mut rng)
            .map_err(&tag)?;
    }
    for _ in 0..samples {
        for _ in 0..stride {
            integ
                .step_in_place(&mut coupled, &mut baseline, &mut rng)
                .map_err(&tag)?;
        }
        rec_c.record(&coupled);
        rec_b.record(&baseline);
    }
    Ok((rec_c.finish(), rec_b.finish()))
}

fn check_aborts(stats: &EnsembleStats, total: u64) -> Result<()> {
    let aborted = stats.aborts().len();
    if aborted * 1000 > total as usize {
        return Err(Error::TooManyAborts {
            aborted,
            total: total as usize,
        });
    }
    Ok(())
}

pub fn run_ensemble(spec: &SystemSpec, protocol: &RunProtocol) -> Result<EnsembleStats> {
    run_ensemble_with(spec, protocol, protocol.master_seed, Execution::default())
}

/// Run `protocol.n_trajectories` trajectories from streams of `seed`.
///
/// Per-trajectory statistics are collected in index order and reduced with
/// a fixed merge tree, so the result is bitwise independent of scheduling.
pub fn run_ensemble_with(
    spec: &SystemSpec,
    protocol: &RunProtocol,
    seed: u64,
    exec: Execution,
) -> Result<EnsembleStats> {
    let spec = spec.clone().validate()?;
    let protocol = protocol.clone().validate()?;
    let half = spec.grid.half_width();
    let parts = map_indexed(protocol.n_trajectories as usize, exec, |i| {
        let i = i as u64;
        run_trajectory(&spec, &protocol, seed, i).or_else(|e| match abort_record(&e, seed, i) {
            Some(abort) => Ok(EnsembleStats::aborted(half, abort)),
            None => Err(e),
        })
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let stats = EnsembleStats::merge_tree(parts, half)?;
    check_aborts(&stats, protocol.n_trajectories)?;
    Ok(stats)
}

/// Coupled run and its `g = 0` reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRun {
    pub coupled: EnsembleStats,
    pub baseline: EnsembleStats,
}

/// Run the coupled ensemble and its `g = 0` reference.
///
/// With a paired baseline both are stepped in lockstep on shared bath
/// increments; a trajectory that diverges is dropped from both ensembles.
pub fn run_paired(spec: &SystemSpec, protocol: &RunProtocol, exec: Execution) -> Result<PairedRun> {
    if !protocol.paired_baseline {
        let coupled = run_ensemble_with(spec, protocol, protocol.master_seed, exec)?;
        let baseline =
            run_ensemble_with(&spec.uncoupled(), protocol, protocol.baseline_seed(), exec)?;
        return Ok(PairedRun { coupled, baseline });
    }
    let spec = spec.clone().validate()?;
    let protocol = protocol.clone().validate()?;
    let half = spec.grid.half_width();
    let seed = protocol.master_seed;
    let parts = map_indexed(protocol.n_trajectories as usize, exec, |i| {
        let i = i as u64;
        run_paired_trajectory(&spec, &protocol, seed, i).or_else(|e| {
            match abort_record(&e, seed, i) {
                Some(abort) => Ok((
                    EnsembleStats::aborted(half, abort.clone()),
                    EnsembleStats::aborted(half, abort),
                )),
                None => Err(e),
            }
        })
    });
    let (coupled, baseline): (Vec<_>, Vec<_>) =
        parts.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let coupled = EnsembleStats::merge_tree(coupled, half)?;
    let baseline = EnsembleStats::merge_tree(baseline, half)?;
    check_aborts(&coupled, protocol.n_trajectories)?;
    Ok(PairedRun { coupled, baseline })
}
