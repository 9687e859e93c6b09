//! Reported quantities computed from ensemble statistics: variance
//! modifications of the cavity and Raman quadratures, their thermal
//! variants, the zero-mode squeezing ellipse and the Raman coordinate shift.
//!
//! All spectra are reported for `k >= 0` only; `V(X_k) = V(X_{-k})` holds
//! exactly because `X_{-k}` is the conjugate of `X_k` on every trajectory.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::stats::{EnsembleStats, Estimate, Field};

/// Default number of angles in the squeezing scan.
pub const DEFAULT_ANGLES: usize = 180;

/// Baseline variances must exceed this many standard errors.
const BASELINE_SIGNIFICANCE: f64 = 10.0;

/// Trajectory groups for the jackknife of the squeezing spread.
const JACKKNIFE_GROUPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDelta {
    pub k: i64,
    pub coupled: Estimate,
    pub baseline: Estimate,
    /// `(V_g - V_0) / V_0`, error from the paired delta method.
    pub delta: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub e: Vec<ModeDelta>,
    pub q: Vec<ModeDelta>,
}

impl VarianceReport {
    pub fn e(&self, k: i64) -> Option<&ModeDelta> {
        self.e.iter().find(|m| m.k == k)
    }

    pub fn q(&self, k: i64) -> Option<&ModeDelta> {
        self.q.iter().find(|m| m.k == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalReport {
    /// Variance modifications against the thermal `g = 0` baselines.
    pub deltas: VarianceReport,
    /// `(V(Q_k)_g - V(E_k)_g) / V(E_k)_g`, per `k >= 0`.
    pub cross: Vec<(i64, Estimate)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingReport {
    pub theta_min: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub n_angles: usize,
    /// Jackknife standard error of `v_max - v_min`.
    pub spread_err: f64,
}

impl SqueezingReport {
    pub fn spread(&self) -> f64 {
        self.v_max - self.v_min
    }

    /// Angular resolution of the scan.
    pub fn resolution(&self) -> f64 {
        PI / self.n_angles as f64
    }
}

/// Mean displacement of the Raman coordinate, `Re <Q_k>`, per `k >= 0`.
///
/// The shift is dimensionless; the physical displacement is
/// `l0 / sqrt(2) * shift` with `l0 = sqrt(hbar / (M omega_R))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RamanShiftReport {
    pub modes: Vec<(i64, Estimate)>,
}

impl RamanShiftReport {
    pub const UNIT_NOTE: &'static str =
        "dimensionless <b_k + conj(b_-k)>; displacement = l0/sqrt(2) * shift, l0 = sqrt(hbar/(M omega_R))";

    pub fn shift(&self, k: i64) -> Option<Estimate> {
        self.modes.iter().find(|(q, _)| *q == k).map(|(_, e)| *e)
    }
}

/// Physical displacement for a dimensionless shift and natural length `l0`.
pub fn physical_displacement(shift: f64, l0: f64) -> f64 {
    shift * l0 / std::f64::consts::SQRT_2
}

fn check_pair(coupled: &EnsembleStats, baseline: &EnsembleStats) -> Result<()> {
    if coupled.half_width() != baseline.half_width() {
        return Err(Error::GridMismatch {
            left: coupled.half_width(),
            right: baseline.half_width(),
        });
    }
    if coupled.is_empty() {
        return Err(Error::Empty("coupled"));
    }
    if baseline.is_empty() {
        return Err(Error::Empty("baseline"));
    }
    Ok(())
}

fn mode_delta(
    coupled: &EnsembleStats,
    baseline: &EnsembleStats,
    k: i64,
    raman: bool,
) -> Result<ModeDelta> {
    let (vg, ig) = coupled.variance_with_influence(k, raman)?;
    let (v0, i0) = baseline.variance_with_influence(k, raman)?;
    let eg = coupled.block_error(&ig);
    let e0 = baseline.block_error(&i0);
    // Negated so that NaN also fails.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(v0 > BASELINE_SIGNIFICANCE * e0) {
        return Err(Error::InvalidBaseline {
            field: if raman { "Q" } else { "E" },
            k,
        });
    }
    let err = coupled.paired_block_error(baseline, |b| ig(b) / v0, |b| -vg * i0(b) / (v0 * v0));
    Ok(ModeDelta {
        k,
        coupled: Estimate::new(vg, eg),
        baseline: Estimate::new(v0, e0),
        delta: Estimate::new(vg / v0 - 1.0, err),
    })
}

/// `dV(X_k) = (V(X_k)_g - V(X_k)_0) / V(X_k)_0` for `X = E, Q` and `k >= 0`.
pub fn delta_variances(coupled: &EnsembleStats, baseline: &EnsembleStats) -> Result<VarianceReport> {
    check_pair(coupled, baseline)?;
    let m = coupled.half_width() as i64;
    let mut e = Vec::new();
    let mut q = Vec::new();
    for k in 0..=m {
        e.push(mode_delta(coupled, baseline, k, false)?);
        q.push(mode_delta(coupled, baseline, k, true)?);
    }
    Ok(VarianceReport { e, q })
}

/// Thermal variance modifications and the cross-normalized Raman quantity
/// measured against the cavity variance of the same run.
pub fn thermal_deltas(coupled: &EnsembleStats, baseline: &EnsembleStats) -> Result<ThermalReport> {
    let deltas = delta_variances(coupled, baseline)?;
    let mut cross = Vec::new();
    for k in 0..=coupled.half_width() as i64 {
        let (ve, ie) = coupled.variance_with_influence(k, false)?;
        let (vq, iq) = coupled.variance_with_influence(k, true)?;
        let err = coupled.block_error(|b| iq(b) / ve - vq * ie(b) / (ve * ve));
        cross.push((k, Estimate::new(vq / ve - 1.0, err)));
    }
    Ok(ThermalReport { deltas, cross })
}

/// Variance of `X_theta = a0 e^{-i theta} + conj(a0) e^{i theta}`.
pub fn rotated_variance(cov: &[[f64; 2]; 2], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    4.0 * (c * c * cov[0][0] + s * s * cov[1][1] + 2.0 * s * c * cov[0][1])
}

/// Minimum, maximum and argmin of the rotated variance on a uniform grid
/// over `[0, pi)`.
fn scan(cov: &[[f64; 2]; 2], n_angles: usize) -> (f64, f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut v_max = f64::NEG_INFINITY;
    for j in 0..n_angles {
        let theta = PI * j as f64 / n_angles as f64;
        let v = rotated_variance(cov, theta);
        if v < best.1 {
            best = (theta, v);
        }
        v_max = v_max.max(v);
    }
    (best.0, best.1, v_max)
}

/// Scan the zero-mode quadrature variance over `n_angles` angles.
pub fn squeezing_scan(stats: &EnsembleStats, n_angles: usize) -> Result<SqueezingReport> {
    if n_angles < 8 {
        return Err(Error::Argument(format!(
            "n_angles must be at least 8, got {n_angles}"
        )));
    }
    if stats.is_empty() {
        return Err(Error::Empty("quadrature accumulator"));
    }
    let (theta_min, v_min, v_max) = scan(&stats.quadrature_covariance(), n_angles);

    // Delete-one-group jackknife over trajectories.
    let trajectories: Vec<u64> = stats
        .blocks()
        .iter()
        .map(|b| b.key.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let groups = JACKKNIFE_GROUPS.min(trajectories.len());
    let spread_err = if groups < 2 {
        f64::NAN
    } else {
        let group_of = |t: u64| {
            let rank = trajectories.binary_search(&t).unwrap_or(0);
            rank * groups / trajectories.len()
        };
        let spreads: Vec<f64> = (0..groups)
            .map(|g| {
                let kept: Vec<_> = stats
                    .blocks()
                    .iter()
                    .filter(|b| group_of(b.key.0) != g)
                    .collect();
                let (_, lo, hi) = scan(&stats.quadrature_covariance_of(&kept), n_angles);
                hi - lo
            })
            .collect();
        let g = groups as f64;
        let mean = spreads.iter().sum::<f64>() / g;
        let ss: f64 = spreads.iter().map(|s| (s - mean).powi(2)).sum();
        ((g - 1.0) / g * ss).sqrt()
    };
    Ok(SqueezingReport {
        theta_min,
        v_min,
        v_max,
        n_angles,
        spread_err,
    })
}

/// `Re <Q_k>` with its block error for `k >= 0`.
pub fn raman_shift(stats: &EnsembleStats) -> Result<RamanShiftReport> {
    if stats.is_empty() {
        return Err(Error::Empty("raman shift"));
    }
    let modes = (0..=stats.half_width() as i64)
        .map(|k| Ok((k, stats.mean_estimate(k, Field::QRe)?)))
        .collect::<Result<_>>()?;
    Ok(RamanShiftReport { modes })
}
