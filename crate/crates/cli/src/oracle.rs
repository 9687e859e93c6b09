//! Self-checks against independently known answers: a direct summation of
//! the drift, the uncoupled steady state, thermal baselines and a synthetic
//! squeezed cloud.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use raman_twa::dynamics::{drift, Derivative, TrajectoryState};
use raman_twa::ensemble::{run_ensemble_with, RunProtocol};
use raman_twa::model::{
    thermal_variance, Dispersion, ModeGrid, RampSchedule, SystemSpec, WrapPolicy,
};
use raman_twa::observables::{squeezing_scan, DEFAULT_ANGLES};
use raman_twa::parallel::Execution;
use raman_twa::stats::{EnsembleStats, Field, TrajectoryRecorder};
use raman_twa::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Drift,
    Fdt,
    Thermal,
    Squeezing,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["drift", "fdt", "thermal", "squeezing", "all"];

    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Drift, Suite::Fdt, Suite::Thermal, Suite::Squeezing],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Drift => "drift",
            Suite::Fdt => "fdt",
            Suite::Thermal => "thermal",
            Suite::Squeezing => "squeezing",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "drift" => Ok(Suite::Drift),
            "fdt" => Ok(Suite::Fdt),
            "thermal" => Ok(Suite::Thermal),
            "squeezing" => Ok(Suite::Squeezing),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite '{s}' (expected one of {})", Suite::NAMES.join(", "))),
        }
    }
}

/// One comparison of a measured value against its expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Allowed absolute deviation.
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        (self.measured - self.expected).abs() <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: measured {:.6e}, expected {:.6e}, tolerance {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.expected,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Trajectories for the stochastic suites.
    pub trajectories: u64,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            trajectories: 200,
            seed: 1,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &OracleOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for s in suite.parts() {
        out.extend(match s {
            Suite::Drift => drift_suite(opts.seed),
            Suite::Fdt => fdt_suite(opts)?,
            Suite::Thermal => thermal_suite(opts)?,
            Suite::Squeezing => squeezing_suite(opts)?,
            Suite::All => unreachable!(),
        });
    }
    Ok(out)
}

/// Drift by literal summation over all index pairs and triples.
pub fn brute_drift(state: &TrajectoryState, spec: &SystemSpec, ramp: f64) -> Derivative {
    let grid = spec.grid;
    let m = grid.half_width() as i64;
    let n = grid.len() as f64;
    let i = Complex64::i();
    let field = |v: &[Complex64], k: i64| -> Option<Complex64> {
        Some(v[grid.resolve(k)?] + v[grid.resolve(-k)?].conj())
    };
    let big_a = |k| field(&state.a, k);
    let big_b = |k| field(&state.b, k);
    let (g, g4) = (ramp * spec.g, ramp * spec.g4);
    let mut out = Derivative {
        a: Vec::new(),
        b: Vec::new(),
    };
    for k in -m..=m {
        let p = grid.position(k).expect("on grid");
        let mut cubic = Complex64::ZERO;
        let mut quartic = Complex64::ZERO;
        let mut raman = Complex64::ZERO;
        for q in -m..=m {
            if let (Some(x), Some(y)) = (big_b(k - q), big_a(q)) {
                cubic += x * y;
            }
            if let (Some(x), Some(y)) = (big_a(q), big_a(k - q)) {
                raman += x * y;
            }
            for kp in -m..=m {
                if let (Some(x), Some(y), Some(z)) = (big_a(k + q), big_a(kp), big_a(-kp - q)) {
                    quartic += x * y * z;
                }
            }
        }
        let wc = spec.cavity.eval(&grid, k).expect("on grid");
        let wr = spec.raman.eval(&grid, k).expect("on grid");
        let (a, b) = (state.a[p], state.b[p]);
        out.a.push(
            -i * (wc * a + 2.0 * g / n.sqrt() * cubic + g4 / n * quartic) - spec.kappa * a,
        );
        out.b.push(-i * (wr * b + g / n.sqrt() * raman) - i * spec.gamma * b.im);
    }
    out
}

fn drift_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    [WrapPolicy::Wrap, WrapPolicy::Truncate]
        .into_iter()
        .map(|wrap| {
            let spec = SystemSpec {
                grid: ModeGrid::new(5, wrap),
                raman: Dispersion::quadratic(1.0, 1.0),
                g: 0.3,
                g4: 0.2,
                ..SystemSpec::paper_defaults(0.7)
            };
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let mut z = || {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im)
                };
                let state = TrajectoryState {
                    a: (0..spec.grid.len()).map(|_| z()).collect(),
                    b: (0..spec.grid.len()).map(|_| z()).collect(),
                    t: 0.0,
                };
                let r = rng.random_range(0.0..=1.0);
                let fast = drift(&state, &spec, r);
                let slow = brute_drift(&state, &spec, r);
                for (x, y) in fast.a.iter().zip(&slow.a).chain(fast.b.iter().zip(&slow.b)) {
                    worst = worst.max((x - y).norm());
                }
            }
            Check {
                suite: "drift",
                name: format!("{wrap:?} max |convolution - direct sum| over 100 states").to_lowercase(),
                measured: worst,
                expected: 0.0,
                tolerance: 1e-12,
            }
        })
        .collect()
}

fn steady_protocol(opts: &OracleOptions) -> RunProtocol {
    RunProtocol {
        ramp: RampSchedule {
            t_ramp: 1.0,
            t_settle: 300.0,
            t_window: 200.0,
            ..RampSchedule::default()
        },
        ..RunProtocol::with_trajectories(opts.trajectories, opts.seed)
    }
}

fn fdt_suite(opts: &OracleOptions) -> Result<Vec<Check>> {
    let spec = SystemSpec {
        grid: ModeGrid::new(5, WrapPolicy::Wrap),
        ..SystemSpec::paper_defaults(0.5)
    }
    .uncoupled();
    let stats = run_ensemble_with(&spec, &steady_protocol(opts), opts.seed, Execution::default())?;
    let mut out = Vec::new();
    for (field, label) in [(Field::ANorm2, "a"), (Field::BNorm2, "b")] {
        for k in spec.grid.momenta() {
            let e = stats.mean_estimate(k, field)?;
            out.push(Check {
                suite: "fdt",
                name: format!("<|{label}_{k}|^2> at T=0 (3 sigma)"),
                measured: e.value,
                expected: 0.5,
                tolerance: 3.0 * e.err,
            });
        }
    }
    Ok(out)
}

fn thermal_suite(opts: &OracleOptions) -> Result<Vec<Check>> {
    let temperature = 2.0;
    let mut out = Vec::new();
    for (i, omega) in [0.2, 0.5, 1.0, 1.4].into_iter().enumerate() {
        let spec = SystemSpec {
            temperature,
            ..SystemSpec::paper_defaults(omega)
        }
        .uncoupled();
        let seed = opts.seed.wrapping_add(i as u64);
        let stats = run_ensemble_with(&spec, &steady_protocol(opts), seed, Execution::default())?;
        for k in 0..=spec.grid.half_width() as i64 {
            let v = stats.variance_e(k)?;
            out.push(Check {
                suite: "thermal",
                name: format!("V(E_{k})_0 / 2 at omega0c={omega}, T={temperature} (3 sigma)"),
                measured: 0.5 * v.value,
                expected: thermal_variance(omega, temperature),
                tolerance: 1.5 * v.err,
            });
        }
    }
    Ok(out)
}

/// Gaussian zero-mode cloud with `Var(Re a_0) = 0.15`, `Var(Im a_0) = 0.35`.
fn squeezing_suite(opts: &OracleOptions) -> Result<Vec<Check>> {
    let (sx, sy) = (0.15f64.sqrt(), 0.35f64.sqrt());
    let samples = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut parts = Vec::new();
    for t in 0..opts.trajectories.max(50) {
        let mut rec = TrajectoryRecorder::new(0, t, samples, 1);
        for _ in 0..samples {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let mut s = TrajectoryState::zeros(1);
            s.a[0] = Complex64::new(sx * x, sy * y);
            rec.record(&s);
        }
        parts.push(rec.finish());
    }
    let stats = EnsembleStats::merge_tree(parts, 0)?;
    let r = squeezing_scan(&stats, DEFAULT_ANGLES)?;
    let folded = r.theta_min.rem_euclid(std::f64::consts::PI);
    let off_axis = folded.min(std::f64::consts::PI - folded);
    Ok(vec![
        Check {
            suite: "squeezing",
            name: "V_max - V_min (3 sigma)".into(),
            measured: r.spread(),
            expected: 4.0 * (0.35 - 0.15),
            tolerance: 3.0 * r.spread_err,
        },
        Check {
            suite: "squeezing",
            name: "theta_min distance from 0 or pi (3 grid steps)".into(),
            measured: off_axis,
            expected: 0.0,
            tolerance: 3.0 * r.resolution(),
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_sum_agrees_with_kernel() {
        for c in drift_suite(4) {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn synthetic_cloud_is_recovered() {
        let checks = run_suite(Suite::Squeezing, &OracleOptions::default()).unwrap();
        assert_eq!(checks.len(), 2);
        for c in checks {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn check_reports_failure() {
        let c = Check {
            suite: "x",
            name: "y".into(),
            measured: 1.0,
            expected: 0.0,
            tolerance: 0.5,
        };
        assert!(!c.passed());
        assert!(c.to_string().starts_with("FAIL x y"));
    }

    #[test]
    fn suites_parse() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().name(), name);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
