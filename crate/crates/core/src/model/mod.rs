//! Physical system definition: momentum grid, band dispersions, couplings,
//! baths and the coupling ramp.
//!
//! Everything is expressed in natural units with `hbar = 1` and the bare
//! Raman frequency set to one, so frequencies, rates, couplings and times
//! are plain dimensionless numbers.

mod grid;
mod ramp;

pub use grid::{ModeGrid, WrapPolicy};
pub use ramp::{RampSchedule, RampShape};

use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DispersionKind {
    Flat,
    Quadratic,
}

/// Band dispersion `omega(k)`.
///
/// The quadratic band is `omega(k) = base + bandwidth * (k / M)^2`, so that
/// `omega(+-M) - omega(0) = bandwidth` on any grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub kind: DispersionKind,
    pub base: f64,
    pub bandwidth: f64,
}

impl Dispersion {
    pub fn flat(base: f64) -> Self {
        Self {
            kind: DispersionKind::Flat,
            base,
            bandwidth: 0.0,
        }
    }

    pub fn quadratic(base: f64, bandwidth: f64) -> Self {
        Self {
            kind: DispersionKind::Quadratic,
            base,
            bandwidth,
        }
    }

    /// Same band shape with a different minimum frequency.
    pub fn with_base(self, base: f64) -> Self {
        Self { base, ..self }
    }

    pub fn eval(&self, grid: &ModeGrid, k: i64) -> Result<f64> {
        grid.position(k)?;
        Ok(self.eval_unchecked(grid.half_width(), k))
    }

    fn eval_unchecked(&self, half_width: usize, k: i64) -> f64 {
        match self.kind {
            DispersionKind::Flat => self.base,
            DispersionKind::Quadratic if half_width == 0 => self.base,
            DispersionKind::Quadratic => {
                let x = k as f64 / half_width as f64;
                self.base + self.bandwidth * x * x
            }
        }
    }

    /// `omega(k)` for every mode in storage order.
    pub fn frequencies(&self, grid: &ModeGrid) -> Vec<f64> {
        grid.momenta()
            .map(|k| self.eval_unchecked(grid.half_width(), k))
            .collect()
    }
}

/// Free-function form of [`Dispersion::eval`].
pub fn dispersion_eval(d: &Dispersion, grid: &ModeGrid, k: i64) -> Result<f64> {
    d.eval(grid, k)
}

/// Full physical configuration of the multimode hybrid.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub grid: ModeGrid,
    pub cavity: Dispersion,
    pub raman: Dispersion,
    /// Raman-light coupling, scaled by `1/sqrt(N)` in the equations of motion.
    pub g: f64,
    /// Quartic photon coupling, scaled by `1/N`.
    pub g4: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// `k_B T / (hbar omega_R)`; zero means vacuum.
    pub temperature: f64,
}

impl SystemSpec {
    /// Flat photon and phonon bands with the reference couplings and rates.
    pub fn paper_defaults(omega_c: f64) -> Self {
        Self {
            grid: ModeGrid::new(5, WrapPolicy::Wrap),
            cavity: Dispersion::flat(omega_c),
            raman: Dispersion::flat(1.0),
            g: 0.04,
            g4: 0.01,
            kappa: 0.02,
            gamma: 0.02,
            temperature: 0.0,
        }
    }

    /// The same system with both couplings switched off.
    pub fn uncoupled(&self) -> Self {
        Self {
            g: 0.0,
            g4: 0.0,
            ..self.clone()
        }
    }

    pub fn mode_count(&self) -> usize {
        self.grid.len()
    }

    pub fn validate(self) -> Result<Self> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &'static str, message: &str| {
            if !ok {
                v.push(Violation {
                    field,
                    message: message.to_owned(),
                });
            }
        };
        check(self.g >= 0.0 && self.g.is_finite(), "g", "g must be non-negative");
        check(self.g4 >= 0.0 && self.g4.is_finite(), "g4", "g4 must be non-negative");
        check(self.kappa > 0.0 && self.kappa.is_finite(), "kappa", "kappa must be positive");
        check(self.gamma > 0.0 && self.gamma.is_finite(), "gamma", "gamma must be positive");
        check(
            self.temperature >= 0.0 && self.temperature.is_finite(),
            "temperature",
            "temperature must be non-negative",
        );
        for (field, d) in [("cavity", &self.cavity), ("raman", &self.raman)] {
            let freqs = d.frequencies(&self.grid);
            if !freqs.iter().all(|w| *w > 0.0 && w.is_finite()) {
                v.push(Violation {
                    field,
                    message: format!("{field} dispersion must be positive on every mode"),
                });
            }
        }
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(v))
        }
    }
}

pub fn validate_spec(spec: SystemSpec) -> Result<SystemSpec> {
    spec.validate()
}

/// Symmetrized second moment of a thermal mode, `coth(omega / 2T) / 2`.
pub fn thermal_variance(omega: f64, temperature: f64) -> f64 {
    0.5 * coth_factor(omega, temperature)
}

/// `2 n(omega) + 1 = coth(omega / 2T)`, equal to one at zero temperature.
pub fn coth_factor(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        1.0
    } else {
        1.0 / (omega / (2.0 * temperature)).tanh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_band_is_constant() {
        let g = ModeGrid::new(5, WrapPolicy::Wrap);
        let d = Dispersion::flat(1.0);
        for k in -5..=5 {
            assert_eq!(d.eval(&g, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn quadratic_raman_band_edge() {
        let g = ModeGrid::new(5, WrapPolicy::Wrap);
        let d = Dispersion::quadratic(1.0, 1.0);
        assert_eq!(d.eval(&g, 5).unwrap(), 2.0);
        assert_eq!(d.eval(&g, -5).unwrap(), 2.0);
        assert_eq!(d.eval(&g, 0).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_cavity_band_edge() {
        let g = ModeGrid::new(5, WrapPolicy::Wrap);
        let d = Dispersion::quadratic(0.3, 1.0);
        assert!((d.eval(&g, 5).unwrap() - 1.3).abs() < 1e-15);
    }

    #[test]
    fn eval_outside_grid_fails() {
        let g = ModeGrid::new(5, WrapPolicy::Wrap);
        assert!(Dispersion::flat(1.0).eval(&g, 6).is_err());
    }

    #[test]
    fn paper_defaults_validate() {
        assert!(SystemSpec::paper_defaults(0.5).validate().is_ok());
        let thermal = SystemSpec {
            temperature: 2.0,
            ..SystemSpec::paper_defaults(0.5)
        };
        assert!(thermal.validate().is_ok());
    }

    #[test]
    fn zero_kappa_is_named() {
        let spec = SystemSpec {
            kappa: 0.0,
            ..SystemSpec::paper_defaults(0.5)
        };
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("kappa must be positive"), "{err}");
    }

    #[test]
    fn every_violation_is_reported() {
        let spec = SystemSpec {
            g: -1.0,
            gamma: -0.1,
            cavity: Dispersion::flat(0.0),
            ..SystemSpec::paper_defaults(0.5)
        };
        match spec.validate() {
            Err(Error::Validation(v)) => {
                let fields: Vec<_> = v.iter().map(|v| v.field).collect();
                assert_eq!(fields, vec!["g", "gamma", "cavity"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coth_limits() {
        assert_eq!(thermal_variance(1.0, 0.0), 0.5);
        let v = thermal_variance(1.0, 2.0);
        assert!((v - 0.5 / 0.25f64.tanh()).abs() < 1e-15);
        assert!((v - 2.0415).abs() < 1e-3);
    }

    fn arb_dispersion() -> impl Strategy<Value = Dispersion> {
        prop_oneof![
            (0.05..3.0f64).prop_map(Dispersion::flat),
            (0.05..3.0f64, 0.0..2.0f64).prop_map(|(b, w)| Dispersion::quadratic(b, w)),
        ]
    }

    proptest! {
        #[test]
        fn dispersion_is_even(d in arb_dispersion(), m in 0usize..12) {
            let g = ModeGrid::new(m, WrapPolicy::Wrap);
            for k in 0..=m as i64 {
                prop_assert_eq!(d.eval(&g, k).unwrap(), d.eval(&g, -k).unwrap());
                prop_assert!(d.eval(&g, k).unwrap() > 0.0);
            }
        }

        #[test]
        fn flat_is_the_narrow_band_limit(base in 0.05..3.0f64, w in 0.0..2.0f64, m in 0usize..12) {
            let g = ModeGrid::new(m, WrapPolicy::Wrap);
            let q = Dispersion::quadratic(base, w);
            let worst = g.momenta().map(|k| (q.eval(&g, k).unwrap() - base).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= w + 1e-15);
            if m > 0 {
                prop_assert!((q.eval(&g, m as i64).unwrap() - base - w).abs() < 1e-12);
            }
        }

        #[test]
        fn validation_is_idempotent(
            g in -0.1..0.1f64, kappa in -0.05..0.05f64, t in -1.0..3.0f64, m in 0usize..6,
        ) {
            let spec = SystemSpec {
                g, kappa, temperature: t,
                grid: ModeGrid::new(m, WrapPolicy::Truncate),
                ..SystemSpec::paper_defaults(0.5)
            };
            let once = spec.clone().validate();
            match &once {
                Ok(s) => prop_assert_eq!(s.clone().validate(), Ok(spec.clone())),
                Err(_) => prop_assert_eq!(spec.clone().validate(), once.clone()),
            }
        }
    }
}
