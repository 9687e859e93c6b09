use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RampShape {
    Linear,
    #[default]
    SmoothTanh,
}

/// Coupling ramp followed by a settle phase and a sampling window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSchedule {
    pub shape: RampShape,
    pub t_ramp: f64,
    pub t_settle: f64,
    pub t_window: f64,
    pub sample_stride: f64,
}

/// Steepness of the tanh profile at the ramp midpoint.
const TANH_STEEPNESS: f64 = 3.0;

impl Default for RampSchedule {
    fn default() -> Self {
        Self {
            shape: RampShape::SmoothTanh,
            t_ramp: 600.0,
            t_settle: 200.0,
            t_window: 200.0,
            sample_stride: 1.0,
        }
    }
}

impl RampSchedule {
    /// Ramp factor `r(t)`: zero at `t = 0`, one from `t_ramp` on, monotone.
    pub fn factor(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.t_ramp {
            return 1.0;
        }
        let u = t / self.t_ramp;
        match self.shape {
            RampShape::Linear => u,
            RampShape::SmoothTanh => {
                let s = TANH_STEEPNESS.tanh();
                ((TANH_STEEPNESS * (2.0 * u - 1.0)).tanh() + s) / (2.0 * s)
            }
        }
    }

    /// Start of the sampling window.
    pub fn window_start(&self) -> f64 {
        self.t_ramp + self.t_settle
    }

    pub fn total_time(&self) -> f64 {
        self.window_start() + self.t_window
    }

    /// Number of recorded samples per trajectory.
    pub fn samples(&self) -> usize {
        (self.t_window / self.sample_stride + 1e-9).floor() as usize
    }

    pub fn validate(self) -> Result<Self> {
        let mut v = Vec::new();
        for (field, x) in [
            ("t_ramp", self.t_ramp),
            ("t_settle", self.t_settle),
            ("t_window", self.t_window),
            ("sample_stride", self.sample_stride),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(Violation {
                    field,
                    message: format!("{field} must be positive"),
                });
            }
        }
        if self.sample_stride > self.t_window {
            v.push(Violation {
                field: "sample_stride",
                message: "sample_stride must not exceed t_window".into(),
            });
        }
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_are_exact() {
        for shape in [RampShape::Linear, RampShape::SmoothTanh] {
            let r = RampSchedule {
                shape,
                ..Default::default()
            };
            assert_eq!(r.factor(0.0), 0.0);
            assert_eq!(r.factor(600.0), 1.0);
            assert_eq!(r.factor(1e4), 1.0);
            assert!((r.factor(300.0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn default_samples() {
        let r = RampSchedule::default();
        assert_eq!(r.samples(), 200);
        assert_eq!(r.total_time(), 1000.0);
    }

    #[test]
    fn stride_longer_than_window_rejected() {
        let r = RampSchedule {
            sample_stride: 300.0,
            ..Default::default()
        };
        assert!(r.validate().is_err());
    }

    proptest! {
        #[test]
        fn ramp_is_monotone(a in 0.0..700.0f64, b in 0.0..700.0f64, linear in any::<bool>()) {
            let r = RampSchedule {
                shape: if linear { RampShape::Linear } else { RampShape::SmoothTanh },
                ..Default::default()
            };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(r.factor(lo) <= r.factor(hi));
            prop_assert!((0.0..=1.0).contains(&r.factor(a)));
        }
    }
}
