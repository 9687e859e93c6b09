//! Stochastic Heisenberg-Langevin dynamics of one Wigner trajectory.
//!
//! With `A_k = a_k + conj(a_{-k})` and `B_q = b_q + conj(b_{-q})` the
//! equations of motion read
//!
//! ```text
//! i da_k/dt = w_c(k) a_k + (2g/sqrt N) sum_q B_{k-q} A_q
//!           + (g4/N) sum_q A_{k+q} sum_k' A_k' A_{-k'-q} - i kappa a_k + i xi_a
//! i db_q/dt = w_R(q) b_q + (g/sqrt N) sum_k A_k A_{q-k}
//!           - (i gamma / 2)(b_q - conj b_q) - xi_b
//! ```
//!
//! Every momentum sum is a convolution of Hermitian arrays, so only the
//! outputs with `k >= 0` are computed and the rest follow by conjugation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{coth_factor, RampSchedule, SystemSpec, WrapPolicy};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One Wigner sample of the cavity (`a`) and Raman (`b`) fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub t: f64,
}

impl TrajectoryState {
    pub fn zeros(n: usize) -> Self {
        Self {
            a: vec![Complex64::ZERO; n],
            b: vec![Complex64::ZERO; n],
            t: 0.0,
        }
    }

    /// First non-finite entry as `(field, storage position)`.
    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        let bad = |v: &[Complex64]| v.iter().position(|z| !z.is_finite());
        bad(&self.a)
            .map(|p| ("a", p))
            .or_else(|| bad(&self.b).map(|p| ("b", p)))
    }
}

/// Bath increments for one step. The Raman forcing is real-valued by
/// construction; it enters the equation for `b` along the imaginary axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseIncrement {
    pub da: Vec<Complex64>,
    pub db: Vec<f64>,
}

/// Time derivative of a trajectory state, noise excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

/// Precomputed drift and noise coefficients for one system.
#[derive(Debug, Clone)]
pub struct Kernel {
    n: usize,
    half: usize,
    omega_c: Vec<f64>,
    omega_r: Vec<f64>,
    g: f64,
    g4: f64,
    kappa: f64,
    gamma: f64,
    inv_sqrt_n: f64,
    inv_n: f64,
    wrap: bool,
    /// Per-mode standard deviation per unit `sqrt(dt)`.
    cavity_noise: Vec<f64>,
    raman_noise: Vec<f64>,
}

/// Split real/imaginary buffer.
#[derive(Debug, Clone)]
struct Planar {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Planar {
    fn new(n: usize) -> Self {
        Self {
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }
}

/// Scratch arrays reused across drift evaluations.
#[derive(Debug, Clone)]
struct Scratch {
    herm_a: Planar,
    herm_b: Planar,
    /// `sum A A`, all modes.
    pair_aa: Planar,
    /// Non-negative half of `sum B A`.
    pair_ba: Planar,
    /// Non-negative half of `sum A (A A)`.
    quartic: Planar,
    /// Periodically or zero-extended convolution operand.
    ext: Planar,
    half: Planar,
}

impl Scratch {
    fn new(n: usize) -> Self {
        let m = n / 2;
        Self {
            herm_a: Planar::new(n),
            herm_b: Planar::new(n),
            pair_aa: Planar::new(n),
            pair_ba: Planar::new(m + 1),
            quartic: Planar::new(m + 1),
            ext: Planar::new(n + m),
            half: Planar::new(m + 1),
        }
    }
}

/// `out[j] += x[n-1-i] * ext[i+j]` for all `i`, with a width known at
/// compile time so the inner loop unrolls.
#[inline]
fn mac_fixed<const W: usize>(x: &Planar, ext: &Planar, o_re: &mut [f64], o_im: &mut [f64], n: usize) {
    let o_re: &mut [f64; W] = o_re.try_into().unwrap();
    let o_im: &mut [f64; W] = o_im.try_into().unwrap();
    let (mut acc_re, mut acc_im) = ([0.0; W], [0.0; W]);
    for i in 0..n {
        let (xr, xi) = (x.re[n - 1 - i], x.im[n - 1 - i]);
        let y_re: &[f64; W] = ext.re[i..i + W].try_into().unwrap();
        let y_im: &[f64; W] = ext.im[i..i + W].try_into().unwrap();
        for j in 0..W {
            acc_re[j] += xr * y_re[j] - xi * y_im[j];
            acc_im[j] += xr * y_im[j] + xi * y_re[j];
        }
    }
    *o_re = acc_re;
    *o_im = acc_im;
}

fn mac_dyn(x: &Planar, ext: &Planar, o_re: &mut [f64], o_im: &mut [f64], n: usize) {
    let w = o_re.len();
    o_re.fill(0.0);
    o_im.fill(0.0);
    for i in 0..n {
        let (xr, xi) = (x.re[n - 1 - i], x.im[n - 1 - i]);
        let y_re = &ext.re[i..i + w];
        let y_im = &ext.im[i..i + w];
        for j in 0..w {
            o_re[j] += xr * y_re[j] - xi * y_im[j];
            o_im[j] += xr * y_im[j] + xi * y_re[j];
        }
    }
}

impl Kernel {
    pub fn new(spec: &SystemSpec) -> Self {
        let grid = spec.grid;
        let n = grid.len();
        let omega_c = spec.cavity.frequencies(&grid);
        let omega_r = spec.raman.frequencies(&grid);
        // E|da|^2 = kappa coth dt; E db^2 = (gamma/2) coth dt, which keeps the
        // uncoupled steady state equal to the thermal Wigner state.
        let cavity_noise = omega_c
            .iter()
            .map(|&w| (0.5 * spec.kappa * coth_factor(w, spec.temperature)).sqrt())
            .collect();
        let raman_noise = omega_r
            .iter()
            .map(|&w| (0.5 * spec.gamma * coth_factor(w, spec.temperature)).sqrt())
            .collect();
        Self {
            n,
            half: grid.half_width(),
            omega_c,
            omega_r,
            g: spec.g,
            g4: spec.g4,
            kappa: spec.kappa,
            gamma: spec.gamma,
            inv_sqrt_n: 1.0 / (n as f64).sqrt(),
            inv_n: 1.0 / n as f64,
            wrap: grid.wrap_policy() == WrapPolicy::Wrap,
            cavity_noise,
            raman_noise,
        }
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    /// Copy `y` into `ext` extended by `m` entries: periodically under
    /// wrap, with zeros under truncation.
    #[inline]
    fn extend(&self, y: &Planar, ext: &mut Planar) {
        let n = self.n;
        let m = self.half;
        for (e, src) in [(&mut ext.re, &y.re), (&mut ext.im, &y.im)] {
            e[..n].copy_from_slice(&src[..n]);
            if self.wrap {
                e[n..n + m].copy_from_slice(&src[..m]);
            } else {
                e[n..n + m].fill(0.0);
            }
        }
    }

    /// Sum-convolution `out_k = sum_{k_i + k_j = k} x_i y_j` for `k >= 0`,
    /// with `ext` holding the extended `y`.
    ///
    /// In storage positions the partner of `x[n-1-i]` is `y[k+i]` (taken
    /// modulo `n` under wrap, zero past the edge under truncation), so each
    /// `x` entry contributes a contiguous multiply-add over all outputs.
    #[inline]
    fn convolve_half(&self, x: &Planar, ext: &Planar, out: &mut Planar) {
        let n = self.n;
        let w = self.half + 1;
        let (o_re, o_im) = (&mut out.re[..w], &mut out.im[..w]);
        macro_rules! fixed {
            ($($w:literal)*) => {
                match w {
                    $($w => mac_fixed::<$w>(x, ext, o_re, o_im, n),)*
                    _ => mac_dyn(x, ext, o_re, o_im, n),
                }
            };
        }
        fixed!(1 2 3 4 5 6 7 8 9);
    }

    fn drift_into(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        ramp: f64,
        da: &mut [Complex64],
        db: &mut [Complex64],
        s: &mut Scratch,
    ) {
        let n = self.n;
        let m = self.half;
        let cubic_a = 2.0 * ramp * self.g * self.inv_sqrt_n;
        let cubic_b = ramp * self.g * self.inv_sqrt_n;
        let quartic = ramp * self.g4 * self.inv_n;
        let coupled = cubic_b != 0.0 || quartic != 0.0;

        if coupled {
            for p in 0..n {
                let q = n - 1 - p;
                s.herm_a.re[p] = a[p].re + a[q].re;
                s.herm_a.im[p] = a[p].im - a[q].im;
                s.herm_b.re[p] = b[p].re + b[q].re;
                s.herm_b.im[p] = b[p].im - b[q].im;
            }
            self.extend(&s.herm_a, &mut s.ext);
            self.convolve_half(&s.herm_a, &s.ext, &mut s.half);
            self.convolve_half(&s.herm_b, &s.ext, &mut s.pair_ba);
            for k in 0..=m {
                s.pair_aa.re[m + k] = s.half.re[k];
                s.pair_aa.im[m + k] = s.half.im[k];
                s.pair_aa.re[m - k] = s.half.re[k];
                s.pair_aa.im[m - k] = -s.half.im[k];
            }
            if quartic != 0.0 {
                self.extend(&s.pair_aa, &mut s.ext);
                self.convolve_half(&s.herm_a, &s.ext, &mut s.quartic);
            } else {
                s.quartic.re.fill(0.0);
                s.quartic.im.fill(0.0);
            }
        }

        for p in 0..n {
            da[p] = -I * (a[p] * self.omega_c[p]) - a[p] * self.kappa;
            db[p] = -I * (b[p] * self.omega_r[p] + self.gamma * b[p].im);
        }
        if coupled {
            // Outputs for k < 0 are conjugates of the k > 0 half.
            for p in 0..n {
                let (h, sign) = if p >= m { (p - m, 1.0) } else { (m - p, -1.0) };
                let re = s.pair_ba.re[h] * cubic_a + s.quartic.re[h] * quartic;
                let im = sign * (s.pair_ba.im[h] * cubic_a + s.quartic.im[h] * quartic);
                // -i (re + i im) = im - i re
                da[p] += Complex64::new(im, -re);
                db[p] += Complex64::new(s.pair_aa.im[p], -s.pair_aa.re[p]) * cubic_b;
            }
        }
    }

    /// Deterministic drift at the given ramp factor.
    pub fn drift(&self, state: &TrajectoryState, ramp: f64) -> Derivative {
        let mut out = Derivative {
            a: vec![Complex64::ZERO; self.n],
            b: vec![Complex64::ZERO; self.n],
        };
        let mut s = Scratch::new(self.n);
        self.drift_into(&state.a, &state.b, ramp, &mut out.a, &mut out.b, &mut s);
        out
    }

    /// Draw bath increments into `noise` for a step of length `dt`.
    pub fn fill_noise<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, noise: &mut NoiseIncrement) {
        let sqdt = dt.sqrt();
        for (z, &sd) in noise.da.iter_mut().zip(&self.cavity_noise) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(re, im) * (sd * sqdt);
        }
        for (x, &sd) in noise.db.iter_mut().zip(&self.raman_noise) {
            let r: f64 = rng.sample(StandardNormal);
            *x = r * sd * sqdt;
        }
    }

    pub fn noise<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> NoiseIncrement {
        let mut noise = NoiseIncrement {
            da: vec![Complex64::ZERO; self.n],
            db: vec![0.0; self.n],
        };
        self.fill_noise(dt, rng, &mut noise);
        noise
    }
}

/// Drift of the equations of motion, noise excluded.
pub fn drift(state: &TrajectoryState, spec: &SystemSpec, ramp_factor: f64) -> Derivative {
    Kernel::new(spec).drift(state, ramp_factor)
}

pub fn noise_increment<R: Rng + ?Sized>(
    spec: &SystemSpec,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseIncrement> {
    check_dt(dt)?;
    Ok(Kernel::new(spec).noise(dt, rng))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("dt must be positive, got {dt}")))
    }
}

/// Stochastic Heun integrator with reusable buffers.
///
/// Additive noise makes the Ito and Stratonovich readings coincide; the
/// same increment is used by predictor and corrector, and both drift
/// evaluations use the ramp factor at the step midpoint.
#[derive(Debug, Clone)]
pub struct Integrator {
    kernel: Kernel,
    ramp: RampSchedule,
    dt: f64,
    noise: NoiseIncrement,
    pred: TrajectoryState,
    f0: Derivative,
    f1: Derivative,
    scratch: Scratch,
    coupled: bool,
}

impl Integrator {
    pub fn new(spec: &SystemSpec, ramp: RampSchedule, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let kernel = Kernel::new(spec);
        let n = kernel.modes();
        let zeros = || Derivative {
            a: vec![Complex64::ZERO; n],
            b: vec![Complex64::ZERO; n],
        };
        Ok(Self {
            kernel,
            ramp,
            dt,
            noise: NoiseIncrement {
                da: vec![Complex64::ZERO; n],
                db: vec![0.0; n],
            },
            pred: TrajectoryState::zeros(n),
            f0: zeros(),
            f1: zeros(),
            scratch: Scratch::new(n),
            coupled: spec.g != 0.0 || spec.g4 != 0.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Advance `state` by one step in place. On failure the state holds the
    /// non-finite values and the error names the first offending mode.
    pub fn step_in_place<R: Rng + ?Sized>(
        &mut self,
        state: &mut TrajectoryState,
        rng: &mut R,
    ) -> Result<()> {
        let mut noise = std::mem::take(&mut self.noise);
        self.kernel.fill_noise(self.dt, rng, &mut noise);
        let out = self.advance(state, &noise);
        self.noise = noise;
        out
    }

    /// Advance `state` by one step driven by the given bath increments.
    pub fn advance(&mut self, state: &mut TrajectoryState, noise: &NoiseIncrement) -> Result<()> {
        let dt = self.dt;
        let r = if self.coupled {
            self.ramp.factor(state.t + 0.5 * dt)
        } else {
            0.0
        };
        let k = &self.kernel;
        let n = k.modes();

        k.drift_into(
            &state.a,
            &state.b,
            r,
            &mut self.f0.a,
            &mut self.f0.b,
            &mut self.scratch,
        );
        for p in 0..n {
            self.pred.a[p] = state.a[p] + self.f0.a[p] * dt + noise.da[p];
            self.pred.b[p] = state.b[p] + self.f0.b[p] * dt + I * noise.db[p];
        }
        k.drift_into(
            &self.pred.a,
            &self.pred.b,
            r,
            &mut self.f1.a,
            &mut self.f1.b,
            &mut self.scratch,
        );
        let half = 0.5 * dt;
        let mut check = 0.0;
        for p in 0..n {
            let a = state.a[p] + (self.f0.a[p] + self.f1.a[p]) * half + noise.da[p];
            let b = state.b[p] + (self.f0.b[p] + self.f1.b[p]) * half + I * noise.db[p];
            check += a.re + a.im + b.re + b.im;
            state.a[p] = a;
            state.b[p] = b;
        }
        state.t += dt;
        if !check.is_finite() {
            if let Some((field, pos)) = state.first_non_finite() {
                return Err(Error::NonFinite {
                    trajectory: 0,
                    seed: 0,
                    time: state.t,
                    field,
                    mode: pos as i64 - k.half as i64,
                });
            }
        }
        Ok(())
    }
}

/// Steps a coupled trajectory and its `g = 0` reference in lockstep on the
/// same bath increments (common random numbers).
///
/// The bath only depends on rates, temperature and dispersions, so the
/// reference sees exactly the increments a separate uncoupled run from the
/// same stream would draw.
#[derive(Debug, Clone)]
pub struct PairedIntegrator {
    coupled: Integrator,
    baseline: Integrator,
    noise: NoiseIncrement,
}

impl PairedIntegrator {
    pub fn new(spec: &SystemSpec, ramp: RampSchedule, dt: f64) -> Result<Self> {
        let n = spec.grid.len();
        Ok(Self {
            coupled: Integrator::new(spec, ramp, dt)?,
            baseline: Integrator::new(&spec.uncoupled(), ramp, dt)?,
            noise: NoiseIncrement {
                da: vec![Complex64::ZERO; n],
                db: vec![0.0; n],
            },
        })
    }

    pub fn step_in_place<R: Rng + ?Sized>(
        &mut self,
        coupled: &mut TrajectoryState,
        baseline: &mut TrajectoryState,
        rng: &mut R,
    ) -> Result<()> {
        self.coupled
            .kernel
            .fill_noise(self.coupled.dt, rng, &mut self.noise);
        self.coupled.advance(coupled, &self.noise)?;
        self.baseline.advance(baseline, &self.noise)
    }
}

/// Advance a trajectory by one stochastic Heun step.
pub fn step<R: Rng + ?Sized>(
    state: &TrajectoryState,
    spec: &SystemSpec,
    ramp: &RampSchedule,
    dt: f64,
    rng: &mut R,
) -> Result<TrajectoryState> {
    let mut integ = Integrator::new(spec, *ramp, dt)?;
    let mut next = state.clone();
    integ.step_in_place(&mut next, rng)?;
    Ok(next)
}
