//! Term-by-term evaluation of the Langevin drift, written straight from the
//! mode sums with explicit index arithmetic. Deliberately slow.

#![allow(dead_code)]

use num_complex::Complex64;
use raman_twa::dynamics::{Derivative, TrajectoryState};
use raman_twa::model::{SystemSpec, WrapPolicy};

const I: Complex64 = Complex64::new(0.0, 1.0);

struct Fields<'a> {
    m: i64,
    wrap: bool,
    a: &'a [Complex64],
    b: &'a [Complex64],
}

impl Fields<'_> {
    fn pos(&self, k: i64) -> Option<usize> {
        let n = 2 * self.m + 1;
        if self.wrap {
            Some((k + self.m).rem_euclid(n) as usize)
        } else if k.abs() <= self.m {
            Some((k + self.m) as usize)
        } else {
            None
        }
    }

    fn a(&self, k: i64) -> Option<Complex64> {
        self.pos(k).map(|p| self.a[p])
    }

    fn a_conj(&self, k: i64) -> Option<Complex64> {
        self.pos(k).map(|p| self.a[p].conj())
    }

    fn b(&self, k: i64) -> Option<Complex64> {
        self.pos(k).map(|p| self.b[p])
    }

    fn b_conj(&self, k: i64) -> Option<Complex64> {
        self.pos(k).map(|p| self.b[p].conj())
    }
}

fn pair(x: Option<Complex64>, y: Option<Complex64>) -> Option<Complex64> {
    Some(x? + y?)
}

pub fn drift(state: &TrajectoryState, spec: &SystemSpec, ramp: f64) -> Derivative {
    let m = spec.grid.half_width() as i64;
    let n = (2 * m + 1) as f64;
    let f = Fields {
        m,
        wrap: spec.grid.wrap_policy() == WrapPolicy::Wrap,
        a: &state.a,
        b: &state.b,
    };
    let g = ramp * spec.g;
    let g4 = ramp * spec.g4;
    let mut da = Vec::new();
    let mut db = Vec::new();
    for k in -m..=m {
        let p = (k + m) as usize;
        let wc = spec.cavity.eval(&spec.grid, k).unwrap();
        let wr = spec.raman.eval(&spec.grid, k).unwrap();

        let mut cubic = Complex64::new(0.0, 0.0);
        for q in -m..=m {
            let left = pair(f.b(k - q), f.b_conj(-k + q));
            let right = pair(f.a(q), f.a_conj(-q));
            if let (Some(l), Some(r)) = (left, right) {
                cubic += l * r;
            }
        }
        let mut quartic = Complex64::new(0.0, 0.0);
        for kp in -m..=m {
            for q in -m..=m {
                let x = pair(f.a(k + q), f.a_conj(-k - q));
                let y = pair(f.a(kp), f.a_conj(-kp));
                let z = pair(f.a(-kp - q), f.a_conj(kp + q));
                if let (Some(x), Some(y), Some(z)) = (x, y, z) {
                    quartic += x * y * z;
                }
            }
        }
        // i da = w a + 2g/sqrt(N) cubic + g4/N quartic - i kappa a
        let rhs_a = state.a[p] * wc + cubic * (2.0 * g / n.sqrt()) + quartic * (g4 / n)
            - I * spec.kappa * state.a[p];
        da.push(-I * rhs_a);

        let q = k;
        let mut raman = Complex64::new(0.0, 0.0);
        for k in -m..=m {
            let x = pair(f.a(k), f.a_conj(-k));
            let y = pair(f.a(-k + q), f.a_conj(k - q));
            if let (Some(x), Some(y)) = (x, y) {
                raman += x * y;
            }
        }
        let bq = state.b[p];
        let rhs_b = bq * wr + raman * (g / n.sqrt()) - I * (spec.gamma / 2.0) * (bq - bq.conj());
        db.push(-I * rhs_b);
    }
    Derivative { a: da, b: db }
}
