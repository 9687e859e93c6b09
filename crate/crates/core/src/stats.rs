//! Mergeable per-mode moment accumulators.
//!
//! Pooled moments are kept as raw sums over every recorded sample. Error
//! bars come from block means: each trajectory window is split into a fixed
//! number of contiguous blocks and one mean vector is kept per block. Blocks
//! carry the trajectory index so that coupled and baseline runs driven by
//! the same random streams can be paired.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::dynamics::TrajectoryState;
use crate::error::{Error, Result};

/// Quantities recorded per mode and sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Field {
    ERe = 0,
    EIm,
    ENorm2,
    QRe,
    QIm,
    QNorm2,
    ANorm2,
    BNorm2,
}

const PER_MODE: usize = 8;

/// Quadrature moments of the zero-momentum cavity amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Quad {
    X = 0,
    Y,
    XX,
    YY,
    XY,
}

const QUAD: usize = 5;

fn slot_len(modes: usize) -> usize {
    PER_MODE * modes + QUAD
}

#[inline]
fn slot(pos: usize, f: Field) -> usize {
    PER_MODE * pos + f as usize
}

#[inline]
fn quad_slot(modes: usize, q: Quad) -> usize {
    PER_MODE * modes + q as usize
}

/// Identifier of a block: trajectory index and sub-block within its window.
pub type BlockKey = (u64, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub key: BlockKey,
    pub samples: u64,
    pub means: Vec<f64>,
}

/// A trajectory removed from the statistics after diverging.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryAbort {
    pub trajectory: u64,
    pub seed: u64,
    pub time: f64,
    pub message: String,
}

/// An estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub fn new(value: f64, err: f64) -> Self {
        Self { value, err }
    }

    /// `|value| / err`.
    pub fn significance(&self) -> f64 {
        self.value.abs() / self.err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    half_width: usize,
    samples: u64,
    trajectories: u64,
    sums: Vec<f64>,
    blocks: Vec<Block>,
    aborts: Vec<TrajectoryAbort>,
}

impl EnsembleStats {
    pub fn empty(half_width: usize) -> Self {
        let modes = 2 * half_width + 1;
        Self {
            half_width,
            samples: 0,
            trajectories: 0,
            sums: vec![0.0; slot_len(modes)],
            blocks: Vec::new(),
            aborts: Vec::new(),
        }
    }

    pub(crate) fn aborted(half_width: usize, abort: TrajectoryAbort) -> Self {
        Self {
            aborts: vec![abort],
            ..Self::empty(half_width)
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn modes(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Samples per mode.
    pub fn count(&self) -> u64 {
        self.samples
    }

    /// Trajectories that contributed samples.
    pub fn trajectories(&self) -> u64 {
        self.trajectories
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn aborts(&self) -> &[TrajectoryAbort] {
        &self.aborts
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    fn pos(&self, k: i64) -> Result<usize> {
        if k.unsigned_abs() as usize <= self.half_width {
            Ok((k + self.half_width as i64) as usize)
        } else {
            Err(Error::IndexOutOfGrid {
                index: k,
                half_width: self.half_width,
            })
        }
    }

    /// Pooled mean of one recorded quantity.
    pub fn mean(&self, k: i64, f: Field) -> Result<f64> {
        Ok(self.sums[slot(self.pos(k)?, f)] / self.samples as f64)
    }

    /// Pooled mean of one zero-mode quadrature moment.
    pub fn quad_mean(&self, q: Quad) -> f64 {
        self.sums[quad_slot(self.modes(), q)] / self.samples as f64
    }

    /// Pooled means in slot layout.
    fn pooled(&self) -> Vec<f64> {
        let n = self.samples as f64;
        self.sums.iter().map(|s| s / n).collect()
    }

    pub fn merge(mut self, other: &EnsembleStats) -> Result<Self> {
        if self.half_width != other.half_width {
            return Err(Error::GridMismatch {
                left: self.half_width,
                right: other.half_width,
            });
        }
        for (x, y) in self.sums.iter_mut().zip(&other.sums) {
            *x += y;
        }
        self.samples += other.samples;
        self.trajectories += other.trajectories;
        self.blocks.extend(other.blocks.iter().cloned());
        self.aborts.extend(other.aborts.iter().cloned());
        Ok(self)
    }

    /// Merge a sequence with a fixed balanced pairwise tree, so the result
    /// depends only on the order of `parts`.
    pub fn merge_tree(parts: Vec<EnsembleStats>, half_width: usize) -> Result<Self> {
        fn go(mut parts: Vec<EnsembleStats>) -> Result<EnsembleStats> {
            if parts.len() == 1 {
                return Ok(parts.pop().unwrap());
            }
            let right = parts.split_off(parts.len() / 2);
            let l = go(parts)?;
            let r = go(right)?;
            l.merge(&r)
        }
        if parts.is_empty() {
            return Ok(Self::empty(half_width));
        }
        go(parts)
    }

    /// Standard error of a statistic from its per-block linearization.
    ///
    /// `influence` maps one block's mean vector to the first-order deviation
    /// of the statistic it induces.
    pub fn block_error(&self, influence: impl Fn(&[f64]) -> f64) -> f64 {
        let b = self.blocks.len();
        if b < 2 {
            return f64::NAN;
        }
        let mean_n = self.samples as f64 / b as f64;
        let ss: f64 = self
            .blocks
            .iter()
            .map(|blk| {
                let l = influence(&blk.means) * blk.samples as f64 / mean_n;
                l * l
            })
            .sum();
        (ss / (b as f64 * (b as f64 - 1.0))).sqrt()
    }

    /// Standard error of a statistic of two ensembles, pairing blocks with
    /// the same key. Unmatched blocks contribute as independent samples.
    pub fn paired_block_error(
        &self,
        other: &EnsembleStats,
        influence_self: impl Fn(&[f64]) -> f64,
        influence_other: impl Fn(&[f64]) -> f64,
    ) -> f64 {
        let wl = self.samples as f64 / self.blocks.len().max(1) as f64;
        let wr = other.samples as f64 / other.blocks.len().max(1) as f64;
        let mut joined: BTreeMap<BlockKey, f64> = BTreeMap::new();
        for b in &self.blocks {
            *joined.entry(b.key).or_default() += influence_self(&b.means) * b.samples as f64 / wl;
        }
        for b in &other.blocks {
            *joined.entry(b.key).or_default() += influence_other(&b.means) * b.samples as f64 / wr;
        }
        let terms = joined.len() as f64;
        if terms < 2.0 {
            return f64::NAN;
        }
        let ss: f64 = joined.values().map(|v| v * v).sum();
        (ss / (terms * (terms - 1.0))).sqrt()
    }

    /// `<|X|^2> - |<X>|^2` for `X = E` or `X = Q` together with its
    /// linearized influence function.
    fn variance_parts(&self, k: i64, field: Field) -> Result<(f64, impl Fn(&[f64]) -> f64)> {
        let pos = self.pos(k)?;
        let (re, im, n2) = match field {
            Field::ERe | Field::EIm | Field::ENorm2 => (Field::ERe, Field::EIm, Field::ENorm2),
            _ => (Field::QRe, Field::QIm, Field::QNorm2),
        };
        let (sre, sim, sn2) = (slot(pos, re), slot(pos, im), slot(pos, n2));
        let p = self.pooled();
        let (mre, mim, m2) = (p[sre], p[sim], p[sn2]);
        let value = m2 - (mre * mre + mim * mim);
        let infl = move |b: &[f64]| {
            (b[sn2] - m2) - 2.0 * (mre * (b[sre] - mre) + mim * (b[sim] - mim))
        };
        Ok((value, infl))
    }

    /// `V(E_k) = <|E_k|^2> - |<E_k>|^2`.
    pub fn variance_e(&self, k: i64) -> Result<Estimate> {
        let (v, infl) = self.variance_parts(k, Field::ENorm2)?;
        Ok(Estimate::new(v, self.block_error(infl)))
    }

    /// `V(Q_k) = <|Q_k|^2> - |<Q_k>|^2`.
    pub fn variance_q(&self, k: i64) -> Result<Estimate> {
        let (v, infl) = self.variance_parts(k, Field::QNorm2)?;
        Ok(Estimate::new(v, self.block_error(infl)))
    }

    pub(crate) fn variance_with_influence(
        &self,
        k: i64,
        use_raman: bool,
    ) -> Result<(f64, impl Fn(&[f64]) -> f64)> {
        self.variance_parts(k, if use_raman { Field::QNorm2 } else { Field::ENorm2 })
    }

    /// Mean of one recorded quantity with its block error.
    pub fn mean_estimate(&self, k: i64, f: Field) -> Result<Estimate> {
        let s = slot(self.pos(k)?, f);
        let m = self.sums[s] / self.samples as f64;
        Ok(Estimate::new(m, self.block_error(|b| b[s] - m)))
    }

    /// Covariance matrix `[[Vxx, Vxy], [Vxy, Vyy]]` of `(Re a_0, Im a_0)`.
    pub fn quadrature_covariance(&self) -> [[f64; 2]; 2] {
        let (x, y) = (self.quad_mean(Quad::X), self.quad_mean(Quad::Y));
        let vxx = self.quad_mean(Quad::XX) - x * x;
        let vyy = self.quad_mean(Quad::YY) - y * y;
        let vxy = self.quad_mean(Quad::XY) - x * y;
        [[vxx, vxy], [vxy, vyy]]
    }

    /// Covariance of `(Re a_0, Im a_0)` computed from an arbitrary subset of
    /// blocks, used for resampling error estimates.
    pub(crate) fn quadrature_covariance_of(&self, blocks: &[&Block]) -> [[f64; 2]; 2] {
        let modes = self.modes();
        let n: f64 = blocks.iter().map(|b| b.samples as f64).sum();
        let m = |q: Quad| {
            blocks
                .iter()
                .map(|b| b.means[quad_slot(modes, q)] * b.samples as f64)
                .sum::<f64>()
                / n
        };
        let (x, y) = (m(Quad::X), m(Quad::Y));
        let vxx = m(Quad::XX) - x * x;
        let vyy = m(Quad::YY) - y * y;
        let vxy = m(Quad::XY) - x * y;
        [[vxx, vxy], [vxy, vyy]]
    }

    /// Rescale every recorded field amplitude by `factor` (second moments
    /// by `factor^2`). Used to probe scale invariance of ratio observables.
    pub fn scaled(&self, factor: f64) -> Self {
        let modes = self.modes();
        let scale = |v: &mut [f64]| {
            for (i, x) in v.iter_mut().enumerate() {
                let quadratic = if i < PER_MODE * modes {
                    matches!(
                        i % PER_MODE,
                        2 | 5 | 6 | 7 // norms
                    )
                } else {
                    i - PER_MODE * modes >= 2
                };
                *x *= if quadratic { factor * factor } else { factor };
            }
        };
        let mut out = self.clone();
        scale(&mut out.sums);
        for b in &mut out.blocks {
            scale(&mut b.means);
        }
        out
    }

    /// Standard error of a pooled mean estimated by re-blocking into groups
    /// of `group` consecutive blocks within each trajectory.
    pub fn regrouped_mean_error(&self, k: i64, f: Field, group: usize) -> Result<f64> {
        let s = slot(self.pos(k)?, f);
        let m = self.sums[s] / self.samples as f64;
        let mut groups: Vec<(f64, f64)> = Vec::new();
        let mut cur: Option<(u64, usize, f64, f64)> = None;
        for b in &self.blocks {
            let w = b.samples as f64;
            match &mut cur {
                Some((traj, len, sum, n)) if *traj == b.key.0 && *len < group => {
                    *len += 1;
                    *sum += b.means[s] * w;
                    *n += w;
                }
                _ => {
                    if let Some((_, _, sum, n)) = cur.take() {
                        groups.push((sum / n, n));
                    }
                    cur = Some((b.key.0, 1, b.means[s] * w, w));
                }
            }
        }
        if let Some((_, _, sum, n)) = cur {
            groups.push((sum / n, n));
        }
        let g = groups.len() as f64;
        if g < 2.0 {
            return Ok(f64::NAN);
        }
        let mean_n = self.samples as f64 / g;
        let ss: f64 = groups
            .iter()
            .map(|(v, n)| {
                let l = (v - m) * n / mean_n;
                l * l
            })
            .sum();
        Ok((ss / (g * (g - 1.0))).sqrt())
    }
}

/// Per-trajectory sample recorder producing a one-trajectory
/// [`EnsembleStats`].
#[derive(Debug, Clone)]
pub struct TrajectoryRecorder {
    half_width: usize,
    trajectory: u64,
    /// Sample index at which each block ends.
    block_ends: Vec<usize>,
    recorded: usize,
    block_sum: Vec<f64>,
    block_samples: u64,
    stats: EnsembleStats,
}

impl TrajectoryRecorder {
    pub fn new(half_width: usize, trajectory: u64, samples: usize, blocks: usize) -> Self {
        let blocks = blocks.clamp(1, samples.max(1));
        let block_ends = (1..=blocks).map(|j| j * samples / blocks).collect();
        let mut stats = EnsembleStats::empty(half_width);
        stats.trajectories = 1;
        Self {
            half_width,
            trajectory,
            block_ends,
            recorded: 0,
            block_sum: vec![0.0; stats.sums.len()],
            block_samples: 0,
            stats,
        }
    }

    pub fn record(&mut self, state: &TrajectoryState) {
        let n = 2 * self.half_width + 1;
        let v = &mut self.block_sum;
        for p in 0..n {
            let q = n - 1 - p;
            let e = state.a[p] + state.a[q].conj();
            let qf = state.b[p] + state.b[q].conj();
            let base = PER_MODE * p;
            v[base] += e.re;
            v[base + 1] += e.im;
            v[base + 2] += e.norm_sqr();
            v[base + 3] += qf.re;
            v[base + 4] += qf.im;
            v[base + 5] += qf.norm_sqr();
            v[base + 6] += state.a[p].norm_sqr();
            v[base + 7] += state.b[p].norm_sqr();
        }
        let a0: Complex64 = state.a[self.half_width];
        let base = PER_MODE * n;
        v[base] += a0.re;
        v[base + 1] += a0.im;
        v[base + 2] += a0.re * a0.re;
        v[base + 3] += a0.im * a0.im;
        v[base + 4] += a0.re * a0.im;
        self.block_samples += 1;
        self.recorded += 1;

        let idx = self.stats.blocks.len();
        if idx < self.block_ends.len() && self.recorded == self.block_ends[idx] {
            self.flush(idx as u32);
        }
    }

    fn flush(&mut self, sub: u32) {
        let w = self.block_samples as f64;
        let means = self.block_sum.iter().map(|s| s / w).collect();
        for (t, s) in self.stats.sums.iter_mut().zip(&self.block_sum) {
            *t += s;
        }
        self.stats.samples += self.block_samples;
        self.stats.blocks.push(Block {
            key: (self.trajectory, sub),
            samples: self.block_samples,
            means,
        });
        self.block_sum.fill(0.0);
        self.block_samples = 0;
    }

    pub fn finish(mut self) -> EnsembleStats {
        if self.block_samples > 0 {
            let sub = self.stats.blocks.len() as u32;
            self.flush(sub);
        }
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(trajectories: std::ops::Range<u64>, samples: usize, seed: u64) -> Vec<EnsembleStats> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        trajectories
            .map(|t| {
                let mut rec = TrajectoryRecorder::new(2, t, samples, 2);
                for _ in 0..samples {
                    let mut s = TrajectoryState::zeros(5);
                    for z in s.a.iter_mut().chain(s.b.iter_mut()) {
                        *z = Complex64::new(rng.random::<f64>() - 0.3, rng.random::<f64>() * 2.0);
                    }
                    rec.record(&s);
                }
                rec.finish()
            })
            .collect()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let s = EnsembleStats::merge_tree(synthetic(0..4, 10, 1), 2).unwrap();
        let m = s.clone().merge(&EnsembleStats::empty(2)).unwrap();
        assert_eq!(m, s);
    }

    #[test]
    fn merge_counts_add() {
        let a = EnsembleStats {
            samples: 1750,
            trajectories: 1750,
            ..EnsembleStats::empty(5)
        };
        let m = a.clone().merge(&a).unwrap();
        assert_eq!(m.trajectories(), 3500);
        assert_eq!(m.count(), 3500);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let r = EnsembleStats::empty(5).merge(&EnsembleStats::empty(0));
        assert!(matches!(r, Err(Error::GridMismatch { left: 5, right: 0 })));
    }

    #[test]
    fn halves_match_single_pass() {
        let parts = synthetic(0..20, 16, 3);
        let whole = EnsembleStats::merge_tree(parts.clone(), 2).unwrap();
        let left = EnsembleStats::merge_tree(parts[..7].to_vec(), 2).unwrap();
        let right = EnsembleStats::merge_tree(parts[7..].to_vec(), 2).unwrap();
        let joined = left.merge(&right).unwrap();
        // Independent single pass over the same samples.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sum_e2 = 0.0;
        let mut n = 0.0;
        for _ in 0..20 * 16 {
            let mut s = TrajectoryState::zeros(5);
            for z in s.a.iter_mut().chain(s.b.iter_mut()) {
                *z = Complex64::new(rng.random::<f64>() - 0.3, rng.random::<f64>() * 2.0);
            }
            sum_e2 += (s.a[3] + s.a[1].conj()).norm_sqr();
            n += 1.0;
        }
        for k in -2..=2 {
            for f in [Field::ERe, Field::ENorm2, Field::QIm, Field::BNorm2] {
                let x = whole.mean(k, f).unwrap();
                let y = joined.mean(k, f).unwrap();
                assert!(rel_close(x, y, 1e-10), "{k} {f:?} {x} {y}");
            }
        }
        assert!(rel_close(whole.mean(1, Field::ENorm2).unwrap(), sum_e2 / n, 1e-10));
        assert_eq!(whole.blocks().len(), 40);
    }

    #[test]
    fn mirrored_modes_share_variance_exactly() {
        let s = EnsembleStats::merge_tree(synthetic(0..6, 12, 5), 2).unwrap();
        for k in 1..=2 {
            assert_eq!(s.variance_e(k).unwrap(), s.variance_e(-k).unwrap());
            assert_eq!(s.variance_q(k).unwrap(), s.variance_q(-k).unwrap());
        }
    }

    #[test]
    fn block_split() {
        let mut rec = TrajectoryRecorder::new(0, 9, 7, 3);
        for _ in 0..7 {
            rec.record(&TrajectoryState::zeros(1));
        }
        let s = rec.finish();
        let sizes: Vec<_> = s.blocks().iter().map(|b| b.samples).collect();
        assert_eq!(sizes, vec![2, 2, 3]);
        assert_eq!(s.count(), 7);
        assert_eq!(s.blocks()[2].key, (9, 2));
    }

    #[test]
    fn paired_error_cancels_common_noise() {
        let s = EnsembleStats::merge_tree(synthetic(0..50, 8, 11), 2).unwrap();
        let (v, infl) = s.variance_with_influence(0, false).unwrap();
        let single = s.block_error(&infl);
        let paired = s.paired_block_error(&s, &infl, |b| -infl(b));
        assert!(v > 0.0 && single > 0.0);
        assert!(paired.abs() < 1e-12 * single);
    }

    proptest! {
        #[test]
        fn merge_is_associative(seed in any::<u64>(), cut1 in 1usize..5, cut2 in 5usize..9) {
            let parts = synthetic(0..10, 6, seed);
            let a = EnsembleStats::merge_tree(parts[..cut1].to_vec(), 2).unwrap();
            let b = EnsembleStats::merge_tree(parts[cut1..cut2].to_vec(), 2).unwrap();
            let c = EnsembleStats::merge_tree(parts[cut2..].to_vec(), 2).unwrap();
            let left = a.clone().merge(&b).unwrap().merge(&c).unwrap();
            let right = a.merge(&b.merge(&c).unwrap()).unwrap();
            prop_assert_eq!(left.count(), right.count());
            prop_assert_eq!(left.blocks(), right.blocks());
            for k in -2..=2i64 {
                let (x, y) = (left.variance_e(k).unwrap().value, right.variance_e(k).unwrap().value);
                prop_assert!(rel_close(x, y, 1e-10));
                prop_assert!(x >= 0.0);
                let (x, y) = (left.variance_q(k).unwrap().value, right.variance_q(k).unwrap().value);
                prop_assert!(rel_close(x, y, 1e-10));
                prop_assert!(x >= 0.0);
            }
        }
    }
}
