use crate::error::{Error, Result};

/// How momentum sums that leave the grid are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WrapPolicy {
    /// Fold indices back modulo the number of modes.
    #[default]
    Wrap,
    /// Drop every term with an out-of-range index.
    Truncate,
}

/// Symmetric one-dimensional momentum grid `{-M, ..., 0, ..., M}`.
///
/// Mode `k` is stored at position `k + M` in every per-mode array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeGrid {
    half_width: usize,
    wrap: WrapPolicy,
}

impl ModeGrid {
    pub fn new(half_width: usize, wrap: WrapPolicy) -> Self {
        Self { half_width, wrap }
    }

    /// Grid with `n` modes; `n` must be odd and positive.
    pub fn from_mode_count(n: usize, wrap: WrapPolicy) -> Result<Self> {
        if n % 2 == 1 {
            Ok(Self::new(n / 2, wrap))
        } else {
            Err(Error::Validation(vec![crate::error::Violation {
                field: "modes",
                message: format!("mode count must be odd, got {n}"),
            }]))
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn wrap_policy(&self) -> WrapPolicy {
        self.wrap
    }

    pub fn with_wrap_policy(self, wrap: WrapPolicy) -> Self {
        Self { wrap, ..self }
    }

    /// Number of modes `N = 2M + 1`.
    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i64) -> bool {
        k.unsigned_abs() as usize <= self.half_width
    }

    /// All momenta in storage order.
    pub fn momenta(&self) -> impl Iterator<Item = i64> + Clone {
        let m = self.half_width as i64;
        -m..=m
    }

    pub fn position(&self, k: i64) -> Result<usize> {
        if self.contains(k) {
            Ok((k + self.half_width as i64) as usize)
        } else {
            Err(Error::IndexOutOfGrid {
                index: k,
                half_width: self.half_width,
            })
        }
    }

    pub fn momentum(&self, pos: usize) -> i64 {
        pos as i64 - self.half_width as i64
    }

    /// Storage position of `-k` given the position of `k`.
    #[inline]
    pub fn mirror(&self, pos: usize) -> usize {
        self.len() - 1 - pos
    }

    /// Resolve an arbitrary momentum onto the grid under the wrap policy.
    /// `None` means the term is dropped.
    pub fn resolve(&self, k: i64) -> Option<usize> {
        match self.wrap {
            WrapPolicy::Wrap => {
                let n = self.len() as i64;
                let m = self.half_width as i64;
                Some((k + m).rem_euclid(n) as usize)
            }
            WrapPolicy::Truncate => self.position(k).ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_has_eleven_modes() {
        let g = ModeGrid::new(5, WrapPolicy::Wrap);
        assert_eq!(g.len(), 11);
        assert_eq!(g.momenta().collect::<Vec<_>>().first(), Some(&-5));
        assert_eq!(g.position(0).unwrap(), 5);
        assert_eq!(g.mirror(g.position(3).unwrap()), g.position(-3).unwrap());
    }

    #[test]
    fn even_mode_count_is_rejected() {
        assert!(ModeGrid::from_mode_count(10, WrapPolicy::Wrap).is_err());
        assert!(ModeGrid::from_mode_count(0, WrapPolicy::Wrap).is_err());
        assert_eq!(
            ModeGrid::from_mode_count(11, WrapPolicy::Wrap).unwrap().half_width(),
            5
        );
    }

    #[test]
    fn out_of_grid_index_is_an_error() {
        let g = ModeGrid::new(2, WrapPolicy::Wrap);
        assert!(matches!(
            g.position(3),
            Err(Error::IndexOutOfGrid { index: 3, .. })
        ));
    }

    #[test]
    fn wrap_folds_and_truncate_drops() {
        let w = ModeGrid::new(5, WrapPolicy::Wrap);
        assert_eq!(w.resolve(6), w.position(-5).ok());
        assert_eq!(w.resolve(-7), w.position(4).ok());
        let t = w.with_wrap_policy(WrapPolicy::Truncate);
        assert_eq!(t.resolve(6), None);
        assert_eq!(t.resolve(-5), t.position(-5).ok());
    }

    #[test]
    fn single_mode_grid() {
        let g = ModeGrid::new(0, WrapPolicy::Truncate);
        assert_eq!(g.len(), 1);
        assert_eq!(g.resolve(0), Some(0));
        assert_eq!(g.with_wrap_policy(WrapPolicy::Wrap).resolve(1), Some(0));
    }
}
