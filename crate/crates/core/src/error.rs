use thiserror::Error;

/// A single violated invariant, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("mode index {index} outside grid of half-width {half_width}")]
    IndexOutOfGrid { index: i64, half_width: usize },

    #[error("invalid configuration: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(
        "trajectory {trajectory} (seed {seed}) diverged at t={time}: non-finite {field}[{mode}]"
    )]
    NonFinite {
        trajectory: u64,
        seed: u64,
        time: f64,
        field: &'static str,
        mode: i64,
    },

    #[error("{aborted} of {total} trajectories aborted (limit is 0.1%)")]
    TooManyAborts { aborted: usize, total: usize },

    #[error("grid mismatch: half-width {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("baseline variance for {field} at k={k} is consistent with zero")]
    InvalidBaseline { field: &'static str, k: i64 },

    #[error("empty statistics: {0}")]
    Empty(&'static str),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
