//! Knowledge/guess mixture model behind rotation-consistent accuracy.
//!
//! A model either knows a question (probability `theta`) and then answers
//! each rotation correctly with probability `r`, or guesses and is correct
//! with probability `g`. Rotations are conditionally independent, so
//!
//! ```text
//! RE     = θ r⁴ + (1 − θ) g⁴
//! VE-bar = θ r  + (1 − θ) g
//! MA     = θ (1 − r)⁴ + (1 − θ)(1 − g)⁴
//! ```
//!
//! [`solve`] inverts this map on the ordered domain `g < VE-bar < r`.
//! [`oracle_grid_solve`] is an independent brute-force check.

mod cubic;
mod forward;
mod oracle;
mod secant;
mod solve;

pub use cubic::{cubic_discriminant, interpolate_cubic};
pub use forward::{adjusted_accuracy, forward};
pub use oracle::{oracle_grid_solve, OracleFit, OracleVerdict};
pub use secant::{secant_residual, solve_r_given_g};
pub use solve::{solve, Classification, Selection, SolveOptions, SolveResult};

use thiserror::Error;

use crate::aggregation::ObservedStats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("{name} = {value} is outside [0, 1]")]
    InputOutOfRange { name: &'static str, value: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no r in (g, 1] satisfies the secant equation")]
    NoRoot,
    #[error("statistics violate the Jensen bound: {0}")]
    InconsistentStats(String),
    #[error("grid resolution {0} is below the minimum of 100")]
    ResolutionTooLow(usize),
}

/// The three observed rates the solver consumes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatTriple {
    pub re: f64,
    pub ve_bar: f64,
    pub ma: f64,
}

impl StatTriple {
    pub fn new(re: f64, ve_bar: f64, ma: f64) -> Self {
        StatTriple { re, ve_bar, ma }
    }
}

impl From<&ObservedStats> for StatTriple {
    fn from(s: &ObservedStats) -> Self {
        StatTriple::new(s.re, s.ve_bar, s.ma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReliabilityParams {
    pub theta: f64,
    pub r: f64,
    pub g: f64,
    pub a_adj: f64,
}

impl ReliabilityParams {
    pub fn new(theta: f64, r: f64, g: f64) -> Self {
        ReliabilityParams {
            theta,
            r,
            g,
            a_adj: theta * r,
        }
    }

    /// Largest absolute gap between the implied and the given statistics.
    pub fn max_residual(&self, stats: &StatTriple) -> f64 {
        let implied = forward::forward_unchecked(self.theta, self.r, self.g);
        (implied.re - stats.re)
            .abs()
            .max((implied.ve_bar - stats.ve_bar).abs())
            .max((implied.ma - stats.ma).abs())
    }

    pub fn max_abs_diff(&self, other: &ReliabilityParams) -> f64 {
        (self.theta - other.theta)
            .abs()
            .max((self.r - other.r).abs())
            .max((self.g - other.g).abs())
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ReliabilityError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ReliabilityError::InputOutOfRange { name, value })
    }
}
