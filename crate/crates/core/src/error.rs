use alloc::boxed::Box;
use core::fmt;

use crate::mild::ContractionReport;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Lebesgue exponent below one (or NaN) was supplied.
    InvalidExponent(f64),
    /// Grid parameters violate the grid invariants.
    InvalidGrid(&'static str),
    /// Two fields that must share a grid do not.
    GridMismatch,
    /// A propagator was asked for a non-positive time.
    NonPositiveTime(f64),
    /// The kernel profile was evaluated at a non-positive argument.
    NonPositiveArgument(f64),
    /// An atom sits on the symmetry axis and has not been mollified.
    BoundaryAtom { weight: f64, z: f64 },
    /// A circle atom or half-plane atom with negative radius.
    NegativeRadius(f64),
    /// A caller-supplied parameter is out of its admissible range.
    InvalidParameter(&'static str),
    /// An iterative solve stopped above its tolerance.
    SolverStalled { residual: f64, iterations: usize },
    /// The explicit advection step would violate the CFL bound.
    Cfl { number: f64, limit: f64 },
    /// A time-node index outside the trajectory.
    NodeOutOfRange { k: usize, len: usize },
    /// Power-law fit input contained a non-positive sample.
    NonPositiveSample { index: usize, value: f64 },
    /// Power-law fit input does not span enough points or decades.
    InsufficientSamples { points: usize, decades: f64 },
    /// A computation produced NaN or infinity.
    NonFinite(&'static str),
    /// Picard increments grew for three consecutive sweeps.
    PicardDiverged(Box<ContractionReport>),
    /// Picard hit its sweep limit before meeting the tolerance.
    PicardNotConverged(Box<ContractionReport>),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidExponent(p) => write!(f, "Lebesgue exponent must be >= 1, got {p}"),
            Error::InvalidGrid(why) => write!(f, "invalid grid: {why}"),
            Error::GridMismatch => write!(f, "fields live on different grids"),
            Error::NonPositiveTime(t) => write!(f, "propagator time must be positive, got {t}"),
            Error::NonPositiveArgument(x) => write!(f, "argument must be positive, got {x}"),
            Error::BoundaryAtom { weight, z } => write!(
                f,
                "atom of weight {weight} at (r=0, z={z}) lies on the axis; mollify it first"
            ),
            Error::NegativeRadius(r) => write!(f, "negative radius {r}"),
            Error::InvalidParameter(why) => write!(f, "invalid parameter: {why}"),
            Error::SolverStalled { residual, iterations } => write!(
                f,
                "linear solve stalled at relative residual {residual:e} after {iterations} iterations"
            ),
            Error::Cfl { number, limit } => {
                write!(f, "CFL number {number:.4} exceeds limit {limit}")
            }
            Error::NodeOutOfRange { k, len } => {
                write!(f, "time node {k} out of range (trajectory has {len} nodes)")
            }
            Error::NonPositiveSample { index, value } => {
                write!(f, "sample {index} is not positive ({value}); cannot take logarithms")
            }
            Error::InsufficientSamples { points, decades } => write!(
                f,
                "fit needs >= 5 points over >= 1 decade, got {points} points over {decades:.2} decades"
            ),
            Error::NonFinite(what) => write!(f, "non-finite values in {what}"),
            Error::PicardDiverged(report) => write!(
                f,
                "Picard iteration diverged after {} sweeps (last increment ratio {:.3}); \
                 the atomic part of the data is too large for the contraction at this resolution",
                report.sweeps,
                report.ratios.last().copied().unwrap_or(f64::NAN)
            ),
            Error::PicardNotConverged(report) => write!(
                f,
                "Picard iteration stopped after {} sweeps at increment {:e}",
                report.sweeps,
                report.increments.last().copied().unwrap_or(f64::NAN)
            ),
        }
    }
}

impl core::error::Error for Error {}
