//! Numerical toolkit for extreme value limits under the free
//! max-convolution: the limit laws themselves, n-fold max powers,
//! Stein-type bounds on the Kolmogorov distance, and the worked families
//! that attain the exact 1/n rate.

pub mod distributions;
pub mod error;
pub mod families;
pub mod maxconv;
pub mod metrics;
pub mod numerics;
pub mod stein;

pub use distributions::{Calculus, Cdf, ExtremeValueLaw, RealFn, Regime, TabulatedCdf};
pub use error::{Error, Result};
pub use families::WorkedFamily;
pub use maxconv::NormingSequence;
pub use metrics::ConvergenceRow;
pub use numerics::{Interval, Side, Tolerance};
pub use stein::{BoundReport, DensityProfile, SteinSolution, ValidationReport};
