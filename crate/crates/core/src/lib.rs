//! Taut strings of sampled paths and the renewal structure of the Brownian
//! taut string.
//!
//! The crate is organised bottom-up:
//!
//! * [`pathkit`] – piecewise-linear paths, seeded Brownian generation,
//!   convex penalties and energy functionals.
//! * [`tautstring`] – linear-time solver for the tube-constrained
//!   minimization (fixed or free ends) and its structural checks.
//! * [`oracle`] – an independent projected-gradient minimizer used to
//!   validate the solver on small instances.
//! * [`extrema`] – h-extrema stopping times, the h/4 crossing skeleton and
//!   the free-knot interpolant.
//! * [`renewal`] – block minimizers, renewal sampling of `(tau, E)`, the
//!   LLN/CLT estimators and the randomly-indexed CLT simulator.
//! * [`stats`] – summary statistics and the Kolmogorov–Smirnov normality test.
//! * [`io`] – CSV/JSON artifact formats.

pub mod error;
pub mod extrema;
pub mod io;
pub mod oracle;
pub mod pathkit;
pub mod renewal;
pub mod stats;
pub mod tautstring;

pub use error::{Error, Result};
pub use extrema::{CrossingSkeleton, HExtremaDecomposition};
pub use pathkit::{PenaltySpec, PiecewiseLinearPath};
pub use renewal::{EstimatorReport, RenewalSample};
pub use tautstring::{BoundaryCondition, Endpoint, Side, TautStringResult, TubeProblem};
