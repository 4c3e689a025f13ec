//! Fixed inputs shared by the benchmarks.

use taut_core::pathkit::generate_brownian;
use taut_core::{PiecewiseLinearPath, TubeProblem};

pub const WIDTH: f64 = 1.0;
pub const SEED: u64 = 7;

/// Brownian path on `[0, horizon]` with step `1e-3`.
pub fn brownian(horizon: f64) -> PiecewiseLinearPath {
    generate_brownian(horizon, 1e-3, SEED).expect("valid grid")
}

pub fn pinned_problem(horizon: f64) -> TubeProblem {
    TubeProblem::pinned(brownian(horizon), WIDTH).expect("pinned ends are admissible")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(super::brownian(1.0), super::brownian(1.0));
        assert_eq!(super::pinned_problem(1.0).path.len(), 1001);
    }
}
