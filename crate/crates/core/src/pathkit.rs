//! Piecewise-linear paths, seeded Brownian generation and convex penalties.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Slopes are clamped to this magnitude before a penalty is evaluated.
pub const SLOPE_CLAMP: f64 = 1e150;

/// A continuous path given by its values on a strictly increasing time grid,
/// linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return invalid(format!(
                "times and values differ in length ({} vs {})",
                times.len(),
                values.len()
            ));
        }
        if times.len() < 2 {
            return invalid("a path needs at least two grid points");
        }
        if times.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return invalid("path contains non-finite entries");
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return invalid(format!("times not strictly increasing at index {}", i + 1));
        }
        Ok(Self { times, values })
    }

    /// Builds a path on an existing grid without re-validating the times.
    pub(crate) fn with_grid_of(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.times.len());
        Self {
            times: self.times.clone(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Value at time `t`, by linear interpolation. Times outside the grid are
    /// clamped to the nearest endpoint.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Slope of each grid segment.
    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
    }

    /// The sub-path on grid indices `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        if last >= self.len() || first >= last {
            return invalid(format!(
                "slice {first}..={last} invalid for a path of {} points",
                self.len()
            ));
        }
        Ok(Self {
            times: self.times[first..=last].to_vec(),
            values: self.values[first..=last].to_vec(),
        })
    }

    /// Adds `shift` to every value.
    pub fn shifted(&self, shift: f64) -> Self {
        self.with_grid_of(self.values.iter().map(|v| v + shift).collect())
    }

    /// Multiplies every value by `factor`.
    pub fn scaled_values(&self, factor: f64) -> Self {
        self.with_grid_of(self.values.iter().map(|v| v * factor).collect())
    }

    /// Brownian rescaling `t -> lambda * w(t / lambda^2)`, realized on the
    /// rescaled grid.
    pub fn brownian_rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return invalid("rescaling factor must be positive and finite");
        }
        let l2 = lambda * lambda;
        Self::new(
            self.times.iter().map(|t| t * l2).collect(),
            self.values.iter().map(|v| v * lambda).collect(),
        )
    }

    /// True when both paths live on the same time grid (up to rounding).
    pub fn same_grid(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())))
    }
}

/// Convex even penalty `c` applied to path slopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltySpec {
    /// `c(x) = x^2`
    Quadratic,
    /// `c(x) = |x|^alpha`, `alpha > 1`
    Power(f64),
    /// `c(x) = sqrt(1 + x^2)`
    Sqrt1p,
}

impl PenaltySpec {
    pub fn power(alpha: f64) -> Result<Self> {
        let p = PenaltySpec::Power(alpha);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltySpec::Power(a) if !(a > 1.0) || !a.is_finite() => {
                invalid(format!("power penalty needs an exponent > 1, got {a}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_strictly_convex(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(-SLOPE_CLAMP, SLOPE_CLAMP);
        match *self {
            PenaltySpec::Quadratic => x * x,
            PenaltySpec::Power(a) => x.abs().powf(a),
            PenaltySpec::Sqrt1p => x.hypot(1.0),
        }
    }

    /// `c'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(-SLOPE_CLAMP, SLOPE_CLAMP);
        match *self {
            PenaltySpec::Quadratic => 2.0 * x,
            PenaltySpec::Power(a) => a * x.signum() * x.abs().powf(a - 1.0),
            PenaltySpec::Sqrt1p => x / x.hypot(1.0),
        }
    }

    /// `c''(x)`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let x = x.clamp(-SLOPE_CLAMP, SLOPE_CLAMP);
        match *self {
            PenaltySpec::Quadratic => 2.0,
            PenaltySpec::Power(a) => a * (a - 1.0) * x.abs().powf(a - 2.0),
            PenaltySpec::Sqrt1p => {
                let r = x.hypot(1.0);
                1.0 / (r * r * r)
            }
        }
    }

    /// Short name used in CSV column headers (`energy_<name>`).
    pub fn name(&self) -> String {
        match *self {
            PenaltySpec::Quadratic => "quadratic".to_string(),
            PenaltySpec::Power(a) => format!("power{a}"),
            PenaltySpec::Sqrt1p => "sqrt1p".to_string(),
        }
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PenaltySpec {
    type Err = Error;

    /// Accepts `quadratic`, `sqrt1p`, `power<alpha>` and `power:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "quadratic" => Ok(PenaltySpec::Quadratic),
            "sqrt1p" => Ok(PenaltySpec::Sqrt1p),
            _ => {
                let rest = s
                    .strip_prefix("power")
                    .ok_or_else(|| Error::Parse(format!("unknown penalty '{s}'")))?;
                let rest = rest.strip_prefix(':').unwrap_or(rest);
                let alpha: f64 = rest
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad power exponent in '{s}'")))?;
                PenaltySpec::power(alpha)
            }
        }
    }
}

impl Serialize for PenaltySpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for PenaltySpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `sum_i c(slope_i) * gap_i` over the grid segments of `path`.
pub fn energy(path: &PiecewiseLinearPath, penalty: &PenaltySpec) -> f64 {
    path.times
        .windows(2)
        .zip(path.values.windows(2))
        .map(|(t, v)| {
            let gap = t[1] - t[0];
            penalty.eval((v[1] - v[0]) / gap) * gap
        })
        .sum()
}

/// Maximum absolute difference of two paths sharing a grid. For
/// piecewise-linear paths on a common grid this is the exact supremum.
pub fn sup_distance(a: &PiecewiseLinearPath, b: &PiecewiseLinearPath) -> Result<f64> {
    if !a.same_grid(b) {
        return invalid("sup_distance needs paths on the same grid");
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
}

/// Random stream for replicate `stream` of master seed `seed`.
///
/// ChaCha8 keyed by the seed with the replicate index as stream id, so every
/// replicate can be regenerated on its own regardless of execution order.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform grid `{0, dt, 2dt, ..., T}` whose last point is exactly `T`.
pub fn uniform_grid(horizon: f64, step: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid(format!("horizon must be positive, got {horizon}"));
    }
    if !(step > 0.0) || !step.is_finite() {
        return invalid(format!("step must be positive, got {step}"));
    }
    if step > horizon {
        return invalid(format!("step {step} exceeds horizon {horizon}"));
    }
    let ratio = horizon / step;
    let full = (ratio + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=full).map(|k| k as f64 * step).collect();
    let last = times[full];
    if horizon - last > 1e-9 * step {
        times.push(horizon);
    } else {
        times[full] = horizon;
    }
    Ok(times)
}

/// Standard Brownian path on `[0, horizon]` sampled every `step`, driven by
/// `rng`. Gaussian increments come from the ziggurat sampler of `rand_distr`.
pub fn generate_brownian_with<R: Rng + ?Sized>(
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> Result<PiecewiseLinearPath> {
    let times = uniform_grid(horizon, step)?;
    let mut values = Vec::with_capacity(times.len());
    let mut level = 0.0;
    values.push(level);
    for w in times.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        level += (w[1] - w[0]).sqrt() * z;
        values.push(level);
    }
    Ok(PiecewiseLinearPath { times, values })
}

/// Seeded Brownian path; identical arguments give a bit-identical path.
pub fn generate_brownian(horizon: f64, step: f64, seed: u64) -> Result<PiecewiseLinearPath> {
    generate_brownian_with(horizon, step, &mut replicate_rng(seed, 0))
}
