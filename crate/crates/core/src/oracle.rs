//! Brute-force reference minimizer for small tube problems.
//!
//! Minimizes `sum c((phi[i+1] - phi[i]) / gap[i]) * gap[i]` over the box
//! `phi[i] in [w[i] - h/2, w[i] + h/2]` by scaled gradient projection:
//! projected-Newton steps on the tridiagonal Hessian with a unit initial step
//! and Armijo backtracking, falling back to plain projected gradient when the
//! scaled step fails. It shares no code with the funnel solver and is only
//! meant for desk-scale validation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pathkit::{replicate_rng, sup_distance, PenaltySpec, PiecewiseLinearPath};
use crate::tautstring::{solve, BoundaryCondition, Endpoint, TautStringResult, TubeProblem};

pub const MAX_GRID: usize = 512;
pub const MAX_ITERATIONS: u64 = 10_000_000;
pub const ARMIJO: f64 = 1e-4;
pub const SHRINK: f64 = 0.5;

const STEP_MIN: f64 = 1e-30;
/// Coordinates within `ACTIVE_MARGIN * h` of a bound, with the gradient
/// pushing outward, are held to the diagonal step.
const ACTIVE_MARGIN: f64 = 1e-3;
const CURVATURE_CAP: f64 = 1e150;

struct Bounds<'a> {
    lower: &'a [f64],
    upper: &'a [f64],
}

/// Gradient tolerance for the oracle so that its minimizer is accurate to
/// roughly `sup_tol` in sup-distance.
///
/// Power penalties with exponent above two are flat at zero slope, so the
/// gradient has to be driven down to `alpha * (sup_tol / 10)^(alpha - 1)`.
pub fn tolerance_for(penalty: &PenaltySpec, sup_tol: f64) -> f64 {
    let base: f64 = 1e-12;
    match *penalty {
        PenaltySpec::Power(a) if a > 2.0 => base.min(a * (0.1 * sup_tol).powf(a - 1.0)),
        _ => base,
    }
}

/// Convergence record of one oracle run.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub result: TautStringResult,
    pub iterations: u64,
    /// Largest projected-gradient component at termination.
    pub projected_gradient: f64,
    /// Final gradient of the objective (unprojected).
    pub gradient: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Objective after every accepted step; only filled when tracing.
    pub objectives: Vec<f64>,
}

struct Objective<'a> {
    gaps: Vec<f64>,
    penalty: &'a PenaltySpec,
}

impl Objective<'_> {
    fn slopes(&self, x: &[f64]) -> Vec<f64> {
        x.windows(2)
            .zip(&self.gaps)
            .map(|(w, g)| (w[1] - w[0]) / g)
            .collect()
    }

    fn value(&self, slopes: &[f64]) -> f64 {
        slopes
            .iter()
            .zip(&self.gaps)
            .map(|(s, g)| self.penalty.eval(*s) * g)
            .sum()
    }

    fn gradient(&self, slopes: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for (j, s) in slopes.iter().enumerate() {
            let d = self.penalty.derivative(*s);
            out[j] -= d;
            out[j + 1] += d;
        }
    }

    /// Objective change for the move `x -> x + step`, computed per segment
    /// from the slope increment so that small steps do not cancel.
    fn change(&self, slopes: &[f64], step: &[f64]) -> f64 {
        slopes
            .iter()
            .zip(step.windows(2))
            .zip(&self.gaps)
            .map(|((s, d), g)| {
                let ds = (d[1] - d[0]) / g;
                if ds == 0.0 {
                    0.0
                } else {
                    penalty_increment(self.penalty, *s, ds) * g
                }
            })
            .sum()
    }

    /// Curvature `c''(s_j) / gap_j` of every segment, capped where the
    /// penalty is singular at zero slope.
    fn curvatures(&self, slopes: &[f64]) -> Vec<f64> {
        slopes
            .iter()
            .zip(&self.gaps)
            .map(|(s, g)| {
                let c = self.penalty.second_derivative(*s) / g;
                if c.is_finite() {
                    c
                } else {
                    CURVATURE_CAP
                }
            })
            .collect()
    }

    /// Projected-Newton direction: coordinates pinned at a bound with the
    /// gradient pointing outward move along the diagonally scaled gradient,
    /// the rest solve the reduced tridiagonal Newton system. Returns the
    /// largest diagonal Hessian entry.
    fn scaled_direction(
        &self,
        x: &[f64],
        slopes: &[f64],
        grad: &[f64],
        bounds: &Bounds<'_>,
        width: f64,
        out: &mut [f64],
    ) -> f64 {
        let n = x.len();
        let curv = self.curvatures(slopes);
        let mut diag = vec![0.0; n];
        for (j, c) in curv.iter().enumerate() {
            diag[j] += c;
            diag[j + 1] += c;
        }
        let diag_max = diag.iter().fold(0.0_f64, |m, d| m.max(*d));
        let (lower, upper) = (bounds.lower, bounds.upper);
        let reach = (0..n).fold(0.0_f64, |m, i| {
            m.max((x[i] - (x[i] - grad[i]).clamp(lower[i], upper[i])).abs())
        });
        let margin = reach.min(ACTIVE_MARGIN * width);
        let mut free = Vec::with_capacity(n);
        for i in 0..n {
            let pinned = lower[i] == upper[i];
            let active = pinned
                || (x[i] <= lower[i] + margin && grad[i] > 0.0)
                || (x[i] >= upper[i] - margin && grad[i] < 0.0);
            if !active {
                free.push(i);
            } else if pinned {
                out[i] = 0.0;
            } else {
                let scale = if diag[i] > 0.0 { diag[i] } else if diag_max > 0.0 { diag_max } else { 1.0 };
                out[i] = -grad[i] / scale;
            }
        }

        // Thomas algorithm on (H_FF + mu I) d = -g_F; H_FF is tridiagonal in
        // the order of `free`, coupling only grid neighbours.
        let m = free.len();
        let mut mu = if diag_max > 0.0 { 1e-14 * diag_max } else { 1.0 };
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        'retry: loop {
            for k in 0..m {
                let i = free[k];
                let sub = if k > 0 && free[k - 1] + 1 == i { -curv[i - 1] } else { 0.0 };
                let sup = if k + 1 < m && free[k + 1] == i + 1 { -curv[i] } else { 0.0 };
                let denom = diag[i] + mu - if k > 0 { sub * cp[k - 1] } else { 0.0 };
                if !(denom > 0.0) || !denom.is_finite() {
                    mu *= 100.0;
                    continue 'retry;
                }
                cp[k] = sup / denom;
                dp[k] = (-grad[i] - if k > 0 { sub * dp[k - 1] } else { 0.0 }) / denom;
            }
            break;
        }
        for k in (0..m).rev() {
            let next = if k + 1 < m { cp[k] * out[free[k + 1]] } else { 0.0 };
            out[free[k]] = dp[k] - next;
        }
        diag_max
    }

    /// Armijo backtracking along the projection arc `P(x + a d)` starting at
    /// `a = initial`; returns the slopes of the accepted point, which is left
    /// in `trial`.
    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        x: &[f64],
        slopes: &[f64],
        grad: &[f64],
        direction: &[f64],
        bounds: &Bounds<'_>,
        initial: f64,
        trial: &mut [f64],
        step: &mut [f64],
    ) -> Option<Vec<f64>> {
        let mut alpha = initial;
        while alpha >= STEP_MIN {
            let mut descent = 0.0;
            let mut moved = false;
            for i in 0..x.len() {
                trial[i] = (x[i] + alpha * direction[i]).clamp(bounds.lower[i], bounds.upper[i]);
                step[i] = trial[i] - x[i];
                descent += grad[i] * step[i];
                moved |= step[i] != 0.0;
            }
            if moved && descent < 0.0 && self.change(slopes, step) <= ARMIJO * descent {
                return Some(self.slopes(trial));
            }
            alpha *= SHRINK;
        }
        None
    }

    /// Size of the rounding error expected in gradient component `i`.
    fn rounding_floor(&self, x: &[f64], slopes: &[f64], i: usize) -> f64 {
        let mut scale = 0.0;
        let mut curvature = 0.0;
        let mut magnitude = x[i].abs();
        if i > 0 {
            scale += self.penalty.derivative(slopes[i - 1]).abs();
            curvature += self.penalty.second_derivative(slopes[i - 1]) / self.gaps[i - 1];
            magnitude = magnitude.max(x[i - 1].abs());
        }
        if i + 1 < x.len() {
            scale += self.penalty.derivative(slopes[i]).abs();
            curvature += self.penalty.second_derivative(slopes[i]) / self.gaps[i];
            magnitude = magnitude.max(x[i + 1].abs());
        }
        16.0 * f64::EPSILON * (scale + curvature * (1.0 + magnitude))
    }
}

/// `c(s + ds) - c(s)` without forming the difference of two large values.
fn penalty_increment(penalty: &PenaltySpec, s: f64, ds: f64) -> f64 {
    let t = s + ds;
    match *penalty {
        PenaltySpec::Quadratic => ds * (s + t),
        PenaltySpec::Sqrt1p => ds * (s + t) / ((1.0 + t * t).sqrt() + (1.0 + s * s).sqrt()),
        PenaltySpec::Power(alpha) => {
            let a = s.abs();
            if a == 0.0 {
                return penalty.eval(t);
            }
            let grow = if s > 0.0 && t >= 0.0 {
                ds
            } else if s < 0.0 && t <= 0.0 {
                -ds
            } else {
                t.abs() - a
            };
            a.powf(alpha) * (alpha * (grow / a).ln_1p()).exp_m1()
        }
    }
}

fn projected_component(x: f64, g: f64, lo: f64, hi: f64) -> f64 {
    if lo == hi || (x <= lo && g > 0.0) || (x >= hi && g < 0.0) {
        0.0
    } else {
        g
    }
}

/// Oracle minimizer of `problem` for `penalty`, iterating until every
/// projected-gradient component is below `tolerance` (plus the rounding floor
/// of its evaluation).
pub fn qp_oracle(
    problem: &TubeProblem,
    penalty: &PenaltySpec,
    tolerance: f64,
) -> Result<TautStringResult> {
    run(problem, penalty, tolerance, false).map(|r| r.result)
}

/// Like [`qp_oracle`] but returns the convergence record; `trace` keeps the
/// objective value of every accepted iterate.
pub fn run(
    problem: &TubeProblem,
    penalty: &PenaltySpec,
    tolerance: f64,
    trace: bool,
) -> Result<OracleRun> {
    let n = problem.path.len();
    if n > MAX_GRID {
        return Err(Error::Unsupported(format!(
            "oracle grid limited to {MAX_GRID} points, got {n}"
        )));
    }
    penalty.validate()?;
    if !(tolerance > 0.0) {
        return invalid(format!("oracle tolerance must be positive, got {tolerance}"));
    }

    let mut lower = problem.lower();
    let mut upper = problem.upper();
    for (end, i) in [(problem.boundary.left, 0), (problem.boundary.right, n - 1)] {
        if let Endpoint::Fixed(v) = end {
            let v = v.clamp(lower[i], upper[i]);
            lower[i] = v;
            upper[i] = v;
        }
    }
    let objective = Objective {
        gaps: problem.path.times().windows(2).map(|t| t[1] - t[0]).collect(),
        penalty,
    };

    // Clamped midpoint of the tube.
    let mut x: Vec<f64> = problem
        .path
        .values()
        .iter()
        .zip(lower.iter().zip(&upper))
        .map(|(w, (lo, hi))| w.clamp(*lo, *hi))
        .collect();
    let mut slopes = objective.slopes(&x);
    let mut grad = vec![0.0; n];
    objective.gradient(&slopes, &mut grad);
    let mut f = objective.value(&slopes);
    let mut objectives = Vec::new();
    if trace {
        objectives.push(f);
    }

    let mut trial = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut direction = vec![0.0; n];
    let mut iterations = 0u64;

    loop {
        let mut pg_max = 0.0_f64;
        let mut converged = true;
        for i in 0..n {
            let pg = projected_component(x[i], grad[i], lower[i], upper[i]).abs();
            pg_max = pg_max.max(pg);
            if pg > tolerance + objective.rounding_floor(&x, &slopes, i) {
                converged = false;
            }
        }
        if converged {
            let result = TautStringResult::assemble(&problem.path, problem.width, x);
            return Ok(OracleRun {
                result,
                iterations,
                projected_gradient: pg_max,
                gradient: grad,
                lower,
                upper,
                objectives,
            });
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::ConvergenceFailure {
                iterations,
                projected_gradient: pg_max,
                objective: f,
            });
        }

        let box_ = Bounds { lower: &lower, upper: &upper };
        let curvature_max = objective.scaled_direction(&x, &slopes, &grad, &box_, problem.width, &mut direction);
        let mut accepted = objective.search(&x, &slopes, &grad, &direction, &box_, 1.0, &mut trial, &mut step);
        if accepted.is_none() {
            // Plain projected gradient when the scaled step fails.
            for i in 0..n {
                direction[i] = -grad[i];
            }
            let initial = if curvature_max > 0.0 { 1.0 / curvature_max } else { 1.0 };
            accepted = objective.search(&x, &slopes, &grad, &direction, &box_, initial, &mut trial, &mut step);
        }
        let Some(trial_slopes) = accepted else {
            return Err(Error::ConvergenceFailure {
                iterations,
                projected_gradient: pg_max,
                objective: f,
            });
        };

        std::mem::swap(&mut x, &mut trial);
        slopes = trial_slopes;
        objective.gradient(&slopes, &mut grad);
        f = objective.value(&slopes);
        if trace {
            objectives.push(f);
        }
        iterations += 1;
    }
}

/// Random tube instance: a Brownian-like path on an irregular grid of 2 to
/// `max_grid` points, a random width and one of four boundary kinds (both
/// fixed, left free, right free, both free).
///
/// Both-free instances get a width below the range of the path; otherwise
/// every constant in the common band is a minimizer.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_grid: usize) -> Result<TubeProblem> {
    if max_grid < 2 {
        return invalid("random instances need at least 2 grid points");
    }
    let n = rng.random_range(2..=max_grid);
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let (mut t, mut w) = (0.0, 0.0);
    for _ in 0..n {
        times.push(t);
        values.push(w);
        let gap: f64 = rng.random_range(0.1..1.9) / n as f64;
        let z: f64 = StandardNormal.sample(rng);
        t += gap;
        w += gap.sqrt() * z;
    }
    let path = PiecewiseLinearPath::new(times, values)?;
    let kind = rng.random_range(0..4);
    let (lo, hi) = path
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let range = hi - lo;
    let width = if kind == 3 {
        if range <= 0.0 {
            return random_instance(rng, max_grid);
        }
        range * rng.random_range(0.05..0.95)
    } else {
        rng.random_range(0.05..2.0)
    };
    let mut pick = |v: f64| -> Endpoint { Endpoint::Fixed(v + width * rng.random_range(-0.5..=0.5)) };
    let w = path.values();
    let boundary = match kind {
        0 => BoundaryCondition {
            left: pick(w[0]),
            right: pick(w[n - 1]),
        },
        1 => BoundaryCondition {
            left: Endpoint::Free,
            right: pick(w[n - 1]),
        },
        2 => BoundaryCondition {
            left: pick(w[0]),
            right: Endpoint::Free,
        },
        _ => BoundaryCondition::free(),
    };
    TubeProblem::new(path, width, boundary)
}

/// Outcome of one solver-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub grid: usize,
    pub width: f64,
    pub sup_distance: f64,
    /// Solver quadratic energy minus oracle quadratic energy.
    pub energy_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub instances: Vec<InstanceCheck>,
    pub max_sup_distance: f64,
    pub max_energy_gap: f64,
    pub sup_tolerance: f64,
    pub energy_tolerance: f64,
    pub pass: bool,
}

/// Compares the solver with the quadratic oracle on `count` random
/// instances; instance `k` is drawn from stream `k` of `seed`.
pub fn oracle_check(
    count: usize,
    max_grid: usize,
    seed: u64,
    sup_tolerance: f64,
    energy_tolerance: f64,
) -> Result<OracleCheckReport> {
    let mut instances = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let problem = random_instance(&mut replicate_rng(seed, k), max_grid)?;
        let solved = solve(&problem);
        let reference = qp_oracle(&problem, &PenaltySpec::Quadratic, tolerance_for(&PenaltySpec::Quadratic, sup_tolerance))?;
        let sup = sup_distance(&solved.string, &reference.string)?;
        let gap = solved.quadratic_energy() - reference.quadratic_energy();
        instances.push(InstanceCheck {
            grid: problem.path.len(),
            width: problem.width,
            sup_distance: sup,
            energy_gap: gap,
            pass: sup <= sup_tolerance && gap.abs() <= energy_tolerance,
        });
    }
    let max_sup_distance = instances.iter().fold(0.0_f64, |m, c| m.max(c.sup_distance));
    let max_energy_gap = instances.iter().fold(0.0_f64, |m, c| m.max(c.energy_gap.abs()));
    Ok(OracleCheckReport {
        pass: instances.iter().all(|c| c.pass),
        instances,
        max_sup_distance,
        max_energy_gap,
        sup_tolerance,
        energy_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathkit::PiecewiseLinearPath;
    use crate::tautstring::BoundaryCondition;

    #[test]
    fn flat_instance() {
        let w = PiecewiseLinearPath::new(vec![0.0, 0.5, 1.0], vec![0.0; 3]).unwrap();
        let p = TubeProblem::pinned(w, 1.0).unwrap();
        let r = qp_oracle(&p, &PenaltySpec::Quadratic, 1e-12).unwrap();
        assert_eq!(r.string.values(), &[0.0; 3]);
    }

    #[test]
    fn chord_instance() {
        let w = PiecewiseLinearPath::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 2.0]).unwrap();
        let p = TubeProblem::new(w, 1.0, BoundaryCondition::fixed(0.0, 2.0)).unwrap();
        let r = qp_oracle(&p, &PenaltySpec::Quadratic, 1e-12).unwrap();
        for (x, y) in r.string.values().iter().zip([0.0, 1.0, 2.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_large_grids_and_bad_arguments() {
        let n = MAX_GRID + 1;
        let w = PiecewiseLinearPath::new((0..n).map(|i| i as f64).collect(), vec![0.0; n]).unwrap();
        let p = TubeProblem::pinned(w, 1.0).unwrap();
        assert!(matches!(
            qp_oracle(&p, &PenaltySpec::Quadratic, 1e-9),
            Err(Error::Unsupported(_))
        ));
        let w = PiecewiseLinearPath::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let p = TubeProblem::pinned(w, 1.0).unwrap();
        assert!(qp_oracle(&p, &PenaltySpec::Power(1.0), 1e-9).is_err());
        assert!(qp_oracle(&p, &PenaltySpec::Quadratic, 0.0).is_err());
    }
}
