//! Discrete taut string: the path through the tube `|phi - w| <= h/2` that
//! minimizes `sum c(slope) * gap` simultaneously for every convex `c`.
//!
//! The solver is a single left-to-right funnel sweep. From the current
//! anchor it keeps the greatest convex minorant of the upper tube boundary
//! and the least concave majorant of the lower one; when a new boundary point
//! closes the funnel, the front vertex of the opposite chain becomes a knot
//! and the anchor moves there. Every grid point enters and leaves each chain
//! at most once, so the sweep is linear in the grid size.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle;
use crate::pathkit::{energy, sup_distance, PenaltySpec, PiecewiseLinearPath};

/// Penalties whose energies are stored in every [`TautStringResult`].
pub const DEFAULT_PENALTIES: [PenaltySpec; 3] =
    [PenaltySpec::Quadratic, PenaltySpec::Power(4.0), PenaltySpec::Sqrt1p];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub left: Endpoint,
    pub right: Endpoint,
}

impl BoundaryCondition {
    pub fn fixed(left: f64, right: f64) -> Self {
        Self {
            left: Endpoint::Fixed(left),
            right: Endpoint::Fixed(right),
        }
    }

    pub fn free() -> Self {
        Self {
            left: Endpoint::Free,
            right: Endpoint::Free,
        }
    }

    /// `phi(start) = w(start)`, `phi(end) = w(end)`.
    pub fn pinned_to(path: &PiecewiseLinearPath) -> Self {
        let v = path.values();
        Self::fixed(v[0], v[v.len() - 1])
    }
}

/// Slack allowed when checking that a fixed endpoint lies in the tube.
fn admissibility_slack(w: f64, width: f64) -> f64 {
    1e-12 * (1.0 + w.abs() + width)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeProblem {
    pub path: PiecewiseLinearPath,
    pub width: f64,
    pub boundary: BoundaryCondition,
}

impl TubeProblem {
    pub fn new(path: PiecewiseLinearPath, width: f64, boundary: BoundaryCondition) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return invalid(format!("tube width must be positive, got {width}"));
        }
        let v = path.values();
        for (end, w) in [(boundary.left, v[0]), (boundary.right, v[v.len() - 1])] {
            if let Endpoint::Fixed(x) = end {
                if !x.is_finite() || (x - w).abs() > 0.5 * width + admissibility_slack(w, width) {
                    return invalid(format!(
                        "fixed endpoint {x} is outside the tube around {w} (h = {width})"
                    ));
                }
            }
        }
        Ok(Self {
            path,
            width,
            boundary,
        })
    }

    /// Fixed-boundary problem with `phi = w` at both ends.
    pub fn pinned(path: PiecewiseLinearPath, width: f64) -> Result<Self> {
        let boundary = BoundaryCondition::pinned_to(&path);
        Self::new(path, width, boundary)
    }

    pub fn lower(&self) -> Vec<f64> {
        let half = 0.5 * self.width;
        self.path.values().iter().map(|w| w - half).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        let half = 0.5 * self.width;
        self.path.values().iter().map(|w| w + half).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// CSV tag: `U` or `L`.
    pub fn tag(&self) -> char {
        match self {
            Side::Upper => 'U',
            Side::Lower => 'L',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knot {
    pub index: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TautStringResult {
    /// The minimizer, on the grid of the input path.
    pub string: PiecewiseLinearPath,
    pub knots: Vec<Knot>,
    pub energies: Vec<(PenaltySpec, f64)>,
    pub boundary_values: (f64, f64),
    /// The driving path and tube width the string was computed for.
    pub path: PiecewiseLinearPath,
    pub width: f64,
}

impl TautStringResult {
    pub(crate) fn assemble(path: &PiecewiseLinearPath, width: f64, values: Vec<f64>) -> Self {
        let string = path.with_grid_of(values);
        let energies = DEFAULT_PENALTIES
            .iter()
            .map(|p| (*p, energy(&string, p)))
            .collect();
        let v = string.values();
        let boundary_values = (v[0], v[v.len() - 1]);
        let mut result = Self {
            string,
            knots: Vec::new(),
            energies,
            boundary_values,
            path: path.clone(),
            width,
        };
        result.knots = contact_points(&result, default_knot_tolerance(path));
        result
    }

    /// Energy of the string for `penalty` (stored value when available).
    pub fn energy(&self, penalty: &PenaltySpec) -> f64 {
        self.energies
            .iter()
            .find(|(p, _)| p == penalty)
            .map(|(_, e)| *e)
            .unwrap_or_else(|| energy(&self.string, penalty))
    }

    pub fn quadratic_energy(&self) -> f64 {
        self.energy(&PenaltySpec::Quadratic)
    }
}

/// Default contact tolerance `1e-9 * (1 + max|w|)`.
pub fn default_knot_tolerance(path: &PiecewiseLinearPath) -> f64 {
    1e-9 * (1.0 + path.max_abs_value())
}

fn contact_points(result: &TautStringResult, tolerance: f64) -> Vec<Knot> {
    let half = 0.5 * result.width;
    result
        .string
        .values()
        .iter()
        .zip(result.path.values())
        .enumerate()
        .filter_map(|(index, (s, w))| {
            let to_upper = (s - (w + half)).abs();
            let to_lower = (s - (w - half)).abs();
            if to_upper.min(to_lower) > tolerance {
                None
            } else if to_upper <= to_lower {
                Some(Knot {
                    index,
                    side: Side::Upper,
                })
            } else {
                Some(Knot {
                    index,
                    side: Side::Lower,
                })
            }
        })
        .collect()
}

/// Grid indices (endpoints included) where the string is within `tolerance`
/// of a tube boundary, in increasing index order.
pub fn knot_points(result: &TautStringResult, tolerance: f64) -> Result<Vec<Knot>> {
    if !(tolerance >= 0.0) {
        return invalid(format!("knot tolerance must be non-negative, got {tolerance}"));
    }
    Ok(contact_points(result, tolerance))
}

#[derive(Clone, Copy, Debug)]
struct Vertex {
    t: f64,
    y: f64,
    idx: usize,
}

/// Twice the signed area of `(o, a, b)`; positive when `b` lies strictly above
/// the line through `o` and `a` (for `a.t > o.t`).
#[inline]
fn cross(o: Vertex, a: Vertex, b: Vertex) -> f64 {
    (a.t - o.t) * (b.y - o.y) - (a.y - o.y) * (b.t - o.t)
}

/// Taut string between fixed end values through the corridor
/// `lower[i] <= phi[i] <= upper[i]`. Interior bounds only are read; the end
/// bounds are replaced by `first` and `last`.
fn funnel_sweep(times: &[f64], lower: &[f64], upper: &[f64], first: f64, last: f64) -> Vec<f64> {
    let n = times.len();
    let start = Vertex {
        t: times[0],
        y: first,
        idx: 0,
    };
    let mut anchors = vec![start];
    let mut up: VecDeque<Vertex> = VecDeque::from([start]);
    let mut lo: VecDeque<Vertex> = VecDeque::from([start]);

    for i in 1..n {
        let (l, u) = if i == n - 1 {
            (last, last)
        } else {
            (lower[i], upper[i])
        };
        let t = times[i];

        let p = Vertex { t, y: u, idx: i };
        if lo.len() >= 2 && cross(lo[0], lo[1], p) < 0.0 {
            while lo.len() >= 2 && cross(lo[0], lo[1], p) < 0.0 {
                lo.pop_front();
                anchors.push(lo[0]);
            }
            up.clear();
            up.push_back(lo[0]);
            up.push_back(p);
        } else {
            while up.len() >= 2 && cross(up[up.len() - 2], up[up.len() - 1], p) <= 0.0 {
                up.pop_back();
            }
            up.push_back(p);
        }

        let q = Vertex { t, y: l, idx: i };
        if up.len() >= 2 && cross(up[0], up[1], q) > 0.0 {
            while up.len() >= 2 && cross(up[0], up[1], q) > 0.0 {
                up.pop_front();
                anchors.push(up[0]);
            }
            lo.clear();
            lo.push_back(up[0]);
            lo.push_back(q);
        } else {
            while lo.len() >= 2 && cross(lo[lo.len() - 2], lo[lo.len() - 1], q) >= 0.0 {
                lo.pop_back();
            }
            lo.push_back(q);
        }
    }
    anchors.push(Vertex {
        t: times[n - 1],
        y: last,
        idx: n - 1,
    });

    let mut values = vec![0.0; n];
    for pair in anchors.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let slope = (b.y - a.y) / (b.t - a.t);
        values[a.idx] = a.y;
        for j in a.idx + 1..b.idx {
            values[j] = a.y + slope * (times[j] - a.t);
        }
    }
    values[n - 1] = last;
    values
}

/// Optimal value at the first grid point when that end is free.
///
/// Sweeps the running intersection `[A, B]` of the tube intervals. If it
/// empties because the path rises above `B`, every admissible path crosses
/// level `B` before that point and a flat start at `B` is no more expensive;
/// symmetrically for a fall below `A`. If it never empties the string is
/// constant and the midpoint of the intersection is used.
fn free_start_value(lower: &[f64], upper: &[f64], far_end: Option<f64>) -> f64 {
    let n = lower.len();
    let (mut a, mut b) = (lower[0], upper[0]);
    for i in 1..n {
        let (l, u) = match far_end {
            Some(v) if i == n - 1 => (v, v),
            _ => (lower[i], upper[i]),
        };
        if l > b {
            return b;
        }
        if u < a {
            return a;
        }
        a = a.max(l);
        b = b.min(u);
    }
    0.5 * (a + b)
}

fn fixed_value(end: Endpoint) -> Option<f64> {
    match end {
        Endpoint::Fixed(v) => Some(v),
        Endpoint::Free => None,
    }
}

/// Values of the taut string on the grid of `problem.path`.
///
/// This is the allocation-light entry point used by Monte Carlo drivers;
/// [`solve`] wraps it with knots and energies.
pub fn solve_values(problem: &TubeProblem) -> Vec<f64> {
    let lower = problem.lower();
    let upper = problem.upper();
    let (left, right) = (problem.boundary.left, problem.boundary.right);
    let n = lower.len();
    let clamp_end = |v: f64, i: usize| v.clamp(lower[i], upper[i]);

    let first = match fixed_value(left) {
        Some(v) => clamp_end(v, 0),
        None => free_start_value(&lower, &upper, fixed_value(right)),
    };
    let last = match fixed_value(right) {
        Some(v) => clamp_end(v, n - 1),
        None => {
            let rl: Vec<f64> = lower.iter().rev().copied().collect();
            let ru: Vec<f64> = upper.iter().rev().copied().collect();
            free_start_value(&rl, &ru, fixed_value(left))
        }
    };
    funnel_sweep(problem.path.times(), &lower, &upper, first, last)
}

/// Solves the tube problem and returns the string with knots and energies.
pub fn solve(problem: &TubeProblem) -> TautStringResult {
    let values = solve_values(problem);
    TautStringResult::assemble(&problem.path, problem.width, values)
}

/// Grid indices where the string bends against the wrong side of the tube.
///
/// Where the slope increases by more than `slope_tol` the string must lie on
/// the upper boundary, where it decreases on the lower one, each within
/// `contact_rel * (1 + |w|)`.
pub fn bend_violations(result: &TautStringResult, slope_tol: f64, contact_rel: f64) -> Vec<usize> {
    let half = 0.5 * result.width;
    let slopes: Vec<f64> = result.string.slopes().collect();
    let s = result.string.values();
    let w = result.path.values();
    (1..s.len() - 1)
        .filter(|&i| {
            let bend = slopes[i] - slopes[i - 1];
            let tol = contact_rel * (1.0 + w[i].abs());
            if bend > slope_tol {
                (s[i] - (w[i] + half)).abs() > tol
            } else if bend < -slope_tol {
                (s[i] - (w[i] - half)).abs() > tol
            } else {
                false
            }
        })
        .collect()
}

/// Outcome of [`verify_penalty_invariance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyInvarianceReport {
    /// Largest sup-distance between any two of the solver output and the
    /// per-penalty oracle minimizers.
    pub max_pairwise_distance: f64,
    /// Sup-distance from the solver output to each oracle minimizer.
    pub solver_to_oracle: Vec<(PenaltySpec, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Cross-checks the (penalty-free) solver against oracle minimizers computed
/// separately for every penalty in `penalties`.
pub fn verify_penalty_invariance(
    problem: &TubeProblem,
    penalties: &[PenaltySpec],
    tolerance: f64,
) -> Result<PenaltyInvarianceReport> {
    for p in penalties {
        p.validate()?;
    }
    if !(tolerance >= 0.0) {
        return invalid("tolerance must be non-negative");
    }
    let solved = solve(problem);
    let mut candidates = vec![solved.string.clone()];
    let mut solver_to_oracle = Vec::with_capacity(penalties.len());
    for p in penalties {
        let grad_tol = oracle::tolerance_for(p, tolerance);
        let o = oracle::qp_oracle(problem, p, grad_tol)?;
        solver_to_oracle.push((*p, sup_distance(&solved.string, &o.string)?));
        candidates.push(o.string);
    }
    let mut max_pairwise_distance = 0.0_f64;
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            max_pairwise_distance =
                max_pairwise_distance.max(sup_distance(&candidates[i], &candidates[j])?);
        }
    }
    Ok(PenaltyInvarianceReport {
        max_pairwise_distance,
        solver_to_oracle,
        tolerance,
        pass: max_pairwise_distance <= tolerance,
    })
}
