//! h-extrema stopping times, the h/4 crossing skeleton and the free-knot
//! interpolant of a piecewise-linear path.
//!
//! Crossing instants are located by linear interpolation inside the grid cell
//! where they happen, which is exact for piecewise-linear paths. Extrema of
//! such paths sit on grid points, and ties are resolved towards the last
//! index attaining the running extremum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pathkit::PiecewiseLinearPath;

/// Tolerance used for equality tests on path levels.
pub fn level_tolerance(path: &PiecewiseLinearPath) -> f64 {
    1e-9 * (1.0 + path.max_abs_value())
}

/// The alternating times `t_n` (completion of an h-rise or h-fall) and
/// `t_bar_n` (location of the h-extremum preceding it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HExtremaDecomposition {
    /// `t[0] = 0`, then every realized `t_n`.
    pub t: Vec<f64>,
    /// `t_bar[0] = 0`, then every realized `t_bar_n`.
    pub t_bar: Vec<f64>,
    /// Grid index of each `t_bar_n`.
    pub t_bar_index: Vec<usize>,
    /// `N(T) = sup{n : t_bar_n <= T}`.
    pub count: usize,
    pub width: f64,
}

impl HExtremaDecomposition {
    /// `+1` when `t_bar_n` is a local minimum (odd `n`), `-1` for maxima.
    pub fn parity(n: usize) -> i8 {
        if n % 2 == 1 {
            1
        } else {
            -1
        }
    }

    /// Grid index range `(first, last)` of the block `[t_bar_i, t_bar_{i+1}]`.
    pub fn block(&self, i: usize) -> Result<(usize, usize)> {
        if i == 0 || i + 1 >= self.t_bar_index.len() {
            return invalid(format!(
                "block {i} not available (N(T) = {})",
                self.count
            ));
        }
        Ok((self.t_bar_index[i], self.t_bar_index[i + 1]))
    }
}

/// Running-extremum scan state.
struct Excursion {
    /// Extremum level and the last grid index attaining it (`None` while the
    /// extremum is still the interpolated start level).
    level: f64,
    at: Option<usize>,
    at_time: f64,
}

/// Neveu–Pitman h-extrema decomposition of `path`, starting at its first grid
/// point. Times beyond the first undefined `t_n` are absent.
pub fn decompose(path: &PiecewiseLinearPath, width: f64) -> Result<HExtremaDecomposition> {
    if !(width > 0.0) || !width.is_finite() {
        return invalid(format!("width must be positive, got {width}"));
    }
    let times = path.times();
    let w = path.values();
    let t0 = times[0];
    let mut t = vec![t0];
    let mut t_bar = vec![t0];
    let mut t_bar_index = vec![0];

    // Odd phases look for an h-rise above the running minimum, even phases
    // for an h-fall below the running maximum.
    let mut rising = true;
    let mut ext = Excursion {
        level: w[0],
        at: Some(0),
        at_time: t0,
    };
    let mut k = 1;
    while k < times.len() {
        let v = w[k];
        if rising {
            if v <= ext.level {
                ext = Excursion {
                    level: v,
                    at: Some(k),
                    at_time: times[k],
                };
            } else if v - ext.level >= width {
                let target = ext.level + width;
                let tc = cross_time(times, w, k, target);
                t.push(tc);
                push_extremum(&mut t_bar, &mut t_bar_index, &ext);
                rising = false;
                ext = Excursion {
                    level: target,
                    at: None,
                    at_time: tc,
                };
                continue;
            }
        } else if v >= ext.level {
            ext = Excursion {
                level: v,
                at: Some(k),
                at_time: times[k],
            };
        } else if ext.level - v >= width {
            let target = ext.level - width;
            let tc = cross_time(times, w, k, target);
            t.push(tc);
            push_extremum(&mut t_bar, &mut t_bar_index, &ext);
            rising = true;
            ext = Excursion {
                level: target,
                at: None,
                at_time: tc,
            };
            continue;
        }
        k += 1;
    }

    let count = t_bar.len() - 1;
    Ok(HExtremaDecomposition {
        t,
        t_bar,
        t_bar_index,
        count,
        width,
    })
}

fn push_extremum(t_bar: &mut Vec<f64>, idx: &mut Vec<usize>, ext: &Excursion) {
    // A new phase starts mid-cell and the cell's right end always beats the
    // interpolated start level, so `at` is set before the next crossing.
    let at = ext.at.expect("extremum located on the grid");
    t_bar.push(ext.at_time);
    idx.push(at);
}

/// Time inside cell `[k-1, k]` where the path takes the value `target`.
fn cross_time(times: &[f64], w: &[f64], k: usize, target: f64) -> f64 {
    let (t0, t1) = (times[k - 1], times[k]);
    let (w0, w1) = (w[k - 1], w[k]);
    if w1 == w0 {
        return t1;
    }
    let tc = t0 + (target - w0) * (t1 - t0) / (w1 - w0);
    tc.clamp(t0, t1)
}

/// Stopping times of successive increments of size `h/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSkeleton {
    /// `sigma[0] = t_start`, then every realized crossing.
    pub sigma: Vec<f64>,
    /// `delta[n - 1]` is the sign of `w(sigma_n) - w(sigma_{n-1})`.
    pub delta: Vec<i8>,
    /// Realized `n_1, n_2, ...`.
    pub n_k: Vec<usize>,
    pub width: f64,
}

impl CrossingSkeleton {
    /// `sigma_{4 n_k}` for `k >= 1`.
    pub fn group_end(&self, k: usize) -> Option<f64> {
        let n = *self.n_k.get(k.checked_sub(1)?)?;
        self.sigma.get(4 * n).copied()
    }
}

/// The `h/4` crossing skeleton of `path`.
pub fn crossing_skeleton(path: &PiecewiseLinearPath, width: f64) -> Result<CrossingSkeleton> {
    if !(width > 0.0) || !width.is_finite() {
        return invalid(format!("width must be positive, got {width}"));
    }
    let step = 0.25 * width;
    let times = path.times();
    let w = path.values();
    let mut sigma = vec![times[0]];
    let mut delta = Vec::new();
    let mut reference = w[0];
    for k in 1..times.len() {
        // Several crossings can fall inside one coarse cell.
        loop {
            let diff = w[k] - reference;
            if diff.abs() < step {
                break;
            }
            let sign: i8 = if diff > 0.0 { 1 } else { -1 };
            let target = reference + f64::from(sign) * step;
            sigma.push(cross_time(times, w, k, target));
            delta.push(sign);
            reference = target;
        }
    }
    let n_k = group_indices(&delta);
    Ok(CrossingSkeleton {
        sigma,
        delta,
        n_k,
        width,
    })
}

/// `n_k = inf{i > n_{k-1} : delta_{4i} = ... = delta_{4i-3} = (-1)^(k+1)}`.
fn group_indices(delta: &[i8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut target: i8 = 1;
    for (g, group) in delta.chunks_exact(4).enumerate() {
        if group.iter().all(|&d| d == target) {
            out.push(g + 1);
            target = -target;
        }
    }
    out
}

/// Piecewise-linear interpolation of `(sigma_n, w(sigma_n))`, evaluated on
/// the grid of `path` and held constant after the last crossing.
pub fn free_knot_interpolant(
    path: &PiecewiseLinearPath,
    skeleton: &CrossingSkeleton,
) -> Result<PiecewiseLinearPath> {
    let tol = level_tolerance(path) + 1e-12 * skeleton.width;
    let sigma = &skeleton.sigma;
    if sigma.len() != skeleton.delta.len() + 1
        || (sigma[0] - path.start_time()).abs() > 0.0
        || sigma.windows(2).any(|s| s[1] < s[0])
        || *sigma.last().unwrap() > path.end_time()
    {
        return invalid("skeleton does not belong to this path");
    }
    let levels: Vec<f64> = sigma.iter().map(|&s| path.value_at(s)).collect();
    for (n, d) in skeleton.delta.iter().enumerate() {
        let inc = levels[n + 1] - levels[n];
        if (inc - f64::from(*d) * 0.25 * skeleton.width).abs() > tol {
            return invalid(format!("skeleton increment {n} does not match the path"));
        }
    }
    let last = sigma.len() - 1;
    let mut seg = 0;
    let values = path
        .times()
        .iter()
        .map(|&t| {
            if t >= sigma[last] {
                return levels[last];
            }
            while sigma[seg + 1] < t {
                seg += 1;
            }
            let (a, b) = (sigma[seg], sigma[seg + 1]);
            if b == a {
                levels[seg + 1]
            } else {
                levels[seg] + (levels[seg + 1] - levels[seg]) * (t - a) / (b - a)
            }
        })
        .collect();
    Ok(path.with_grid_of(values))
}
