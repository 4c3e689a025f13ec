//! Renewal structure of the taut string along the h-extrema decomposition.
//!
//! Between consecutive h-extrema `t_bar_i`, `t_bar_{i+1}` the taut string
//! coincides with the block minimizer `psi_i` pinned to the tube boundary at
//! both ends. Pairs of blocks `(t_bar_{2i}, t_bar_{2i+2})` give i.i.d.
//! observations `(tau, E)` from which the energy rate `E(E)/E(tau)` and the
//! CLT variance are estimated.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::extrema::{decompose, HExtremaDecomposition};
use crate::pathkit::{energy, generate_brownian_with, replicate_rng, PenaltySpec, PiecewiseLinearPath};
use crate::stats::{covariance, ks_normality, mean, KsResult};
use crate::tautstring::{solve, solve_values, BoundaryCondition, TautStringResult, TubeProblem};

/// Seed offset separating calibration runs from the replicates they
/// normalize.
pub const CALIBRATION_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Horizon of one simulated segment in units of `h^2` (about fifty pairs of
/// blocks per segment).
const SEGMENT_HORIZON_H2: f64 = 100.0;

/// Replicates simulated per parallel batch.
const BATCH: usize = 8;

/// One renewal observation: the duration and energies of a double block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSample {
    pub tau: f64,
    pub energies: Vec<(PenaltySpec, f64)>,
}

impl RenewalSample {
    pub fn energy(&self, penalty: &PenaltySpec) -> Option<f64> {
        self.energies
            .iter()
            .find(|(p, _)| p == penalty)
            .map(|(_, e)| *e)
    }
}

/// Pinned value of `psi_i` at `t_bar_i` and `t_bar_{i+1}`.
pub fn block_boundary(path: &PiecewiseLinearPath, d: &HExtremaDecomposition, i: usize) -> Result<(f64, f64)> {
    let (a, b) = d.block(i)?;
    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
    let half = 0.5 * d.width;
    let w = path.values();
    Ok((w[a] - sign * half, w[b] + sign * half))
}

/// Fixed-boundary tube problem on `[t_bar_i, t_bar_{i+1}]`.
pub fn block_problem(path: &PiecewiseLinearPath, d: &HExtremaDecomposition, i: usize) -> Result<TubeProblem> {
    let (a, b) = d.block(i)?;
    let (left, right) = block_boundary(path, d, i)?;
    TubeProblem::new(path.slice(a, b)?, d.width, BoundaryCondition::fixed(left, right))
}

/// The block minimizer `psi_i` on the grid points of `[t_bar_i, t_bar_{i+1}]`.
pub fn block_minimizer(
    path: &PiecewiseLinearPath,
    decomposition: &HExtremaDecomposition,
    index: usize,
) -> Result<TautStringResult> {
    Ok(solve(&block_problem(path, decomposition, index)?))
}

fn block_energies(path: &PiecewiseLinearPath, d: &HExtremaDecomposition, i: usize, penalties: &[PenaltySpec]) -> Result<Vec<f64>> {
    let problem = block_problem(path, d, i)?;
    let string = problem.path.with_grid_of(solve_values(&problem));
    Ok(penalties.iter().map(|p| energy(&string, p)).collect())
}

fn segment_energy(string: &PiecewiseLinearPath, first: usize, last: usize, penalty: &PenaltySpec) -> f64 {
    let t = string.times();
    let v = string.values();
    (first..last)
        .map(|j| {
            let gap = t[j + 1] - t[j];
            penalty.eval((v[j + 1] - v[j]) / gap) * gap
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    /// `N(T)`.
    pub count: usize,
    /// `(i, sup |eta_T - psi_i|)` on `[t_bar_i, t_bar_{i+1}]`, `2 <= i <= N-2`.
    pub block_distances: Vec<(usize, f64)>,
    pub max_block_distance: f64,
    /// `(i, |eta_T(t_bar_i) - (w(t_bar_i) -+ h/2)|)`, `2 <= i <= N-1`.
    pub knot_residuals: Vec<(usize, f64)>,
    pub max_knot_residual: f64,
    /// Energy of `eta_T` per penalty.
    pub total_energy: Vec<(PenaltySpec, f64)>,
    /// `R(T)` = total energy minus the sum of complete double-block energies.
    pub remainder: Vec<(PenaltySpec, f64)>,
    /// `R(T)` from the boundary-term expression (equals `remainder` when the
    /// middle blocks coincide).
    pub remainder_formula: Vec<(PenaltySpec, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

impl TheoremReport {
    pub fn remainder_for(&self, penalty: &PenaltySpec) -> Option<f64> {
        self.remainder
            .iter()
            .find(|(p, _)| p == penalty)
            .map(|(_, r)| *r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TheoremCheck {
    NotApplicable { count: usize },
    Checked(TheoremReport),
}

/// Solves the pinned problem on the whole path and every middle block
/// problem, and compares them.
pub fn verify_theorem_main(
    path: &PiecewiseLinearPath,
    width: f64,
    penalties: &[PenaltySpec],
    tolerance: f64,
) -> Result<TheoremCheck> {
    for p in penalties {
        p.validate()?;
    }
    let d = decompose(path, width)?;
    let n = d.count;
    if n < 4 {
        return Ok(TheoremCheck::NotApplicable { count: n });
    }
    let global = path.with_grid_of(solve_values(&TubeProblem::pinned(path.clone(), width)?));
    let eta = global.values();
    let w = path.values();
    let half = 0.5 * width;

    // psi_i for 2 <= i <= N - 1 (the last one enters R(T) when N is even).
    let mut psi = Vec::with_capacity(n);
    for i in 2..n {
        let problem = block_problem(path, &d, i)?;
        psi.push(problem.path.with_grid_of(solve_values(&problem)));
    }
    let psi_of = |i: usize| &psi[i - 2];

    let mut block_distances = Vec::new();
    for i in 2..=n - 2 {
        let (a, _) = d.block(i)?;
        let dist = psi_of(i)
            .values()
            .iter()
            .enumerate()
            .fold(0.0_f64, |m, (j, v)| m.max((v - eta[a + j]).abs()));
        block_distances.push((i, dist));
    }
    let knot_residuals: Vec<(usize, f64)> = (2..n)
        .map(|i| {
            let k = d.t_bar_index[i];
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (i, (eta[k] - (w[k] - sign * half)).abs())
        })
        .collect();

    let pairs = n / 2;
    let last = path.len() - 1;
    let mut total_energy = Vec::new();
    let mut remainder = Vec::new();
    let mut remainder_formula = Vec::new();
    for p in penalties {
        let total = energy(&global, p);
        let blocks: f64 = (1..pairs)
            .map(|i| energy(psi_of(2 * i), p) + energy(psi_of(2 * i + 1), p))
            .sum();
        let head = segment_energy(&global, 0, d.t_bar_index[2], p);
        let tail = segment_energy(&global, d.t_bar_index[n - 1], last, p);
        let overlap = if n % 2 == 0 { energy(psi_of(n - 1), p) } else { 0.0 };
        total_energy.push((*p, total));
        remainder.push((*p, total - blocks));
        remainder_formula.push((*p, head + tail - overlap));
    }

    let max_block_distance = block_distances.iter().fold(0.0_f64, |m, x| m.max(x.1));
    let max_knot_residual = knot_residuals.iter().fold(0.0_f64, |m, x| m.max(x.1));
    Ok(TheoremCheck::Checked(TheoremReport {
        count: n,
        block_distances,
        max_block_distance,
        knot_residuals,
        max_knot_residual,
        total_energy,
        remainder,
        remainder_formula,
        tolerance,
        pass: max_block_distance <= tolerance,
    }))
}

/// Renewal samples from one simulated path, warm-up `[0, t_bar_2]` dropped.
pub fn samples_from_path(path: &PiecewiseLinearPath, width: f64, penalties: &[PenaltySpec]) -> Result<Vec<RenewalSample>> {
    let d = decompose(path, width)?;
    let mut out = Vec::new();
    let mut i = 1;
    while 2 * i + 2 <= d.count {
        let even = block_energies(path, &d, 2 * i, penalties)?;
        let odd = block_energies(path, &d, 2 * i + 1, penalties)?;
        out.push(RenewalSample {
            tau: d.t_bar[2 * i + 2] - d.t_bar[2 * i],
            energies: penalties
                .iter()
                .zip(even.iter().zip(&odd))
                .map(|(p, (a, b))| (*p, a + b))
                .collect(),
        });
        i += 1;
    }
    Ok(out)
}

fn check_width_step(width: f64, dt: f64) -> Result<()> {
    if !(width > 0.0) || !width.is_finite() {
        return invalid(format!("width must be positive, got {width}"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    Ok(())
}

/// `n_blocks` renewal samples simulated from independent Brownian segments.
///
/// Segment `r` is driven by stream `r` of `seed`; segments are processed in
/// parallel batches and concatenated in index order, so the output does not
/// depend on the number of worker threads.
pub fn sample_renewal(
    width: f64,
    penalties: &[PenaltySpec],
    n_blocks: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<RenewalSample>> {
    check_width_step(width, dt)?;
    if n_blocks == 0 {
        return invalid("n_blocks must be at least 1");
    }
    for p in penalties {
        p.validate()?;
    }
    let horizon = SEGMENT_HORIZON_H2 * width * width;
    let mut out = Vec::with_capacity(n_blocks);
    let mut next = 0u64;
    while out.len() < n_blocks {
        let batch: Vec<Vec<RenewalSample>> = (next..next + BATCH as u64)
            .into_par_iter()
            .map(|r| {
                let path = generate_brownian_with(horizon, dt, &mut replicate_rng(seed, r))?;
                samples_from_path(&path, width, penalties)
            })
            .collect::<Result<_>>()?;
        next += BATCH as u64;
        for s in batch.into_iter().flatten() {
            if out.len() == n_blocks {
                break;
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// `sigma^2 = m_E^2 / m_tau^3 Var(tau) + Var(E) / m_tau - 2 Cov(tau, E) m_E / m_tau^2`.
pub fn sigma_sq(mean_tau: f64, mean_energy: f64, var_tau: f64, var_energy: f64, cov: f64) -> f64 {
    mean_energy * mean_energy / mean_tau.powi(3) * var_tau + var_energy / mean_tau
        - 2.0 * cov * mean_energy / (mean_tau * mean_tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub penalty: PenaltySpec,
    pub n_samples: usize,
    pub mean_tau: f64,
    pub mean_energy: f64,
    pub var_tau: f64,
    pub var_energy: f64,
    pub cov: f64,
    pub c_hat: f64,
    pub sigma_hat_sq: f64,
    pub standard_error_c: f64,
}

/// Ratio estimator of the energy rate with its CLT variance.
pub fn estimate(samples: &[RenewalSample], penalty: &PenaltySpec) -> Result<EstimatorReport> {
    if samples.len() < 2 {
        return invalid(format!("estimate needs at least 2 samples, got {}", samples.len()));
    }
    let tau: Vec<f64> = samples.iter().map(|s| s.tau).collect();
    let y = samples
        .iter()
        .map(|s| {
            s.energy(penalty)
                .ok_or_else(|| Error::InvalidArgument(format!("samples carry no {penalty} energy")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_tau = mean(&tau);
    let mean_energy = mean(&y);
    let var_tau = covariance(&tau, &tau)?;
    let var_energy = covariance(&y, &y)?;
    let cov = covariance(&tau, &y)?;
    let sigma_hat_sq = sigma_sq(mean_tau, mean_energy, var_tau, var_energy, cov);
    let n = samples.len();
    Ok(EstimatorReport {
        penalty: *penalty,
        n_samples: n,
        mean_tau,
        mean_energy,
        var_tau,
        var_energy,
        cov,
        c_hat: mean_energy / mean_tau,
        sigma_hat_sq,
        standard_error_c: (sigma_hat_sq.max(0.0) / (n as f64 * mean_tau)).sqrt(),
    })
}

/// Energy of the pinned taut string on `[0, horizon]` for `replicates`
/// independent Brownian paths (stream `r` of `seed` for replicate `r`).
pub fn long_path_energies(
    width: f64,
    penalty: &PenaltySpec,
    horizon: f64,
    replicates: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_width_step(width, dt)?;
    penalty.validate()?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = generate_brownian_with(horizon, dt, &mut replicate_rng(seed, r))?;
            let problem = TubeProblem::pinned(path, width)?;
            let string = problem.path.with_grid_of(solve_values(&problem));
            Ok(energy(&string, penalty))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub width: f64,
    pub penalty: PenaltySpec,
    pub horizon: f64,
    pub replicates: usize,
    pub dt: f64,
    pub seed: u64,
    /// Renewal samples used to estimate `c_hat` and `sigma_hat_sq`.
    pub calibration_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltOutcome {
    pub statistics: Vec<f64>,
    pub energies: Vec<f64>,
    pub calibration: EstimatorReport,
}

/// Standardized energies `(E_T - T c_hat) / sqrt(T sigma_hat_sq)` of
/// independent replicates, with `c_hat` and `sigma_hat_sq` taken from a
/// separate renewal run seeded with `seed ^ CALIBRATION_SALT`.
pub fn clt_experiment(config: &CltConfig) -> Result<CltOutcome> {
    if config.replicates < 50 {
        return invalid(format!("CLT experiment needs at least 50 replicates, got {}", config.replicates));
    }
    if !(config.horizon > 0.0) {
        return invalid("horizon must be positive");
    }
    let samples = sample_renewal(
        config.width,
        &[config.penalty],
        config.calibration_blocks.max(2),
        config.dt,
        config.seed ^ CALIBRATION_SALT,
    )?;
    let calibration = estimate(&samples, &config.penalty)?;
    if !(calibration.sigma_hat_sq > 0.0) {
        return Err(Error::DegenerateVariance(format!(
            "estimated sigma_hat_sq = {}",
            calibration.sigma_hat_sq
        )));
    }
    let energies = long_path_energies(
        config.width,
        &config.penalty,
        config.horizon,
        config.replicates,
        config.dt,
        config.seed,
    )?;
    let t = config.horizon;
    let scale = (t * calibration.sigma_hat_sq).sqrt();
    let statistics = energies
        .iter()
        .map(|e| (e - t * calibration.c_hat) / scale)
        .collect();
    Ok(CltOutcome {
        statistics,
        energies,
        calibration,
    })
}

/// Positive law for the renewal durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum TauLaw {
    Exponential { mean: f64 },
    Uniform { low: f64, high: f64 },
}

impl TauLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            TauLaw::Exponential { mean } => mean,
            TauLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            TauLaw::Exponential { mean } => mean * mean,
            TauLaw::Uniform { low, high } => (high - low).powi(2) / 12.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TauLaw::Exponential { mean } if mean > 0.0 && mean.is_finite() => Ok(()),
            TauLaw::Uniform { low, high } if low >= 0.0 && high > low && high.is_finite() => Ok(()),
            _ => invalid(format!("tau law {self:?} must be positive with positive variance")),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TauLaw::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            TauLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }
}

/// Law of the rewards when drawn independently of the durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum RewardLaw {
    Gaussian { mean: f64, sd: f64 },
    Exponential { mean: f64 },
    Uniform { low: f64, high: f64 },
}

impl RewardLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardLaw::Gaussian { mean, .. } | RewardLaw::Exponential { mean } => mean,
            RewardLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            RewardLaw::Gaussian { sd, .. } => sd * sd,
            RewardLaw::Exponential { mean } => mean * mean,
            RewardLaw::Uniform { low, high } => (high - low).powi(2) / 12.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RewardLaw::Gaussian { mean, sd } => mean.is_finite() && sd >= 0.0 && sd.is_finite(),
            RewardLaw::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            RewardLaw::Uniform { low, high } => high > low && low.is_finite() && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid reward law {self:?}"))
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardLaw::Gaussian { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            RewardLaw::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            RewardLaw::Uniform { low, high } => rng.random_range(low..high),
        }
    }
}

/// Synthetic generator of `(X, tau)` pairs with closed-form moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairLaw {
    Independent { reward: RewardLaw, tau: TauLaw },
    /// `X = mean + sd * (rho * (tau - E tau) / sd_tau + sqrt(1 - rho^2) Z)`
    /// with `Z` standard normal, so `Cov(X, tau) = rho * sd * sd_tau`.
    LinearCorrelated { tau: TauLaw, mean: f64, sd: f64, rho: f64 },
}

impl PairLaw {
    /// `(E X, E tau, Var X, Var tau, Cov(X, tau))`.
    pub fn moments(&self) -> (f64, f64, f64, f64, f64) {
        match *self {
            PairLaw::Independent { reward, tau } => {
                (reward.mean(), tau.mean(), reward.variance(), tau.variance(), 0.0)
            }
            PairLaw::LinearCorrelated { tau, mean, sd, rho } => {
                (mean, tau.mean(), sd * sd, tau.variance(), rho * sd * tau.variance().sqrt())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PairLaw::Independent { reward, tau } => {
                reward.validate()?;
                tau.validate()
            }
            PairLaw::LinearCorrelated { tau, mean, sd, rho } => {
                tau.validate()?;
                if !mean.is_finite() || !(sd >= 0.0) || !(-1.0..=1.0).contains(&rho) {
                    return invalid("linear-correlated law needs finite mean, sd >= 0, |rho| <= 1");
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match *self {
            PairLaw::Independent { reward, tau } => {
                let t = tau.sample(rng);
                (reward.sample(rng), t)
            }
            PairLaw::LinearCorrelated { tau, mean, sd, rho } => {
                let t = tau.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                let u = (t - tau.mean()) / tau.variance().sqrt();
                (mean + sd * (rho * u + (1.0 - rho * rho).max(0.0).sqrt() * z), t)
            }
        }
    }

    /// Limit variance of the randomly indexed reward sum.
    pub fn sigma_bar_sq(&self) -> f64 {
        let (mx, mt, vx, vt, cxt) = self.moments();
        sigma_sq(mt, mx, vt, vx, cxt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnscombeConfig {
    pub pair_law: PairLaw,
    pub horizon: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnscombeReport {
    pub samples: Vec<f64>,
    pub sigma_bar_sq: f64,
    pub ks: KsResult,
}

/// Simulates `(U_{N(t)-1} - t E X / E tau) / sqrt(t sigma_bar^2)` where
/// `N(t) = sup{n : S_n <= t}`, and tests the result against N(0, 1).
pub fn anscombe_simulate(config: &AnscombeConfig) -> Result<AnscombeReport> {
    config.pair_law.validate()?;
    if !(config.horizon > 0.0) || config.replicates == 0 {
        return invalid("horizon must be positive and replicates at least 1");
    }
    let (mx, mt, vx, vt, cxt) = config.pair_law.moments();
    let parts = [mx * mx / mt.powi(3) * vt, vx / mt, 2.0 * cxt * mx / (mt * mt)];
    let sigma_bar_sq = config.pair_law.sigma_bar_sq();
    let scale: f64 = parts.iter().map(|p| p.abs()).sum();
    if !(sigma_bar_sq > 1e-12 * scale) {
        return Err(Error::DegenerateVariance(format!(
            "sigma_bar^2 = {sigma_bar_sq} for {:?}",
            config.pair_law
        )));
    }
    let t = config.horizon;
    let norm = (t * sigma_bar_sq).sqrt();
    let samples: Vec<f64> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(config.seed, r);
            let (mut elapsed, mut reward, mut previous) = (0.0, 0.0, 0.0);
            loop {
                let (x, tau) = config.pair_law.sample(&mut rng);
                if elapsed + tau > t {
                    break;
                }
                elapsed += tau;
                previous = reward;
                reward += x;
            }
            (previous - t * mx / mt) / norm
        })
        .collect();
    let ks = ks_normality(&samples)?;
    Ok(AnscombeReport {
        samples,
        sigma_bar_sq,
        ks,
    })
}
