use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use taut_core::io::{
    read_path_csv, write_decomposition_csv, write_path_csv, write_samples_csv, write_statistics_csv,
    write_string_csv,
};
use taut_core::oracle::oracle_check;
use taut_core::pathkit::generate_brownian;
use taut_core::renewal::{
    anscombe_simulate, clt_experiment, estimate, sample_renewal, verify_theorem_main, AnscombeConfig, CltConfig,
    PairLaw, RewardLaw, TauLaw, TheoremCheck,
};
use taut_core::stats::{ks_normality, summarize};
use taut_core::tautstring::{
    default_knot_tolerance, knot_points, solve, verify_penalty_invariance, DEFAULT_PENALTIES,
};
use taut_core::{extrema, BoundaryCondition, Endpoint, PenaltySpec, PiecewiseLinearPath, TubeProblem};

use crate::config::{CampaignConfig, UsageError};

/// Whether the run's checks held; decides exit status 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl From<bool> for Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Finest grid step the discretization rule allows for width `h`.
pub fn dt_limit(width: f64) -> f64 {
    (0.25 * width).powi(2) / 100.0
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

/// One invocation: the resolved configuration and the warnings raised while
/// resolving it, both copied into every metadata sidecar.
pub struct Campaign {
    pub command: &'static str,
    pub config: CampaignConfig,
    pub warnings: Vec<String>,
}

impl Campaign {
    pub fn new(command: &'static str, config: CampaignConfig) -> Self {
        Campaign {
            command,
            config,
            warnings: Vec::new(),
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn width(&mut self) -> Result<f64> {
        let h = positive("h", self.config.width.unwrap_or(1.0))?;
        self.config.width = Some(h);
        Ok(h)
    }

    fn seed(&mut self) -> u64 {
        *self.config.seed.get_or_insert(0)
    }

    fn check_dt(&mut self, width: f64, dt: f64) {
        let limit = dt_limit(width);
        if dt > limit {
            let msg = format!("dt = {dt} exceeds (h/4)^2/100 = {limit} for h = {width}; proceeding");
            eprintln!("warning: {msg}");
            self.warnings.push(msg);
        }
    }

    fn input_path(&self) -> Result<PiecewiseLinearPath> {
        let p = self
            .config
            .input
            .as_ref()
            .ok_or_else(|| usage(format!("`{}` needs --input <path.csv>", self.command)))?;
        let file = File::open(p).map_err(|e| usage(format!("cannot open {}: {e}", p.display())))?;
        Ok(read_path_csv(file)?)
    }

    /// The `--input` path, or a Brownian path from `(T, dt, seed)`.
    fn input_or_generated(&mut self, horizon: f64, dt: Option<f64>) -> Result<PiecewiseLinearPath> {
        if self.config.input.is_some() {
            return self.input_path();
        }
        let t = positive("T", *self.config.horizon.get_or_insert(horizon))?;
        let dt = positive("dt", *self.config.dt.get_or_insert(dt.unwrap_or(1e-3)))?;
        if let Some(h) = self.config.width {
            self.check_dt(h, dt);
        }
        let seed = self.seed();
        Ok(generate_brownian(t, dt, seed)?)
    }

    fn sidecar(&self, artifact: &Path) -> Result<()> {
        let meta = json!({
            "command": self.command,
            "config": self.config,
            "seed": self.config.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "warnings": self.warnings,
        });
        let mut name = artifact.as_os_str().to_owned();
        name.push(".meta.json");
        let text = serde_json::to_string_pretty(&meta)? + "\n";
        std::fs::write(&name, text).with_context(|| format!("writing {}", PathBuf::from(&name).display()))
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let dir = self.out_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    fn csv(&self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> taut_core::Result<()>) -> Result<PathBuf> {
        let (path, mut out) = self.create(name)?;
        write(&mut out)?;
        self.sidecar(&path)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let (path, mut out) = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        std::io::Write::write_all(&mut out, b"\n")?;
        drop(out);
        self.sidecar(&path)?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

fn endpoint(spec: &str, pinned: f64) -> Result<Endpoint> {
    match spec {
        "pinned" => Ok(Endpoint::Fixed(pinned)),
        "free" => Ok(Endpoint::Free),
        v => v
            .parse()
            .map(Endpoint::Fixed)
            .map_err(|_| usage(format!("boundary must be `pinned`, `free` or a number, got `{v}`"))),
    }
}

fn boundary(c: &mut Campaign, path: &PiecewiseLinearPath) -> Result<BoundaryCondition> {
    let w = path.values();
    let left = c.config.left.get_or_insert_with(|| "pinned".into()).clone();
    let right = c.config.right.get_or_insert_with(|| "pinned".into()).clone();
    Ok(BoundaryCondition {
        left: endpoint(&left, w[0])?,
        right: endpoint(&right, w[w.len() - 1])?,
    })
}

pub fn gen(c: &mut Campaign) -> Result<Verdict> {
    let t = positive("T", *c.config.horizon.get_or_insert(1.0))?;
    let dt = positive("dt", *c.config.dt.get_or_insert(1e-3))?;
    if let Some(h) = c.config.width {
        c.check_dt(h, dt);
    }
    let path = generate_brownian(t, dt, c.seed())?;
    c.csv("path.csv", |out| write_path_csv(out, &path))?;
    Ok(Verdict::Pass)
}

pub fn solve_cmd(c: &mut Campaign) -> Result<Verdict> {
    let path = c.input_path()?;
    let h = c.width()?;
    let b = boundary(c, &path)?;
    let problem = TubeProblem::new(path, h, b)?;
    let result = solve(&problem);
    let knots = knot_points(&result, default_knot_tolerance(&result.path))?;
    c.csv("string.csv", |out| write_string_csv(out, &result, &knots))?;
    for (p, e) in &result.energies {
        println!("energy_{} = {e}", p.name());
    }
    Ok(Verdict::Pass)
}

pub fn decompose_cmd(c: &mut Campaign) -> Result<Verdict> {
    let path = c.input_path()?;
    let h = c.width()?;
    let d = extrema::decompose(&path, h)?;
    c.csv("decomposition.csv", |out| write_decomposition_csv(out, &d))?;
    println!("N(T) = {}", d.count);
    Ok(Verdict::Pass)
}

pub fn verify_decomposition(c: &mut Campaign) -> Result<Verdict> {
    let h = c.width()?;
    let path = c.input_or_generated(200.0, None)?;
    let penalties = c.config.penalties.get_or_insert_with(|| vec![PenaltySpec::Quadratic]).clone();
    let tol = positive("tolerance", *c.config.tolerance.get_or_insert(1e-6))?;
    let check = verify_theorem_main(&path, h, &penalties, tol)?;
    c.json("theorem_report.json", &check)?;
    Ok(match check {
        TheoremCheck::NotApplicable { count } => {
            println!("not applicable: N(T) = {count} < 4");
            Verdict::Pass
        }
        TheoremCheck::Checked(r) => {
            println!(
                "N(T) = {}, max block distance {:e}, max knot residual {:e}",
                r.count, r.max_block_distance, r.max_knot_residual
            );
            Verdict::from(r.pass)
        }
    })
}

pub fn verify_invariance(c: &mut Campaign) -> Result<Verdict> {
    let h = c.width()?;
    let path = c.input_or_generated(1.0, Some(1.0 / 31.0))?;
    let b = boundary(c, &path)?;
    let penalties = c.config.penalties.get_or_insert_with(|| DEFAULT_PENALTIES.to_vec()).clone();
    let tol = positive("tolerance", *c.config.tolerance.get_or_insert(1e-6))?;
    let report = verify_penalty_invariance(&TubeProblem::new(path, h, b)?, &penalties, tol)?;
    c.json("invariance_report.json", &report)?;
    println!("max pairwise distance {:e} (tolerance {tol:e})", report.max_pairwise_distance);
    Ok(Verdict::from(report.pass))
}

pub fn oracle_check_cmd(c: &mut Campaign) -> Result<Verdict> {
    let instances = *c.config.instances.get_or_insert(200);
    let max_grid = *c.config.max_grid.get_or_insert(64);
    let tol = positive("tolerance", *c.config.tolerance.get_or_insert(1e-6))?;
    let energy_tol = positive("energy_tolerance", *c.config.energy_tolerance.get_or_insert(1e-8))?;
    let report = oracle_check(instances, max_grid, c.seed(), tol, energy_tol)?;
    c.json("oracle_report.json", &report)?;
    println!(
        "{} instances, max sup distance {:e}, max energy gap {:e}",
        instances, report.max_sup_distance, report.max_energy_gap
    );
    Ok(Verdict::from(report.pass))
}

pub fn estimate_c(c: &mut Campaign) -> Result<Verdict> {
    let h = c.width()?;
    let n = *c.config.n_blocks.get_or_insert(10_000);
    let dt = positive("dt", *c.config.dt.get_or_insert(h * h / 1600.0))?;
    c.check_dt(h, dt);
    let mut penalties = c.config.penalties.get_or_insert_with(|| vec![PenaltySpec::Quadratic]).clone();
    if !penalties.contains(&PenaltySpec::Quadratic) {
        penalties.insert(0, PenaltySpec::Quadratic);
    }
    let samples = sample_renewal(h, &penalties, n, dt, c.seed())?;
    c.csv("samples.csv", |out| write_samples_csv(out, &samples, &penalties))?;
    let reports = penalties
        .iter()
        .map(|p| estimate(&samples, p))
        .collect::<taut_core::Result<Vec<_>>>()?;
    c.json("estimate_report.json", &reports)?;
    for r in &reports {
        println!("{}: c_hat = {} +- {} (sigma_hat^2 = {})", r.penalty, r.c_hat, r.standard_error_c, r.sigma_hat_sq);
    }
    Ok(Verdict::Pass)
}

pub fn clt(c: &mut Campaign) -> Result<Verdict> {
    let h = c.width()?;
    let penalty = c.config.penalties.get_or_insert_with(|| vec![PenaltySpec::Quadratic])[0];
    let horizon = positive("T", *c.config.horizon.get_or_insert(2000.0))?;
    let replicates = *c.config.replicates.get_or_insert(500);
    let dt = positive("dt", *c.config.dt.get_or_insert(1e-3))?;
    let calibration_blocks = *c.config.calibration_blocks.get_or_insert(400_000);
    let alpha = *c.config.significance.get_or_insert(0.01);
    c.check_dt(h, dt);
    let config = CltConfig {
        width: h,
        penalty,
        horizon,
        replicates,
        dt,
        seed: c.seed(),
        calibration_blocks,
    };
    let out = clt_experiment(&config)?;
    c.csv("clt_statistics.csv", |w| write_statistics_csv(w, &out.statistics))?;
    let ks = ks_normality(&out.statistics)?;
    let s = summarize(&out.statistics)?;
    let pass = ks.p_value > alpha;
    c.json(
        "clt_report.json",
        &json!({
            "ks": ks,
            "mean": s.mean,
            "variance": s.variance,
            "calibration": out.calibration,
            "significance": alpha,
            "pass": pass,
        }),
    )?;
    println!("KS p = {}, mean {}, variance {:?}", ks.p_value, s.mean, s.variance);
    Ok(Verdict::from(pass))
}

pub fn anscombe(c: &mut Campaign) -> Result<Verdict> {
    let pair_law = *c.config.pair_law.get_or_insert(PairLaw::Independent {
        reward: RewardLaw::Gaussian { mean: 5.0, sd: 1.0 },
        tau: TauLaw::Exponential { mean: 1.0 },
    });
    let horizon = positive("T", *c.config.horizon.get_or_insert(5000.0))?;
    let replicates = *c.config.replicates.get_or_insert(500);
    let alpha = *c.config.significance.get_or_insert(0.01);
    let config = AnscombeConfig {
        pair_law,
        horizon,
        replicates,
        seed: c.seed(),
    };
    let report = anscombe_simulate(&config)?;
    c.csv("anscombe_statistics.csv", |w| write_statistics_csv(w, &report.samples))?;
    let pass = report.ks.p_value > alpha;
    c.json(
        "anscombe_report.json",
        &json!({
            "ks": report.ks,
            "sigma_bar_sq": report.sigma_bar_sq,
            "significance": alpha,
            "pass": pass,
        }),
    )?;
    println!("sigma_bar^2 = {}, KS p = {}", report.sigma_bar_sq, report.ks.p_value);
    Ok(Verdict::from(pass))
}
