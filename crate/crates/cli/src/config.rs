use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use taut_core::renewal::PairLaw;
use taut_core::PenaltySpec;

/// Campaign parameters. Every field is optional here; each subcommand fills
/// in its own defaults and records the resolved values in the metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(alias = "h", skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(alias = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalties: Option<Vec<PenaltySpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_grid: Option<usize>,
    /// `pinned`, `free` or a number.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_law: Option<PairLaw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Flags shared by every subcommand; any flag given overrides the same key
/// of the `--config` document.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON configuration document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tube width h.
    #[arg(long, visible_alias = "h")]
    pub width: Option<f64>,
    /// Horizon T.
    #[arg(long, visible_alias = "T")]
    pub horizon: Option<f64>,
    /// Grid step of simulated paths.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Renewal samples (pairs of blocks) to draw.
    #[arg(long)]
    pub n_blocks: Option<usize>,
    /// Renewal samples used to calibrate the CLT statistics.
    #[arg(long)]
    pub calibration_blocks: Option<usize>,
    /// Penalty: quadratic, power<alpha> or sqrt1p (repeatable).
    #[arg(long = "penalty")]
    pub penalties: Vec<PenaltySpec>,
    /// Sup-distance tolerance of verification commands.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Quadratic-energy tolerance of `oracle-check`.
    #[arg(long)]
    pub energy_tolerance: Option<f64>,
    /// KS level below which `clt` and `anscombe` report failure.
    #[arg(long)]
    pub significance: Option<f64>,
    /// Random instances for `oracle-check`.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Largest grid of `oracle-check` instances.
    #[arg(long)]
    pub max_grid: Option<usize>,
    /// Left boundary of `solve`: pinned, free or a value.
    #[arg(long, allow_hyphen_values = true)]
    pub left: Option<String>,
    /// Right boundary of `solve`: pinned, free or a value.
    #[arg(long, allow_hyphen_values = true)]
    pub right: Option<String>,
    /// Input path CSV (`t,w`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving the artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn read_document(path: &Path) -> Result<Map<String, Value>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(UsageError(format!("config {} is not a JSON object", path.display()))),
        Err(e) => Err(UsageError(format!("malformed config {}: {e}", path.display()))),
    }
}

impl Flags {
    /// The config document with flag overrides applied.
    pub fn resolve(&self) -> Result<CampaignConfig, UsageError> {
        let mut doc = match &self.config {
            Some(p) => read_document(p)?,
            None => Map::new(),
        };
        // Aliases in the document are folded into the canonical keys first so
        // that a flag replaces them.
        for (alias, key) in [("h", "width"), ("T", "horizon")] {
            if let Some(v) = doc.remove(alias) {
                doc.entry(key).or_insert(v);
            }
        }
        let flags = CampaignConfig {
            width: self.width,
            horizon: self.horizon,
            dt: self.dt,
            seed: self.seed,
            replicates: self.replicates,
            n_blocks: self.n_blocks,
            calibration_blocks: self.calibration_blocks,
            penalties: (!self.penalties.is_empty()).then(|| self.penalties.clone()),
            tolerance: self.tolerance,
            energy_tolerance: self.energy_tolerance,
            significance: self.significance,
            instances: self.instances,
            max_grid: self.max_grid,
            left: self.left.clone(),
            right: self.right.clone(),
            pair_law: None,
            input: self.input.clone(),
            out_dir: self.out_dir.clone(),
        };
        if let Value::Object(overrides) = serde_json::to_value(&flags).expect("config serializes") {
            doc.extend(overrides);
        }
        serde_json::from_value(Value::Object(doc)).map_err(|e| UsageError(format!("invalid config: {e}")))
    }
}
