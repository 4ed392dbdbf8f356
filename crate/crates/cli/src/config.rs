//! The JSON run configuration. One document drives every subcommand; unknown
//! keys are rejected so a typo cannot silently fall back to a default.

use std::io::Read;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use ratchet_core::MarketParams;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<ParamsCfg>,
    /// Root seed for anything stochastic; required by simulate, synth and
    /// the Monte Carlo sweep.
    pub seed: Option<u64>,
    #[serde(default)]
    pub solve: SolveCfg,
    #[serde(default)]
    pub verify: VerifyCfg,
    pub sweep: Option<SweepCfg>,
    pub simulate: Option<SimulateCfg>,
    pub synth: Option<SynthCfg>,
    pub empirics: Option<EmpiricsCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsCfg {
    pub c: f64,
    pub d_low: f64,
    pub d_high: f64,
    pub gammas: Vec<f64>,
    #[serde(default = "default_true")]
    pub truncated: bool,
    #[serde(default = "default_one")]
    pub exponent_a: f64,
}

impl ParamsCfg {
    pub fn build(&self) -> Result<MarketParams, Failure> {
        Ok(MarketParams::new(
            self.c,
            self.d_low,
            self.d_high,
            self.gammas.clone(),
            self.truncated,
            self.exponent_a,
        )?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveCfg {
    /// Also solve the grid oracle and report its prices next to the closed
    /// form.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

impl Default for SolveCfg {
    fn default() -> Self {
        Self {
            oracle: false,
            grid_points: default_grid(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyCfg {
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// When set, replaces the per-check default tolerance on every
    /// solver-versus-closed-form comparison.
    pub oracle_tol: Option<f64>,
    /// Flips the sign of the interior surplus formula before checking it, to
    /// prove the harness can fail. Never set outside tests.
    #[serde(default)]
    pub flip_cs_sign_self_test: bool,
}

impl Default for VerifyCfg {
    fn default() -> Self {
        Self {
            grid_points: default_grid(),
            oracle_tol: None,
            flip_cs_sign_self_test: false,
        }
    }
}

/// Sweep selector plus the union of per-kind fields; `validate` pins which
/// fields each kind actually reads and rejects the rest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCfg {
    /// One of "delta", "delta_t5", "price_diff".
    pub kind: String,
    pub q_grid: Option<Vec<f64>>,
    pub a_grid: Option<Vec<f64>>,
    pub gamma2_grid: Option<Vec<f64>>,
    pub d_low: Option<f64>,
    pub d_high: Option<f64>,
    pub replications: Option<u64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyCfg {
    Flexible,
    RegulatedClosedForm,
    RegulatedTabulated,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    pub policy: PolicyCfg,
    pub replications: u64,
    /// Grid resolution when the policy is the tabulated solver.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthCfg {
    pub stations: u32,
    pub days: u32,
    /// First regulated day, 1-based.
    pub reform_day: u32,
    #[serde(default)]
    pub noise_sd: f64,
    /// Calendar date of day 1, `YYYY-MM-DD`.
    #[serde(default = "default_start")]
    pub start_date: String,
    /// Post-reform policy; pre-reform days always price flexibly.
    #[serde(default = "default_policy")]
    pub policy: PolicyCfg,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricsCfg {
    /// Path of the archive CSV to analyze.
    pub input: String,
    /// `YYYY-MM-DDTHH:MM:SS`; records strictly earlier count as "before".
    pub reform_instant: String,
    pub report: ReportKind,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    HourlyDiff,
    BoxWhisker,
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

fn default_grid() -> usize {
    2001
}

fn default_start() -> String {
    "2026-01-01".into()
}

fn default_policy() -> PolicyCfg {
    PolicyCfg::RegulatedClosedForm
}

/// Reads the raw config bytes, hashes them, then parses. The digest is taken
/// over the bytes as supplied so outputs can be traced to the exact artifact.
pub fn load(path: &str) -> Result<(RunConfig, String), Failure> {
    let bytes = if path == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::Io(format!("stdin: {e}")))?;
        buf
    } else {
        std::fs::read(path).map_err(|e| Failure::Io(format!("{path}: {e}")))?
    };
    let hash = format!("{:x}", Sha256::digest(&bytes));
    let cfg =
        serde_json::from_slice(&bytes).map_err(|e| Failure::Config(format!("config: {e}")))?;
    Ok((cfg, hash))
}

pub fn require_params(cfg: &RunConfig) -> Result<MarketParams, Failure> {
    cfg.params
        .as_ref()
        .ok_or_else(|| Failure::Config("missing required config field: params".into()))?
        .build()
}

pub fn require_seed(cfg: &RunConfig) -> Result<u64, Failure> {
    cfg.seed
        .ok_or_else(|| Failure::Config("missing required config field: seed".into()))
}
