//! Experiment configuration: TOML schema, validation, and resolution into the
//! library's domain types.
//!
//! Unknown keys are errors, not warnings. Every output file embeds the SHA-256
//! hash (first 16 hex digits) of the config file bytes so audits can refuse
//! mismatched inputs.
//!
//! ROI-target normalization happens here: valuations and the capital-cost
//! weight are divided by `roi_target` when the environment is built, which
//! scales every reward by `1/roi_target` and makes the internal target 1.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{
    gen_k_safe_script, gen_phase_shift, gen_price_out_burst, InputModel, KSafeCertificate,
    Mechanism,
};
use crate::model::{BidGrid, RunConfig, ValuationGrid};
use crate::{Error, Result};

/// Which bidder drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    FrameworkExp3six,
    SecondPriceClosedForm,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::FrameworkExp3six => write!(f, "framework-exp3six"),
            Algorithm::SecondPriceClosedForm => write!(f, "second-price-closed-form"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub run: RunSection,
    pub mechanism: Mechanism,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub grids: GridsSection,
    pub env: EnvSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: usize,
    pub budget: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub roi_target: f64,
    #[serde(default)]
    pub omega: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSection {
    pub bids: Vec<f64>,
    pub valuations: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// "stochastic", "scripted" or "generator".
    pub kind: String,
    /// `[v, beta, p]` rows of the joint probability table (stochastic).
    #[serde(default)]
    pub atoms: Option<Vec<(f64, f64, f64)>>,
    /// Script file path (scripted).
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    /// Built-in scenario generator (generator).
    #[serde(default)]
    pub generator: Option<GeneratorSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    /// "k-safe", "phase-shift" or "price-out-burst".
    pub name: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub alpha_target: Option<f64>,
    #[serde(default)]
    pub gen_seed: Option<u64>,
    #[serde(default)]
    pub v: Option<f64>,
    #[serde(default)]
    pub benign_beta: Option<f64>,
    #[serde(default)]
    pub hostile_beta: Option<f64>,
    #[serde(default)]
    pub switch_at: Option<usize>,
    #[serde(default)]
    pub base_beta: Option<f64>,
    #[serde(default)]
    pub burst_beta: Option<f64>,
    #[serde(default)]
    pub period: Option<usize>,
    #[serde(default)]
    pub burst_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "yes")]
    pub interval_regret: bool,
    #[serde(default = "yes")]
    pub mu_growth: bool,
    #[serde(default = "yes")]
    pub mu_bound: bool,
    #[serde(default = "yes")]
    pub budget_gap_bound: bool,
    #[serde(default = "yes")]
    pub policy_predicates: bool,
}

fn yes() -> bool {
    true
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            interval_regret: true,
            mu_growth: true,
            mu_bound: true,
            budget_gap_bound: true,
            policy_predicates: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Horizons to sweep; the budget is rescaled to keep `rho` fixed.
    pub horizons: Vec<usize>,
}

/// On-disk adversarial script: header plus one `[t, v, beta]` row per round.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptFile {
    pub horizon: usize,
    pub mechanism: Mechanism,
    pub omega: f64,
    pub bids: Vec<f64>,
    pub valuations: Vec<f64>,
    pub rounds: Vec<(usize, f64, f64)>,
}

/// A fully resolved experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub run_config: RunConfig,
    pub model: InputModel,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub audit: AuditSection,
    pub sweep_horizons: Option<Vec<usize>>,
    pub config_hash: String,
    /// Present when the environment came from the k-safe generator.
    pub k_safe_certificate: Option<KSafeCertificate>,
    /// The raw generator section, kept so sweeps can regenerate at other
    /// horizons.
    pub generator: Option<GeneratorSection>,
    pub env_kind: EnvKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Stochastic,
    Scripted,
    Generator,
}

/// SHA-256 (truncated to 16 hex digits) of raw bytes.
pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn load_config_file(path: &Path) -> Result<(ConfigFile, String)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::ConfigParse(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Error::ConfigParse(format!("{} is not UTF-8: {e}", path.display())))?;
    let cfg: ConfigFile = toml::from_str(&text)
        .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    Ok((cfg, hash_bytes(&bytes)))
}

/// Loads, validates and resolves an experiment configuration.
pub fn load_experiment(path: &Path) -> Result<Experiment> {
    let (cfg, config_hash) = load_config_file(path)?;
    resolve(cfg, config_hash, path)
}

fn resolve(cfg: ConfigFile, config_hash: String, path: &Path) -> Result<Experiment> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("seeds: list must be nonempty".into()));
    }
    let r = cfg.run.roi_target;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidConfig(format!("run.roi_target: must be > 0, got {r}")));
    }
    // Normalize the ROI target into the valuations and the capital-cost
    // weight; every reward is thereby divided by the target.
    let scaled_vals: Vec<f64> = cfg.grids.valuations.iter().map(|&v| v / r).collect();
    if scaled_vals.iter().any(|&v| v > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grids.valuations: values exceed 1 after dividing by roi_target {r}"
        )));
    }
    let omega_internal = cfg.run.omega / r;
    let run_config = RunConfig::new(
        cfg.run.horizon,
        cfg.run.budget,
        cfg.run.delta,
        cfg.run.roi_target,
        omega_internal,
    )?;
    let valuations = ValuationGrid::new(scaled_vals)?;
    let bids = BidGrid::new(cfg.grids.bids.clone())?;

    let (model, k_safe_certificate, env_kind) = build_model(
        &cfg.env,
        cfg.mechanism,
        &valuations,
        &bids,
        &run_config,
        r,
        path,
    )?;

    if cfg.algorithm == Algorithm::SecondPriceClosedForm && cfg.mechanism != Mechanism::SecondPrice
    {
        return Err(Error::InvalidConfig(
            "algorithm: second-price-closed-form requires mechanism = \"second-price\"".into(),
        ));
    }

    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok(Experiment {
        run_config,
        model,
        algorithm: cfg.algorithm,
        seeds: cfg.seeds.clone(),
        out_dir,
        audit: cfg.audit,
        sweep_horizons: cfg.sweep.as_ref().map(|s| s.horizons.clone()),
        config_hash,
        k_safe_certificate,
        generator: cfg.env.generator.clone(),
        env_kind,
    })
}

fn build_model(
    env: &EnvSection,
    mechanism: Mechanism,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    run_config: &RunConfig,
    roi_target: f64,
    config_path: &Path,
) -> Result<(InputModel, Option<KSafeCertificate>, EnvKind)> {
    match env.kind.as_str() {
        "stochastic" => {
            let atoms = env.atoms.as_ref().ok_or_else(|| {
                Error::InvalidConfig("env.atoms: required when env.kind = \"stochastic\"".into())
            })?;
            let scaled: Vec<(f64, f64, f64)> =
                atoms.iter().map(|&(v, b, p)| (v / roi_target, b, p)).collect();
            let model = InputModel::stochastic(mechanism, valuations.clone(), bids.clone(), &scaled)?;
            Ok((model, None, EnvKind::Stochastic))
        }
        "scripted" => {
            let rel = env.script_path.as_ref().ok_or_else(|| {
                Error::InvalidConfig("env.script_path: required when env.kind = \"scripted\"".into())
            })?;
            let script_path = if rel.is_relative() {
                config_path.parent().unwrap_or_else(|| Path::new(".")).join(rel)
            } else {
                rel.clone()
            };
            let model = load_script_model(
                &script_path,
                mechanism,
                valuations,
                bids,
                run_config,
                roi_target,
            )?;
            Ok((model, None, EnvKind::Scripted))
        }
        "generator" => {
            let generator = env.generator.as_ref().ok_or_else(|| {
                Error::InvalidConfig("env.generator: required when env.kind = \"generator\"".into())
            })?;
            let rho = run_config.budget / run_config.horizon as f64;
            let (model, cert) = build_generator_model(
                generator,
                run_config.horizon,
                rho,
                run_config.omega,
                mechanism,
                bids,
            )?;
            Ok((model, cert, EnvKind::Generator))
        }
        other => Err(Error::InvalidConfig(format!(
            "env.kind: expected \"stochastic\", \"scripted\" or \"generator\", got {other:?}"
        ))),
    }
}

fn require<T: Copy>(opt: Option<T>, key: &str, generator: &str) -> Result<T> {
    opt.ok_or_else(|| {
        Error::InvalidConfig(format!("env.generator.{key}: required by the {generator} generator"))
    })
}

/// Builds a generator environment at an explicit horizon (sweeps regenerate
/// at each swept horizon, keeping `rho` fixed).
///
/// The k-safe generator chooses its own grids so its certificate stays valid;
/// the other generators share the experiment's bid grid.
pub fn build_generator_model(
    generator: &GeneratorSection,
    horizon: usize,
    rho: f64,
    omega: f64,
    mechanism: Mechanism,
    bids: &BidGrid,
) -> Result<(InputModel, Option<KSafeCertificate>)> {
    if mechanism != Mechanism::FirstPrice {
        return Err(Error::InvalidConfig(
            "env.generator: built-in generators produce first-price scripts".into(),
        ));
    }
    match generator.name.as_str() {
        "k-safe" => {
            let k = require(generator.k, "k", "k-safe")?;
            let alpha_target = require(generator.alpha_target, "alpha_target", "k-safe")?;
            let gen_seed = require(generator.gen_seed, "gen_seed", "k-safe")?;
            let built = gen_k_safe_script(horizon, k, alpha_target, rho, omega, gen_seed)?;
            Ok((built.model, Some(built.certificate)))
        }
        "phase-shift" => {
            let v = require(generator.v, "v", "phase-shift")?;
            let benign = require(generator.benign_beta, "benign_beta", "phase-shift")?;
            let hostile = require(generator.hostile_beta, "hostile_beta", "phase-shift")?;
            let switch_at = require(generator.switch_at, "switch_at", "phase-shift")?;
            let model = gen_phase_shift(horizon, bids.clone(), v, benign, hostile, switch_at)?;
            Ok((model, None))
        }
        "price-out-burst" => {
            let v = require(generator.v, "v", "price-out-burst")?;
            let base = require(generator.base_beta, "base_beta", "price-out-burst")?;
            let burst = require(generator.burst_beta, "burst_beta", "price-out-burst")?;
            let period = require(generator.period, "period", "price-out-burst")?;
            let burst_len = require(generator.burst_len, "burst_len", "price-out-burst")?;
            let model =
                gen_price_out_burst(horizon, bids.clone(), v, base, burst, period, burst_len)?;
            Ok((model, None))
        }
        other => Err(Error::InvalidConfig(format!(
            "env.generator.name: unknown generator {other:?}"
        ))),
    }
}

fn load_script_model(
    path: &Path,
    mechanism: Mechanism,
    valuations: &ValuationGrid,
    bids: &BidGrid,
    run_config: &RunConfig,
    roi_target: f64,
) -> Result<InputModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigParse(format!("cannot read script {}: {e}", path.display())))?;
    let file: ScriptFile = toml::from_str(&text)
        .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    if file.mechanism != mechanism {
        return Err(Error::InvalidConfig(format!(
            "script mechanism {} does not match config mechanism {mechanism}",
            file.mechanism
        )));
    }
    if file.horizon != run_config.horizon {
        return Err(Error::DimensionMismatch(format!(
            "script horizon {} does not match run horizon {}",
            file.horizon, run_config.horizon
        )));
    }
    if (file.omega - run_config.roi_target * run_config.omega).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "script omega {} does not match config omega {}",
            file.omega,
            run_config.roi_target * run_config.omega
        )));
    }
    if file.bids != bids.values() {
        return Err(Error::InvalidConfig("script bid grid does not match config grid".into()));
    }
    let expected_vals: Vec<f64> = valuations.values().iter().map(|&v| v * roi_target).collect();
    if file.rounds.len() != file.horizon {
        return Err(Error::DimensionMismatch(format!(
            "script declares horizon {} but has {} rounds",
            file.horizon,
            file.rounds.len()
        )));
    }
    if file.valuations != expected_vals {
        return Err(Error::InvalidConfig(
            "script valuation grid does not match config grid".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(file.rounds.len());
    for (i, &(t, v, beta)) in file.rounds.iter().enumerate() {
        if t != i + 1 {
            return Err(Error::InvalidConfig(format!(
                "script rounds must be numbered 1..=T in order; row {} has t={t}",
                i + 1
            )));
        }
        pairs.push((v / roi_target, beta));
    }
    InputModel::scripted(mechanism, valuations.clone(), bids.clone(), &pairs)
}

/// Serializes a script model back to the on-disk format.
pub fn script_file_from_model(model: &InputModel, omega_raw: f64, roi_target: f64) -> Option<ScriptFile> {
    let script = model.script()?;
    Some(ScriptFile {
        horizon: script.len(),
        mechanism: model.mechanism,
        omega: omega_raw,
        bids: model.bids.values().to_vec(),
        valuations: model.valuations.values().iter().map(|&v| v * roi_target).collect(),
        rounds: script
            .rounds()
            .iter()
            .enumerate()
            .map(|(i, r)| (i + 1, r.v * roi_target, r.beta))
            .collect(),
    })
}
