//! Flat JSON configs, one per experiment. Unknown keys are rejected.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use chainlab::adversary::RevealPolicy;
use chainlab::simnet::continuous::{ContinuousReveal, TreeRoots};
use chainlab::simnet::HonestRule;

use crate::{Experiment, ExperimentError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiTableConfig {
    pub cs: Vec<u64>,
    /// Largest `c` for the two-route agreement check.
    pub cross_check_max_c: u64,
    pub tolerance: f64,
    pub cross_tolerance: f64,
}

impl Default for PhiTableConfig {
    fn default() -> Self {
        Self { cs: (1..=10).collect(), cross_check_max_c: 256, tolerance: 5e-5, cross_tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NasGrowthConfig {
    pub lambda_a: f64,
    /// Honest rate; only sets the pace of the (ignored) public chain.
    pub lambda_h: f64,
    /// Simulated time; the check needs `lambda_a * horizon >= 200`.
    pub horizon: f64,
    pub cs: Vec<u64>,
    /// Active-miner cap of the private tree (`null` for the exact tree).
    pub cap: Option<usize>,
    /// Relative tolerance against `phi_c`.
    pub tolerance: f64,
}

impl Default for NasGrowthConfig {
    fn default() -> Self {
        Self { lambda_a: 0.1, lambda_h: 1.0, horizon: 10_000.0, cs: vec![1, 2, 4, 8, 16, 32, 64], cap: Some(2000), tolerance: 0.10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Balance,
    Private,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceAttackConfig {
    pub beta: f64,
    pub f_delta: f64,
    pub horizon_slots: u64,
    pub honest_rule: HonestRule,
    pub g: u64,
    pub c: u64,
    pub kappa: u64,
    pub attacks: Vec<AttackKind>,
    /// Reveal policy of the private attack.
    pub reveal: RevealPolicy,
    pub fork_threshold: u64,
    pub max_targets: usize,
    pub lag: u64,
    /// Require `P_balance >= P_private + min_advantage`.
    pub min_advantage: Option<f64>,
    /// Require `P_balance` inside `[lo, hi]`.
    pub balance_band: Option<(f64, f64)>,
    /// Require at most this many common-prefix violations over all runs.
    pub max_violations: Option<usize>,
}

impl Default for BalanceAttackConfig {
    fn default() -> Self {
        Self {
            beta: 0.38,
            f_delta: 0.1,
            horizon_slots: 2000,
            honest_rule: HonestRule::GGreedy,
            g: 2,
            c: 1,
            kappa: 50,
            attacks: vec![AttackKind::Balance, AttackKind::Private],
            reveal: RevealPolicy::Never,
            fork_threshold: 100,
            max_targets: 64,
            lag: 20,
            min_advantage: None,
            balance_band: None,
            max_violations: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSweepConfig {
    pub gs: Vec<u64>,
    pub betas: Vec<f64>,
    pub f_delta: f64,
    pub horizon_slots: u64,
    pub fork_threshold: u64,
    /// A `beta` counts as successful when `P(fork >= threshold) >= prob`.
    pub prob: f64,
    pub max_targets: usize,
    pub lag: u64,
}

impl Default for ThresholdSweepConfig {
    fn default() -> Self {
        Self {
            gs: vec![1, 2, 3, 4],
            betas: (20..=40).step_by(2).map(|b| b as f64 / 100.0).collect(),
            f_delta: 0.1,
            horizon_slots: 2000,
            fork_threshold: 100,
            prob: 0.25,
            max_targets: 64,
            lag: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub beta: f64,
    /// Total block rate; `lambda_a = beta * lambda`, `lambda_h = (1 - beta) * lambda`.
    pub lambda: f64,
    pub horizon: f64,
    pub delta: f64,
    pub c: u64,
    pub roots: TreeRoots,
    pub reveal: ContinuousReveal,
    pub cap: Option<usize>,
    pub retire_deficit: Option<u64>,
    /// Blocks mined after `horizon - margin` are not judged; defaults to
    /// `10 / lambda_h`.
    pub margin: Option<f64>,
    /// Require the pooled event frequency to exceed this.
    pub min_frequency: Option<f64>,
    /// Require the genesis tree to out-grow the honest chain at the horizon
    /// in at least this fraction of runs.
    pub min_overtake_fraction: Option<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            lambda: 1.0,
            horizon: 625.0,
            delta: 0.0,
            c: 1,
            roots: TreeRoots::EveryHonest,
            reveal: ContinuousReveal::WhenAtLeastAsLong,
            cap: Some(500),
            retire_deficit: Some(30),
            margin: None,
            min_frequency: None,
            min_overtake_fraction: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailBoundConfig {
    pub lambda_a: f64,
    pub lambda_h: f64,
    pub horizon: f64,
    /// Active-miner cap of the private tree (`null` for the exact tree).
    pub cap: Option<usize>,
    pub xs: Vec<u64>,
    /// Allowed excess over the bound, in standard errors.
    pub sigmas: f64,
}

impl Default for TailBoundConfig {
    fn default() -> Self {
        Self { lambda_a: 0.5, lambda_h: 1.0, horizon: 20.0, cap: None, xs: vec![1, 2, 3], sigmas: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgTableConfig {
    pub max_g: u32,
    /// Simulated time of the window-process estimate, per `g` (the last
    /// entry repeats).
    pub corrected_horizons: Vec<f64>,
    pub tolerance_flawed: f64,
    pub tolerance_corrected: f64,
}

impl Default for RgTableConfig {
    fn default() -> Self {
        Self {
            max_g: 8,
            corrected_horizons: vec![2e5, 2e5, 2e5, 1e5, 1e5, 1e5, 1e5, 6e4, 4e4],
            tolerance_flawed: 5e-4,
            tolerance_corrected: 5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct D1RatesConfig {
    pub horizon: f64,
    pub tolerance: f64,
}

impl Default for D1RatesConfig {
    fn default() -> Self {
        Self { horizon: 1e5, tolerance: 0.03 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoinGrindConfig {
    pub beta: f64,
    pub f_delta: f64,
    pub horizon_slots: u64,
    pub kappa: u64,
    /// Stake lookback under the longest-chain rule.
    pub s_longest: u64,
    /// Truncation (and lookback) values tried under the `s`-truncated rule.
    pub s_trunc: Vec<u64>,
    pub min_overtake: Option<f64>,
    pub max_reversions: Option<usize>,
}

impl Default for CoinGrindConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            f_delta: 0.1,
            horizon_slots: 5000,
            kappa: 50,
            s_longest: 10,
            s_trunc: vec![50, 10],
            min_overtake: None,
            max_reversions: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentConfig {
    PhiTable(PhiTableConfig),
    NasGrowth(NasGrowthConfig),
    BalanceAttack(BalanceAttackConfig),
    ThresholdSweep(ThresholdSweepConfig),
    ConvergenceFreq(ConvergenceConfig),
    TailBound(TailBoundConfig),
    RgTable(RgTableConfig),
    D1Rates(D1RatesConfig),
    CoinGrindDemo(CoinGrindConfig),
}

fn load<T: DeserializeOwned + Default>(text: Option<&str>) -> Result<T, ExperimentError> {
    match text {
        None => Ok(T::default()),
        Some(t) => serde_json::from_str(t).map_err(|e| ExperimentError::Config(e.to_string())),
    }
}

fn require(ok: bool, msg: &str) -> Result<(), ExperimentError> {
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::Config(msg.into()))
    }
}

fn unit_interval(x: f64) -> bool {
    (0.0..1.0).contains(&x)
}

impl ExperimentConfig {
    pub fn parse(experiment: Experiment, text: Option<&str>) -> Result<Self, ExperimentError> {
        let cfg = match experiment {
            Experiment::PhiTable => Self::PhiTable(load(text)?),
            Experiment::NasGrowth => Self::NasGrowth(load(text)?),
            Experiment::BalanceAttack => Self::BalanceAttack(load(text)?),
            Experiment::ThresholdSweep => Self::ThresholdSweep(load(text)?),
            Experiment::ConvergenceFreq => Self::ConvergenceFreq(load(text)?),
            Experiment::TailBound => Self::TailBound(load(text)?),
            Experiment::RgTable => Self::RgTable(load(text)?),
            Experiment::D1Rates => Self::D1Rates(load(text)?),
            Experiment::CoinGrindDemo => Self::CoinGrindDemo(load(text)?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        match self {
            Self::PhiTable(c) => {
                require(!c.cs.is_empty() && c.cs.iter().all(|&c| c >= 1), "cs must be non-empty and >= 1")?;
                require(c.cross_check_max_c >= 1, "cross_check_max_c must be >= 1")
            }
            Self::NasGrowth(c) => {
                require(c.lambda_a > 0.0 && c.horizon > 0.0, "lambda_a and horizon must be positive")?;
                require(!c.cs.is_empty() && c.cs.iter().all(|&c| c >= 1), "cs must be non-empty and >= 1")?;
                require(c.cap != Some(0), "cap must be positive")
            }
            Self::BalanceAttack(c) => {
                require(unit_interval(c.beta), "beta must be in [0, 1)")?;
                require(!c.attacks.is_empty(), "attacks must be non-empty")?;
                require(c.max_targets >= 1, "max_targets must be >= 1")?;
                require(c.c >= 1 && c.kappa >= 1, "c and kappa must be >= 1")
            }
            Self::ThresholdSweep(c) => {
                require(!c.gs.is_empty() && !c.betas.is_empty(), "gs and betas must be non-empty")?;
                require(c.betas.iter().all(|&b| unit_interval(b)), "betas must be in [0, 1)")?;
                require(c.max_targets >= 1, "max_targets must be >= 1")
            }
            Self::ConvergenceFreq(c) => {
                require(unit_interval(c.beta), "beta must be in [0, 1)")?;
                require(c.lambda > 0.0 && c.horizon > 0.0, "lambda and horizon must be positive")?;
                require(c.delta >= 0.0, "delta must be non-negative")
            }
            Self::TailBound(c) => require(c.lambda_a > 0.0 && c.horizon > 0.0, "lambda_a and horizon must be positive"),
            Self::RgTable(c) => require(!c.corrected_horizons.is_empty(), "corrected_horizons must be non-empty"),
            Self::D1Rates(c) => require(c.horizon > 0.0, "horizon must be positive"),
            Self::CoinGrindDemo(c) => {
                require(unit_interval(c.beta), "beta must be in [0, 1)")?;
                require(c.s_longest >= 1 && c.s_trunc.iter().all(|&s| s >= 1), "s values must be >= 1")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        for e in Experiment::ALL {
            let cfg = ExperimentConfig::parse(e, None).unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::parse(e, Some(&text)).unwrap(), cfg, "{e}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse(Experiment::PhiTable, Some(r#"{"cs": [1], "colour": 3}"#)).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn partial_configs_keep_defaults() {
        let ExperimentConfig::BalanceAttack(c) =
            ExperimentConfig::parse(Experiment::BalanceAttack, Some(r#"{"g": 1, "beta": 0.32}"#)).unwrap()
        else {
            panic!("wrong variant")
        };
        assert_eq!((c.g, c.beta, c.horizon_slots), (1, 0.32, 2000));
    }
}
