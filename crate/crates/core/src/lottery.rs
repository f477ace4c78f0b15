//! Mock-VRF leader election with `c`-correlated randomness, plus the scalar
//! stake table used for stake lookback.
//!
//! The PRF is `splitmix64` composed three times, so every output is
//! reproducible bit-for-bit on any platform.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocktree::{Block, BlockId, BlockTree, Truncation};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The standard splitmix64 step: advance by the golden gamma, then finalize.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stand-in for a VRF evaluation.
pub fn prf64(rand_source: u64, slot: u64, secret_key: u64) -> u64 {
    splitmix64(rand_source ^ splitmix64(slot ^ splitmix64(secret_key)))
}

/// Maps a hash to `[0, 1)`.
pub fn unit(hash: u64) -> f64 {
    // 2^-64; exact in f64.
    hash as f64 * (1.0 / 18_446_744_073_709_551_616.0)
}

#[derive(Debug, Error, PartialEq)]
pub enum LotteryError {
    #[error("slot {slot} is not after parent slot {parent_slot}")]
    StaleSlot { parent_slot: u64, slot: u64 },
    #[error("stake table: {0}")]
    StakeTable(String),
    #[error("invalid lottery parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LotteryMode {
    Slotted,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotteryParams {
    pub rho_norm: f64,
    pub f_delta: f64,
    pub mode: LotteryMode,
}

impl LotteryParams {
    /// Slotted-mode parameters; `rho_norm` equals `f_delta` there.
    pub fn slotted(f_delta: f64) -> Self {
        Self { rho_norm: f_delta, f_delta, mode: LotteryMode::Slotted }
    }

    pub fn validate(&self) -> Result<(), LotteryError> {
        if !(self.rho_norm > 0.0 && self.rho_norm <= 1.0) {
            return Err(LotteryError::InvalidParams(format!("rho_norm {} not in (0,1]", self.rho_norm)));
        }
        if !(self.f_delta > 0.0) {
            return Err(LotteryError::InvalidParams(format!("f_delta {} must be positive", self.f_delta)));
        }
        if self.mode == LotteryMode::Slotted && self.rho_norm != self.f_delta {
            return Err(LotteryError::InvalidParams("slotted mode requires rho_norm == f_delta".into()));
        }
        Ok(())
    }
}

/// A registered node: its index, PRF key and (static) stake fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stakeholder {
    pub index: u32,
    pub secret_key: u64,
    pub stake: f64,
}

impl Stakeholder {
    /// Key derived from the index, as for stake-table entries without one.
    pub fn new(index: u32, stake: f64) -> Self {
        Self { index, secret_key: splitmix64(index as u64), stake }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StakeEntry {
    index: u32,
    stake: f64,
    secret_key: Option<u64>,
}

/// Parses a JSON stake table and checks that stakes sum to one.
pub fn parse_stake_table(json: &str) -> Result<Vec<Stakeholder>, LotteryError> {
    let entries: Vec<StakeEntry> =
        serde_json::from_str(json).map_err(|e| LotteryError::StakeTable(e.to_string()))?;
    let nodes: Vec<Stakeholder> = entries
        .into_iter()
        .map(|e| Stakeholder {
            index: e.index,
            secret_key: e.secret_key.unwrap_or_else(|| splitmix64(e.index as u64)),
            stake: e.stake,
        })
        .collect();
    if nodes.iter().any(|n| !(n.stake >= 0.0)) {
        return Err(LotteryError::StakeTable("negative stake".into()));
    }
    let total: f64 = nodes.iter().map(|n| n.stake).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(LotteryError::StakeTable(format!("stakes sum to {total}, expected 1")));
    }
    Ok(nodes)
}

/// Win test for an explicit stake value.
pub fn elect_with_stake(
    secret_key: u64,
    stake: f64,
    parent: &Block,
    slot: u64,
    params: &LotteryParams,
) -> Result<Option<u64>, LotteryError> {
    if slot <= parent.slot {
        return Err(LotteryError::StaleSlot { parent_slot: parent.slot, slot });
    }
    let hash = prf64(parent.rand_source, slot, secret_key);
    Ok((unit(hash) < params.rho_norm * stake).then_some(hash))
}

/// Runs `node`'s election on `parent` in `slot`; returns the winning hash.
///
/// The outcome depends on the parent only through its `rand_source`, so all
/// parents sharing randomness win or lose together.
pub fn elect(
    node: &Stakeholder,
    parent: &Block,
    slot: u64,
    params: &LotteryParams,
) -> Result<Option<u64>, LotteryError> {
    elect_with_stake(node.secret_key, node.stake, parent, slot, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: u32,
    pub to: u32,
    pub amount: f64,
}

/// Where stake values come from.
#[derive(Clone, Debug, PartialEq)]
pub enum StakeMode {
    Static,
    /// Genesis table plus transfers attached to blocks.
    Dynamic(StakeLedger),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StakeLedger {
    genesis: HashMap<u32, f64>,
    transfers: HashMap<BlockId, Vec<Transfer>>,
}

impl StakeLedger {
    pub fn new(genesis: &[Stakeholder]) -> Self {
        Self { genesis: genesis.iter().map(|n| (n.index, n.stake)).collect(), transfers: HashMap::new() }
    }

    /// Records a transfer carried by `block`.
    pub fn record(&mut self, block: BlockId, t: Transfer) {
        self.transfers.entry(block).or_default().push(t);
    }

    pub fn genesis_stake(&self, node: u32) -> f64 {
        self.genesis.get(&node).copied().unwrap_or(0.0)
    }

    /// Stake of `node` after applying every transfer on the path from genesis
    /// to `block`, inclusive.
    pub fn stake_after(&self, tree: &BlockTree, node: u32, block: BlockId) -> f64 {
        let mut stake = self.genesis_stake(node);
        let mut carriers: Vec<BlockId> = self.transfers.keys().copied().collect();
        carriers.sort_unstable();
        for id in carriers.into_iter().filter(|&b| tree.is_ancestor(b, block)) {
            for t in &self.transfers[&id] {
                if t.from == node {
                    stake -= t.amount;
                }
                if t.to == node {
                    stake += t.amount;
                }
            }
        }
        stake
    }
}

/// Stake used for an election on `parent`: the ledger state at the ancestor
/// `s - 1` blocks above `parent` (genesis values when the chain is shorter).
pub fn stake_at(mode: &StakeMode, tree: &BlockTree, node: &Stakeholder, parent: BlockId, s: Truncation) -> f64 {
    match mode {
        StakeMode::Static => node.stake,
        StakeMode::Dynamic(ledger) => {
            let lookback = match s {
                Truncation::Finite(s) => s - 1,
                Truncation::Infinite => u64::MAX,
            };
            let h = tree.height(parent);
            if h < lookback {
                return ledger.genesis_stake(node.index);
            }
            ledger.stake_after(tree, node.index, tree.ancestor_at(parent, h - lookback))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocktree::{MinerId, ProtocolParams, GENESIS};

    #[test]
    fn splitmix_golden_value() {
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn prf_is_deterministic() {
        assert_eq!(prf64(1, 2, 3), prf64(1, 2, 3));
        assert_ne!(prf64(1, 2, 3), prf64(1, 2, 4));
    }

    #[test]
    fn zero_and_full_stake() {
        let tree = BlockTree::new(ProtocolParams::default(), 0);
        let p = LotteryParams::slotted(1.0);
        let zero = Stakeholder::new(0, 0.0);
        let full = Stakeholder::new(1, 1.0);
        for slot in 1..200 {
            assert_eq!(elect(&zero, tree.block(GENESIS), slot, &p).unwrap(), None);
            assert!(elect(&full, tree.block(GENESIS), slot, &p).unwrap().is_some());
        }
    }

    #[test]
    fn correlated_siblings_agree() {
        let mut tree = BlockTree::new(ProtocolParams::with_c(3), 42);
        let a = tree.append(GENESIS, 1, MinerId(0), true, 7).unwrap();
        let b = tree.append(GENESIS, 2, MinerId(1), true, 9).unwrap();
        assert_eq!(tree.block(a).rand_source, tree.block(b).rand_source);
        let p = LotteryParams::slotted(0.5);
        let node = Stakeholder::new(3, 0.5);
        for slot in 3..500 {
            assert_eq!(
                elect(&node, tree.block(a), slot, &p).unwrap(),
                elect(&node, tree.block(b), slot, &p).unwrap()
            );
        }
    }

    #[test]
    fn stale_slot_rejected() {
        let tree = BlockTree::new(ProtocolParams::default(), 0);
        let p = LotteryParams::slotted(0.1);
        assert!(matches!(
            elect(&Stakeholder::new(0, 1.0), tree.block(GENESIS), 0, &p),
            Err(LotteryError::StaleSlot { .. })
        ));
    }

    #[test]
    fn stake_table_parsing() {
        let nodes = parse_stake_table(r#"[{"index":0,"stake":0.25,"secret_key":5},{"index":1,"stake":0.75}]"#).unwrap();
        assert_eq!(nodes[0].secret_key, 5);
        assert_eq!(nodes[1].secret_key, splitmix64(1));
        assert!(parse_stake_table(r#"[{"index":0,"stake":0.5}]"#).is_err());
        assert!(parse_stake_table(r#"[{"index":0,"stake":1.0,"color":1}]"#).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(LotteryParams::slotted(0.1).validate().is_ok());
        let bad = LotteryParams { rho_norm: 0.2, f_delta: 0.1, mode: LotteryMode::Slotted };
        assert!(bad.validate().is_err());
        let cont = LotteryParams { rho_norm: 0.2, f_delta: 0.1, mode: LotteryMode::Continuous };
        assert!(cont.validate().is_ok());
    }
}
