//! Simulation engines.
//!
//! [`run`] is the slotted engine: honest nodes with partial views, bounded
//! message delay and an omniscient adversary hook. [`continuous`] holds the
//! continuous-time engine used for the branching-random-walk experiments.

pub mod continuous;
mod slotted;
mod view;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocktree::{BlockId, BlockTree, ChainRef, DTieBreak, ProtocolParams, TreeError};
use crate::lottery::LotteryError;

pub use slotted::{run, AdvCtx, AdversaryHook, NullAdversary};
pub use view::{View, ViewRef};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Lottery(#[from] LotteryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HonestRule {
    LongestChain,
    STrunc,
    GGreedy,
    DGreedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Adversarial stake fraction.
    pub beta: f64,
    /// Expected number of blocks per slot over all stake.
    pub f_delta: f64,
    /// Maximum message delay in slots.
    pub delay_slots: u64,
    pub horizon_slots: u64,
    pub honest_rule: HonestRule,
    pub params: ProtocolParams,
    pub seed: u64,
    /// Number of honest nodes; each has its own view and equal stake.
    pub honest_nodes: u32,
    pub d_tie_break: DTieBreak,
    pub genesis_nonce: u64,
    /// Stake lookback through a per-block ledger instead of a fixed table.
    pub dynamic_stake: bool,
    pub record_deliveries: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            f_delta: 0.1,
            delay_slots: 0,
            horizon_slots: 2000,
            honest_rule: HonestRule::LongestChain,
            params: ProtocolParams::default(),
            seed: 0,
            honest_nodes: 1,
            d_tie_break: DTieBreak::NoSlowDown,
            genesis_nonce: 0,
            dynamic_stake: false,
            record_deliveries: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta must be in [0, 1)");
        }
        if !(self.f_delta > 0.0 && self.f_delta <= 1.0) {
            return bad("f_delta must be in (0, 1]");
        }
        if self.horizon_slots == 0 {
            return bad("horizon_slots must be at least 1");
        }
        if self.honest_nodes == 0 {
            return bad("honest_nodes must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryEventKind {
    Mine,
    Reveal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryEvent {
    pub slot: u64,
    pub kind: AdversaryEventKind,
    pub blocks: Vec<BlockId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub block: BlockId,
    /// `None` for blocks released by the adversary.
    pub sender_view: Option<u32>,
    pub receiver_view: u32,
    pub slot: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TipRecord {
    pub slot: u64,
    pub chain: ChainRef,
}

/// Everything a slotted run produced.
#[derive(Clone, Debug)]
pub struct SimTrace {
    /// `(slot, block)` for every honest block, in mining order.
    pub honest_arrivals: Vec<(u64, BlockId)>,
    pub adversary_events: Vec<AdversaryEvent>,
    /// Only filled when `record_deliveries` is set.
    pub deliveries: Vec<Delivery>,
    pub final_tree: BlockTree,
    /// Adopted chain of each view, recorded whenever it changes.
    pub per_view_tips: Vec<Vec<TipRecord>>,
    /// Slot at which each block became public (`None`: never revealed).
    pub public_since: Vec<Option<u64>>,
    pub first_slot: u64,
    pub horizon_slots: u64,
    pub delay_slots: u64,
}

impl SimTrace {
    /// Adopted chain of `view` at the end of `slot`'s fork choice.
    pub fn adopted_at(&self, view: usize, slot: u64) -> ChainRef {
        let recs = &self.per_view_tips[view];
        let i = recs.partition_point(|r| r.slot <= slot);
        if i == 0 {
            self.final_tree.chain(self.final_tree.genesis())
        } else {
            recs[i - 1].chain
        }
    }

    pub fn final_adopted(&self, view: usize) -> ChainRef {
        self.per_view_tips[view]
            .last()
            .map(|r| r.chain)
            .unwrap_or_else(|| self.final_tree.chain(self.final_tree.genesis()))
    }

    pub fn write_honest_arrivals_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "slot,block")?;
        for (slot, b) in &self.honest_arrivals {
            writeln!(w, "{slot},{b}")?;
        }
        Ok(())
    }

    pub fn write_adversary_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "slot,kind,block")?;
        for e in &self.adversary_events {
            let kind = match e.kind {
                AdversaryEventKind::Mine => "mine",
                AdversaryEventKind::Reveal => "reveal",
            };
            for b in &e.blocks {
                writeln!(w, "{},{kind},{b}", e.slot)?;
            }
        }
        Ok(())
    }

    pub fn write_deliveries_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "block,sender_view,receiver_view,slot")?;
        for d in &self.deliveries {
            let sender = d.sender_view.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{sender},{},{}", d.block, d.receiver_view, d.slot)?;
        }
        Ok(())
    }

    pub fn write_tips_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "view,slot,tip,length")?;
        for (v, recs) in self.per_view_tips.iter().enumerate() {
            for r in recs {
                writeln!(w, "{v},{},{},{}", r.slot, r.chain.tip, r.chain.length)?;
            }
        }
        Ok(())
    }
}
