//! Attack strategies for the slotted engine.
//!
//! [`nas_tree`] holds the continuous-time private tree used by the
//! continuous engine.

pub mod nas_tree;

use serde::{Deserialize, Serialize};

use crate::blocktree::{BlockId, TreeView, Truncation, GENESIS};
use crate::lottery::{stake_at, StakeMode, Transfer};
use crate::simnet::{AdvCtx, AdversaryHook, SimError};

/// Bounds on how many blocks a nothing-at-stake adversary keeps mining on.
/// The exact strategy mines on every useful block, which grows without
/// bound; in practice blocks far below the private frontier never matter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NasLimits {
    /// Keep at most this many mining targets, highest first.
    pub max_targets: usize,
    /// Drop targets more than `lag` below the highest target.
    pub lag: u64,
}

impl Default for NasLimits {
    fn default() -> Self {
        Self { max_targets: 64, lag: 20 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevealPolicy {
    Never,
    /// Publish the deepest private chain once it beats every public chain.
    WhenLonger,
}

/// Mining frontier of a nothing-at-stake miner with correlation `c`.
///
/// Parents of godfather blocks stay targets (each child gets fresh
/// randomness); any other block is dropped once it has a child, since more
/// children would win in exactly the same slots.
#[derive(Clone, Debug)]
struct Frontier {
    c: u64,
    limits: NasLimits,
    targets: Vec<BlockId>,
}

impl Frontier {
    fn new(c: u64, limits: NasLimits, roots: &[BlockId]) -> Self {
        Self { c, limits, targets: roots.to_vec() }
    }

    fn is_fork_point(&self, height: u64) -> bool {
        self.c == 1 || (self.c != crate::blocktree::C_INFINITE && height % self.c == self.c - 1)
    }

    /// Mines on every target; returns the new blocks.
    fn mine(&mut self, ctx: &mut AdvCtx<'_>) -> Result<Vec<BlockId>, SimError> {
        let mut fresh = Vec::new();
        let mut spent = Vec::new();
        for &t in &self.targets {
            if ctx.tree().block(t).slot >= ctx.slot() {
                continue;
            }
            if let Some(b) = ctx.mine(t)? {
                fresh.push(b);
                if !self.is_fork_point(ctx.tree().height(t)) {
                    spent.push(t);
                }
            }
        }
        self.targets.retain(|t| !spent.contains(t));
        self.add(ctx, &fresh);
        Ok(fresh)
    }

    fn add(&mut self, ctx: &AdvCtx<'_>, blocks: &[BlockId]) {
        self.targets.extend_from_slice(blocks);
        let tree = ctx.tree();
        self.targets.sort_unstable_by_key(|&b| (std::cmp::Reverse(tree.height(b)), b));
        self.targets.dedup();
        self.targets.truncate(self.limits.max_targets);
        if let Some(&top) = self.targets.first() {
            let low = tree.height(top).saturating_sub(self.limits.lag);
            self.targets.retain(|&b| tree.height(b) >= low);
        }
    }
}

/// Private nothing-at-stake attack from genesis.
#[derive(Clone, Debug)]
pub struct PrivateNas {
    pub reveal: RevealPolicy,
    frontier: Frontier,
    deepest: BlockId,
    /// Largest public height `H` the private tree has matched.
    pub longest_fork: u64,
}

impl PrivateNas {
    pub fn new(c: u64, limits: NasLimits, reveal: RevealPolicy) -> Self {
        Self { reveal, frontier: Frontier::new(c, limits, &[GENESIS]), deepest: GENESIS, longest_fork: 0 }
    }

    pub fn private_height(&self, ctx: &AdvCtx<'_>) -> u64 {
        ctx.tree().height(self.deepest)
    }
}

fn public_height(ctx: &AdvCtx<'_>) -> u64 {
    (0..ctx.view_count()).map(|v| ctx.view(v).max_height()).max().unwrap_or(0)
}

impl AdversaryHook for PrivateNas {
    fn on_slot(&mut self, ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        for b in self.frontier.mine(ctx)? {
            if ctx.tree().height(b) > ctx.tree().height(self.deepest) {
                self.deepest = b;
            }
        }
        let mine = ctx.tree().height(self.deepest);
        let public = public_height(ctx);
        if mine >= public {
            self.longest_fork = self.longest_fork.max(public);
        }
        if self.reveal == RevealPolicy::WhenLonger && mine > public && !ctx.is_public(self.deepest) {
            ctx.reveal(self.deepest)?;
        }
        Ok(())
    }
}

/// Which honest rule a [`Balance`] attack targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceTarget {
    /// `g`-greedy: a fork of length 1; every private block on the shorter
    /// side up to the taller height is revealed.
    GGreedy,
    /// `D`-distance-greedy with `D = 1`: a fork of length 2; one private
    /// chain is revealed on the shorter side.
    DGreedyD1,
}

/// Balance attack: keeps two public branches level by releasing private
/// blocks on whichever side falls behind, mining nothing-at-stake on both.
#[derive(Clone, Debug)]
pub struct Balance {
    pub target: BalanceTarget,
    limits: NasLimits,
    roots: [BlockId; 2],
    /// Side of each block (`0`, `1`, or `2` for neither).
    side: Vec<u8>,
    scanned: usize,
    frontiers: Vec<Frontier>,
    /// Unrevealed private blocks per side.
    hidden: [Vec<BlockId>; 2],
    public_height: [u64; 2],
    /// Height at the last slot the two sides were level.
    pub longest_balanced_fork: u64,
}

impl Balance {
    pub fn new(target: BalanceTarget, limits: NasLimits) -> Self {
        Self {
            target,
            limits,
            roots: [GENESIS; 2],
            side: Vec::new(),
            scanned: 0,
            frontiers: Vec::new(),
            hidden: [Vec::new(), Vec::new()],
            public_height: [0; 2],
            longest_balanced_fork: 0,
        }
    }

    fn scan(&mut self, ctx: &AdvCtx<'_>) -> [Vec<BlockId>; 2] {
        let tree = ctx.tree();
        let mut fresh = [Vec::new(), Vec::new()];
        for b in self.scanned..tree.len() {
            let b = b as BlockId;
            let s = match self.roots.iter().position(|&r| r == b) {
                Some(s) => s as u8,
                None => tree.block(b).parent.map_or(2, |p| self.side[p as usize]),
            };
            self.side.push(s);
            if s < 2 {
                fresh[s as usize].push(b);
                if ctx.is_public(b) {
                    let h = &mut self.public_height[s as usize];
                    *h = (*h).max(tree.height(b));
                } else {
                    self.hidden[s as usize].push(b);
                }
            }
        }
        self.scanned = tree.len();
        fresh
    }
}

impl AdversaryHook for Balance {
    fn init(&mut self, ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        let depth = match self.target {
            BalanceTarget::GGreedy => 1,
            BalanceTarget::DGreedyD1 => 2,
        };
        for s in 0..2 {
            let mut tip = GENESIS;
            for d in 1..=depth {
                tip = ctx.seed_public(tip, d, true)?;
                if d == 1 {
                    self.roots[s] = tip;
                }
            }
        }
        let fresh = self.scan(ctx);
        let c = ctx.config().params.c;
        self.frontiers = fresh.iter().map(|f| Frontier::new(c, self.limits, f)).collect();
        self.longest_balanced_fork = depth;
        Ok(())
    }

    fn on_slot(&mut self, ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        // Honest blocks of this slot join the mining frontiers first.
        let fresh = self.scan(ctx);
        for s in 0..2 {
            self.frontiers[s].add(ctx, &fresh[s]);
        }
        for s in 0..2 {
            self.frontiers[s].mine(ctx)?;
        }
        self.scan(ctx);
        let [h0, h1] = self.public_height;
        if h0 != h1 {
            let short = if h0 < h1 { 0 } else { 1 };
            let tall = h0.max(h1);
            let tree = ctx.tree();
            let mut due: Vec<BlockId> =
                self.hidden[short].iter().copied().filter(|&b| tree.height(b) <= tall).collect();
            if self.target == BalanceTarget::DGreedyD1 {
                due = due.iter().copied().max_by_key(|&b| (tree.height(b), std::cmp::Reverse(b))).into_iter().collect();
            }
            for b in due {
                for r in ctx.reveal(b)? {
                    let h = ctx.tree().height(r);
                    self.public_height[short] = self.public_height[short].max(h);
                    self.hidden[short].retain(|&x| x != r);
                }
            }
        }
        let [h0, h1] = self.public_height;
        if h0 == h1 {
            self.longest_balanced_fork = h0;
        }
        Ok(())
    }
}

/// Stake-grinding demo against dynamic stake.
///
/// The first private block moves all honest stake to the adversary. Once
/// the stake lookback on the private chain reflects that transfer, the
/// adversary controls every election there and produces a block per slot.
#[derive(Clone, Debug, Default)]
pub struct CoinGrind {
    first: Option<BlockId>,
    tip: Option<BlockId>,
    /// Slot at which grinding started.
    pub grinding_since: Option<u64>,
}

impl CoinGrind {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn first_private(&self) -> Option<BlockId> {
        self.first
    }

    fn controls_lottery(&self, ctx: &AdvCtx<'_>, parent: BlockId, s: Truncation) -> bool {
        stake_at(ctx.stake_mode(), ctx.tree(), ctx.identity(), parent, s) > 1.0 - 1e-9
    }
}

impl AdversaryHook for CoinGrind {
    fn init(&mut self, ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        if !matches!(ctx.stake_mode(), StakeMode::Dynamic(_)) {
            return Err(SimError::Config("coin grinding needs dynamic_stake".into()));
        }
        Ok(())
    }

    fn on_slot(&mut self, ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        let s = ctx.config().params.s;
        let tip = self.tip.unwrap_or(GENESIS);
        let new = if self.controls_lottery(ctx, tip, s) {
            self.grinding_since.get_or_insert(ctx.slot());
            Some(ctx.forge(tip, 0)?)
        } else {
            ctx.mine(tip)?
        };
        if let Some(b) = new {
            if self.first.is_none() {
                self.first = Some(b);
                let me = ctx.identity().index;
                for from in 0..me {
                    let amount = (1.0 - ctx.config().beta) / me as f64;
                    ctx.record_transfer(b, Transfer { from, to: me, amount })?;
                }
            }
            self.tip = Some(b);
        }
        if let Some(t) = self.tip {
            if !ctx.is_public(t) && ctx.tree().height(t) > ctx.view(0).max_height() {
                ctx.reveal(t)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::{run, HonestRule, SimConfig};

    #[test]
    fn private_nas_stays_private() {
        let cfg = SimConfig { beta: 0.3, horizon_slots: 300, seed: 5, ..Default::default() };
        let mut adv = PrivateNas::new(1, NasLimits::default(), RevealPolicy::Never);
        let tr = run(&cfg, &mut adv).unwrap();
        let private = tr.final_tree.blocks().iter().filter(|b| !b.honest).count();
        assert!(private > 5);
        assert!(tr.public_since.iter().zip(tr.final_tree.blocks()).all(|(p, b)| b.honest == p.is_some()));
    }

    #[test]
    fn balance_seeds_a_fork() {
        let mut params = crate::blocktree::ProtocolParams::default();
        params.g = 1;
        let cfg = SimConfig {
            beta: 0.3,
            horizon_slots: 200,
            honest_rule: HonestRule::GGreedy,
            params,
            seed: 2,
            ..Default::default()
        };
        let mut adv = Balance::new(BalanceTarget::GGreedy, NasLimits::default());
        let tr = run(&cfg, &mut adv).unwrap();
        assert_eq!(tr.final_tree.children(GENESIS).len() >= 2, true);
        assert!(adv.longest_balanced_fork >= 1);
        tr.final_tree.verify().unwrap();
    }

    #[test]
    fn coin_grind_requires_dynamic_stake() {
        let cfg = SimConfig { beta: 0.1, horizon_slots: 10, ..Default::default() };
        assert!(run(&cfg, &mut CoinGrind::new()).is_err());
    }
}
