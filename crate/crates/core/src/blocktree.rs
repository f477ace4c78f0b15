//! Blocks, the append-only block tree, and the fork-choice and mining-set rules
//! (longest chain, `s`-truncated longest chain, `g`-greedy, `D`-distance-greedy).
//!
//! Block ids are dense indices in creation order; genesis is always id `0`.
//! Every rule is written against [`TreeView`] so the same code serves the
//! global tree and the partial per-node views kept by the simulator.

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type BlockId = u64;

/// Id of the genesis block in every tree.
pub const GENESIS: BlockId = 0;

/// Correlation parameter meaning "never refresh the randomness".
pub const C_INFINITE: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MinerId(pub u32);

impl fmt::Display for MinerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    pub height: u64,
    pub slot: u64,
    pub miner: MinerId,
    pub honest: bool,
    /// Common randomness inherited by children of this block.
    pub rand_source: u64,
    /// Lottery output that won this block's election.
    pub lottery_hash: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("slot {slot} does not follow parent slot {parent_slot}")]
    NonIncreasingSlot { parent_slot: u64, slot: u64 },
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error("block {id}: {reason}")]
    Inconsistent { id: BlockId, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Stake-lookback / fork-choice truncation parameter `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truncation {
    Finite(u64),
    Infinite,
}

impl Truncation {
    pub fn finite(self) -> Option<u64> {
        match self {
            Truncation::Finite(s) => Some(s),
            Truncation::Infinite => None,
        }
    }
}

impl Serialize for Truncation {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Truncation::Finite(s) => ser.serialize_u64(*s),
            Truncation::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Truncation {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Option::<Raw>::deserialize(de)? {
            None => Ok(Truncation::Infinite),
            Some(Raw::Num(s)) => Ok(Truncation::Finite(s)),
            Some(Raw::Text(t)) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Truncation::Infinite)
            }
            Some(Raw::Text(t)) => Err(serde::de::Error::custom(format!(
                "expected an integer or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    /// Correlation parameter: randomness refreshes at heights divisible by `c`.
    pub c: u64,
    pub s: Truncation,
    pub g: u64,
    pub dist_d: u64,
    /// Confirmation depth.
    pub kappa: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { c: 1, s: Truncation::Infinite, g: 0, dist_d: 1, kappa: 50 }
    }
}

impl ProtocolParams {
    pub fn with_c(c: u64) -> Self {
        Self { c, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.c == 0 {
            return Err(TreeError::InvalidParams("c must be at least 1".into()));
        }
        if self.s == Truncation::Finite(0) {
            return Err(TreeError::InvalidParams("s must be at least 1".into()));
        }
        if self.kappa == 0 {
            return Err(TreeError::InvalidParams("kappa must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether a block at `height` draws fresh randomness (a godfather block).
    pub fn refreshes_at(&self, height: u64) -> bool {
        height % self.c == 0
    }
}

/// A chain identified by its tip; `length` equals the tip height.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainRef {
    pub tip: BlockId,
    pub length: u64,
}

/// How `longest_chain` picks among several maximal tips.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    /// The adversary designates the tip; falls back to the lowest id when the
    /// designated block is not one of the maximal tips.
    Designated(BlockId),
    EarliestSeen,
    LowestId,
}

/// Selection of the reference longest chain for the `D`-distance-greedy rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DTieBreak {
    Random,
    /// Prefer the tip with the most siblings.
    NoSlowDown,
}

/// Read access to (a subset of) a block tree.
///
/// Views must be ancestor-closed: if a block is visible so is its parent.
pub trait TreeView {
    fn tree(&self) -> &BlockTree;
    fn contains(&self, id: BlockId) -> bool;
    fn max_height(&self) -> u64;
    fn at_height(&self, height: u64) -> &[BlockId];
    /// Arrival rank used by [`TieBreak::EarliestSeen`].
    fn seen_rank(&self, id: BlockId) -> u64 {
        id
    }
}

#[derive(Clone, Debug)]
pub struct BlockTree {
    blocks: Vec<Block>,
    children: Vec<Vec<BlockId>>,
    by_height: Vec<Vec<BlockId>>,
    /// Skew-binary jump pointers: ancestor queries in `O(log height)`.
    jump: Vec<BlockId>,
    params: ProtocolParams,
}

impl BlockTree {
    /// A tree holding only genesis, whose randomness is `genesis_nonce`.
    pub fn new(params: ProtocolParams, genesis_nonce: u64) -> Self {
        let genesis = Block {
            id: GENESIS,
            parent: None,
            height: 0,
            slot: 0,
            miner: MinerId(0),
            honest: true,
            rand_source: genesis_nonce,
            lottery_hash: genesis_nonce,
        };
        Self {
            blocks: vec![genesis],
            children: vec![Vec::new()],
            by_height: vec![vec![GENESIS]],
            jump: vec![GENESIS],
            params,
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn genesis(&self) -> BlockId {
        GENESIS
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id as usize)
    }

    /// Panics on an unknown id; use [`BlockTree::get`] for untrusted input.
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id as usize]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn children(&self, id: BlockId) -> &[BlockId] {
        &self.children[id as usize]
    }

    pub fn height(&self, id: BlockId) -> u64 {
        self.blocks[id as usize].height
    }

    /// Appends a block, deriving its height and randomness from `parent`.
    pub fn append(
        &mut self,
        parent: BlockId,
        slot: u64,
        miner: MinerId,
        honest: bool,
        lottery_hash: u64,
    ) -> Result<BlockId, TreeError> {
        let p = self.get(parent).ok_or(TreeError::UnknownBlock(parent))?;
        if slot <= p.slot {
            return Err(TreeError::NonIncreasingSlot { parent_slot: p.slot, slot });
        }
        let height = p.height + 1;
        let rand_source =
            if self.params.refreshes_at(height) { lottery_hash } else { p.rand_source };
        let id = self.blocks.len() as BlockId;
        self.blocks.push(Block {
            id,
            parent: Some(parent),
            height,
            slot,
            miner,
            honest,
            rand_source,
            lottery_hash,
        });
        self.children.push(Vec::new());
        self.children[parent as usize].push(id);
        self.push_jump(parent);
        if self.by_height.len() <= height as usize {
            self.by_height.push(Vec::new());
        }
        self.by_height[height as usize].push(id);
        Ok(id)
    }

    fn push_jump(&mut self, parent: BlockId) {
        let j1 = self.jump[parent as usize];
        let j2 = self.jump[j1 as usize];
        let (hp, h1, h2) = (self.height(parent), self.height(j1), self.height(j2));
        self.jump.push(if hp - h1 == h1 - h2 && parent != GENESIS { j2 } else { parent });
    }

    pub fn chain(&self, tip: BlockId) -> ChainRef {
        ChainRef { tip, length: self.height(tip) }
    }

    /// Ancestor of `id` at `height` (the block itself when heights match).
    pub fn ancestor_at(&self, id: BlockId, height: u64) -> BlockId {
        let mut cur = id;
        debug_assert!(height <= self.height(cur));
        while self.height(cur) > height {
            let j = self.jump[cur as usize];
            cur = if self.height(j) >= height {
                j
            } else {
                self.blocks[cur as usize].parent.expect("non-genesis block has a parent")
            };
        }
        cur
    }

    /// `a` is an ancestor of (or equal to) `b`.
    pub fn is_ancestor(&self, a: BlockId, b: BlockId) -> bool {
        let ha = self.height(a);
        ha <= self.height(b) && self.ancestor_at(b, ha) == a
    }

    /// Block ids from genesis to `tip`, inclusive.
    pub fn path(&self, tip: BlockId) -> Vec<BlockId> {
        let mut out = Vec::with_capacity(self.height(tip) as usize + 1);
        let mut cur = Some(tip);
        while let Some(id) = cur {
            out.push(id);
            cur = self.blocks[id as usize].parent;
        }
        out.reverse();
        out
    }

    pub fn longest_chain(&self, tie: TieBreak) -> ChainRef {
        select_longest(self, tie)
    }

    /// Deepest common ancestor of the two tips.
    pub fn fork_block(&self, a: ChainRef, b: ChainRef) -> BlockId {
        let h = a.length.min(b.length);
        let mut x = self.ancestor_at(a.tip, h);
        let mut y = self.ancestor_at(b.tip, h);
        // Jump pointers depend only on height, so both sides move in step.
        while x != y {
            let (jx, jy) = (self.jump[x as usize], self.jump[y as usize]);
            if jx != jy {
                x = jx;
                y = jy;
            } else {
                x = self.blocks[x as usize].parent.expect("genesis is common");
                y = self.blocks[y as usize].parent.expect("genesis is common");
            }
        }
        x
    }

    pub fn chain_distance(&self, a: ChainRef, b: ChainRef) -> u64 {
        let fork = self.height(self.fork_block(a, b));
        (a.length - fork).max(b.length - fork)
    }

    /// `s`-truncated longest-chain preference between the adopted chain and a
    /// candidate. The current chain wins every tie.
    pub fn s_trunc_prefer(&self, current: ChainRef, candidate: ChainRef, s: Truncation) -> ChainRef {
        let fork_height = self.height(self.fork_block(current, candidate));
        let post_cur = current.length - fork_height;
        let post_cand = candidate.length - fork_height;
        match s {
            Truncation::Finite(s) if post_cur.min(post_cand) >= s => {
                let slot_cur = self.block(self.ancestor_at(current.tip, fork_height + s)).slot;
                let slot_cand = self.block(self.ancestor_at(candidate.tip, fork_height + s)).slot;
                if slot_cand < slot_cur {
                    candidate
                } else {
                    current
                }
            }
            _ => {
                if candidate.length > current.length {
                    candidate
                } else {
                    current
                }
            }
        }
    }

    pub fn g_greedy_set(&self, g: u64) -> Vec<BlockId> {
        g_greedy_set(self, g)
    }

    pub fn d_greedy_set<R: Rng + ?Sized>(&self, dist_d: u64, tie: DTieBreak, rng: &mut R) -> Vec<BlockId> {
        d_greedy_set(self, dist_d, tie, rng)
    }

    /// Drops the last `min(k, length)` blocks.
    pub fn prune_to(&self, chain: ChainRef, k: u64) -> ChainRef {
        let length = chain.length.saturating_sub(k);
        ChainRef { tip: self.ancestor_at(chain.tip, length), length }
    }

    /// `a` is a prefix of `b`.
    pub fn is_prefix(&self, a: ChainRef, b: ChainRef) -> bool {
        self.is_ancestor(a.tip, b.tip)
    }

    /// Re-derives heights, the children index and the `c`-correlated
    /// randomness of every block and compares them with the stored values.
    pub fn verify(&self) -> Result<(), TreeError> {
        self.params.validate()?;
        let bad = |id, reason: &str| Err(TreeError::Inconsistent { id, reason: reason.into() });
        for b in &self.blocks {
            match b.parent {
                None if b.id != GENESIS => return bad(b.id, "only genesis may lack a parent"),
                None => {}
                Some(p) => {
                    let Some(pb) = self.get(p) else { return bad(b.id, "dangling parent") };
                    if p >= b.id {
                        return bad(b.id, "parent created after child");
                    }
                    if b.height != pb.height + 1 {
                        return bad(b.id, "height is not parent height + 1");
                    }
                    if b.slot <= pb.slot {
                        return bad(b.id, "slot does not increase along the chain");
                    }
                    let expected = if self.params.refreshes_at(b.height) {
                        b.lottery_hash
                    } else {
                        pb.rand_source
                    };
                    if b.rand_source != expected {
                        return bad(b.id, "rand_source violates the c-correlation rule");
                    }
                    if !self.children[p as usize].contains(&b.id) {
                        return bad(b.id, "missing from parent's children");
                    }
                }
            }
        }
        let indexed: usize = self.children.iter().map(Vec::len).sum();
        if indexed + 1 != self.blocks.len() {
            return bad(GENESIS, "children index has extra entries");
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "id,parent,height,slot,miner,honest,rand_source,lottery_hash";

    /// Writes the tree dump: a header line, then one block per line in id
    /// order (genesis first). 64-bit values are 16-digit lowercase hex.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for b in &self.blocks {
            let parent = b.parent.map(|p| p.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{:016x},{:016x}",
                b.id,
                parent,
                b.height,
                b.slot,
                b.miner,
                u8::from(b.honest),
                b.rand_source,
                b.lottery_hash
            )?;
        }
        Ok(())
    }

    /// Parses a dump written by [`BlockTree::write_csv`] and verifies it.
    pub fn read_csv<R: BufRead>(r: R, params: ProtocolParams) -> Result<Self, TreeError> {
        let mut tree: Option<BlockTree> = None;
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let perr = |reason: String| TreeError::Parse { line: line_no, reason };
            let line = line.map_err(|e| perr(e.to_string()))?;
            if i == 0 {
                if line.trim() != Self::CSV_HEADER {
                    return Err(perr("unexpected header".into()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(perr(format!("expected 8 fields, got {}", f.len())));
            }
            let dec = |s: &str| s.parse::<u64>().map_err(|e| perr(format!("{s:?}: {e}")));
            let hex = |s: &str| u64::from_str_radix(s, 16).map_err(|e| perr(format!("{s:?}: {e}")));
            let id = dec(f[0])?;
            let parent = if f[1].is_empty() { None } else { Some(dec(f[1])?) };
            let block = Block {
                id,
                parent,
                height: dec(f[2])?,
                slot: dec(f[3])?,
                miner: MinerId(f[4].parse().map_err(|e| perr(format!("miner: {e}")))?),
                honest: match f[5] {
                    "1" => true,
                    "0" => false,
                    other => return Err(perr(format!("honest flag {other:?}"))),
                },
                rand_source: hex(f[6])?,
                lottery_hash: hex(f[7])?,
            };
            match tree.as_mut() {
                None => {
                    if block.parent.is_some() || block.id != GENESIS {
                        return Err(perr("genesis must come first".into()));
                    }
                    let mut t = BlockTree::new(params.clone(), block.rand_source);
                    t.blocks[0] = block;
                    tree = Some(t);
                }
                Some(t) => {
                    let parent = block.parent.ok_or_else(|| perr("second genesis".into()))?;
                    if id != t.blocks.len() as BlockId {
                        return Err(perr("ids must be dense and in order".into()));
                    }
                    let pheight = t.get(parent).ok_or(TreeError::UnknownBlock(parent))?.height;
                    let height = block.height;
                    if height != pheight + 1 {
                        return Err(perr("height is not parent height + 1".into()));
                    }
                    t.blocks.push(block);
                    t.children.push(Vec::new());
                    t.children[parent as usize].push(id);
                    t.push_jump(parent);
                    if t.by_height.len() <= height as usize {
                        t.by_height.push(Vec::new());
                    }
                    t.by_height[height as usize].push(id);
                }
            }
        }
        let tree = tree.ok_or(TreeError::Parse { line: 0, reason: "empty dump".into() })?;
        tree.verify()?;
        Ok(tree)
    }
}

impl TreeView for BlockTree {
    fn tree(&self) -> &BlockTree {
        self
    }

    fn contains(&self, id: BlockId) -> bool {
        (id as usize) < self.blocks.len()
    }

    fn max_height(&self) -> u64 {
        (self.by_height.len() - 1) as u64
    }

    fn at_height(&self, height: u64) -> &[BlockId] {
        self.by_height.get(height as usize).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// All maximal-height blocks of the view.
pub fn longest_tips<V: TreeView + ?Sized>(view: &V) -> &[BlockId] {
    view.at_height(view.max_height())
}

pub fn select_longest<V: TreeView + ?Sized>(view: &V, tie: TieBreak) -> ChainRef {
    let length = view.max_height();
    let tips = view.at_height(length);
    let tip = match tie {
        TieBreak::Designated(d) if tips.contains(&d) => d,
        TieBreak::Designated(_) | TieBreak::LowestId => *tips.iter().min().expect("non-empty view"),
        TieBreak::EarliestSeen => *tips
            .iter()
            .min_by_key(|&&id| (view.seen_rank(id), id))
            .expect("non-empty view"),
    };
    ChainRef { tip, length }
}

/// Blocks an honest `g`-greedy miner works on: every block at height at least
/// `ℓ - g`, where `ℓ` is the longest-chain length of the view.
pub fn g_greedy_set<V: TreeView + ?Sized>(view: &V, g: u64) -> Vec<BlockId> {
    let top = view.max_height();
    let low = top.saturating_sub(g);
    (low..=top).flat_map(|h| view.at_height(h).iter().copied()).collect()
}

/// End blocks of every chain within distance `dist_d` of the chain ending at
/// `tip`, which must be a maximal tip of the view. These are exactly the
/// visible descendants of the tip's ancestor at height `ℓ - dist_d`.
pub fn d_greedy_set_for_tip<V: TreeView + ?Sized>(view: &V, tip: BlockId, dist_d: u64) -> Vec<BlockId> {
    let tree = view.tree();
    let anchor = tree.ancestor_at(tip, tree.height(tip).saturating_sub(dist_d));
    let mut out = Vec::new();
    let mut stack = vec![anchor];
    while let Some(b) = stack.pop() {
        out.push(b);
        stack.extend(tree.children(b).iter().copied().filter(|&c| view.contains(c)));
    }
    out.sort_unstable();
    out
}

/// Number of visible siblings of `tip`, itself included.
pub fn sibling_count<V: TreeView + ?Sized>(view: &V, tip: BlockId) -> usize {
    let tree = view.tree();
    match tree.block(tip).parent {
        None => 1,
        Some(p) => tree.children(p).iter().filter(|&&c| view.contains(c)).count(),
    }
}

/// Picks the reference longest chain for the `D`-distance-greedy rule.
pub fn d_greedy_reference<V: TreeView + ?Sized, R: Rng + ?Sized>(
    view: &V,
    tie: DTieBreak,
    rng: &mut R,
) -> BlockId {
    let tips = longest_tips(view);
    match tie {
        DTieBreak::Random => tips[rng.random_range(0..tips.len())],
        DTieBreak::NoSlowDown => *tips
            .iter()
            .max_by_key(|&&t| (sibling_count(view, t), std::cmp::Reverse(t)))
            .expect("non-empty view"),
    }
}

pub fn d_greedy_set<V: TreeView + ?Sized, R: Rng + ?Sized>(
    view: &V,
    dist_d: u64,
    tie: DTieBreak,
    rng: &mut R,
) -> Vec<BlockId> {
    let tip = d_greedy_reference(view, tie, rng);
    d_greedy_set_for_tip(view, tip, dist_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn params(c: u64) -> ProtocolParams {
        ProtocolParams::with_c(c)
    }

    fn linear(n: u64) -> BlockTree {
        let mut t = BlockTree::new(params(1), 0);
        let mut tip = GENESIS;
        for i in 1..=n {
            tip = t.append(tip, i, MinerId(1), true, i * 31).unwrap();
        }
        t
    }

    #[test]
    fn append_child_of_genesis_inherits_randomness() {
        let mut t = BlockTree::new(params(5), 0xabc);
        let id = t.append(GENESIS, 1, MinerId(1), true, 77).unwrap();
        let b = t.block(id);
        assert_eq!(b.height, 1);
        assert_eq!(b.rand_source, 0xabc);
    }

    #[test]
    fn append_at_godfather_height_refreshes() {
        let mut t = BlockTree::new(params(5), 1);
        let mut tip = GENESIS;
        for h in 1..=5u64 {
            tip = t.append(tip, h, MinerId(0), true, 100 + h).unwrap();
        }
        assert_eq!(t.block(tip).height, 5);
        assert_eq!(t.block(tip).rand_source, 105);
        assert_eq!(t.block(t.ancestor_at(tip, 4)).rand_source, 1);
    }

    #[test]
    fn append_rejects_stale_slot_and_unknown_parent() {
        let mut t = BlockTree::new(params(1), 0);
        let a = t.append(GENESIS, 3, MinerId(0), true, 1).unwrap();
        assert_eq!(
            t.append(a, 3, MinerId(0), true, 2),
            Err(TreeError::NonIncreasingSlot { parent_slot: 3, slot: 3 })
        );
        assert_eq!(t.append(99, 9, MinerId(0), true, 2), Err(TreeError::UnknownBlock(99)));
    }

    #[test]
    fn longest_chain_cases() {
        let t = BlockTree::new(params(1), 0);
        assert_eq!(t.longest_chain(TieBreak::LowestId), ChainRef { tip: GENESIS, length: 0 });
        assert_eq!(linear(5).longest_chain(TieBreak::LowestId).length, 5);

        let mut t = BlockTree::new(params(1), 0);
        let a = t.append(GENESIS, 1, MinerId(0), true, 1).unwrap();
        let b = t.append(GENESIS, 2, MinerId(9), false, 2).unwrap();
        assert_eq!(t.longest_chain(TieBreak::Designated(b)).tip, b);
        assert_eq!(t.longest_chain(TieBreak::LowestId).tip, a);
        assert_eq!(t.longest_chain(TieBreak::Designated(GENESIS)).tip, a);
    }

    #[test]
    fn fork_block_cases() {
        let mut t = BlockTree::new(params(1), 0);
        let a1 = t.append(GENESIS, 1, MinerId(0), true, 1).unwrap();
        let a2 = t.append(a1, 2, MinerId(0), true, 2).unwrap();
        let b1 = t.append(GENESIS, 1, MinerId(0), true, 3).unwrap();
        let s = t.append(a1, 3, MinerId(0), true, 4).unwrap();
        let ca2 = t.chain(a2);
        assert_eq!(t.fork_block(ca2, ca2), a2);
        assert_eq!(t.fork_block(ca2, t.chain(b1)), GENESIS);
        assert_eq!(t.fork_block(ca2, t.chain(s)), a1);
    }

    #[test]
    fn chain_distance_cases() {
        let mut t = BlockTree::new(params(1), 0);
        let p = t.append(GENESIS, 1, MinerId(0), true, 1).unwrap();
        let x = t.append(p, 2, MinerId(0), true, 2).unwrap();
        let y = t.append(p, 2, MinerId(0), true, 3).unwrap();
        assert_eq!(t.chain_distance(t.chain(x), t.chain(x)), 0);
        assert_eq!(t.chain_distance(t.chain(x), t.chain(p)), 1);
        assert_eq!(t.chain_distance(t.chain(x), t.chain(y)), 1);
    }

    fn grow(t: &mut BlockTree, from: BlockId, slots: &[u64]) -> BlockId {
        slots.iter().fold(from, |tip, &s| t.append(tip, s, MinerId(0), true, s).unwrap())
    }

    #[test]
    fn s_trunc_cases() {
        let mut t = BlockTree::new(params(1), 0);
        // current: 3 post-fork blocks, candidate: 2; s = 5 -> plain longest chain.
        let cur = grow(&mut t, GENESIS, &[10, 20, 30]);
        let cand = grow(&mut t, GENESIS, &[5, 6]);
        let (cur, cand) = (t.chain(cur), t.chain(cand));
        assert_eq!(t.s_trunc_prefer(cur, cand, Truncation::Finite(5)), cur);

        // both have >= s post-fork blocks; candidate's s-th block is earlier.
        let mut t = BlockTree::new(params(1), 0);
        let cur = grow(&mut t, GENESIS, &[20, 60, 70, 80]);
        let cand = grow(&mut t, GENESIS, &[10, 40]);
        let (cur, cand) = (t.chain(cur), t.chain(cand));
        assert_eq!(t.s_trunc_prefer(cur, cand, Truncation::Finite(2)), cand);
        // infinite s: the longer chain wins.
        assert_eq!(t.s_trunc_prefer(cand, cur, Truncation::Infinite), cur);
        // equal s-th slots: current retained.
        let mut t = BlockTree::new(params(1), 0);
        let a = grow(&mut t, GENESIS, &[1, 5]);
        let b = grow(&mut t, GENESIS, &[2, 5, 6]);
        let (a, b) = (t.chain(a), t.chain(b));
        assert_eq!(t.s_trunc_prefer(a, b, Truncation::Finite(2)), a);
    }

    #[test]
    fn g_greedy_cases() {
        let t = linear(5);
        let mut set = t.g_greedy_set(2);
        set.sort();
        let heights: Vec<u64> = set.iter().map(|&b| t.height(b)).collect();
        assert_eq!(heights, vec![3, 4, 5]);
        assert_eq!(t.g_greedy_set(0), vec![5]);
        assert_eq!(t.g_greedy_set(10).len(), 6);
        assert_eq!(t.g_greedy_set(u64::MAX).len(), 6);
    }

    #[test]
    fn d_greedy_cases() {
        let mut rng = rng_from_seed(1);
        let mut t = BlockTree::new(params(1), 0);
        let p = t.append(GENESIS, 1, MinerId(0), true, 1).unwrap();
        let tip = t.append(p, 2, MinerId(0), true, 2).unwrap();
        let s1 = t.append(p, 2, MinerId(0), true, 3).unwrap();
        let s2 = t.append(p, 3, MinerId(0), true, 4).unwrap();
        let mut expect = vec![p, tip, s1, s2];
        expect.sort();
        assert_eq!(d_greedy_set_for_tip(&t, tip, 1), expect);
        assert_eq!(d_greedy_set_for_tip(&t, tip, 0), vec![tip]);
        assert_eq!(t.d_greedy_set(1, DTieBreak::Random, &mut rng), expect);
    }

    #[test]
    fn no_slow_down_prefers_largest_sibling_group() {
        let mut rng = rng_from_seed(2);
        let mut t = BlockTree::new(params(1), 0);
        let a = t.append(GENESIS, 1, MinerId(0), true, 1).unwrap();
        let b = t.append(GENESIS, 1, MinerId(0), true, 2).unwrap();
        for s in 0..2 {
            t.append(a, 2 + s, MinerId(0), true, 10 + s).unwrap();
        }
        let b_kids: Vec<_> = (0..3).map(|s| t.append(b, 2 + s, MinerId(0), true, 20 + s).unwrap()).collect();
        let r = d_greedy_reference(&t, DTieBreak::NoSlowDown, &mut rng);
        assert!(b_kids.contains(&r));
        let set = t.d_greedy_set(1, DTieBreak::NoSlowDown, &mut rng);
        assert_eq!(set.len(), 4);
        assert!(set.contains(&b));
    }

    #[test]
    fn prune_cases() {
        let t = linear(10);
        let c = t.longest_chain(TieBreak::LowestId);
        assert_eq!(t.prune_to(c, 0), c);
        assert_eq!(t.prune_to(c, 3).length, 7);
        assert_eq!(t.prune_to(c, 30), ChainRef { tip: GENESIS, length: 0 });
        assert!(t.is_prefix(t.prune_to(c, 3), c));
    }

    #[test]
    fn csv_dump_round_trips() {
        let mut t = BlockTree::new(params(3), 0xdead_beef);
        let a = grow(&mut t, GENESIS, &[1, 2, 3, 4]);
        t.append(t.ancestor_at(a, 2), 9, MinerId(7), false, u64::MAX).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(BlockTree::CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().starts_with("0,,0,0,0,1,00000000deadbeef"));
        let back = BlockTree::read_csv(&buf[..], params(3)).unwrap();
        assert_eq!(back.blocks(), t.blocks());
    }

    #[test]
    fn csv_rejects_broken_correlation() {
        let mut t = BlockTree::new(params(2), 0);
        grow(&mut t, GENESIS, &[1, 2]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",0000000000000002,0000000000000002", ",0000000000000005,0000000000000002");
        assert!(matches!(
            BlockTree::read_csv(text.as_bytes(), params(2)),
            Err(TreeError::Inconsistent { .. })
        ));
    }

    #[test]
    fn truncation_serde() {
        let s: Truncation = serde_json::from_str("12").unwrap();
        assert_eq!(s, Truncation::Finite(12));
        let s: Truncation = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(s, Truncation::Infinite);
        let s: Truncation = serde_json::from_str("null").unwrap();
        assert_eq!(s, Truncation::Infinite);
        assert!(serde_json::from_str::<Truncation>("\"often\"").is_err());
    }
}
