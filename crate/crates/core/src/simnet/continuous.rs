//! Continuous-time engine: honest blocks arrive as a Poisson process and
//! extend the tip of a `Δ`-delayed public view; the adversary grows private
//! nothing-at-stake trees, optionally one rooted at every honest block.
//!
//! Time is real-valued. Blocks materialised in the [`BlockTree`] get slot
//! `⌊time·10⁶⌋`, bumped when needed so slots increase along every chain.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::nas_tree::{NasTree, NodeIdx};
use crate::blocktree::{BlockId, BlockTree, ChainRef, MinerId, ProtocolParams, GENESIS};
use crate::lottery::{prf64, splitmix64};
use crate::seed::rng_from_seed;

use super::SimError;

/// Slot ticks per unit of time.
pub const TICKS_PER_UNIT: f64 = 1e6;

/// Which blocks the adversary grows private trees from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeRoots {
    Genesis,
    EveryHonest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousReveal {
    Never,
    /// Publish a tree's deepest chain as soon as it is at least as long as
    /// the public chain.
    WhenAtLeastAsLong,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ContinuousAttack {
    None,
    PrivateNas {
        roots: TreeRoots,
        /// Maximum active miners per tree; `None` grows the exact tree.
        cap: Option<usize>,
        reveal: ContinuousReveal,
        /// Abandon a tree once honest growth since its root leads its depth by
        /// this much.
        retire_deficit: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuousConfig {
    /// Adversarial block rate.
    pub lambda_a: f64,
    /// Honest block rate.
    pub lambda_h: f64,
    pub horizon: f64,
    /// Network delay for honest blocks.
    pub delta: f64,
    pub c: u64,
    pub seed: u64,
    pub genesis_nonce: u64,
    pub attack: ContinuousAttack,
    /// Materialise every adversarial block, not only revealed ones.
    pub record_blocks: bool,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        Self {
            lambda_a: 0.1,
            lambda_h: 1.0,
            horizon: 1000.0,
            delta: 0.0,
            c: 1,
            seed: 0,
            genesis_nonce: 0,
            attack: ContinuousAttack::None,
            record_blocks: false,
        }
    }
}

impl ContinuousConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if !(self.lambda_a >= 0.0 && self.lambda_a.is_finite()) {
            return bad("lambda_a must be finite and non-negative");
        }
        if !(self.lambda_h >= 0.0 && self.lambda_h.is_finite()) {
            return bad("lambda_h must be finite and non-negative");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be non-negative");
        }
        if self.c == 0 {
            return bad("c must be at least 1");
        }
        if let ContinuousAttack::PrivateNas { cap: Some(0), .. } = self.attack {
            return bad("cap must be at least 1");
        }
        Ok(())
    }
}

/// One private tree of a continuous run.
#[derive(Clone, Debug)]
pub struct TreeRecord {
    /// Index of the root among honest arrivals plus one; `0` is genesis.
    pub root_index: usize,
    pub root_block: BlockId,
    pub root_time: f64,
    /// `(time, depth)` whenever the tree's depth grew.
    pub depth_jumps: Vec<(f64, u64)>,
    pub retired_at: Option<f64>,
}

impl TreeRecord {
    /// Depth reached by time `t`.
    pub fn depth_at(&self, t: f64) -> u64 {
        let i = self.depth_jumps.partition_point(|j| j.0 <= t);
        if i == 0 {
            0
        } else {
            self.depth_jumps[i - 1].1
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuousTrace {
    /// `(time, block)` for every honest block.
    pub honest_arrivals: Vec<(f64, BlockId)>,
    pub trees: Vec<TreeRecord>,
    /// The public longest chain, recorded whenever it changes.
    pub public_tips: Vec<(f64, ChainRef)>,
    /// `(time, tip)` of every reveal.
    pub reveals: Vec<(f64, BlockId)>,
    pub final_tree: BlockTree,
    pub delta: f64,
    pub horizon: f64,
    pub lambda_h: f64,
    pub lambda_a: f64,
}

impl ContinuousTrace {
    /// Number of honest blocks mined by time `t`.
    pub fn honest_count(&self, t: f64) -> usize {
        self.honest_arrivals.partition_point(|a| a.0 <= t)
    }

    /// Public chain at time `t`.
    pub fn public_at(&self, t: f64) -> ChainRef {
        let i = self.public_tips.partition_point(|r| r.0 <= t);
        if i == 0 {
            ChainRef { tip: GENESIS, length: 0 }
        } else {
            self.public_tips[i - 1].1
        }
    }

    pub fn write_depth_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tree,time,depth")?;
        for (k, t) in self.trees.iter().enumerate() {
            for (time, d) in &t.depth_jumps {
                writeln!(w, "{k},{time:.6},{d}")?;
            }
        }
        Ok(())
    }

    pub fn write_honest_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,block")?;
        for (t, b) in &self.honest_arrivals {
            writeln!(w, "{t:.6},{b}")?;
        }
        Ok(())
    }
}

struct LiveTree {
    nas: NasTree,
    /// Materialised blocks of this tree.
    blocks: HashMap<NodeIdx, BlockId>,
    /// Honest arrivals before the root.
    honest_before: usize,
    /// Deepest node already published.
    revealed_depth: u64,
}

#[derive(PartialEq)]
struct Next(f64, usize);

impl Eq for Next {}

impl PartialOrd for Next {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Next {
    // Min-heap on time, then tree index.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

fn ticks(t: f64) -> u64 {
    (t * TICKS_PER_UNIT) as u64
}

struct Engine {
    tree: BlockTree,
    adv_key: u64,
    public: ChainRef,
    public_tips: Vec<(f64, ChainRef)>,
    reveals: Vec<(f64, BlockId)>,
}

impl Engine {
    fn set_public(&mut self, t: f64, chain: ChainRef) {
        self.public = chain;
        match self.public_tips.last_mut() {
            Some(last) if last.0 == t => last.1 = chain,
            _ => self.public_tips.push((t, chain)),
        }
    }

    /// Offers a newly visible block to the public fork choice; adversarial
    /// blocks win ties.
    fn offer(&mut self, t: f64, id: BlockId) {
        let chain = self.tree.chain(id);
        let honest = self.tree.block(id).honest;
        if chain.length > self.public.length || (!honest && chain.length == self.public.length) {
            self.set_public(t, chain);
        }
    }

    /// Materialises the path to `node` of a private tree; returns its block.
    fn materialize(&mut self, live: &mut LiveTree, root: BlockId, node: NodeIdx) -> Result<BlockId, SimError> {
        let path = live.nas.path(node);
        let mut parent = root;
        for &n in &path[1..] {
            if let Some(&b) = live.blocks.get(&n) {
                parent = b;
                continue;
            }
            let pb = self.tree.block(parent);
            let slot = ticks(live.nas.time(n)).max(pb.slot + 1);
            let hash = prf64(pb.rand_source, slot, self.adv_key);
            let b = self.tree.append(parent, slot, MinerId(1), false, hash)?;
            live.blocks.insert(n, b);
            parent = b;
        }
        Ok(parent)
    }
}

/// Runs one continuous-time simulation.
pub fn run_continuous(cfg: &ContinuousConfig) -> Result<ContinuousTrace, SimError> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let key_base = splitmix64(cfg.seed ^ 0x6b65_7973);
    let honest_key = splitmix64(key_base);
    let mut eng = Engine {
        tree: BlockTree::new(ProtocolParams::with_c(cfg.c), cfg.genesis_nonce),
        adv_key: splitmix64(key_base ^ 1),
        public: ChainRef { tip: GENESIS, length: 0 },
        public_tips: Vec::new(),
        reveals: Vec::new(),
    };
    let (roots, cap, reveal, retire) = match cfg.attack {
        ContinuousAttack::None => (None, None, ContinuousReveal::Never, None),
        ContinuousAttack::PrivateNas { roots, cap, reveal, retire_deficit } => {
            (Some(roots), cap, reveal, retire_deficit)
        }
    };

    let exp = |rng: &mut crate::seed::SimRng, rate: f64| -> f64 {
        if rate > 0.0 {
            -(1.0 - rng.random::<f64>()).ln() / rate
        } else {
            f64::INFINITY
        }
    };

    let mut records: Vec<TreeRecord> = Vec::new();
    let mut live: Vec<Option<LiveTree>> = Vec::new();
    let mut heap: BinaryHeap<Next> = BinaryHeap::new();
    let mut honest_arrivals: Vec<(f64, BlockId)> = Vec::new();
    let mut pending: VecDeque<(f64, BlockId)> = VecDeque::new();
    let spawn = |records: &mut Vec<TreeRecord>,
                 live: &mut Vec<Option<LiveTree>>,
                 heap: &mut BinaryHeap<Next>,
                 rng: &mut crate::seed::SimRng,
                 tree: &BlockTree,
                 root: BlockId,
                 t: f64,
                 honest_before: usize| {
        let nas = NasTree::new(cfg.c, tree.height(root), t, cap);
        let k = records.len();
        records.push(TreeRecord {
            root_index: honest_before,
            root_block: root,
            root_time: t,
            depth_jumps: Vec::new(),
            retired_at: None,
        });
        let rate = cfg.lambda_a * nas.active_count() as f64;
        live.push(Some(LiveTree { nas, blocks: HashMap::new(), honest_before, revealed_depth: 0 }));
        heap.push(Next(t + exp(rng, rate), k));
    };
    if roots.is_some() {
        spawn(&mut records, &mut live, &mut heap, &mut rng, &eng.tree, GENESIS, 0.0, 0);
    }

    let mut next_honest = exp(&mut rng, cfg.lambda_h);
    loop {
        let next_delivery = pending.front().map_or(f64::INFINITY, |p| p.0);
        let next_tree = heap.peek().map_or(f64::INFINITY, |n| n.0);
        let t = next_honest.min(next_delivery).min(next_tree);
        if t > cfg.horizon {
            break;
        }
        if next_delivery <= t {
            let (_, b) = pending.pop_front().expect("peeked");
            eng.offer(t, b);
        } else if next_honest <= t {
            // The honest miner extends the tip it can see.
            let parent = eng.tree.block(eng.public.tip);
            let slot = ticks(t).max(parent.slot + 1);
            let hash = prf64(parent.rand_source, slot, honest_key);
            let id = eng.tree.append(eng.public.tip, slot, MinerId(0), true, hash)?;
            honest_arrivals.push((t, id));
            if cfg.delta > 0.0 {
                pending.push_back((t + cfg.delta, id));
            } else {
                eng.offer(t, id);
            }
            if roots == Some(TreeRoots::EveryHonest) {
                let n = honest_arrivals.len();
                spawn(&mut records, &mut live, &mut heap, &mut rng, &eng.tree, id, t, n);
            }
            next_honest = t + exp(&mut rng, cfg.lambda_h);
        } else {
            let Next(_, k) = heap.pop().expect("peeked");
            let mut lt = live[k].take().expect("scheduled tree is live");
            let gain = (honest_arrivals.len() - lt.honest_before) as u64;
            if retire.is_some_and(|m| gain >= lt.nas.depth() + m) {
                records[k].retired_at = Some(t);
                records[k].depth_jumps = lt.nas.jumps().to_vec();
                if cfg.record_blocks {
                    live[k] = Some(lt);
                }
                continue;
            }
            let before = lt.nas.depth();
            lt.nas.step(t, &mut rng);
            let depth = lt.nas.depth();
            if depth > before && reveal == ContinuousReveal::WhenAtLeastAsLong {
                let root = records[k].root_block;
                if eng.tree.height(root) + depth >= eng.public.length && depth > lt.revealed_depth {
                    let deepest = lt.nas.deepest();
                    let tip = eng.materialize(&mut lt, root, deepest)?;
                    lt.revealed_depth = depth;
                    eng.reveals.push((t, tip));
                    eng.offer(t, tip);
                }
            }
            let rate = cfg.lambda_a * lt.nas.active_count() as f64;
            heap.push(Next(t + exp(&mut rng, rate), k));
            live[k] = Some(lt);
        }
    }

    for (k, slot) in live.iter_mut().enumerate() {
        let Some(mut lt) = slot.take() else { continue };
        if records[k].retired_at.is_none() {
            records[k].depth_jumps = lt.nas.jumps().to_vec();
        }
        if cfg.record_blocks {
            let root = records[k].root_block;
            for n in 1..lt.nas.len() as NodeIdx {
                eng.materialize(&mut lt, root, n)?;
            }
        }
    }

    Ok(ContinuousTrace {
        honest_arrivals,
        trees: records,
        public_tips: eng.public_tips,
        reveals: eng.reveals,
        final_tree: eng.tree,
        delta: cfg.delta,
        horizon: cfg.horizon,
        lambda_h: cfg.lambda_h,
        lambda_a: cfg.lambda_a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nas(roots: TreeRoots, reveal: ContinuousReveal) -> ContinuousAttack {
        ContinuousAttack::PrivateNas { roots, cap: Some(200), reveal, retire_deficit: Some(20) }
    }

    #[test]
    fn honest_only_is_a_chain() {
        let cfg = ContinuousConfig { horizon: 200.0, ..Default::default() };
        let tr = run_continuous(&cfg).unwrap();
        assert!(tr.honest_arrivals.len() > 100);
        assert_eq!(tr.public_tips.last().unwrap().1.length, tr.honest_arrivals.len() as u64);
        tr.final_tree.verify().unwrap();
    }

    #[test]
    fn delay_creates_forks() {
        let cfg = ContinuousConfig { horizon: 500.0, delta: 1.0, lambda_h: 2.0, ..Default::default() };
        let tr = run_continuous(&cfg).unwrap();
        let len = tr.public_tips.last().unwrap().1.length as usize;
        assert!(len < tr.honest_arrivals.len());
    }

    #[test]
    fn reveals_extend_public_chain() {
        let cfg = ContinuousConfig {
            lambda_a: 0.4,
            lambda_h: 0.6,
            horizon: 200.0,
            attack: nas(TreeRoots::Genesis, ContinuousReveal::WhenAtLeastAsLong),
            ..Default::default()
        };
        let tr = run_continuous(&cfg).unwrap();
        assert!(!tr.reveals.is_empty());
        let last = tr.public_tips.last().unwrap().1;
        assert!(tr.final_tree.path(last.tip).iter().any(|&b| !tr.final_tree.block(b).honest));
        tr.final_tree.verify().unwrap();
    }

    #[test]
    fn trees_retire() {
        let cfg = ContinuousConfig {
            lambda_a: 0.1,
            lambda_h: 0.9,
            horizon: 300.0,
            attack: nas(TreeRoots::EveryHonest, ContinuousReveal::Never),
            ..Default::default()
        };
        let tr = run_continuous(&cfg).unwrap();
        assert_eq!(tr.trees.len(), tr.honest_arrivals.len() + 1);
        assert!(tr.trees.iter().filter(|t| t.retired_at.is_some()).count() > tr.trees.len() / 2);
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = ContinuousConfig {
            horizon: 100.0,
            attack: nas(TreeRoots::EveryHonest, ContinuousReveal::WhenAtLeastAsLong),
            seed: 9,
            ..Default::default()
        };
        let a = run_continuous(&cfg).unwrap();
        let b = run_continuous(&cfg).unwrap();
        assert_eq!(a.honest_arrivals, b.honest_arrivals);
        assert_eq!(a.public_tips, b.public_tips);
    }
}
