use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::blocktree::{
    d_greedy_set_for_tip, g_greedy_set, longest_tips, sibling_count, BlockId, BlockTree,
    DTieBreak, MinerId, TreeView,
};
use crate::lottery::{
    elect_with_stake, splitmix64, stake_at, LotteryParams, StakeLedger, StakeMode, Stakeholder, Transfer,
};
use crate::seed::{rng_from_seed, SimRng};

use super::view::{View, ViewRef};
use super::{
    AdversaryEvent, AdversaryEventKind, Delivery, HonestRule, SimConfig, SimError, SimTrace, TipRecord,
};

/// Adversary strategy plugged into [`run`]. The adversary sees every block
/// as soon as it is mined.
pub trait AdversaryHook {
    /// Called once before the first slot, e.g. to pre-seed public blocks.
    fn init(&mut self, _ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        Ok(())
    }

    /// Called at the end of every slot, after the honest elections.
    fn on_slot(&mut self, ctx: &mut AdvCtx<'_>) -> Result<(), SimError>;
}

/// Does nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullAdversary;

impl AdversaryHook for NullAdversary {
    fn on_slot(&mut self, _ctx: &mut AdvCtx<'_>) -> Result<(), SimError> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    block: BlockId,
    view: u32,
    sender: Option<u32>,
}

type Schedule = BTreeMap<u64, Vec<Pending>>;

/// What the adversary may see and do during its turn.
pub struct AdvCtx<'a> {
    slot: u64,
    cfg: &'a SimConfig,
    lottery: &'a LotteryParams,
    tree: &'a mut BlockTree,
    views: &'a [View],
    public_since: &'a mut Vec<Option<u64>>,
    schedule: &'a mut Schedule,
    events: &'a mut Vec<AdversaryEvent>,
    stake_mode: &'a mut StakeMode,
    me: &'a Stakeholder,
    rng: &'a mut SimRng,
    seeding: bool,
}

impl AdvCtx<'_> {
    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn config(&self) -> &SimConfig {
        self.cfg
    }

    pub fn tree(&self) -> &BlockTree {
        self.tree
    }

    pub fn rng(&mut self) -> &mut SimRng {
        self.rng
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, v: usize) -> ViewRef<'_> {
        self.views[v].view_ref(self.tree)
    }

    pub fn is_public(&self, id: BlockId) -> bool {
        self.public_since.get(id as usize).is_some_and(Option::is_some)
    }

    pub fn stake_mode(&self) -> &StakeMode {
        self.stake_mode
    }

    /// The adversary's own node record.
    pub fn identity(&self) -> &Stakeholder {
        self.me
    }

    /// Runs the adversary's election on `parent` in the current slot.
    pub fn elect(&self, parent: BlockId) -> Result<Option<u64>, SimError> {
        let stake = stake_at(self.stake_mode, self.tree, self.me, parent, self.cfg.params.s);
        Ok(elect_with_stake(self.me.secret_key, stake, self.tree.block(parent), self.slot, self.lottery)?)
    }

    /// Elects on `parent` and, on a win, appends a private block.
    pub fn mine(&mut self, parent: BlockId) -> Result<Option<BlockId>, SimError> {
        match self.elect(parent)? {
            Some(hash) => self.forge(parent, hash).map(Some),
            None => Ok(None),
        }
    }

    /// Appends a private block without an election (models grinding).
    pub fn forge(&mut self, parent: BlockId, lottery_hash: u64) -> Result<BlockId, SimError> {
        let id = self.tree.append(parent, self.slot, MinerId(self.me.index), false, lottery_hash)?;
        self.public_since.push(None);
        match self.events.last_mut() {
            Some(e) if e.slot == self.slot && e.kind == AdversaryEventKind::Mine => e.blocks.push(id),
            _ => self.events.push(AdversaryEvent { slot: self.slot, kind: AdversaryEventKind::Mine, blocks: vec![id] }),
        }
        Ok(id)
    }

    /// Reveals `tip` and its unrevealed ancestors to every view next slot.
    pub fn reveal(&mut self, tip: BlockId) -> Result<Vec<BlockId>, SimError> {
        let delays = vec![0; self.views.len()];
        self.reveal_with_delays(tip, &delays)
    }

    /// Reveals with a per-view delay, each at most `delay_slots`.
    pub fn reveal_with_delays(&mut self, tip: BlockId, delays: &[u64]) -> Result<Vec<BlockId>, SimError> {
        if delays.len() != self.views.len() {
            return Err(SimError::ProtocolViolation("one delay per view required".into()));
        }
        if let Some(d) = delays.iter().find(|&&d| d > self.cfg.delay_slots) {
            return Err(SimError::ProtocolViolation(format!(
                "delay {d} exceeds the bound {}",
                self.cfg.delay_slots
            )));
        }
        if self.tree.get(tip).is_none() {
            return Err(SimError::ProtocolViolation(format!("reveal of unknown block {tip}")));
        }
        let mut chain = Vec::new();
        let mut cur = tip;
        while !self.is_public(cur) {
            chain.push(cur);
            cur = self.tree.block(cur).parent.expect("genesis is public");
        }
        chain.reverse();
        for &b in &chain {
            self.public_since[b as usize] = Some(self.slot);
            for (v, &d) in delays.iter().enumerate() {
                let at = self.slot + d.max(1);
                self.schedule.entry(at).or_default().push(Pending { block: b, view: v as u32, sender: None });
            }
        }
        if !chain.is_empty() {
            self.events.push(AdversaryEvent { slot: self.slot, kind: AdversaryEventKind::Reveal, blocks: chain.clone() });
        }
        Ok(chain)
    }

    /// Adds a public block before the run starts (initial forks). Only
    /// allowed from [`AdversaryHook::init`].
    pub fn seed_public(&mut self, parent: BlockId, slot: u64, honest: bool) -> Result<BlockId, SimError> {
        if !self.seeding {
            return Err(SimError::ProtocolViolation("seed_public outside init".into()));
        }
        let hash = splitmix64(self.tree.len() as u64 ^ self.cfg.seed);
        let id = self.tree.append(parent, slot, MinerId(0), honest, hash)?;
        self.public_since.push(Some(0));
        for v in 0..self.views.len() {
            self.schedule.entry(0).or_default().push(Pending { block: id, view: v as u32, sender: None });
        }
        Ok(id)
    }

    /// Attaches a stake transfer to `block` (dynamic stake only).
    pub fn record_transfer(&mut self, block: BlockId, t: Transfer) -> Result<(), SimError> {
        match self.stake_mode {
            StakeMode::Dynamic(ledger) => {
                ledger.record(block, t);
                Ok(())
            }
            StakeMode::Static => Err(SimError::Config("stake transfers need dynamic_stake".into())),
        }
    }
}

/// Tips ordered for assignment to views: the preferred tip first, then
/// repeatedly the tip farthest from those already chosen. With several
/// views this splits honest nodes across tied forks.
fn assignment_order(vr: &ViewRef<'_>, cfg: &SimConfig, rng: &mut SimRng) -> Vec<BlockId> {
    let tree = vr.tree;
    let top = vr.max_height();
    let tips = longest_tips(vr);
    let d_greedy = cfg.honest_rule == HonestRule::DGreedy;
    // One representative per group; for D-greedy a group is every tip
    // sharing the ancestor at distance D.
    let mut groups: Vec<(BlockId, BlockId, usize)> = Vec::new(); // (key, rep, size)
    for &t in tips {
        let key = if d_greedy { tree.ancestor_at(t, top.saturating_sub(cfg.params.dist_d)) } else { t };
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.2 += 1,
            None => groups.push((key, t, 1)),
        }
    }
    if d_greedy {
        match cfg.d_tie_break {
            DTieBreak::NoSlowDown => {
                groups.sort_by_key(|g| (std::cmp::Reverse(sibling_count(vr, g.1)), vr.seen_rank(g.1)))
            }
            DTieBreak::Random => groups.shuffle(rng),
        }
    }
    let mut order: Vec<BlockId> = Vec::with_capacity(groups.len());
    let mut rest: Vec<BlockId> = groups.iter().map(|g| g.1).collect();
    if cfg.honest_nodes == 1 || rest.len() > 16 {
        return rest;
    }
    while !rest.is_empty() {
        let pick = if order.is_empty() {
            0
        } else {
            let score = |t: BlockId| {
                order.iter().map(|&o| tree.chain_distance(tree.chain(o), tree.chain(t))).min().unwrap_or(0)
            };
            let best = rest.iter().map(|&t| score(t)).max().unwrap_or(0);
            rest.iter().position(|&t| score(t) == best).unwrap_or(0)
        };
        order.push(rest.remove(pick));
    }
    order
}

/// Runs one slotted simulation.
///
/// Within a slot: deliveries, then each view's fork choice, then honest
/// elections, then the adversary. Blocks mined in slot `r` reach the miner's
/// own view at `r + 1` and other views at `r + max(delay_slots, 1)`.
pub fn run(cfg: &SimConfig, adversary: &mut dyn AdversaryHook) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let key_base = splitmix64(cfg.seed ^ 0x6b65_7973);
    let n = cfg.honest_nodes;
    let honest: Vec<Stakeholder> = (0..n)
        .map(|i| Stakeholder {
            index: i,
            secret_key: splitmix64(key_base ^ i as u64),
            stake: (1.0 - cfg.beta) / n as f64,
        })
        .collect();
    let me = Stakeholder { index: n, secret_key: splitmix64(key_base ^ n as u64), stake: cfg.beta };
    let lottery = LotteryParams::slotted(cfg.f_delta);
    let mut stake_mode = if cfg.dynamic_stake {
        let mut all = honest.clone();
        all.push(me.clone());
        StakeMode::Dynamic(StakeLedger::new(&all))
    } else {
        StakeMode::Static
    };

    let mut tree = BlockTree::new(cfg.params.clone(), cfg.genesis_nonce);
    let mut views = vec![View::new(); n as usize];
    let mut public_since: Vec<Option<u64>> = vec![Some(0)];
    let mut schedule = Schedule::new();
    let mut events = Vec::new();
    let mut deliveries = Vec::new();
    let mut honest_arrivals = Vec::new();
    let mut tips: Vec<Vec<TipRecord>> = vec![Vec::new(); n as usize];

    {
        let mut ctx = AdvCtx {
            slot: 0,
            cfg,
            lottery: &lottery,
            tree: &mut tree,
            views: &views,
            public_since: &mut public_since,
            schedule: &mut schedule,
            events: &mut events,
            stake_mode: &mut stake_mode,
            me: &me,
            rng: &mut rng,
            seeding: true,
        };
        adversary.init(&mut ctx)?;
    }
    let first_slot = tree.blocks().iter().map(|b| b.slot).max().unwrap_or(0) + 1;

    for slot in first_slot..=cfg.horizon_slots {
        // Deliveries.
        let later = schedule.split_off(&(slot + 1));
        let due = std::mem::replace(&mut schedule, later);
        let mut fresh: Vec<Vec<BlockId>> = vec![Vec::new(); n as usize];
        for p in due.into_values().flatten() {
            let got = views[p.view as usize].deliver(&tree, p.block);
            if cfg.record_deliveries {
                deliveries.push(Delivery { block: p.block, sender_view: p.sender, receiver_view: p.view, slot });
            }
            fresh[p.view as usize].extend(got);
        }

        // Fork choice.
        for v in 0..n as usize {
            let view = &views[v];
            let vr = view.view_ref(&tree);
            let adopted = match cfg.honest_rule {
                HonestRule::STrunc => fresh[v]
                    .iter()
                    .fold(view.adopted, |cur, &b| tree.s_trunc_prefer(cur, tree.chain(b), cfg.params.s)),
                _ if view.adopted.length < view.max_height() => {
                    let order = assignment_order(&vr, cfg, &mut rng);
                    tree.chain(order[v % order.len()])
                }
                _ => view.adopted,
            };
            views[v].adopted = adopted;
            if tips[v].last().map(|r| r.chain) != Some(adopted) {
                tips[v].push(TipRecord { slot, chain: adopted });
            }
        }

        // Honest elections; blocks are appended after every view has chosen.
        let mut won: Vec<(u32, BlockId, u64)> = Vec::new();
        for (v, node) in honest.iter().enumerate() {
            let view = &views[v];
            let vr = view.view_ref(&tree);
            let targets = match cfg.honest_rule {
                HonestRule::LongestChain | HonestRule::STrunc => vec![view.adopted.tip],
                HonestRule::GGreedy => g_greedy_set(&vr, cfg.params.g),
                HonestRule::DGreedy => d_greedy_set_for_tip(&vr, view.adopted.tip, cfg.params.dist_d),
            };
            for t in targets {
                let stake = stake_at(&stake_mode, &tree, node, t, cfg.params.s);
                if let Some(hash) = elect_with_stake(node.secret_key, stake, tree.block(t), slot, &lottery)? {
                    won.push((v as u32, t, hash));
                }
            }
        }
        for (v, parent, hash) in won {
            let id = tree.append(parent, slot, MinerId(v), true, hash)?;
            public_since.push(Some(slot));
            honest_arrivals.push((slot, id));
            for r in 0..n {
                let at = if r == v { slot + 1 } else { slot + cfg.delay_slots.max(1) };
                schedule.entry(at).or_default().push(Pending { block: id, view: r, sender: Some(v) });
            }
        }

        let mut ctx = AdvCtx {
            slot,
            cfg,
            lottery: &lottery,
            tree: &mut tree,
            views: &views,
            public_since: &mut public_since,
            schedule: &mut schedule,
            events: &mut events,
            stake_mode: &mut stake_mode,
            me: &me,
            rng: &mut rng,
            seeding: false,
        };
        adversary.on_slot(&mut ctx)?;
    }

    Ok(SimTrace {
        honest_arrivals,
        adversary_events: events,
        deliveries,
        final_tree: tree,
        per_view_tips: tips,
        public_since,
        first_slot,
        horizon_slots: cfg.horizon_slots,
        delay_slots: cfg.delay_slots,
    })
}
