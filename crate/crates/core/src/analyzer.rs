//! Post-hoc trace analysis: adversary-proof convergence events, counting
//! statistics over slot windows, and the usual security properties.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::blocktree::{BlockId, BlockTree, ChainRef, Truncation};
use crate::simnet::continuous::ContinuousTrace;
use crate::simnet::SimTrace;

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("trace has no adversarial tree records")]
    NoTrees,
    #[error("trace needs one adversarial tree per honest block (and genesis), found {trees} for {honest} blocks")]
    MissingTrees { trees: usize, honest: usize },
    #[error("invalid window [{start}, {end}] for a run of {horizon} slots")]
    Window { start: u64, end: u64, horizon: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    /// Every earlier adversarial tree stays behind the honest arrivals.
    F,
    /// Delay version, restricted to loners.
    UHat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// `(j, kind)` for each detected event; `j` counts honest blocks from 1.
    pub events: Vec<(usize, EventKind)>,
    /// Honest blocks mined early enough to be judged.
    pub eligible: usize,
    /// `events / eligible`.
    pub empirical_frequency: f64,
    /// Always set: events quantify over all future time but are only
    /// checked up to the horizon.
    pub horizon_caveat: bool,
    /// Events whose block is not on every later public chain. Empty unless
    /// something is wrong.
    pub regen_failures: Vec<usize>,
}

/// Time at which tree `k`'s last violation of "depth < honest gain" ends,
/// given the arrival times `gains` that each add one to the honest gain.
/// Infinite when the tree still leads at the horizon.
fn last_violation_end(jumps: &[(f64, u64)], gains: &[f64], from: usize, horizon: f64) -> f64 {
    let mut depth = 0u64;
    let mut gain = 0u64;
    let mut end = f64::NEG_INFINITY;
    let (mut a, mut b) = (from, 0usize);
    loop {
        let ta = gains.get(a).copied().unwrap_or(f64::INFINITY);
        let tb = jumps.get(b).map_or(f64::INFINITY, |j| j.0);
        let t = ta.min(tb);
        if t > horizon {
            break;
        }
        let was = depth >= gain;
        if tb <= ta {
            depth = jumps[b].1;
            b += 1;
        } else {
            gain += 1;
            a += 1;
        }
        if was && depth < gain {
            end = t;
        }
    }
    if depth >= gain {
        f64::INFINITY
    } else {
        end
    }
}

fn check_trees(trace: &ContinuousTrace) -> Result<(), AnalyzerError> {
    if trace.trees.is_empty() {
        return Err(AnalyzerError::NoTrees);
    }
    let honest = trace.honest_arrivals.len();
    if trace.trees.len() != honest + 1 || trace.trees.iter().enumerate().any(|(k, t)| t.root_index != k) {
        return Err(AnalyzerError::MissingTrees { trees: trace.trees.len(), honest });
    }
    Ok(())
}

/// Running common prefix of every public tip recorded at or after each
/// record, so "on every later chain" is one ancestor test.
fn suffix_common_prefix(tree: &BlockTree, tips: &[(f64, ChainRef)]) -> Vec<ChainRef> {
    let mut out = vec![ChainRef { tip: 0, length: 0 }; tips.len()];
    let mut acc: Option<ChainRef> = None;
    for (k, &(_, c)) in tips.iter().enumerate().rev() {
        let next = match acc {
            None => c,
            Some(a) => tree.chain(tree.fork_block(a, c)),
        };
        out[k] = next;
        acc = Some(next);
    }
    out
}

fn regen_failures(trace: &ContinuousTrace, events: &[usize], shift: f64) -> Vec<usize> {
    let tree = &trace.final_tree;
    let prefix = suffix_common_prefix(tree, &trace.public_tips);
    events
        .iter()
        .copied()
        .filter(|&j| {
            let (t, b) = trace.honest_arrivals[j - 1];
            let k = trace.public_tips.partition_point(|r| r.0 < t + shift);
            // Past the last record the final chain is the last record.
            let k = k.min(trace.public_tips.len().saturating_sub(1));
            trace.public_tips.is_empty() || !tree.is_ancestor(b, prefix[k].tip)
        })
        .collect()
}

fn report(events: Vec<(usize, EventKind)>, eligible: usize, regen: Vec<usize>) -> ConvergenceReport {
    let f = if eligible == 0 { 0.0 } else { events.len() as f64 / eligible as f64 };
    ConvergenceReport { events, eligible, empirical_frequency: f, horizon_caveat: true, regen_failures: regen }
}

/// Detects `F_j` in a zero-delay run with one adversarial tree per honest
/// block. Block `j` is judged only if `τ_j ≤ horizon − margin`.
pub fn detect_convergence_zero_delay(
    trace: &ContinuousTrace,
    margin: f64,
) -> Result<ConvergenceReport, AnalyzerError> {
    check_trees(trace)?;
    let times: Vec<f64> = trace.honest_arrivals.iter().map(|a| a.0).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut events = Vec::new();
    let mut eligible = 0;
    for (j, &tj) in times.iter().enumerate() {
        // Tree j is rooted at block j (tree 0 at genesis).
        let tree = &trace.trees[j];
        worst = worst.max(last_violation_end(&tree.depth_jumps, &times, j, trace.horizon));
        if tj > trace.horizon - margin {
            break;
        }
        eligible += 1;
        if worst <= tj {
            events.push((j + 1, EventKind::F));
        }
    }
    let js: Vec<usize> = events.iter().map(|e| e.0).collect();
    let regen = regen_failures(trace, &js, 0.0);
    Ok(report(events, eligible, regen))
}

/// Detects `Û_j`: block `j` is a loner and every earlier tree stays behind
/// the count of non-tailgaters, read `Δ` late.
pub fn detect_convergence_delay(trace: &ContinuousTrace, margin: f64) -> Result<ConvergenceReport, AnalyzerError> {
    check_trees(trace)?;
    let delta = trace.delta;
    let times: Vec<f64> = trace.honest_arrivals.iter().map(|a| a.0).collect();
    let gap_ok = |k: usize| k == 0 || times[k] - times[k - 1] > delta;
    // Non-tailgater arrivals, shifted by Δ; `first[k]` indexes the first one
    // after honest block k (0-based).
    let shifted: Vec<f64> = (0..times.len()).filter(|&k| gap_ok(k)).map(|k| times[k] + delta).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut events = Vec::new();
    let mut eligible = 0;
    for (j, &tj) in times.iter().enumerate() {
        let tree = &trace.trees[j];
        let root_time = if j == 0 { 0.0 } else { times[j - 1] };
        let from = shifted.partition_point(|&s| s - delta <= root_time);
        worst = worst.max(last_violation_end(&tree.depth_jumps, &shifted, from, trace.horizon));
        if tj > trace.horizon - margin {
            break;
        }
        eligible += 1;
        let loner = gap_ok(j) && times.get(j + 1).is_none_or(|&n| n - tj > delta);
        if loner && worst <= tj + delta {
            events.push((j + 1, EventKind::UHat));
        }
    }
    let js: Vec<usize> = events.iter().map(|e| e.0).collect();
    let regen = regen_failures(trace, &js, delta);
    Ok(report(events, eligible, regen))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WindowStats {
    pub interval: (u64, u64),
    /// Slots with at least one honest block.
    pub x_count: u64,
    /// Slots with exactly one honest block.
    pub y_count: u64,
    /// Most adversarial blocks from the interval on one chain forking from
    /// the reference chain inside the interval.
    pub v_count: u64,
    /// Whether `v_count` saw unrevealed blocks.
    pub full_view: bool,
}

/// Counting statistics over slots `[start, end]`. The reference chain is
/// view 0's adopted chain at `end`. With `full_view`, private blocks count
/// toward `V`; otherwise only blocks public by `end`.
pub fn window_stats(trace: &SimTrace, start: u64, end: u64, full_view: bool) -> Result<WindowStats, AnalyzerError> {
    if start > end || end > trace.horizon_slots || start == 0 {
        return Err(AnalyzerError::Window { start, end, horizon: trace.horizon_slots });
    }
    let mut per_slot = std::collections::BTreeMap::<u64, u64>::new();
    for &(s, _) in &trace.honest_arrivals {
        if (start..=end).contains(&s) {
            *per_slot.entry(s).or_default() += 1;
        }
    }
    let x = per_slot.len() as u64;
    let y = per_slot.values().filter(|&&n| n == 1).count() as u64;

    let tree = &trace.final_tree;
    let reference = trace.adopted_at(0, end);
    let mut on_ref = vec![false; tree.len()];
    for b in tree.path(reference.tip) {
        on_ref[b as usize] = true;
    }
    let visible = |b: &crate::blocktree::Block| {
        b.slot <= end && (full_view || trace.public_since[b.id as usize].is_some_and(|p| p <= end))
    };
    let mut fork_slot = vec![0u64; tree.len()];
    let mut count = vec![0u64; tree.len()];
    let mut v = 0;
    for b in tree.blocks().iter().skip(1) {
        let i = b.id as usize;
        let p = b.parent.expect("non-genesis") as usize;
        if on_ref[i] {
            fork_slot[i] = b.slot;
            continue;
        }
        fork_slot[i] = if on_ref[p] { tree.block(p as BlockId).slot } else { fork_slot[p] };
        count[i] = count[p] + u64::from(!b.honest && (start..=end).contains(&b.slot));
        if visible(b) && fork_slot[i] >= start {
            v = v.max(count[i]);
        }
    }
    Ok(WindowStats { interval: (start, end), x_count: x, y_count: y, v_count: v, full_view })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PrefixViolation {
    pub earlier_slot: u64,
    pub earlier_view: usize,
    pub later_slot: u64,
    pub later_view: usize,
    /// Blocks of the earlier chain beyond the fork.
    pub fork_depth: u64,
}

/// Common-prefix check: for every pair of adopted chains recorded in any
/// views, the earlier one with its last `kappa` blocks removed must be a
/// prefix of the later one.
pub fn check_common_prefix(trace: &SimTrace, kappa: Truncation) -> Vec<PrefixViolation> {
    let Some(k) = kappa.finite() else { return Vec::new() };
    let tree = &trace.final_tree;
    let mut recs: Vec<(u64, usize, ChainRef)> = trace
        .per_view_tips
        .iter()
        .enumerate()
        .flat_map(|(v, rs)| rs.iter().map(move |r| (r.slot, v, r.chain)))
        .collect();
    recs.sort_by_key(|r| (r.0, r.1));
    // Maximal pruned chains seen so far; checking these covers all earlier
    // records because prefixes of a prefix are prefixes.
    let mut front: Vec<(ChainRef, u64, usize, ChainRef)> = Vec::new();
    let mut out = Vec::new();
    for (slot, view, chain) in recs {
        for &(p, s, v, orig) in &front {
            if !tree.is_prefix(p, chain) {
                let fork = tree.height(tree.fork_block(orig, chain));
                out.push(PrefixViolation {
                    earlier_slot: s,
                    earlier_view: v,
                    later_slot: slot,
                    later_view: view,
                    fork_depth: orig.length - fork,
                });
            }
        }
        let pruned = tree.prune_to(chain, k);
        if front.iter().any(|f| tree.is_prefix(pruned, f.0)) {
            continue;
        }
        front.retain(|f| !tree.is_prefix(f.0, pruned));
        front.push((pruned, slot, view, chain));
    }
    out
}

/// Minimum honest fraction over windows of `window_blocks` consecutive
/// blocks of view 0's final chain (the whole chain if shorter).
pub fn chain_quality(trace: &SimTrace, window_blocks: usize) -> Result<f64, AnalyzerError> {
    if window_blocks == 0 {
        return Err(AnalyzerError::InvalidArgument("window_blocks must be positive".into()));
    }
    let tree = &trace.final_tree;
    let path = tree.path(trace.final_adopted(0).tip);
    let honest: Vec<u64> = path[1..].iter().map(|&b| u64::from(tree.block(b).honest)).collect();
    if honest.is_empty() {
        return Ok(1.0);
    }
    let w = window_blocks.min(honest.len());
    let mut sum: u64 = honest[..w].iter().sum();
    let mut best = sum;
    for i in w..honest.len() {
        sum = sum + honest[i] - honest[i - w];
        best = best.min(sum);
    }
    Ok(best as f64 / w as f64)
}

/// Minimum growth per slot of view 0's adopted chain over windows of
/// `window_slots` slots.
pub fn chain_growth(trace: &SimTrace, window_slots: u64) -> Result<f64, AnalyzerError> {
    let span = trace.horizon_slots.saturating_sub(trace.first_slot);
    if window_slots == 0 || window_slots > span {
        return Err(AnalyzerError::InvalidArgument(format!(
            "window_slots must be in 1..={span}"
        )));
    }
    let mut best = u64::MAX;
    for r in trace.first_slot..=trace.horizon_slots - window_slots {
        let a = trace.adopted_at(0, r).length;
        let b = trace.adopted_at(0, r + window_slots).length;
        best = best.min(b.saturating_sub(a));
    }
    Ok(best as f64 / window_slots as f64)
}

/// Empirical CDF `(len, P(fork ≤ len))` at each observed length.
pub fn fork_cdf(lengths: &[u64]) -> Vec<(u64, f64)> {
    let mut v = lengths.to_vec();
    v.sort_unstable();
    let n = v.len() as f64;
    let mut out: Vec<(u64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
            _ => out.push((x, (i + 1) as f64 / n)),
        }
    }
    out
}

pub fn write_fork_cdf_csv<W: Write>(mut w: W, cdf: &[(u64, f64)]) -> io::Result<()> {
    writeln!(w, "fork_len,prob")?;
    for (x, p) in cdf {
        writeln!(w, "{x},{p:.6}")?;
    }
    Ok(())
}
