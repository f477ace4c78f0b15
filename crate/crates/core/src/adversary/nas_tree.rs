//! Continuous-time private tree grown by the optimal `c`-correlated
//! nothing-at-stake strategy.
//!
//! Only parents of godfather blocks (height `≡ c-1 mod c`) keep mining
//! forever; every other block mines until it has one child, because further
//! children would share its randomness and win in exactly the same slots.
//! Every active miner wins at unit rate, so the next event picks an active
//! miner uniformly.

use std::collections::BTreeMap;

use rand::Rng;

use crate::blocktree::C_INFINITE;

const INACTIVE: u32 = u32::MAX;

/// Arena index of a block in a [`NasTree`]; the root is `0`.
pub type NodeIdx = u32;

#[derive(Clone, Debug)]
pub struct NasTree {
    c: u64,
    cap: Option<usize>,
    parent: Vec<NodeIdx>,
    height: Vec<u64>,
    time: Vec<f64>,
    /// Active miners; `pos[i]` is the slot of node `i` in this list.
    active: Vec<NodeIdx>,
    pos: Vec<u32>,
    /// Active miners by height; only maintained when capped.
    by_height: BTreeMap<u64, Vec<NodeIdx>>,
    deepest: NodeIdx,
    jumps: Vec<(f64, u64)>,
}

impl NasTree {
    /// A tree rooted at a block of absolute height `root_height` created at
    /// `root_time`. With `cap`, at most `cap` miners stay active; the lowest
    /// are abandoned first.
    pub fn new(c: u64, root_height: u64, root_time: f64, cap: Option<usize>) -> Self {
        assert!(c >= 1, "c must be at least 1");
        let mut t = Self {
            c,
            cap,
            parent: vec![INACTIVE],
            height: vec![root_height],
            time: vec![root_time],
            active: Vec::new(),
            pos: vec![INACTIVE],
            by_height: BTreeMap::new(),
            deepest: 0,
            jumps: Vec::new(),
        };
        t.activate(0);
        t
    }

    fn is_fork_height(&self, h: u64) -> bool {
        self.c != C_INFINITE && h % self.c == self.c - 1
    }

    fn activate(&mut self, i: NodeIdx) {
        self.pos[i as usize] = self.active.len() as u32;
        self.active.push(i);
        if self.cap.is_none() {
            return;
        }
        let h = self.height[i as usize];
        self.by_height.entry(h).or_default().push(i);
        while self.active.len() > self.cap.unwrap_or(usize::MAX) {
            let mut entry = self.by_height.first_entry().expect("non-empty");
            let victim = entry.get_mut().pop().expect("non-empty bucket");
            if entry.get().is_empty() {
                entry.remove();
            }
            self.remove_active(victim);
        }
    }

    fn deactivate(&mut self, i: NodeIdx) {
        if self.cap.is_some() {
            let h = self.height[i as usize];
            let bucket = self.by_height.get_mut(&h).expect("active block is indexed");
            let k = bucket.iter().position(|&b| b == i).expect("active block is indexed");
            bucket.swap_remove(k);
            if bucket.is_empty() {
                self.by_height.remove(&h);
            }
        }
        self.remove_active(i);
    }

    fn remove_active(&mut self, i: NodeIdx) {
        let p = self.pos[i as usize];
        debug_assert_ne!(p, INACTIVE);
        self.active.swap_remove(p as usize);
        if let Some(&moved) = self.active.get(p as usize) {
            self.pos[moved as usize] = p;
        }
        self.pos[i as usize] = INACTIVE;
    }

    /// Number of miners currently active (the total event rate at unit rate
    /// per miner).
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// One mining success at `time` by a uniformly chosen active miner.
    /// Returns the new block.
    pub fn step<R: Rng + ?Sized>(&mut self, time: f64, rng: &mut R) -> NodeIdx {
        let k = rng.random_range(0..self.active.len());
        let miner = self.active[k];
        let h = self.height[miner as usize] + 1;
        let child = self.parent.len() as NodeIdx;
        self.parent.push(miner);
        self.height.push(h);
        self.time.push(time);
        self.pos.push(INACTIVE);
        if !self.is_fork_height(h - 1) {
            // A lineage hands mining over to its newest block.
            self.deactivate(miner);
        }
        self.activate(child);
        if h > self.height[self.deepest as usize] {
            self.deepest = child;
            self.jumps.push((time, h - self.height[0]));
        }
        child
    }

    /// Grows the tree at rate `lambda` per active miner until `until`.
    pub fn grow_until<R: Rng + ?Sized>(&mut self, now: f64, until: f64, lambda: f64, rng: &mut R) {
        let mut t = now;
        while lambda > 0.0 && !self.active.is_empty() {
            t += -(1.0 - rng.random::<f64>()).ln() / (lambda * self.active.len() as f64);
            if t > until {
                break;
            }
            self.step(t, rng);
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Depth of the deepest block below the root.
    pub fn depth(&self) -> u64 {
        self.height[self.deepest as usize] - self.height[0]
    }

    /// Depth reached by time `t`.
    pub fn depth_at(&self, t: f64) -> u64 {
        let i = self.jumps.partition_point(|j| j.0 <= t);
        if i == 0 {
            0
        } else {
            self.jumps[i - 1].1
        }
    }

    pub fn deepest(&self) -> NodeIdx {
        self.deepest
    }

    /// `(time, depth)` each time the maximum depth increased.
    pub fn jumps(&self) -> &[(f64, u64)] {
        &self.jumps
    }

    pub fn parent(&self, i: NodeIdx) -> Option<NodeIdx> {
        let p = self.parent[i as usize];
        (p != INACTIVE).then_some(p)
    }

    pub fn height(&self, i: NodeIdx) -> u64 {
        self.height[i as usize]
    }

    pub fn time(&self, i: NodeIdx) -> f64 {
        self.time[i as usize]
    }

    /// Nodes from the root to `i`, inclusive.
    pub fn path(&self, i: NodeIdx) -> Vec<NodeIdx> {
        let mut out = vec![i];
        let mut cur = i;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn c1_every_block_keeps_mining() {
        let mut rng = rng_from_seed(1);
        let mut t = NasTree::new(1, 0, 0.0, None);
        for k in 1..50 {
            t.step(k as f64, &mut rng);
            assert_eq!(t.active_count(), t.len());
        }
    }

    #[test]
    fn infinite_c_is_a_single_chain() {
        let mut rng = rng_from_seed(2);
        let mut t = NasTree::new(C_INFINITE, 0, 0.0, None);
        for k in 1..100 {
            t.step(k as f64, &mut rng);
            assert_eq!(t.active_count(), 1);
        }
        assert_eq!(t.depth(), 99);
    }

    #[test]
    fn forks_only_at_godfather_parents() {
        let mut rng = rng_from_seed(3);
        let c = 5;
        let mut t = NasTree::new(c, 0, 0.0, None);
        t.grow_until(0.0, 12.0, 1.0, &mut rng);
        let mut kids = vec![0usize; t.len()];
        for i in 1..t.len() as NodeIdx {
            kids[t.parent(i).unwrap() as usize] += 1;
        }
        for i in 0..t.len() {
            if kids[i] > 1 {
                assert_eq!(t.height(i as NodeIdx) % c, c - 1);
            }
        }
        assert!(kids.iter().any(|&k| k > 1));
    }

    #[test]
    fn cap_bounds_fork_points() {
        let mut rng = rng_from_seed(4);
        let mut t = NasTree::new(1, 0, 0.0, Some(32));
        t.grow_until(0.0, 30.0, 1.0, &mut rng);
        assert!(t.active_count() <= 32);
        assert!(t.depth() > 30);
    }
}
