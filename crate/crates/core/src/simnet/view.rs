use std::collections::HashMap;

use crate::blocktree::{BlockId, BlockTree, ChainRef, TreeView, GENESIS};

const UNSEEN: u64 = u64::MAX;

/// The blocks one honest node has received, plus its adopted chain.
///
/// Blocks whose parent has not arrived yet are buffered, so the visible set
/// is always ancestor-closed.
#[derive(Clone, Debug)]
pub struct View {
    seen: Vec<u64>,
    by_height: Vec<Vec<BlockId>>,
    max_height: u64,
    orphans: HashMap<BlockId, Vec<BlockId>>,
    arrivals: u64,
    pub(crate) adopted: ChainRef,
}

impl View {
    pub(crate) fn new() -> Self {
        Self {
            seen: vec![0],
            by_height: vec![vec![GENESIS]],
            max_height: 0,
            orphans: HashMap::new(),
            arrivals: 1,
            adopted: ChainRef { tip: GENESIS, length: 0 },
        }
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.seen.get(id as usize).is_some_and(|&r| r != UNSEEN)
    }

    pub fn adopted(&self) -> ChainRef {
        self.adopted
    }

    pub fn max_height(&self) -> u64 {
        self.max_height
    }

    /// Delivers `id`; returns every block that became visible, parents first.
    pub(crate) fn deliver(&mut self, tree: &BlockTree, id: BlockId) -> Vec<BlockId> {
        let mut out = Vec::new();
        if self.contains(id) {
            return out;
        }
        let parent = tree.block(id).parent.expect("genesis is never delivered");
        if !self.contains(parent) {
            let waiting = self.orphans.entry(parent).or_default();
            if !waiting.contains(&id) {
                waiting.push(id);
            }
            return out;
        }
        let mut stack = vec![id];
        while let Some(b) = stack.pop() {
            if self.contains(b) {
                continue;
            }
            if self.seen.len() <= b as usize {
                self.seen.resize(b as usize + 1, UNSEEN);
            }
            self.seen[b as usize] = self.arrivals;
            self.arrivals += 1;
            let h = tree.height(b);
            if self.by_height.len() <= h as usize {
                self.by_height.resize(h as usize + 1, Vec::new());
            }
            self.by_height[h as usize].push(b);
            self.max_height = self.max_height.max(h);
            out.push(b);
            if let Some(kids) = self.orphans.remove(&b) {
                stack.extend(kids.into_iter().rev());
            }
        }
        out
    }

    pub fn view_ref<'a>(&'a self, tree: &'a BlockTree) -> ViewRef<'a> {
        ViewRef { tree, view: self }
    }
}

/// A view paired with the tree it indexes into.
#[derive(Clone, Copy)]
pub struct ViewRef<'a> {
    pub tree: &'a BlockTree,
    pub view: &'a View,
}

impl TreeView for ViewRef<'_> {
    fn tree(&self) -> &BlockTree {
        self.tree
    }

    fn contains(&self, id: BlockId) -> bool {
        self.view.contains(id)
    }

    fn max_height(&self) -> u64 {
        self.view.max_height
    }

    fn at_height(&self, height: u64) -> &[BlockId] {
        self.view.by_height.get(height as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    fn seen_rank(&self, id: BlockId) -> u64 {
        self.view.seen.get(id as usize).copied().unwrap_or(UNSEEN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocktree::{MinerId, ProtocolParams};

    #[test]
    fn orphans_wait_for_parents() {
        let mut t = BlockTree::new(ProtocolParams::default(), 0);
        let a = t.append(GENESIS, 1, MinerId(0), true, 1).unwrap();
        let b = t.append(a, 2, MinerId(0), true, 2).unwrap();
        let c = t.append(b, 3, MinerId(0), true, 3).unwrap();
        let mut v = View::new();
        assert!(v.deliver(&t, c).is_empty());
        assert!(v.deliver(&t, b).is_empty());
        assert_eq!(v.deliver(&t, a), vec![a, b, c]);
        assert_eq!(v.max_height(), 3);
        assert!(v.deliver(&t, a).is_empty());
    }
}
