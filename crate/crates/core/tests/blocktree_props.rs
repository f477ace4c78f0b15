use chainlab::blocktree::{BlockTree, MinerId, ProtocolParams, TieBreak, GENESIS};
use chainlab::{BlockId, ChainRef};
use proptest::prelude::*;

/// Builds a tree from `(parent pick, slot gap, honest, hash)` steps.
fn build(c: u64, steps: &[(usize, u64, bool, u64)]) -> BlockTree {
    let mut t = BlockTree::new(ProtocolParams::with_c(c), 99);
    for &(pick, gap, honest, hash) in steps {
        // Even picks extend one of the newest blocks, giving long chains;
        // odd picks attach anywhere, giving bushes.
        let n = t.len();
        let parent = if pick % 2 == 0 { n - 1 - (pick / 2) % n.min(3) } else { pick % n } as BlockId;
        let slot = t.block(parent).slot + 1 + gap;
        t.append(parent, slot, MinerId(u32::from(!honest)), honest, hash).unwrap();
    }
    t
}

fn naive_path(t: &BlockTree, mut b: BlockId) -> Vec<BlockId> {
    let mut out = vec![b];
    while let Some(p) = t.block(b).parent {
        out.push(p);
        b = p;
    }
    out.reverse();
    out
}

fn steps() -> impl Strategy<Value = Vec<(usize, u64, bool, u64)>> {
    prop::collection::vec((0usize..10_000, 0u64..3, any::<bool>(), any::<u64>()), 1..300)
}

proptest! {
    #[test]
    fn ancestor_queries_match_parent_walk(s in steps(), c in 1u64..6) {
        let t = build(c, &s);
        for b in 0..t.len() as BlockId {
            let path = naive_path(&t, b);
            prop_assert_eq!(path.len() as u64, t.height(b) + 1);
            prop_assert_eq!(t.path(b), path.clone());
            for (h, &a) in path.iter().enumerate() {
                prop_assert_eq!(t.ancestor_at(b, h as u64), a);
                prop_assert!(t.is_ancestor(a, b));
            }
        }
    }

    #[test]
    fn fork_block_is_deepest_common_ancestor(s in steps(), x in any::<u32>(), y in any::<u32>()) {
        let t = build(1, &s);
        let (a, b) = (x as BlockId % t.len() as BlockId, y as BlockId % t.len() as BlockId);
        let (pa, pb) = (naive_path(&t, a), naive_path(&t, b));
        let common = pa.iter().zip(&pb).take_while(|(u, v)| u == v).count();
        let f = t.fork_block(t.chain(a), t.chain(b));
        prop_assert_eq!(f, pa[common - 1]);
        prop_assert_eq!(t.fork_block(t.chain(b), t.chain(a)), f);
    }

    #[test]
    fn randomness_follows_last_refresh(s in steps(), c in 1u64..6) {
        let t = build(c, &s);
        prop_assert!(t.verify().is_ok());
        for b in t.blocks() {
            // The nearest ancestor-or-self at a height divisible by c sets it.
            let src = naive_path(&t, b.id).into_iter().rev().find(|&a| t.height(a) % c == 0).unwrap();
            let expect = if src == GENESIS { 99 } else { t.block(src).lottery_hash };
            prop_assert_eq!(b.rand_source, expect);
        }
    }

    #[test]
    fn csv_round_trip(s in steps(), c in 1u64..4) {
        let t = build(c, &s);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = BlockTree::read_csv(&buf[..], ProtocolParams::with_c(c)).unwrap();
        prop_assert_eq!(back.blocks(), t.blocks());
        for b in 0..t.len() as BlockId {
            prop_assert_eq!(back.ancestor_at(b, t.height(b) / 2), t.ancestor_at(b, t.height(b) / 2));
        }
    }

    #[test]
    fn longest_chain_has_max_height(s in steps()) {
        let t = build(1, &s);
        let max = t.blocks().iter().map(|b| b.height).max().unwrap();
        let ChainRef { tip, length } = t.longest_chain(TieBreak::LowestId);
        prop_assert_eq!(length, max);
        prop_assert_eq!(t.height(tip), max);
        let g = t.g_greedy_set(1);
        prop_assert!(g.iter().all(|&b| t.height(b) + 1 >= max));
    }
}
