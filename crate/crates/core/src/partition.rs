//! Transaction-space partitions induced by a collection of itemsets.
//!
//! A collection `C = {X_0, .., X_{k-1}}` over `n` items splits the space of
//! all `2^n` transactions into blocks: two transactions land in the same
//! block exactly when they support the same subset of `C`. A subset `G` of
//! `C` labels a block iff it is *closed*: every member itemset covered by
//! the union of `G`'s items already belongs to `G`. Each block stores
//!
//! * its signature (bitmask over `C`, bit `i` for `X_i`),
//! * the union of its members' items,
//! * the cumulative count `c(T) = 2^(n - |union|)` of transactions
//!   containing the union, and
//! * the exact count `e(T)` of transactions supporting precisely the
//!   signature's member sets.
//!
//! Exact sizes follow from cumulative ones by subtraction over the superset
//! lattice. Two solvers are provided: a quadratic one that subtracts every
//! strict superset block, and a faster inclusion-exclusion pass that walks
//! the members once and subtracts at most one block per (member, block)
//! pair. Both work on arbitrary nonnegative block measures, not only
//! counts; the model code reuses them for weighted block masses.
//!
//! Counts are kept in `f64`, which is exact for universes of at most 52
//! items; larger universes are rejected. Collections are capped at 24
//! members per partition so signatures stay cheap.

use crate::error::{Error, Result};
use crate::itemset::Itemset;
use std::collections::HashMap;

/// Bitmask over the member collection: bit `i` stands for member `i`.
pub type BlockSignature = u32;

/// Default cap on members per partition.
pub const MAX_PARTITION_MEMBERS: usize = 24;
/// Largest universe for which `f64` block counts are exact.
pub const MAX_PARTITION_ITEMS: u32 = 52;

/// One block of the partition.
#[derive(Clone, Debug)]
pub struct Block {
    pub signature: BlockSignature,
    /// Union of the items of all member sets in the signature.
    pub union_mask: u64,
    /// Count of transactions containing the union: `2^(n - |union|)`.
    pub cumulative: f64,
    /// Count of transactions supporting exactly the signature's members;
    /// `NaN` until one of the solvers has run.
    pub exact: f64,
}

/// The closure of `g`: all members whose items are covered by the union of
/// the members in `g`. Always a superset of `g`.
pub fn closure(g: BlockSignature, member_masks: &[u64]) -> BlockSignature {
    let mut union = 0u64;
    for (i, &m) in member_masks.iter().enumerate() {
        if g >> i & 1 == 1 {
            union |= m;
        }
    }
    let mut out = 0;
    for (i, &m) in member_masks.iter().enumerate() {
        if m & !union == 0 {
            out |= 1 << i;
        }
    }
    out
}

/// The `j`-bounded closure: `g` plus the part of `closure(g)` outside the
/// first `j` members.
pub fn j_closure(g: BlockSignature, j: usize, member_masks: &[u64]) -> BlockSignature {
    let prefix: BlockSignature = if j >= 32 { !0 } else { (1u32 << j) - 1 };
    g | (closure(g, member_masks) & !prefix)
}

/// A full partition with precomputed solver schedule.
#[derive(Clone, Debug)]
pub struct Partition {
    n_items: u32,
    member_masks: Vec<u64>,
    blocks: Vec<Block>,
    index: HashMap<BlockSignature, u32>,
    /// `(target, source)` pairs in member-major order: applying
    /// `w[target] -= w[source]` over the schedule turns cumulative weights
    /// into exact ones.
    schedule: Vec<(u32, u32)>,
}

impl Partition {
    /// Induces the partition of the given member collection over `n_items`
    /// items, with the default member cap.
    pub fn induce(members: &[Itemset], n_items: u32) -> Result<Partition> {
        Partition::induce_capped(members, n_items, MAX_PARTITION_MEMBERS)
    }

    pub fn induce_capped(
        members: &[Itemset],
        n_items: u32,
        max_members: usize,
    ) -> Result<Partition> {
        let mut masks = Vec::with_capacity(members.len());
        for x in members {
            if x.is_empty() {
                return Err(Error::invalid("partition members must be nonempty"));
            }
            if x.max_item().unwrap() >= n_items {
                return Err(Error::invalid(format!(
                    "member {x:?} exceeds the universe of {n_items} items"
                )));
            }
            let mut m = 0u64;
            for &i in x.items() {
                m |= 1 << i;
            }
            masks.push(m);
        }
        Partition::induce_masks(&masks, n_items, max_members)
    }

    pub(crate) fn induce_masks(
        member_masks: &[u64],
        n_items: u32,
        max_members: usize,
    ) -> Result<Partition> {
        let k = member_masks.len();
        if k > max_members.min(32) {
            return Err(Error::capacity(format!(
                "{k} itemsets in one partition exceed the cap of {}",
                max_members.min(32)
            )));
        }
        if n_items > MAX_PARTITION_ITEMS {
            return Err(Error::capacity(format!(
                "universe of {n_items} items exceeds the exact-count cap of {MAX_PARTITION_ITEMS}"
            )));
        }

        // Enumerate closed signatures by DFS: extend a closed set with one
        // member, re-close, deduplicate. Every closed set is reachable this
        // way because closure is monotone.
        let mut index: HashMap<BlockSignature, u32> = HashMap::new();
        let mut signatures: Vec<BlockSignature> = Vec::new();
        let mut stack: Vec<BlockSignature> = vec![0];
        index.insert(0, 0);
        signatures.push(0);
        while let Some(g) = stack.pop() {
            for i in 0..k {
                if g >> i & 1 == 0 {
                    let g2 = closure(g | 1 << i, member_masks);
                    if !index.contains_key(&g2) {
                        index.insert(g2, signatures.len() as u32);
                        signatures.push(g2);
                        stack.push(g2);
                    }
                }
            }
        }

        // Topological order over ⊇: more members first, then by signature.
        signatures.sort_unstable_by(|a, b| {
            b.count_ones().cmp(&a.count_ones()).then(a.cmp(b))
        });
        index.clear();
        for (idx, &sig) in signatures.iter().enumerate() {
            index.insert(sig, idx as u32);
        }

        let blocks: Vec<Block> = signatures
            .iter()
            .map(|&sig| {
                let mut union = 0u64;
                for (i, &m) in member_masks.iter().enumerate() {
                    if sig >> i & 1 == 1 {
                        union |= m;
                    }
                }
                let free = n_items - union.count_ones();
                Block {
                    signature: sig,
                    union_mask: union,
                    cumulative: (free < 64)
                        .then(|| (1u128 << free) as f64)
                        .unwrap_or(f64::INFINITY),
                    exact: f64::NAN,
                }
            })
            .collect();

        // Subtraction schedule: in pass i, a block lacking member i loses
        // the block labeled by the i-bounded closure of signature ∪ {i},
        // when that label is closed. Blocks holding member i are never
        // touched during pass i, so in-place application is safe.
        let mut schedule = Vec::new();
        for i in 0..k {
            for (b, block) in blocks.iter().enumerate() {
                if block.signature >> i & 1 == 1 {
                    continue;
                }
                let g2 = j_closure(block.signature | 1 << i, i, member_masks);
                if let Some(&src) = index.get(&g2) {
                    schedule.push((b as u32, src));
                }
            }
        }

        Ok(Partition {
            n_items,
            member_masks: member_masks.to_vec(),
            blocks,
            index,
            schedule,
        })
    }

    pub fn n_items(&self) -> u32 {
        self.n_items
    }

    pub fn member_masks(&self) -> &[u64] {
        &self.member_masks
    }

    pub fn n_members(&self) -> usize {
        self.member_masks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_index(&self, signature: BlockSignature) -> Option<usize> {
        self.index.get(&signature).map(|&i| i as usize)
    }

    /// Number of subtractions the solver will perform.
    pub fn schedule_len(&self) -> usize {
        self.schedule.len()
    }

    /// Turns the cumulative counts into exact counts with the
    /// inclusion-exclusion schedule. Returns the number of subtractions.
    pub fn qie_block_sizes(&mut self) -> usize {
        let mut w: Vec<f64> = self.blocks.iter().map(|b| b.cumulative).collect();
        let ops = self.solve_exact(&mut w);
        for (block, e) in self.blocks.iter_mut().zip(w) {
            block.exact = e;
        }
        ops
    }

    /// Turns the cumulative counts into exact counts by subtracting every
    /// strict superset block. Returns the number of subtractions.
    pub fn naive_block_sizes(&mut self) -> usize {
        let mut w: Vec<f64> = self.blocks.iter().map(|b| b.cumulative).collect();
        let ops = self.solve_exact_naive(&mut w);
        for (block, e) in self.blocks.iter_mut().zip(w) {
            block.exact = e;
        }
        ops
    }

    /// Inclusion-exclusion solver over arbitrary cumulative block weights,
    /// in block order. Returns the subtraction count.
    pub fn solve_exact(&self, weights: &mut [f64]) -> usize {
        debug_assert_eq!(weights.len(), self.blocks.len());
        for &(t, s) in &self.schedule {
            weights[t as usize] -= weights[s as usize];
        }
        self.schedule.len()
    }

    /// Quadratic solver: subtracts every strict superset block. Blocks are
    /// stored supersets-first, so a single forward sweep suffices.
    pub fn solve_exact_naive(&self, weights: &mut [f64]) -> usize {
        debug_assert_eq!(weights.len(), self.blocks.len());
        let mut ops = 0;
        for t in 0..self.blocks.len() {
            let sig = self.blocks[t].signature;
            for s in 0..t {
                let sup = self.blocks[s].signature;
                if sup & sig == sig && sup != sig {
                    weights[t] -= weights[s];
                    ops += 1;
                }
            }
        }
        ops
    }

    /// Vector-valued variant of [`Partition::solve_exact`]: every block
    /// carries a weight per row size, subtracted componentwise.
    pub fn solve_exact_vec(&self, weights: &mut [Vec<f64>]) -> usize {
        debug_assert_eq!(weights.len(), self.blocks.len());
        for &(t, s) in &self.schedule {
            let (t, s) = (t as usize, s as usize);
            debug_assert_ne!(t, s);
            let (a, b) = if t < s {
                let (lo, hi) = weights.split_at_mut(s);
                (&mut lo[t], &hi[0])
            } else {
                let (lo, hi) = weights.split_at_mut(t);
                (&mut hi[0], &lo[s])
            };
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        self.schedule.len()
    }

    /// Debug table of the partition: one row per block, members shown as a
    /// 0/1 string with member 0 leftmost, sorted with full signatures first.
    pub fn table_dump(&self) -> String {
        let k = self.member_masks.len();
        let mut rows: Vec<&Block> = self.blocks.iter().collect();
        rows.sort_by_key(|b| std::cmp::Reverse(bit_string(b.signature, k)));
        let mut out = String::from("sets\titems\tcumulative\texact\n");
        for b in rows {
            let items = Itemset::new(
                (0..self.n_items)
                    .filter(|&i| b.union_mask >> i & 1 == 1)
                    .collect(),
            );
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                bit_string(b.signature, k),
                items,
                b.cumulative,
                b.exact
            ));
        }
        out
    }
}

fn bit_string(sig: BlockSignature, k: usize) -> String {
    (0..k)
        .map(|i| if sig >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running_example() -> Vec<Itemset> {
        // items a..f = 0..5 over an 8-item universe
        vec![
            Itemset::from([0, 1, 2]),
            Itemset::from([2, 3]),
            Itemset::from([3, 4, 5]),
        ]
    }

    #[test]
    fn closure_examples() {
        let masks: Vec<u64> = vec![0b000111, 0b001100, 0b111000];
        // {X0, X1}: union abcd covers only X0 and X1
        assert_eq!(closure(0b011, &masks), 0b011);
        // {X1, X2}: union cdef covers X1, X2 but not X0
        assert_eq!(closure(0b110, &masks), 0b110);
        // {X0, X2}: union abcdef covers everything
        assert_eq!(closure(0b101, &masks), 0b111);
        assert_eq!(closure(0, &masks), 0);
        // bounded closure keeps the extra member outside the first 2
        assert_eq!(j_closure(0b110, 2, &masks), 0b110);
        assert_eq!(j_closure(0b101, 2, &masks), 0b101 | 0b100);
    }

    #[test]
    fn running_example_blocks() {
        let mut p = Partition::induce(&running_example(), 8).unwrap();
        assert_eq!(p.blocks().len(), 7);
        let subtractions = p.qie_block_sizes();
        // (signature bits: member 0 = bit 0), expected (cumulative, exact)
        let expect = [
            (0b111, 4.0, 4.0),
            (0b011, 16.0, 12.0),
            (0b001, 32.0, 16.0),
            (0b110, 16.0, 12.0),
            (0b010, 64.0, 36.0),
            (0b100, 32.0, 16.0),
            (0b000, 256.0, 160.0),
        ];
        for (sig, c, e) in expect {
            let b = &p.blocks()[p.block_index(sig).unwrap()];
            assert_eq!(b.cumulative, c, "cumulative of {sig:03b}");
            assert_eq!(b.exact, e, "exact of {sig:03b}");
        }
        // the member-major pass performs one subtraction per schedule entry
        assert_eq!(subtractions, p.schedule_len());
        let total: f64 = p.blocks().iter().map(|b| b.exact).sum();
        assert_eq!(total, 256.0);
    }

    #[test]
    fn naive_matches_qie_on_running_example() {
        let mut a = Partition::induce(&running_example(), 8).unwrap();
        let mut b = a.clone();
        a.qie_block_sizes();
        b.naive_block_sizes();
        for (x, y) in a.blocks().iter().zip(b.blocks()) {
            assert_eq!(x.exact, y.exact);
        }
    }

    #[test]
    fn topological_order_supersets_first() {
        let p = Partition::induce(&running_example(), 8).unwrap();
        let blocks = p.blocks();
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                let (a, b) = (blocks[i].signature, blocks[j].signature);
                // a strict superset must never come after its subset
                assert!(!(a & b == a && a != b), "{a:b} after its superset {b:b}");
            }
        }
    }

    #[test]
    fn caps_are_enforced() {
        let many: Vec<Itemset> = (0..25).map(|i| Itemset::from([i, i + 1])).collect();
        assert!(matches!(
            Partition::induce(&many, 26),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            Partition::induce(&[Itemset::from([0, 60])], 61),
            Err(Error::Capacity(_))
        ));
        assert!(Partition::induce(&[Itemset::empty()], 4).is_err());
    }

    #[test]
    fn table_dump_layout() {
        let mut p = Partition::induce(&running_example(), 8).unwrap();
        p.qie_block_sizes();
        let dump = p.table_dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[0], "sets\titems\tcumulative\texact");
        assert_eq!(lines[1], "111\t0 1 2 3 4 5\t4\t4");
        assert_eq!(lines[7], "000\t\t256\t160");
    }

    #[test]
    fn singleton_member_partition() {
        let mut p = Partition::induce(&[Itemset::singleton(0)], 1).unwrap();
        p.qie_block_sizes();
        assert_eq!(p.blocks().len(), 2);
        let one = p.block_index(1).unwrap();
        let zero = p.block_index(0).unwrap();
        assert_eq!(p.blocks()[one].exact, 1.0);
        assert_eq!(p.blocks()[zero].exact, 1.0);
    }
}
