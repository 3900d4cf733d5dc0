//! Search for the itemset whose frequency the current model predicts
//! worst, and the outer loop that grows a summary one itemset at a time.
//!
//! The informativeness of a candidate `X` with data frequency `fr` and
//! model estimate `est` is
//!
//! ```text
//! h(X) = kl2(fr, est) - r(X)
//! ```
//!
//! where `r(X)` charges the per-row share of the extra description cost
//! (zero for the BIC criterion). A depth-first search enumerates candidates
//! in a fixed item order, counting supports on projected transaction-id
//! lists. For a node `X` with remaining extension items `Y`, every superset
//! `X ⊆ W ⊆ XY` satisfies
//!
//! ```text
//! h(W) ≤ max{ kl2(fr(X), est(XY)), kl2(fr(XY), est(X)) } - r(X)
//! ```
//!
//! because the binary KL divergence is convex in each argument and both
//! `fr` and `est` are antitone along the extension chain; subtrees whose
//! bound cannot beat the incumbent are pruned.

use crate::data::{EmpiricalStats, TransactionDatabase};
use crate::error::{Error, Result};
use crate::itemset::Itemset;
use crate::maxent::{BackgroundMode, ConstraintSet, FitConfig, MaxEntModel};
use crate::scoring::{kl2, score_fitted, Criterion, ScoreConfig, ScoredSummary};
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

/// Candidate-space constraints for the search.
#[derive(Clone, Debug)]
pub struct SearchConstraints {
    /// Minimum absolute support of a candidate.
    pub min_support: usize,
    /// Maximum number of items in a candidate.
    pub max_itemset_size: usize,
    /// Summary size cap; `Some(k)` keeps mining to exactly k entries and
    /// reports the score trajectory, `None` stops when the score stops
    /// improving.
    pub max_k: Option<usize>,
    /// Extension order of the depth-first search; `None` orders items by
    /// descending frequency. The returned maximizer does not depend on it.
    pub item_order: Option<Vec<u32>>,
    /// Wall-clock budget for the whole mining run.
    pub time_budget: Option<Duration>,
    /// Worker threads for the search (1 = sequential).
    pub threads: usize,
}

impl Default for SearchConstraints {
    fn default() -> Self {
        SearchConstraints {
            min_support: 1,
            max_itemset_size: usize::MAX,
            max_k: None,
            item_order: None,
            time_budget: None,
            threads: 1,
        }
    }
}

/// Informativeness of a candidate: divergence of the data frequency from
/// the model estimate, less the per-row description cost of the candidate.
pub fn heuristic_h(fr: f64, est: f64, size: usize, config: &ScoreConfig) -> f64 {
    kl2(fr, est) - extension_cost(size, config)
}

/// Upper bound on `h(W)` over all `X ⊆ W ⊆ XY`, given the frequencies and
/// estimates at both ends of the chain.
pub fn prune_bound(
    fr_x: f64,
    est_x: f64,
    fr_xy: f64,
    est_xy: f64,
    size_x: usize,
    config: &ScoreConfig,
) -> f64 {
    kl2(fr_x, est_xy).max(kl2(fr_xy, est_x)) - extension_cost(size_x, config)
}

/// Per-row share of the description cost a candidate of this size adds.
fn extension_cost(size: usize, config: &ScoreConfig) -> f64 {
    match config.criterion {
        Criterion::Bic => 0.0,
        Criterion::Mdl => size as f64 * config.l2() / config.n_rows as f64,
    }
}

/// Items ordered by descending frequency in `db`, ties by ascending id.
pub fn default_item_order(db: &TransactionDatabase) -> Vec<u32> {
    let margins = db.column_margins();
    let mut order: Vec<u32> = (0..db.n_items() as u32).collect();
    order.sort_by(|&a, &b| {
        margins[b as usize]
            .partial_cmp(&margins[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

/// One evaluated candidate.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub itemset: Itemset,
    pub support: usize,
    pub frequency: f64,
    pub estimate: f64,
    pub h: f64,
}

/// Result of one search pass.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// The best candidate with positive `h`, if any.
    pub best: Option<Candidate>,
    /// True when the time budget expired before the search finished.
    pub timed_out: bool,
    pub nodes_visited: u64,
    pub subtrees_pruned: u64,
}

/// A pruned node recorded by the traced search: the node's itemset, the
/// extension items that were cut off, and the bound that justified it.
#[derive(Clone, Debug)]
pub struct PrunedNode {
    pub itemset: Itemset,
    pub extensions: Vec<u32>,
    pub bound: f64,
}

/// Total order on candidates: higher `h`, then fewer items, then
/// lexicographically smaller items. Makes the maximizer unique.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.h != b.h {
        return a.h > b.h;
    }
    if a.itemset.len() != b.itemset.len() {
        return a.itemset.len() < b.itemset.len();
    }
    a.itemset.items() < b.itemset.items()
}

/// Memoizing read-only view of the model's estimates. Without row
/// constraints an estimate factorizes over dependent groups, so results
/// are cached per (group, item subset); otherwise whole itemsets are keyed.
struct QueryCache<'m> {
    model: &'m MaxEntModel,
    scalar: bool,
    /// item -> (group index + 1, bit position); 0 = outside all groups
    item_slot: Vec<(u32, u32)>,
    group_factors: Vec<HashMap<u64, f64>>,
    whole: HashMap<Vec<u32>, f64>,
    scratch_mask: Vec<u64>,
    scratch_touched: Vec<usize>,
}

impl<'m> QueryCache<'m> {
    fn new(model: &'m MaxEntModel) -> Self {
        let mut item_slot = vec![(0u32, 0u32); model.n_items()];
        let groups = model.group_items();
        for (g, items) in groups.iter().enumerate() {
            for (pos, &item) in items.iter().enumerate() {
                item_slot[item as usize] = (g as u32 + 1, pos as u32);
            }
        }
        QueryCache {
            model,
            scalar: !model.mode().rows_active(),
            item_slot,
            group_factors: vec![HashMap::new(); groups.len()],
            whole: HashMap::new(),
            scratch_mask: vec![0; groups.len()],
            scratch_touched: Vec::new(),
        }
    }

    fn estimate(&mut self, sorted_items: &[u32]) -> f64 {
        if sorted_items.is_empty() {
            return 1.0;
        }
        if !self.scalar {
            if let Some(&p) = self.whole.get(sorted_items) {
                return p;
            }
            let p = self
                .model
                .query(&Itemset::new(sorted_items.to_vec()))
                .unwrap_or(0.0);
            self.whole.insert(sorted_items.to_vec(), p);
            return p;
        }
        let mut p = 1.0;
        for &item in sorted_items {
            let (slot, pos) = self.item_slot[item as usize];
            if slot == 0 {
                p *= self.model.item_probs()[item as usize];
            } else {
                let g = (slot - 1) as usize;
                if self.scratch_mask[g] == 0 {
                    self.scratch_touched.push(g);
                }
                self.scratch_mask[g] |= 1 << pos;
            }
        }
        while let Some(g) = self.scratch_touched.pop() {
            let mask = self.scratch_mask[g];
            self.scratch_mask[g] = 0;
            let model = self.model;
            let f = *self
                .group_factors[g]
                .entry(mask)
                .or_insert_with(|| model.group_query_scalar(g, mask));
            p *= f;
        }
        p
    }
}

/// Group-structure snapshot used to keep candidates within fitting caps.
struct CapacityFilter {
    /// item -> group id + 1; 0 = outside all groups
    item_group: Vec<u32>,
    group_n_items: Vec<usize>,
    group_n_members: Vec<usize>,
    max_items: usize,
    max_members: usize,
    scratch_seen: Vec<bool>,
}

impl CapacityFilter {
    fn new(model: &MaxEntModel, fit: &FitConfig) -> Self {
        let groups = model.group_items();
        let mut item_group = vec![0u32; model.n_items()];
        for (g, items) in groups.iter().enumerate() {
            for &item in items {
                item_group[item as usize] = g as u32 + 1;
            }
        }
        let max_items = if model.mode().rows_active() {
            crate::partition::MAX_PARTITION_ITEMS as usize - 1
        } else {
            fit.max_group_items
        };
        CapacityFilter {
            item_group,
            group_n_items: groups.iter().map(|g| g.len()).collect(),
            group_n_members: model.group_member_counts(),
            max_items,
            max_members: fit.max_group_members,
            scratch_seen: vec![false; groups.len()],
        }
    }

    /// Would adding this candidate to the summary stay within the caps of
    /// the dependent group it creates?
    fn admits(&mut self, items: &[u32]) -> bool {
        let mut merged_items = 0usize;
        let mut merged_members = 1usize;
        let mut touched: Vec<usize> = Vec::new();
        for &item in items {
            let slot = self.item_group[item as usize];
            if slot == 0 {
                merged_items += 1;
            } else {
                let g = (slot - 1) as usize;
                if !self.scratch_seen[g] {
                    self.scratch_seen[g] = true;
                    touched.push(g);
                    merged_items += self.group_n_items[g];
                    merged_members += self.group_n_members[g];
                }
            }
        }
        for g in touched {
            self.scratch_seen[g] = false;
        }
        merged_items <= self.max_items && merged_members <= self.max_members
    }
}

struct Dfs<'a> {
    db: &'a TransactionDatabase,
    score: &'a ScoreConfig,
    minsup: usize,
    max_size: usize,
    min_size: usize,
    skip: &'a HashSet<Vec<u32>>,
    deadline: Option<Instant>,
    shared_best: &'a AtomicU64,
    stop_flag: &'a AtomicBool,
    cache: QueryCache<'a>,
    caps: CapacityFilter,
    // current node's items in extension order and sorted
    path: Vec<u32>,
    sorted: Vec<u32>,
    best: Option<Candidate>,
    nodes: u64,
    pruned: u64,
    timed_out: bool,
    trace: Option<Vec<PrunedNode>>,
}

impl<'a> Dfs<'a> {
    fn push_item(&mut self, item: u32) {
        self.path.push(item);
        let pos = self.sorted.partition_point(|&e| e < item);
        self.sorted.insert(pos, item);
    }

    fn pop_item(&mut self) {
        let item = self.path.pop().expect("nonempty path");
        let pos = self.sorted.binary_search(&item).expect("item on path");
        self.sorted.remove(pos);
    }

    fn check_time(&mut self) -> bool {
        if self.timed_out || self.stop_flag.load(Ordering::Relaxed) {
            self.timed_out = true;
            return true;
        }
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.timed_out = true;
                self.stop_flag.store(true, Ordering::Relaxed);
                return true;
            }
        }
        false
    }

    fn global_best_h(&self) -> f64 {
        f64::from_bits(self.shared_best.load(Ordering::Relaxed))
    }

    fn offer(&mut self, support: usize, fr: f64, est: f64, h: f64) {
        if h <= 0.0 {
            return;
        }
        let cand = Candidate {
            itemset: Itemset::new(self.sorted.clone()),
            support,
            frequency: fr,
            estimate: est,
            h,
        };
        if self.best.as_ref().map_or(true, |b| better(&cand, b)) {
            self.shared_best.fetch_max(h.to_bits(), Ordering::Relaxed);
            self.best = Some(cand);
        }
    }

    /// Visits the node for the current path. `tids` supports the path;
    /// `cands` are extension items, in order, that passed the parent's
    /// filters.
    fn explore(&mut self, tids: &[u32], cands: &[u32]) {
        if self.check_time() {
            return;
        }
        self.nodes += 1;
        let n_rows = self.db.n_rows() as f64;
        let fr = tids.len() as f64 / n_rows;
        let est = clamp_est(self.cache.estimate(&self.sorted));
        let h = heuristic_h(fr, est, self.path.len(), self.score);
        if self.path.len() >= self.min_size && !self.skip.contains(self.sorted.as_slice()) {
            self.offer(tids.len(), fr, est, h);
        }
        if self.path.len() >= self.max_size || cands.is_empty() {
            return;
        }

        // children that stay frequent and within group capacity
        let mut kept: Vec<(u32, Vec<u32>)> = Vec::new();
        for &a in cands {
            let child_tids: Vec<u32> = tids
                .iter()
                .copied()
                .filter(|&t| self.db.row_contains(t as usize, a))
                .collect();
            if child_tids.len() < self.minsup {
                continue;
            }
            self.push_item(a);
            let ok = self.caps.admits(&self.sorted);
            self.pop_item();
            if ok {
                kept.push((a, child_tids));
            }
        }
        if kept.is_empty() {
            return;
        }

        // bound over the whole remaining subtree
        let mut xy_sorted = self.sorted.clone();
        for &(a, _) in &kept {
            let pos = xy_sorted.partition_point(|&e| e < a);
            xy_sorted.insert(pos, a);
        }
        let mut xy_support = 0usize;
        'rows: for &t in &kept[0].1 {
            for &(a, _) in &kept[1..] {
                if !self.db.row_contains(t as usize, a) {
                    continue 'rows;
                }
            }
            xy_support += 1;
        }
        let fr_xy = xy_support as f64 / n_rows;
        let est_xy = clamp_est(self.cache.estimate(&xy_sorted));
        let bound = prune_bound(fr, est, fr_xy, est_xy, self.path.len(), self.score);
        let incumbent = self.global_best_h();
        if bound <= 0.0 || bound < incumbent {
            self.pruned += 1;
            if let Some(trace) = &mut self.trace {
                trace.push(PrunedNode {
                    itemset: Itemset::new(self.sorted.clone()),
                    extensions: kept.iter().map(|&(a, _)| a).collect(),
                    bound,
                });
            }
            return;
        }

        let items: Vec<u32> = kept.iter().map(|&(a, _)| a).collect();
        for (i, (a, child_tids)) in kept.iter().enumerate() {
            self.push_item(*a);
            self.explore(child_tids, &items[i + 1..]);
            self.pop_item();
            if self.timed_out {
                return;
            }
        }
    }
}

fn clamp_est(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

fn resolve_item_order(db: &TransactionDatabase, search: &SearchConstraints) -> Result<Vec<u32>> {
    match &search.item_order {
        None => Ok(default_item_order(db)),
        Some(order) => {
            let n = db.n_items();
            let mut seen = vec![false; n];
            if order.len() != n {
                return Err(Error::invalid("item order must list every item once"));
            }
            for &item in order {
                if (item as usize) >= n || seen[item as usize] {
                    return Err(Error::invalid("item order must be a permutation"));
                }
                seen[item as usize] = true;
            }
            Ok(order.clone())
        }
    }
}

/// Finds the candidate itemset maximizing `h` under the given model, or
/// `None` when no candidate has positive `h`.
pub fn find_most_informative(
    db: &TransactionDatabase,
    model: &MaxEntModel,
    score: &ScoreConfig,
    search: &SearchConstraints,
    fit: &FitConfig,
) -> Result<SearchOutcome> {
    let deadline = search.time_budget.map(|b| Instant::now() + b);
    search_pass(db, model, score, search, fit, deadline, None).map(|(o, _)| o)
}

/// Like [`find_most_informative`], but records every pruned subtree.
/// Runs sequentially regardless of the configured thread count.
pub fn find_most_informative_traced(
    db: &TransactionDatabase,
    model: &MaxEntModel,
    score: &ScoreConfig,
    search: &SearchConstraints,
    fit: &FitConfig,
) -> Result<(SearchOutcome, Vec<PrunedNode>)> {
    let deadline = search.time_budget.map(|b| Instant::now() + b);
    let (outcome, trace) =
        search_pass(db, model, score, search, fit, deadline, Some(Vec::new()))?;
    Ok((outcome, trace.unwrap_or_default()))
}

#[allow(clippy::too_many_arguments)]
fn search_pass(
    db: &TransactionDatabase,
    model: &MaxEntModel,
    score: &ScoreConfig,
    search: &SearchConstraints,
    fit: &FitConfig,
    deadline: Option<Instant>,
    trace: Option<Vec<PrunedNode>>,
) -> Result<(SearchOutcome, Option<Vec<PrunedNode>>)> {
    if db.n_rows() == 0 {
        return Err(Error::invalid("cannot search an empty database"));
    }
    if model.n_items() != db.n_items() {
        return Err(Error::invalid("model and database item universes differ"));
    }
    let order = resolve_item_order(db, search)?;
    let min_size = if model.mode().columns_active() { 2 } else { 1 };
    let skip: HashSet<Vec<u32>> = model
        .members()
        .into_iter()
        .map(|(x, _)| x.items().to_vec())
        .collect();
    let shared_best = AtomicU64::new(0.0f64.to_bits());
    let stop_flag = AtomicBool::new(false);
    let threads = search.threads.max(1).min(order.len().max(1));

    let run_roots = |assigned: Vec<usize>, trace: Option<Vec<PrunedNode>>| {
        let mut dfs = Dfs {
            db,
            score,
            minsup: search.min_support.max(1),
            max_size: search.max_itemset_size,
            min_size,
            skip: &skip,
            deadline,
            shared_best: &shared_best,
            stop_flag: &stop_flag,
            cache: QueryCache::new(model),
            caps: CapacityFilter::new(model, fit),
            path: Vec::new(),
            sorted: Vec::new(),
            best: None,
            nodes: 0,
            pruned: 0,
            timed_out: false,
            trace,
        };
        if dfs.max_size == 0 {
            return dfs;
        }
        for i in assigned {
            let a = order[i];
            let tids: Vec<u32> = (0..db.n_rows() as u32)
                .filter(|&t| db.row_contains(t as usize, a))
                .collect();
            if tids.len() < dfs.minsup {
                continue;
            }
            dfs.push_item(a);
            if dfs.caps.admits(&dfs.sorted) {
                dfs.explore(&tids, &order[i + 1..]);
            }
            dfs.pop_item();
            if dfs.timed_out {
                break;
            }
        }
        dfs
    };

    let mut runs: Vec<Dfs<'_>> = if threads <= 1 || trace.is_some() {
        vec![run_roots((0..order.len()).collect(), trace)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let assigned: Vec<usize> =
                        (t..order.len()).step_by(threads).collect();
                    let run = &run_roots;
                    scope.spawn(move || run(assigned, None))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    };

    let mut best: Option<Candidate> = None;
    let mut nodes = 0;
    let mut pruned = 0;
    let mut timed_out = false;
    let mut trace_out = None;
    for run in &mut runs {
        nodes += run.nodes;
        pruned += run.pruned;
        timed_out |= run.timed_out;
        if let Some(cand) = run.best.take() {
            if best.as_ref().map_or(true, |b| better(&cand, b)) {
                best = Some(cand);
            }
        }
        if let Some(t) = run.trace.take() {
            trace_out = Some(t);
        }
    }
    Ok((
        SearchOutcome {
            best,
            timed_out,
            nodes_visited: nodes,
            subtrees_pruned: pruned,
        },
        trace_out,
    ))
}

/// One accepted summary entry: the itemset as mined, its data statistics,
/// the estimate and heuristic at selection time, and the score after the
/// refit that includes it.
#[derive(Clone, Debug)]
pub struct SummaryEntry {
    pub itemset: Itemset,
    pub support: usize,
    pub frequency: f64,
    pub estimate: f64,
    pub h: f64,
    pub score_after: ScoredSummary,
}

/// Why mining stopped.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StopReason {
    /// The score stopped improving (the non-improving itemset is dropped).
    ScoreCeiling,
    /// No candidate with positive heuristic remained.
    NoCandidate,
    /// The requested summary size was reached.
    ReachedK,
    /// The time budget expired.
    TimeBudget,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ScoreCeiling => "score-ceiling",
            StopReason::NoCandidate => "no-candidate",
            StopReason::ReachedK => "reached-k",
            StopReason::TimeBudget => "time-budget",
        })
    }
}

/// A mined summary with its score trajectory and final model.
#[derive(Clone, Debug)]
pub struct MiningResult {
    pub entries: Vec<SummaryEntry>,
    pub background_score: ScoredSummary,
    pub model: MaxEntModel,
    pub stop: StopReason,
}

impl MiningResult {
    /// Total score of the reported summary.
    pub fn final_bits(&self) -> f64 {
        self.entries
            .last()
            .map(|e| e.score_after.total_bits)
            .unwrap_or(self.background_score.total_bits)
    }

    /// Length of the best-scoring prefix of the trajectory (0 = keep only
    /// the background model). Ties resolve to the shortest prefix.
    pub fn optimal_prefix_len(&self) -> usize {
        let mut best_len = 0;
        let mut best = self.background_score.total_bits;
        for (i, e) in self.entries.iter().enumerate() {
            if e.score_after.total_bits < best {
                best = e.score_after.total_bits;
                best_len = i + 1;
            }
        }
        best_len
    }

    pub fn truncated(&self) -> bool {
        self.stop == StopReason::TimeBudget
    }
}

/// Mines a summary: starting from the background-only model, repeatedly
/// adds the most informative itemset and refits, warm-starting each fit
/// from the previous parameters.
///
/// With `search.max_k = None` mining stops as soon as the score fails to
/// improve and the offending itemset is discarded; with `Some(k)` exactly
/// up to `k` itemsets are reported together with their score trajectory.
pub fn mine_summary(
    db: &TransactionDatabase,
    criterion: Criterion,
    mode: BackgroundMode,
    fit: &FitConfig,
    search: &SearchConstraints,
) -> Result<MiningResult> {
    let stats = EmpiricalStats::from_db(db);
    let score = ScoreConfig::new(criterion, db.n_items(), db.n_rows());
    let deadline = search.time_budget.map(|b| Instant::now() + b);

    let mut constraints = ConstraintSet::new();
    let mut model = MaxEntModel::fit(&constraints, mode, &stats, fit)?;
    let background_score = score_fitted(&model, db, &score);
    let mut entries: Vec<SummaryEntry> = Vec::new();
    let mut current_total = background_score.total_bits;

    let stop = loop {
        if let Some(k) = search.max_k {
            if entries.len() >= k {
                break StopReason::ReachedK;
            }
        }
        let (outcome, _) = search_pass(db, &model, &score, search, fit, deadline, None)?;
        if outcome.timed_out {
            break StopReason::TimeBudget;
        }
        let Some(cand) = outcome.best else {
            break StopReason::NoCandidate;
        };
        let next = constraints.with(cand.itemset.clone(), cand.frequency)?;
        let next_model = MaxEntModel::fit_warm(&next, mode, &stats, fit, Some(&model))?;
        let scored = score_fitted(&next_model, db, &score);
        let keep_all = search.max_k.is_some();
        if !keep_all && scored.total_bits >= current_total {
            break StopReason::ScoreCeiling;
        }
        current_total = scored.total_bits;
        constraints = next;
        model = next_model;
        entries.push(SummaryEntry {
            itemset: cand.itemset,
            support: cand.support,
            frequency: cand.frequency,
            estimate: cand.estimate,
            h: cand.h,
            score_after: scored,
        });
    };

    Ok(MiningResult {
        entries,
        background_score,
        model,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn heuristic_known_values() {
        let bic = ScoreConfig::new(Criterion::Bic, 8, 100);
        assert_eq!(heuristic_h(1.0, 0.5, 3, &bic), 1.0);
        assert_eq!(heuristic_h(0.4, 0.4, 2, &bic), 0.0);
        let mdl = ScoreConfig::new(Criterion::Mdl, 8, 100);
        assert_relative_eq!(
            heuristic_h(0.5, 0.25, 3, &mdl),
            0.20751874963942185 - 3.0 * 3.0 / 100.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            heuristic_h(0.4, 0.4, 2, &mdl),
            -2.0 * 3.0 / 100.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bound_collapses_to_h_without_extensions() {
        let mdl = ScoreConfig::new(Criterion::Mdl, 16, 250);
        let (fr, est) = (0.37, 0.22);
        assert_eq!(
            prune_bound(fr, est, fr, est, 3, &mdl),
            heuristic_h(fr, est, 3, &mdl)
        );
        // all four equal: bound is exactly the negated extension cost
        let b = prune_bound(0.3, 0.3, 0.3, 0.3, 2, &mdl);
        assert_relative_eq!(b, -2.0 * 4.0 / 250.0, epsilon = 1e-12);
        assert!(b <= 0.0);
    }

    #[test]
    fn order_defaults_to_descending_frequency() {
        let db = TransactionDatabase::from_rows(
            &[vec![0, 2], vec![2], vec![1, 2], vec![1]],
            4,
        )
        .unwrap();
        assert_eq!(default_item_order(&db), vec![2, 1, 0, 3]);
    }

    fn planted_pair_db() -> TransactionDatabase {
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for i in 0..40u32 {
            let mut row = Vec::new();
            if i < 20 {
                row.push(0);
                row.push(1);
            }
            if (20..30).contains(&i) {
                row.push(2);
            }
            if (25..35).contains(&i) {
                row.push(3);
            }
            if (30..40).contains(&i) {
                row.push(4);
            }
            if !(5..35).contains(&i) {
                row.push(5);
            }
            rows.push(row);
        }
        TransactionDatabase::from_rows(&rows, 6).unwrap()
    }

    #[test]
    fn planted_pair_is_found() {
        let db = planted_pair_db();
        let stats = EmpiricalStats::from_db(&db);
        let fit = FitConfig::default();
        let model = MaxEntModel::fit(
            &ConstraintSet::new(),
            BackgroundMode::Columns,
            &stats,
            &fit,
        )
        .unwrap();
        let score = ScoreConfig::new(Criterion::Bic, db.n_items(), db.n_rows());
        let search = SearchConstraints::default();
        let outcome = find_most_informative(&db, &model, &score, &search, &fit).unwrap();
        let best = outcome.best.expect("a candidate exists");
        assert_eq!(best.itemset, Itemset::from([0, 1]));
        assert_eq!(best.support, 20);
        assert!(best.h > 0.1, "h = {}", best.h);

        // raising minsup below the winner's support must not change it
        let search10 = SearchConstraints {
            min_support: 10,
            ..SearchConstraints::default()
        };
        let outcome10 = find_most_informative(&db, &model, &score, &search10, &fit).unwrap();
        assert_eq!(outcome10.best.unwrap().itemset, Itemset::from([0, 1]));

        // under column background, sizes below 2 are not candidates
        let search1 = SearchConstraints {
            max_itemset_size: 1,
            ..SearchConstraints::default()
        };
        let outcome1 = find_most_informative(&db, &model, &score, &search1, &fit).unwrap();
        assert!(outcome1.best.is_none());
    }

    #[test]
    fn threaded_search_agrees_with_sequential() {
        let db = planted_pair_db();
        let stats = EmpiricalStats::from_db(&db);
        let fit = FitConfig::default();
        let model = MaxEntModel::fit(
            &ConstraintSet::new(),
            BackgroundMode::Columns,
            &stats,
            &fit,
        )
        .unwrap();
        let score = ScoreConfig::new(Criterion::Mdl, db.n_items(), db.n_rows());
        let seq = find_most_informative(&db, &model, &score, &SearchConstraints::default(), &fit)
            .unwrap();
        let par = find_most_informative(
            &db,
            &model,
            &score,
            &SearchConstraints {
                threads: 4,
                ..SearchConstraints::default()
            },
            &fit,
        )
        .unwrap();
        match (seq.best, par.best) {
            (Some(a), Some(b)) => {
                assert_eq!(a.itemset, b.itemset);
                assert_eq!(a.h, b.h);
            }
            (a, b) => panic!("divergent outcomes: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn mining_zero_k_returns_background() {
        let db = planted_pair_db();
        let search = SearchConstraints {
            max_k: Some(0),
            ..SearchConstraints::default()
        };
        let result = mine_summary(
            &db,
            Criterion::Mdl,
            BackgroundMode::Columns,
            &FitConfig::default(),
            &search,
        )
        .unwrap();
        assert!(result.entries.is_empty());
        assert_eq!(result.stop, StopReason::ReachedK);
        assert_eq!(result.final_bits(), result.background_score.total_bits);
        assert_eq!(result.optimal_prefix_len(), 0);
    }

    #[test]
    fn mining_recovers_planted_pair_then_stops() {
        let db = planted_pair_db();
        // BIC keeps accepting near-zero-frequency pairs here, a slow case
        // for round-robin scaling; give it headroom over the default
        let fit = FitConfig {
            max_passes: 20_000,
            ..FitConfig::default()
        };
        let result = mine_summary(
            &db,
            Criterion::Bic,
            BackgroundMode::Columns,
            &fit,
            &SearchConstraints::default(),
        )
        .unwrap();
        assert!(!result.entries.is_empty());
        assert_eq!(result.entries[0].itemset, Itemset::from([0, 1]));
        assert!(result.final_bits() < result.background_score.total_bits);
        // no duplicates ever
        let mut seen = HashSet::new();
        for e in &result.entries {
            assert!(seen.insert(e.itemset.clone()), "duplicate {:?}", e.itemset);
        }
    }
}
