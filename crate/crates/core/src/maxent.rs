//! Maximum-entropy distributions over binary transactions, constrained by
//! itemset frequencies and optional background statistics.
//!
//! A fitted model has the exponential form
//!
//! ```text
//! p(t) = Π_g [ u0_g · Π_X u_X^{S_X(t)} ] · Π_i v_i^{t_i} (1 - v_i)^{1 - t_i} · w_{|t|}
//! ```
//!
//! where `S_X(t)` indicates that `t` contains all items of the member
//! itemset `X`. Member itemsets sharing items form dependent groups; item
//! factors (`v_i`) carry the column-margin background, and the optional
//! size weights (`w_j`) carry the row-margin background, which couples all
//! items into a single group. Probabilities of a group never enumerate
//! transactions: they are sums over the block partition induced by the
//! group's members (see [`crate::partition`]).
//!
//! Fitting is round-robin iterative scaling: each constraint in turn is
//! pulled onto its target by a multiplicative update, until the worst
//! constraint residual drops below the configured tolerance.

use crate::data::EmpiricalStats;
use crate::data::TransactionDatabase;
use crate::error::{Error, Result};
use crate::itemset::Itemset;
use crate::partition::Partition;
use std::collections::HashMap;
use std::fmt;

/// Which background statistics the model is constrained to reproduce.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum BackgroundMode {
    /// No background; the unconstrained model is uniform.
    None,
    /// Single-item frequencies (column margins).
    #[default]
    Columns,
    /// Row-size distribution (row margins).
    Rows,
    /// Both column and row margins.
    ColumnsAndRows,
}

impl BackgroundMode {
    pub fn columns_active(self) -> bool {
        matches!(self, BackgroundMode::Columns | BackgroundMode::ColumnsAndRows)
    }

    pub fn rows_active(self) -> bool {
        matches!(self, BackgroundMode::Rows | BackgroundMode::ColumnsAndRows)
    }

    pub fn parse(s: &str) -> Result<BackgroundMode> {
        match s {
            "none" => Ok(BackgroundMode::None),
            "cols" | "columns" => Ok(BackgroundMode::Columns),
            "rows" => Ok(BackgroundMode::Rows),
            "both" | "columns+rows" => Ok(BackgroundMode::ColumnsAndRows),
            other => Err(Error::invalid(format!(
                "unknown background mode {other:?} (expected none|cols|rows|both)"
            ))),
        }
    }
}

impl fmt::Display for BackgroundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackgroundMode::None => "none",
            BackgroundMode::Columns => "columns",
            BackgroundMode::Rows => "rows",
            BackgroundMode::ColumnsAndRows => "columns+rows",
        };
        f.write_str(s)
    }
}

/// Fitting parameters.
#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Strength of the smoothing applied to constraint targets; see
    /// [`bayesian_shift`]. Zero disables smoothing.
    pub epsilon: f64,
    /// Convergence threshold on the worst absolute constraint residual.
    pub tolerance: f64,
    /// Maximum number of round-robin passes before giving up.
    pub max_passes: usize,
    /// Cap on distinct items per dependent group.
    pub max_group_items: usize,
    /// Cap on member itemsets per dependent group.
    pub max_group_members: usize,
    /// Diagnostic mode: stop after this many single-constraint updates and
    /// return the intermediate model without checking convergence.
    pub update_limit: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 0.01,
            tolerance: 1e-6,
            max_passes: 1000,
            max_group_items: 10,
            max_group_members: 24,
            update_limit: None,
        }
    }
}

/// Convergence record of a fit.
#[derive(Clone, Debug, Default)]
pub struct FitDiagnostics {
    pub passes: usize,
    pub residual: f64,
    pub updates: usize,
}

/// Smooths a raw frequency toward the uniform-model frequency `2^-size`,
/// keeping fit targets away from the {0, 1} boundary.
///
/// ```
/// use itemsum_core::bayesian_shift;
/// assert_eq!(bayesian_shift(0.5, 1, 0.01), 0.5);
/// assert_eq!(bayesian_shift(0.0, 2, 0.01), 0.0025);
/// assert_eq!(bayesian_shift(1.0, 3, 0.01), 0.99125);
/// ```
pub fn bayesian_shift(freq: f64, size: usize, epsilon: f64) -> f64 {
    (1.0 - epsilon) * freq + epsilon * (0.5f64).powi(size as i32)
}

/// An ordered collection of itemset constraints with their raw frequencies.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    members: Vec<(Itemset, f64)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        ConstraintSet::default()
    }

    /// Builds constraints from itemsets with frequencies taken from `db`.
    pub fn from_frequencies(db: &TransactionDatabase, sets: &[Itemset]) -> Result<Self> {
        let mut out = ConstraintSet::new();
        for x in sets {
            let fr = db.frequency(x)?;
            out.push(x.clone(), fr)?;
        }
        Ok(out)
    }

    pub fn from_pairs(pairs: Vec<(Itemset, f64)>) -> Result<Self> {
        let mut out = ConstraintSet::new();
        for (x, fr) in pairs {
            out.push(x, fr)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, x: Itemset, freq: f64) -> Result<()> {
        if x.is_empty() {
            return Err(Error::invalid("constraint itemsets must be nonempty"));
        }
        if !(0.0..=1.0).contains(&freq) {
            return Err(Error::invalid(format!(
                "frequency {freq} of {x:?} outside [0, 1]"
            )));
        }
        self.members.push((x, freq));
        Ok(())
    }

    /// A copy of this collection with one additional constraint.
    pub fn with(&self, x: Itemset, freq: f64) -> Result<Self> {
        let mut out = self.clone();
        out.push(x, freq)?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Itemset, f64)> {
        self.members.iter()
    }

    pub fn sets(&self) -> impl Iterator<Item = &Itemset> {
        self.members.iter().map(|(x, _)| x)
    }

    pub fn contains(&self, x: &Itemset) -> bool {
        self.members.iter().any(|(m, _)| m == x)
    }

    /// Sum of member sizes.
    pub fn total_size(&self) -> usize {
        self.members.iter().map(|(x, _)| x.len()).sum()
    }
}

/// Splits member itemsets into connected components under item sharing.
/// Components are ordered by their smallest item; member indices inside a
/// component keep their original order.
pub fn decompose_groups(members: &[Itemset]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..members.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut item_owner: HashMap<u32, usize> = HashMap::new();
    for (idx, x) in members.iter().enumerate() {
        for &item in x.items() {
            match item_owner.entry(item) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    let a = find(&mut parent, *e.get());
                    let b = find(&mut parent, idx);
                    if a != b {
                        parent[a] = b;
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(idx);
                }
            }
        }
    }
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for idx in 0..members.len() {
        let root = find(&mut parent, idx);
        by_root.entry(root).or_default().push(idx);
    }
    let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| {
        g.iter()
            .filter_map(|&i| members[i].items().first().copied())
            .min()
            .unwrap_or(u32::MAX)
    });
    groups
}

/// Distribution of the number of set items among independent Bernoulli
/// columns with the given probabilities. Returns `probs.len() + 1` values.
pub fn compute_size_probabilities(probs: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; probs.len() + 1];
    g[0] = 1.0;
    for (i, &v) in probs.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            g[j] = v * g[j - 1] + (1.0 - v) * g[j];
        }
        g[0] *= 1.0 - v;
    }
    g
}

/// Replaces item `item`'s probability by `new_prob` in the size
/// distribution `g` of `probs`, in O(n) when numerically safe, falling back
/// to a full recompute otherwise.
pub fn update_size_probabilities(
    g: &[f64],
    probs: &[f64],
    item: usize,
    new_prob: f64,
) -> Vec<f64> {
    assert_eq!(g.len(), probs.len() + 1, "size distribution length mismatch");
    let old = probs[item];
    let mut reduced = g.to_vec();
    if remove_item_from_dist(&mut reduced, old) {
        reduced.pop();
        add_item_to_dist(&mut reduced, new_prob);
        reduced
    } else {
        // deconvolution was unstable; recompute from scratch
        let mut replaced = probs.to_vec();
        replaced[item] = new_prob;
        compute_size_probabilities(&replaced)
    }
}

/// Divides one Bernoulli factor out of a size distribution, in place over
/// the first `len - 1` entries. Returns false when the division is
/// numerically unreliable.
fn remove_item_from_dist(g: &mut [f64], v: f64) -> bool {
    let n = g.len() - 1;
    let q = 1.0 - v;
    let mut out = vec![0.0; n];
    // deconvolve from the end that keeps the per-step error factor <= 1
    if v <= 0.5 {
        let mut prev = g[0] / q;
        out[0] = prev;
        for j in 1..n {
            let val = (g[j] - v * prev) / q;
            if val < -1e-9 {
                return false;
            }
            prev = val.max(0.0);
            out[j] = prev;
        }
    } else {
        let mut next = g[n] / v;
        out[n - 1] = next;
        for j in (1..n).rev() {
            let val = (g[j] - q * next) / v;
            if val < -1e-9 {
                return false;
            }
            next = val.max(0.0);
            out[j - 1] = next;
        }
    }
    g[..n].copy_from_slice(&out);
    true
}

/// Convolves one Bernoulli factor into a size distribution, growing it by
/// one entry.
fn add_item_to_dist(g: &mut Vec<f64>, v: f64) {
    g.push(0.0);
    for j in (1..g.len()).rev() {
        g[j] = v * g[j - 1] + (1.0 - v) * g[j];
    }
    g[0] *= 1.0 - v;
}

#[derive(Clone, Debug)]
struct GroupMember {
    set: Itemset,
    local_mask: u64,
    raw: f64,
    target: f64,
}

#[derive(Clone, Debug)]
struct Group {
    /// Sorted global ids of the items covered by this group's members.
    items: Vec<u32>,
    members: Vec<GroupMember>,
    partition: Partition,
    log_u: Vec<f64>,
    log_u0: f64,
    /// Per block: background mass. Without row constraints this is the
    /// probability, under the item factors, that a transaction's group part
    /// lies in the block; with row constraints it is the size-weighted mass
    /// `Σ_j w_j · e_v(T, j)`.
    block_bg: Vec<f64>,
    /// Row-constrained models only: `e_v(T, j)` per block and row size.
    block_rows: Vec<Vec<f64>>,
}

impl Group {
    /// `Σ_m∈sig log_u[m]` for a block signature.
    fn log_coef(&self, signature: u32) -> f64 {
        let mut s = 0.0;
        let mut sig = signature;
        while sig != 0 {
            let m = sig.trailing_zeros() as usize;
            s += self.log_u[m];
            sig &= sig - 1;
        }
        s
    }

    /// Normalized probability that member `m` is supported.
    fn member_prob(&self, m: usize) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (b, block) in self.partition.blocks().iter().enumerate() {
            let w = exp2(self.log_coef(block.signature)) * self.block_bg[b];
            den += w;
            if block.signature >> m & 1 == 1 {
                num += w;
            }
        }
        if den <= 0.0 {
            0.0
        } else {
            (num / den).clamp(0.0, 1.0)
        }
    }

    /// Total unnormalized mass including `u0`.
    fn mass(&self) -> f64 {
        self.partition
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, block)| exp2(self.log_u0 + self.log_coef(block.signature)) * self.block_bg[b])
            .sum()
    }

    fn renormalize(&mut self) {
        let mass = self.mass();
        if mass > 0.0 && mass.is_finite() {
            self.log_u0 -= mass.log2();
        }
    }
}

fn exp2(x: f64) -> f64 {
    x.exp2()
}

fn xlog2y(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * y.log2()
    }
}

/// A fitted maximum-entropy model.
#[derive(Clone, Debug)]
pub struct MaxEntModel {
    n_items: usize,
    mode: BackgroundMode,
    epsilon: f64,
    /// Item factors as probabilities; 0.5 without column background.
    item_probs: Vec<f64>,
    /// Smoothed column-margin targets (column background only).
    column_targets: Option<Vec<f64>>,
    /// Empirical row-size distribution (row background only).
    size_targets: Option<Vec<f64>>,
    /// Row-size weights `w_j`; zero for sizes with no empirical mass.
    size_weights: Option<Vec<f64>>,
    /// Size distribution of all item factors (row background only).
    size_dist_all: Option<Vec<f64>>,
    groups: Vec<Group>,
    diagnostics: FitDiagnostics,
}

impl MaxEntModel {
    /// Fits a model to the given constraints and background statistics.
    pub fn fit(
        constraints: &ConstraintSet,
        mode: BackgroundMode,
        stats: &EmpiricalStats,
        cfg: &FitConfig,
    ) -> Result<MaxEntModel> {
        Self::fit_warm(constraints, mode, stats, cfg, None)
    }

    /// Like [`MaxEntModel::fit`], but starts from the parameters of a
    /// previously fitted model where they apply (matching member itemsets,
    /// item factors, size weights).
    pub fn fit_warm(
        constraints: &ConstraintSet,
        mode: BackgroundMode,
        stats: &EmpiricalStats,
        cfg: &FitConfig,
        warm: Option<&MaxEntModel>,
    ) -> Result<MaxEntModel> {
        let n = stats.n_items;
        if stats.column_margins.len() != n || stats.row_size_dist.len() != n + 1 {
            return Err(Error::invalid("statistics do not match the item universe"));
        }
        if stats.n_rows == 0 {
            return Err(Error::invalid("cannot fit a model to an empty database"));
        }
        for (x, _) in constraints.iter() {
            if x.max_item().unwrap() as usize >= n {
                return Err(Error::invalid(format!(
                    "constraint {x:?} exceeds the universe of {n} items"
                )));
            }
        }

        let mut model = MaxEntModel {
            n_items: n,
            mode,
            epsilon: cfg.epsilon,
            item_probs: Vec::new(),
            column_targets: None,
            size_targets: None,
            size_weights: None,
            size_dist_all: None,
            groups: Vec::new(),
            diagnostics: FitDiagnostics::default(),
        };

        if mode.columns_active() {
            let targets: Vec<f64> = stats
                .column_margins
                .iter()
                .map(|&m| bayesian_shift(m, 1, cfg.epsilon))
                .collect();
            model.item_probs = targets.clone();
            model.column_targets = Some(targets);
        } else {
            model.item_probs = vec![0.5; n];
        }
        if let Some(w) = warm.filter(|w| w.mode == mode && w.n_items == n) {
            model.item_probs = w.item_probs.clone();
        }

        if mode.rows_active() {
            // Smooth toward the uniform model's size distribution, exactly
            // like item and member targets; mixing with the same uniform
            // model keeps all targets jointly realizable.
            let binom = compute_size_probabilities(&vec![0.5; n]);
            let q: Vec<f64> = stats
                .row_size_dist
                .iter()
                .zip(&binom)
                .map(|(&qj, &bj)| (1.0 - cfg.epsilon) * qj + cfg.epsilon * bj)
                .collect();
            let weights = match warm
                .filter(|w| w.mode == mode && w.n_items == n)
                .and_then(|w| w.size_weights.clone())
            {
                Some(ws) => ws,
                None => q.iter().map(|&qj| if qj > 0.0 { 1.0 } else { 0.0 }).collect(),
            };
            model.size_targets = Some(q);
            model.size_weights = Some(weights);
            model.size_dist_all = Some(compute_size_probabilities(&model.item_probs));
        }

        // Previous parameters for matching member itemsets.
        let warm_log_u: HashMap<&Itemset, f64> = warm
            .map(|w| {
                w.groups
                    .iter()
                    .flat_map(|g| {
                        g.members
                            .iter()
                            .enumerate()
                            .map(move |(m, gm)| (&gm.set, g.log_u[m]))
                    })
                    .collect()
            })
            .unwrap_or_default();

        let member_list: Vec<(Itemset, f64)> = constraints.iter().cloned().collect();
        let grouping: Vec<Vec<usize>> = if mode.rows_active() {
            // row constraints couple all items; keep everything together
            vec![(0..member_list.len()).collect()]
        } else {
            decompose_groups(&member_list.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>())
        };

        for indices in grouping {
            let mut items: Vec<u32> = indices
                .iter()
                .flat_map(|&i| member_list[i].0.items().iter().copied())
                .collect();
            items.sort_unstable();
            items.dedup();
            let item_cap = if mode.rows_active() {
                // leave one slot of slack so queries can extend the universe
                crate::partition::MAX_PARTITION_ITEMS as usize - 1
            } else {
                cfg.max_group_items
            };
            if items.len() > item_cap {
                let show = Itemset::new(items.clone());
                return Err(Error::capacity(format!(
                    "dependent group over items {{{show}}} has {} items, more than the cap of {}",
                    items.len(),
                    item_cap
                )));
            }
            if indices.len() > cfg.max_group_members {
                return Err(Error::capacity(format!(
                    "dependent group has {} member itemsets, more than the cap of {}",
                    indices.len(),
                    cfg.max_group_members
                )));
            }

            let mut members = Vec::with_capacity(indices.len());
            let mut masks = Vec::with_capacity(indices.len());
            let mut log_u = Vec::with_capacity(indices.len());
            for &i in &indices {
                let (set, raw) = &member_list[i];
                let mut mask = 0u64;
                for &item in set.items() {
                    let pos = items.binary_search(&item).expect("member item in group");
                    mask |= 1 << pos;
                }
                masks.push(mask);
                log_u.push(warm_log_u.get(set).copied().unwrap_or(0.0));
                members.push(GroupMember {
                    set: set.clone(),
                    local_mask: mask,
                    raw: *raw,
                    target: bayesian_shift(*raw, set.len(), cfg.epsilon),
                });
            }
            let partition =
                Partition::induce_masks(&masks, items.len() as u32, cfg.max_group_members)?;
            let n_blocks = partition.blocks().len();
            model.groups.push(Group {
                items,
                members,
                partition,
                log_u,
                log_u0: 0.0,
                block_bg: vec![0.0; n_blocks],
                block_rows: Vec::new(),
            });
        }
        // Without members, row-constrained models still need one carrier
        // group for the normalization constant.
        if mode.rows_active() && model.groups.is_empty() {
            model.groups.push(Group {
                items: Vec::new(),
                members: Vec::new(),
                partition: Partition::induce_masks(&[], 0, 1)?,
                log_u: Vec::new(),
                log_u0: 0.0,
                block_bg: vec![0.0],
                block_rows: Vec::new(),
            });
        }

        for g in 0..model.groups.len() {
            model.refresh_group_background(g);
            model.groups[g].renormalize();
        }

        model.scale_to_convergence(cfg)?;
        Ok(model)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn mode(&self) -> BackgroundMode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn item_probs(&self) -> &[f64] {
        &self.item_probs
    }

    pub fn size_weights(&self) -> Option<&[f64]> {
        self.size_weights.as_deref()
    }

    /// All member constraints, with raw frequencies, in fit order.
    pub fn members(&self) -> Vec<(Itemset, f64)> {
        self.groups
            .iter()
            .flat_map(|g| g.members.iter().map(|m| (m.set.clone(), m.raw)))
            .collect()
    }

    pub fn n_members(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    /// Sum of member sizes.
    pub fn total_member_size(&self) -> usize {
        self.groups
            .iter()
            .flat_map(|g| g.members.iter())
            .map(|m| m.set.len())
            .sum()
    }

    /// Log2 of the multiplier `u_X` of a member itemset, if present.
    pub fn log2_u(&self, x: &Itemset) -> Option<f64> {
        for g in &self.groups {
            for (m, gm) in g.members.iter().enumerate() {
                if gm.set == *x {
                    return Some(g.log_u[m]);
                }
            }
        }
        None
    }

    /// The items of every dependent group; items outside all groups are
    /// independent.
    pub fn group_items(&self) -> Vec<Vec<u32>> {
        self.groups.iter().map(|g| g.items.clone()).collect()
    }

    /// Member itemset counts per dependent group, aligned with
    /// [`MaxEntModel::group_items`].
    pub fn group_member_counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.members.len()).collect()
    }

    /// Rebuilds `block_bg` (and the per-size tensors under row background)
    /// from the current item factors and size weights.
    fn refresh_group_background(&mut self, g: usize) {
        if self.mode.rows_active() {
            self.refresh_group_rows(g);
            return;
        }
        let group = &mut self.groups[g];
        let mut weights: Vec<f64> = group
            .partition
            .blocks()
            .iter()
            .map(|b| {
                let mut prod = 1.0;
                let mut mask = b.union_mask;
                while mask != 0 {
                    let pos = mask.trailing_zeros() as usize;
                    prod *= self.item_probs[group.items[pos] as usize];
                    mask &= mask - 1;
                }
                prod
            })
            .collect();
        group.partition.solve_exact(&mut weights);
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        group.block_bg = weights;
    }

    fn refresh_group_rows(&mut self, g: usize) {
        let n = self.n_items;
        let g_all = self
            .size_dist_all
            .as_ref()
            .expect("size distribution present under row background");
        let group = &self.groups[g];
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(group.partition.blocks().len());
        for b in group.partition.blocks() {
            let union_items: Vec<u32> = bits_of(b.union_mask)
                .map(|pos| group.items[pos])
                .collect();
            rows.push(self.cumulative_size_vector(&union_items, g_all, n));
        }
        let group = &mut self.groups[g];
        group.partition.solve_exact_vec(&mut rows);
        for row in &mut rows {
            for w in row.iter_mut() {
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
        }
        group.block_rows = rows;
        self.refresh_block_mass(g);
    }

    /// Cumulative block weight per row size: probability, under the item
    /// factors, that all `union_items` are set and the total size is `j`.
    fn cumulative_size_vector(&self, union_items: &[u32], g_all: &[f64], n: usize) -> Vec<f64> {
        let mut base = 1.0;
        for &item in union_items {
            base *= self.item_probs[item as usize];
        }
        let rest = self.size_dist_without(union_items, g_all);
        let mut cum = vec![0.0; n + 1];
        let offset = union_items.len();
        for (r, &p) in rest.iter().enumerate() {
            cum[offset + r] = base * p;
        }
        cum
    }

    /// Size distribution of the item factors outside `removed`.
    fn size_dist_without(&self, removed: &[u32], g_all: &[f64]) -> Vec<f64> {
        let mut g = g_all.to_vec();
        let mut ok = true;
        for &item in removed {
            if !remove_item_from_dist(&mut g, self.item_probs[item as usize]) {
                ok = false;
                break;
            }
            g.pop();
        }
        if ok {
            return g;
        }
        let keep: Vec<f64> = (0..self.n_items as u32)
            .filter(|i| !removed.contains(i))
            .map(|i| self.item_probs[i as usize])
            .collect();
        compute_size_probabilities(&keep)
    }

    fn refresh_block_mass(&mut self, g: usize) {
        let weights = self
            .size_weights
            .as_ref()
            .expect("size weights present under row background");
        let group = &mut self.groups[g];
        group.block_bg = group
            .block_rows
            .iter()
            .map(|row| row.iter().zip(weights).map(|(e, w)| e * w).sum())
            .collect();
    }

    /// The model's row-size distribution, when a row background is active.
    pub fn size_distribution(&self) -> Option<Vec<f64>> {
        self.size_weights.as_ref()?;
        Some(self.model_size_dist())
    }

    /// The model's row-size distribution (row background only).
    fn model_size_dist(&self) -> Vec<f64> {
        let weights = self.size_weights.as_ref().expect("row background");
        let group = &self.groups[0];
        let mut out = vec![0.0; self.n_items + 1];
        for (b, block) in group.partition.blocks().iter().enumerate() {
            let coef = exp2(group.log_coef(block.signature));
            for (j, e) in group.block_rows[b].iter().enumerate() {
                out[j] += coef * e * weights[j];
            }
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            for p in &mut out {
                *p /= total;
            }
        }
        out
    }

    /// Round-robin iterative scaling until the largest residual is within
    /// tolerance.
    fn scale_to_convergence(&mut self, cfg: &FitConfig) -> Result<()> {
        let mut updates = 0usize;
        let budget = cfg.update_limit.unwrap_or(usize::MAX);
        let mut residual = self.residual();
        if residual <= cfg.tolerance {
            self.diagnostics = FitDiagnostics {
                passes: 0,
                residual,
                updates,
            };
            return Ok(());
        }
        for pass in 1..=cfg.max_passes {
            let exhausted = self.one_pass(&mut updates, budget);
            for g in 0..self.groups.len() {
                self.groups[g].renormalize();
            }
            residual = self.residual();
            self.diagnostics = FitDiagnostics {
                passes: pass,
                residual,
                updates,
            };
            if exhausted {
                // diagnostic mode: intermediate state requested
                return Ok(());
            }
            if residual <= cfg.tolerance {
                return Ok(());
            }
        }
        Err(Error::NoConvergence {
            residual,
            passes: cfg.max_passes,
        })
    }

    /// One full round of updates. Returns true when the update budget ran out.
    fn one_pass(&mut self, updates: &mut usize, budget: usize) -> bool {
        // member itemset constraints
        for g in 0..self.groups.len() {
            for m in 0..self.groups[g].members.len() {
                if *updates >= budget {
                    return true;
                }
                let group = &mut self.groups[g];
                let p = group.member_prob(m);
                let f = group.members[m].target;
                *updates += 1;
                if p <= 0.0 || p >= 1.0 {
                    continue; // constraint unreachable from here; skip
                }
                group.log_u[m] += (f / p).log2() + ((1.0 - p) / (1.0 - f)).log2();
                group.log_u0 += ((1.0 - f) / (1.0 - p)).log2();
            }
        }
        // column margins
        if self.mode.columns_active() {
            if self.mode.rows_active() {
                for item in 0..self.n_items as u32 {
                    if *updates >= budget {
                        return true;
                    }
                    let p = self.margin(item);
                    self.update_item_factor(item, p);
                    *updates += 1;
                }
            } else {
                for g in 0..self.groups.len() {
                    for pos in 0..self.groups[g].items.len() {
                        if *updates >= budget {
                            return true;
                        }
                        let item = self.groups[g].items[pos];
                        let p = self.group_query_scalar(g, 1u64 << pos);
                        self.update_item_factor(item, p);
                        self.refresh_group_background(g);
                        *updates += 1;
                    }
                }
                // items outside every group sit exactly on their targets
            }
        }
        // row-size margins: one simultaneous multiplicative update
        if self.mode.rows_active() {
            if *updates >= budget {
                return true;
            }
            let p = self.model_size_dist();
            let q = self.size_targets.clone().expect("row background");
            let weights = self.size_weights.as_mut().expect("row background");
            for j in 0..weights.len() {
                if q[j] <= 0.0 {
                    weights[j] = 0.0;
                } else if p[j] > 0.0 {
                    weights[j] *= q[j] / p[j];
                }
            }
            *updates += 1;
            for g in 0..self.groups.len() {
                self.refresh_block_mass(g);
            }
        }
        false
    }

    /// Applies a margin update to one item factor given the model's current
    /// margin `p`, keeping the distribution consistent via `log_u0`.
    fn update_item_factor(&mut self, item: u32, p: f64) {
        let f = self.column_targets.as_ref().expect("column background")[item as usize];
        if p <= 0.0 || p >= 1.0 {
            return;
        }
        let v_old = self.item_probs[item as usize];
        let odds = (v_old / (1.0 - v_old)) * (f / p) * ((1.0 - p) / (1.0 - f));
        let v_new = (odds / (1.0 + odds)).clamp(1e-12, 1.0 - 1e-12);
        self.item_probs[item as usize] = v_new;
        // the group that absorbs this item's factor keeps total mass intact
        let gi = self
            .groups
            .iter()
            .position(|g| g.items.binary_search(&item).is_ok())
            .unwrap_or(0);
        if let Some(group) = self.groups.get_mut(gi) {
            group.log_u0 +=
                ((1.0 - f) / (1.0 - p)).log2() + ((1.0 - v_old) / (1.0 - v_new)).log2();
        }
        if self.mode.rows_active() {
            let g_all = self.size_dist_all.take().expect("row background");
            let updated =
                update_size_probabilities_with_old(&g_all, v_old, v_new, &self.item_probs);
            self.size_dist_all = Some(updated);
            for g in 0..self.groups.len() {
                self.refresh_group_rows(g);
            }
        }
    }

    /// Worst absolute residual over all active constraints.
    fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for group in &self.groups {
            for (m, gm) in group.members.iter().enumerate() {
                worst = worst.max((group.member_prob(m) - gm.target).abs());
            }
        }
        if self.mode.columns_active() {
            let targets = self.column_targets.as_ref().unwrap();
            if self.mode.rows_active() {
                for item in 0..self.n_items as u32 {
                    let p = self.margin(item);
                    worst = worst.max((p - targets[item as usize]).abs());
                }
            } else {
                for (g, group) in self.groups.iter().enumerate() {
                    for pos in 0..group.items.len() {
                        let p = self.group_query_scalar(g, 1u64 << pos);
                        worst = worst.max((p - targets[group.items[pos] as usize]).abs());
                    }
                }
                // leftover items equal their targets by construction
            }
        }
        if self.mode.rows_active() {
            let p = self.model_size_dist();
            let q = self.size_targets.as_ref().unwrap();
            for (pj, qj) in p.iter().zip(q) {
                worst = worst.max((pj - qj).abs());
            }
        }
        worst
    }

    /// Estimated probability that all items of `y` occur in a transaction.
    ///
    /// Queries never mutate the model; they refine the block partition with
    /// `y` as a scratch member whose multiplier is 1.
    pub fn query(&self, y: &Itemset) -> Result<f64> {
        if let Some(max) = y.max_item() {
            if max as usize >= self.n_items {
                return Err(Error::invalid(format!(
                    "query {y:?} exceeds the universe of {} items",
                    self.n_items
                )));
            }
        }
        if y.is_empty() {
            return Ok(1.0);
        }
        if self.mode.rows_active() {
            return self.query_rows(y);
        }
        let mut result = 1.0;
        let mut leftover = 1.0;
        let mut seen = vec![false; y.len()];
        for (g, group) in self.groups.iter().enumerate() {
            let mut mask = 0u64;
            for (i, &item) in y.items().iter().enumerate() {
                if let Ok(pos) = group.items.binary_search(&item) {
                    mask |= 1 << pos;
                    seen[i] = true;
                }
            }
            if mask != 0 {
                result *= self.group_query_scalar(g, mask);
            }
        }
        for (i, &item) in y.items().iter().enumerate() {
            if !seen[i] {
                leftover *= self.item_probs[item as usize];
            }
        }
        Ok(result * leftover)
    }

    /// Group-local query without row constraints.
    pub(crate) fn group_query_scalar(&self, g: usize, y_mask: u64) -> f64 {
        let group = &self.groups[g];
        if y_mask == 0 {
            return 1.0;
        }
        if let Some(m) = group.members.iter().position(|gm| gm.local_mask == y_mask) {
            return group.member_prob(m);
        }
        let mut masks: Vec<u64> = group.members.iter().map(|m| m.local_mask).collect();
        masks.push(y_mask);
        let refined = Partition::induce_masks(&masks, group.items.len() as u32, masks.len())
            .expect("refinement within caps");
        let mut weights: Vec<f64> = refined
            .blocks()
            .iter()
            .map(|b| {
                let mut prod = 1.0;
                let mut mask = b.union_mask;
                while mask != 0 {
                    let pos = mask.trailing_zeros() as usize;
                    prod *= self.item_probs[group.items[pos] as usize];
                    mask &= mask - 1;
                }
                prod
            })
            .collect();
        refined.solve_exact(&mut weights);
        let y_bit = group.members.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for (b, block) in refined.blocks().iter().enumerate() {
            let w = exp2(group.log_coef(block.signature & ((1 << y_bit) - 1)))
                * weights[b].max(0.0);
            den += w;
            if block.signature >> y_bit & 1 == 1 {
                num += w;
            }
        }
        if den <= 0.0 {
            0.0
        } else {
            (num / den).clamp(0.0, 1.0)
        }
    }

    /// Query under row constraints: refines the single coupled group over
    /// the union of its items and the query's items.
    fn query_rows(&self, y: &Itemset) -> Result<f64> {
        let group = &self.groups[0];
        let weights = self.size_weights.as_ref().expect("row background");
        let g_all = self.size_dist_all.as_ref().expect("row background");
        // extended universe: group items plus any query items outside them
        let mut ext: Vec<u32> = group.items.clone();
        for &item in y.items() {
            if ext.binary_search(&item).is_err() {
                let pos = ext.partition_point(|&e| e < item);
                ext.insert(pos, item);
            }
        }
        let to_local = |set: &Itemset| -> u64 {
            let mut mask = 0u64;
            for &item in set.items() {
                let pos = ext.binary_search(&item).expect("item in extended universe");
                mask |= 1 << pos;
            }
            mask
        };
        let mut masks: Vec<u64> = group.members.iter().map(|m| to_local(&m.set)).collect();
        masks.push(to_local(y));
        let refined = Partition::induce_masks(&masks, ext.len() as u32, masks.len())?;
        let y_bit = group.members.len();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut rows: Vec<Vec<f64>> = refined
            .blocks()
            .iter()
            .map(|b| {
                let union_items: Vec<u32> = bits_of(b.union_mask).map(|pos| ext[pos]).collect();
                self.cumulative_size_vector(&union_items, g_all, self.n_items)
            })
            .collect();
        refined.solve_exact_vec(&mut rows);
        for (b, block) in refined.blocks().iter().enumerate() {
            let coef = exp2(group.log_coef(block.signature & ((1 << y_bit) - 1)));
            let mass: f64 = rows[b]
                .iter()
                .zip(weights)
                .map(|(e, w)| e.max(0.0) * w)
                .sum();
            let w = coef * mass;
            den += w;
            if block.signature >> y_bit & 1 == 1 {
                num += w;
            }
        }
        Ok(if den <= 0.0 {
            0.0
        } else {
            (num / den).clamp(0.0, 1.0)
        })
    }

    /// Log2-probability of one database row under the model. Returns
    /// `-inf` for rows the model rules out.
    pub fn log2_prob_row(&self, db: &TransactionDatabase, row: usize) -> f64 {
        let mut lp = 0.0;
        for group in &self.groups {
            lp += group.log_u0;
            for (m, gm) in group.members.iter().enumerate() {
                if db.row_supports(row, &gm.set) {
                    lp += group.log_u[m];
                }
            }
        }
        for item in 0..self.n_items as u32 {
            let v = self.item_probs[item as usize];
            lp += if db.row_contains(row, item) {
                v.log2()
            } else {
                (1.0 - v).log2()
            };
        }
        if let Some(weights) = &self.size_weights {
            let w = weights[db.row_size(row)];
            lp += if w > 0.0 { w.log2() } else { f64::NEG_INFINITY };
        }
        lp
    }

    /// Shannon entropy of the model in bits, computed from the parameters
    /// and the model's own expectations (never by enumerating transactions).
    pub fn entropy_bits(&self) -> f64 {
        let mut h = 0.0;
        for group in &self.groups {
            h -= group.log_u0;
            for m in 0..group.members.len() {
                h -= group.member_prob(m) * group.log_u[m];
            }
        }
        for item in 0..self.n_items as u32 {
            let v = self.item_probs[item as usize];
            let p = self.margin(item);
            h -= xlog2y(p, v) + xlog2y(1.0 - p, 1.0 - v);
        }
        if let Some(weights) = &self.size_weights {
            let p = self.model_size_dist();
            for (pj, wj) in p.iter().zip(weights) {
                h -= xlog2y(*pj, *wj);
            }
        }
        h
    }

    /// The model's estimate of a single item's frequency.
    pub fn margin(&self, item: u32) -> f64 {
        if self.mode.rows_active() {
            // a single extra item always fits under the partition cap
            return self
                .query_rows(&Itemset::singleton(item))
                .expect("singleton query within caps");
        }
        for (g, group) in self.groups.iter().enumerate() {
            if let Ok(pos) = group.items.binary_search(&item) {
                return self.group_query_scalar(g, 1u64 << pos);
            }
        }
        self.item_probs[item as usize]
    }

    /// Serializes the model as deterministic line-oriented text.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("itemsum-model v1\n");
        out.push_str(&format!("n-items {}\n", self.n_items));
        out.push_str(&format!("mode {}\n", self.mode));
        out.push_str(&format!("epsilon {}\n", self.epsilon));
        out.push_str(&format!(
            "fitted passes={} residual={} updates={}\n",
            self.diagnostics.passes, self.diagnostics.residual, self.diagnostics.updates
        ));
        for item in 0..self.n_items {
            match &self.column_targets {
                Some(t) => out.push_str(&format!(
                    "item {item} {} {}\n",
                    self.item_probs[item], t[item]
                )),
                None => out.push_str(&format!("item {item} {}\n", self.item_probs[item])),
            }
        }
        if let (Some(w), Some(q)) = (&self.size_weights, &self.size_targets) {
            for j in 0..w.len() {
                out.push_str(&format!("size {j} {} {}\n", q[j], w[j]));
            }
        }
        for group in &self.groups {
            out.push_str(&format!("group log-u0 {}\n", group.log_u0));
            for (m, gm) in group.members.iter().enumerate() {
                out.push_str(&format!(
                    "member {} | raw {} | target {} | log-u {}\n",
                    gm.set, gm.raw, gm.target, group.log_u[m]
                ));
            }
        }
        out.push_str("end\n");
        out
    }

    /// Parses a model serialized by [`MaxEntModel::serialize`].
    pub fn parse(text: &str) -> Result<MaxEntModel> {
        let mut lines = text.lines().enumerate();
        let fail = |lineno: usize, msg: String| Error::Parse {
            line: lineno + 1,
            message: msg,
        };
        let (n0, header) = lines
            .next()
            .ok_or_else(|| fail(0, "empty model file".into()))?;
        if header.trim() != "itemsum-model v1" {
            return Err(fail(n0, format!("unexpected header {header:?}")));
        }

        let mut n_items = None;
        let mut mode = BackgroundMode::None;
        let mut epsilon = 0.0;
        let mut diagnostics = FitDiagnostics::default();
        let mut item_probs = Vec::new();
        let mut item_targets = Vec::new();
        let mut size_q = Vec::new();
        let mut size_w = Vec::new();
        // (log_u0, members = (set, raw, target, log_u))
        #[allow(clippy::type_complexity)]
        let mut raw_groups: Vec<(f64, Vec<(Itemset, f64, f64, f64)>)> = Vec::new();
        let mut finished = false;

        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap();
            let rest: Vec<&str> = words.collect();
            let parse_f64 = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| fail(lineno, format!("expected a number, found {s:?}")))
            };
            match keyword {
                "n-items" => {
                    let v: usize = rest
                        .first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| fail(lineno, "n-items needs a count".into()))?;
                    n_items = Some(v);
                }
                "mode" => {
                    mode = BackgroundMode::parse(
                        rest.first()
                            .ok_or_else(|| fail(lineno, "mode needs a value".into()))?,
                    )?;
                }
                "epsilon" => {
                    epsilon = parse_f64(
                        rest.first()
                            .ok_or_else(|| fail(lineno, "epsilon needs a value".into()))?,
                    )?;
                }
                "fitted" => {
                    for field in &rest {
                        if let Some(v) = field.strip_prefix("passes=") {
                            diagnostics.passes = v.parse().unwrap_or(0);
                        } else if let Some(v) = field.strip_prefix("residual=") {
                            diagnostics.residual = v.parse().unwrap_or(f64::NAN);
                        } else if let Some(v) = field.strip_prefix("updates=") {
                            diagnostics.updates = v.parse().unwrap_or(0);
                        }
                    }
                }
                "item" => {
                    if rest.len() < 2 {
                        return Err(fail(lineno, "item needs an id and a probability".into()));
                    }
                    item_probs.push(parse_f64(rest[1])?);
                    if rest.len() > 2 {
                        item_targets.push(parse_f64(rest[2])?);
                    }
                }
                "size" => {
                    if rest.len() != 3 {
                        return Err(fail(lineno, "size needs an index, target, weight".into()));
                    }
                    size_q.push(parse_f64(rest[1])?);
                    size_w.push(parse_f64(rest[2])?);
                }
                "group" => {
                    if rest.len() != 2 || rest[0] != "log-u0" {
                        return Err(fail(lineno, "group line must read: group log-u0 <x>".into()));
                    }
                    raw_groups.push((parse_f64(rest[1])?, Vec::new()));
                }
                "member" => {
                    let body: Vec<&str> = line["member".len()..].split('|').collect();
                    if body.len() != 4 {
                        return Err(fail(lineno, "member needs 4 |-separated fields".into()));
                    }
                    let items: Vec<u32> = body[0]
                        .split_whitespace()
                        .map(|s| {
                            s.parse::<u32>()
                                .map_err(|_| fail(lineno, format!("bad item id {s:?}")))
                        })
                        .collect::<Result<_>>()?;
                    let field = |s: &str, prefix: &str| -> Result<f64> {
                        let s = s.trim();
                        let v = s.strip_prefix(prefix).ok_or_else(|| {
                            fail(lineno, format!("expected field {prefix:?}, found {s:?}"))
                        })?;
                        parse_f64(v.trim())
                    };
                    let raw = field(body[1], "raw")?;
                    let target = field(body[2], "target")?;
                    let log_u = field(body[3], "log-u")?;
                    let group = raw_groups
                        .last_mut()
                        .ok_or_else(|| fail(lineno, "member before any group line".into()))?;
                    group.1.push((Itemset::new(items), raw, target, log_u));
                }
                "end" => {
                    finished = true;
                    break;
                }
                other => return Err(fail(lineno, format!("unknown keyword {other:?}"))),
            }
        }
        if !finished {
            return Err(Error::invalid("model file is missing its end marker"));
        }
        let n_items =
            n_items.ok_or_else(|| Error::invalid("model file is missing n-items"))?;
        if item_probs.len() != n_items {
            return Err(Error::invalid(format!(
                "model file lists {} item factors for {} items",
                item_probs.len(),
                n_items
            )));
        }

        let mut model = MaxEntModel {
            n_items,
            mode,
            epsilon,
            item_probs,
            column_targets: (item_targets.len() == n_items).then_some(item_targets),
            size_targets: (!size_q.is_empty()).then_some(size_q),
            size_weights: (!size_w.is_empty()).then_some(size_w),
            size_dist_all: None,
            groups: Vec::new(),
            diagnostics,
        };
        if mode.rows_active() {
            if model.size_weights.as_ref().map(|w| w.len()) != Some(n_items + 1) {
                return Err(Error::invalid(
                    "row-background model needs n_items + 1 size lines",
                ));
            }
            model.size_dist_all = Some(compute_size_probabilities(&model.item_probs));
        }
        for (log_u0, members) in raw_groups {
            let mut items: Vec<u32> = members
                .iter()
                .flat_map(|(set, ..)| set.items().iter().copied())
                .collect();
            items.sort_unstable();
            items.dedup();
            if items.last().is_some_and(|&m| m as usize >= n_items) {
                return Err(Error::invalid("member item outside the universe"));
            }
            let mut masks = Vec::new();
            let mut gms = Vec::new();
            let mut log_u = Vec::new();
            for (set, raw, target, lu) in members {
                let mut mask = 0u64;
                for &item in set.items() {
                    mask |= 1 << items.binary_search(&item).unwrap();
                }
                masks.push(mask);
                log_u.push(lu);
                gms.push(GroupMember {
                    set,
                    local_mask: mask,
                    raw,
                    target,
                });
            }
            let partition = Partition::induce_masks(&masks, items.len() as u32, masks.len().max(1))?;
            let n_blocks = partition.blocks().len();
            model.groups.push(Group {
                items,
                members: gms,
                partition,
                log_u,
                log_u0,
                block_bg: vec![0.0; n_blocks],
                block_rows: Vec::new(),
            });
        }
        if mode.rows_active() && model.groups.is_empty() {
            model.groups.push(Group {
                items: Vec::new(),
                members: Vec::new(),
                partition: Partition::induce_masks(&[], 0, 1)?,
                log_u: Vec::new(),
                log_u0: 0.0,
                block_bg: vec![0.0],
                block_rows: Vec::new(),
            });
        }
        for g in 0..model.groups.len() {
            model.refresh_group_background(g);
        }
        Ok(model)
    }
}

/// Incremental size-distribution update used inside fitting, where the old
/// probability is known directly. `current_probs` must already carry the
/// new value; it is only read on the numeric fallback path.
fn update_size_probabilities_with_old(
    g: &[f64],
    v_old: f64,
    v_new: f64,
    current_probs: &[f64],
) -> Vec<f64> {
    let mut reduced = g.to_vec();
    if remove_item_from_dist(&mut reduced, v_old) {
        reduced.pop();
        add_item_to_dist(&mut reduced, v_new);
        reduced
    } else {
        compute_size_probabilities(current_probs)
    }
}

fn bits_of(mask: u64) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let pos = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(pos)
        }
    })
}
