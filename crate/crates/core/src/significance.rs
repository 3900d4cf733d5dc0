//! Holdout significance evaluation of mined summaries.
//!
//! A summary is mined on an exploratory half of the data and judged on a
//! disjoint holdout half: for each itemset, the holdout support is compared
//! against a null model's estimate with an exact two-tailed binomial test,
//! at a Bonferroni-adjusted threshold. Three nulls are reported: the
//! background model alone, the summary prefix preceding each itemset, and
//! (for a sample of unselected candidates) the full summary model.

use crate::data::{EmpiricalStats, TransactionDatabase};
use crate::error::{Error, Result};
use crate::itemset::Itemset;
use crate::maxent::{BackgroundMode, ConstraintSet, FitConfig, MaxEntModel};
use crate::search::default_item_order;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;
use std::collections::HashSet;

/// Natural log of the binomial probability mass `B(d; p)(k)`.
fn ln_binom_pmf(d: u64, p: f64, k: u64) -> f64 {
    let (df, kf) = (d as f64, k as f64);
    let ln_choose = ln_gamma(df + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(df - kf + 1.0);
    let ln_p = if k == 0 { 0.0 } else { kf * p.ln() };
    let ln_q = if k == d { 0.0 } else { (df - kf) * (1.0 - p).ln() };
    ln_choose + ln_p + ln_q
}

fn binom_pmf(d: u64, p: f64, k: u64) -> f64 {
    ln_binom_pmf(d, p, k).exp()
}

/// Exact two-tailed binomial p-value: the probability, under `B(d; p)`, of
/// an outcome at least as improbable as the observed support `f`.
///
/// The observed tail is summed outward from `f`; the opposite tail is cut
/// at the outermost outcome no more probable than `f` (the mass is unimodal,
/// so that set is a tail). Degenerate rates give a point mass: the p-value
/// is 1 when `f` sits on it and 0 otherwise.
///
/// ```
/// use itemsum_core::binom_pvalue_two_tailed;
/// assert!((binom_pvalue_two_tailed(4, 0.5, 4) - 0.125).abs() < 1e-12);
/// assert_eq!(binom_pvalue_two_tailed(10, 0.5, 5), 1.0);
/// assert_eq!(binom_pvalue_two_tailed(7, 0.0, 0), 1.0);
/// assert_eq!(binom_pvalue_two_tailed(7, 0.0, 3), 0.0);
/// ```
pub fn binom_pvalue_two_tailed(d: u64, p: f64, f: u64) -> f64 {
    assert!(f <= d, "support {f} exceeds {d} draws");
    assert!((0.0..=1.0).contains(&p), "rate {p} outside [0, 1]");
    if p <= 0.0 {
        return if f == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if f == d { 1.0 } else { 0.0 };
    }
    let mean = d as f64 * p;
    let target = ln_binom_pmf(d, p, f);
    // tolerate rounding when comparing equal masses across the mode
    let target_cut = target + 1e-12;
    let mut pvalue = 0.0;
    if f as f64 >= mean {
        // observed upper tail, summed smallest-first
        for i in (f..=d).rev() {
            pvalue += binom_pmf(d, p, i);
        }
        // lower counterpart: largest f' < mean no more probable than f
        let mut j = (mean.ceil() as i64 - 1).min(f as i64 - 1);
        while j >= 0 && ln_binom_pmf(d, p, j as u64) > target_cut {
            j -= 1;
        }
        if j >= 0 {
            for i in 0..=j as u64 {
                pvalue += binom_pmf(d, p, i);
            }
        }
    } else {
        // observed lower tail
        for i in 0..=f {
            pvalue += binom_pmf(d, p, i);
        }
        // upper counterpart: smallest f' > mean no more probable than f
        let mut j = (mean.floor() as u64 + 1).max(f + 1);
        while j <= d && ln_binom_pmf(d, p, j) > target_cut {
            j += 1;
        }
        if j <= d {
            for i in (j..=d).rev() {
                pvalue += binom_pmf(d, p, i);
            }
        }
    }
    pvalue.clamp(0.0, 1.0)
}

/// Which null model a report section tests against.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NullModel {
    /// Background statistics only.
    BackgroundOnly,
    /// Background plus the summary itemsets preceding the tested one.
    PrecedingSummary,
    /// The full summary model, applied to sampled unselected candidates.
    FullSummaryOnSampled,
}

impl std::fmt::Display for NullModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NullModel::BackgroundOnly => "background",
            NullModel::PrecedingSummary => "preceding-summary",
            NullModel::FullSummaryOnSampled => "full-summary-sampled",
        })
    }
}

/// One tested itemset.
#[derive(Clone, Debug)]
pub struct SignificanceRow {
    pub itemset: Itemset,
    /// Null model's estimate of the itemset's frequency.
    pub null_estimate: f64,
    /// Exact support in the holdout data.
    pub holdout_support: usize,
    pub holdout_frequency: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// All rows tested against one null model.
#[derive(Clone, Debug)]
pub struct SignificanceSection {
    pub null: NullModel,
    /// Bonferroni-adjusted threshold `alpha / n_tests`.
    pub threshold: f64,
    pub rows: Vec<SignificanceRow>,
}

impl SignificanceSection {
    pub fn significant_count(&self) -> usize {
        self.rows.iter().filter(|r| r.significant).count()
    }
}

#[derive(Clone, Debug)]
pub struct SignificanceReport {
    pub alpha: f64,
    pub holdout_rows: usize,
    pub sections: Vec<SignificanceSection>,
    /// True when candidate sampling stopped at the enumeration budget, so
    /// the sample is uniform over an enumeration prefix only.
    pub sampling_truncated: bool,
}

/// Evaluation parameters.
#[derive(Clone, Debug)]
pub struct SignificanceConfig {
    pub alpha: f64,
    /// Number of unselected candidates sampled for the third section.
    pub sample_size: usize,
    pub seed: u64,
    /// Candidate family bounds for sampling, mirroring the miner's.
    pub min_support: usize,
    pub max_itemset_size: usize,
    /// Hard cap on candidates enumerated while sampling.
    pub enumeration_limit: usize,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            alpha: 0.05,
            sample_size: 1000,
            seed: 0,
            min_support: 1,
            max_itemset_size: usize::MAX,
            enumeration_limit: 1_000_000,
        }
    }
}

/// Tests a mined summary against holdout data.
///
/// `summary` lists the mined itemsets in mining order; their frequencies
/// are recomputed on `exploratory`, which must be the data they were mined
/// from. Each itemset is tested under two nulls (background only, and
/// background plus its predecessors); a seeded sample of unselected
/// candidates is tested under the full summary model.
pub fn evaluate_summary(
    exploratory: &TransactionDatabase,
    holdout: &TransactionDatabase,
    summary: &[Itemset],
    mode: BackgroundMode,
    fit: &FitConfig,
    cfg: &SignificanceConfig,
) -> Result<SignificanceReport> {
    if holdout.n_rows() == 0 {
        return Err(Error::invalid("holdout data is empty"));
    }
    if holdout.n_items() != exploratory.n_items() {
        return Err(Error::invalid(
            "exploratory and holdout data have different item universes",
        ));
    }
    let stats = EmpiricalStats::from_db(exploratory);
    let d = holdout.n_rows() as u64;

    // chain of models over growing summary prefixes
    let mut prefix_models: Vec<MaxEntModel> = Vec::with_capacity(summary.len() + 1);
    let mut constraints = ConstraintSet::new();
    prefix_models.push(MaxEntModel::fit(&constraints, mode, &stats, fit)?);
    for x in summary {
        constraints.push(x.clone(), exploratory.frequency(x)?)?;
        let warm = prefix_models.last();
        prefix_models.push(MaxEntModel::fit_warm(&constraints, mode, &stats, fit, warm)?);
    }
    let background = &prefix_models[0];
    let full = prefix_models.last().unwrap();

    let row_for = |x: &Itemset, est: f64, threshold: f64| -> Result<SignificanceRow> {
        let support = holdout.support(x)?;
        let p_value = binom_pvalue_two_tailed(d, est.clamp(0.0, 1.0), support as u64);
        Ok(SignificanceRow {
            itemset: x.clone(),
            null_estimate: est,
            holdout_support: support,
            holdout_frequency: support as f64 / d as f64,
            p_value,
            significant: p_value < threshold,
        })
    };

    let mut sections = Vec::with_capacity(3);
    let n_summary = summary.len().max(1);
    for null in [NullModel::BackgroundOnly, NullModel::PrecedingSummary] {
        let threshold = cfg.alpha / n_summary as f64;
        let mut rows = Vec::with_capacity(summary.len());
        for (i, x) in summary.iter().enumerate() {
            let model = match null {
                NullModel::BackgroundOnly => background,
                _ => &prefix_models[i],
            };
            rows.push(row_for(x, model.query(x)?, threshold)?);
        }
        sections.push(SignificanceSection {
            null,
            threshold,
            rows,
        });
    }

    let min_size = if mode.columns_active() { 2 } else { 1 };
    let (sampled, truncated) = sample_candidates(
        exploratory,
        summary,
        min_size,
        cfg.min_support.max(1),
        cfg.max_itemset_size,
        cfg.sample_size,
        cfg.enumeration_limit,
        cfg.seed,
    );
    let threshold = cfg.alpha / sampled.len().max(1) as f64;
    let mut rows = Vec::with_capacity(sampled.len());
    for x in &sampled {
        rows.push(row_for(x, full.query(x)?, threshold)?);
    }
    sections.push(SignificanceSection {
        null: NullModel::FullSummaryOnSampled,
        threshold,
        rows,
    });

    Ok(SignificanceReport {
        alpha: cfg.alpha,
        holdout_rows: holdout.n_rows(),
        sections,
        sampling_truncated: truncated,
    })
}

/// Draws a uniform sample of candidate itemsets (frequent, inside the size
/// band, not in the summary) by reservoir sampling over a depth-first
/// enumeration. Returns the sample in enumeration order plus a flag set
/// when the enumeration budget cut the stream short.
#[allow(clippy::too_many_arguments)]
fn sample_candidates(
    db: &TransactionDatabase,
    exclude: &[Itemset],
    min_size: usize,
    min_support: usize,
    max_size: usize,
    sample_size: usize,
    enumeration_limit: usize,
    seed: u64,
) -> (Vec<Itemset>, bool) {
    if sample_size == 0 || max_size == 0 {
        return (Vec::new(), false);
    }
    let excluded: HashSet<&[u32]> = exclude.iter().map(|x| x.items()).collect();
    let order = default_item_order(db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (reservoir slot -> enumeration index) kept for deterministic order
    let mut reservoir: Vec<(usize, Itemset)> = Vec::with_capacity(sample_size);
    let mut seen = 0usize;
    let mut visited = 0usize;
    let mut truncated = false;

    struct Walk<'a> {
        db: &'a TransactionDatabase,
        order: &'a [u32],
        min_size: usize,
        min_support: usize,
        max_size: usize,
        limit: usize,
    }
    // returns false when the enumeration budget is exhausted
    fn walk(
        w: &Walk<'_>,
        sorted: &mut Vec<u32>,
        tids: &[u32],
        start: usize,
        visited: &mut usize,
        mut offer: &mut dyn FnMut(&[u32]),
    ) -> bool {
        for i in start..w.order.len() {
            let a = w.order[i];
            let child: Vec<u32> = tids
                .iter()
                .copied()
                .filter(|&t| w.db.row_contains(t as usize, a))
                .collect();
            if child.len() < w.min_support {
                continue;
            }
            *visited += 1;
            if *visited > w.limit {
                return false;
            }
            let pos = sorted.partition_point(|&e| e < a);
            sorted.insert(pos, a);
            if sorted.len() >= w.min_size {
                offer(sorted);
            }
            let deeper = sorted.len() >= w.max_size
                || walk(w, sorted, &child, i + 1, visited, &mut offer);
            sorted.remove(sorted.binary_search(&a).expect("item present"));
            if !deeper {
                return false;
            }
        }
        true
    }

    let walk_cfg = Walk {
        db,
        order: &order,
        min_size,
        min_support,
        max_size,
        limit: enumeration_limit,
    };
    let all_tids: Vec<u32> = (0..db.n_rows() as u32).collect();
    let mut sorted = Vec::new();
    let completed = walk(
        &walk_cfg,
        &mut sorted,
        &all_tids,
        0,
        &mut visited,
        &mut |items: &[u32]| {
            if excluded.contains(items) {
                return;
            }
            seen += 1;
            if reservoir.len() < sample_size {
                reservoir.push((seen, Itemset::new(items.to_vec())));
            } else {
                let j = rng.random_range(0..seen);
                if j < sample_size {
                    reservoir[j] = (seen, Itemset::new(items.to_vec()));
                }
            }
        },
    );
    if !completed {
        truncated = true;
    }
    reservoir.sort_by_key(|(idx, _)| *idx);
    (reservoir.into_iter().map(|(_, x)| x).collect(), truncated)
}
