//! Independent oracles for the integration suites: a full-space iterative
//! proportional fitting solver, exhaustive block counting, exhaustive
//! candidate search, and a direct-product binomial summation. They share no
//! code with the library paths they check.

#![allow(dead_code)]

use itemsum_core::{heuristic_h, Itemset, MaxEntModel, ScoreConfig, TransactionDatabase};
use std::collections::HashMap;

pub fn mask_of(items: &[u32]) -> u64 {
    items.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

/// A database holding every transaction over `n` items exactly once
/// (transaction `t` is the bit pattern of row `t`).
pub fn full_space_db(n: usize) -> TransactionDatabase {
    assert!(n <= 20);
    let rows: Vec<Vec<u32>> = (0u64..1 << n)
        .map(|t| (0..n as u32).filter(|&i| t & (1 << i) != 0).collect())
        .collect();
    TransactionDatabase::from_rows(&rows, n).unwrap()
}

/// The model's full joint distribution, via per-row log probabilities.
pub fn model_probs(model: &MaxEntModel, n: usize) -> Vec<f64> {
    let space = full_space_db(n);
    (0..1usize << n)
        .map(|t| model.log2_prob_row(&space, t).exp2())
        .collect()
}

pub fn query_probs(probs: &[f64], n: usize, items: &[u32]) -> f64 {
    let mask = mask_of(items);
    (0..1u64 << n)
        .filter(|t| t & mask == mask)
        .map(|t| probs[t as usize])
        .sum()
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Max-entropy constraints stated on the full joint table.
pub struct IpfProblem {
    pub n_items: usize,
    /// Itemset frequency targets.
    pub members: Vec<(Vec<u32>, f64)>,
    /// Per-item margin targets.
    pub margins: Option<Vec<f64>>,
    /// Row-size distribution target (length `n_items + 1`).
    pub size_dist: Option<Vec<f64>>,
}

/// Iterative proportional fitting over all `2^n` cells. Starts uniform and
/// rescales one constraint at a time, which converges to the maximum
/// entropy distribution satisfying every target (targets must be jointly
/// realizable).
pub fn ipf_fit(problem: &IpfProblem, max_rounds: usize, tol: f64) -> Vec<f64> {
    let n = problem.n_items;
    let cells = 1usize << n;
    let mut p = vec![1.0 / cells as f64; cells];
    let member_masks: Vec<(u64, f64)> = problem
        .members
        .iter()
        .map(|(items, f)| (mask_of(items), *f))
        .collect();

    let scale_indicator = |p: &mut [f64], hit: &dyn Fn(u64) -> bool, f: f64| {
        let cur: f64 = (0..cells as u64)
            .filter(|&t| hit(t))
            .map(|t| p[t as usize])
            .sum();
        let (num_in, num_out) = (f, 1.0 - f);
        for t in 0..cells as u64 {
            let inside = hit(t);
            let (cur_side, target) = if inside {
                (cur, num_in)
            } else {
                (1.0 - cur, num_out)
            };
            if cur_side > 0.0 {
                p[t as usize] *= target / cur_side;
            } else {
                p[t as usize] = 0.0;
            }
        }
    };

    for _ in 0..max_rounds {
        for &(mask, f) in &member_masks {
            scale_indicator(&mut p, &|t| t & mask == mask, f);
        }
        if let Some(margins) = &problem.margins {
            for (i, &f) in margins.iter().enumerate() {
                let bit = 1u64 << i;
                scale_indicator(&mut p, &|t| t & bit != 0, f);
            }
        }
        if let Some(q) = &problem.size_dist {
            let mut cur = vec![0.0; n + 1];
            for t in 0..cells as u64 {
                cur[t.count_ones() as usize] += p[t as usize];
            }
            for t in 0..cells as u64 {
                let j = t.count_ones() as usize;
                if cur[j] > 0.0 {
                    p[t as usize] *= q[j] / cur[j];
                } else {
                    p[t as usize] = 0.0;
                }
            }
        }

        // convergence: every constraint within tol
        let mut residual = 0.0f64;
        for &(mask, f) in &member_masks {
            let cur: f64 = (0..cells as u64)
                .filter(|&t| t & mask == mask)
                .map(|t| p[t as usize])
                .sum();
            residual = residual.max((cur - f).abs());
        }
        if let Some(margins) = &problem.margins {
            for (i, &f) in margins.iter().enumerate() {
                let cur: f64 = (0..cells as u64)
                    .filter(|&t| t & (1 << i) != 0)
                    .map(|t| p[t as usize])
                    .sum();
                residual = residual.max((cur - f).abs());
            }
        }
        if let Some(q) = &problem.size_dist {
            let mut cur = vec![0.0; n + 1];
            for t in 0..cells as u64 {
                cur[t.count_ones() as usize] += p[t as usize];
            }
            for (a, b) in cur.iter().zip(q) {
                residual = residual.max((a - b).abs());
            }
        }
        if residual <= tol {
            break;
        }
    }
    p
}

/// Exact block sizes by scanning all transactions: for each transaction,
/// the set of member itemsets it supports (a bitmask over member indices),
/// counted per distinct signature.
pub fn exhaustive_blocks(n: usize, member_items: &[Vec<u32>]) -> HashMap<u32, u64> {
    let masks: Vec<u64> = member_items.iter().map(|m| mask_of(m)).collect();
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for t in 0..1u64 << n {
        let mut sig = 0u32;
        for (m, &mask) in masks.iter().enumerate() {
            if t & mask == mask {
                sig |= 1 << m;
            }
        }
        *counts.entry(sig).or_insert(0) += 1;
    }
    counts
}

/// Exhaustive scan for the best candidate: highest `h`, ties to the
/// smallest itemset, then lexicographically smallest item list. Returns
/// `None` when no admissible candidate has positive `h`.
pub fn exhaustive_best(
    db: &TransactionDatabase,
    model: &MaxEntModel,
    score: &ScoreConfig,
    min_size: usize,
    max_size: usize,
    min_support: usize,
) -> Option<(Itemset, f64)> {
    let n = db.n_items();
    let in_model: Vec<Itemset> = model.members().into_iter().map(|(x, _)| x).collect();
    let mut best: Option<(Itemset, f64)> = None;
    for mask in 1u64..1 << n {
        let size = mask.count_ones() as usize;
        if size < min_size || size > max_size {
            continue;
        }
        let items: Vec<u32> = (0..n as u32).filter(|&i| mask & (1 << i) != 0).collect();
        let x = Itemset::new(items);
        if in_model.contains(&x) {
            continue;
        }
        let support = db.support(&x).unwrap();
        if support < min_support {
            continue;
        }
        let fr = support as f64 / db.n_rows() as f64;
        let est = model.query(&x).unwrap().clamp(1e-12, 1.0 - 1e-12);
        let h = heuristic_h(fr, est, size, score);
        if h <= 0.0 {
            continue;
        }
        let replace = match &best {
            None => true,
            Some((bx, bh)) => {
                h > *bh
                    || (h == *bh
                        && (x.len() < bx.len() || (x.len() == bx.len() && x.items() < bx.items())))
            }
        };
        if replace {
            best = Some((x, h));
        }
    }
    best
}

/// Binomial mass by direct products, sharing nothing with the library's
/// log-gamma path.
pub fn binom_pmf_direct(d: u64, p: f64, k: u64) -> f64 {
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (d - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((d - k) as i32)
}

/// Two-tailed p-value by full-pmf summation: the observed tail plus every
/// opposite-side outcome no more probable than the observed one.
pub fn pvalue_by_summation(d: u64, p: f64, f: u64) -> f64 {
    if p <= 0.0 {
        return if f == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if f == d { 1.0 } else { 0.0 };
    }
    let pmf: Vec<f64> = (0..=d).map(|k| binom_pmf_direct(d, p, k)).collect();
    let mean = d as f64 * p;
    let target = pmf[f as usize] * (1.0 + 1e-9);
    let mut total = 0.0;
    if f as f64 >= mean {
        for i in (f..=d).rev() {
            total += pmf[i as usize];
        }
        for i in 0..f {
            if (i as f64) < mean && pmf[i as usize] <= target {
                total += pmf[i as usize];
            }
        }
    } else {
        for i in 0..=f {
            total += pmf[i as usize];
        }
        for i in ((f + 1)..=d).rev() {
            if (i as f64) > mean && pmf[i as usize] <= target {
                total += pmf[i as usize];
            }
        }
    }
    total.clamp(0.0, 1.0)
}
