//! Likelihood and model-selection scores for itemset summaries.
//!
//! Scores are in bits (all logarithms base 2). A summary's score is the
//! data's negative log-likelihood under the fitted model plus a complexity
//! penalty; lower is better. Two penalties are supported: a Bayesian
//! information criterion and a description-length criterion that also
//! charges for the items inside each member set.

use crate::data::TransactionDatabase;
use crate::error::{Error, Result};
use crate::maxent::MaxEntModel;

/// Model-selection penalty flavor.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Criterion {
    Bic,
    #[default]
    Mdl,
}

impl Criterion {
    pub fn parse(s: &str) -> Result<Criterion> {
        match s {
            "bic" | "BIC" => Ok(Criterion::Bic),
            "mdl" | "MDL" => Ok(Criterion::Mdl),
            other => Err(Error::invalid(format!(
                "unknown criterion {other:?} (expected bic|mdl)"
            ))),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Bic => "bic",
            Criterion::Mdl => "mdl",
        })
    }
}

/// Scoring context: criterion plus the data dimensions it normalizes by.
#[derive(Clone, Copy, Debug)]
pub struct ScoreConfig {
    pub criterion: Criterion,
    pub n_items: usize,
    pub n_rows: usize,
}

impl ScoreConfig {
    pub fn new(criterion: Criterion, n_items: usize, n_rows: usize) -> ScoreConfig {
        ScoreConfig {
            criterion,
            n_items,
            n_rows,
        }
    }

    /// Bits to describe one member itemset's frequency and size field.
    pub fn l1(&self) -> f64 {
        let n = self.n_items as f64;
        (self.n_rows as f64).log2() + n * (1.0 + 1.0 / n).log2() + 1.0
    }

    /// Bits to describe one item id.
    pub fn l2(&self) -> f64 {
        (self.n_items as f64).log2()
    }
}

/// Binary Kullback-Leibler divergence in bits between Bernoulli rates
/// `x` and `y`, with the convention `0·log 0 = 0`.
///
/// Returns `+inf` when `y` is degenerate (0 or 1) and `x` differs from it.
///
/// ```
/// use itemsum_core::kl2;
/// assert_eq!(kl2(0.3, 0.3), 0.0);
/// assert_eq!(kl2(1.0, 0.5), 1.0);
/// assert!(kl2(0.5, 0.0).is_infinite());
/// ```
pub fn kl2(x: f64, y: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
    let term = |a: f64, b: f64| {
        if a <= 0.0 {
            0.0
        } else if b <= 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).log2()
        }
    };
    let d = term(x, y) + term(1.0 - x, 1.0 - y);
    d.max(0.0)
}

/// Complexity penalty in bits for a summary with `k` member itemsets whose
/// sizes sum to `sum_sizes`.
pub fn penalty_bits(k: usize, sum_sizes: usize, config: &ScoreConfig) -> f64 {
    match config.criterion {
        Criterion::Bic => 0.5 * k as f64 * (config.n_rows as f64).log2(),
        Criterion::Mdl => config.l1() * k as f64 + config.l2() * sum_sizes as f64 + 1.0,
    }
}

/// Negative log2-likelihood of the database under the model, in bits.
/// Returns `+inf` when the model assigns probability zero to any row.
pub fn neg_log_likelihood_bits(model: &MaxEntModel, db: &TransactionDatabase) -> f64 {
    let mut nll = 0.0;
    for row in 0..db.n_rows() {
        let lp = model.log2_prob_row(db, row);
        if lp == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        nll -= lp;
    }
    nll
}

/// A scored summary: likelihood and penalty parts, in bits.
#[derive(Clone, Copy, Debug)]
pub struct ScoredSummary {
    pub nll_bits: f64,
    pub penalty_bits: f64,
    pub total_bits: f64,
    /// Number of member itemsets.
    pub k: usize,
    /// Sum of member itemset sizes.
    pub sum_sizes: usize,
}

/// Scores a fitted model against the database it summarizes.
pub fn score_fitted(
    model: &MaxEntModel,
    db: &TransactionDatabase,
    config: &ScoreConfig,
) -> ScoredSummary {
    let k = model.n_members();
    let sum_sizes = model.total_member_size();
    let nll = neg_log_likelihood_bits(model, db);
    let pen = penalty_bits(k, sum_sizes, config);
    ScoredSummary {
        nll_bits: nll,
        penalty_bits: pen,
        total_bits: nll + pen,
        k,
        sum_sizes,
    }
}

/// Divergence in bits from `older` to `newer`, where `newer` was fitted
/// with a superset of `older`'s constraints on the same statistics. For
/// such nested fits this equals the entropy drop.
pub fn model_kl_bits(newer: &MaxEntModel, older: &MaxEntModel) -> f64 {
    (older.entropy_bits() - newer.entropy_bits()).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kl2_known_values() {
        assert_eq!(kl2(0.25, 0.25), 0.0);
        assert_eq!(kl2(1.0, 0.5), 1.0);
        assert_eq!(kl2(0.0, 0.5), 1.0);
        assert_relative_eq!(kl2(0.5, 0.25), 0.20751874963942185, epsilon = 1e-15);
        assert!(kl2(0.5, 1.0).is_infinite());
        assert_eq!(kl2(1.0, 1.0), 0.0);
        assert_eq!(kl2(0.0, 0.0), 0.0);
    }

    #[test]
    fn penalty_known_values() {
        let bic = ScoreConfig::new(Criterion::Bic, 8, 1024);
        assert_eq!(penalty_bits(0, 0, &bic), 0.0);
        assert_eq!(penalty_bits(4, 9, &bic), 20.0);
        let mdl = ScoreConfig::new(Criterion::Mdl, 8, 100);
        assert_eq!(penalty_bits(0, 0, &mdl), 1.0);
        assert_relative_eq!(mdl.l1(), 9.003256201313223, epsilon = 1e-12);
        assert_relative_eq!(
            penalty_bits(3, 8, &mdl),
            3.0 * mdl.l1() + 8.0 * 3.0 + 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn penalty_monotone_in_k_and_sizes() {
        let mdl = ScoreConfig::new(Criterion::Mdl, 12, 500);
        assert!(penalty_bits(3, 7, &mdl) < penalty_bits(4, 7, &mdl));
        assert!(penalty_bits(3, 7, &mdl) < penalty_bits(3, 8, &mdl));
    }
}
