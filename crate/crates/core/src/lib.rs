//! Succinct summaries of binary transaction data.
//!
//! This crate finds a small, non-redundant collection of itemsets that
//! together describe where the structure in a 0/1 transaction database
//! lies. It fits maximum-entropy distributions constrained by itemset
//! frequencies (plus optional column- and row-margin backgrounds), scores
//! candidate summaries with BIC or a description-length criterion, and
//! searches for the next itemset to add with a bounded depth-first search.
//!
//! Typical use:
//!
//! ```
//! use itemsum_core::{mine_summary, BackgroundMode, Criterion, FitConfig,
//!                    SearchConstraints, TransactionDatabase};
//!
//! let rows: Vec<Vec<u32>> = (0..60)
//!     .map(|i| if i % 2 == 0 { vec![0, 1, 2] } else { vec![3] })
//!     .collect();
//! let db = TransactionDatabase::from_rows(&rows, 4).unwrap();
//! let result = mine_summary(
//!     &db,
//!     Criterion::Mdl,
//!     BackgroundMode::Columns,
//!     &FitConfig::default(),
//!     &SearchConstraints::default(),
//! )
//! .unwrap();
//! assert_eq!(result.entries[0].itemset.items(), &[0, 1, 2]);
//! ```

pub mod data;
pub mod error;
pub mod fimi;
pub mod itemset;
pub mod maxent;
pub mod partition;
pub mod report;
pub mod scoring;
pub mod search;
pub mod significance;
pub mod synth;

pub use data::{densify, EmpiricalStats, TransactionDatabase};
pub use error::{Error, Result};
pub use fimi::{
    parse_fimi, parse_fimi_with, write_fimi, DatasetMetadata, FimiOptions, GeneratorInfo,
    PlantedSet,
};
pub use itemset::Itemset;
pub use maxent::{
    bayesian_shift, compute_size_probabilities, decompose_groups, update_size_probabilities,
    BackgroundMode, ConstraintSet, FitConfig, FitDiagnostics, MaxEntModel,
};
pub use partition::{Block, Partition};
pub use report::{
    score_json, score_tsv, sig9, significance_json, significance_tsv, summary_json, summary_tsv,
    RunMetadata,
};
pub use scoring::{
    kl2, model_kl_bits, neg_log_likelihood_bits, penalty_bits, score_fitted, Criterion,
    ScoreConfig, ScoredSummary,
};
pub use significance::{
    binom_pvalue_two_tailed, evaluate_summary, NullModel, SignificanceConfig, SignificanceReport,
    SignificanceRow, SignificanceSection,
};
pub use search::{
    default_item_order, find_most_informative, find_most_informative_traced, heuristic_h,
    mine_summary, prune_bound, Candidate, MiningResult, PrunedNode, SearchConstraints,
    SearchOutcome, StopReason, SummaryEntry,
};
pub use synth::{
    generate_independent, generate_markov, generate_mosaic, holdout_split, IndependentConfig,
    MarkovConfig, MosaicConfig, MosaicData,
};
