//! Deterministic text output for mining runs, scores, and significance
//! reports, as TSV (comment header + one table) or JSON.
//!
//! Every float is rounded to nine significant digits before rendering, and
//! both formats carry the rounded value, so a field parses to exactly the
//! same number from either output. Elapsed wall time is informational only
//! and is the one field allowed to differ between repeated runs.

use crate::itemset::Itemset;
use crate::maxent::BackgroundMode;
use crate::scoring::{Criterion, ScoredSummary};
use crate::search::MiningResult;
use crate::significance::SignificanceReport;
use serde_json::{json, Value};
use std::fmt::Write as _;

/// Rounds to nine significant decimal digits. Zero, infinities, and NaN
/// pass through unchanged.
///
/// ```
/// use itemsum_core::sig9;
/// assert_eq!(sig9(1.0 / 3.0), 0.333333333);
/// assert_eq!(sig9(123456789123.0), 123456789000.0);
/// assert_eq!(sig9(0.0), 0.0);
/// ```
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(8 - exp);
    (x * scale).round() / scale
}

fn fmt_f(x: f64) -> String {
    let r = sig9(x);
    // keep tiny magnitudes readable; plain Display would print them as
    // long runs of zeros
    if r != 0.0 && r.abs() < 1e-6 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// JSON value for a float: a number when finite, else its name as a string.
fn json_f(x: f64) -> Value {
    let r = sig9(x);
    match serde_json::Number::from_f64(r) {
        Some(n) => Value::Number(n),
        None => Value::String(format!("{r}")),
    }
}

fn json_itemset(x: &Itemset) -> Value {
    json!(x.items())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "none".into(), |n| n.to_string())
}

/// Run context echoed into report headers.
#[derive(Clone, Debug)]
pub struct RunMetadata {
    pub dataset: Option<String>,
    pub criterion: Criterion,
    pub mode: BackgroundMode,
    pub n_rows: usize,
    pub n_items: usize,
    pub epsilon: f64,
    pub min_support: usize,
    pub max_itemset_size: Option<usize>,
    pub max_k: Option<usize>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub elapsed_secs: f64,
}

impl Default for RunMetadata {
    fn default() -> Self {
        RunMetadata {
            dataset: None,
            criterion: Criterion::default(),
            mode: BackgroundMode::default(),
            n_rows: 0,
            n_items: 0,
            epsilon: 0.0,
            min_support: 1,
            max_itemset_size: None,
            max_k: None,
            seed: None,
            threads: 1,
            elapsed_secs: 0.0,
        }
    }
}

impl RunMetadata {
    fn header_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dataset", self.dataset.clone().unwrap_or_else(|| "-".into())),
            ("criterion", self.criterion.to_string()),
            ("background", self.mode.to_string()),
            ("rows", self.n_rows.to_string()),
            ("items", self.n_items.to_string()),
            ("epsilon", fmt_f(self.epsilon)),
            ("min-support", self.min_support.to_string()),
            ("max-itemset-size", opt_usize(self.max_itemset_size)),
            ("max-k", opt_usize(self.max_k)),
            ("seed", self.seed.map_or_else(|| "none".into(), |s| s.to_string())),
            ("threads", self.threads.to_string()),
        ]
    }

    fn json_value(&self) -> Value {
        json!({
            "dataset": self.dataset,
            "criterion": self.criterion.to_string(),
            "background": self.mode.to_string(),
            "rows": self.n_rows,
            "items": self.n_items,
            "epsilon": json_f(self.epsilon),
            "min_support": self.min_support,
            "max_itemset_size": self.max_itemset_size,
            "max_k": self.max_k,
            "seed": self.seed,
            "threads": self.threads,
            "elapsed_secs": json_f(self.elapsed_secs),
        })
    }
}

fn score_json_value(s: &ScoredSummary) -> Value {
    json!({
        "nll_bits": json_f(s.nll_bits),
        "penalty_bits": json_f(s.penalty_bits),
        "total_bits": json_f(s.total_bits),
        "k": s.k,
        "sum_sizes": s.sum_sizes,
    })
}

/// A mined summary as a TSV table under a commented header.
pub fn summary_tsv(result: &MiningResult, meta: &RunMetadata) -> String {
    let mut out = String::new();
    out.push_str("# itemsum-summary v1\n");
    for (key, value) in meta.header_pairs() {
        let _ = writeln!(out, "# {key}\t{value}");
    }
    let _ = writeln!(out, "# stop\t{}", result.stop);
    let _ = writeln!(out, "# truncated\t{}", result.truncated());
    let _ = writeln!(out, "# background-bits\t{}", fmt_f(result.background_score.total_bits));
    let _ = writeln!(out, "# final-bits\t{}", fmt_f(result.final_bits()));
    let _ = writeln!(out, "# optimal-prefix\t{}", result.optimal_prefix_len());
    let _ = writeln!(out, "# elapsed-secs\t{}", fmt_f(meta.elapsed_secs));
    out.push_str("rank\titemset\tsupport\tfrequency\testimate\th\ttotal-bits\n");
    for (i, e) in result.entries.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            e.itemset,
            e.support,
            fmt_f(e.frequency),
            fmt_f(e.estimate),
            fmt_f(e.h),
            fmt_f(e.score_after.total_bits),
        );
    }
    out
}

/// The same summary as pretty-printed JSON.
pub fn summary_json(result: &MiningResult, meta: &RunMetadata) -> String {
    let entries: Vec<Value> = result
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            json!({
                "rank": i + 1,
                "itemset": json_itemset(&e.itemset),
                "support": e.support,
                "frequency": json_f(e.frequency),
                "estimate": json_f(e.estimate),
                "h": json_f(e.h),
                "score_after": score_json_value(&e.score_after),
            })
        })
        .collect();
    let doc = json!({
        "format": "itemsum-summary v1",
        "metadata": meta.json_value(),
        "stop": result.stop.to_string(),
        "truncated": result.truncated(),
        "background_score": score_json_value(&result.background_score),
        "final_bits": json_f(result.final_bits()),
        "optimal_prefix": result.optimal_prefix_len(),
        "entries": entries,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("static document");
    s.push('\n');
    s
}

/// A score breakdown as key/value TSV lines.
pub fn score_tsv(score: &ScoredSummary, criterion: Criterion) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "criterion\t{criterion}");
    let _ = writeln!(out, "k\t{}", score.k);
    let _ = writeln!(out, "sum-sizes\t{}", score.sum_sizes);
    let _ = writeln!(out, "nll-bits\t{}", fmt_f(score.nll_bits));
    let _ = writeln!(out, "penalty-bits\t{}", fmt_f(score.penalty_bits));
    let _ = writeln!(out, "total-bits\t{}", fmt_f(score.total_bits));
    out
}

/// The same breakdown as pretty-printed JSON.
pub fn score_json(score: &ScoredSummary, criterion: Criterion) -> String {
    let doc = json!({
        "criterion": criterion.to_string(),
        "score": score_json_value(score),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("static document");
    s.push('\n');
    s
}

/// A significance report as one TSV table with a section column.
pub fn significance_tsv(report: &SignificanceReport) -> String {
    let mut out = String::new();
    out.push_str("# itemsum-significance v1\n");
    let _ = writeln!(out, "# alpha\t{}", fmt_f(report.alpha));
    let _ = writeln!(out, "# holdout-rows\t{}", report.holdout_rows);
    let _ = writeln!(out, "# sampling-truncated\t{}", report.sampling_truncated);
    out.push_str(
        "section\tthreshold\titemset\tnull-estimate\tholdout-support\tholdout-frequency\tp-value\tsignificant\n",
    );
    for section in &report.sections {
        for row in &section.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                section.null,
                fmt_f(section.threshold),
                row.itemset,
                fmt_f(row.null_estimate),
                row.holdout_support,
                fmt_f(row.holdout_frequency),
                fmt_f(row.p_value),
                row.significant,
            );
        }
    }
    out
}

/// The same report as pretty-printed JSON.
pub fn significance_json(report: &SignificanceReport) -> String {
    let sections: Vec<Value> = report
        .sections
        .iter()
        .map(|section| {
            let rows: Vec<Value> = section
                .rows
                .iter()
                .map(|row| {
                    json!({
                        "itemset": json_itemset(&row.itemset),
                        "null_estimate": json_f(row.null_estimate),
                        "holdout_support": row.holdout_support,
                        "holdout_frequency": json_f(row.holdout_frequency),
                        "p_value": json_f(row.p_value),
                        "significant": row.significant,
                    })
                })
                .collect();
            json!({
                "null": section.null.to_string(),
                "threshold": json_f(section.threshold),
                "significant": section.significant_count(),
                "rows": rows,
            })
        })
        .collect();
    let doc = json!({
        "format": "itemsum-significance v1",
        "alpha": json_f(report.alpha),
        "holdout_rows": report.holdout_rows,
        "sampling_truncated": report.sampling_truncated,
        "sections": sections,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("static document");
    s.push('\n');
    s
}
