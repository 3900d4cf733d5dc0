//! Reading and writing transaction data as whitespace-separated item lines
//! (the common FIMI repository layout), plus a JSON metadata sidecar.

use crate::data::TransactionDatabase;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parsing options for [`parse_fimi_with`].
#[derive(Clone, Debug, Default)]
pub struct FimiOptions {
    /// When set, blank lines become empty transactions instead of being
    /// skipped. Needed to round-trip databases that contain all-zero rows.
    pub keep_blank_rows: bool,
    /// Overrides the item universe size. Default: one past the largest id.
    pub n_items: Option<usize>,
}

/// Parses transaction text with default options: one transaction per
/// non-blank line, universe size `1 + max item id`.
///
/// ```
/// use itemsum_core::{parse_fimi, Itemset};
/// let db = parse_fimi("0 1 2\n1 2\n").unwrap();
/// assert_eq!((db.n_rows(), db.n_items()), (2, 3));
/// assert_eq!(db.frequency(&Itemset::from([1, 2])).unwrap(), 1.0);
/// ```
pub fn parse_fimi(text: &str) -> Result<TransactionDatabase> {
    parse_fimi_with(text, &FimiOptions::default())
}

pub fn parse_fimi_with(text: &str, opts: &FimiOptions) -> Result<TransactionDatabase> {
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut max_item: Option<u32> = None;
    for (lineno, line) in text.lines().enumerate() {
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            let item: u32 = token.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("expected a non-negative item id, found {token:?}"),
            })?;
            max_item = Some(max_item.map_or(item, |m| m.max(item)));
            row.push(item);
        }
        if row.is_empty() && !opts.keep_blank_rows {
            continue;
        }
        rows.push(row);
    }
    let inferred = max_item.map_or(0, |m| m as usize + 1);
    let n_items = opts.n_items.unwrap_or(inferred);
    if n_items < inferred {
        return Err(Error::invalid(format!(
            "declared universe of {n_items} items but the data contains item {}",
            inferred - 1
        )));
    }
    TransactionDatabase::from_rows(&rows, n_items)
}

/// Writes a database as item lines; empty transactions become blank lines.
pub fn write_fimi(db: &TransactionDatabase) -> String {
    let mut out = String::new();
    for row in 0..db.n_rows() {
        let items = db.row_items(row);
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&item.to_string());
        }
        out.push('\n');
    }
    out
}

/// Description of a planted pattern in a synthetic database.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlantedSet {
    pub items: Vec<u32>,
    pub frequency: f64,
}

/// How a synthetic database was produced.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GeneratorInfo {
    pub kind: String,
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<PlantedSet>>,
}

/// Sidecar metadata describing a written database.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct DatasetMetadata {
    pub n_items: usize,
    pub n_rows: usize,
    /// Dense index -> original item id, present when ids were remapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_ids: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

impl DatasetMetadata {
    pub fn for_db(db: &TransactionDatabase) -> DatasetMetadata {
        DatasetMetadata {
            n_items: db.n_items(),
            n_rows: db.n_rows(),
            ..DatasetMetadata::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metadata serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<DatasetMetadata> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("metadata: {e}"),
        })
    }
}
