//! Binary transaction databases and their empirical statistics.

use crate::error::{Error, Result};
use crate::itemset::Itemset;

/// A database of binary transactions over a fixed item universe.
///
/// Rows are stored as packed bitsets (row-major, `words_per_row` words of 64
/// bits each), which keeps support counting and row projections cheap.
///
/// ```
/// use itemsum_core::{Itemset, TransactionDatabase};
/// let db = TransactionDatabase::from_rows(&[vec![0, 1, 2], vec![1, 2]], 3).unwrap();
/// assert_eq!(db.support(&Itemset::from([1, 2])).unwrap(), 2);
/// assert_eq!(db.frequency(&Itemset::from([0])).unwrap(), 0.5);
/// ```
#[derive(Clone, PartialEq, Eq)]
pub struct TransactionDatabase {
    n_items: usize,
    words_per_row: usize,
    n_rows: usize,
    bits: Vec<u64>,
}

impl TransactionDatabase {
    /// Creates an empty database over `n_items` columns.
    pub fn new(n_items: usize) -> Self {
        TransactionDatabase {
            n_items,
            words_per_row: n_items.div_ceil(64).max(1),
            n_rows: 0,
            bits: Vec::new(),
        }
    }

    /// Builds a database from explicit rows; every item must be `< n_items`.
    pub fn from_rows(rows: &[Vec<u32>], n_items: usize) -> Result<Self> {
        let mut db = TransactionDatabase::new(n_items);
        for row in rows {
            db.push_row(row)?;
        }
        Ok(db)
    }

    /// Appends one transaction. Duplicate items within the row collapse.
    pub fn push_row(&mut self, items: &[u32]) -> Result<()> {
        let base = self.bits.len();
        self.bits.resize(base + self.words_per_row, 0);
        for &item in items {
            if item as usize >= self.n_items {
                self.bits.truncate(base);
                return Err(Error::invalid(format!(
                    "item {item} out of range for universe of {} items",
                    self.n_items
                )));
            }
            self.bits[base + (item as usize >> 6)] |= 1u64 << (item & 63);
        }
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    /// One 64-bit word of a row's bitset.
    #[inline]
    pub fn row_word(&self, row: usize, word: usize) -> u64 {
        self.bits[row * self.words_per_row + word]
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn row_contains(&self, row: usize, item: u32) -> bool {
        self.row_word(row, item as usize >> 6) >> (item & 63) & 1 == 1
    }

    /// Number of items set in a row.
    pub fn row_size(&self, row: usize) -> usize {
        let base = row * self.words_per_row;
        self.bits[base..base + self.words_per_row]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn row_items(&self, row: usize) -> Vec<u32> {
        let mut out = Vec::new();
        for word in 0..self.words_per_row {
            let mut w = self.row_word(row, word);
            while w != 0 {
                let bit = w.trailing_zeros();
                out.push((word as u32) << 6 | bit);
                w &= w - 1;
            }
        }
        out
    }

    /// True when every item of `x` is present in the row.
    pub fn row_supports(&self, row: usize, x: &Itemset) -> bool {
        x.items().iter().all(|&i| self.row_contains(row, i))
    }

    /// Number of transactions containing all items of `x`.
    pub fn support(&self, x: &Itemset) -> Result<usize> {
        if let Some(max) = x.max_item() {
            if max as usize >= self.n_items {
                return Err(Error::invalid(format!(
                    "item {max} out of range for universe of {} items",
                    self.n_items
                )));
            }
        }
        Ok((0..self.n_rows).filter(|&r| self.row_supports(r, x)).count())
    }

    /// Relative support `support(x) / n_rows`; errors on an empty database.
    pub fn frequency(&self, x: &Itemset) -> Result<f64> {
        if self.n_rows == 0 {
            return Err(Error::invalid("frequency of itemset in empty database"));
        }
        Ok(self.support(x)? as f64 / self.n_rows as f64)
    }

    /// A new database holding the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> TransactionDatabase {
        let mut out = TransactionDatabase::new(self.n_items);
        for &r in rows {
            let base = r * self.words_per_row;
            out.bits
                .extend_from_slice(&self.bits[base..base + self.words_per_row]);
            out.n_rows += 1;
        }
        out
    }

    /// Per-item relative supports.
    pub fn column_margins(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_items];
        for row in 0..self.n_rows {
            for word in 0..self.words_per_row {
                let mut w = self.row_word(row, word);
                while w != 0 {
                    let bit = w.trailing_zeros();
                    counts[(word << 6) + bit as usize] += 1;
                    w &= w - 1;
                }
            }
        }
        let n = self.n_rows.max(1) as f64;
        counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Empirical distribution of row sizes, as probabilities over `0..=n_items`.
    pub fn row_size_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_items + 1];
        for row in 0..self.n_rows {
            counts[self.row_size(row)] += 1;
        }
        let n = self.n_rows.max(1) as f64;
        counts.iter().map(|&c| c as f64 / n).collect()
    }
}

impl std::fmt::Debug for TransactionDatabase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TransactionDatabase({} rows x {} items)",
            self.n_rows, self.n_items
        )
    }
}

/// Margin statistics of a database, the inputs of background models.
#[derive(Clone, Debug)]
pub struct EmpiricalStats {
    pub n_items: usize,
    pub n_rows: usize,
    /// Relative support of each single item.
    pub column_margins: Vec<f64>,
    /// Probability of each row size `0..=n_items`.
    pub row_size_dist: Vec<f64>,
}

impl EmpiricalStats {
    pub fn from_db(db: &TransactionDatabase) -> EmpiricalStats {
        EmpiricalStats {
            n_items: db.n_items(),
            n_rows: db.n_rows(),
            column_margins: db.column_margins(),
            row_size_dist: db.row_size_distribution(),
        }
    }
}

/// Remaps a database onto the contiguous universe of items that actually
/// occur. Returns the compacted database and the map from new dense index
/// to original item id (sorted ascending).
pub fn densify(db: &TransactionDatabase) -> (TransactionDatabase, Vec<u32>) {
    let margins = db.column_margins();
    let present: Vec<u32> = (0..db.n_items() as u32)
        .filter(|&i| margins[i as usize] > 0.0)
        .collect();
    let mut back = vec![u32::MAX; db.n_items()];
    for (dense, &orig) in present.iter().enumerate() {
        back[orig as usize] = dense as u32;
    }
    let mut out = TransactionDatabase::new(present.len());
    for row in 0..db.n_rows() {
        let items: Vec<u32> = db.row_items(row).iter().map(|&i| back[i as usize]).collect();
        out.push_row(&items).expect("dense ids are in range");
    }
    (out, present)
}
