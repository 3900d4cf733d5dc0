//! Synthetic transaction generators and the exploratory/holdout split.
//!
//! All generators draw from a seeded ChaCha stream, so equal seeds give
//! byte-identical databases on every platform.

use crate::data::TransactionDatabase;
use crate::error::{Error, Result};
use crate::itemset::Itemset;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent columns: item `i` is set with probability `theta_i`, and the
/// `theta_i` are drawn uniformly from `[freq_lo, freq_hi]`.
#[derive(Clone, Debug)]
pub struct IndependentConfig {
    pub n_items: usize,
    pub n_rows: usize,
    pub freq_lo: f64,
    pub freq_hi: f64,
}

pub fn generate_independent(
    cfg: &IndependentConfig,
    seed: u64,
) -> Result<(TransactionDatabase, Vec<f64>)> {
    check_prob_band(cfg.freq_lo, cfg.freq_hi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas: Vec<f64> = (0..cfg.n_items)
        .map(|_| rng.random_range(cfg.freq_lo..=cfg.freq_hi))
        .collect();
    let mut db = TransactionDatabase::new(cfg.n_items);
    let mut row = Vec::with_capacity(cfg.n_items);
    for _ in 0..cfg.n_rows {
        row.clear();
        for (i, &theta) in thetas.iter().enumerate() {
            if rng.random::<f64>() < theta {
                row.push(i as u32);
            }
        }
        db.push_row(&row)?;
    }
    Ok((db, thetas))
}

/// First-order chain: item 0 is set with probability `init_prob`; item `i`
/// copies the value of item `i - 1` with probability `copy_i` (drawn from
/// `[copy_lo, copy_hi]`) and takes the opposite value otherwise.
#[derive(Clone, Debug)]
pub struct MarkovConfig {
    pub n_items: usize,
    pub n_rows: usize,
    pub copy_lo: f64,
    pub copy_hi: f64,
    pub init_prob: f64,
}

pub fn generate_markov(
    cfg: &MarkovConfig,
    seed: u64,
) -> Result<(TransactionDatabase, Vec<f64>)> {
    check_prob_band(cfg.copy_lo, cfg.copy_hi)?;
    if !(0.0..=1.0).contains(&cfg.init_prob) {
        return Err(Error::invalid("init_prob must lie in [0, 1]"));
    }
    if cfg.n_items == 0 {
        return Err(Error::invalid("markov generator needs at least one item"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // copy_probs[i] governs the transition from item i-1 to item i.
    let mut copy_probs = vec![f64::NAN];
    copy_probs.extend((1..cfg.n_items).map(|_| rng.random_range(cfg.copy_lo..=cfg.copy_hi)));
    let mut db = TransactionDatabase::new(cfg.n_items);
    let mut row = Vec::with_capacity(cfg.n_items);
    for _ in 0..cfg.n_rows {
        row.clear();
        let mut prev = rng.random::<f64>() < cfg.init_prob;
        if prev {
            row.push(0);
        }
        for i in 1..cfg.n_items {
            let copy = rng.random::<f64>() < copy_probs[i];
            let value = if copy { prev } else { !prev };
            if value {
                row.push(i as u32);
            }
            prev = value;
        }
        db.push_row(&row)?;
    }
    Ok((db, copy_probs))
}

/// Planted patterns: `n_sets` distinct random itemsets of `set_size` items
/// each; every set fires independently per row with its drawn frequency and
/// sets all its items; afterwards every cell is flipped with probability
/// `noise` (symmetric noise).
#[derive(Clone, Debug)]
pub struct MosaicConfig {
    pub n_items: usize,
    pub n_rows: usize,
    pub n_sets: usize,
    pub set_size: usize,
    pub freq_lo: f64,
    pub freq_hi: f64,
    pub noise: f64,
}

#[derive(Clone, Debug)]
pub struct MosaicData {
    pub db: TransactionDatabase,
    /// Planted itemsets with their firing frequencies.
    pub planted: Vec<(Itemset, f64)>,
}

pub fn generate_mosaic(cfg: &MosaicConfig, seed: u64) -> Result<MosaicData> {
    check_prob_band(cfg.freq_lo, cfg.freq_hi)?;
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::invalid("noise must lie in [0, 1]"));
    }
    if cfg.set_size == 0 || cfg.set_size > cfg.n_items {
        return Err(Error::invalid(format!(
            "set_size {} must lie in 1..={}",
            cfg.set_size, cfg.n_items
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted: Vec<(Itemset, f64)> = Vec::with_capacity(cfg.n_sets);
    let mut universe: Vec<u32> = (0..cfg.n_items as u32).collect();
    let mut guard = 0;
    while planted.len() < cfg.n_sets {
        universe.shuffle(&mut rng);
        let set = Itemset::new(universe[..cfg.set_size].to_vec());
        if planted.iter().any(|(s, _)| *s == set) {
            guard += 1;
            if guard > 10_000 {
                return Err(Error::invalid(
                    "cannot draw the requested number of distinct planted sets",
                ));
            }
            continue;
        }
        let freq = rng.random_range(cfg.freq_lo..=cfg.freq_hi);
        planted.push((set, freq));
    }
    let mut db = TransactionDatabase::new(cfg.n_items);
    let mut cells = vec![false; cfg.n_items];
    let mut row = Vec::with_capacity(cfg.n_items);
    for _ in 0..cfg.n_rows {
        cells.fill(false);
        for (set, freq) in &planted {
            if rng.random::<f64>() < *freq {
                for &item in set.items() {
                    cells[item as usize] = true;
                }
            }
        }
        row.clear();
        for (i, cell) in cells.iter().enumerate() {
            let value = if rng.random::<f64>() < cfg.noise {
                !cell
            } else {
                *cell
            };
            if value {
                row.push(i as u32);
            }
        }
        db.push_row(&row)?;
    }
    Ok(MosaicData { db, planted })
}

/// Splits rows into an exploratory and a holdout half by a seeded shuffle.
/// The exploratory half receives the extra row when `n_rows` is odd.
pub fn holdout_split(
    db: &TransactionDatabase,
    seed: u64,
) -> (TransactionDatabase, TransactionDatabase) {
    let mut order: Vec<usize> = (0..db.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let cut = db.n_rows().div_ceil(2);
    (db.select_rows(&order[..cut]), db.select_rows(&order[cut..]))
}

fn check_prob_band(lo: f64, hi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::invalid(format!(
            "probability band [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_is_seed_deterministic() {
        let cfg = IndependentConfig {
            n_items: 12,
            n_rows: 200,
            freq_lo: 0.2,
            freq_hi: 0.8,
        };
        let (a, ta) = generate_independent(&cfg, 42).unwrap();
        let (b, tb) = generate_independent(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate_independent(&cfg, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn independent_margins_track_thetas() {
        let cfg = IndependentConfig {
            n_items: 8,
            n_rows: 4000,
            freq_lo: 0.2,
            freq_hi: 0.8,
        };
        let (db, thetas) = generate_independent(&cfg, 7).unwrap();
        let margins = db.column_margins();
        for (m, t) in margins.iter().zip(&thetas) {
            // four-sigma binomial band
            let sigma = (t * (1.0 - t) / cfg.n_rows as f64).sqrt();
            assert!(
                (m - t).abs() < 4.0 * sigma,
                "margin {m} too far from theta {t}"
            );
        }
    }

    #[test]
    fn markov_neighbors_correlate() {
        let cfg = MarkovConfig {
            n_items: 10,
            n_rows: 5000,
            copy_lo: 0.7,
            copy_hi: 0.8,
            init_prob: 0.5,
        };
        let (db, copy) = generate_markov(&cfg, 3).unwrap();
        assert_eq!(copy.len(), 10);
        // P(adjacent pair both set) should clearly exceed the independent
        // estimate of ~0.25 under copy probabilities >= 0.7.
        let pair = db.frequency(&Itemset::from([4, 5])).unwrap();
        assert!(pair > 0.3, "pair frequency {pair}");
    }

    #[test]
    fn mosaic_records_distinct_planted_sets() {
        let cfg = MosaicConfig {
            n_items: 20,
            n_rows: 500,
            n_sets: 5,
            set_size: 5,
            freq_lo: 0.2,
            freq_hi: 0.5,
            noise: 0.01,
        };
        let data = generate_mosaic(&cfg, 11).unwrap();
        assert_eq!(data.planted.len(), 5);
        for (set, freq) in &data.planted {
            assert_eq!(set.len(), 5);
            let fr = data.db.frequency(set).unwrap();
            // the planted set occurs at least as often as its firing rate,
            // minus noise knockouts
            assert!(
                fr > freq * 0.7,
                "planted set {set:?} frequency {fr} vs firing rate {freq}"
            );
        }
        for i in 0..4 {
            for j in i + 1..5 {
                assert_ne!(data.planted[i].0, data.planted[j].0);
            }
        }
    }

    #[test]
    fn holdout_preserves_rows_as_multiset() {
        let cfg = IndependentConfig {
            n_items: 6,
            n_rows: 101,
            freq_lo: 0.3,
            freq_hi: 0.7,
        };
        let (db, _) = generate_independent(&cfg, 5).unwrap();
        let (explore, hold) = holdout_split(&db, 9);
        assert_eq!(explore.n_rows(), 51);
        assert_eq!(hold.n_rows(), 50);
        let mut original: Vec<Vec<u32>> = (0..db.n_rows()).map(|r| db.row_items(r)).collect();
        let mut halves: Vec<Vec<u32>> = (0..explore.n_rows())
            .map(|r| explore.row_items(r))
            .chain((0..hold.n_rows()).map(|r| hold.row_items(r)))
            .collect();
        original.sort();
        halves.sort();
        assert_eq!(original, halves);
    }
}
