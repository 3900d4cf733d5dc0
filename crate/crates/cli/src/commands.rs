//! Implementations of the five subcommands.
//!
//! Every command reads whole files, works in memory, and writes one report.
//! Sparse item ids are densified before mining or scoring; reports use the
//! original ids, and the dense-to-original map is persisted next to saved
//! models so `estimate` can translate queries back.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use itemsum_core::{
    densify, evaluate_summary, generate_independent, generate_markov, generate_mosaic,
    holdout_split, mine_summary, parse_fimi_with, score_fitted, score_json, score_tsv, sig9,
    significance_json, significance_tsv, summary_json, summary_tsv, write_fimi, ConstraintSet,
    Criterion, DatasetMetadata, EmpiricalStats, Error, FimiOptions, GeneratorInfo,
    IndependentConfig, Itemset, MarkovConfig, MaxEntModel, MosaicConfig, NullModel, PlantedSet,
    Result, RunMetadata, ScoreConfig, SearchConstraints, SignificanceConfig, TransactionDatabase,
};
use serde_json::json;

use crate::{
    Cli, Command, EstimateArgs, Format, GenerateArgs, GenerateKind, InputArgs, MineArgs, NullArg,
    OutputArgs, ScoreArgs, SignificanceArgs,
};

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Mine(args) => cmd_mine(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Score(args) => cmd_score(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Significance(args) => cmd_significance(&args),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn emit(out: &OutputArgs, report: &str) -> Result<()> {
    match &out.output {
        Some(path) => write_file(path, report),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn load_db(input: &InputArgs, n_items: Option<usize>) -> Result<TransactionDatabase> {
    let text = read_to_string(&input.input)?;
    let opts = FimiOptions {
        keep_blank_rows: input.keep_blank_rows,
        n_items,
    };
    parse_fimi_with(&text, &opts)
}

/// Parses one whitespace-separated itemset per line; blank lines are skipped.
fn parse_itemsets(text: &str) -> Result<Vec<Itemset>> {
    let mut sets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut items = Vec::new();
        for token in line.split_whitespace() {
            let item: u32 = token.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad item id {token:?}"),
            })?;
            items.push(item);
        }
        if !items.is_empty() {
            sets.push(Itemset::new(items));
        }
    }
    Ok(sets)
}

fn resolve_minsup(minsup: usize, frac: Option<f64>, n_rows: usize) -> Result<usize> {
    match frac {
        Some(f) if !(0.0..=1.0).contains(&f) => Err(Error::InvalidInput(format!(
            "--minsup-frac {f} must lie in [0, 1]"
        ))),
        Some(f) => Ok(((f * n_rows as f64).ceil() as usize).max(1)),
        None => Ok(minsup),
    }
}

fn remap_itemset(x: &Itemset, ids: &[u32]) -> Itemset {
    Itemset::new(x.items().iter().map(|&i| ids[i as usize]).collect())
}

/// Translates original item ids to dense indices, rejecting absent items.
fn to_dense(sets: &[Itemset], ids: &[u32]) -> Result<Vec<Itemset>> {
    let back: HashMap<u32, u32> = ids
        .iter()
        .enumerate()
        .map(|(dense, &orig)| (orig, dense as u32))
        .collect();
    sets.iter()
        .map(|x| {
            x.items()
                .iter()
                .map(|item| {
                    back.get(item).copied().ok_or_else(|| {
                        Error::InvalidInput(format!("item {item} never occurs in the data"))
                    })
                })
                .collect::<Result<Vec<u32>>>()
                .map(Itemset::new)
        })
        .collect()
}

fn meta_sidecar_path(model_path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.json", model_path.display()))
}

fn cmd_mine(args: &MineArgs) -> Result<u8> {
    let t0 = Instant::now();
    let db = load_db(&args.input, None)?;
    let (dense, ids) = densify(&db);
    let identity = ids.len() == db.n_items();
    let min_support = resolve_minsup(args.minsup, args.minsup_frac, dense.n_rows())?;
    if let Some(budget) = args.time_budget {
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::InvalidInput(format!(
                "--time-budget {budget} must be a nonnegative number of seconds"
            )));
        }
    }
    let constraints = SearchConstraints {
        min_support,
        max_itemset_size: args.max_itemset_size.unwrap_or(usize::MAX),
        max_k: args.k,
        item_order: None,
        time_budget: args.time_budget.map(Duration::from_secs_f64),
        threads: args.threads.max(1),
    };
    let fit = args.fit.to_config();
    let mut result = mine_summary(
        &dense,
        args.criterion.into(),
        args.background.into(),
        &fit,
        &constraints,
    )?;
    if !identity {
        for e in &mut result.entries {
            e.itemset = remap_itemset(&e.itemset, &ids);
        }
    }
    let meta = RunMetadata {
        dataset: Some(args.input.input.display().to_string()),
        criterion: args.criterion.into(),
        mode: args.background.into(),
        n_rows: db.n_rows(),
        n_items: db.n_items(),
        epsilon: fit.epsilon,
        min_support,
        max_itemset_size: args.max_itemset_size,
        max_k: args.k,
        seed: None,
        threads: args.threads.max(1),
        elapsed_secs: t0.elapsed().as_secs_f64(),
    };
    let report = match args.out.format {
        Format::Tsv => summary_tsv(&result, &meta),
        Format::Json => summary_json(&result, &meta),
    };
    emit(&args.out, &report)?;
    if let Some(path) = &args.model_out {
        write_file(path, &result.model.serialize())?;
        let sidecar = DatasetMetadata {
            n_items: dense.n_items(),
            n_rows: dense.n_rows(),
            item_ids: (!identity).then(|| ids.clone()),
            seed: None,
            generator: None,
        };
        write_file(&meta_sidecar_path(path), &sidecar.to_json())?;
    }
    if let Some(path) = &args.itemsets_out {
        let mut text = String::new();
        for e in &result.entries {
            text.push_str(&e.itemset.to_string());
            text.push('\n');
        }
        write_file(path, &text)?;
    }
    Ok(if result.truncated() { 10 } else { 0 })
}

fn cmd_estimate(args: &EstimateArgs) -> Result<u8> {
    let model = MaxEntModel::parse(&read_to_string(&args.model)?)?;
    let sidecar = meta_sidecar_path(&args.model);
    let ids: Option<Vec<u32>> = if sidecar.exists() {
        let meta: DatasetMetadata = serde_json::from_str(&read_to_string(&sidecar)?)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", sidecar.display())))?;
        meta.item_ids
    } else {
        None
    };
    let queries = parse_itemsets(&read_to_string(&args.queries)?)?;
    let dense_queries = match &ids {
        Some(ids) => to_dense(&queries, ids)?,
        None => queries.clone(),
    };
    let mut estimates = Vec::with_capacity(queries.len());
    for (original, dense) in queries.iter().zip(&dense_queries) {
        estimates.push((original, sig9(model.query(dense)?)));
    }
    let report = match args.out.format {
        Format::Tsv => {
            let mut out = String::from("# itemsum-estimate v1\n");
            out.push_str(&format!("# model\t{}\n", args.model.display()));
            out.push_str("itemset\testimate\n");
            for (set, p) in &estimates {
                out.push_str(&format!("{set}\t{p}\n"));
            }
            out
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = estimates
                .iter()
                .map(|(set, p)| json!({"itemset": set.items(), "estimate": p}))
                .collect();
            let doc = json!({
                "format": "itemsum-estimate v1",
                "model": args.model.display().to_string(),
                "estimates": rows,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("static document");
            s.push('\n');
            s
        }
    };
    emit(&args.out, &report)?;
    Ok(0)
}

fn cmd_score(args: &ScoreArgs) -> Result<u8> {
    let db = load_db(&args.input, None)?;
    let (dense, ids) = densify(&db);
    let sets = parse_itemsets(&read_to_string(&args.itemsets)?)?;
    let dense_sets = to_dense(&sets, &ids)?;
    let pairs: Vec<(Itemset, f64)> = dense_sets
        .into_iter()
        .map(|x| {
            let f = dense.frequency(&x)?;
            Ok((x, f))
        })
        .collect::<Result<_>>()?;
    let constraints = ConstraintSet::from_pairs(pairs)?;
    let stats = EmpiricalStats::from_db(&dense);
    let fit = args.fit.to_config();
    let model = MaxEntModel::fit(&constraints, args.background.into(), &stats, &fit)?;
    let criterion: Criterion = args.criterion.into();
    let score = score_fitted(
        &model,
        &dense,
        &ScoreConfig::new(criterion, dense.n_items(), dense.n_rows()),
    );
    let report = match args.out.format {
        Format::Tsv => score_tsv(&score, criterion),
        Format::Json => score_json(&score, criterion),
    };
    emit(&args.out, &report)?;
    Ok(0)
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    let (db, info) = match &args.kind {
        GenerateKind::Independent {
            items,
            rows,
            freq_lo,
            freq_hi,
        } => {
            let cfg = IndependentConfig {
                n_items: *items,
                n_rows: *rows,
                freq_lo: *freq_lo,
                freq_hi: *freq_hi,
            };
            let (db, freqs) = generate_independent(&cfg, args.seed)?;
            let info = GeneratorInfo {
                kind: "independent".into(),
                params: json!({
                    "items": items, "rows": rows,
                    "freq_lo": freq_lo, "freq_hi": freq_hi,
                    "item_freqs": freqs,
                }),
                planted: None,
            };
            (db, info)
        }
        GenerateKind::Markov {
            items,
            rows,
            copy_lo,
            copy_hi,
            init_prob,
        } => {
            let cfg = MarkovConfig {
                n_items: *items,
                n_rows: *rows,
                copy_lo: *copy_lo,
                copy_hi: *copy_hi,
                init_prob: *init_prob,
            };
            let (db, copy_probs) = generate_markov(&cfg, args.seed)?;
            let info = GeneratorInfo {
                kind: "markov".into(),
                params: json!({
                    "items": items, "rows": rows,
                    "copy_lo": copy_lo, "copy_hi": copy_hi, "init_prob": init_prob,
                    // index 0 has no predecessor, so no copy probability
                    "copy_probs": copy_probs[1..],
                }),
                planted: None,
            };
            (db, info)
        }
        GenerateKind::Mosaic {
            items,
            rows,
            sets,
            set_size,
            freq_lo,
            freq_hi,
            noise,
        } => {
            let cfg = MosaicConfig {
                n_items: *items,
                n_rows: *rows,
                n_sets: *sets,
                set_size: *set_size,
                freq_lo: *freq_lo,
                freq_hi: *freq_hi,
                noise: *noise,
            };
            let data = generate_mosaic(&cfg, args.seed)?;
            let planted = data
                .planted
                .iter()
                .map(|(x, f)| PlantedSet {
                    items: x.items().to_vec(),
                    frequency: *f,
                })
                .collect();
            let info = GeneratorInfo {
                kind: "mosaic".into(),
                params: json!({
                    "items": items, "rows": rows, "sets": sets, "set_size": set_size,
                    "freq_lo": freq_lo, "freq_hi": freq_hi, "noise": noise,
                }),
                planted: Some(planted),
            };
            (data.db, info)
        }
    };
    let text = write_fimi(&db);
    match &args.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    let meta_path = args.meta.clone().or_else(|| {
        args.output
            .as_ref()
            .map(|o| PathBuf::from(format!("{}.meta.json", o.display())))
    });
    if let Some(path) = meta_path {
        let sidecar = DatasetMetadata {
            n_items: db.n_items(),
            n_rows: db.n_rows(),
            item_ids: None,
            seed: Some(args.seed),
            generator: Some(info),
        };
        write_file(&path, &sidecar.to_json())?;
    }
    Ok(0)
}

fn cmd_significance(args: &SignificanceArgs) -> Result<u8> {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "--alpha {} must lie in (0, 1]",
            args.alpha
        )));
    }
    let sets = parse_itemsets(&read_to_string(&args.itemsets)?)?;
    let (exploratory, holdout) = match &args.holdout {
        Some(path) => {
            // widen the smaller file so both databases share one universe
            let a = load_db(&args.input, None)?;
            let b = {
                let text = read_to_string(path)?;
                let opts = FimiOptions {
                    keep_blank_rows: args.input.keep_blank_rows,
                    n_items: None,
                };
                parse_fimi_with(&text, &opts)?
            };
            let n = a.n_items().max(b.n_items());
            let widen = |db: TransactionDatabase, text_path: &Path| -> Result<TransactionDatabase> {
                if db.n_items() == n {
                    return Ok(db);
                }
                let opts = FimiOptions {
                    keep_blank_rows: args.input.keep_blank_rows,
                    n_items: Some(n),
                };
                parse_fimi_with(&read_to_string(text_path)?, &opts)
            };
            (widen(a, &args.input.input)?, widen(b, path)?)
        }
        None => {
            let db = load_db(&args.input, None)?;
            holdout_split(&db, args.split_seed)
        }
    };
    finish_significance(args, &sets, &exploratory, &holdout)
}

fn finish_significance(
    args: &SignificanceArgs,
    sets: &[Itemset],
    exploratory: &TransactionDatabase,
    holdout: &TransactionDatabase,
) -> Result<u8> {
    let cfg = SignificanceConfig {
        alpha: args.alpha,
        sample_size: args.sample_size,
        seed: args.seed,
        min_support: args.minsup,
        max_itemset_size: args.max_itemset_size.unwrap_or(usize::MAX),
        enumeration_limit: args.enumeration_limit,
    };
    let mut report = evaluate_summary(
        exploratory,
        holdout,
        sets,
        args.background.into(),
        &args.fit.to_config(),
        &cfg,
    )?;
    if let Some(keep) = match args.null {
        NullArg::All => None,
        NullArg::Background => Some(NullModel::BackgroundOnly),
        NullArg::Preceding => Some(NullModel::PrecedingSummary),
        NullArg::Full => Some(NullModel::FullSummaryOnSampled),
    } {
        report.sections.retain(|s| s.null == keep);
    }
    let text = match args.out.format {
        Format::Tsv => significance_tsv(&report),
        Format::Json => significance_json(&report),
    };
    emit(&args.out, &text)?;
    Ok(0)
}
