//! End-to-end tests driving the compiled binary.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_itemsum"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "itemsum {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn path_str(dir: &TempDir, name: &str) -> (PathBuf, String) {
    let p = dir.path().join(name);
    let s = p.display().to_string();
    (p, s)
}

/// A two-block fixture with a noise tail. The noise keeps every margin
/// strictly away from the block frequencies, so zero-epsilon fits have an
/// interior optimum and converge quickly.
fn write_blocks(dir: &TempDir) -> String {
    let mut text = String::new();
    for _ in 0..55 {
        text.push_str("0 1 2\n");
    }
    for _ in 0..35 {
        text.push_str("3 4\n");
    }
    text.push_str("0\n1\n2\n3\n4\n0 3\n1 4\n0 1\n2 4\n3\n");
    let (p, s) = path_str(dir, "blocks.dat");
    std::fs::write(p, text).unwrap();
    s
}

/// Parses the entry rows of a TSV summary: (itemset, support, frequency,
/// estimate, h, total-bits).
fn parse_summary(tsv: &str) -> Vec<(Vec<u32>, usize, f64, f64, f64, f64)> {
    tsv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("rank\t") && !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 7, "bad row {l:?}");
            let items = f[1]
                .split_whitespace()
                .map(|t| t.parse().unwrap())
                .collect();
            (
                items,
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
                f[4].parse().unwrap(),
                f[5].parse().unwrap(),
                f[6].parse().unwrap(),
            )
        })
        .collect()
}

fn header_value<'a>(tsv: &'a str, key: &str) -> &'a str {
    let prefix = format!("# {key}\t");
    tsv.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("missing header {key}"))
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let (_, a) = path_str(&dir, "a.dat");
    let (_, b) = path_str(&dir, "b.dat");
    let (_, c) = path_str(&dir, "c.dat");
    let args = ["generate", "independent", "--items", "10", "--rows", "500", "--seed", "7", "-o"];
    run_ok(&[&args[..], &[&a]].concat());
    run_ok(&[&args[..], &[&b]].concat());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(format!("{a}.meta.json")).unwrap(),
        std::fs::read(format!("{b}.meta.json")).unwrap()
    );
    run_ok(&[
        "generate", "independent", "--items", "10", "--rows", "500", "--seed", "8", "-o", &c,
    ]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn mine_recovers_planted_mosaic_sets() {
    let dir = TempDir::new().unwrap();
    let (_, data) = path_str(&dir, "mosaic.dat");
    run_ok(&[
        "generate", "mosaic", "--items", "30", "--rows", "20000", "--sets", "5", "--set-size",
        "5", "--seed", "1", "-o", &data,
    ]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{data}.meta.json")).unwrap())
            .unwrap();
    let planted: HashSet<Vec<u64>> = meta["generator"]["planted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            p["items"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_u64().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(planted.len(), 5);
    let tsv = run_ok(&[
        "mine", &data, "--keep-blank-rows", "--minsup", "1000", "--max-group-items", "30",
        "--max-iters", "20000", "-k", "5",
    ]);
    let entries = parse_summary(&tsv);
    assert_eq!(entries.len(), 5);
    let mined: HashSet<Vec<u64>> = entries
        .iter()
        .map(|e| e.0.iter().map(|&i| i as u64).collect())
        .collect();
    assert_eq!(mined, planted);
}

#[test]
fn mine_k0_reports_background_only() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let tsv = run_ok(&["mine", &data, "-k", "0"]);
    assert!(parse_summary(&tsv).is_empty());
    assert_eq!(header_value(&tsv, "truncated"), "false");
    assert_eq!(
        header_value(&tsv, "final-bits"),
        header_value(&tsv, "background-bits")
    );
}

#[test]
fn malformed_input_exits_3_with_line_number() {
    let dir = TempDir::new().unwrap();
    let (p, s) = path_str(&dir, "bad.dat");
    std::fs::write(p, "1 2\n3 x 4\n").unwrap();
    let out = run(&["mine", &s]);
    assert_eq!(exit_code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "stderr: {err}");
}

#[test]
fn missing_input_exits_7() {
    let out = run(&["mine", "/nonexistent/db.dat"]);
    assert_eq!(exit_code(&out), 7);
}

#[test]
fn estimate_members_match_mined_frequencies() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let (_, model) = path_str(&dir, "blocks.model");
    let tsv = run_ok(&[
        "mine", &data, "--epsilon", "0", "--max-iters", "50000", "--model-out", &model,
    ]);
    let entries = parse_summary(&tsv);
    assert!(!entries.is_empty());
    let (qp, qs) = path_str(&dir, "queries.txt");
    let mut queries = String::new();
    for e in &entries {
        let ids: Vec<String> = e.0.iter().map(|i| i.to_string()).collect();
        queries.push_str(&ids.join(" "));
        queries.push('\n');
    }
    std::fs::write(qp, queries).unwrap();
    let est = run_ok(&["estimate", &qs, "--model", &model]);
    let rows: Vec<&str> = est
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("itemset\t"))
        .collect();
    assert_eq!(rows.len(), entries.len());
    for (row, e) in rows.iter().zip(&entries) {
        let p: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
        assert!(
            (p - e.2).abs() < 1e-4,
            "estimate {p} vs mined frequency {}",
            e.2
        );
    }
}

#[test]
fn estimate_under_uniform_model_is_two_to_minus_size() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let (_, model) = path_str(&dir, "uniform.model");
    run_ok(&[
        "mine", &data, "--background", "none", "-k", "0", "--model-out", &model,
    ]);
    let (qp, qs) = path_str(&dir, "queries.txt");
    std::fs::write(qp, "3\n0 4\n1 2 3\n").unwrap();
    let est = run_ok(&["estimate", &qs, "--model", &model, "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_str(&est).unwrap();
    let got: Vec<f64> = doc["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["estimate"].as_f64().unwrap())
        .collect();
    assert_eq!(got, vec![0.5, 0.25, 0.125]);
}

#[test]
fn estimate_unknown_item_exits_4() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let (_, model) = path_str(&dir, "m.model");
    run_ok(&["mine", &data, "-k", "1", "--model-out", &model]);
    let (qp, qs) = path_str(&dir, "q.txt");
    std::fs::write(qp, "0 99\n").unwrap();
    let out = run(&["estimate", &qs, "--model", &model]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn tsv_and_json_reports_carry_identical_values() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let common = ["mine", &data, "--epsilon", "0", "--max-iters", "50000"];
    let tsv = run_ok(&common);
    let json = run_ok(&[&common[..], &["--format", "json"]].concat());
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    let entries = parse_summary(&tsv);
    let jentries = doc["entries"].as_array().unwrap();
    assert_eq!(entries.len(), jentries.len());
    for (t, j) in entries.iter().zip(jentries) {
        let jitems: Vec<u32> = j["itemset"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as u32)
            .collect();
        assert_eq!(t.0, jitems);
        assert_eq!(t.1, j["support"].as_u64().unwrap() as usize);
        assert_eq!(t.2, j["frequency"].as_f64().unwrap());
        assert_eq!(t.3, j["estimate"].as_f64().unwrap());
        assert_eq!(t.4, j["h"].as_f64().unwrap());
        assert_eq!(t.5, j["score_after"]["total_bits"].as_f64().unwrap());
    }
    let bg: f64 = header_value(&tsv, "background-bits").parse().unwrap();
    assert_eq!(bg, doc["background_score"]["total_bits"].as_f64().unwrap());
    let fin: f64 = header_value(&tsv, "final-bits").parse().unwrap();
    assert_eq!(fin, doc["final_bits"].as_f64().unwrap());
}

#[test]
fn score_of_empty_summary_is_uniform_bits_plus_penalty() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let (ip, is) = path_str(&dir, "empty.sets");
    std::fs::write(ip, "").unwrap();
    let tsv = run_ok(&["score", &data, "--itemsets", &is, "--background", "none"]);
    let value = |key: &str| -> f64 {
        tsv.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}\t")))
            .unwrap()
            .parse()
            .unwrap()
    };
    // uniform model over 5 items: every one of the 100 rows costs 5 bits
    assert_eq!(value("nll-bits"), 500.0);
    assert_eq!(value("total-bits"), 500.0 + value("penalty-bits"));
    let json = run_ok(&[
        "score", &data, "--itemsets", &is, "--background", "none", "--format", "json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["score"]["nll_bits"].as_f64().unwrap(), 500.0);
}

#[test]
fn score_matches_mine_reported_total() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let (_, sets) = path_str(&dir, "mined.sets");
    let tsv = run_ok(&[
        "mine", &data, "--epsilon", "0", "--max-iters", "50000", "--itemsets-out", &sets,
    ]);
    let mined_total: f64 = header_value(&tsv, "final-bits").parse().unwrap();
    let score = run_ok(&[
        "score", &data, "--itemsets", &sets, "--epsilon", "0", "--max-iters", "50000",
    ]);
    let total: f64 = score
        .lines()
        .find_map(|l| l.strip_prefix("total-bits\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (total - mined_total).abs() < 1e-3,
        "score {total} vs mine {mined_total}"
    );
}

#[test]
fn sparse_ids_survive_mining_and_estimation() {
    let dir = TempDir::new().unwrap();
    let (p, data) = path_str(&dir, "sparse.dat");
    // pair {5,9} fires in 60% of 900 rows against 65% margins, far above
    // the description cost of a two-item set
    let mut text = String::new();
    for i in 0..900 {
        text.push_str(match i % 20 {
            0..=11 => "5 9\n",
            12 => "5\n",
            13 => "9\n",
            _ => "107\n",
        });
    }
    std::fs::write(p, text).unwrap();
    let (_, model) = path_str(&dir, "sparse.model");
    let tsv = run_ok(&[
        "mine", &data, "-k", "1", "--epsilon", "0", "--max-iters", "50000", "--model-out",
        &model,
    ]);
    let entries = parse_summary(&tsv);
    assert_eq!(entries[0].0, vec![5, 9]);
    assert!(Path::new(&format!("{model}.meta.json")).exists());
    let (qp, qs) = path_str(&dir, "q.txt");
    std::fs::write(qp, "5 9\n").unwrap();
    let est = run_ok(&["estimate", &qs, "--model", &model]);
    let row = est.lines().last().unwrap();
    assert!(row.starts_with("5 9\t"), "row: {row}");
    let p: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((p - 0.6).abs() < 1e-4);
    // id 6 never occurs, so the model has no parameter for it
    let (qp2, qs2) = path_str(&dir, "q2.txt");
    std::fs::write(qp2, "6\n").unwrap();
    let out = run(&["estimate", &qs2, "--model", &model]);
    assert_eq!(exit_code(&out), 4);
}

#[test]
fn time_budget_truncates_with_exit_10() {
    let dir = TempDir::new().unwrap();
    let (_, data) = path_str(&dir, "markov.dat");
    run_ok(&[
        "generate", "markov", "--items", "20", "--rows", "20000", "--seed", "3", "-o", &data,
    ]);
    let out = run(&["mine", &data, "--minsup", "500", "--time-budget", "0.000001"]);
    assert_eq!(exit_code(&out), 10);
    let tsv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(header_value(&tsv, "truncated"), "true");
    assert_eq!(header_value(&tsv, "stop"), "time-budget");
}

#[test]
fn env_vars_override_defaults() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let out = bin()
        .args(["mine", &data, "-k", "0"])
        .env("ITEMSUM_FORMAT", "json")
        .env("ITEMSUM_CRITERION", "bic")
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["criterion"].as_str().unwrap(), "bic");
}

#[test]
fn minsup_frac_matches_absolute_minsup() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let strip_elapsed = |s: String| -> String {
        s.lines()
            .filter(|l| !l.starts_with("# elapsed-secs"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let by_frac = strip_elapsed(run_ok(&["mine", &data, "--minsup-frac", "0.35"]));
    let by_abs = strip_elapsed(run_ok(&["mine", &data, "--minsup", "35"]));
    assert_eq!(by_frac, by_abs);
    let out = run(&["mine", &data, "--minsup", "10", "--minsup-frac", "0.1"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn significance_reports_three_sections() {
    let dir = TempDir::new().unwrap();
    let (_, data) = path_str(&dir, "mosaic.dat");
    run_ok(&[
        "generate", "mosaic", "--items", "12", "--rows", "4000", "--sets", "2", "--set-size",
        "3", "--seed", "4", "-o", &data,
    ]);
    let (_, sets) = path_str(&dir, "mined.sets");
    run_ok(&[
        "mine", &data, "--minsup", "200", "--max-iters", "20000", "-k", "2", "--itemsets-out",
        &sets,
    ]);
    let tsv = run_ok(&[
        "significance", &data, "--itemsets", &sets, "--minsup", "200", "--max-iters", "20000",
        "--sample-size", "20",
    ]);
    let sections: HashSet<&str> = tsv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("section\t") && !l.is_empty())
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert!(sections.contains("background"));
    assert!(sections.contains("preceding-summary"));
    assert!(sections.contains("full-summary-sampled"));
    // planted structure should survive a null test against the background
    let significant = tsv
        .lines()
        .filter(|l| l.starts_with("background\t") && l.ends_with("\ttrue"))
        .count();
    assert!(significant >= 1, "report:\n{tsv}");
    let only = run_ok(&[
        "significance", &data, "--itemsets", &sets, "--minsup", "200", "--max-iters", "20000",
        "--sample-size", "20", "--null", "background",
    ]);
    let kinds: HashSet<&str> = only
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("section\t") && !l.is_empty())
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(kinds, HashSet::from(["background"]));
}

#[test]
fn estimate_batch_matches_library_queries() {
    let dir = TempDir::new().unwrap();
    let data = write_blocks(&dir);
    let (_, model) = path_str(&dir, "m.model");
    run_ok(&["mine", &data, "--model-out", &model]);
    let parsed =
        itemsum_core::MaxEntModel::parse(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let queries = ["0", "1 3", "0 2 4", "2 3 4", "0 1 2 3 4"];
    let (qp, qs) = path_str(&dir, "q.txt");
    std::fs::write(qp, queries.join("\n")).unwrap();
    let est = run_ok(&["estimate", &qs, "--model", &model]);
    let rows: Vec<&str> = est
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("itemset\t"))
        .collect();
    for (row, q) in rows.iter().zip(&queries) {
        let got: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
        let items: Vec<u32> = q.split_whitespace().map(|t| t.parse().unwrap()).collect();
        let want = itemsum_core::sig9(parsed.query(&itemsum_core::Itemset::new(items)).unwrap());
        assert_eq!(got, want, "query {q}");
    }
}
