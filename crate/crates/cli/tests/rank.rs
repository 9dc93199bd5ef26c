mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{json, ok, pdbench, read, s};
use pdbench_core::leaderboard::{rank, Margins, SubmissionSummary};
use serde_json::Value;

fn fixture_rows() -> Vec<Value> {
    serde_json::from_str(&read(&common::core_fixtures().join("challenge_results.json"))).unwrap()
}

#[test]
fn published_table_ranks_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let input = common::core_fixtures().join("challenge_results.json");
    let out = dir.path().join("board");
    let start = Instant::now();
    ok(["rank", "--input", s(&input), "--out", s(&out)]);
    assert!(start.elapsed().as_secs_f64() < 1.0);

    let board = json(&out.join("leaderboard.json"));
    assert!(board["excluded"].as_array().unwrap().is_empty());
    let rows = fixture_rows();
    for region in 1..=3u64 {
        let entries: Vec<SubmissionSummary> = rows
            .iter()
            .filter(|r| r["region"].as_u64() == Some(region))
            .map(|r| serde_json::from_value(r.clone()).unwrap())
            .collect();
        let want = rank(&entries, Margins::default()).unwrap();
        let got = &board["regions"][region.to_string()];
        assert_eq!(got, &serde_json::to_value(&want).unwrap(), "region {region}");
    }

    let md = read(&out.join("leaderboard.md"));
    assert!(md.starts_with("<!-- pdbench "));
    assert!(md.contains("| 3* | SuperSR | 2.933 | 11.50 |"), "{md}");
    assert!(md.contains("| 3* | TTI | 2.938 | 11.46 |"), "{md}");

    let plane = read(&out.join("plane.csv"));
    assert!(plane.lines().next().unwrap().starts_with("# pdbench "));
    assert_eq!(plane.lines().nth(1), Some("rmse,pi,team,region"));
    assert_eq!(plane.lines().count(), 2 + rows.len());
}

#[test]
fn empty_region_gets_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    std::fs::write(&input, r#"[{"team": "solo", "pi": 2.5, "rmse": 11.0}]"#).unwrap();
    let r = ok(["rank", "--input", s(&input)]);
    assert!(r.stdout.contains("## Region 1\n\n| # | Team | PI | RMSE |\n|---|---|---|---|\n| 1 | solo | 2.500 | 11.00 |\n"));
    assert!(r.stdout.contains("## Region 2\n\n| # | Team | PI | RMSE |\n|---|---|---|---|\n\n## Region 3"));
    assert!(r.stdout.ends_with("## Region 3\n\n| # | Team | PI | RMSE |\n|---|---|---|---|\n"));

    let only = ok(["rank", "--input", s(&input), "--region", "2"]);
    assert!(!only.stdout.contains("Region 1"));
    assert!(only.stdout.contains("## Region 2"));
}

#[test]
fn wrapped_input_margins_and_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    std::fs::write(
        &input,
        r#"{"submissions": [
            {"team": "a", "pi": 2.00, "rmse": 12.0},
            {"team": "b", "pi": 2.02, "rmse": 11.8},
            {"team": "far", "pi": 1.0, "rmse": 20.0},
            {"team": "wrong", "region": 3, "pi": 1.0, "rmse": 12.1}
        ]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(["rank", "--input", s(&input), "--out", s(&out)]);
    let board = json(&out.join("leaderboard.json"));
    let teams = |b: &Value| -> Vec<String> {
        b["regions"]["2"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["submission"]["team"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(teams(&board), ["a", "b"]);
    let excluded: Vec<&str> = board["excluded"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["submission"]["team"].as_str().unwrap())
        .collect();
    assert_eq!(excluded, ["far", "wrong"]);
    assert!(read(&out.join("leaderboard.md")).contains("## Excluded"));

    ok(["rank", "--input", s(&input), "--out", s(&out), "--eps-pi", "0.05"]);
    assert_eq!(teams(&json(&out.join("leaderboard.json"))), ["b", "a"]);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("in.json"),
        r#"[{"team": "a", "pi": 2.00, "rmse": 12.0}, {"team": "b", "pi": 2.02, "rmse": 11.8}]"#,
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\n[rank]\ninput = \"in.json\"\neps_pi = 0.05\nout = \"board\"\n").unwrap();
    ok(["rank", "--config", s(&cfg)]);
    let board = json(&dir.path().join("board/leaderboard.json"));
    assert_eq!(board["eps_pi"], 0.05);
    assert_eq!(board["provenance"]["seed"], 9);
    assert_eq!(board["regions"]["2"][0]["submission"]["team"], "b");

    ok(["rank", "--config", s(&cfg), "--eps-pi", "0.01", "--seed", "4"]);
    let board = json(&dir.path().join("board/leaderboard.json"));
    assert_eq!(board["eps_pi"], 0.01);
    assert_eq!(board["provenance"]["seed"], 4);
    assert_eq!(board["regions"]["2"][0]["submission"]["team"], "a");

    std::fs::write(&cfg, "[rank]\nbogus = 1\n").unwrap();
    assert_eq!(pdbench(["rank", "--config", s(&cfg)]).code, 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = common::core_fixtures().join("challenge_results.json");
    let out = dir.path().join("o");
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        ok(["rank", "--input", s(&input), "--out", s(&out)]);
        let files: BTreeMap<&str, Vec<u8>> = ["leaderboard.md", "leaderboard.json", "plane.csv"]
            .into_iter()
            .map(|f| (f, std::fs::read(out.join(f)).unwrap()))
            .collect();
        snapshots.push(files);
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(pdbench(["rank", "--input", s(&missing)]).code, 1);
    assert_eq!(pdbench(["rank"]).code, 1);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(pdbench(["rank", "--input", s(&bad)]).code, 2);
    let input = common::core_fixtures().join("challenge_results.json");
    assert_eq!(pdbench(["rank", "--input", s(&input), "--region", "4"]).code, 1);
    assert_eq!(pdbench(["rank", "--input", s(&input), "--thresholds", "12,11,16"]).code, 1);
    assert_eq!(pdbench(["rank", "--input", s(&input), "--eps-pi", "-1"]).code, 1);
    assert_eq!(pdbench(["rank", "--no-such-flag"]).code, 1);
    assert_eq!(pdbench(["--help"]).code, 0);
    let v = pdbench(["--version"]);
    assert_eq!(v.code, 0);
    assert!(v.stdout.contains(env!("CARGO_PKG_VERSION")));
}
