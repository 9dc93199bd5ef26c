#![allow(dead_code)]

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::Command;

use pdbench_core::study::{NextItem, StudyEngine, StudyPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn pdbench<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_pdbench"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Runs the command and panics with its stderr unless it succeeded.
pub fn ok<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    let r = pdbench(args);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    r
}

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn core_fixtures() -> PathBuf {
    workspace().join("crates/core/tests/fixtures")
}

pub fn shipped_model() -> PathBuf {
    workspace().join("models/niqe_pristine.json")
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Toy benchmark of `count` natural images under `dir/bench`.
pub fn toy_bench(dir: &Path, count: usize) -> PathBuf {
    let bench = dir.join("bench");
    let from = core_fixtures().join("natural/test");
    ok([
        "synth",
        "--from",
        s(&from),
        "--count",
        &count.to_string(),
        "--out",
        s(&bench),
    ]);
    bench
}

pub fn toy_method_flags(bench: &Path) -> Vec<String> {
    ["identity", "blurred", "noisy"]
        .iter()
        .flat_map(|m| ["--method".to_string(), format!("{m}={}", bench.join("methods").join(m).display())])
        .collect()
}

/// Completes every session of the plan with scores around a per-method base.
pub fn rate_all(plan: &Path, log: &Path, base: impl Fn(&str) -> i64, seed: u64) {
    let plan = StudyPlan::load(plan).unwrap();
    let engine = StudyEngine::with_log(plan, log).unwrap().with_clock(|| 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while let Ok(session) = engine.claim_session() {
        while let NextItem::Stimulus { stimulus_token, .. } = engine.next_item(&session).unwrap() {
            let method = engine.resolve_token(&stimulus_token).unwrap().method.clone();
            let score = (base(&method) + rng.random_range(-1..=1)).clamp(1, 4);
            engine.record_rating(&session, &stimulus_token, score).unwrap();
        }
    }
}
