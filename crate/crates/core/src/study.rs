//! Human-opinion study: balanced session planning, blinded stimulus delivery,
//! an append-only rating log, and MOS aggregation.
//!
//! Raters only ever see opaque tokens and session ids. The mapping back to
//! `(method, image)` lives in the plan, which stays on the server.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCORE_MIN: u8 = 1;
pub const SCORE_MAX: u8 = 4;
pub const SCALE_LABELS: [&str; 4] = ["Definitely fake", "Probably fake", "Probably real", "Definitely real"];

const TOKEN_HEX_LEN: usize = 16;
const MAX_TOKEN_ATTEMPTS: u32 = 1000;

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("infeasible study parameters: {0}")]
    Infeasible(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("all {0} sessions have been claimed")]
    NoFreeSession(usize),
    #[error("score {0} is outside 1..=4")]
    InvalidScore(i64),
    #[error("stimulus token does not belong to this session or has not been served yet")]
    TokenMismatch,
    #[error("stimulus {stimulus_index} of session `{session}` was already rated")]
    Duplicate { session: String, stimulus_index: usize },
    #[error("rating log line {line}: {message}")]
    BadLog { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid plan file: {0}")]
    BadPlan(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StudyError + '_ {
    move |source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub method: String,
    pub image_id: String,
    pub token: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterAssignment {
    pub session_id: String,
    pub stimuli: Vec<Stimulus>,
}

/// Server-side study plan. Contains method identities; never send it to a
/// client as is (see [`StudyPlan::client_view`]).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub methods: Vec<String>,
    pub images: Vec<String>,
    pub images_per_rater: usize,
    pub seed: u64,
    pub assignments: Vec<RaterAssignment>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClientSession {
    pub session_id: String,
    pub stimulus_tokens: Vec<String>,
}

fn contains_any(s: &str, needles: &[String]) -> bool {
    let lower = s.to_ascii_lowercase();
    needles
        .iter()
        .any(|n| !n.is_empty() && lower.contains(&n.to_ascii_lowercase()))
}

/// Hex digest of the parts, re-salted until it contains none of `avoid`.
fn blinded_id(parts: &[&[u8]], avoid: &[String]) -> Result<String, StudyError> {
    for nonce in 0..MAX_TOKEN_ATTEMPTS {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        h.update(nonce.to_le_bytes());
        let id = hex::encode(h.finalize())[..TOKEN_HEX_LEN].to_string();
        if !contains_any(&id, avoid) {
            return Ok(id);
        }
    }
    Err(StudyError::Infeasible(
        "cannot generate tokens free of method names; use longer method identifiers".into(),
    ))
}

fn check_unique(kind: &str, items: &[String]) -> Result<(), StudyError> {
    let mut seen = BTreeSet::new();
    for i in items {
        if i.is_empty() {
            return Err(StudyError::Infeasible(format!("empty {kind} identifier")));
        }
        if !seen.insert(i) {
            return Err(StudyError::Infeasible(format!("duplicate {kind} `{i}`")));
        }
    }
    Ok(())
}

/// Assigns `images_per_rater` images to every rater, always preferring the
/// least-covered images (random among equals), and shows each rater every
/// method on each assigned image in a shuffled order.
pub fn build_plan(
    methods: &[String],
    images: &[String],
    raters: usize,
    images_per_rater: usize,
    seed: u64,
) -> Result<StudyPlan, StudyError> {
    if methods.is_empty() || images.is_empty() || raters == 0 || images_per_rater == 0 {
        return Err(StudyError::Infeasible(
            "methods, images, raters and images per rater must all be non-zero".into(),
        ));
    }
    if images_per_rater > images.len() {
        return Err(StudyError::Infeasible(format!(
            "{images_per_rater} images per rater but only {} images",
            images.len()
        )));
    }
    check_unique("method", methods)?;
    check_unique("image", images)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let salt: [u8; 16] = rng.random();
    let mut coverage = vec![0usize; images.len()];
    let mut assignments = Vec::with_capacity(raters);
    for r in 0..raters {
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.shuffle(&mut rng);
        order.sort_by_key(|&i| coverage[i]);
        let chosen = &order[..images_per_rater];
        let mut pairs: Vec<(usize, usize)> = chosen
            .iter()
            .flat_map(|&i| (0..methods.len()).map(move |m| (m, i)))
            .collect();
        pairs.shuffle(&mut rng);
        for &i in chosen {
            coverage[i] += 1;
        }

        let r_bytes = (r as u64).to_le_bytes();
        let session_id = blinded_id(&[&salt, b"session", &r_bytes], methods)?;
        let stimuli = pairs
            .into_iter()
            .enumerate()
            .map(|(k, (m, i))| {
                let token = blinded_id(&[&salt, session_id.as_bytes(), &(k as u64).to_le_bytes()], methods)?;
                Ok(Stimulus {
                    method: methods[m].clone(),
                    image_id: images[i].clone(),
                    token,
                })
            })
            .collect::<Result<Vec<_>, StudyError>>()?;
        assignments.push(RaterAssignment { session_id, stimuli });
    }
    Ok(StudyPlan {
        methods: methods.to_vec(),
        images: images.to_vec(),
        images_per_rater,
        seed,
        assignments,
    })
}

impl StudyPlan {
    pub fn raters(&self) -> usize {
        self.assignments.len()
    }

    /// Sessions and tokens only, safe to expose to raters.
    pub fn client_view(&self) -> Vec<ClientSession> {
        self.assignments
            .iter()
            .map(|a| ClientSession {
                session_id: a.session_id.clone(),
                stimulus_tokens: a.stimuli.iter().map(|s| s.token.clone()).collect(),
            })
            .collect()
    }

    /// Number of raters assigned to each image.
    pub fn image_coverage(&self) -> BTreeMap<&str, usize> {
        let mut cov: BTreeMap<&str, usize> = self.images.iter().map(|i| (i.as_str(), 0)).collect();
        for a in &self.assignments {
            let seen: BTreeSet<&str> = a.stimuli.iter().map(|s| s.image_id.as_str()).collect();
            for i in seen {
                *cov.get_mut(i).expect("planned image") += 1;
            }
        }
        cov
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, StudyError> {
        let plan: Self = serde_json::from_str(text).map_err(|e| StudyError::BadPlan(e.to_string()))?;
        let mut tokens = BTreeSet::new();
        let mut sessions = BTreeSet::new();
        for a in &plan.assignments {
            if !sessions.insert(&a.session_id) {
                return Err(StudyError::BadPlan(format!("duplicate session `{}`", a.session_id)));
            }
            for s in &a.stimuli {
                if !tokens.insert(&s.token) {
                    return Err(StudyError::BadPlan(format!("duplicate token `{}`", s.token)));
                }
            }
        }
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<(), StudyError> {
        std::fs::write(path, self.to_json() + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, StudyError> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    fn index(&self) -> PlanIndex {
        let mut sessions = HashMap::new();
        let mut tokens = HashMap::new();
        for (r, a) in self.assignments.iter().enumerate() {
            sessions.insert(a.session_id.clone(), r);
            for (k, s) in a.stimuli.iter().enumerate() {
                tokens.insert(s.token.clone(), (r, k));
            }
        }
        PlanIndex { sessions, tokens }
    }
}

struct PlanIndex {
    sessions: HashMap<String, usize>,
    tokens: HashMap<String, (usize, usize)>,
}

/// One line of the rating log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLine {
    pub session: String,
    pub stim: String,
    pub score: u8,
    pub ts: u64,
}

/// A rating resolved against the plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub session_id: String,
    pub method: String,
    pub image_id: String,
    pub score: u8,
    pub timestamp: u64,
    pub stimulus_index: usize,
}

pub fn parse_log(text: &str) -> Result<Vec<LogLine>, StudyError> {
    let mut out = Vec::new();
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogLine>(line) {
            Ok(l) => out.push(l),
            // A crash mid-write can leave an unterminated final line.
            Err(_) if !complete && n + 1 == lines.len() => {}
            Err(e) => {
                return Err(StudyError::BadLog {
                    line: n + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<Vec<LogLine>, StudyError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    parse_log(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

/// Resolves log lines against the plan. Later lines for an already rated
/// stimulus are dropped (first write wins).
pub fn resolve_events(plan: &StudyPlan, lines: &[LogLine]) -> Result<Vec<RatingEvent>, StudyError> {
    let idx = plan.index();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, l) in lines.iter().enumerate() {
        let bad = |message: String| StudyError::BadLog { line: n + 1, message };
        let &r = idx
            .sessions
            .get(&l.session)
            .ok_or_else(|| bad(format!("unknown session `{}`", l.session)))?;
        let &(tr, k) = idx
            .tokens
            .get(&l.stim)
            .ok_or_else(|| bad(format!("unknown stimulus token `{}`", l.stim)))?;
        if tr != r {
            return Err(bad("token belongs to another session".into()));
        }
        if !(SCORE_MIN..=SCORE_MAX).contains(&l.score) {
            return Err(bad(format!("score {} outside 1..=4", l.score)));
        }
        if !seen.insert((r, k)) {
            continue;
        }
        let s = &plan.assignments[r].stimuli[k];
        out.push(RatingEvent {
            session_id: l.session.clone(),
            method: s.method.clone(),
            image_id: s.image_id.clone(),
            score: l.score,
            timestamp: l.ts,
            stimulus_index: k,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextItem {
    Stimulus {
        stimulus_token: String,
        stimulus_index: usize,
        image_url: String,
        progress: Progress,
    },
    Done {
        done: bool,
        progress: Progress,
    },
}

struct EngineState {
    next_unclaimed: usize,
    rated: Vec<Vec<bool>>,
    done: Vec<usize>,
    log: Option<File>,
    log_path: Option<PathBuf>,
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Live study state. Plan lookups are lock-free; rating writes go through a
/// single mutex-guarded appender.
pub struct StudyEngine {
    plan: StudyPlan,
    index: PlanIndex,
    state: Mutex<EngineState>,
    clock: Clock,
}

impl StudyEngine {
    /// Engine without persistence (events are kept only in memory state).
    pub fn in_memory(plan: StudyPlan) -> Self {
        Self::build(plan, None, None, Vec::new()).expect("empty replay cannot fail")
    }

    /// Opens (or creates) the rating log and replays any events already in it,
    /// so a restarted server resumes where it stopped.
    pub fn with_log(plan: StudyPlan, log_path: &Path) -> Result<Self, StudyError> {
        let existing = resolve_events(&plan, &read_log(log_path)?)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .map_err(io_err(log_path))?;
        Self::build(plan, Some(file), Some(log_path.to_path_buf()), existing)
    }

    fn build(plan: StudyPlan, log: Option<File>, log_path: Option<PathBuf>, replay: Vec<RatingEvent>) -> Result<Self, StudyError> {
        let index = plan.index();
        let mut rated: Vec<Vec<bool>> = plan.assignments.iter().map(|a| vec![false; a.stimuli.len()]).collect();
        let mut done = vec![0; plan.assignments.len()];
        let mut claimed = 0;
        for e in &replay {
            let r = index.sessions[&e.session_id];
            rated[r][e.stimulus_index] = true;
            done[r] += 1;
            claimed = claimed.max(r + 1);
        }
        Ok(Self {
            plan,
            index,
            state: Mutex::new(EngineState {
                next_unclaimed: claimed,
                rated,
                done,
                log,
                log_path,
            }),
            clock: Box::new(wall_clock_ms),
        })
    }

    /// Replaces the timestamp source (tests use a fixed clock).
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn plan(&self) -> &StudyPlan {
        &self.plan
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, EngineState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn rater(&self, session: &str) -> Result<usize, StudyError> {
        self.index
            .sessions
            .get(session)
            .copied()
            .ok_or_else(|| StudyError::UnknownSession(session.to_string()))
    }

    /// Hands out the next session nobody has started.
    pub fn claim_session(&self) -> Result<String, StudyError> {
        let mut st = self.lock();
        if st.next_unclaimed >= self.plan.assignments.len() {
            return Err(StudyError::NoFreeSession(self.plan.assignments.len()));
        }
        let id = self.plan.assignments[st.next_unclaimed].session_id.clone();
        st.next_unclaimed += 1;
        Ok(id)
    }

    pub fn next_item(&self, session: &str) -> Result<NextItem, StudyError> {
        let r = self.rater(session)?;
        let st = self.lock();
        let total = st.rated[r].len();
        let progress = Progress { done: st.done[r], total };
        Ok(match st.rated[r].iter().position(|&x| !x) {
            None => NextItem::Done { done: true, progress },
            Some(k) => {
                let token = self.plan.assignments[r].stimuli[k].token.clone();
                NextItem::Stimulus {
                    image_url: format!("/stimuli/{token}"),
                    stimulus_token: token,
                    stimulus_index: k,
                    progress,
                }
            }
        })
    }

    /// Method and image behind a token, for serving the stimulus file.
    pub fn resolve_token(&self, token: &str) -> Option<&Stimulus> {
        self.index
            .tokens
            .get(token)
            .map(|&(r, k)| &self.plan.assignments[r].stimuli[k])
    }

    pub fn record_rating(&self, session: &str, token: &str, score: i64) -> Result<RatingEvent, StudyError> {
        if !(SCORE_MIN as i64..=SCORE_MAX as i64).contains(&score) {
            return Err(StudyError::InvalidScore(score));
        }
        let r = self.rater(session)?;
        let &(tr, k) = self.index.tokens.get(token).ok_or(StudyError::TokenMismatch)?;
        if tr != r {
            return Err(StudyError::TokenMismatch);
        }
        let mut st = self.lock();
        if st.rated[r][k] {
            return Err(StudyError::Duplicate {
                session: session.to_string(),
                stimulus_index: k,
            });
        }
        // Only the current stimulus or earlier ones may be rated.
        let current = st.rated[r].iter().position(|&x| !x).unwrap_or(st.rated[r].len());
        if k > current {
            return Err(StudyError::TokenMismatch);
        }
        let ts = (self.clock)();
        let line = LogLine {
            session: session.to_string(),
            stim: token.to_string(),
            score: score as u8,
            ts,
        };
        let EngineState { log, log_path, .. } = &mut *st;
        if let (Some(f), Some(path)) = (log.as_mut(), log_path.as_ref()) {
            let mut text = serde_json::to_string(&line).expect("log line serializes");
            text.push('\n');
            f.write_all(text.as_bytes())
                .and_then(|_| f.flush())
                .map_err(io_err(path))?;
        }
        st.rated[r][k] = true;
        st.done[r] += 1;
        let s = &self.plan.assignments[r].stimuli[k];
        Ok(RatingEvent {
            session_id: session.to_string(),
            method: s.method.clone(),
            image_id: s.image_id.clone(),
            score: score as u8,
            timestamp: ts,
            stimulus_index: k,
        })
    }

    /// Events recorded so far, resolved from the log file.
    pub fn snapshot(&self) -> Result<Vec<RatingEvent>, StudyError> {
        let path = self.lock().log_path.clone();
        match path {
            Some(p) => resolve_events(&self.plan, &read_log(&p)?),
            None => Ok(Vec::new()),
        }
    }
}

/// Vote summary for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingAggregate {
    pub method: String,
    pub mos: f64,
    pub histogram: [f64; 4],
    pub n_votes: usize,
}

/// MOS and normalized vote histogram per method, sorted by method name.
pub fn aggregate(events: &[RatingEvent]) -> Vec<RatingAggregate> {
    let mut counts: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
    for e in events {
        counts.entry(&e.method).or_default()[(e.score - SCORE_MIN) as usize] += 1;
    }
    counts
        .into_iter()
        .map(|(method, c)| {
            let n: usize = c.iter().sum();
            let histogram = c.map(|k| k as f64 / n as f64);
            let mos = c
                .iter()
                .enumerate()
                .map(|(i, &k)| (i + 1) as f64 * k as f64)
                .sum::<f64>()
                / n as f64;
            RatingAggregate {
                method: method.to_string(),
                mos,
                histogram,
                n_votes: n,
            }
        })
        .collect()
}

/// Mean score of one output minus its image's grand mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteredScore {
    pub method: String,
    pub image_id: String,
    pub mean: f64,
    pub centered: f64,
    pub n_votes: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CenteredScores {
    pub scores: Vec<CenteredScore>,
    /// Images rated by fewer than two raters; excluded from `scores`.
    pub under_rated: Vec<String>,
}

pub fn per_image_centered(events: &[RatingEvent]) -> CenteredScores {
    let mut per_image: BTreeMap<&str, Vec<&RatingEvent>> = BTreeMap::new();
    for e in events {
        per_image.entry(&e.image_id).or_default().push(e);
    }
    let mut out = CenteredScores::default();
    for (image, evs) in per_image {
        let raters: BTreeSet<&str> = evs.iter().map(|e| e.session_id.as_str()).collect();
        if raters.len() < 2 {
            out.under_rated.push(image.to_string());
            continue;
        }
        let grand = evs.iter().map(|e| e.score as f64).sum::<f64>() / evs.len() as f64;
        let mut per_method: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for e in &evs {
            let m = per_method.entry(&e.method).or_default();
            m.0 += e.score as f64;
            m.1 += 1;
        }
        for (method, (sum, n)) in per_method {
            let mean = sum / n as f64;
            out.scores.push(CenteredScore {
                method: method.to_string(),
                image_id: image.to_string(),
                mean,
                centered: mean - grand,
                n_votes: n,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n_events: usize,
    pub aggregates: Vec<RatingAggregate>,
    pub centered: CenteredScores,
}

pub fn report(events: &[RatingEvent]) -> StudyReport {
    StudyReport {
        n_events: events.len(),
        aggregates: aggregate(events),
        centered: per_image_centered(events),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i:02}")).collect()
    }

    fn ev(session: &str, method: &str, image: &str, score: u8) -> RatingEvent {
        RatingEvent {
            session_id: session.into(),
            method: method.into(),
            image_id: image.into(),
            score,
            timestamp: 0,
            stimulus_index: 0,
        }
    }

    #[test]
    fn default_plan_shape() {
        let plan = build_plan(&names("method", 12), &names("img", 40), 35, 20, 7).unwrap();
        assert_eq!(plan.raters(), 35);
        for a in &plan.assignments {
            assert_eq!(a.stimuli.len(), 240);
            let pairs: BTreeSet<(&str, &str)> = a.stimuli.iter().map(|s| (s.method.as_str(), s.image_id.as_str())).collect();
            assert_eq!(pairs.len(), 240);
        }
        let cov: Vec<usize> = plan.image_coverage().values().copied().collect();
        assert!(cov.iter().max().unwrap() - cov.iter().min().unwrap() <= 1);
        assert_eq!(cov.iter().sum::<usize>(), 35 * 20);
    }

    #[test]
    fn trivial_plan_and_errors() {
        let plan = build_plan(&names("m", 1), &names("i", 1), 1, 1, 0).unwrap();
        assert_eq!(plan.assignments[0].stimuli.len(), 1);
        assert!(build_plan(&names("m", 2), &names("i", 3), 2, 4, 0).is_err());
        assert!(build_plan(&[], &names("i", 3), 2, 1, 0).is_err());
        assert!(build_plan(&["a".into(), "a".into()], &names("i", 3), 2, 1, 0).is_err());
    }

    #[test]
    fn tokens_avoid_short_method_names() {
        let methods: Vec<String> = ["a", "b", "0", "f1"].iter().map(|s| s.to_string()).collect();
        let plan = build_plan(&methods, &names("i", 5), 4, 5, 3).unwrap();
        let view = serde_json::to_string(&plan.client_view()).unwrap();
        for a in &plan.assignments {
            assert!(!contains_any(&a.session_id, &methods));
            for s in &a.stimuli {
                assert!(!contains_any(&s.token, &methods));
            }
        }
        assert!(!view.contains("\"a\"") && !view.contains("method"));
    }

    #[test]
    fn engine_flow_and_errors() {
        let plan = build_plan(&names("method", 2), &names("img", 2), 1, 1, 1).unwrap();
        let eng = StudyEngine::in_memory(plan).with_clock(|| 42);
        assert!(matches!(eng.next_item("nope"), Err(StudyError::UnknownSession(_))));
        let s = eng.claim_session().unwrap();
        assert!(matches!(eng.claim_session(), Err(StudyError::NoFreeSession(1))));
        let NextItem::Stimulus { stimulus_token: t0, stimulus_index: 0, .. } = eng.next_item(&s).unwrap() else {
            panic!("expected first stimulus");
        };
        assert!(matches!(eng.record_rating(&s, &t0, 5), Err(StudyError::InvalidScore(5))));
        let second = eng.plan().assignments[0].stimuli[1].token.clone();
        assert!(matches!(eng.record_rating(&s, &second, 2), Err(StudyError::TokenMismatch)));
        assert_eq!(eng.record_rating(&s, &t0, 3).unwrap().timestamp, 42);
        assert!(matches!(eng.record_rating(&s, &t0, 3), Err(StudyError::Duplicate { .. })));
        eng.record_rating(&s, &second, 1).unwrap();
        assert!(matches!(eng.next_item(&s).unwrap(), NextItem::Done { .. }));
    }

    #[test]
    fn aggregate_examples() {
        let all4 = [ev("s", "m", "i", 4), ev("t", "m", "i", 4), ev("u", "m", "i", 4)];
        let a = aggregate(&all4);
        assert_eq!(a[0].mos, 4.0);
        assert_eq!(a[0].histogram, [0.0, 0.0, 0.0, 1.0]);
        let spread: Vec<RatingEvent> = (1..=4).map(|k| ev("s", "m", "i", k)).collect();
        let a = aggregate(&spread);
        assert_eq!(a[0].mos, 2.5);
        assert_eq!(a[0].histogram, [0.25; 4]);
        assert!(aggregate(&[]).is_empty());
    }

    #[test]
    fn centering_examples() {
        let same = [ev("s", "a", "i", 3), ev("t", "b", "i", 3)];
        assert!(per_image_centered(&same).scores.iter().all(|c| c.centered == 0.0));
        let split = [ev("s", "a", "i", 2), ev("t", "b", "i", 4)];
        let c = per_image_centered(&split);
        assert_eq!((c.scores[0].centered, c.scores[1].centered), (-1.0, 1.0));
        let lonely = [ev("s", "a", "j", 2), ev("s", "b", "j", 4)];
        assert_eq!(per_image_centered(&lonely).under_rated, vec!["j".to_string()]);
    }

    #[test]
    fn truncated_final_line_is_ignored() {
        let text = "{\"session\":\"s\",\"stim\":\"t\",\"score\":2,\"ts\":1}\n{\"session\":\"s\",\"st";
        assert_eq!(parse_log(text).unwrap().len(), 1);
        assert!(parse_log("garbage\n").is_err());
    }
}
