//! Append-only audit sessions.
//!
//! Each session is one JSONL file: a `created` header, then `policy_change`
//! and `observation` events in order. Every observation stores the snapshot
//! it produced, and loading a session replays the log and checks each
//! snapshot bit for bit. An `index.jsonl` next to the logs lists sessions.
//!
//! Writers must name the observation they are submitting (`expected_k`,
//! one more than the current count) or the count a policy change follows.
//! A stale token is a conflict, so two clients cannot both append step `k`,
//! and a policy change can never be applied to an observation already seen.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::confidence::{default_interval_spec, validate_c_policy, BoundTracker, CPolicy, Interval, IntervalTracker};
use crate::config::TestConfig;
use crate::error::{Error, Result};
use crate::martingale::{Decision, StakePolicy};
use crate::sequential::SequentialTest;

const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub cfg: TestConfig,
    pub policy: StakePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSnapshot {
    pub at_k: Interval,
    pub running: Option<Interval>,
    pub last_nonempty: Interval,
    pub empty: bool,
}

/// Everything a client sees after step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: u64,
    #[serde(with = "crate::serde_ext")]
    pub log_m: f64,
    #[serde(with = "crate::serde_ext")]
    pub log_m_max: f64,
    pub decision: Decision,
    pub absorbed: bool,
    /// Stake committed for this step before `t` was seen (effective stake
    /// for mixtures); `None` at `k = 0`.
    #[serde(with = "crate::serde_ext::option")]
    pub stake: Option<f64>,
    /// Running upper confidence bound; `None` when the policy has no
    /// mu-family.
    #[serde(with = "crate::serde_ext::option")]
    pub bound: Option<f64>,
    /// Upper bound from the current value alone.
    #[serde(with = "crate::serde_ext::option")]
    pub bound_at_k: Option<f64>,
    pub interval: Option<IntervalSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Created {
        id: String,
        cfg: TestConfig,
        created_at: u64,
    },
    PolicyChange {
        version: u32,
        policy: StakePolicy,
        /// Number of observations before the change takes effect.
        at_k: u64,
        at: u64,
    },
    Observation {
        k: u64,
        t: f64,
        policy_version: u32,
        snapshot: Snapshot,
        at: u64,
        /// Opaque client data (time, cost, item reference).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meta: Option<serde_json::Value>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub cfg: TestConfig,
    pub policy: StakePolicy,
    pub policy_version: u32,
    #[serde(flatten)]
    pub snapshot: Snapshot,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAck {
    pub version: u32,
    pub at_k: u64,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Grid used to vet mu-dependent families when a session starts.
fn policy_grid(cfg: &TestConfig) -> Option<Vec<f64>> {
    let (t0, t1) = (cfg.tau0?, cfg.tau1?);
    Some((1..200).map(|i| t0 + (t1 - t0) * i as f64 / 200.0).collect())
}

fn vet_policy(cfg: &TestConfig, policy: &StakePolicy) -> Result<()> {
    policy.validate(cfg)?;
    if let (StakePolicy::MuFamily(family), Some(grid)) = (policy, policy_grid(cfg)) {
        let report = validate_c_policy(family, cfg, &grid)?;
        if let Some(v) = report.violation {
            return Err(Error::InvalidPolicy(format!("{} at mu = {}", v.reason, v.mu)));
        }
    }
    Ok(())
}

/// In-memory state of one session, rebuilt from its events.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    cfg: TestConfig,
    policy: StakePolicy,
    version: u32,
    test: SequentialTest,
    bound: Option<BoundTracker>,
    interval: Option<IntervalTracker>,
    snapshot: Snapshot,
    events: Vec<Event>,
    created_at: u64,
    updated_at: u64,
}

impl Session {
    fn start(id: String, cfg: TestConfig, policy: StakePolicy, created_at: u64) -> Result<Self> {
        cfg.validate()?;
        vet_policy(&cfg, &policy)?;
        let test = SequentialTest::new(cfg.clone(), policy.clone())?;
        let bound = match CPolicy::from_stake_policy(&policy) {
            Some(family) => Some(BoundTracker::new(cfg.clone(), family)?),
            None => None,
        };
        let interval = match (cfg.tau0, cfg.tau1) {
            (Some(_), Some(_)) => Some(IntervalTracker::new(&cfg, &default_interval_spec())?),
            _ => None,
        };
        let mut s = Self {
            id,
            cfg,
            policy,
            version: 0,
            test,
            bound,
            interval,
            snapshot: Snapshot {
                k: 0,
                log_m: 0.0,
                log_m_max: 0.0,
                decision: Decision::Continue,
                absorbed: false,
                stake: None,
                bound: None,
                bound_at_k: None,
                interval: None,
            },
            events: Vec::new(),
            created_at,
            updated_at: created_at,
        };
        s.snapshot = s.current_snapshot(None);
        Ok(s)
    }

    fn current_snapshot(&self, stake: Option<f64>) -> Snapshot {
        let snap = self.test.snapshot();
        Snapshot {
            k: snap.k,
            log_m: snap.log_m,
            log_m_max: snap.log_m_max,
            decision: snap.decision,
            absorbed: snap.log_m == f64::NEG_INFINITY,
            stake,
            bound: self.bound.as_ref().map(|b| b.running_min()),
            bound_at_k: self.bound.as_ref().map(|b| b.at_k()),
            interval: self.interval.as_ref().map(|i| {
                let r = i.result();
                IntervalSnapshot {
                    at_k: r.at_k,
                    running: r.running,
                    last_nonempty: r.last_nonempty,
                    empty: r.is_empty(),
                }
            }),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn k(&self) -> u64 {
        self.test.k()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            id: self.id.clone(),
            cfg: self.cfg.clone(),
            policy: self.policy.clone(),
            policy_version: self.version,
            snapshot: self.snapshot,
            created_at: self.created_at,
            updated_at: self.updated_at,
        }
    }

    /// Applies an observation without touching storage. The state is left
    /// unchanged on error.
    fn observe(&mut self, t: f64, meta: Option<serde_json::Value>, at: u64) -> Result<Event> {
        let k = self.k() + 1;
        self.cfg.check_observation(k, t)?;
        let stake = self.test.next_stake().ok();
        let mut next = self.clone();
        next.test.push(t)?;
        if let Some(b) = next.bound.as_mut() {
            b.push(t)?;
        }
        if let Some(i) = next.interval.as_mut() {
            i.observe(t)?;
        }
        next.snapshot = next.current_snapshot(stake);
        next.updated_at = at;
        let event = Event::Observation {
            k,
            t,
            policy_version: next.version,
            snapshot: next.snapshot,
            at,
            meta,
        };
        next.events.push(event.clone());
        *self = next;
        Ok(event)
    }

    fn change_policy(&mut self, policy: StakePolicy, at: u64) -> Result<Event> {
        vet_policy(&self.cfg, &policy)?;
        let mut next = self.clone();
        next.test.switch_policy(policy.clone())?;
        next.bound = match (next.bound.take(), CPolicy::from_stake_policy(&policy)) {
            (Some(mut b), Some(family)) => {
                b.switch(family)?;
                Some(b)
            }
            // without a family the bound can no longer be extended
            _ => None,
        };
        next.version += 1;
        next.policy = policy.clone();
        next.updated_at = at;
        next.snapshot.bound = next.bound.as_ref().map(|b| b.running_min());
        next.snapshot.bound_at_k = next.bound.as_ref().map(|b| b.at_k());
        let event = Event::PolicyChange {
            version: next.version,
            policy,
            at_k: next.k(),
            at,
        };
        next.events.push(event.clone());
        *self = next;
        Ok(event)
    }

    /// Rebuilds a session from its log, checking every stored snapshot and
    /// the ordering rules.
    pub fn replay(events: &[Event]) -> Result<Self> {
        let mismatch = |index: usize, reason: String| Error::ReplayMismatch { index, reason };
        let (id, cfg, created_at) = match events.first() {
            Some(Event::Created { id, cfg, created_at }) => (id.clone(), cfg.clone(), *created_at),
            _ => return Err(mismatch(0, "log must start with a created event".into())),
        };
        let (policy, at) = match events.get(1) {
            Some(Event::PolicyChange {
                version: 1,
                policy,
                at_k: 0,
                at,
            }) => (policy.clone(), *at),
            _ => return Err(mismatch(1, "second event must be policy version 1 at k = 0".into())),
        };
        let mut s = Session::start(id, cfg, policy, created_at)?;
        s.version = 1;
        s.updated_at = at;
        s.events = events[..2].to_vec();
        for (i, ev) in events.iter().enumerate().skip(2) {
            match ev {
                Event::Created { .. } => return Err(mismatch(i, "duplicate created event".into())),
                Event::PolicyChange {
                    version,
                    policy,
                    at_k,
                    at,
                } => {
                    if *version != s.version + 1 || *at_k != s.k() {
                        return Err(mismatch(i, format!("policy version {version} at k = {at_k} out of order")));
                    }
                    s.change_policy(policy.clone(), *at)?;
                }
                Event::Observation {
                    k,
                    t,
                    policy_version,
                    snapshot,
                    at,
                    meta,
                } => {
                    if *k != s.k() + 1 || *policy_version != s.version {
                        return Err(mismatch(i, format!("observation k = {k} under version {policy_version} out of order")));
                    }
                    s.observe(*t, meta.clone(), *at)?;
                    if s.snapshot != *snapshot {
                        return Err(mismatch(
                            i,
                            format!("snapshot at k = {k} differs: stored {snapshot:?}, replayed {:?}", s.snapshot),
                        ));
                    }
                }
            }
        }
        Ok(s)
    }
}

/// Reads a session log.
pub fn read_log(path: &Path) -> Result<Vec<Event>> {
    let file = File::open(path)?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: Event = serde_json::from_str(&line)
            .map_err(|e| Error::Storage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    id: String,
    created_at: u64,
}

/// One live session: writers serialize on `writer`, readers only clone
/// the last published state.
#[derive(Debug)]
struct Entry {
    writer: Mutex<Session>,
    published: RwLock<Arc<SessionState>>,
}

impl Entry {
    fn new(session: Session) -> Self {
        Self {
            published: RwLock::new(Arc::new(session.state())),
            writer: Mutex::new(session),
        }
    }

    fn publish(&self, session: &Session) {
        *self.published.write().expect("state lock") = Arc::new(session.state());
    }
}

/// File-backed collection of sessions.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    index_lock: Mutex<()>,
}

impl SessionStore {
    /// Opens (or creates) a store directory and replays every indexed log.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let index = dir.join(INDEX_FILE);
        if index.exists() {
            let file = File::open(&index)?;
            for line in BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: IndexEntry =
                    serde_json::from_str(&line).map_err(|e| Error::Storage(format!("index: {e}")))?;
                let events = read_log(&Self::log_path_in(&dir, &entry.id))?;
                let session = Session::replay(&events)?;
                sessions.insert(entry.id, Arc::new(Entry::new(session)));
            }
        }
        Ok(Self {
            dir,
            sessions: RwLock::new(sessions),
            index_lock: Mutex::new(()),
        })
    }

    fn log_path_in(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.jsonl"))
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        Self::log_path_in(&self.dir, id)
    }

    fn append(&self, id: &str, events: &[Event]) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.log_path(id))?;
        let mut buf = Vec::new();
        for ev in events {
            serde_json::to_writer(&mut buf, ev).map_err(|e| Error::Storage(e.to_string()))?;
            buf.push(b'\n');
        }
        f.write_all(&buf)?;
        f.sync_data()?;
        Ok(())
    }

    fn get(&self, id: &str) -> Result<Arc<Entry>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::SessionNotFound(id.to_string()))
    }

    pub fn create(&self, req: CreateSession) -> Result<SessionState> {
        let id = uuid::Uuid::new_v4().to_string();
        let at = now_millis();
        let mut session = Session::start(id.clone(), req.cfg.clone(), req.policy.clone(), at)?;
        let created = Event::Created {
            id: id.clone(),
            cfg: req.cfg,
            created_at: at,
        };
        let first = Event::PolicyChange {
            version: 1,
            policy: req.policy,
            at_k: 0,
            at,
        };
        session.version = 1;
        session.events = vec![created, first];
        self.append(&id, &session.events)?;
        {
            let _g = self.index_lock.lock().expect("index lock");
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.dir.join(INDEX_FILE))?;
            let line = serde_json::to_string(&IndexEntry {
                id: id.clone(),
                created_at: at,
            })
            .map_err(|e| Error::Storage(e.to_string()))?;
            writeln!(f, "{line}")?;
            f.sync_data()?;
        }
        let state = session.state();
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id, Arc::new(Entry::new(session)));
        Ok(state)
    }

    /// Appends observation number `expected_k`. The event is on disk before
    /// this returns.
    pub fn append_observation(
        &self,
        id: &str,
        t: f64,
        expected_k: u64,
        meta: Option<serde_json::Value>,
    ) -> Result<Snapshot> {
        let entry = self.get(id)?;
        let mut s = entry.writer.lock().expect("session lock");
        if expected_k != s.k() + 1 {
            return Err(Error::Conflict {
                expected: expected_k,
                actual: s.k() + 1,
            });
        }
        let mut next = s.clone();
        let ev = next.observe(t, meta, now_millis())?;
        self.append(id, std::slice::from_ref(&ev))?;
        *s = next;
        entry.publish(&s);
        Ok(s.snapshot)
    }

    /// Switches policy after the first `expected_k` observations.
    pub fn change_policy(&self, id: &str, policy: StakePolicy, expected_k: u64) -> Result<PolicyAck> {
        let entry = self.get(id)?;
        let mut s = entry.writer.lock().expect("session lock");
        if expected_k != s.k() {
            return Err(Error::Conflict {
                expected: expected_k,
                actual: s.k(),
            });
        }
        let mut next = s.clone();
        let ev = next.change_policy(policy, now_millis())?;
        self.append(id, std::slice::from_ref(&ev))?;
        *s = next;
        entry.publish(&s);
        Ok(PolicyAck {
            version: s.version,
            at_k: s.k(),
        })
    }

    pub fn state(&self, id: &str) -> Result<Arc<SessionState>> {
        let entry = self.get(id)?;
        let state = entry.published.read().expect("state lock").clone();
        Ok(state)
    }

    pub fn trajectory(&self, id: &str) -> Result<Vec<Event>> {
        Ok(self.get(id)?.writer.lock().expect("session lock").events.clone())
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("session map lock").keys().cloned().collect();
        ids.sort();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::MixtureSpec;

    fn audit_request() -> CreateSession {
        CreateSession {
            cfg: TestConfig::bounded(0.05, 0.0, 1.0, 0.05),
            policy: StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0)),
        }
    }

    #[test]
    fn fresh_state() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let st = store.create(audit_request()).unwrap();
        assert_eq!(st.snapshot.k, 0);
        assert_eq!(st.snapshot.log_m, 0.0);
        assert_eq!(st.snapshot.decision, Decision::Continue);
        assert_eq!(st.snapshot.bound, Some(f64::INFINITY));
        let json = serde_json::to_value(&st).unwrap();
        assert_eq!(json["k"], 0);
        assert_eq!(json["log_m"], 0.0);
        assert_eq!(json["decision"], "Continue");
        assert_eq!(json["bound"], "inf");
        let back: SessionState = serde_json::from_value(json).unwrap();
        assert_eq!(back, st);
        assert_eq!(st.policy_version, 1);
    }

    #[test]
    fn tokens_and_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(audit_request()).unwrap().id;
        assert!(matches!(
            store.append_observation(&id, 0.02, 2, None),
            Err(Error::Conflict { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            store.append_observation(&id, 1.5, 1, None),
            Err(Error::OutOfBounds { .. })
        ));
        assert_eq!(store.trajectory(&id).unwrap().len(), 2);
        let snap = store.append_observation(&id, 0.02, 1, None).unwrap();
        assert_eq!(snap.k, 1);
        assert!((snap.stake.unwrap() - 0.8).abs() < 1e-13);
        assert!(matches!(store.state("nope"), Err(Error::SessionNotFound(_))));
    }

    #[test]
    fn reject_at_117_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = SessionStore::open(dir.path()).unwrap();
            let id = store.create(audit_request()).unwrap().id;
            for k in 1..=117 {
                let snap = store.append_observation(&id, 0.02, k, None).unwrap();
                let want = if k == 117 { Decision::Reject } else { Decision::Continue };
                assert_eq!(snap.decision, want, "k = {k}");
            }
            store.append_observation(&id, 0.9, 118, None).unwrap();
            assert_eq!(store.state(&id).unwrap().snapshot.decision, Decision::Reject);
            id
        };
        let reopened = SessionStore::open(dir.path()).unwrap();
        let st = reopened.state(&id).unwrap();
        assert_eq!(st.snapshot.k, 118);
        assert_eq!(st.snapshot.decision, Decision::Reject);
    }

    #[test]
    fn policy_switch_composes() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store
            .create(CreateSession {
                cfg: TestConfig::bounded(0.05, 0.0, 1.0, 0.05),
                policy: StakePolicy::Constant(0.6),
            })
            .unwrap()
            .id;
        for k in 1..=10 {
            store.append_observation(&id, 0.0, k, None).unwrap();
        }
        let m10 = store.state(&id).unwrap().snapshot.log_m;
        assert!(matches!(
            store.change_policy(&id, StakePolicy::Constant(0.5), 9),
            Err(Error::Conflict { .. })
        ));
        assert!(store.change_policy(&id, StakePolicy::Constant(2.0), 10).is_err());
        assert_eq!(store.state(&id).unwrap().policy_version, 1);
        let ack = store
            .change_policy(&id, StakePolicy::Mixture(MixtureSpec::uniform(0.6, 1.0)), 10)
            .unwrap();
        assert_eq!(ack, PolicyAck { version: 2, at_k: 10 });
        let snap = store.append_observation(&id, 0.02, 11, None).unwrap();
        let mut fresh = crate::mixture::MixtureState::new(&MixtureSpec::uniform(0.6, 1.0), 64).unwrap();
        fresh.update_in_place(0.02, &TestConfig::bounded(0.05, 0.0, 1.0, 0.05)).unwrap();
        assert!((snap.log_m - (m10 + fresh.value())).abs() < 1e-12);
        let events = store.trajectory(&id).unwrap();
        Session::replay(&events).unwrap();
    }

    #[test]
    fn oversized_power_family_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let req = CreateSession {
            cfg: TestConfig::bounded(0.05, 0.0, 1.0, 0.05),
            policy: StakePolicy::MuFamily(CPolicy::PowerFamily {
                d: 1.5,
                r: 1.0,
                s: 0.0,
                m: 0.05,
            }),
        };
        assert!(matches!(store.create(req), Err(Error::InvalidPolicy(_)) | Err(Error::InvalidStake(_))));
    }

    #[test]
    fn tampered_log_fails_replay() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(audit_request()).unwrap().id;
        for k in 1..=3 {
            store.append_observation(&id, 0.1, k, None).unwrap();
        }
        let mut events = store.trajectory(&id).unwrap();
        if let Event::Observation { t, .. } = &mut events[3] {
            *t = 0.2;
        }
        assert!(matches!(Session::replay(&events), Err(Error::ReplayMismatch { index: 3, .. })));
    }

    #[test]
    fn concurrent_submitters_one_wins() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(SessionStore::open(dir.path()).unwrap());
        let id = store.create(audit_request()).unwrap().id;
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (store, id) = (store.clone(), id.clone());
                std::thread::spawn(move || store.append_observation(&id, 0.02, 1, None))
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
        assert!(results
            .iter()
            .filter_map(|r| r.as_ref().err())
            .all(|e| matches!(e, Error::Conflict { .. })));
        assert_eq!(store.state(&id).unwrap().snapshot.k, 1);
        assert_eq!(read_log(&store.log_path(&id)).unwrap().len(), 3);
    }

    #[test]
    fn every_observation_is_predictable() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(audit_request()).unwrap().id;
        for k in 1..=5 {
            store.append_observation(&id, 0.03, k, None).unwrap();
        }
        store.change_policy(&id, StakePolicy::Constant(0.4), 5).unwrap();
        let meta = serde_json::json!({"item": "INV-7", "minutes": 12});
        store.append_observation(&id, 0.0, 6, Some(meta.clone())).unwrap();
        let events = read_log(&store.log_path(&id)).unwrap();
        let mut since = HashMap::new();
        for ev in &events {
            match ev {
                Event::PolicyChange { version, at_k, .. } => {
                    since.insert(*version, *at_k);
                }
                Event::Observation { k, policy_version, .. } => assert!(since[policy_version] < *k),
                Event::Created { .. } => {}
            }
        }
        assert!(matches!(events.last(), Some(Event::Observation { meta: Some(m), .. }) if *m == meta));
        let replayed = Session::replay(&events).unwrap();
        assert_eq!(replayed.state(), *store.state(&id).unwrap());
    }
}
