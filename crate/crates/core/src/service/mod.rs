//! Sessions: the turn loop that runs NLU, the dialogue manager, the
//! querier and the interactor, with optional transcript files.

pub mod http;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{self, decide_state, describe, DialogConfig, DialogError, DialogueContext, LowerState, UpperState};
use crate::flight::{self, mock::MockSite};
use crate::interactor::{render_or_apologize, Variation};
use crate::nlu;
use crate::query::cgi::{CgiQuerier, HttpTransport, InProcessTransport};
use crate::query::{LocalQuerier, Querier, QueryError, TableStore};
use crate::schema::{load_domain_pack, DomainPack, PackError};

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is closed")]
    SessionClosed(String),
    #[error("backend unavailable: {0}")]
    Backend(String),
    #[error("pack `{domain}`: {source}")]
    Pack { domain: String, source: PackError },
    #[error("io: {0}")]
    Io(String),
    #[error("bad transcript: {0}")]
    Transcript(String),
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Io(e.to_string())
    }
}

/// Where a session's queries go.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    /// The in-memory table store.
    Local,
    /// The CGI path. Without a URL the bundled mock site is called
    /// in-process.
    Cgi { url: Option<String> },
}

impl Backend {
    pub fn parse(kind: &str, url: Option<String>) -> Option<Self> {
        match kind {
            "local" => Some(Backend::Local),
            "cgi" => Some(Backend::Cgi { url }),
            _ => None,
        }
    }
}

/// A loaded domain: its pack and, if it has one, its dataset.
#[derive(Debug, Clone)]
pub struct Domain {
    pub pack: Arc<DomainPack>,
    pub store: Option<Arc<TableStore>>,
}

impl Domain {
    pub fn load(root: &Path) -> Result<Self, ServiceError> {
        let pack = load_domain_pack(root).map_err(|source| ServiceError::Pack {
            domain: root.display().to_string(),
            source,
        })?;
        let store = match pack.dataset_path(root) {
            Some(p) => Some(Arc::new(TableStore::from_path(&p).map_err(|e| ServiceError::Pack {
                domain: pack.name().to_string(),
                source: PackError::MissingFile(format!("{}: {e}", p.display())),
            })?)),
            None => None,
        };
        Ok(Domain {
            pack: Arc::new(pack),
            store,
        })
    }

    fn querier(&self, backend: &Backend) -> Result<Box<dyn Querier>, ServiceError> {
        let no_data = || ServiceError::Backend(format!("domain {} has no dataset", self.pack.name()));
        match backend {
            Backend::Local => Ok(Box::new(LocalQuerier::new(self.store.clone().ok_or_else(no_data)?))),
            Backend::Cgi { url: Some(url) } => {
                let t = HttpTransport::new(url).map_err(|e| ServiceError::Backend(e.to_string()))?;
                Ok(Box::new(CgiQuerier::new(&self.pack, Arc::new(t)).map_err(backend_err)?))
            }
            Backend::Cgi { url: None } => {
                let store = self.store.as_ref().ok_or_else(no_data)?;
                let site = MockSite::new(flight::from_store(store).map_err(backend_err)?);
                let t = InProcessTransport(move |q: &str| site.handle_request(q));
                Ok(Box::new(CgiQuerier::new(&self.pack, Arc::new(t)).map_err(backend_err)?))
            }
        }
    }
}

fn backend_err(e: QueryError) -> ServiceError {
    ServiceError::Backend(e.to_string())
}

/// Per-session settings fixed at creation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub domain: String,
    pub backend: Backend,
    pub seed: u64,
    pub dialog: DialogConfig,
    /// Pick among rule variants with the seeded generator.
    pub vary_prompts: bool,
}

impl SessionConfig {
    pub fn new(domain: &str, backend: Backend, seed: u64) -> Self {
        SessionConfig {
            domain: domain.to_string(),
            backend,
            seed,
            dialog: DialogConfig::default(),
            vary_prompts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: u32,
    /// Empty for the greeting.
    pub utterance: String,
    pub state: UpperState,
    pub sub_state: Option<LowerState>,
    pub reply: String,
    pub queried: bool,
    pub match_count: Option<usize>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub cause: String,
    pub classification_queries: u32,
    pub probe_queries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnDebug {
    pub cause: String,
    pub classification_queries: u32,
    pub probe_queries: u32,
    pub continuation: bool,
    pub match_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub turn: u32,
    pub reply: String,
    pub state: UpperState,
    pub sub_state: Option<LowerState>,
    pub bindings: BTreeMap<String, String>,
    pub closed: bool,
    pub debug: TurnDebug,
}

/// One line of a session file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Open { session_id: String, config: SessionConfig },
    Turn(TranscriptEntry),
}

pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub context: DialogueContext,
    pub transcript: Vec<TranscriptEntry>,
    pub closed: bool,
    domain: Domain,
    querier: Box<dyn Querier>,
    log: Option<File>,
    last_active: Instant,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    /// A fresh session whose greeting is turn 0.
    pub fn open(id: String, domain: Domain, config: SessionConfig) -> Result<Self, ServiceError> {
        let querier = domain.querier(&config.backend)?;
        let greeting = dialog::greeting(&domain.pack);
        let reply = render_or_apologize(&greeting, &domain.pack.rules, None);
        let context = DialogueContext {
            last_template: Some(greeting),
            ..DialogueContext::default()
        };
        let entry = TranscriptEntry {
            turn: 0,
            utterance: String::new(),
            state: UpperState::Initial,
            sub_state: None,
            reply,
            queried: false,
            match_count: None,
            timestamp: now_ms(),
            cause: "greeting".to_string(),
            classification_queries: 0,
            probe_queries: 0,
        };
        Ok(Session {
            id,
            config,
            context,
            transcript: vec![entry],
            closed: false,
            domain,
            querier,
            log: None,
            last_active: Instant::now(),
        })
    }

    pub fn greeting(&self) -> &str {
        &self.transcript[0].reply
    }

    pub fn pack(&self) -> &DomainPack {
        &self.domain.pack
    }

    fn variation(&self) -> Option<Variation> {
        self.config.vary_prompts.then_some(Variation {
            seed: self.config.seed,
            turn: self.context.turn_index,
        })
    }

    /// Run one user turn.
    pub fn step(&mut self, utterance: &str) -> Result<TurnResponse, ServiceError> {
        if self.closed {
            return Err(ServiceError::SessionClosed(self.id.clone()));
        }
        self.last_active = Instant::now();
        let pack = Arc::clone(&self.domain.pack);
        let mut ctx = self.context.clone();
        ctx.begin_turn();
        let (_, extraction) = nlu::understand(utterance, &pack, &ctx);
        let outcome = decide_state(&ctx, &extraction, &pack, self.querier.as_ref(), &self.config.dialog);

        let (entry, debug) = match outcome {
            Ok((d, next)) => {
                self.context = next;
                let reply = render_or_apologize(&d.template, &pack.rules, self.variation());
                if d.state == UpperState::Quit {
                    self.closed = true;
                }
                let debug = TurnDebug {
                    cause: d.cause.clone(),
                    classification_queries: d.classification_queries,
                    probe_queries: d.probe_queries,
                    continuation: d.continuation,
                    match_count: d.match_count,
                };
                let entry = TranscriptEntry {
                    turn: self.context.turn_index,
                    utterance: utterance.to_string(),
                    state: d.state,
                    sub_state: d.sub_state,
                    reply,
                    queried: d.queried,
                    match_count: d.match_count,
                    timestamp: now_ms(),
                    cause: d.cause,
                    classification_queries: d.classification_queries,
                    probe_queries: d.probe_queries,
                };
                (entry, debug)
            }
            Err(DialogError::QuerierUnavailable(detail)) => {
                tracing::warn!(session = %self.id, %detail, "querier unavailable");
                // The context is left as it was; only the turn counter moves.
                self.context.turn_index = ctx.turn_index;
                let finding = dialog::Finding::Trouble { detail };
                let template = dialog::build_template(&finding, &self.context, &pack);
                let reply = render_or_apologize(&template, &pack.rules, self.variation());
                let debug = TurnDebug {
                    cause: "system_trouble".to_string(),
                    classification_queries: 1,
                    probe_queries: 0,
                    continuation: false,
                    match_count: None,
                };
                let entry = TranscriptEntry {
                    turn: ctx.turn_index,
                    utterance: utterance.to_string(),
                    state: self.context.upper_state,
                    sub_state: self.context.sub_state,
                    reply,
                    queried: true,
                    match_count: None,
                    timestamp: now_ms(),
                    cause: debug.cause.clone(),
                    classification_queries: 1,
                    probe_queries: 0,
                };
                (entry, debug)
            }
        };
        self.append(entry.clone())?;
        Ok(TurnResponse {
            turn: entry.turn,
            reply: entry.reply,
            state: entry.state,
            sub_state: entry.sub_state,
            bindings: describe(&self.context),
            closed: self.closed,
            debug,
        })
    }

    fn append(&mut self, entry: TranscriptEntry) -> Result<(), ServiceError> {
        if let Some(f) = &mut self.log {
            write_record(f, &LogRecord::Turn(entry.clone()))?;
        }
        self.transcript.push(entry);
        Ok(())
    }

    fn attach_log(&mut self, mut file: File, fresh: bool) -> Result<(), ServiceError> {
        if fresh {
            write_record(
                &mut file,
                &LogRecord::Open {
                    session_id: self.id.clone(),
                    config: self.config.clone(),
                },
            )?;
            write_record(&mut file, &LogRecord::Turn(self.transcript[0].clone()))?;
        }
        self.log = Some(file);
        Ok(())
    }
}

fn write_record(f: &mut File, r: &LogRecord) -> Result<(), ServiceError> {
    let line = serde_json::to_string(r).map_err(|e| ServiceError::Io(e.to_string()))?;
    writeln!(f, "{line}")?;
    f.flush()?;
    Ok(())
}

/// Read a session file: its configuration and entries.
pub fn read_transcript(path: &Path) -> Result<(String, SessionConfig, Vec<TranscriptEntry>), ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut head = None;
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Transcript(format!("{}:{}: {e}", path.display(), i + 1)))?;
        match rec {
            LogRecord::Open { session_id, config } => head = Some((session_id, config)),
            LogRecord::Turn(t) => entries.push(t),
        }
    }
    let (id, config) = head.ok_or_else(|| ServiceError::Transcript(format!("{}: no open record", path.display())))?;
    Ok((id, config, entries))
}

/// A turn whose replayed state or reply differs from the record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayMismatch {
    pub turn: u32,
    pub expected_state: UpperState,
    pub actual_state: UpperState,
    pub expected_reply: String,
    pub actual_reply: String,
}

/// Feed recorded utterances into a fresh session and compare.
pub fn replay(domain: Domain, config: SessionConfig, entries: &[TranscriptEntry]) -> Result<Vec<ReplayMismatch>, ServiceError> {
    let mut s = Session::open("replay".to_string(), domain, config)?;
    let mut out = Vec::new();
    let mut check = |e: &TranscriptEntry, state: UpperState, reply: &str| {
        if e.state != state || e.reply != reply {
            out.push(ReplayMismatch {
                turn: e.turn,
                expected_state: e.state,
                actual_state: state,
                expected_reply: e.reply.clone(),
                actual_reply: reply.to_string(),
            });
        }
    };
    if let Some(first) = entries.first() {
        check(first, UpperState::Initial, &s.transcript[0].reply.clone());
    }
    for e in entries.iter().skip(1) {
        let r = s.step(&e.utterance)?;
        check(e, r.state, &r.reply);
    }
    Ok(out)
}

/// All sessions of one server, over a shared set of immutable domains.
pub struct SessionManager {
    domains: BTreeMap<String, Domain>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    persist_dir: Option<PathBuf>,
    pub ttl: Duration,
}

impl SessionManager {
    pub fn new() -> Self {
        SessionManager {
            domains: BTreeMap::new(),
            sessions: Mutex::new(HashMap::new()),
            persist_dir: None,
            ttl: DEFAULT_TTL,
        }
    }

    /// Load every pack directory (one holding a schema.conf) under `dir`.
    pub fn from_packs_dir(dir: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let mut m = SessionManager::new();
        let mut roots: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join(crate::schema::SCHEMA_FILE).is_file())
            .collect();
        roots.sort();
        for root in roots {
            m.add_domain(Domain::load(&root)?);
        }
        Ok(m)
    }

    pub fn add_domain(&mut self, domain: Domain) {
        self.domains.insert(domain.pack.name().to_string(), domain);
    }

    pub fn domain(&self, name: &str) -> Option<&Domain> {
        self.domains.get(name)
    }

    pub fn domain_names(&self) -> Vec<String> {
        self.domains.keys().cloned().collect()
    }

    /// Write one line-delimited file per session under `dir`, and bring
    /// back the sessions already there.
    pub fn with_persistence(mut self, dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        self.persist_dir = Some(dir);
        self.restore()?;
        Ok(self)
    }

    fn restore(&self) -> Result<(), ServiceError> {
        let Some(dir) = &self.persist_dir else { return Ok(()) };
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        for path in files {
            let (id, config, entries) = read_transcript(&path)?;
            let domain = self
                .domains
                .get(&config.domain)
                .cloned()
                .ok_or_else(|| ServiceError::UnknownDomain(config.domain.clone()))?;
            let mut s = Session::open(id.clone(), domain, config)?;
            // Rebuild the context by re-running the turns, then keep the
            // recorded entries as the history.
            for e in entries.iter().skip(1) {
                s.step(&e.utterance)?;
            }
            s.transcript = entries;
            let file = OpenOptions::new().append(true).open(&path)?;
            s.attach_log(file, false)?;
            self.sessions.lock().expect("sessions lock").insert(id, Arc::new(Mutex::new(s)));
        }
        Ok(())
    }

    /// Open a session; returns its id and greeting.
    pub fn create(&self, config: SessionConfig) -> Result<(String, String), ServiceError> {
        self.expire_idle();
        let domain = self
            .domains
            .get(&config.domain)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownDomain(config.domain.clone()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut s = Session::open(id.clone(), domain, config)?;
        if let Some(dir) = &self.persist_dir {
            let file = OpenOptions::new()
                .create_new(true)
                .append(true)
                .open(dir.join(format!("{id}.jsonl")))?;
            s.attach_log(file, true)?;
        }
        let greeting = s.greeting().to_string();
        self.sessions
            .lock()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(Mutex::new(s)));
        Ok((id, greeting))
    }

    pub fn create_session(&self, domain: &str, backend: Backend, seed: u64) -> Result<(String, String), ServiceError> {
        self.create(SessionConfig::new(domain, backend, seed))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// One turn. Turns on the same session run one at a time.
    pub fn step(&self, id: &str, utterance: &str) -> Result<TurnResponse, ServiceError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        s.step(utterance)
    }

    pub fn transcript(&self, id: &str) -> Result<Vec<TranscriptEntry>, ServiceError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        Ok(s.transcript.clone())
    }

    /// Drop sessions idle for longer than the TTL. Their files stay.
    pub fn expire_idle(&self) -> usize {
        let mut sessions = self.sessions.lock().expect("sessions lock");
        let before = sessions.len();
        let ttl = self.ttl;
        sessions.retain(|_, s| s.lock().map(|s| s.last_active.elapsed() <= ttl).unwrap_or(false));
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("sessions lock").len()
    }
}

impl Default for SessionManager {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packs() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../packs")
    }

    fn manager() -> SessionManager {
        SessionManager::from_packs_dir(packs()).unwrap()
    }

    #[test]
    fn greeting_is_turn_zero() {
        let m = manager();
        let (id, greeting) = m.create_session("flights", Backend::Local, 7).unwrap();
        assert!(greeting.starts_with("Welcome"));
        let t = m.transcript(&id).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].state, UpperState::Initial);
    }

    #[test]
    fn unknown_domain_and_session() {
        let m = manager();
        assert!(matches!(
            m.create_session("trains", Backend::Local, 7),
            Err(ServiceError::UnknownDomain(_))
        ));
        assert!(matches!(m.step("nope", "hi"), Err(ServiceError::UnknownSession(_))));
        assert!(matches!(m.transcript("nope"), Err(ServiceError::UnknownSession(_))));
    }

    #[test]
    fn sessions_are_independent() {
        let m = manager();
        let (a, _) = m.create_session("flights", Backend::Local, 7).unwrap();
        let (b, _) = m.create_session("flights", Backend::Local, 7).unwrap();
        assert_ne!(a, b);
        m.step(&a, "flight 472").unwrap();
        assert!(m.step(&b, "hello").unwrap().bindings.is_empty());
    }

    #[test]
    fn quit_closes() {
        let m = manager();
        let (id, _) = m.create_session("flights", Backend::Local, 7).unwrap();
        let r = m.step(&id, "quit").unwrap();
        assert_eq!(r.state, UpperState::Quit);
        assert!(r.closed);
        assert!(matches!(m.step(&id, "hello"), Err(ServiceError::SessionClosed(_))));
    }

    #[test]
    fn idle_sessions_expire() {
        let mut m = manager();
        m.ttl = Duration::ZERO;
        m.create_session("flights", Backend::Local, 7).unwrap();
        std::thread::sleep(Duration::from_millis(5));
        assert_eq!(m.expire_idle(), 1);
        assert_eq!(m.session_count(), 0);
    }
}
