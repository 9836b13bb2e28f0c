//! Directory-backed assignment store.
//!
//! Layout under the data directory:
//!
//! ```text
//! index.json                      assignment states and the repost queue
//! classes.json                    optional class_id -> description map
//! assignments/<id>/hit.json       the HIT as served
//! assignments/<id>/events.jsonl   append-only log of accepted events and submissions
//! assignments/<id>/records.jsonl  finalized byproduct records
//! ```
//!
//! Ingestion is serialized per assignment; distinct assignments proceed
//! independently. The index lock is only ever taken while holding at most one
//! session lock.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use abkit_core::anon::HashKey;
use abkit_core::hit::{GridLayout, Hit, ImageRef};
use abkit_core::jsonl::read_json_lines;
use abkit_core::PagePosition;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::event::{Ack, EventBatch, LogLine, Submission};
use crate::session::{AssignmentState, Session};

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    /// Omit records for shown slots that saw no interaction.
    pub strict: bool,
    pub secret: HashKey,
    /// How many times a rejected HIT is re-posted.
    pub max_reposts: u32,
}

impl StoreConfig {
    pub fn new(data_dir: impl Into<PathBuf>, secret: HashKey) -> Self {
        StoreConfig { data_dir: data_dir.into(), strict: false, secret, max_reposts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub interface: String,
    pub state: AssignmentState,
    pub pages: usize,
    pub pages_submitted: usize,
    /// The assignment this one re-posts, if any.
    pub origin: Option<String>,
    pub reposts: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub assignments: BTreeMap<String, IndexEntry>,
    pub repost_queue: VecDeque<String>,
}

/// What the UI needs to render one page. Seed flags are withheld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "interface", rename_all = "lowercase")]
pub enum PagePayload {
    Browsing {
        assignment_id: String,
        class_id: String,
        class_description: Option<String>,
        page_idx: u32,
        page_count: usize,
        layout: GridLayout,
        slots: Vec<SlotView>,
    },
    Tagging {
        assignment_id: String,
        page_idx: u32,
        page_count: usize,
        image_id: u64,
        url: String,
        width: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotView {
    pub slot: u32,
    pub image: ImageRef,
    pub position: PagePosition,
    pub width: f64,
    pub height: f64,
}

pub struct Store {
    cfg: StoreConfig,
    descriptions: BTreeMap<String, String>,
    index: Mutex<Index>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn interface(hit: &Hit) -> &'static str {
    match hit {
        Hit::Browsing(_) => "browsing",
        Hit::Tagging(_) => "tagging",
    }
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Corrupt { path: path.display().to_string(), message: e.to_string() }
}

impl Store {
    /// Opens (or initializes) a data directory and rebuilds every session
    /// from its log.
    pub fn open(cfg: StoreConfig) -> Result<Store, ServiceError> {
        fs::create_dir_all(cfg.data_dir.join("assignments"))?;
        let index_path = cfg.data_dir.join("index.json");
        let index: Index = if index_path.exists() {
            serde_json::from_slice(&fs::read(&index_path)?).map_err(|e| corrupt(&index_path, e))?
        } else {
            Index::default()
        };
        let classes = cfg.data_dir.join("classes.json");
        let descriptions = if classes.exists() {
            serde_json::from_slice(&fs::read(&classes)?).map_err(|e| corrupt(&classes, e))?
        } else {
            BTreeMap::new()
        };
        let store = Store { cfg, descriptions, index: Mutex::new(Index::default()), sessions: Mutex::new(HashMap::new()) };
        let mut sessions = HashMap::new();
        for (id, entry) in &index.assignments {
            let hit = store.read_hit(id)?;
            let log = store.read_log(id)?;
            let (mut session, _) = Session::replay(hit, &log, &store.cfg.secret)?;
            session.state = entry.state;
            sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        }
        *lock(&store.index) = index;
        *lock(&store.sessions) = sessions;
        Ok(store)
    }

    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.cfg.data_dir.join("assignments").join(id)
    }

    fn read_hit(&self, id: &str) -> Result<Hit, ServiceError> {
        let path = self.dir(id).join("hit.json");
        serde_json::from_slice(&fs::read(&path)?).map_err(|e| corrupt(&path, e))
    }

    /// The assignment's log as stored on disk.
    pub fn read_log(&self, id: &str) -> Result<Vec<LogLine>, ServiceError> {
        let path = self.dir(id).join("events.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_json_lines(BufReader::new(File::open(&path)?)).map_err(|e| corrupt(&path, e))
    }

    fn append(&self, id: &str, file: &str, lines: impl IntoIterator<Item = String>) -> Result<(), ServiceError> {
        let mut buf = String::new();
        for l in lines {
            buf.push_str(&l);
            buf.push('\n');
        }
        if buf.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new().create(true).append(true).open(self.dir(id).join(file))?;
        f.write_all(buf.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    fn append_log(&self, id: &str, log: &[LogLine]) -> Result<(), ServiceError> {
        self.append(id, "events.jsonl", log.iter().map(|l| serde_json::to_string(l).expect("log lines serialize")))
    }

    fn write_index(&self, index: &Index) -> Result<(), ServiceError> {
        let path = self.cfg.data_dir.join("index.json");
        let tmp = self.cfg.data_dir.join("index.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(index).expect("index serializes"))?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| ServiceError::UnknownAssignment(id.to_string()))
    }

    fn update_index(&self, id: &str, f: impl FnOnce(&mut IndexEntry)) -> Result<(), ServiceError> {
        let mut index = lock(&self.index);
        let entry = index.assignments.get_mut(id).ok_or_else(|| ServiceError::UnknownAssignment(id.to_string()))?;
        f(entry);
        self.write_index(&index)
    }

    /// Adds a new open assignment.
    pub fn register(&self, hit: Hit) -> Result<(), ServiceError> {
        self.register_with_origin(hit, None)
    }

    fn register_with_origin(&self, hit: Hit, origin: Option<String>) -> Result<(), ServiceError> {
        let id = hit.assignment_id().to_string();
        if !valid_id(&id) {
            return Err(ServiceError::InvalidAssignmentId(id));
        }
        let mut sessions = lock(&self.sessions);
        if sessions.contains_key(&id) {
            return Err(ServiceError::DuplicateAssignment(id));
        }
        let dir = self.dir(&id);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("hit.json"), serde_json::to_vec(&hit).expect("hits serialize"))?;
        let entry = IndexEntry {
            interface: interface(&hit).to_string(),
            state: AssignmentState::Open,
            pages: hit.page_count(),
            pages_submitted: 0,
            origin,
            reposts: 0,
        };
        {
            let mut index = lock(&self.index);
            index.assignments.insert(id.clone(), entry);
            self.write_index(&index)?;
        }
        sessions.insert(id, Arc::new(Mutex::new(Session::new(hit))));
        Ok(())
    }

    pub fn assignment_ids(&self) -> Vec<String> {
        lock(&self.index).assignments.keys().cloned().collect()
    }

    pub fn index(&self) -> Index {
        lock(&self.index).clone()
    }

    pub fn state(&self, id: &str) -> Result<AssignmentState, ServiceError> {
        Ok(lock(&*self.session(id)?).state())
    }

    pub fn page(&self, id: &str, page_idx: u32) -> Result<PagePayload, ServiceError> {
        let s = self.session(id)?;
        let s = lock(&s);
        let pages = s.hit().page_count();
        if page_idx as usize >= pages {
            return Err(ServiceError::InvalidPage { page_idx, pages });
        }
        Ok(match s.hit() {
            Hit::Browsing(b) => {
                let page = &b.pages[page_idx as usize];
                PagePayload::Browsing {
                    assignment_id: b.assignment_id.clone(),
                    class_id: b.class_id.clone(),
                    class_description: self.descriptions.get(&b.class_id).cloned(),
                    page_idx,
                    page_count: pages,
                    layout: GridLayout::default(),
                    slots: page
                        .slots
                        .iter()
                        .map(|sl| SlotView {
                            slot: sl.slot,
                            image: sl.image.clone(),
                            position: sl.position,
                            width: sl.width,
                            height: sl.height,
                        })
                        .collect(),
                }
            }
            Hit::Tagging(t) => {
                let page = &t.pages[page_idx as usize];
                PagePayload::Tagging {
                    assignment_id: t.assignment_id.clone(),
                    page_idx,
                    page_count: pages,
                    image_id: page.image_id,
                    url: page.url.clone(),
                    width: page.width,
                    height: page.height,
                }
            }
        })
    }

    pub fn ingest(&self, id: &str, batch: &EventBatch) -> Result<Ack, ServiceError> {
        let s = self.session(id)?;
        let mut s = lock(&s);
        let (ack, log) = s.plan_ingest(batch)?;
        self.append_log(id, &log)?;
        s.apply(&log);
        Ok(ack)
    }

    /// Finalizes a page; returns the records written, one JSON line each.
    pub fn submit(&self, id: &str, page_idx: u32, submission: &Submission) -> Result<Vec<String>, ServiceError> {
        let s = self.session(id)?;
        let mut s = lock(&s);
        let (records, log) = s.plan_submit(page_idx, submission, self.cfg.strict, &self.cfg.secret)?;
        self.append_log(id, &log)?;
        self.append(id, "records.jsonl", records.iter().cloned())?;
        s.apply(&log);
        let done = s.pages_submitted();
        self.update_index(id, |e| e.pages_submitted = done)?;
        Ok(records)
    }

    /// Raw contents of the assignment's records file.
    pub fn records(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        self.session(id)?;
        let path = self.dir(id).join("records.jsonl");
        if path.exists() {
            Ok(fs::read(path)?)
        } else {
            Ok(Vec::new())
        }
    }

    /// Rebuilds the records from the on-disk log, as JSON Lines bytes.
    pub fn replay(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        let hit = lock(&*self.session(id)?).hit().clone();
        let log = self.read_log(id)?;
        let (_, records) = Session::replay(hit, &log, &self.cfg.secret)?;
        let mut out = Vec::new();
        for r in records {
            out.extend_from_slice(r.as_bytes());
            out.push(b'\n');
        }
        Ok(out)
    }

    fn code_for(&self, id: &str) -> String {
        hex::encode(&self.cfg.secret.digest(&["completion", id])[..16])
    }

    /// Issues the completion code and stops further ingestion. Repeated
    /// calls return the same code.
    pub fn issue_code(&self, id: &str) -> Result<String, ServiceError> {
        let s = self.session(id)?;
        let mut s = lock(&s);
        match s.state() {
            AssignmentState::Open => {
                if s.pages_submitted() == 0 {
                    return Err(ServiceError::NoSubmittedPages(id.to_string()));
                }
                s.state = AssignmentState::CodeIssued;
                self.update_index(id, |e| e.state = AssignmentState::CodeIssued)?;
            }
            AssignmentState::CodeIssued | AssignmentState::Closed => {}
            AssignmentState::Rejected => {
                return Err(ServiceError::InvalidTransition { id: id.into(), state: "rejected", action: "issue a code" })
            }
        }
        Ok(self.code_for(id))
    }

    pub fn verify_code(&self, id: &str, code: &str) -> Result<bool, ServiceError> {
        let s = self.session(id)?;
        let issued = lock(&s).state() != AssignmentState::Open;
        Ok(issued && code == self.code_for(id))
    }

    fn transition(&self, id: &str, to: AssignmentState, action: &'static str) -> Result<(), ServiceError> {
        let s = self.session(id)?;
        let mut s = lock(&s);
        if s.state() != AssignmentState::CodeIssued {
            return Err(ServiceError::InvalidTransition { id: id.into(), state: s.state().name(), action });
        }
        s.state = to;
        self.update_index(id, |e| e.state = to)
    }

    /// Accepts the work: the assignment is closed for good.
    pub fn close(&self, id: &str) -> Result<(), ServiceError> {
        self.transition(id, AssignmentState::Closed, "close")
    }

    /// Rejects the work and, while the repost budget lasts, registers a
    /// fresh copy of the HIT and queues it. Returns the new assignment id.
    pub fn reject(&self, id: &str) -> Result<Option<String>, ServiceError> {
        self.transition(id, AssignmentState::Rejected, "reject")?;
        let (root, reposts) = {
            let index = lock(&self.index);
            let e = &index.assignments[id];
            (e.origin.clone().unwrap_or_else(|| id.to_string()), e.reposts)
        };
        if reposts >= self.cfg.max_reposts {
            return Ok(None);
        }
        let new_id = format!("{root}-r{}", reposts + 1);
        let hit = lock(&*self.session(id)?).hit().with_assignment_id(new_id.clone());
        self.register_with_origin(hit, Some(root))?;
        let mut index = lock(&self.index);
        if let Some(e) = index.assignments.get_mut(&new_id) {
            e.reposts = reposts + 1;
        }
        index.repost_queue.push_back(new_id.clone());
        self.write_index(&index)?;
        Ok(Some(new_id))
    }

    /// Takes the oldest re-posted assignment off the queue.
    pub fn next_repost(&self) -> Result<Option<String>, ServiceError> {
        let mut index = lock(&self.index);
        let next = index.repost_queue.pop_front();
        if next.is_some() {
            self.write_index(&index)?;
        }
        Ok(next)
    }
}
