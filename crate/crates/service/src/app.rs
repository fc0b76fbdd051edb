use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use idsel::annotation::{SessionConfig, SessionState};
use idsel::corpus::{load_corpus, Corpus};
use idsel::geometry::{load_embeddings, EmbeddingSet};
use idsel::selectors::{Method, SelectionOrder};

use crate::error::{ApiError, ApiResult, ErrorBody};
use crate::journal::{Journal, JournalEntry, JournalError};
use crate::views::Progress;

/// Corpora above this size get their order computed in the background.
pub const DEFAULT_BACKGROUND_THRESHOLD: usize = 5_000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Used when a create request names no corpus.
    pub default_corpus: Option<PathBuf>,
    pub default_embeddings: Option<PathBuf>,
    /// Append-only session log; sessions are in-memory only without it.
    pub journal: Option<PathBuf>,
    /// Directory served at `/` (the annotation UI bundle).
    pub static_dir: Option<PathBuf>,
    pub background_threshold: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            default_corpus: None,
            default_embeddings: None,
            journal: None,
            static_dir: None,
            background_threshold: DEFAULT_BACKGROUND_THRESHOLD,
        }
    }
}

#[derive(Debug)]
pub(crate) struct Live {
    pub state: SessionState,
    pub corpus: Arc<Corpus>,
}

#[derive(Debug)]
pub(crate) enum Phase {
    Pending,
    Failed(ErrorBody),
    Ready(Box<Live>),
}

/// One session. All reads and writes go through `phase`, which linearizes
/// annotations within the session.
#[derive(Debug)]
pub struct Slot {
    pub id: String,
    pub created_at: u64,
    pub method: Method,
    phase: Mutex<Phase>,
}

impl Slot {
    pub(crate) fn lock(&self) -> MutexGuard<'_, Phase> {
        self.phase.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug)]
struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    corpora: Mutex<HashMap<PathBuf, Arc<Corpus>>>,
    embeddings: Mutex<HashMap<PathBuf, Arc<EmbeddingSet>>>,
    journal: Option<Journal>,
}

#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("journal replay: {0}")]
    Replay(String),
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl AppState {
    /// Builds the state, replaying the journal if one is configured.
    pub fn new(config: ServiceConfig) -> Result<Self, StartupError> {
        let (journal, entries) = match &config.journal {
            Some(path) => {
                let (j, e) = Journal::open(path)?;
                (Some(j), e)
            }
            None => (None, Vec::new()),
        };
        let state = Self {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(HashMap::new()),
                corpora: Mutex::new(HashMap::new()),
                embeddings: Mutex::new(HashMap::new()),
                journal,
            }),
        };
        state.replay(entries)?;
        Ok(state)
    }

    fn replay(&self, entries: Vec<JournalEntry>) -> Result<(), StartupError> {
        let mut restored = 0;
        for entry in entries {
            match entry {
                JournalEntry::Create {
                    session_id,
                    created_at,
                    corpus,
                    config,
                    order,
                } => {
                    let method = order.method;
                    let phase = match self.corpus(&corpus) {
                        Ok(c) => {
                            restored += 1;
                            Phase::Ready(Box::new(Live {
                                state: SessionState::new(config, order),
                                corpus: c,
                            }))
                        }
                        Err(e) => {
                            tracing::warn!(session = %session_id, error = %e.body.message, "cannot restore session");
                            Phase::Failed(e.body)
                        }
                    };
                    self.insert(Slot {
                        id: session_id,
                        created_at,
                        method,
                        phase: Mutex::new(phase),
                    });
                }
                JournalEntry::Annotate {
                    session_id,
                    rank,
                    doc_id,
                    label,
                } => {
                    let slot = self
                        .session(&session_id)
                        .ok_or_else(|| StartupError::Replay(format!("annotation for unknown session {session_id}")))?;
                    let mut phase = slot.lock();
                    match &mut *phase {
                        Phase::Ready(live) => {
                            if live.state.cursor() != rank {
                                return Err(StartupError::Replay(format!(
                                    "session {session_id}: rank {rank} at cursor {}",
                                    live.state.cursor()
                                )));
                            }
                            live.state
                                .annotate(&doc_id, &label)
                                .map_err(|e| StartupError::Replay(format!("session {session_id}: {e}")))?;
                        }
                        Phase::Failed(_) => {}
                        Phase::Pending => unreachable!("replayed sessions are never pending"),
                    }
                }
            }
        }
        if restored > 0 {
            tracing::info!(sessions = restored, "restored sessions from journal");
        }
        Ok(())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn session(&self, id: &str) -> Option<Arc<Slot>> {
        self.inner
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .inner
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    fn insert(&self, slot: Slot) -> Arc<Slot> {
        let slot = Arc::new(slot);
        self.inner
            .sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(slot.id.clone(), slot.clone());
        slot
    }

    pub(crate) fn remove(&self, id: &str) {
        self.inner
            .sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(id);
    }

    /// Loads (or reuses) a corpus. Blocking.
    pub(crate) fn corpus(&self, path: &Path) -> ApiResult<Arc<Corpus>> {
        let key = std::fs::canonicalize(path)
            .map_err(|e| ApiError::validation(format!("corpus {}: {e}", path.display())))?;
        if let Some(c) = self.inner.corpora.lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
            return Ok(c.clone());
        }
        let corpus = Arc::new(load_corpus(&key)?);
        self.inner
            .corpora
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(key, corpus.clone());
        Ok(corpus)
    }

    /// Loads (or reuses) an embedding file. Blocking.
    pub(crate) fn embeddings(&self, path: &Path) -> ApiResult<Arc<EmbeddingSet>> {
        let key = std::fs::canonicalize(path)
            .map_err(|e| ApiError::validation(format!("embeddings {}: {e}", path.display())))?;
        if let Some(e) = self.inner.embeddings.lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
            return Ok(e.clone());
        }
        let emb = Arc::new(load_embeddings(&key)?);
        self.inner
            .embeddings
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(key, emb.clone());
        Ok(emb)
    }

    pub(crate) fn insert_pending(&self, method: Method) -> Arc<Slot> {
        self.insert(Slot {
            id: uuid::Uuid::new_v4().to_string(),
            created_at: now_ms(),
            method,
            phase: Mutex::new(Phase::Pending),
        })
    }

    /// Journals the session and makes it ready. Blocking.
    pub(crate) fn activate(
        &self,
        slot: &Slot,
        corpus_path: &Path,
        corpus: Arc<Corpus>,
        config: SessionConfig,
        order: SelectionOrder,
    ) -> ApiResult<()> {
        if let Some(j) = &self.inner.journal {
            let entry = JournalEntry::Create {
                session_id: slot.id.clone(),
                created_at: slot.created_at,
                corpus: std::fs::canonicalize(corpus_path).unwrap_or_else(|_| corpus_path.to_path_buf()),
                config: config.clone(),
                order: order.clone(),
            };
            j.append(&entry).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        *slot.lock() = Phase::Ready(Box::new(Live {
            state: SessionState::new(config, order),
            corpus,
        }));
        Ok(())
    }

    pub(crate) fn fail(&self, slot: &Slot, error: ErrorBody) {
        *slot.lock() = Phase::Failed(error);
    }

    /// Applies one annotation: validated on a copy, journaled, then
    /// committed. Blocking.
    pub(crate) fn annotate(&self, slot: &Slot, doc_id: &str, label: &str) -> ApiResult<Progress> {
        let mut phase = slot.lock();
        let live = match &mut *phase {
            Phase::Ready(live) => live,
            Phase::Pending => return Err(pending_error()),
            Phase::Failed(body) => return Err(failed_error(body)),
        };
        let rank = live.state.cursor();
        let mut next = live.state.clone();
        next.annotate(doc_id, label)?;
        if let Some(j) = &self.inner.journal {
            j.append(&JournalEntry::Annotate {
                session_id: slot.id.clone(),
                rank,
                doc_id: doc_id.to_string(),
                label: label.to_string(),
            })
            .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        live.state = next;
        Ok(Progress::of(&live.state))
    }

    /// Flushes the journal to disk.
    pub fn flush(&self) -> Result<(), JournalError> {
        match &self.inner.journal {
            Some(j) => j.sync(),
            None => Ok(()),
        }
    }
}

pub(crate) fn pending_error() -> ApiError {
    ApiError::new(
        axum::http::StatusCode::CONFLICT,
        "session_pending",
        "selection order is still being computed",
    )
}

pub(crate) fn failed_error(body: &ErrorBody) -> ApiError {
    ApiError::new(
        axum::http::StatusCode::CONFLICT,
        "session_failed",
        format!("session could not be started: {}", body.message),
    )
}
