//! Annotation sessions: walk a selection order, record labels, stop once every
//! class has `n_shots` examples, and report the overannotation rate
//! `θ = |annotated| / (n_classes · n_shots)`.
//!
//! A session ends either `Complete` (stopping rule met) or `Exhausted` (the
//! order ran out first). Annotations are append-only.

mod export;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet};
use crate::error::{Error, Result};
use crate::selectors::SelectionOrder;

pub use export::{ExportRecord, ExportSummary, SessionExport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_shots: usize,
    pub label_set: LabelSet,
    pub allow_new_labels: bool,
}

impl SessionConfig {
    /// Requires `n_shots >= 1` and, unless new labels are allowed, at least
    /// two starting classes.
    pub fn new(n_shots: usize, label_set: LabelSet, allow_new_labels: bool) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::Validation("n_shots must be at least 1".into()));
        }
        if !allow_new_labels && label_set.n_classes() < 2 {
            return Err(Error::Validation(
                "at least 2 labels are required when new labels are not allowed".into(),
            ));
        }
        Ok(Self {
            n_shots,
            label_set,
            allow_new_labels,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub label: String,
}

/// Labels assigned so far, in annotation order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotatedSet {
    records: Vec<AnnotationRecord>,
    per_class_counts: BTreeMap<String, usize>,
    seen: HashSet<String>,
}

impl AnnotatedSet {
    pub fn from_records(records: impl IntoIterator<Item = AnnotationRecord>) -> Result<Self> {
        let mut set = Self::default();
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    fn with_labels(labels: &LabelSet) -> Self {
        Self {
            per_class_counts: labels.labels().iter().map(|l| (l.clone(), 0)).collect(),
            ..Self::default()
        }
    }

    fn push(&mut self, record: AnnotationRecord) -> Result<()> {
        if !self.seen.insert(record.id.clone()) {
            return Err(Error::Validation(format!("{:?} annotated twice", record.id)));
        }
        *self.per_class_counts.entry(record.label.clone()).or_insert(0) += 1;
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    /// Count per label; labels of the session's label set appear even at 0.
    pub fn per_class_counts(&self) -> &BTreeMap<String, usize> {
        &self.per_class_counts
    }

    pub fn count(&self, label: &str) -> usize {
        self.per_class_counts.get(label).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.seen.contains(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Complete,
    Exhausted,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Active => "active",
            SessionStatus::Complete => "complete",
            SessionStatus::Exhausted => "exhausted",
        }
    }

    pub fn is_terminal(self) -> bool {
        self != SessionStatus::Active
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    config: SessionConfig,
    order: SelectionOrder,
    cursor: usize,
    annotated: AnnotatedSet,
    status: SessionStatus,
}

impl SessionState {
    pub fn new(config: SessionConfig, order: SelectionOrder) -> Self {
        let annotated = AnnotatedSet::with_labels(&config.label_set);
        let mut state = Self {
            config,
            order,
            cursor: 0,
            annotated,
            status: SessionStatus::Active,
        };
        state.status = state.compute_status();
        state
    }

    /// Rebuilds a session by re-applying exported records in order.
    pub fn replay(config: SessionConfig, order: SelectionOrder, records: &[ExportRecord]) -> Result<Self> {
        let mut state = Self::new(config, order);
        for r in records {
            if r.rank != state.cursor {
                return Err(Error::Validation(format!(
                    "record for {:?} has rank {}, expected {}",
                    r.id, r.rank, state.cursor
                )));
            }
            state.annotate(&r.id, &r.label)?;
        }
        Ok(state)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn order(&self) -> &SelectionOrder {
        &self.order
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn annotated(&self) -> &AnnotatedSet {
        &self.annotated
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn label_set(&self) -> &LabelSet {
        &self.config.label_set
    }

    pub fn n_classes(&self) -> usize {
        self.config.label_set.n_classes()
    }

    fn compute_status(&self) -> SessionStatus {
        let labels = self.config.label_set.labels();
        let complete = labels.len() >= 2
            && labels
                .iter()
                .all(|l| self.annotated.count(l) >= self.config.n_shots);
        if complete {
            SessionStatus::Complete
        } else if self.cursor >= self.order.len() {
            SessionStatus::Exhausted
        } else {
            SessionStatus::Active
        }
    }

    fn ensure_active(&self) -> Result<()> {
        match self.status {
            SessionStatus::Active => Ok(()),
            other => Err(Error::SessionNotActive(other.as_str())),
        }
    }

    /// The document to annotate next. Does not advance.
    pub fn next_document(&self) -> Result<&str> {
        self.ensure_active()?;
        Ok(&self.order.ranked_ids[self.cursor])
    }

    /// Records `label` for the current head. Either everything is applied or
    /// nothing is.
    pub fn annotate(&mut self, doc_id: &str, label: &str) -> Result<SessionStatus> {
        let head = self.next_document()?;
        if head != doc_id {
            return Err(Error::OutOfOrder {
                expected: head.to_string(),
                got: doc_id.to_string(),
            });
        }
        if !self.config.label_set.contains(label) {
            if !self.config.allow_new_labels {
                return Err(Error::UnknownLabel(label.to_string()));
            }
            if label.trim().is_empty() {
                return Err(Error::Validation("label is empty".into()));
            }
        }
        self.annotated.push(AnnotationRecord {
            id: doc_id.to_string(),
            label: label.to_string(),
        })?;
        self.config.label_set.push(label.to_string());
        self.cursor += 1;
        self.status = self.compute_status();
        Ok(self.status)
    }

    /// `θ` over a finished session. Errors if still active or nothing was
    /// annotated.
    pub fn overannotation_rate(&self) -> Result<f64> {
        if self.annotated.is_empty() {
            return Err(Error::Domain("no annotations yet".into()));
        }
        if !self.status.is_terminal() {
            return Err(Error::SessionNotActive("still active"));
        }
        Ok(self.theta_so_far())
    }

    /// Same ratio for a session in any state; 0 before the first annotation.
    pub fn theta_so_far(&self) -> f64 {
        theta(self.annotated.len(), self.n_classes(), self.config.n_shots)
    }

    /// Labels still short of `n_shots`, with how many are missing.
    pub fn deficits(&self) -> BTreeMap<String, usize> {
        self.config
            .label_set
            .labels()
            .iter()
            .filter_map(|l| {
                let have = self.annotated.count(l);
                (have < self.config.n_shots).then(|| (l.clone(), self.config.n_shots - have))
            })
            .collect()
    }

    pub fn export(&self) -> SessionExport {
        SessionExport::from_state(self)
    }
}

/// `annotations / (n_classes · n_shots)`, 0 when the denominator is 0.
pub fn theta(annotations: usize, n_classes: usize, n_shots: usize) -> f64 {
    let denom = n_classes * n_shots;
    if denom == 0 {
        0.0
    } else {
        annotations as f64 / denom as f64
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SessionState,
    pub theta: f64,
}

impl Simulation {
    pub fn status(&self) -> SessionStatus {
        self.state.status()
    }
}

/// Plays the session with each document's gold label as the annotator's answer.
pub fn simulate(corpus: &Corpus, order: &SelectionOrder, config: &SessionConfig) -> Result<Simulation> {
    let mut missing = Vec::new();
    for id in &order.ranked_ids {
        match corpus.get(id) {
            None => return Err(Error::UnknownId(id.clone())),
            Some(d) if d.gold_label.is_none() => missing.push(id.clone()),
            Some(_) => {}
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    let mut state = SessionState::new(config.clone(), order.clone());
    while state.status() == SessionStatus::Active {
        let id = state.next_document()?.to_string();
        let label = corpus
            .get(&id)
            .and_then(|d| d.gold_label.clone())
            .expect("checked above");
        state.annotate(&id, &label)?;
    }
    let theta = state.overannotation_rate()?;
    Ok(Simulation { state, theta })
}
