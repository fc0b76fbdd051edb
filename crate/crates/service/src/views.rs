//! Response bodies.

use std::collections::BTreeMap;

use idsel::annotation::{SessionState, SessionStatus};
use idsel::selectors::Method;
use serde::{Deserialize, Serialize};

use crate::error::ErrorBody;

/// Counts and θ-so-far for a ready session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub status: SessionStatus,
    /// Rank of the next document; equals `annotated` by construction.
    pub cursor: usize,
    pub total: usize,
    pub annotated: usize,
    pub n_shots: usize,
    pub n_classes: usize,
    pub labels: Vec<String>,
    pub per_class_counts: BTreeMap<String, usize>,
    pub theta_so_far: f64,
}

impl Progress {
    pub fn of(state: &SessionState) -> Self {
        Self {
            status: state.status(),
            cursor: state.cursor(),
            total: state.order().len(),
            annotated: state.annotated().len(),
            n_shots: state.config().n_shots,
            n_classes: state.n_classes(),
            labels: state.label_set().labels().to_vec(),
            per_class_counts: state.annotated().per_class_counts().clone(),
            theta_so_far: state.theta_so_far(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub id: String,
    pub text: String,
    pub rank: usize,
}

/// `GET /sessions/{id}/next`: the head document while active, otherwise the
/// terminal status with the final θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextView {
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<DocumentView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    /// Unix time in milliseconds.
    pub created_at: u64,
    pub method: Method,
    /// `pending`, `failed`, or the session status.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress: Option<Progress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}
