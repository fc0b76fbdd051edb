use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use idsel::annotation::SessionConfig;
use idsel::clustering::ClusterParams;
use idsel::corpus::{label_set_of, LabelSet};
use idsel::experiment::{build_order, SelectorConfig};
use idsel::lexical::{LexicalParams, Smoothing};
use idsel::selectors::{LlsMode, Method, DEFAULT_BETA};
use serde::{Deserialize, Serialize};

use crate::app::{failed_error, pending_error, AppState, Phase, Slot};
use crate::error::{ApiError, ApiResult};
use crate::views::{DocumentView, NextView, Progress, SessionView};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    /// Seed for random and LLS orders.
    pub seed: u64,
    pub beta: Option<f64>,
    pub lls_mode: Option<LlsMode>,
    pub max_ngram: Option<usize>,
    pub smoothing: Option<Smoothing>,
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
}

impl MethodParams {
    fn selector(&self, method: Method, n_docs: usize) -> idsel::Result<SelectorConfig> {
        let lexical_default = LexicalParams::default();
        let cluster = if self.min_cluster_size.is_some() || self.min_samples.is_some() {
            let d = ClusterParams::default_for(n_docs);
            Some(ClusterParams::new(
                self.min_cluster_size.unwrap_or(d.min_cluster_size),
                self.min_samples.unwrap_or(d.min_samples),
            )?)
        } else {
            None
        };
        let cfg = SelectorConfig {
            method,
            beta: self.beta.unwrap_or(DEFAULT_BETA),
            lls_mode: self.lls_mode.unwrap_or_default(),
            lexical: LexicalParams {
                max_ngram: self.max_ngram.unwrap_or(lexical_default.max_ngram),
                smoothing: self.smoothing.unwrap_or(lexical_default.smoothing),
                ..lexical_default
            },
            cluster,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    /// Corpus JSONL path; the server default when omitted.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    pub method: Method,
    #[serde(default)]
    pub params: MethodParams,
    pub n_shots: usize,
    /// Defaults to the corpus's gold labels in first-appearance order.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub allow_new_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRequest {
    pub doc_id: String,
    pub label: String,
}

fn slot_or_404(app: &AppState, id: &str) -> ApiResult<Arc<Slot>> {
    app.session(id)
        .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn view(slot: &Slot) -> SessionView {
    let phase = slot.lock();
    let mut v = SessionView {
        session_id: slot.id.clone(),
        created_at: slot.created_at,
        method: slot.method,
        status: String::new(),
        params_fingerprint: None,
        truncated: None,
        progress: None,
        error: None,
    };
    match &*phase {
        Phase::Pending => v.status = "pending".into(),
        Phase::Failed(body) => {
            v.status = "failed".into();
            v.error = Some(body.clone());
        }
        Phase::Ready(live) => {
            v.status = live.state.status().as_str().into();
            v.params_fingerprint = Some(live.state.order().params_fingerprint.clone());
            v.truncated = Some(live.state.order().truncated);
            v.progress = Some(Progress::of(&live.state));
        }
    }
    v
}

pub async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

pub async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let Json(req) = body?;
    if req.n_shots == 0 {
        return Err(ApiError::validation("n_shots must be at least 1"));
    }
    let corpus_path = req
        .corpus
        .clone()
        .or_else(|| app.config().default_corpus.clone())
        .ok_or_else(|| ApiError::validation("no corpus given and the server has no default"))?;
    let embeddings_path = req.embeddings.clone().or_else(|| app.config().default_embeddings.clone());
    let seed = req.params.seed;
    let journal_corpus = corpus_path.clone();
    if req.method.needs_embeddings() && embeddings_path.is_none() {
        return Err(ApiError::validation(format!("embeddings required for method {}", req.method)));
    }

    let loader = app.clone();
    let (corpus, embeddings, selector, config) = blocking(move || {
        let corpus = loader.corpus(&corpus_path)?;
        let embeddings = match (&embeddings_path, req.method.needs_embeddings()) {
            (Some(p), true) => Some(loader.embeddings(p)?),
            _ => None,
        };
        let selector = req.params.selector(req.method, corpus.len())?;
        let labels = match &req.labels {
            Some(l) if req.allow_new_labels => LabelSet::open(l.clone())?,
            Some(l) => LabelSet::new(l.clone())?,
            None => label_set_of(&corpus)?,
        };
        let config = SessionConfig::new(req.n_shots, labels, req.allow_new_labels)?;
        Ok((corpus, embeddings, selector, config))
    })
    .await?;

    let background = corpus.len() > app.config().background_threshold;
    let slot = app.insert_pending(selector.method);
    let worker = {
        let (app, slot) = (app.clone(), slot.clone());
        move || -> ApiResult<()> {
            let order = build_order(&corpus, embeddings.as_deref(), &selector, seed)?;
            app.activate(&slot, &journal_corpus, corpus, config, order)
        }
    };
    if background {
        let (bg_app, bg_slot) = (app.clone(), slot.clone());
        tokio::spawn(async move {
            if let Err(e) = blocking(worker).await {
                tracing::warn!(session = %bg_slot.id, error = %e.body.message, "order computation failed");
                bg_app.fail(&bg_slot, e.body);
            }
        });
        return Ok((StatusCode::ACCEPTED, Json(view(&slot))));
    }
    if let Err(e) = blocking(worker).await {
        // the client never saw this id
        app.remove(&slot.id);
        return Err(e);
    }
    tracing::info!(session = %slot.id, method = %slot.method, "session created");
    Ok((StatusCode::CREATED, Json(view(&slot))))
}

pub async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let slot = slot_or_404(&app, &id)?;
    Ok(Json(view(&slot)))
}

pub async fn get_next(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<NextView>> {
    let slot = slot_or_404(&app, &id)?;
    let phase = slot.lock();
    let live = match &*phase {
        Phase::Ready(live) => live,
        Phase::Pending => return Err(pending_error()),
        Phase::Failed(body) => return Err(failed_error(body)),
    };
    let state = &live.state;
    let progress = Progress::of(state);
    if state.status().is_terminal() {
        return Ok(Json(NextView {
            status: state.status(),
            document: None,
            theta: Some(state.theta_so_far()),
            progress,
        }));
    }
    let id = state.next_document()?;
    let doc = live
        .corpus
        .get(id)
        .ok_or_else(|| ApiError::internal(format!("ordered id {id:?} is missing from the corpus")))?;
    Ok(Json(NextView {
        status: state.status(),
        document: Some(DocumentView {
            id: doc.id.clone(),
            text: doc.text.clone(),
            rank: state.cursor(),
        }),
        theta: None,
        progress,
    }))
}

pub async fn post_annotation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AnnotationRequest>, JsonRejection>,
) -> ApiResult<Json<Progress>> {
    let Json(req) = body?;
    let slot = slot_or_404(&app, &id)?;
    let progress = blocking(move || app.annotate(&slot, &req.doc_id, &req.label)).await?;
    Ok(Json(progress))
}

pub async fn export_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = slot_or_404(&app, &id)?;
    let body = {
        let phase = slot.lock();
        match &*phase {
            Phase::Ready(live) => live.state.export().to_jsonl(),
            Phase::Pending => return Err(pending_error()),
            Phase::Failed(body) => return Err(failed_error(body)),
        }
    };
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub async fn not_found() -> ApiError {
    ApiError::not_found("no such route")
}
