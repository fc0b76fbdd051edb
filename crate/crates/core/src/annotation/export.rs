use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{SessionState, SessionStatus};
use crate::error::{Error, Result};
use crate::selectors::Method;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub rank: usize,
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub method: Method,
    pub n_shots: usize,
    pub n_classes: usize,
    pub total_annotations: usize,
    pub theta: f64,
    pub status: SessionStatus,
    pub per_class_counts: BTreeMap<String, usize>,
    /// Final label set in its stable order.
    pub labels: Vec<String>,
    /// Classes short of `n_shots` (empty unless exhausted or still active).
    pub deficit: BTreeMap<String, usize>,
    pub params_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: ExportSummary,
}

/// Records as JSON lines followed by one `{"summary": {...}}` line.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionExport {
    pub records: Vec<ExportRecord>,
    pub summary: ExportSummary,
}

impl SessionExport {
    pub fn from_state(state: &SessionState) -> Self {
        let records = state
            .annotated()
            .records()
            .iter()
            .enumerate()
            .map(|(rank, r)| ExportRecord {
                rank,
                id: r.id.clone(),
                label: r.label.clone(),
            })
            .collect();
        let summary = ExportSummary {
            method: state.order().method,
            n_shots: state.config().n_shots,
            n_classes: state.n_classes(),
            total_annotations: state.annotated().len(),
            theta: state.theta_so_far(),
            status: state.status(),
            per_class_counts: state.annotated().per_class_counts().clone(),
            labels: state.label_set().labels().to_vec(),
            deficit: state.deficits(),
            params_fingerprint: state.order().params_fingerprint.clone(),
        };
        Self { records, summary }
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut writer, r)?;
            writer.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut writer,
            &SummaryLine {
                summary: self.summary.clone(),
            },
        )?;
        writer.write_all(b"\n")
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        let mut summary = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<export>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |e: serde_json::Error| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            };
            if summary.is_some() {
                return Err(Error::Parse {
                    line: n + 1,
                    message: "content after summary line".into(),
                });
            }
            if line.trim_start().starts_with("{\"summary\"") {
                let s: SummaryLine = serde_json::from_str(&line).map_err(parse_err)?;
                summary = Some(s.summary);
            } else {
                records.push(serde_json::from_str::<ExportRecord>(&line).map_err(parse_err)?);
            }
        }
        let summary = summary.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing summary line".into(),
        })?;
        Ok(Self { records, summary })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read_jsonl(text.as_bytes())
    }

    /// θ recomputed from the records and the summary's class and shot counts.
    pub fn recomputed_theta(&self) -> f64 {
        super::theta(self.records.len(), self.summary.n_classes, self.summary.n_shots)
    }
}
