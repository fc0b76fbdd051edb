//! Documents, corpora and label sets, plus the JSON-lines file formats.
//!
//! A corpus file holds one JSON object per line with keys `id`, `text` and an
//! optional `label`. A selection file holds one `{"rank": k, "id": ...}` object
//! per line, ranks starting at 0.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A text item to be annotated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold_label: None,
        }
    }

    pub fn labeled(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold_label: Some(label.into()),
        }
    }
}

/// An ordered, id-unique collection of documents. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
    provenance: Option<String>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and blank texts.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (pos, doc) in documents.iter().enumerate() {
            if doc.text.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "document {:?} has empty text",
                    doc.id
                )));
            }
            if index.insert(doc.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self {
            documents,
            index,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&pos| &self.documents[pos])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Ids in file order.
    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

/// Distinct class names in a stable order. Always holds at least two classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let set = Self::open(labels)?;
        if set.n_classes() < 2 {
            return Err(Error::Validation(format!(
                "a label set needs at least 2 classes, got {}",
                set.n_classes()
            )));
        }
        Ok(set)
    }

    /// A label set that may still be growing (fewer than two classes allowed).
    /// Only annotation sessions that accept new labels start from one of these.
    pub fn open(labels: Vec<String>) -> Result<Self> {
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::Validation(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub(crate) fn push(&mut self, label: String) {
        if !self.contains(&label) {
            self.labels.push(label);
        }
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        LabelSet::open(labels)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Self {
        set.labels
    }
}

/// Reads a JSON-lines corpus. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let corpus = read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    Ok(corpus.with_provenance(path.display().to_string()))
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if doc.text.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("document {:?} has empty text", doc.id),
            });
        }
        if seen.insert(doc.id.clone(), line_no).is_some() {
            return Err(Error::DuplicateId(doc.id));
        }
        documents.push(doc);
    }
    Corpus::new(documents)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    for doc in corpus {
        let line = serde_json::to_string(doc).expect("documents always serialize");
        writeln!(writer, "{line}").map_err(|e| Error::io("<corpus>", e))?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_corpus(corpus, &mut writer)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Distinct gold labels in order of first appearance.
pub fn label_set_of(corpus: &Corpus) -> Result<LabelSet> {
    let missing: Vec<String> = corpus
        .iter()
        .filter(|d| d.gold_label.is_none())
        .map(|d| d.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing));
    }
    let mut labels: Vec<String> = Vec::new();
    for doc in corpus {
        let label = doc.gold_label.as_ref().expect("checked above");
        if !labels.contains(label) {
            labels.push(label.clone());
        }
    }
    LabelSet::new(labels)
}

#[derive(Serialize, Deserialize)]
struct SelectionLine<'a> {
    rank: usize,
    #[serde(borrow)]
    id: std::borrow::Cow<'a, str>,
}

/// Writes ranked ids as `{"rank":k,"id":...}` lines.
pub fn write_selection<W: Write>(ranked_ids: &[String], mut writer: W) -> Result<()> {
    for (rank, id) in ranked_ids.iter().enumerate() {
        let line = serde_json::to_string(&SelectionLine {
            rank,
            id: id.as_str().into(),
        })
        .expect("selection lines always serialize");
        writeln!(writer, "{line}").map_err(|e| Error::io("<selection>", e))?;
    }
    Ok(())
}

/// Saves a selection order. Only the ranked ids are written; run metadata goes
/// to a separate file at the caller's discretion.
pub fn save_selection(order: &crate::selectors::SelectionOrder, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_selection(&order.ranked_ids, &mut writer).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads a selection file back into ranked ids. Ranks must be 0, 1, 2, ...
pub fn load_selection(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids: Vec<String> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SelectionLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        if parsed.rank != ids.len() {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected rank {}, found {}", ids.len(), parsed.rank),
            });
        }
        ids.push(parsed.id.into_owned());
    }
    Ok(ids)
}
