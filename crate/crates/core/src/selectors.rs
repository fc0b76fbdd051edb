//! Ordering algorithms that turn a corpus into an annotation queue.
//!
//! - [`random_order`]: seeded uniform shuffle (the baseline).
//! - [`rss_order`]: farthest-point traversal on cosine similarity. Starts from
//!   the least similar pair, then repeatedly emits the document whose largest
//!   similarity to anything already emitted is smallest.
//! - [`oc_order`]: round-robin over density clusters, largest first, popping
//!   each cluster's least confident member per round.
//! - [`lls_order`]: seeded shuffle that drops documents lexically too close to
//!   what was kept before them.
//!
//! Every tie is broken by ascending document id.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{order_clusters, Assignment, ClusterModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::geometry::SimilarityMatrix;
use crate::lexical::{check_beta, Bleu, LexicalComparator, LexicalParams};

/// Default LLS threshold. Not a tuned value; override per corpus.
pub const DEFAULT_BETA: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Rss,
    Oc,
    Lls,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Rss, Method::Oc, Method::Lls];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Rss => "rss",
            Method::Oc => "oc",
            Method::Lls => "lls",
        }
    }

    /// Whether the order depends on a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Random | Method::Lls)
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Method::Rss | Method::Oc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Method::Random),
            "rss" => Ok(Method::Rss),
            "oc" => Ok(Method::Oc),
            "lls" => Ok(Method::Lls),
            other => Err(Error::Validation(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlsMode {
    /// Compare each candidate with the most recently kept document.
    #[default]
    PreviousOnly,
    /// Compare each candidate with every kept document and use the maximum.
    AllKept,
}

impl LlsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LlsMode::PreviousOnly => "previous_only",
            LlsMode::AllKept => "all_kept",
        }
    }
}

/// A ranked list of document ids, plus what produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionOrder {
    pub method: Method,
    pub ranked_ids: Vec<String>,
    pub params_fingerprint: String,
    /// Only LLS can drop documents; set when it did.
    pub truncated: bool,
}

impl SelectionOrder {
    pub fn len(&self) -> usize {
        self.ranked_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_ids.is_empty()
    }
}

/// Fisher–Yates over the corpus file order with a ChaCha8 stream seeded by `seed`.
pub fn shuffled_ids(corpus: &Corpus, seed: u64) -> Vec<String> {
    let mut ids = corpus.ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids
}

pub fn random_order(corpus: &Corpus, seed: u64) -> Result<SelectionOrder> {
    if corpus.is_empty() {
        return Err(Error::Validation("cannot order an empty corpus".into()));
    }
    Ok(SelectionOrder {
        method: Method::Random,
        ranked_ids: shuffled_ids(corpus, seed),
        params_fingerprint: format!("method=random;seed={seed}"),
        truncated: false,
    })
}

pub fn rss_order(corpus: &Corpus, sim: &SimilarityMatrix) -> Result<SelectionOrder> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::Validation(format!("RSS needs at least 2 documents, got {n}")));
    }
    // candidates in ascending id order, so strict comparisons implement the tie rule
    let mut ids: Vec<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
    ids.sort_unstable();
    let rows: Vec<usize> = ids
        .iter()
        .map(|id| sim.index_of(id).ok_or_else(|| Error::UnknownId(id.to_string())))
        .collect::<Result<_>>()?;

    let mut seed = (0, 1);
    let mut seed_sim = f64::INFINITY;
    for i in 0..n {
        let row = sim.row(rows[i]);
        for j in i + 1..n {
            let s = row[rows[j]];
            if s < seed_sim {
                seed_sim = s;
                seed = (i, j);
            }
        }
    }

    let mut ranked = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    let mut closest = vec![f64::NEG_INFINITY; n];
    let mut emit = |k: usize, taken: &mut Vec<bool>, closest: &mut Vec<f64>| {
        taken[k] = true;
        ranked.push(ids[k].to_string());
        let row = sim.row(rows[k]);
        for c in 0..n {
            if !taken[c] {
                closest[c] = closest[c].max(row[rows[c]]);
            }
        }
    };
    emit(seed.0, &mut taken, &mut closest);
    emit(seed.1, &mut taken, &mut closest);
    for _ in 2..n {
        let mut pick = usize::MAX;
        for c in 0..n {
            if !taken[c] && (pick == usize::MAX || closest[c] < closest[pick]) {
                pick = c;
            }
        }
        emit(pick, &mut taken, &mut closest);
    }

    Ok(SelectionOrder {
        method: Method::Rss,
        ranked_ids: ranked,
        params_fingerprint: "method=rss;sim=cosine;aggregate=max".into(),
        truncated: false,
    })
}

pub fn oc_order(corpus: &Corpus, model: &ClusterModel) -> Result<SelectionOrder> {
    let clusters = order_clusters(model);
    let mut queues: Vec<Vec<(f64, &str)>> = vec![Vec::new(); clusters.len()];
    let mut noise: Vec<(f64, &str)> = Vec::new();
    for doc in corpus {
        let assignment = model
            .assignment(&doc.id)
            .ok_or_else(|| Error::UnknownId(doc.id.clone()))?;
        let p = model.membership(&doc.id).unwrap_or(0.0);
        match assignment {
            Assignment::Noise => noise.push((p, &doc.id)),
            Assignment::Cluster(c) => {
                let slot = clusters
                    .iter()
                    .position(|&x| x == c)
                    .expect("assigned cluster has a size entry");
                queues[slot].push((p, &doc.id));
            }
        }
    }
    queues.push(noise);
    let mut queues: Vec<VecDeque<&str>> = queues
        .into_iter()
        .map(|mut q| {
            q.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            q.into_iter().map(|(_, id)| id).collect()
        })
        .collect();

    let mut ranked = Vec::with_capacity(corpus.len());
    while ranked.len() < corpus.len() {
        for q in queues.iter_mut() {
            if let Some(id) = q.pop_front() {
                ranked.push(id.to_string());
            }
        }
    }

    let fingerprint = match model.params() {
        Some(p) => format!(
            "method=oc;min_cluster_size={};min_samples={};allow_single_cluster={};clusters={};noise={}",
            p.min_cluster_size,
            p.min_samples,
            p.allow_single_cluster,
            model.n_clusters(),
            model.noise_count()
        ),
        None => format!(
            "method=oc;clusters={};noise={}",
            model.n_clusters(),
            model.noise_count()
        ),
    };
    Ok(SelectionOrder {
        method: Method::Oc,
        ranked_ids: ranked,
        params_fingerprint: fingerprint,
        truncated: false,
    })
}

pub fn lls_order(
    corpus: &Corpus,
    beta: f64,
    params: &LexicalParams,
    seed: u64,
    mode: LlsMode,
) -> Result<SelectionOrder> {
    lls_order_with(corpus, beta, &Bleu::new(*params)?, seed, mode)
}

/// LLS with any lexical comparator. Documents with no comparable content
/// (e.g. only punctuation) score 0 against everything and are always kept.
pub fn lls_order_with<C: LexicalComparator>(
    corpus: &Corpus,
    beta: f64,
    comparator: &C,
    seed: u64,
    mode: LlsMode,
) -> Result<SelectionOrder> {
    check_beta(beta)?;
    if corpus.is_empty() {
        return Err(Error::Validation("cannot order an empty corpus".into()));
    }
    let shuffled = shuffled_ids(corpus, seed);
    let prepared: Vec<C::Prepared> = shuffled
        .iter()
        .map(|id| comparator.prepare(&corpus.get(id).expect("id from corpus").text))
        .collect();

    let score = |cand: usize, reference: usize| -> Result<f64> {
        let (c, r) = (&prepared[cand], &prepared[reference]);
        if comparator.is_blank(c) || comparator.is_blank(r) {
            return Ok(0.0);
        }
        comparator.compare(c, r)
    };

    let mut kept: Vec<usize> = vec![0];
    for cand in 1..shuffled.len() {
        let too_close = match mode {
            LlsMode::PreviousOnly => score(cand, *kept.last().expect("non-empty"))? > beta,
            LlsMode::AllKept => {
                let mut hit = false;
                for &k in &kept {
                    if score(cand, k)? > beta {
                        hit = true;
                        break;
                    }
                }
                hit
            }
        };
        if !too_close {
            kept.push(cand);
        }
    }

    let truncated = kept.len() < shuffled.len();
    Ok(SelectionOrder {
        method: Method::Lls,
        ranked_ids: kept.into_iter().map(|i| shuffled[i].clone()).collect(),
        params_fingerprint: format!(
            "method=lls;seed={seed};beta={beta};mode={};comparator={}",
            mode.as_str(),
            comparator.describe()
        ),
        truncated,
    })
}
