//! Seeded synthetic corpora: one Gaussian blob per class in embedding space
//! and class-flavoured pseudo-word texts. Used by tests and the `synth`
//! command.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::geometry::EmbeddingSet;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ren", "tu", "sa", "vo", "ni", "pel", "dra", "ko", "zu", "fen", "ta", "bri", "mo",
];
const SHARED_VOCAB: usize = 40;
const CLASS_VOCAB: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    /// Pool size per class.
    pub class_counts: Vec<usize>,
    /// Held-out size per class; may be all zeros.
    pub test_counts: Vec<usize>,
    pub dim: usize,
    /// Norm of each class centre. Centres lie on distinct coordinate axes.
    pub separation: f64,
    /// Per-coordinate standard deviation around the centre.
    pub spread: f64,
    /// Fraction of tokens drawn from the class vocabulary.
    pub class_word_rate: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn new(class_counts: Vec<usize>, seed: u64) -> Self {
        let k = class_counts.len();
        Self {
            test_counts: vec![0; k],
            class_counts,
            dim: k.max(2) * 4,
            separation: 4.0,
            spread: 1.0,
            class_word_rate: 0.6,
            seed,
        }
    }

    pub fn with_test(mut self, test_counts: Vec<usize>) -> Self {
        self.test_counts = test_counts;
        self
    }

    pub fn with_geometry(mut self, dim: usize, separation: f64, spread: f64) -> Self {
        self.dim = dim;
        self.separation = separation;
        self.spread = spread;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.class_counts.len();
        if k < 2 {
            return Err(Error::Validation("need at least two classes".into()));
        }
        if self.test_counts.len() != k {
            return Err(Error::Validation("test_counts must have one entry per class".into()));
        }
        if self.class_counts.contains(&0) {
            return Err(Error::Validation("every class needs at least one pool document".into()));
        }
        if self.dim < k {
            return Err(Error::Validation(format!("dim {} is smaller than the class count {k}", self.dim)));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::Validation("separation must be positive".into()));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(Error::Validation("spread must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.class_word_rate) {
            return Err(Error::Validation("class_word_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Corpus,
    pub test: Corpus,
    /// Vectors for both splits.
    pub embeddings: EmbeddingSet,
}

pub fn class_name(c: usize) -> String {
    format!("class{c}")
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect()
}

fn vocabulary(rng: &mut ChaCha8Rng, size: usize, taken: &mut Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let w = pseudo_word(rng);
        if !taken.contains(&w) {
            taken.push(w.clone());
            out.push(w);
        }
    }
    out
}

pub fn generate(spec: &BlobSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let k = spec.class_counts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::Validation(e.to_string()))?;

    let mut taken = Vec::new();
    let shared = vocabulary(&mut rng, SHARED_VOCAB, &mut taken);
    let class_vocab: Vec<Vec<String>> = (0..k).map(|_| vocabulary(&mut rng, CLASS_VOCAB, &mut taken)).collect();

    // class of every pool and test slot, shuffled so classes interleave
    let mut pool: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, spec.class_counts[c])).collect();
    let mut held: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, spec.test_counts[c])).collect();
    pool.shuffle(&mut rng);
    held.shuffle(&mut rng);

    let mut make = |prefix: &str, classes: &[usize]| -> (Vec<Document>, Vec<(String, Vec<f32>)>) {
        let width = classes.len().max(1).to_string().len().max(4);
        let mut docs = Vec::with_capacity(classes.len());
        let mut rows = Vec::with_capacity(classes.len());
        for (i, &c) in classes.iter().enumerate() {
            let id = format!("{prefix}{i:0width$}");
            let len = rng.random_range(6..=14);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(spec.class_word_rate) {
                        class_vocab[c][rng.random_range(0..CLASS_VOCAB)].as_str()
                    } else {
                        shared[rng.random_range(0..SHARED_VOCAB)].as_str()
                    }
                })
                .collect();
            let mut v: Vec<f32> = (0..spec.dim).map(|_| noise.sample(&mut rng) as f32).collect();
            v[c] += spec.separation as f32;
            if v.iter().all(|&x| x == 0.0) {
                v[c] = 1.0;
            }
            docs.push(Document::labeled(id.clone(), words.join(" "), class_name(c)));
            rows.push((id, v));
        }
        (docs, rows)
    };
    let (train_docs, mut rows) = make("d", &pool);
    let (test_docs, test_rows) = make("t", &held);
    rows.extend(test_rows);

    Ok(SyntheticData {
        train: Corpus::new(train_docs)?.with_provenance(format!("synthetic:seed={}", spec.seed)),
        test: Corpus::new(test_docs)?,
        embeddings: EmbeddingSet::new(spec.dim, rows)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_ids() {
        let d = generate(&BlobSpec::new(vec![5, 3], 1).with_test(vec![2, 2])).unwrap();
        assert_eq!(d.train.len(), 8);
        assert_eq!(d.test.len(), 4);
        assert_eq!(d.embeddings.len(), 12);
        let c0 = d.train.iter().filter(|x| x.gold_label.as_deref() == Some("class0")).count();
        assert_eq!(c0, 5);
        assert!(d.train.contains("d0000") && d.test.contains("t0003"));
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate(&BlobSpec::new(vec![4, 4], 9)).unwrap();
        let b = generate(&BlobSpec::new(vec![4, 4], 9)).unwrap();
        assert_eq!(a.train.documents(), b.train.documents());
        assert_eq!(a.embeddings.get("d0001"), b.embeddings.get("d0001"));
        let c = generate(&BlobSpec::new(vec![4, 4], 10)).unwrap();
        assert_ne!(a.train.documents(), c.train.documents());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&BlobSpec::new(vec![5], 0)).is_err());
        assert!(generate(&BlobSpec::new(vec![5, 0], 0)).is_err());
        assert!(generate(&BlobSpec::new(vec![5, 5], 0).with_geometry(1, 1.0, 1.0)).is_err());
    }
}
