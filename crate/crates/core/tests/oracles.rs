use std::collections::{BTreeMap, HashMap};

use idsel::annotation::{simulate, SessionConfig};
use idsel::clustering::{Assignment, ClusterModel};
use idsel::corpus::{label_set_of, Corpus, Document};
use idsel::eval::{evaluate, fit, predict};
use idsel::experiment::{generate_orders, SelectorConfig};
use idsel::geometry::{similarity_matrix, EmbeddingSet};
use idsel::lexical::{bleu_text, exceeds_threshold, LexicalParams, Smoothing};
use idsel::selectors::{lls_order, oc_order, random_order, shuffled_ids, LlsMode, Method};
use idsel::synthetic::{generate, BlobSpec};

const CAT: &str = "the cat sat on the mat";
const CAT_IS: &str = "the cat is on the mat";

fn params(max_ngram: usize, smoothing: Smoothing) -> LexicalParams {
    LexicalParams {
        max_ngram,
        smoothing,
        ..LexicalParams::default()
    }
}

#[test]
fn similarity_matches_naive_loop() {
    let data = generate(&BlobSpec::new(vec![6, 5, 4], 3)).unwrap();
    let ids = data.train.ids();
    let sim = similarity_matrix(&data.embeddings, &ids).unwrap();
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate() {
            let x: Vec<f64> = data.embeddings.get(a).unwrap().iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = data.embeddings.get(b).unwrap().iter().map(|&v| v as f64).collect();
            let mut dot = 0.0;
            let mut nx = 0.0;
            let mut ny = 0.0;
            for k in 0..x.len() {
                dot += x[k] * y[k];
                nx += x[k] * x[k];
                ny += y[k] * y[k];
            }
            let expected = (dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0);
            assert!((sim.get(i, j) - expected).abs() < 1e-12, "{a} {b}");
        }
        assert!((sim.get(i, i) - 1.0).abs() < 1e-12);
    }
}

// Hand counts for CAT (candidate) vs CAT_IS (reference):
// unigrams 5/6, bigrams 3/5 (the cat, on the, the mat), trigrams 1/4
// (on the mat), 4-grams 0/3. Both sides have 6 tokens, so BP = 1.
#[test]
fn bleu_hand_values() {
    let strict4 = bleu_text(CAT, CAT_IS, &params(4, Smoothing::None)).unwrap();
    assert_eq!(strict4, 0.0);

    let strict3 = bleu_text(CAT, CAT_IS, &params(3, Smoothing::None)).unwrap();
    let expected3 = (5.0f64 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0).powf(1.0 / 3.0);
    assert!((strict3 - expected3).abs() < 1e-9);

    let eps4 = bleu_text(CAT, CAT_IS, &params(4, Smoothing::AddEpsilon)).unwrap();
    let expected_eps = (5.0f64 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0 * (1e-9 / 3.0)).powf(0.25);
    assert!((eps4 - expected_eps).abs() < 1e-9);

    // short candidate: all precisions 1, BP = exp(1 - 6/4)
    let short = bleu_text("the cat sat on", CAT, &params(4, Smoothing::None)).unwrap();
    assert!((short - (-0.5f64).exp()).abs() < 1e-9);

    // clipping: "the" appears once in the reference
    let clipped = bleu_text("the the the the", "the cat", &params(1, Smoothing::None)).unwrap();
    assert!((clipped - 0.25).abs() < 1e-9);

    // case and punctuation are normalized away
    let norm = bleu_text("The cat, sat.", "the cat sat", &params(3, Smoothing::None)).unwrap();
    assert!((norm - 1.0).abs() < 1e-9);
}

#[test]
fn bleu_self_similarity_is_one() {
    let data = generate(&BlobSpec::new(vec![10, 10], 8)).unwrap();
    for d in &data.train {
        if d.text.split_whitespace().count() >= 4 {
            assert_eq!(bleu_text(&d.text, &d.text, &LexicalParams::default()).unwrap(), 1.0);
        }
    }
    assert_eq!(bleu_text(CAT, CAT, &LexicalParams::default()).unwrap(), 1.0);
}

#[test]
fn threshold_is_strict() {
    let p = params(3, Smoothing::None);
    let a = Document::new("a", CAT);
    let b = Document::new("b", CAT_IS);
    let score = bleu_text(CAT, CAT_IS, &p).unwrap();
    assert!(exceeds_threshold(&a, &b, score - 1e-6, &p).unwrap());
    assert!(!exceeds_threshold(&a, &b, score, &p).unwrap());
    assert!(exceeds_threshold(&a, &b, 1.5, &p).is_err());
}

/// Straight replay of the shuffle plus threshold rule against the last kept
/// document.
fn lls_oracle(corpus: &Corpus, beta: f64, p: &LexicalParams, seed: u64) -> Vec<String> {
    let shuffled = shuffled_ids(corpus, seed);
    let mut kept = vec![shuffled[0].clone()];
    for id in &shuffled[1..] {
        let last = corpus.get(kept.last().unwrap()).unwrap();
        let score = bleu_text(&corpus.get(id).unwrap().text, &last.text, p).unwrap();
        if score <= beta {
            kept.push(id.clone());
        }
    }
    kept
}

fn six_docs() -> Corpus {
    Corpus::new(vec![
        Document::new("a", CAT),
        Document::new("b", CAT_IS),
        Document::new("c", "the cat sat on the mat today"),
        Document::new("d", "a dog barked at the mailman"),
        Document::new("e", "a dog barked at the postman"),
        Document::new("f", "stock prices fell sharply on monday"),
    ])
    .unwrap()
}

#[test]
fn lls_matches_replay() {
    let corpus = six_docs();
    let p = params(3, Smoothing::None);
    for seed in 0..50 {
        for beta in [0.0, 0.2, 0.4, 0.6, 1.0] {
            let order = lls_order(&corpus, beta, &p, seed, LlsMode::PreviousOnly).unwrap();
            assert_eq!(order.ranked_ids, lls_oracle(&corpus, beta, &p, seed), "seed {seed} beta {beta}");
            assert_eq!(order.truncated, order.ranked_ids.len() < corpus.len());
        }
    }
}

#[test]
fn lls_all_kept_pairs_stay_under_threshold() {
    let corpus = six_docs();
    let p = params(3, Smoothing::None);
    for seed in 0..50 {
        let all = lls_order(&corpus, 0.3, &p, seed, LlsMode::AllKept).unwrap();
        assert_eq!(all.ranked_ids[0], shuffled_ids(&corpus, seed)[0]);
        for (i, x) in all.ranked_ids.iter().enumerate() {
            for y in &all.ranked_ids[..i] {
                let s = bleu_text(&corpus.get(x).unwrap().text, &corpus.get(y).unwrap().text, &p).unwrap();
                assert!(s <= 0.3);
            }
        }
    }
}

#[test]
fn oc_round_robin_by_hand() {
    // cluster 0 has 3 members, cluster 1 has 2, plus 2 noise points
    let corpus = Corpus::new(
        ["a", "b", "c", "d", "e", "n1", "n2"]
            .iter()
            .map(|id| Document::new(*id, "text"))
            .collect(),
    )
    .unwrap();
    let model = ClusterModel::from_parts(vec![
        ("a".into(), Assignment::Cluster(0), 0.9),
        ("b".into(), Assignment::Cluster(0), 0.2),
        ("c".into(), Assignment::Cluster(0), 0.5),
        ("d".into(), Assignment::Cluster(1), 1.0),
        ("e".into(), Assignment::Cluster(1), 0.3),
        ("n1".into(), Assignment::Noise, 0.0),
        ("n2".into(), Assignment::Noise, 0.0),
    ])
    .unwrap();
    let order = oc_order(&corpus, &model).unwrap();
    assert_eq!(order.ranked_ids, ["b", "e", "n1", "c", "d", "n2", "a"]);
}

/// Twenty-line replay of the stopping rule.
fn theta_oracle(corpus: &Corpus, order: &[String], n_shots: usize) -> f64 {
    let labels = label_set_of(corpus).unwrap();
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut annotated = 0;
    for id in order {
        let label = corpus.get(id).unwrap().gold_label.clone().unwrap();
        *counts.entry(label).or_default() += 1;
        annotated += 1;
        if labels.labels().iter().all(|l| counts.get(l).copied().unwrap_or(0) >= n_shots) {
            break;
        }
    }
    annotated as f64 / (labels.n_classes() * n_shots) as f64
}

#[test]
fn theta_matches_replay_on_imbalanced_fixture() {
    let data = generate(&BlobSpec::new(vec![120, 40, 20, 8], 11)).unwrap();
    let labels = label_set_of(&data.train).unwrap();
    for seed in 0..10 {
        let order = random_order(&data.train, seed).unwrap();
        for n_shots in [1, 4, 8, 16] {
            let cfg = SessionConfig::new(n_shots, labels.clone(), false).unwrap();
            let sim = simulate(&data.train, &order, &cfg).unwrap();
            assert_eq!(sim.theta, theta_oracle(&data.train, &order.ranked_ids, n_shots));
        }
    }
}

#[test]
fn random_order_is_uniform() {
    let corpus = Corpus::new(["a", "b", "c"].iter().map(|id| Document::new(*id, "x")).collect()).unwrap();
    let trials = 6000u64;
    let mut counts: BTreeMap<Vec<String>, u64> = BTreeMap::new();
    for seed in 0..trials {
        *counts.entry(random_order(&corpus, seed).unwrap().ranked_ids).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    let expected = trials as f64 / 6.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 5 degrees of freedom, p = 0.001
    assert!(chi2 < 20.52, "chi2 {chi2}");
}

fn nearest_centroid_oracle(
    train: &[(String, String)],
    emb: &EmbeddingSet,
    query: &str,
) -> String {
    let mut sums: BTreeMap<&str, (Vec<f64>, f64)> = BTreeMap::new();
    for (id, label) in train {
        let e = sums.entry(label).or_insert((vec![0.0; emb.dim()], 0.0));
        for (s, v) in e.0.iter_mut().zip(emb.get(id).unwrap()) {
            *s += *v as f64;
        }
        e.1 += 1.0;
    }
    let q: Vec<f64> = emb.get(query).unwrap().iter().map(|&v| v as f64).collect();
    let mut best = (String::new(), f64::NEG_INFINITY);
    for (label, (sum, n)) in sums {
        let c: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let dot: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
        let cos = dot / (c.iter().map(|a| a * a).sum::<f64>().sqrt() * q.iter().map(|a| a * a).sum::<f64>().sqrt());
        if cos > best.1 {
            best = (label.to_string(), cos);
        }
    }
    best.0
}

#[test]
fn predictions_match_independent_loop() {
    let spec = BlobSpec::new(vec![30, 30, 30], 4).with_test(vec![20, 20, 20]).with_geometry(12, 1.5, 1.0);
    let data = generate(&spec).unwrap();
    let order = random_order(&data.train, 2).unwrap();
    let cfg = SessionConfig::new(5, label_set_of(&data.train).unwrap(), false).unwrap();
    let sim = simulate(&data.train, &order, &cfg).unwrap();
    let train: Vec<(String, String)> =
        sim.state.annotated().records().iter().map(|r| (r.id.clone(), r.label.clone())).collect();
    let model = fit(sim.state.annotated(), &data.embeddings).unwrap();
    let test_ids = data.test.ids();
    let preds = predict(&model, &data.embeddings, &test_ids).unwrap();
    for id in &test_ids {
        assert_eq!(preds[id], nearest_centroid_oracle(&train, &data.embeddings, id), "{id}");
    }
}

#[test]
fn separable_blobs_classify_perfectly_with_every_selector() {
    let spec = BlobSpec::new(vec![40, 25, 15], 6).with_test(vec![10, 10, 10]).with_geometry(12, 10.0, 0.5);
    let data = generate(&spec).unwrap();
    let labels = label_set_of(&data.train).unwrap();
    let selectors: Vec<SelectorConfig> = Method::ALL.iter().map(|&m| SelectorConfig::new(m)).collect();
    let orders = generate_orders(&data.train, Some(&data.embeddings), &selectors, 3, 0).unwrap();
    for order in &orders {
        for n_shots in [1, 4, 8] {
            let cfg = SessionConfig::new(n_shots, labels.clone(), false).unwrap();
            let sim = simulate(&data.train, order, &cfg).unwrap();
            let trained = idsel::annotation::AnnotatedSet::from_records(sim.state.annotated().records().to_vec()).unwrap();
            let model = fit(&trained, &data.embeddings).unwrap();
            let preds = predict(&model, &data.embeddings, &data.test.ids()).unwrap();
            let report = evaluate(&preds, &data.test, &labels).unwrap();
            assert_eq!(report.accuracy, 1.0, "{} n_shots {n_shots}", order.method);
        }
    }
}
