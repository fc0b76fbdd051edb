//! Batch experiments: generate orders for several selectors, simulate
//! annotation over an `n_shots` grid, and aggregate θ (and classifier scores)
//! across seeds.
//!
//! Per-repeat seeds are `base_seed + i`. Work is spread over the rayon pool
//! but results are collected and summed in a fixed order, so reports do not
//! depend on the thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{simulate, AnnotatedSet, SessionConfig, SessionStatus};
use crate::clustering::{hdbscan, ClusterParams};
use crate::corpus::{label_set_of, Corpus, LabelSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, fit, predict};
use crate::geometry::{similarity_matrix, EmbeddingSet};
use crate::lexical::LexicalParams;
use crate::selectors::{
    lls_order, oc_order, random_order, rss_order, LlsMode, Method, SelectionOrder, DEFAULT_BETA,
};

/// `n_shots` values used when none are given.
pub const DEFAULT_N_SHOTS: [usize; 4] = [8, 16, 32, 64];
pub const DEFAULT_REPEATS: usize = 10;
/// Normal-approximation 95% quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub method: Method,
    pub beta: f64,
    pub lls_mode: LlsMode,
    pub lexical: LexicalParams,
    /// `None` means [`ClusterParams::default_for`] the corpus size.
    pub cluster: Option<ClusterParams>,
}

impl SelectorConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            beta: DEFAULT_BETA,
            lls_mode: LlsMode::PreviousOnly,
            lexical: LexicalParams::default(),
            cluster: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::Lls {
            crate::lexical::check_beta(self.beta)?;
            self.lexical.validate()?;
        }
        if let Some(p) = &self.cluster {
            p.validate()?;
        }
        Ok(())
    }
}

/// Builds one order. `seed` is ignored by deterministic methods.
pub fn build_order(
    corpus: &Corpus,
    embeddings: Option<&EmbeddingSet>,
    cfg: &SelectorConfig,
    seed: u64,
) -> Result<SelectionOrder> {
    cfg.validate()?;
    let need_emb = || {
        embeddings.ok_or_else(|| Error::Validation(format!("embeddings required for method {}", cfg.method)))
    };
    match cfg.method {
        Method::Random => random_order(corpus, seed),
        Method::Lls => lls_order(corpus, cfg.beta, &cfg.lexical, seed, cfg.lls_mode),
        Method::Rss => {
            let sim = similarity_matrix(need_emb()?, &corpus.ids())?;
            rss_order(corpus, &sim)
        }
        Method::Oc => {
            let params = cfg.cluster.unwrap_or_else(|| ClusterParams::default_for(corpus.len()));
            let model = hdbscan(need_emb()?, &corpus.ids(), &params)?;
            oc_order(corpus, &model)
        }
    }
}

/// `repeats` orders per stochastic selector (seeds `base_seed..`), one per
/// deterministic selector, in selector order.
pub fn generate_orders(
    corpus: &Corpus,
    embeddings: Option<&EmbeddingSet>,
    selectors: &[SelectorConfig],
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<SelectionOrder>> {
    if repeats == 0 {
        return Err(Error::Validation("repeats must be at least 1".into()));
    }
    let jobs: Vec<(&SelectorConfig, u64)> = selectors
        .iter()
        .flat_map(|cfg| {
            let runs = if cfg.method.is_stochastic() { repeats } else { 1 };
            (0..runs as u64).map(move |i| (cfg, base_seed.wrapping_add(i)))
        })
        .collect();
    jobs.par_iter()
        .map(|(cfg, seed)| build_order(corpus, embeddings, cfg, *seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self {
                mean,
                sd: 0.0,
                ci_low: mean,
                ci_high: mean,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        let half = Z_95 * sd / n.sqrt();
        Self {
            mean,
            sd,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub n_shots: usize,
    pub runs: usize,
    pub mean_theta: f64,
    pub sd_theta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Runs whose order ran out before every class reached `n_shots`.
    pub exhausted_runs: usize,
    pub thetas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub labels: Vec<String>,
    pub n_shots_grid: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, method: Method, n_shots: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.n_shots == n_shots)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>5} {:>10} {:>10} {:>10} {:>10}",
            "method", "n_shots", "runs", "theta", "ci_low", "ci_high", "exhausted"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:>7} {:>5} {:>10.4} {:>10.4} {:>10.4} {:>10}",
                r.method.as_str(),
                r.n_shots,
                r.runs,
                r.mean_theta,
                r.ci_low,
                r.ci_high,
                r.exhausted_runs
            );
        }
        out
    }
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation("n_shots grid is empty".into()));
    }
    if grid.contains(&0) {
        return Err(Error::Validation("n_shots must be at least 1".into()));
    }
    Ok(())
}

/// Methods in first-appearance order with the indices of their orders.
fn group_by_method(orders: &[SelectionOrder]) -> Vec<(Method, Vec<usize>)> {
    let mut groups: Vec<(Method, Vec<usize>)> = Vec::new();
    for (i, o) in orders.iter().enumerate() {
        match groups.iter_mut().find(|(m, _)| *m == o.method) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((o.method, vec![i])),
        }
    }
    groups
}

/// Simulates every order at every grid point; orders sharing a method are
/// aggregated as repeats of that method.
pub fn sweep(corpus: &Corpus, orders: &[SelectionOrder], n_shots_grid: &[usize]) -> Result<SweepReport> {
    check_grid(n_shots_grid)?;
    let labels = label_set_of(corpus)?;
    let cells: Vec<(usize, usize)> = n_shots_grid
        .iter()
        .flat_map(|&k| (0..orders.len()).map(move |o| (o, k)))
        .collect();
    let outcomes: Vec<(f64, SessionStatus)> = cells
        .par_iter()
        .map(|&(o, k)| {
            let cfg = SessionConfig::new(k, labels.clone(), false)?;
            let sim = simulate(corpus, &orders[o], &cfg)?;
            Ok((sim.theta, sim.status()))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (method, idx) in group_by_method(orders) {
        for (gi, &k) in n_shots_grid.iter().enumerate() {
            let picked: Vec<&(f64, SessionStatus)> =
                idx.iter().map(|&o| &outcomes[gi * orders.len() + o]).collect();
            let thetas: Vec<f64> = picked.iter().map(|p| p.0).collect();
            let stats = Stats::of(&thetas);
            rows.push(SweepRow {
                method,
                n_shots: k,
                runs: thetas.len(),
                mean_theta: stats.mean,
                sd_theta: stats.sd,
                ci_low: stats.ci_low,
                ci_high: stats.ci_high,
                exhausted_runs: picked.iter().filter(|p| p.1 == SessionStatus::Exhausted).count(),
                thetas,
            });
        }
    }
    Ok(SweepReport {
        labels: labels.labels().to_vec(),
        n_shots_grid: n_shots_grid.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Row {
    pub method: Method,
    pub n_shots: usize,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_sd: f64,
    pub theta_mean: f64,
    pub train_size_mean: f64,
    pub accuracies: Vec<f64>,
    pub macro_f1s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Report {
    pub labels: Vec<String>,
    pub n_shots_grid: Vec<usize>,
    pub test_size: usize,
    pub rows: Vec<Rq2Row>,
}

impl Rq2Report {
    pub fn row(&self, method: Method, n_shots: usize) -> Option<&Rq2Row> {
        self.rows.iter().find(|r| r.method == method && r.n_shots == n_shots)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "method", "n_shots", "runs", "acc", "acc_sd", "macro_f1", "f1_sd", "theta"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:>7} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                r.method.as_str(),
                r.n_shots,
                r.runs,
                r.accuracy_mean,
                r.accuracy_sd,
                r.macro_f1_mean,
                r.macro_f1_sd,
                r.theta_mean
            );
        }
        out
    }
}

/// Train labels in first-appearance order, then any test-only labels.
fn combined_labels(train: &Corpus, test: &Corpus) -> Result<LabelSet> {
    let mut labels = label_set_of(train)?.labels().to_vec();
    let test_labels = label_set_of(test).or_else(|e| match e {
        // a test split may legitimately hold a single class
        Error::Validation(_) => Ok(LabelSet::open(
            test.iter().filter_map(|d| d.gold_label.clone()).take(1).collect(),
        )?),
        other => Err(other),
    })?;
    for l in test_labels.labels() {
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    LabelSet::new(labels)
}

#[derive(Debug, Clone, Copy)]
struct Rq2Cell {
    accuracy: f64,
    macro_f1: f64,
    theta: f64,
    train_size: usize,
}

/// For every order and `n_shots`: simulate annotation on `train`, fit the
/// nearest-centroid classifier on the annotated documents and score it on
/// `test`.
pub fn rq2_experiment(
    train: &Corpus,
    test: &Corpus,
    embeddings: &EmbeddingSet,
    orders: &[SelectionOrder],
    n_shots_grid: &[usize],
) -> Result<Rq2Report> {
    check_grid(n_shots_grid)?;
    if test.is_empty() {
        return Err(Error::Validation("test split is empty".into()));
    }
    if let Some(d) = test.iter().find(|d| train.contains(&d.id)) {
        return Err(Error::Validation(format!("{:?} is in both the pool and the test split", d.id)));
    }
    let train_labels = label_set_of(train)?;
    let eval_labels = combined_labels(train, test)?;
    let test_ids = test.ids();

    let cells: Vec<(usize, usize)> = n_shots_grid
        .iter()
        .flat_map(|&k| (0..orders.len()).map(move |o| (o, k)))
        .collect();
    let outcomes: Vec<Rq2Cell> = cells
        .par_iter()
        .map(|&(o, k)| {
            let cfg = SessionConfig::new(k, train_labels.clone(), false)?;
            let sim = simulate(train, &orders[o], &cfg)?;
            let annotated = AnnotatedSet::from_records(sim.state.annotated().records().iter().cloned())?;
            let model = fit(&annotated, embeddings)?;
            let predictions = predict(&model, embeddings, &test_ids)?;
            let report = evaluate(&predictions, test, &eval_labels)?;
            Ok(Rq2Cell {
                accuracy: report.accuracy,
                macro_f1: report.macro_f1,
                theta: sim.theta,
                train_size: annotated.len(),
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (method, idx) in group_by_method(orders) {
        for (gi, &k) in n_shots_grid.iter().enumerate() {
            let picked: Vec<Rq2Cell> = idx.iter().map(|&o| outcomes[gi * orders.len() + o]).collect();
            let accuracies: Vec<f64> = picked.iter().map(|c| c.accuracy).collect();
            let macro_f1s: Vec<f64> = picked.iter().map(|c| c.macro_f1).collect();
            let thetas: Vec<f64> = picked.iter().map(|c| c.theta).collect();
            let sizes: Vec<f64> = picked.iter().map(|c| c.train_size as f64).collect();
            let acc = Stats::of(&accuracies);
            let f1 = Stats::of(&macro_f1s);
            rows.push(Rq2Row {
                method,
                n_shots: k,
                runs: picked.len(),
                accuracy_mean: acc.mean,
                accuracy_sd: acc.sd,
                macro_f1_mean: f1.mean,
                macro_f1_sd: f1.sd,
                theta_mean: Stats::of(&thetas).mean,
                train_size_mean: Stats::of(&sizes).mean,
                accuracies,
                macro_f1s,
            });
        }
    }
    Ok(Rq2Report {
        labels: eval_labels.labels().to_vec(),
        n_shots_grid: n_shots_grid.to_vec(),
        test_size: test.len(),
        rows,
    })
}
