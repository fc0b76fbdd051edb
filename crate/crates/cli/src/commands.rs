use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use idsel::clustering::ClusterParams;
use idsel::corpus::{load_corpus, save_corpus, save_selection, Corpus};
use idsel::experiment::{build_order, generate_orders, rq2_experiment, sweep, SelectorConfig};
use idsel::geometry::{load_embeddings, save_embeddings, EmbeddingSet};
use idsel::lexical::LexicalParams;
use idsel::selectors::{Method, SelectionOrder};
use idsel::synthetic::{generate, BlobSpec};
use serde::Serialize;

use crate::args::{EvaluateArgs, SelectArgs, SelectorArgs, SimulateArgs, SweepArgs, SynthArgs};
use crate::meta::{InputFile, OrderInfo, RunMeta};

/// Exit status for bad input: arguments, missing files, malformed data.
pub const EXIT_INVALID: u8 = 2;
/// Exit status for failures while running: writes, sockets.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<idsel::Error> for CliError {
    fn from(e: idsel::Error) -> Self {
        match e {
            idsel::Error::Io { .. } => Self::runtime(e.to_string()),
            other => Self::invalid(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reading an input is never a runtime failure: a missing or unreadable file
/// is the caller's mistake.
fn input<T>(what: &str, r: idsel::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::invalid(format!("{what}: {e}")))
}

fn describe(role: &str, path: &Path, records: usize) -> CliResult<InputFile> {
    InputFile::describe(role, path, records).map_err(|e| CliError::invalid(format!("{role} {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

struct Inputs {
    corpus: Corpus,
    embeddings: Option<EmbeddingSet>,
    described: Vec<InputFile>,
}

fn load_inputs(args: &SelectorArgs, need_embeddings: bool) -> CliResult<Inputs> {
    let corpus = input("corpus", load_corpus(&args.corpus))?;
    let mut described = vec![describe("corpus", &args.corpus, corpus.len())?];
    let embeddings = match (&args.embeddings, need_embeddings) {
        (Some(p), true) => {
            let emb = input("embeddings", load_embeddings(p))?;
            described.push(describe("embeddings", p, emb.len())?);
            Some(emb)
        }
        (None, true) => return Err(CliError::invalid("--embeddings is required for the selected methods")),
        (_, false) => None,
    };
    Ok(Inputs {
        corpus,
        embeddings,
        described,
    })
}

/// The effective configuration, with cluster defaults resolved so the
/// metadata records what actually ran.
fn selector_config(args: &SelectorArgs, method: Method, n_docs: usize) -> CliResult<SelectorConfig> {
    let cluster = if method == Method::Oc {
        let d = ClusterParams::default_for(n_docs);
        let mcs = args.min_cluster_size.unwrap_or(d.min_cluster_size);
        let ms = args.min_samples.unwrap_or(d.min_samples.min(mcs));
        Some(ClusterParams::new(mcs, ms)?)
    } else {
        None
    };
    let cfg = SelectorConfig {
        method,
        beta: args.beta,
        lls_mode: args.lls_mode.into(),
        lexical: LexicalParams {
            max_ngram: args.max_ngram,
            smoothing: args.smoothing.into(),
            ..LexicalParams::default()
        },
        cluster,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn order_infos(selectors: &[SelectorConfig], orders: &[SelectionOrder], repeats: usize, base_seed: u64) -> Vec<OrderInfo> {
    let seeds = selectors.iter().flat_map(|cfg| {
        let runs = if cfg.method.is_stochastic() { repeats } else { 1 };
        (0..runs as u64).map(move |i| base_seed.wrapping_add(i))
    });
    orders.iter().zip(seeds).map(|(o, s)| OrderInfo::of(o, s)).collect()
}

pub fn select(args: &SelectArgs) -> CliResult<String> {
    let inputs = load_inputs(&args.selector, args.method.needs_embeddings())?;
    let cfg = selector_config(&args.selector, args.method, inputs.corpus.len())?;
    let order = build_order(&inputs.corpus, inputs.embeddings.as_ref(), &cfg, args.selector.seed)?;

    save_selection(&order, &args.out)?;
    let mut meta = RunMeta::new("select", args.selector.seed);
    meta.inputs = inputs.described;
    meta.selectors = vec![cfg];
    meta.orders = vec![OrderInfo::of(&order, args.selector.seed)];
    let meta_path = sidecar(&args.out);
    write_file(&meta_path, &to_json(&meta))?;

    let mut summary = format!(
        "{}: ranked {} of {} documents -> {}\n",
        order.method,
        order.len(),
        inputs.corpus.len(),
        args.out.display()
    );
    if order.truncated {
        summary.push_str("note: lexical filter dropped documents; the order is shorter than the corpus\n");
    }
    Ok(summary)
}

/// `<out>.meta.json` next to the selection file.
pub fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn dedup_methods(methods: &[Method]) -> Vec<Method> {
    let mut out = Vec::new();
    for &m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

struct Prepared {
    inputs: Inputs,
    selectors: Vec<SelectorConfig>,
    orders: Vec<SelectionOrder>,
    meta: RunMeta,
}

fn prepare(command: &str, selector: &SelectorArgs, sw: &SweepArgs, force_embeddings: bool) -> CliResult<Prepared> {
    let methods = dedup_methods(&sw.method);
    let need = force_embeddings || methods.iter().any(|m| m.needs_embeddings());
    let inputs = load_inputs(selector, need)?;
    let selectors = methods
        .iter()
        .map(|&m| selector_config(selector, m, inputs.corpus.len()))
        .collect::<CliResult<Vec<_>>>()?;
    let orders = generate_orders(&inputs.corpus, inputs.embeddings.as_ref(), &selectors, sw.repeats, selector.seed)?;

    let mut meta = RunMeta::new(command, selector.seed);
    meta.inputs = inputs.described.clone();
    meta.repeats = Some(sw.repeats);
    meta.n_shots = Some(sw.n_shots.clone());
    meta.orders = order_infos(&selectors, &orders, sw.repeats, selector.seed);
    meta.selectors = selectors.clone();
    Ok(Prepared {
        inputs,
        selectors,
        orders,
        meta,
    })
}

#[derive(Serialize)]
struct Output<'a, R> {
    meta: &'a RunMeta,
    report: &'a R,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<String> {
    let p = prepare("simulate", &args.selector, &args.sweep, false)?;
    tracing::debug!(orders = p.orders.len(), selectors = p.selectors.len(), "orders ready");
    let report = sweep(&p.inputs.corpus, &p.orders, &args.sweep.n_shots)?;
    if let Some(out) = &args.sweep.out {
        write_file(
            out,
            &to_json(&Output {
                meta: &p.meta,
                report: &report,
            }),
        )?;
    }
    Ok(report.to_text())
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<String> {
    let mut p = prepare("evaluate", &args.selector, &args.sweep, true)?;
    let test = input("test file", load_corpus(&args.test_file))?;
    p.meta.inputs.push(describe("test", &args.test_file, test.len())?);
    let emb = p.inputs.embeddings.as_ref().expect("evaluate always loads embeddings");
    let report = rq2_experiment(&p.inputs.corpus, &test, emb, &p.orders, &args.sweep.n_shots)?;
    if let Some(out) = &args.sweep.out {
        write_file(
            out,
            &to_json(&Output {
                meta: &p.meta,
                report: &report,
            }),
        )?;
    }
    Ok(report.to_text())
}

pub fn synth(args: &SynthArgs) -> CliResult<String> {
    let k = args.counts.len();
    let test_counts = if args.test_counts.is_empty() {
        vec![0; k]
    } else {
        args.test_counts.clone()
    };
    let has_test = test_counts.iter().any(|&c| c > 0);
    let default_dim = BlobSpec::new(args.counts.clone(), args.seed).dim;
    let spec = BlobSpec::new(args.counts.clone(), args.seed)
        .with_test(test_counts)
        .with_geometry(args.dim.unwrap_or(default_dim), args.separation, args.spread);
    let data = generate(&spec)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;
    save_corpus(&data.train, args.out_dir.join("corpus.jsonl"))?;
    save_embeddings(&data.embeddings, args.out_dir.join("embeddings.bin"))?;
    if has_test {
        save_corpus(&data.test, args.out_dir.join("test.jsonl"))?;
    }
    Ok(format!(
        "wrote {} pool and {} test documents ({} classes, dim {}) to {}\n",
        data.train.len(),
        data.test.len(),
        k,
        spec.dim,
        args.out_dir.display()
    ))
}
