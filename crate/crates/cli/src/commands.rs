//! Subcommand implementations. Every JSON document is written key-sorted
//! with a `schema_version` field.

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use codegraph_core::bpe::MergeTable;
use codegraph_core::dataset::{self, SplitCounts, SplitMode, SplitOptions};
use codegraph_core::ek::{encoder_from_spec, transform as ek_transform, ApiStore, LoadMode, TextEncoder};
use codegraph_core::frontend::{parse as parse_unit, SourceUnit};
use codegraph_core::fusion::{self, Model, Pipeline};
use codegraph_core::gnn::params::PgnnConfig;
use codegraph_core::partition::{partition as partition_sast, PartitionConfig};
use codegraph_core::sast::build_sast;
use codegraph_core::vocab::{build_vocabulary, Vocabulary};
use codegraph_core::{selfcheck as checks, Error, SCHEMA_VERSION};

use crate::config::Config;

pub struct Context {
    pub cfg: Config,
    pub jobs: Option<usize>,
    pub method: usize,
}

/// Vocabulary and merges, either the shipped tables or loaded from disk.
struct Tables {
    owned: Option<(Vocabulary, MergeTable)>,
}

impl Tables {
    fn load(cfg: &Config) -> Result<Tables, Error> {
        let owned = match (&cfg.vocab, &cfg.merges) {
            (Some(v), Some(m)) => {
                let merges = MergeTable::load(m)?;
                Some((build_vocabulary(v, &merges)?, merges))
            }
            _ => None,
        };
        Ok(Tables { owned })
    }

    fn vocab(&self) -> &Vocabulary {
        match &self.owned {
            Some((v, _)) => v,
            None => Vocabulary::shipped(),
        }
    }

    fn merges(&self) -> &MergeTable {
        match &self.owned {
            Some((_, m)) => m,
            None => MergeTable::shipped(),
        }
    }
}

/// JSON diagnostic for a failed command.
pub fn diagnostic(e: &anyhow::Error) -> String {
    let (kind, side) = match e.downcast_ref::<Error>() {
        Some(err @ Error::Side { side, .. }) => (err.kind(), Some(side.to_string())),
        Some(err) => (err.kind(), None),
        None => ("Error", None),
    };
    // Core errors already print their sources, so stop the chain there.
    let mut parts = Vec::new();
    for cause in e.chain() {
        parts.push(cause.to_string());
        if cause.is::<Error>() {
            break;
        }
    }
    let mut body = json!({ "kind": kind, "message": parts.join(": ") });
    if let Some(s) = side {
        body["side"] = Value::String(s);
    }
    json!({ "schema_version": SCHEMA_VERSION, "error": body }).to_string()
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    // Round-tripping through `Value` sorts object keys.
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        map.entry("schema_version").or_insert(json!(SCHEMA_VERSION));
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn write_output(out: Option<&Path>, inputs: &[&Path], text: &str) -> anyhow::Result<()> {
    let Some(path) = out else {
        print!("{text}");
        return Ok(());
    };
    if let Ok(target) = path.canonicalize() {
        for input in inputs {
            if input.canonicalize().is_ok_and(|i| i == target) {
                return Err(Error::InvalidArgument(format!(
                    "refusing to overwrite input file {}",
                    input.display()
                ))
                .into());
            }
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_unit(path: &Path) -> Result<SourceUnit, Error> {
    SourceUnit::read(path)
}

fn thread_pool(jobs: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    b.build().context("building thread pool")
}

fn load_model(cfg: &Config, vocab_size: usize) -> Result<Model, Error> {
    let model = match &cfg.params {
        Some(p) => Model::load(p)?,
        None => Model::init(PgnnConfig::new(vocab_size, cfg.dims), cfg.seed)?,
    };
    if model.pgnn.config.vocab_size != vocab_size {
        return Err(Error::shape("checkpoint vocabulary", vocab_size, model.pgnn.config.vocab_size));
    }
    Ok(model)
}

fn load_store(cfg: &Config) -> Result<ApiStore, Error> {
    match &cfg.api {
        Some(p) => {
            let mode = if cfg.api_strict { LoadMode::Strict } else { LoadMode::Lenient };
            let store = ApiStore::load(p, mode)?;
            if store.skipped > 0 {
                log::warn!("{}: skipped {} malformed line(s)", p.display(), store.skipped);
            }
            Ok(store)
        }
        None => Ok(ApiStore::new()),
    }
}

pub fn parse(_ctx: &Context, file: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let ast = parse_unit(&read_unit(file)?)?;
    write_output(out, &[file], &to_json(&ast.to_json())?)
}

pub fn sast(ctx: &Context, file: &Path, out: Option<&Path>, dot: Option<&Path>) -> anyhow::Result<()> {
    let tables = Tables::load(&ctx.cfg)?;
    let ast = parse_unit(&read_unit(file)?)?.method(ctx.method)?;
    let g = build_sast(&ast, tables.vocab(), tables.merges())?;
    if let Some(d) = dot {
        write_output(Some(d), &[file], &g.to_dot())?;
    }
    write_output(out, &[file], &to_json(&g.to_json())?)
}

pub fn partition(ctx: &Context, file: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let tables = Tables::load(&ctx.cfg)?;
    let ast = parse_unit(&read_unit(file)?)?.method(ctx.method)?;
    let g = build_sast(&ast, tables.vocab(), tables.merges())?;
    let parts = partition_sast(&g, &PartitionConfig::new(ctx.cfg.lambda)?)?;
    write_output(out, &[file], &to_json(&parts.to_json(&g))?)
}

struct Resources {
    tables: Tables,
    model: Model,
    store: ApiStore,
    encoder: Box<dyn TextEncoder>,
}

impl Resources {
    fn load(cfg: &Config) -> Result<Resources, Error> {
        let tables = Tables::load(cfg)?;
        let model = load_model(cfg, tables.vocab().len())?;
        let store = load_store(cfg)?;
        let encoder = encoder_from_spec(&cfg.encoder, model.dims())?;
        Ok(Resources {
            tables,
            model,
            store,
            encoder,
        })
    }

    fn pipeline(&self, ctx: &Context) -> Pipeline<'_> {
        let mut p = Pipeline::new(
            &self.model,
            self.tables.vocab(),
            self.tables.merges(),
            &self.store,
            self.encoder.as_ref(),
            ctx.cfg.lambda,
        );
        p.max_tokens = ctx.cfg.max_tokens;
        p.method = ctx.method;
        p
    }
}

fn settings(ctx: &Context, model: &Model) -> Value {
    json!({
        "lambda": ctx.cfg.lambda,
        "dims": model.dims(),
        "seed": ctx.cfg.seed,
        "params": ctx.cfg.params.as_ref().map(|p| p.display().to_string()),
        "encoder": ctx.cfg.encoder,
        "max_tokens": ctx.cfg.max_tokens,
        "method": ctx.method,
    })
}

pub fn embed(ctx: &Context, files: &[PathBuf], out: Option<&Path>) -> anyhow::Result<()> {
    let res = Resources::load(&ctx.cfg)?;
    let pipeline = res.pipeline(ctx);
    let results: Vec<Result<Value, Error>> = thread_pool(ctx.jobs)?.install(|| {
        files
            .par_iter()
            .map(|f| {
                let o = pipeline.run(&read_unit(f)?)?;
                Ok(json!({
                    "path": f.display().to_string(),
                    "ast_nodes": o.ast_nodes,
                    "sast_nodes": o.sast_nodes,
                    "sast_edges": o.sast_edges,
                    "subgraph_sizes": o.subgraph_sizes,
                    "subgraph_embeddings": o.trace.subgraphs.iter().map(|e| &e.v).collect::<Vec<_>>(),
                    "lstm_outputs": o.trace.lstm.iter().map(|e| &e.v).collect::<Vec<_>>(),
                    "whole_graph": o.trace.whole.v,
                    "ep": o.trace.ep.v,
                    "ee": o.ee,
                    "ef": o.ef.v,
                    "apis": o.context.apis,
                }))
            })
            .collect()
    });
    let mut items = Vec::with_capacity(results.len());
    for (f, r) in files.iter().zip(results) {
        items.push(r.with_context(|| format!("embedding {}", f.display()))?);
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "settings": settings(ctx, &res.model),
        "embeddings": items,
    });
    let inputs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    write_output(out, &inputs, &to_json(&doc)?)
}

pub fn transform(ctx: &Context, file: &Path, out: Option<&Path>, truncate: bool, as_json: bool) -> anyhow::Result<()> {
    let store = load_store(&ctx.cfg)?;
    let ast = parse_unit(&read_unit(file)?)?.method(ctx.method)?;
    let context = ek_transform(&ast, &store);
    let text = if truncate {
        context.truncated(ctx.cfg.max_tokens)
    } else {
        context.text.clone()
    };
    let body = if as_json {
        to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "tokens": context.tokens,
            "apis": context.apis,
            "descriptions": context.descriptions,
            "text": text,
        }))?
    } else {
        text + "\n"
    };
    write_output(out, &[file], &body)
}

pub fn split(
    ctx: &Context,
    index: &Path,
    counts: SplitCounts,
    mode: SplitMode,
    cap: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let fragments = dataset::load_index(index)?;
    let opts = SplitOptions {
        mode,
        positive_cap: cap,
    };
    let manifest = dataset::build_split(&fragments, counts, ctx.cfg.seed, opts)?;
    for (name, part) in manifest.parts() {
        log::info!(
            "{name}: {} functionalities, {} fragments, {}+/{}- pairs",
            part.functionalities.len(),
            part.fragments.len(),
            part.positives,
            part.negatives
        );
    }
    write_output(out, &[index], &to_json(&manifest)?)
}

pub fn stats(ctx: &Context, index: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let tables = Tables::load(&ctx.cfg)?;
    let fragments = dataset::load_index(index)?;
    let stats = dataset::corpus_stats(&fragments, tables.vocab(), tables.merges(), ctx.jobs)?;
    write_output(out, &[index], &to_json(&stats)?)
}

pub fn clone_score(ctx: &Context, a: &Path, b: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let res = Resources::load(&ctx.cfg)?;
    let pipeline = res.pipeline(ctx);
    let side = |s, r: Result<SourceUnit, Error>| {
        r.map_err(|e| Error::Side {
            side: s,
            source: Box::new(e),
        })
    };
    let ua = side(codegraph_core::Side::A, read_unit(a))?;
    let ub = side(codegraph_core::Side::B, read_unit(b))?;
    let score = fusion::clone_score(&ua, &ub, &pipeline, ctx.cfg.threshold)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "settings": settings(ctx, &res.model),
        "a": a.display().to_string(),
        "b": b.display().to_string(),
        "score": score.value,
        "threshold": score.threshold,
        "clone": score.label,
    });
    write_output(out, &[a, b], &to_json(&doc)?)
}

/// Returns whether every check passed.
pub fn selfcheck(ctx: &Context, out: Option<&Path>) -> anyhow::Result<bool> {
    let report = checks::run(ctx.cfg.dims, ctx.cfg.seed)?;
    write_output(out, &[], &to_json(&report)?)?;
    eprintln!(
        "gradient: {} (max relative error {:.3e}, tolerance {:.0e})",
        if report.gradient.passed { "pass" } else { "FAIL" },
        report.gradient.report.max_relative_error,
        report.gradient.tolerance
    );
    eprintln!(
        "permutation: {} (max abs diff {:.3e}, tolerance {:.0e})",
        if report.permutation.passed { "pass" } else { "FAIL" },
        report.permutation.max_abs_diff,
        report.permutation.tolerance
    );
    Ok(report.passed)
}

pub fn init_params(ctx: &Context, out: &Path) -> anyhow::Result<()> {
    let tables = Tables::load(&ctx.cfg)?;
    let model = Model::init(PgnnConfig::new(tables.vocab().len(), ctx.cfg.dims), ctx.cfg.seed)?;
    model.save(out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}
