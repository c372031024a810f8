//! Partitioned gated graph network.
//!
//! Each subgraph and the whole S-AST go through the same gated graph layers:
//! node states start as embedding rows, every layer sums MLP messages over
//! the bidirectional edge view and updates states with a GRU, and a mean
//! readout gives the graph embedding. Subgraph embeddings are fed in
//! statement order through a stacked LSTM; its last output is concatenated
//! with the whole-graph embedding and projected back to `d` to give `E_p`.

mod backend;
pub mod params;
pub mod tensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use self::backend::{Backend, Eval, Tape};
pub use self::params::{Activation, PgnnConfig, PgnnParams, EDGE_DIM};
pub use self::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::partition::PartitionResult;
use crate::sast::{GraphInput, SAst};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingKind {
    SubgraphG,
    WholeGraphC,
    LstmOut,
    Ep,
    Ef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub kind: EmbeddingKind,
    pub v: Vec<f64>,
}

impl Embedding {
    pub fn new(kind: EmbeddingKind, v: Vec<f64>) -> Self {
        Embedding { kind, v }
    }

    pub fn dims(&self) -> usize {
        self.v.len()
    }
}

/// Dropout is applied to node states after each update when `training` is
/// set; the mask stream is drawn from `seed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    pub training: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GgnnOutput {
    pub states: Vec<Vec<f64>>,
    pub embedding: Embedding,
}

/// All intermediate embeddings of one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgnnTrace {
    pub subgraphs: Vec<Embedding>,
    pub lstm: Vec<Embedding>,
    pub whole: Embedding,
    pub ep: Embedding,
}

fn squash<B: Backend>(b: &mut B, cfg: &PgnnConfig, x: &B::V) -> B::V {
    match cfg.activation {
        Activation::Standard => b.tanh(x),
        Activation::Identity => x.clone(),
    }
}

fn gate<B: Backend>(b: &mut B, cfg: &PgnnConfig, x: &B::V) -> B::V {
    match cfg.activation {
        Activation::Standard => b.sigmoid(x),
        Activation::Identity => x.clone(),
    }
}

fn one_hot(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; EDGE_DIM];
    v[i] = 1.0;
    v
}

/// Incoming `(neighbour, edge feature index)` lists of the bidirectional
/// view. The forward copy of an edge uses index `2k`, the reverse `2k + 1`.
fn incoming(g: &GraphInput) -> Vec<Vec<(usize, usize)>> {
    let mut inc = vec![Vec::new(); g.len()];
    for e in &g.edges {
        inc[e.dst].push((e.src, 2 * e.kind.index()));
        inc[e.src].push((e.dst, 2 * e.kind.index() + 1));
    }
    inc
}

fn ggnn<B: Backend>(
    b: &mut B,
    p: &PgnnParams,
    g: &GraphInput,
    mut dropout: Option<&mut ChaCha8Rng>,
) -> (Vec<B::V>, B::V) {
    let cfg = &p.config;
    let d = cfg.dims;
    let lay = &p.layout;
    let inc = incoming(g);
    let features: Vec<B::V> = (0..EDGE_DIM).map(|i| b.constant(one_hot(i))).collect();
    let mut h: Vec<B::V> = g.vocab_ids.iter().map(|&id| b.row(lay.embed, id as usize)).collect();

    for ids in &lay.ggnn {
        let mut cache: std::collections::HashMap<(usize, usize), B::V> = std::collections::HashMap::new();
        let mut next = Vec::with_capacity(h.len());
        for i in 0..h.len() {
            let mut msgs = Vec::with_capacity(inc[i].len());
            for &(j, f) in &inc[i] {
                let m = match cache.get(&(j, f)) {
                    Some(m) => m.clone(),
                    None => {
                        let x = b.concat(&h[j], &features[f]);
                        let pre = b.affine(ids.w1, ids.b1, &x);
                        let hidden = squash(b, cfg, &pre);
                        let m = b.affine(ids.w2, ids.b2, &hidden);
                        cache.insert((j, f), m.clone());
                        m
                    }
                };
                msgs.push(m);
            }
            let m = b.sum(&msgs, d);

            let mh = b.concat(&m, &h[i]);
            let z_pre = b.affine(ids.wz, ids.bz, &mh);
            let z = gate(b, cfg, &z_pre);
            let r_pre = b.affine(ids.wr, ids.br, &mh);
            let r = gate(b, cfg, &r_pre);
            let rh = b.mul(&r, &h[i]);
            let mrh = b.concat(&m, &rh);
            let cand_pre = b.affine(ids.wh, ids.bh, &mrh);
            let cand = squash(b, cfg, &cand_pre);
            let keep = b.one_minus(&z);
            let old = b.mul(&keep, &h[i]);
            let new = b.mul(&z, &cand);
            let mut state = b.add(&old, &new);
            if let Some(rng) = dropout.as_deref_mut() {
                let rate = cfg.dropout;
                let mask: Vec<f64> = (0..d)
                    .map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / (1.0 - rate) })
                    .collect();
                let mask = b.constant(mask);
                state = b.mul(&state, &mask);
            }
            next.push(state);
        }
        h = next;
    }
    let total = b.sum(&h, d);
    let readout = b.scale(&total, 1.0 / h.len() as f64);
    (h, readout)
}

fn lstm<B: Backend>(b: &mut B, p: &PgnnParams, seq: &[B::V]) -> Vec<B::V> {
    let cfg = &p.config;
    let d = cfg.dims;
    let mut hs: Vec<B::V> = (0..p.layout.lstm.len()).map(|_| b.constant(vec![0.0; d])).collect();
    let mut cs: Vec<B::V> = hs.clone();
    let mut out = Vec::with_capacity(seq.len());
    for x in seq {
        let mut input = x.clone();
        for (k, ids) in p.layout.lstm.iter().enumerate() {
            let hx = b.concat(&input, &hs[k]);
            let i_pre = b.affine(ids.wi, ids.bi, &hx);
            let i = gate(b, cfg, &i_pre);
            let f_pre = b.affine(ids.wf, ids.bf, &hx);
            let f = gate(b, cfg, &f_pre);
            let g_pre = b.affine(ids.wg, ids.bg, &hx);
            let g = squash(b, cfg, &g_pre);
            let o_pre = b.affine(ids.wo, ids.bo, &hx);
            let o = gate(b, cfg, &o_pre);
            let fc = b.mul(&f, &cs[k]);
            let ig = b.mul(&i, &g);
            cs[k] = b.add(&fc, &ig);
            let tc = squash(b, cfg, &cs[k]);
            hs[k] = b.mul(&o, &tc);
            input = hs[k].clone();
        }
        out.push(input);
    }
    out
}

struct Pass<V> {
    subgraphs: Vec<V>,
    lstm: Vec<V>,
    whole: V,
    ep: V,
}

fn pgnn<B: Backend>(
    b: &mut B,
    p: &PgnnParams,
    whole: &GraphInput,
    subgraphs: &[GraphInput],
    opts: &ForwardOptions,
) -> Pass<B::V> {
    let mut rng = opts.training.then(|| ChaCha8Rng::seed_from_u64(opts.seed));
    let gs: Vec<B::V> = subgraphs
        .iter()
        .map(|g| ggnn(b, p, g, rng.as_mut()).1)
        .collect();
    let os = lstm(b, p, &gs);
    let (_, c) = ggnn(b, p, whole, rng.as_mut());
    let joined = b.concat(&c, os.last().expect("at least one subgraph"));
    let ep = b.affine(p.layout.fc_w, p.layout.fc_b, &joined);
    Pass {
        subgraphs: gs,
        lstm: os,
        whole: c,
        ep,
    }
}

fn check_graph(g: &GraphInput, p: &PgnnParams, context: &str) -> Result<()> {
    if g.is_empty() {
        return Err(Error::InvalidArgument(format!("{context}: graph has no nodes")));
    }
    let vocab = p.config.vocab_size;
    if let Some(&id) = g.vocab_ids.iter().find(|&&id| id as usize >= vocab) {
        return Err(Error::shape(
            format!("{context} vocabulary id"),
            format!("< {vocab}"),
            id.to_string(),
        ));
    }
    if let Some(e) = g.edges.iter().find(|e| e.src >= g.len() || e.dst >= g.len()) {
        return Err(Error::InvalidArgument(format!(
            "{context}: edge {}->{} leaves a {}-node graph",
            e.src,
            e.dst,
            g.len()
        )));
    }
    Ok(())
}

fn finite(v: Vec<f64>, context: &str) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

/// Gated graph layers plus mean readout over one graph.
pub fn ggnn_forward(
    graph: &GraphInput,
    kind: EmbeddingKind,
    params: &PgnnParams,
    opts: &ForwardOptions,
) -> Result<GgnnOutput> {
    check_graph(graph, params, "ggnn")?;
    let mut b = Eval::new(params.tensors());
    let mut rng = opts.training.then(|| ChaCha8Rng::seed_from_u64(opts.seed));
    let (states, readout) = ggnn(&mut b, params, graph, rng.as_mut());
    let states = states
        .into_iter()
        .map(|s| finite(s, "ggnn node state"))
        .collect::<Result<_>>()?;
    Ok(GgnnOutput {
        states,
        embedding: Embedding::new(kind, finite(readout, "ggnn readout")?),
    })
}

/// Stacked LSTM over a sequence of `d`-wide embeddings from zero state.
/// Returns the top layer's output at every step.
pub fn lstm_forward(seq: &[Embedding], params: &PgnnParams) -> Result<Vec<Embedding>> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("lstm input sequence is empty".into()));
    }
    let d = params.dims();
    if let Some(e) = seq.iter().find(|e| e.dims() != d) {
        return Err(Error::shape("lstm input", d.to_string(), e.dims().to_string()));
    }
    let mut b = Eval::new(params.tensors());
    let xs: Vec<Vec<f64>> = seq.iter().map(|e| e.v.clone()).collect();
    lstm(&mut b, params, &xs)
        .into_iter()
        .map(|o| Ok(Embedding::new(EmbeddingKind::LstmOut, finite(o, "lstm output")?)))
        .collect()
}

fn inputs(sast: &SAst, parts: &PartitionResult, params: &PgnnParams) -> Result<(GraphInput, Vec<GraphInput>)> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("partition has no subgraphs".into()));
    }
    let whole = sast.graph_input();
    check_graph(&whole, params, "whole graph")?;
    let subs: Vec<GraphInput> = parts.subgraphs.iter().map(|s| s.graph_input(sast)).collect();
    for (i, g) in subs.iter().enumerate() {
        check_graph(g, params, &format!("subgraph {i}"))?;
    }
    Ok((whole, subs))
}

/// Full forward pass with every intermediate embedding.
pub fn pgnn_trace(
    sast: &SAst,
    parts: &PartitionResult,
    params: &PgnnParams,
    opts: &ForwardOptions,
) -> Result<PgnnTrace> {
    let (whole, subs) = inputs(sast, parts, params)?;
    pgnn_trace_graphs(&whole, &subs, params, opts)
}

/// [`pgnn_trace`] over already extracted graphs.
pub fn pgnn_trace_graphs(
    whole: &GraphInput,
    subgraphs: &[GraphInput],
    params: &PgnnParams,
    opts: &ForwardOptions,
) -> Result<PgnnTrace> {
    if subgraphs.is_empty() {
        return Err(Error::InvalidArgument("partition has no subgraphs".into()));
    }
    let mut b = Eval::new(params.tensors());
    let pass = pgnn(&mut b, params, whole, subgraphs, opts);
    let wrap = |kind, v: Vec<f64>, ctx: &str| Ok(Embedding::new(kind, finite(v, ctx)?));
    Ok(PgnnTrace {
        subgraphs: pass
            .subgraphs
            .into_iter()
            .map(|v| wrap(EmbeddingKind::SubgraphG, v, "subgraph embedding"))
            .collect::<Result<_>>()?,
        lstm: pass
            .lstm
            .into_iter()
            .map(|v| wrap(EmbeddingKind::LstmOut, v, "lstm output"))
            .collect::<Result<_>>()?,
        whole: wrap(EmbeddingKind::WholeGraphC, pass.whole, "whole-graph embedding")?,
        ep: wrap(EmbeddingKind::Ep, pass.ep, "E_p")?,
    })
}

/// `E_p` for an S-AST and its partition.
pub fn pgnn_embed(sast: &SAst, parts: &PartitionResult, params: &PgnnParams, opts: &ForwardOptions) -> Result<Embedding> {
    Ok(pgnn_trace(sast, parts, params, opts)?.ep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// `max |a - n|` over `max max(|a|, |n|)` across the whole sample.
    pub normwise_relative_error: f64,
    pub checked: usize,
    pub candidates: usize,
}

/// Fraction of candidate scalars compared in [`finite_diff_check`].
pub const GRAD_CHECK_SAMPLE_RATE: f64 = 0.05;

/// Compare the analytic gradient of `‖E_p‖²` with central differences on a
/// seeded sample of parameters. Candidates are every scalar of every tensor
/// except the embedding table, plus the embedding rows the graph looks up.
/// The relative error of a pair is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn finite_diff_check(
    params: &PgnnParams,
    sast: &SAst,
    parts: &PartitionResult,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    let (whole, subs) = inputs(sast, parts, params)?;
    let opts = ForwardOptions::default();

    let mut tape = Tape::new(params.tensors());
    let pass = pgnn(&mut tape, params, &whole, &subs, &opts);
    let ep = tape.value(&pass.ep).to_vec();
    let seed_grad: Vec<f64> = ep.iter().map(|v| 2.0 * v).collect();
    let grads = tape.backward(pass.ep, &seed_grad);

    let embed = params.layout.embed;
    let dims = params.dims();
    let mut rows: Vec<usize> = whole.vocab_ids.iter().map(|&v| v as usize).collect();
    rows.sort_unstable();
    rows.dedup();
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (t, tensor) in params.tensors().iter().enumerate() {
        if t == embed {
            for &r in &rows {
                candidates.extend((r * dims..(r + 1) * dims).map(|k| (t, k)));
            }
        } else {
            candidates.extend((0..tensor.len()).map(|k| (t, k)));
        }
    }
    let count = ((candidates.len() as f64 * GRAD_CHECK_SAMPLE_RATE).ceil() as usize).clamp(1, candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, candidates.len(), count).into_vec();
    picks.sort_unstable();

    let mut work: Vec<Tensor2> = params.tensors().to_vec();
    let loss = |tensors: &[Tensor2]| -> f64 {
        let mut b = Eval::new(tensors);
        let pass = pgnn(&mut b, params, &whole, &subs, &opts);
        pass.ep.iter().map(|v| v * v).sum()
    };
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &pick in &picks {
        let (t, k) = candidates[pick];
        let analytic = grads[t].as_ref().map_or(0.0, |g| g[k]);
        let orig = work[t].data[k];
        work[t].data[k] = orig + epsilon;
        let up = loss(&work);
        work[t].data[k] = orig - epsilon;
        let down = loss(&work);
        work[t].data[k] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(1e-6);
        if !rel.is_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient of {}", params.names()[t]),
            });
        }
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max(abs);
        scale = scale.max(analytic.abs()).max(numeric.abs());
    }
    Ok(GradCheckReport {
        epsilon,
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        normwise_relative_error: if scale > 0.0 { max_abs / scale } else { 0.0 },
        checked: picks.len(),
        candidates: candidates.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{partition, PartitionConfig};
    use crate::sast::{Edge, EdgeKind};
    use crate::synth::{permute_graph, random_graph, statement_sast, SynthSpec};
    use rand::seq::SliceRandom;

    fn params(d: usize, vocab: usize, seed: u64) -> PgnnParams {
        PgnnParams::init(PgnnConfig::new(vocab, d), seed).unwrap()
    }

    fn toy(seed: u64, sizes: &[usize], vocab: u32) -> SAst {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        statement_sast(
            &mut rng,
            &SynthSpec {
                statement_sizes: sizes.to_vec(),
                variables: 2,
                variable_rate: 0.5,
                vocab_size: vocab,
            },
        )
    }

    #[test]
    fn single_node_sees_zero_messages() {
        let p = params(4, 5, 1);
        let g = GraphInput {
            vocab_ids: vec![3],
            edges: vec![],
        };
        let out = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &p, &ForwardOptions::default()).unwrap();
        assert_eq!(out.embedding.v, out.states[0]);
        assert_ne!(out.states[0], p.tensor("node_embed").unwrap().row(3));
    }

    #[test]
    fn symmetric_cycle_gives_equal_states() {
        let p = params(6, 4, 2);
        let g = GraphInput {
            vocab_ids: vec![1; 4],
            edges: (0..4).map(|i| Edge::new(i, (i + 1) % 4, EdgeKind::NextLeaf)).collect(),
        };
        let out = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &p, &ForwardOptions::default()).unwrap();
        for s in &out.states[1..] {
            for (a, b) in s.iter().zip(&out.states[0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let p = params(8, 30, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let g = random_graph(&mut rng, 10, 18, 30);
            let mut perm: Vec<usize> = (0..10).collect();
            perm.shuffle(&mut rng);
            let a = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &p, &Default::default()).unwrap();
            let b = ggnn_forward(&permute_graph(&g, &perm), EmbeddingKind::WholeGraphC, &p, &Default::default()).unwrap();
            for (x, y) in a.embedding.v.iter().zip(&b.embedding.v) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dropout_only_in_training() {
        let p = params(8, 30, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_graph(&mut rng, 6, 8, 30);
        let eval = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &p, &Default::default()).unwrap();
        let train = ForwardOptions { training: true, seed: 9 };
        let t1 = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &p, &train).unwrap();
        let t2 = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &p, &train).unwrap();
        assert_eq!(t1, t2);
        assert_ne!(t1.embedding.v, eval.embedding.v);
    }

    #[test]
    fn lstm_single_step_and_order_sensitivity() {
        let p = params(5, 3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let seq: Vec<Embedding> = (0..3)
            .map(|_| Embedding::new(EmbeddingKind::SubgraphG, (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let fwd = lstm_forward(&seq, &p).unwrap();
        let rev: Vec<Embedding> = seq.iter().rev().cloned().collect();
        let bwd = lstm_forward(&rev, &p).unwrap();
        assert_eq!(fwd.len(), 3);
        assert_ne!(fwd[2].v, bwd[2].v);
        assert_eq!(lstm_forward(&seq[..1], &p).unwrap()[0], fwd[0]);

        let zeros = vec![Embedding::new(EmbeddingKind::SubgraphG, vec![0.0; 5]); 2];
        let z = lstm_forward(&zeros, &p).unwrap();
        assert!(z[1].v.iter().any(|v| *v != 0.0));
        assert!(lstm_forward(&[], &p).is_err());
    }

    #[test]
    fn pgnn_is_deterministic_and_validated() {
        let s = toy(1, &[5, 6, 4], 40);
        let parts = partition(&s, &PartitionConfig::new(5).unwrap()).unwrap();
        let p = params(8, 40, 1);
        let a = pgnn_embed(&s, &parts, &p, &Default::default()).unwrap();
        let b = pgnn_embed(&s, &parts, &p, &Default::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.kind, EmbeddingKind::Ep);

        let small = params(8, 10, 1);
        assert!(matches!(
            pgnn_embed(&s, &parts, &small, &Default::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gradient_check_standard() {
        let s = toy(2, &[4, 3, 3], 20);
        assert_eq!(s.len(), 12);
        let parts = partition(&s, &PartitionConfig::new(4).unwrap()).unwrap();
        assert!(parts.len() > 1);
        let p = params(8, 20, 3);
        let r = finite_diff_check(&p, &s, &parts, 1e-5, 11).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
        assert!(r.checked > 0);
        let coarse = finite_diff_check(&p, &s, &parts, 1e-3, 11).unwrap();
        assert!(r.normwise_relative_error <= coarse.normwise_relative_error);
    }

    #[test]
    fn gradient_check_identity() {
        let s = toy(3, &[3, 3, 4], 20);
        let parts = partition(&s, &PartitionConfig::new(4).unwrap()).unwrap();
        let p = params(4, 20, 4).with_activation(Activation::Identity);
        let r = finite_diff_check(&p, &s, &parts, 1e-5, 12).unwrap();
        assert!(r.normwise_relative_error < 1e-9, "{r:?}");
    }

    #[test]
    fn epsilon_range() {
        let s = toy(3, &[3, 3], 20);
        let parts = partition(&s, &PartitionConfig::new(4).unwrap()).unwrap();
        let p = params(4, 20, 4);
        assert!(finite_diff_check(&p, &s, &parts, 1e-2, 1).is_err());
    }
}
