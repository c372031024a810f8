//! Fusion of the graph embedding with the encoded context, the end-to-end
//! pipeline from source text to `E_f`, and siamese clone scoring.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bpe::MergeTable;
use crate::ek::{transform, ApiStore, TextEncoder, TransformedContext, CLONE_MAX_TOKENS};
use crate::error::{Error, Result, Side};
use crate::frontend::{parse, SourceUnit};
use crate::gnn::params::{read_checkpoint, write_checkpoint};
use crate::gnn::{pgnn_trace, Embedding, EmbeddingKind, ForwardOptions, PgnnConfig, PgnnParams, PgnnTrace, Tensor2};
use crate::partition::{partition, PartitionConfig};
use crate::sast::build_sast;
use crate::vocab::Vocabulary;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

const FC_W: &str = "fusion.fc_f.w";
const FC_B: &str = "fusion.fc_f.b";

/// Affine map `2d → d` applied to `[E_p ; E_e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub w: Tensor2,
    pub b: Tensor2,
}

impl FusionParams {
    pub fn init(dims: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / ((2 * dims) as f64).sqrt();
        FusionParams {
            w: Tensor2::uniform(&mut rng, dims, 2 * dims, scale),
            b: Tensor2::uniform(&mut rng, 1, dims, scale),
        }
    }

    pub fn dims(&self) -> usize {
        self.w.rows
    }

    fn validate(&self) -> Result<()> {
        let d = self.w.rows;
        if self.w.cols != 2 * d || self.b.rows != 1 || self.b.cols != d {
            return Err(Error::shape(
                "fusion parameters",
                format!("{d}x{} and 1x{d}", 2 * d),
                format!("{}x{} and {}x{}", self.w.rows, self.w.cols, self.b.rows, self.b.cols),
            ));
        }
        Ok(())
    }
}

/// `E_f = W [E_p ; E_e] + b`.
pub fn fuse(ep: &Embedding, ee: &[f64], params: &FusionParams) -> Result<Embedding> {
    params.validate()?;
    let d = params.dims();
    if ep.dims() != d || ee.len() != d {
        return Err(Error::shape(
            "fusion input",
            format!("{d} + {d}"),
            format!("{} + {}", ep.dims(), ee.len()),
        ));
    }
    let mut x = ep.v.clone();
    x.extend_from_slice(ee);
    let mut y = params.w.matvec(&x);
    for (y, b) in y.iter_mut().zip(&params.b.data) {
        *y += b;
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "E_f".into() });
    }
    Ok(Embedding::new(EmbeddingKind::Ef, y))
}

/// Every learnable tensor of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub pgnn: PgnnParams,
    pub fusion: FusionParams,
}

impl Model {
    /// Seeded parameters. The fusion layer draws from a stream derived from
    /// the same seed.
    pub fn init(config: PgnnConfig, seed: u64) -> Result<Self> {
        let dims = config.dims;
        Ok(Model {
            pgnn: PgnnParams::init(config, seed)?,
            fusion: FusionParams::init(dims, seed ^ 0x9E37_79B9_7F4A_7C15),
        })
    }

    pub fn dims(&self) -> usize {
        self.pgnn.dims()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut named: Vec<(&str, &Tensor2)> = self.pgnn.named().collect();
        named.push((FC_W, &self.fusion.w));
        named.push((FC_B, &self.fusion.b));
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_checkpoint(std::io::BufWriter::new(file), &self.pgnn.config, &named).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let (config, mut tensors) = read_checkpoint(std::io::BufReader::new(file), &path.display().to_string())?;
        let mut take = |name: &str| -> Result<Tensor2> {
            let i = tensors.iter().position(|(n, _)| n == name).ok_or_else(|| Error::Format {
                source_name: path.display().to_string(),
                line: 0,
                message: format!("checkpoint has no `{name}` tensor"),
            })?;
            Ok(tensors.remove(i).1)
        };
        let fusion = FusionParams {
            w: take(FC_W)?,
            b: take(FC_B)?,
        };
        let pgnn = PgnnParams::from_tensors(config, tensors)?;
        fusion.validate()?;
        if fusion.dims() != pgnn.dims() {
            return Err(Error::shape("fusion width", pgnn.dims(), fusion.dims()));
        }
        Ok(Model { pgnn, fusion })
    }
}

/// Intermediate results of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub ast_nodes: usize,
    pub sast_nodes: usize,
    pub sast_edges: usize,
    pub subgraph_sizes: Vec<usize>,
    pub trace: PgnnTrace,
    pub context: TransformedContext,
    pub ee: Vec<f64>,
    pub ef: Embedding,
}

/// Shared, read-only state for running source units to `E_f`.
pub struct Pipeline<'a> {
    pub model: &'a Model,
    pub vocab: &'a Vocabulary,
    pub merges: &'a MergeTable,
    pub store: &'a ApiStore,
    pub encoder: &'a dyn TextEncoder,
    pub lambda: usize,
    pub max_tokens: usize,
    /// Which method of each unit to use.
    pub method: usize,
    pub forward: ForwardOptions,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        model: &'a Model,
        vocab: &'a Vocabulary,
        merges: &'a MergeTable,
        store: &'a ApiStore,
        encoder: &'a dyn TextEncoder,
        lambda: usize,
    ) -> Self {
        Pipeline {
            model,
            vocab,
            merges,
            store,
            encoder,
            lambda,
            max_tokens: CLONE_MAX_TOKENS,
            method: 0,
            forward: ForwardOptions::default(),
        }
    }

    /// parse → S-AST → partition → `E_p`; transform → encode → `E_e`; fuse.
    pub fn run(&self, unit: &SourceUnit) -> Result<PipelineOutput> {
        if self.encoder.dims() != self.model.dims() {
            return Err(Error::shape("encoder width", self.model.dims(), self.encoder.dims()));
        }
        let ast = parse(unit)?.method(self.method)?;
        let sast = build_sast(&ast, self.vocab, self.merges)?;
        let parts = partition(&sast, &PartitionConfig::new(self.lambda)?)?;
        let trace = pgnn_trace(&sast, &parts, &self.model.pgnn, &self.forward)?;
        let context = transform(&ast, self.store);
        let ee = self.encoder.encode(&context.truncated(self.max_tokens))?;
        if ee.len() != self.model.dims() {
            return Err(Error::shape("encoder output", self.model.dims(), ee.len()));
        }
        let ef = fuse(&trace.ep, &ee, &self.model.fusion)?;
        Ok(PipelineOutput {
            ast_nodes: ast.len(),
            sast_nodes: sast.len(),
            sast_edges: sast.edges.len(),
            subgraph_sizes: parts.subgraphs.iter().map(|s| s.len()).collect(),
            trace,
            context,
            ee,
            ef,
        })
    }

    pub fn embed(&self, unit: &SourceUnit) -> Result<Embedding> {
        Ok(self.run(unit)?.ef)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloneScore {
    pub value: f64,
    pub threshold: f64,
    pub label: bool,
}

impl CloneScore {
    pub fn new(value: f64, threshold: f64) -> Self {
        CloneScore {
            value,
            threshold,
            label: value >= threshold,
        }
    }
}

/// Cosine similarity; zero when either vector is zero. Identical vectors give
/// exactly 1.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// `(cos(a, b) + 1) / 2`, in `[0, 1]`.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    ((cosine(a, b) + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Run both units through the same pipeline and compare their `E_f`.
pub fn clone_score(a: &SourceUnit, b: &SourceUnit, pipeline: &Pipeline, threshold: f64) -> Result<CloneScore> {
    let side = |side: Side| move |e: Error| Error::Side {
        side,
        source: Box::new(e),
    };
    let ea = pipeline.embed(a).map_err(side(Side::A))?;
    let eb = pipeline.embed(b).map_err(side(Side::B))?;
    Ok(CloneScore::new(similarity(&ea.v, &eb.v), threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ek::ReferenceEncoder;
    use rand::Rng;

    #[test]
    fn identity_on_first_half() {
        let d = 4;
        let mut w = Tensor2::zeros(d, 2 * d);
        for i in 0..d {
            w.set(i, i, 1.0);
        }
        let p = FusionParams {
            w,
            b: Tensor2::zeros(1, d),
        };
        let ep = Embedding::new(EmbeddingKind::Ep, vec![0.5, -1.0, 2.0, 0.0]);
        assert_eq!(fuse(&ep, &[0.0; 4], &p).unwrap().v, ep.v);
        assert!(matches!(fuse(&ep, &[0.0; 3], &p), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn fuse_matches_straight_line_product() {
        let d = 8;
        let p = FusionParams::init(d, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ep: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ee: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = fuse(&Embedding::new(EmbeddingKind::Ep, ep.clone()), &ee, &p).unwrap();
        for r in 0..d {
            let mut acc = p.b.data[r];
            for c in 0..d {
                acc += p.w.get(r, c) * ep[c] + p.w.get(r, d + c) * ee[c];
            }
            assert!((acc - got.v[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_conventions() {
        assert_eq!(similarity(&[0.0, 0.0], &[1.0, 2.0]), 0.5);
        assert_eq!(similarity(&[0.1, 0.7, -0.3], &[0.1, 0.7, -0.3]), 1.0);
        assert_eq!(similarity(&[1.0, 0.0], &[-1.0, 0.0]), 0.0);
        assert_eq!(similarity(&[1.0, 2.0], &[3.0, -1.0]), similarity(&[3.0, -1.0], &[1.0, 2.0]));
    }

    #[test]
    fn model_checkpoint_round_trip() {
        let m = Model::init(PgnnConfig::new(9, 3), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        m.save(&path).unwrap();
        assert_eq!(Model::load(&path).unwrap(), m);
        m.pgnn.save(&path).unwrap();
        assert!(matches!(Model::load(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn siamese_contract() {
        let vocab = Vocabulary::shipped();
        let merges = MergeTable::shipped();
        let model = Model::init(PgnnConfig::new(vocab.len(), 8), 7).unwrap();
        let store = ApiStore::new();
        let enc = ReferenceEncoder::new(8);
        let p = Pipeline::new(&model, vocab, merges, &store, &enc, 10);
        let a = SourceUnit::from_text("int f(int a, int b) { int c = a + b; return c * 2; }");
        let b = SourceUnit::from_text("void g(int n) { while (n > 0) { n = n - 1; } }");
        assert_eq!(clone_score(&a, &a, &p, DEFAULT_THRESHOLD).unwrap().value, 1.0);
        let ab = clone_score(&a, &b, &p, DEFAULT_THRESHOLD).unwrap();
        let ba = clone_score(&b, &a, &p, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(ab.value, ba.value);
        assert!((0.0..=1.0).contains(&ab.value));

        let bad = SourceUnit::from_text("void h( {");
        let err = clone_score(&a, &bad, &p, DEFAULT_THRESHOLD).unwrap_err();
        assert!(matches!(err, Error::Side { side: Side::B, .. }));
        assert_eq!(err.kind(), "ParseError");
    }
}
