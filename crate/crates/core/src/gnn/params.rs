//! Learnable tensors of the partitioned GNN and their checkpoint format.
//!
//! A checkpoint is `CGPARAMS`, a little-endian `u32` format version, a
//! little-endian `u64` header length, a UTF-8 JSON header, then every tensor's
//! values as little-endian `f64` in header order.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::{Error, Result};

pub const EDGE_DIM: usize = 8;
pub const DEFAULT_DIMS: usize = 32;
pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_LSTM_LAYERS: usize = 2;
pub const DEFAULT_DROPOUT: f64 = 0.2;

const MAGIC: &[u8; 8] = b"CGPARAMS";
const FORMAT_VERSION: u32 = 1;

/// Nonlinearities used by the network. `Identity` replaces every `tanh` and
/// sigmoid with the identity map, which leaves a polynomial network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Standard,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgnnConfig {
    pub dims: usize,
    pub layers: usize,
    pub lstm_layers: usize,
    pub vocab_size: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl PgnnConfig {
    pub fn new(vocab_size: usize, dims: usize) -> Self {
        PgnnConfig {
            dims,
            layers: DEFAULT_LAYERS,
            lstm_layers: DEFAULT_LSTM_LAYERS,
            vocab_size,
            activation: Activation::Standard,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims < 2 {
            return Err(Error::InvalidArgument(format!("dims must be at least 2, got {}", self.dims)));
        }
        if self.layers == 0 || self.lstm_layers == 0 || self.vocab_size == 0 {
            return Err(Error::InvalidArgument("layers, lstm_layers and vocab_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct GgnnLayerIds {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub wz: usize,
    pub bz: usize,
    pub wr: usize,
    pub br: usize,
    pub wh: usize,
    pub bh: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LstmLayerIds {
    pub wi: usize,
    pub bi: usize,
    pub wf: usize,
    pub bf: usize,
    pub wg: usize,
    pub bg: usize,
    pub wo: usize,
    pub bo: usize,
}

/// Tensor positions inside [`PgnnParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub embed: usize,
    pub ggnn: Vec<GgnnLayerIds>,
    pub lstm: Vec<LstmLayerIds>,
    pub fc_w: usize,
    pub fc_b: usize,
}

/// Tensor names and shapes in storage order, plus the matching layout.
fn schema(cfg: &PgnnConfig) -> (Vec<(String, usize, usize)>, Layout) {
    let d = cfg.dims;
    let mut specs = Vec::new();
    let mut add = |name: String, rows: usize, cols: usize| {
        specs.push((name, rows, cols));
        specs.len() - 1
    };
    let embed = add("node_embed".into(), cfg.vocab_size, d);
    let ggnn = (0..cfg.layers)
        .map(|l| GgnnLayerIds {
            w1: add(format!("ggnn.{l}.msg.w1"), d, d + EDGE_DIM),
            b1: add(format!("ggnn.{l}.msg.b1"), 1, d),
            w2: add(format!("ggnn.{l}.msg.w2"), d, d),
            b2: add(format!("ggnn.{l}.msg.b2"), 1, d),
            wz: add(format!("ggnn.{l}.gru.wz"), d, 2 * d),
            bz: add(format!("ggnn.{l}.gru.bz"), 1, d),
            wr: add(format!("ggnn.{l}.gru.wr"), d, 2 * d),
            br: add(format!("ggnn.{l}.gru.br"), 1, d),
            wh: add(format!("ggnn.{l}.gru.wh"), d, 2 * d),
            bh: add(format!("ggnn.{l}.gru.bh"), 1, d),
        })
        .collect();
    let lstm = (0..cfg.lstm_layers)
        .map(|k| LstmLayerIds {
            wi: add(format!("lstm.{k}.wi"), d, 2 * d),
            bi: add(format!("lstm.{k}.bi"), 1, d),
            wf: add(format!("lstm.{k}.wf"), d, 2 * d),
            bf: add(format!("lstm.{k}.bf"), 1, d),
            wg: add(format!("lstm.{k}.wg"), d, 2 * d),
            bg: add(format!("lstm.{k}.bg"), 1, d),
            wo: add(format!("lstm.{k}.wo"), d, 2 * d),
            bo: add(format!("lstm.{k}.bo"), 1, d),
        })
        .collect();
    let fc_w = add("fc_p.w".into(), d, 2 * d);
    let fc_b = add("fc_p.b".into(), 1, d);
    (
        specs,
        Layout {
            embed,
            ggnn,
            lstm,
            fc_w,
            fc_b,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgnnParams {
    pub config: PgnnConfig,
    names: Vec<String>,
    tensors: Vec<Tensor2>,
    pub(crate) layout: Layout,
}

impl PgnnParams {
    /// Seeded initialization. The embedding table is uniform in
    /// `[-0.1, 0.1]`; every other tensor is uniform in `±1/sqrt(fan_in)`,
    /// where fan-in is the input width of the map it belongs to.
    pub fn init(config: PgnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (specs, layout) = schema(&config);
        let d = config.dims;
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (i, (name, rows, cols)) in specs.into_iter().enumerate() {
            let fan_in = if i == layout.embed {
                0
            } else if name.contains(".msg.w1") || name.contains(".msg.b1") {
                d + EDGE_DIM
            } else if name.contains(".msg.") {
                d
            } else {
                2 * d
            };
            let scale = if fan_in == 0 { 0.1 } else { 1.0 / (fan_in as f64).sqrt() };
            tensors.push(Tensor2::uniform(&mut rng, rows, cols, scale));
            names.push(name);
        }
        Ok(PgnnParams {
            config,
            names,
            tensors,
            layout,
        })
    }

    /// Assemble from named tensors, checking names and shapes against the
    /// configuration.
    pub fn from_tensors(config: PgnnConfig, named: Vec<(String, Tensor2)>) -> Result<Self> {
        config.validate()?;
        let (specs, layout) = schema(&config);
        if named.len() != specs.len() {
            return Err(Error::shape(
                "parameter set",
                format!("{} tensors", specs.len()),
                format!("{} tensors", named.len()),
            ));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for ((name, rows, cols), (got_name, t)) in specs.into_iter().zip(named) {
            if name != got_name || t.rows != rows || t.cols != cols {
                return Err(Error::shape(
                    "parameter tensor",
                    format!("{name} {rows}x{cols}"),
                    format!("{got_name} {}x{}", t.rows, t.cols),
                ));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite { context: name });
            }
            names.push(name);
            tensors.push(t);
        }
        Ok(PgnnParams {
            config,
            names,
            tensors,
            layout,
        })
    }

    pub fn dims(&self) -> usize {
        self.config.dims
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor2] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor2] {
        &mut self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor2> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor2> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor2)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor2::len).sum()
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.config.activation = activation;
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorHeader {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: PgnnConfig,
    pub tensors: Vec<TensorHeader>,
}

/// Write a checkpoint holding `config` and the named tensors.
pub fn write_checkpoint<W: Write>(mut w: W, config: &PgnnConfig, tensors: &[(&str, &Tensor2)]) -> std::io::Result<()> {
    let header = CheckpointHeader {
        config: config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorHeader {
                name: name.to_string(),
                rows: t.rows,
                cols: t.cols,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, t) in tensors {
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

/// Read a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint<R: Read>(mut r: R, source_name: &str) -> Result<(PgnnConfig, Vec<(String, Tensor2)>)> {
    let fail = |message: String| Error::Format {
        source_name: source_name.to_string(),
        line: 0,
        message,
    };
    let io = |e: std::io::Error| fail(format!("truncated checkpoint: {e}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(fail("not a parameter checkpoint".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(fail(format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| fail(format!("bad checkpoint header: {e}")))?;
    let mut out = Vec::with_capacity(header.tensors.len());
    for th in header.tensors {
        let mut bytes = vec![0u8; th.rows * th.cols * 8];
        r.read_exact(&mut bytes).map_err(io)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push((th.name, Tensor2::from_vec(th.rows, th.cols, data)?));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io)?;
    if !rest.is_empty() {
        return Err(fail(format!("{} trailing bytes after tensor data", rest.len())));
    }
    Ok((header.config, out))
}

impl PgnnParams {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let named: Vec<(&str, &Tensor2)> = self.named().collect();
        write_checkpoint(std::io::BufWriter::new(file), &self.config, &named).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let (config, tensors) = read_checkpoint(std::io::BufReader::new(file), &path.display().to_string())?;
        PgnnParams::from_tensors(config, tensors)
    }
}
