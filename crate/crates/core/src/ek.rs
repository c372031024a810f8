//! External-knowledge context: the pre-order serialization of a method
//! followed by descriptions of the library calls it makes, and the text
//! encoders that turn that context into a vector.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{preorder_tokens, Ast, NodeId, NodeKind};

/// Context length limit for summarization-style inputs.
pub const SUMMARIZATION_MAX_TOKENS: usize = 256;
/// Context length limit for clone-detection inputs.
pub const CLONE_MAX_TOKENS: usize = 400;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LoadMode {
    /// Skip malformed lines and count them.
    #[default]
    Lenient,
    /// Fail on the first malformed line.
    Strict,
}

/// Qualified method name → one-sentence description.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiStore {
    entries: HashMap<String, String>,
    folded: HashMap<String, String>,
    order: Vec<String>,
    /// Malformed lines skipped in lenient mode.
    pub skipped: usize,
    /// Lines whose key was already present.
    pub duplicates: usize,
}

impl ApiStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse `QualifiedName<TAB>Description` lines. Blank lines are ignored.
    pub fn parse(text: &str, source_name: &str, mode: LoadMode) -> Result<Self> {
        let mut store = ApiStore::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line
                .split_once('\t')
                .map(|(k, d)| (k.trim(), d.trim()))
                .filter(|(k, d)| !k.is_empty() && !d.is_empty() && !k.contains(char::is_whitespace));
            let Some((key, desc)) = parsed else {
                if mode == LoadMode::Strict {
                    return Err(Error::Format {
                        source_name: source_name.to_string(),
                        line: i + 1,
                        message: "expected `QualifiedName<TAB>Description`".into(),
                    });
                }
                log::warn!("{source_name}:{}: skipping malformed API line", i + 1);
                store.skipped += 1;
                continue;
            };
            if !store.insert(key, desc) {
                log::warn!("{source_name}:{}: duplicate API `{key}`, keeping the first entry", i + 1);
                store.duplicates += 1;
            }
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>, mode: LoadMode) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), mode)
    }

    /// Add an entry unless the key exists. Returns whether it was added.
    pub fn insert(&mut self, key: &str, description: &str) -> bool {
        if self.entries.contains_key(key) {
            return false;
        }
        self.entries.insert(key.to_string(), description.to_string());
        self.folded
            .entry(key.to_ascii_lowercase())
            .or_insert_with(|| key.to_string());
        self.order.push(key.to_string());
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Exact lookup, falling back to an ASCII case-insensitive match.
    pub fn lookup(&self, key: &str) -> Option<(&str, &str)> {
        let key = if self.entries.contains_key(key) {
            key
        } else {
            self.folded.get(&key.to_ascii_lowercase())?.as_str()
        };
        self.entries.get_key_value(key).map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Keys in file order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformedContext {
    pub tokens: Vec<String>,
    /// Matched API keys, parallel to `descriptions`.
    pub apis: Vec<String>,
    pub descriptions: Vec<String>,
    pub text: String,
}

impl TransformedContext {
    /// The first `max_tokens` whitespace-separated tokens of `text`. The code
    /// serialization comes first, so descriptions are dropped before code.
    pub fn truncated(&self, max_tokens: usize) -> String {
        self.text.split_whitespace().take(max_tokens).collect::<Vec<_>>().join(" ")
    }
}

/// Dotted spelling of a call qualifier made of names, `this` and field
/// accesses. Anything else (calls, indexing, literals) has no path.
fn qualifier_path(ast: &Ast, id: NodeId) -> Option<Vec<String>> {
    let node = ast.node(id);
    match node.kind {
        NodeKind::Identifier | NodeKind::Name | NodeKind::This => Some(vec![node.token.clone()?]),
        NodeKind::FieldAccess => {
            let [q, m] = node.children[..] else { return None };
            let mut path = qualifier_path(ast, q)?;
            path.push(ast.node(m).token.clone()?);
            Some(path)
        }
        _ => None,
    }
}

/// Candidate `Qualifier.member` keys of every qualified call, in source order
/// of the member name. Each call lists its keys longest first.
pub fn call_keys(ast: &Ast) -> Vec<Vec<String>> {
    let mut calls: Vec<(usize, Vec<String>)> = Vec::new();
    for id in ast.preorder() {
        let node = ast.node(id);
        if node.kind != NodeKind::MethodInvocation {
            continue;
        }
        let Some(member_pos) = node.children.iter().position(|&c| ast.node(c).kind == NodeKind::Member) else {
            continue;
        };
        if member_pos == 0 {
            continue;
        }
        let member = ast.node(node.children[member_pos]);
        let Some(mut path) = qualifier_path(ast, node.children[0]) else {
            continue;
        };
        path.push(member.token.clone().unwrap_or_default());
        let keys = (0..path.len() - 1).map(|start| path[start..].join(".")).collect();
        calls.push((member.span.0, keys));
    }
    calls.sort_by_key(|(pos, _)| *pos);
    calls.into_iter().map(|(_, k)| k).collect()
}

/// Pre-order serialization plus the descriptions of matched calls, each
/// description once, in order of first call.
pub fn transform(ast: &Ast, store: &ApiStore) -> TransformedContext {
    let tokens = preorder_tokens(ast);
    let mut apis: Vec<String> = Vec::new();
    let mut descriptions = Vec::new();
    for keys in call_keys(ast) {
        let Some((key, desc)) = keys.iter().find_map(|k| store.lookup(k)) else {
            continue;
        };
        if !apis.iter().any(|a| a == key) {
            apis.push(key.to_string());
            descriptions.push(desc.to_string());
        }
    }
    let mut text = tokens.join(" ");
    for d in &descriptions {
        text.push(' ');
        text.push_str(d);
    }
    TransformedContext {
        tokens,
        apis,
        descriptions,
        text,
    }
}

/// Maps text to a fixed-width vector.
pub trait TextEncoder: Send + Sync {
    fn dims(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f64>>;
}

/// Signed feature hashing of whitespace tokens, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceEncoder {
    pub dims: usize,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl ReferenceEncoder {
    pub fn new(dims: usize) -> Self {
        ReferenceEncoder { dims }
    }

    /// Signed bucket counts before normalization.
    pub fn counts(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dims];
        if self.dims == 0 {
            return v;
        }
        for tok in text.split_whitespace() {
            let h = fnv1a(tok.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dims as u64) as usize] += sign;
        }
        v
    }
}

impl TextEncoder for ReferenceEncoder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = self.counts(text);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Runs an external program per call: text on stdin, a JSON array of
/// numbers on stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandEncoder {
    pub program: String,
    pub args: Vec<String>,
    pub dims: usize,
}

impl TextEncoder for CommandEncoder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        let fail = |m: String| Error::Encoder(format!("{}: {m}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(text.as_bytes()).map_err(|e| fail(e.to_string()))?;
        }
        let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        if !out.status.success() {
            return Err(fail(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let v: Vec<f64> = serde_json::from_slice(&out.stdout).map_err(|e| fail(format!("bad output: {e}")))?;
        if v.len() != self.dims {
            return Err(Error::shape("encoder output", self.dims, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "encoder output".into(),
            });
        }
        Ok(v)
    }
}

/// Build an encoder from a selector: `reference`, or `command:<program> [args...]`.
pub fn encoder_from_spec(spec: &str, dims: usize) -> Result<Box<dyn TextEncoder>> {
    let spec = spec.trim();
    if spec == "reference" {
        return Ok(Box::new(ReferenceEncoder::new(dims)));
    }
    if let Some(cmd) = spec.strip_prefix("command:") {
        let mut parts = cmd.split_whitespace().map(String::from);
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidArgument("command encoder needs a program".into()))?;
        return Ok(Box::new(CommandEncoder {
            program,
            args: parts.collect(),
            dims,
        }));
    }
    Err(Error::InvalidArgument(format!(
        "unknown encoder `{spec}` (expected `reference` or `command:<program>`)"
    )))
}
