//! Node vocabulary: byte-level subword entries followed by one entry per
//! structural node kind of the grammar.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use crate::bpe::{MergeTable, Subtoken};
use crate::error::{Error, Result};
use crate::frontend::NodeKind;

pub(crate) const SHIPPED_VOCAB: &str = include_str!("../data/vocab.txt");

/// Token used when a subword and all of its bytes are absent.
pub const UNKNOWN_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    subwords: HashMap<String, u32>,
    kinds: HashMap<String, u32>,
    base_size: usize,
    kind_size: usize,
}

/// Parse a `token<TAB>id` subword file. Ids must be exactly `0..n`.
pub fn parse_subword_file(text: &str, source_name: &str) -> Result<Vec<String>> {
    let fail = |line: usize, message: String| Error::Format {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut by_id: Vec<Option<String>> = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (token, id) = line
            .rsplit_once('\t')
            .ok_or_else(|| fail(i + 1, "expected `token<TAB>id`".into()))?;
        if token.is_empty() {
            return Err(fail(i + 1, "empty token".into()));
        }
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| fail(i + 1, format!("invalid id {id:?}")))?;
        if seen.insert(token.to_string(), id).is_some() {
            return Err(fail(i + 1, format!("duplicate token {token:?}")));
        }
        if by_id.len() <= id {
            by_id.resize(id + 1, None);
        }
        if by_id[id].replace(token.to_string()).is_some() {
            return Err(fail(i + 1, format!("duplicate id {id}")));
        }
    }
    by_id
        .into_iter()
        .enumerate()
        .map(|(id, t)| t.ok_or_else(|| fail(0, format!("ids are not dense: {id} is missing"))))
        .collect()
}

impl Vocabulary {
    /// Subwords take ids `0..subwords.len()`; kind names follow in order.
    pub fn from_parts<S, K>(subwords: S, kind_names: K) -> Vocabulary
    where
        S: IntoIterator,
        S::Item: Into<String>,
        K: IntoIterator,
        K::Item: Into<String>,
    {
        let subwords: HashMap<String, u32> = subwords
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.into(), i as u32))
            .collect();
        let base_size = subwords.len();
        let kinds: HashMap<String, u32> = kind_names
            .into_iter()
            .enumerate()
            .map(|(i, k)| (k.into(), (base_size + i) as u32))
            .collect();
        let kind_size = kinds.len();
        Vocabulary {
            subwords,
            kinds,
            base_size,
            kind_size,
        }
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn kind_size(&self) -> usize {
        self.kind_size
    }

    pub fn len(&self) -> usize {
        self.base_size + self.kind_size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subword_id(&self, symbol: &str) -> Option<u32> {
        self.subwords.get(symbol).copied()
    }

    pub fn kind_id(&self, kind: NodeKind) -> Result<u32> {
        self.kinds
            .get(kind.name())
            .copied()
            .ok_or_else(|| Error::VocabularyMiss {
                kind: kind.name().to_string(),
            })
    }

    /// Ids for a subtoken. A symbol missing from the table falls back to its
    /// single-byte symbols, then to `<unk>`.
    pub fn subtoken_ids(&self, sub: &Subtoken, merges: &MergeTable) -> Vec<u32> {
        if let Some(id) = self.subword_id(&sub.symbol) {
            return vec![id];
        }
        let unk = self.subword_id(UNKNOWN_TOKEN).unwrap_or(0);
        sub.bytes
            .iter()
            .map(|&b| self.subword_id(&merges.symbol_of(&[b])).unwrap_or(unk))
            .collect()
    }

    /// The shipped 50,265-entry subword file plus this grammar's kinds.
    pub fn shipped() -> &'static Vocabulary {
        static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
        VOCAB.get_or_init(|| {
            build_vocabulary_from_text(SHIPPED_VOCAB, "vocab.txt", MergeTable::shipped())
                .expect("shipped vocabulary is consistent")
        })
    }
}

/// Build the vocabulary for the embedded grammar from a subword file,
/// checking that every merge result is itself a vocabulary entry.
pub fn build_vocabulary(subword_path: impl AsRef<Path>, merges: &MergeTable) -> Result<Vocabulary> {
    let path = subword_path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    build_vocabulary_from_text(&text, &path.display().to_string(), merges)
}

pub fn build_vocabulary_from_text(text: &str, source_name: &str, merges: &MergeTable) -> Result<Vocabulary> {
    let subwords = parse_subword_file(text, source_name)?;
    let vocab = Vocabulary::from_parts(subwords, NodeKind::non_leaf().map(NodeKind::name));
    for (l, r) in merges.pairs() {
        let merged = format!("{l}{r}");
        if vocab.subword_id(&merged).is_none() {
            return Err(Error::Format {
                source_name: source_name.to_string(),
                line: 0,
                message: format!("merge result {merged:?} is not a vocabulary entry"),
            });
        }
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additivity_toy() {
        let v = Vocabulary::from_parts((0..10).map(|i| format!("w{i}")), ["A", "B", "C", "D"]);
        assert_eq!((v.base_size(), v.kind_size(), v.len()), (10, 4, 14));
        assert_eq!(v.subword_id("w3"), Some(3));
    }

    #[test]
    fn paper_instance_sizes() {
        let v = Vocabulary::from_parts((0..50_265).map(|i| i.to_string()), (0..71).map(|i| format!("K{i}")));
        assert_eq!(v.len(), 50_336);
    }

    #[test]
    fn shipped_vocab_counts() {
        let lines = SHIPPED_VOCAB.lines().filter(|l| !l.is_empty()).count();
        let v = Vocabulary::shipped();
        assert_eq!(lines, 50_265);
        assert_eq!(v.base_size(), lines);
        assert_eq!(v.kind_size(), NodeKind::non_leaf().count());
        assert_eq!(v.len(), v.base_size() + v.kind_size());
    }

    #[test]
    fn kind_and_subword_namespaces_do_not_collide() {
        let v = Vocabulary::shipped();
        // "Block" is both a GPT-2 token and a node kind.
        let sub = v.subword_id("Block").unwrap();
        let kind = v.kind_id(NodeKind::Block).unwrap();
        assert_ne!(sub, kind);
        assert!(kind as usize >= v.base_size());
    }

    #[test]
    fn missing_kind_is_reported() {
        let v = Vocabulary::from_parts(["a"], ["Block"]);
        assert!(matches!(v.kind_id(NodeKind::IfStatement), Err(Error::VocabularyMiss { .. })));
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(parse_subword_file("a\t0\nb\n", "v"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(parse_subword_file("a\t0\nb\tx\n", "v"), Err(Error::Format { line: 2, .. })));
        assert!(parse_subword_file("a\t0\nb\t2\n", "v").is_err());
        assert!(parse_subword_file("a\t0\na\t1\n", "v").is_err());
        assert_eq!(parse_subword_file("b\t1\na\t0\n", "v").unwrap(), ["a", "b"]);
    }

    #[test]
    fn merges_must_land_in_vocab() {
        let merges = MergeTable::parse("a b\n", "m").unwrap();
        assert!(build_vocabulary_from_text("a\t0\nb\t1\n", "v", &merges).is_err());
        assert!(build_vocabulary_from_text("a\t0\nb\t1\nab\t2\n", "v", &merges).is_ok());
    }

    #[test]
    fn byte_fallback() {
        let merges = MergeTable::parse("", "m").unwrap();
        let v = Vocabulary::from_parts(["<unk>", "a"], Vec::<String>::new());
        let sub = Subtoken {
            bytes: b"ab".to_vec(),
            symbol: "ab".into(),
        };
        assert_eq!(v.subtoken_ids(&sub, &merges), [1, 0]);
    }
}
