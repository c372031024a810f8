//! Byte-level BPE segmentation over a GPT-2 style merge table.
//!
//! Input text is split by the GPT-2 pre-tokenization pattern, every piece is
//! mapped byte-by-byte onto printable symbols, and adjacent symbols are merged
//! greedily by merge rank until no ranked pair remains.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

pub(crate) const SHIPPED_MERGES: &str = include_str!("../data/merges.txt");

/// One BPE unit of a token: its raw bytes and its byte-level symbol, which is
/// the spelling used as the vocabulary key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subtoken {
    pub bytes: Vec<u8>,
    pub symbol: String,
}

impl Subtoken {
    pub fn text(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.bytes)
    }
}

impl fmt::Display for Subtoken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl PartialEq<&str> for Subtoken {
    fn eq(&self, other: &&str) -> bool {
        self.bytes == other.as_bytes()
    }
}

/// GPT-2's reversible byte → printable-char table.
fn byte_symbols() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + extra).expect("valid code point");
            extra += 1;
            c
        };
    }
    table
}

fn pretokenizer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+")
            .expect("static pattern")
    })
}

/// GPT-2 pre-tokenization. The original pattern uses `\s+(?!\S)`, which the
/// `regex` crate cannot express; a whitespace run followed by a non-space is
/// shortened by one char so the last space attaches to the next word.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let re = pretokenizer();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let m = re.find_at(text, pos).expect("pattern matches any char");
        let mut end = m.end();
        let piece = &text[m.start()..end];
        if piece.chars().all(char::is_whitespace) && end < text.len() && piece.chars().count() > 1 {
            end -= piece.chars().next_back().map_or(0, char::len_utf8);
        }
        out.push(&text[m.start()..end]);
        pos = end;
    }
    out
}

/// Ranked merge rules loaded from a `left right` per-line file.
#[derive(Debug, Clone)]
pub struct MergeTable {
    ranks: HashMap<(String, String), usize>,
    symbols: [char; 256],
    decode: HashMap<char, u8>,
}

impl MergeTable {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut ranks = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with("#version") {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    let rank = ranks.len();
                    ranks.entry((l.to_string(), r.to_string())).or_insert(rank);
                }
                _ => {
                    return Err(Error::Format {
                        source_name: source_name.to_string(),
                        line: i + 1,
                        message: format!("expected `left right`, got {line:?}"),
                    })
                }
            }
        }
        let symbols = byte_symbols();
        let decode = symbols.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        Ok(MergeTable {
            ranks,
            symbols,
            decode,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The 50,000 GPT-2/RoBERTa merges shipped with the crate.
    pub fn shipped() -> &'static MergeTable {
        static TABLE: OnceLock<MergeTable> = OnceLock::new();
        TABLE.get_or_init(|| MergeTable::parse(SHIPPED_MERGES, "merges.txt").expect("shipped merges parse"))
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Merge pairs in rank order.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<_> = self.ranks.iter().map(|((l, r), &k)| (k, l.as_str(), r.as_str())).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, l, r)| (l, r)).collect()
    }

    /// Byte-level symbol spelling of raw bytes.
    pub fn symbol_of(&self, bytes: &[u8]) -> String {
        bytes.iter().map(|&b| self.symbols[b as usize]).collect()
    }

    pub fn bytes_of(&self, symbol: &str) -> Option<Vec<u8>> {
        symbol.chars().map(|c| self.decode.get(&c).copied()).collect()
    }

    /// Segment a token into BPE subtokens. Concatenating the returned bytes
    /// reproduces the token's UTF-8 encoding.
    pub fn segment(&self, token: &str) -> Vec<Subtoken> {
        let mut out = Vec::new();
        for piece in pretokenize(token) {
            for symbol in self.merge_piece(&self.symbol_of(piece.as_bytes())) {
                let bytes = self.bytes_of(&symbol).expect("symbols come from the byte table");
                out.push(Subtoken { bytes, symbol });
            }
        }
        out
    }

    fn merge_piece(&self, piece: &str) -> Vec<String> {
        let mut parts: Vec<String> = piece.chars().map(String::from).collect();
        while parts.len() > 1 {
            let best = parts
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.ranks
                        .get(&(w[0].clone(), w[1].clone()))
                        .map(|&rank| (rank, i))
                })
                .min();
            let Some((rank, _)) = best else { break };
            // Apply every non-overlapping occurrence of the winning pair.
            let mut merged = Vec::with_capacity(parts.len());
            let mut i = 0;
            while i < parts.len() {
                if i + 1 < parts.len() && self.ranks.get(&(parts[i].clone(), parts[i + 1].clone())) == Some(&rank) {
                    merged.push(format!("{}{}", parts[i], parts[i + 1]));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut parts[i]));
                    i += 1;
                }
            }
            parts = merged;
        }
        parts
    }
}

/// Segment a leaf token with the given merge table.
pub fn subtokenize(token: &str, merges: &MergeTable) -> Vec<Subtoken> {
    merges.segment(token)
}
