//! Clone-detection corpora: fragment indexes, functionality-disjoint
//! train/val/test splits with balanced pairs, and corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpe::MergeTable;
use crate::error::{Error, Result};
use crate::frontend::{parse, SourceUnit};
use crate::partition::recommend_lambda;
use crate::sast::build_sast;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: String,
    pub path: PathBuf,
    pub functionality_id: u64,
}

impl Fragment {
    pub fn load_source(&self) -> Result<SourceUnit> {
        SourceUnit::read(&self.path)
    }
}

/// Parse an index CSV of `fragment_id,path,functionality_id` rows. An
/// optional header row with those names is skipped. Relative paths resolve
/// against `base_dir`.
pub fn parse_index(text: &str, base_dir: &Path, source_name: &str) -> Result<Vec<Fragment>> {
    let fail = |line: usize, message: String| Error::Format {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.position().map_or(i + 1, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(fail(line, format!("expected 3 fields, found {}", record.len())));
        }
        if i == 0 && &record[0] == "fragment_id" && &record[2] == "functionality_id" {
            continue;
        }
        let functionality_id = record[2]
            .parse()
            .map_err(|_| fail(line, format!("invalid functionality id {:?}", &record[2])))?;
        if record[0].is_empty() || record[1].is_empty() {
            return Err(fail(line, "empty fragment id or path".into()));
        }
        if !seen.insert(record[0].to_string()) {
            return Err(fail(line, format!("duplicate fragment id {:?}", &record[0])));
        }
        let path = Path::new(&record[1]);
        out.push(Fragment {
            id: record[0].to_string(),
            path: if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            },
            functionality_id,
        });
    }
    Ok(out)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Vec<Fragment>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_index(&text, base, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl FromStr for SplitCounts {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("expected `train,val,test` counts, got {s:?}"));
        let [a, b, c] = parts[..] else { return Err(bad()) };
        Ok(SplitCounts {
            train: a.parse().map_err(|_| bad())?,
            val: b.parse().map_err(|_| bad())?,
            test: c.parse().map_err(|_| bad())?,
        })
    }
}

impl fmt::Display for SplitCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.val, self.test)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Whole functionalities go to one split; counts are functionality counts.
    #[default]
    Functionality,
    /// Fragments are shuffled across splits; counts are relative weights.
    Random,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "functionality" => Ok(SplitMode::Functionality),
            "random" => Ok(SplitMode::Random),
            _ => Err(Error::InvalidArgument(format!(
                "unknown split mode {s:?} (expected `functionality` or `random`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitOptions {
    pub mode: SplitMode,
    /// Upper bound on positive pairs per split, sampled uniformly.
    pub positive_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub a: String,
    pub b: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPart {
    pub functionalities: Vec<u64>,
    pub fragments: Vec<String>,
    pub positives: usize,
    pub negatives: usize,
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub mode: SplitMode,
    pub counts: SplitCounts,
    pub positive_cap: Option<usize>,
    pub train: SplitPart,
    pub val: SplitPart,
    pub test: SplitPart,
}

impl SplitManifest {
    pub fn parts(&self) -> [(&'static str, &SplitPart); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Positive and negative pairs among `members` (fragment indices, ascending).
fn split_pairs(
    name: &str,
    members: &[usize],
    fragments: &[Fragment],
    cap: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<SplitPart> {
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &m in members {
        groups.entry(fragments[m].functionality_id).or_default().push(m);
    }
    let mut positives: Vec<(usize, usize)> = Vec::new();
    for g in groups.values() {
        for (i, &a) in g.iter().enumerate() {
            positives.extend(g[i + 1..].iter().map(|&b| (a, b)));
        }
    }
    if let Some(cap) = cap.filter(|&c| c < positives.len()) {
        let mut keep = rand::seq::index::sample(rng, positives.len(), cap).into_vec();
        keep.sort_unstable();
        positives = keep.into_iter().map(|i| positives[i]).collect();
    }

    let need = positives.len();
    let cross = choose2(members.len()) - groups.values().map(|g| choose2(g.len())).sum::<usize>();
    if cross < need {
        return Err(Error::InsufficientNegatives {
            split: name.to_string(),
            needed: need,
            available: cross,
        });
    }
    let fid = |i: usize| fragments[members[i]].functionality_id;
    let mut negatives: Vec<(usize, usize)> = if 2 * need >= cross {
        let mut all = Vec::with_capacity(cross);
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                if fid(i) != fid(j) {
                    all.push((members[i], members[j]));
                }
            }
        }
        rand::seq::index::sample(rng, all.len(), need)
            .into_iter()
            .map(|k| all[k])
            .collect()
    } else {
        let mut chosen = HashSet::with_capacity(need);
        let mut picked = Vec::with_capacity(need);
        while picked.len() < need {
            let i = rng.random_range(0..members.len());
            let j = rng.random_range(0..members.len());
            if i == j || fid(i) == fid(j) {
                continue;
            }
            let pair = (members[i.min(j)], members[i.max(j)]);
            if chosen.insert(pair) {
                picked.push(pair);
            }
        }
        picked
    };
    negatives.sort_unstable();

    let pair = |(a, b): (usize, usize), label| Pair {
        a: fragments[a].id.clone(),
        b: fragments[b].id.clone(),
        label,
    };
    let mut pairs: Vec<Pair> = positives.iter().map(|&p| pair(p, 1)).collect();
    pairs.extend(negatives.iter().map(|&p| pair(p, 0)));
    Ok(SplitPart {
        functionalities: groups.keys().copied().collect(),
        fragments: members.iter().map(|&m| fragments[m].id.clone()).collect(),
        positives: positives.len(),
        negatives: negatives.len(),
        pairs,
    })
}

/// Build a train/val/test split. In functionality mode the shuffled
/// functionality ids are dealt out `train`, `val`, `test` in turn; every
/// same-functionality pair in a split is a positive, and as many
/// cross-functionality pairs of that split are drawn as negatives.
pub fn build_split(fragments: &[Fragment], counts: SplitCounts, seed: u64, opts: SplitOptions) -> Result<SplitManifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = [counts.train, counts.val, counts.test];
    let mut members: [Vec<usize>; 3] = Default::default();

    match opts.mode {
        SplitMode::Functionality => {
            let mut by_fid: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, f) in fragments.iter().enumerate() {
                by_fid.entry(f.functionality_id).or_default().push(i);
            }
            let requested: usize = sizes.iter().sum();
            if requested > by_fid.len() {
                return Err(Error::InsufficientFunctionalities {
                    requested,
                    available: by_fid.len(),
                });
            }
            let mut fids: Vec<u64> = by_fid.keys().copied().collect();
            fids.shuffle(&mut rng);
            let mut it = fids.into_iter();
            for (slot, &k) in members.iter_mut().zip(&sizes) {
                for fid in it.by_ref().take(k) {
                    let frags = &by_fid[&fid];
                    if frags.len() < 2 {
                        return Err(Error::InsufficientFragments {
                            functionality: fid,
                            count: frags.len(),
                        });
                    }
                    slot.extend(frags);
                }
                slot.sort_unstable();
            }
        }
        SplitMode::Random => {
            let total: usize = sizes.iter().sum();
            if total == 0 {
                return Err(Error::InvalidArgument("split weights sum to zero".into()));
            }
            let mut order: Vec<usize> = (0..fragments.len()).collect();
            order.shuffle(&mut rng);
            let n = fragments.len();
            let n_train = n * counts.train / total;
            let n_val = n * counts.val / total;
            members[0] = order[..n_train].to_vec();
            members[1] = order[n_train..n_train + n_val].to_vec();
            members[2] = order[n_train + n_val..].to_vec();
            for m in &mut members {
                m.sort_unstable();
            }
        }
    }

    let [train, val, test] = members;
    Ok(SplitManifest {
        schema_version: crate::SCHEMA_VERSION,
        seed,
        mode: opts.mode,
        counts,
        positive_cap: opts.positive_cap,
        train: split_pairs("train", &train, fragments, opts.positive_cap, &mut rng)?,
        val: split_pairs("val", &val, fragments, opts.positive_cap, &mut rng)?,
        test: split_pairs("test", &test, fragments, opts.positive_cap, &mut rng)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentStat {
    pub id: String,
    pub sast_nodes: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub schema_version: u32,
    pub fragment_count: usize,
    pub functionality_count: usize,
    pub parsed: usize,
    pub failed: usize,
    /// Mean over fragments that built successfully; 0 when none did.
    pub avg_sast_nodes: f64,
    pub recommended_lambda: usize,
    pub fragments: Vec<FragmentStat>,
}

impl CorpusStats {
    /// Aggregate per-fragment results, in the given order.
    pub fn from_fragment_stats(stats: Vec<FragmentStat>, functionality_count: usize) -> Self {
        let counts: Vec<usize> = stats.iter().filter_map(|s| s.sast_nodes).collect();
        let avg = if counts.is_empty() {
            0.0
        } else {
            counts.iter().sum::<usize>() as f64 / counts.len() as f64
        };
        CorpusStats {
            schema_version: crate::SCHEMA_VERSION,
            fragment_count: stats.len(),
            functionality_count,
            parsed: counts.len(),
            failed: stats.len() - counts.len(),
            avg_sast_nodes: avg,
            recommended_lambda: recommend_lambda(avg),
            fragments: stats,
        }
    }
}

/// S-AST node count of the first method of a unit.
pub fn sast_node_count(unit: &SourceUnit, vocab: &Vocabulary, merges: &MergeTable) -> Result<usize> {
    let ast = parse(unit)?.method(0)?;
    Ok(build_sast(&ast, vocab, merges)?.len())
}

/// Per-fragment S-AST sizes and their mean, computed on `jobs` threads
/// (all cores when `None`). Fragments that fail to load or parse are
/// counted and skipped.
pub fn corpus_stats(
    fragments: &[Fragment],
    vocab: &Vocabulary,
    merges: &MergeTable,
    jobs: Option<usize>,
) -> Result<CorpusStats> {
    let work = || -> Vec<FragmentStat> {
        fragments
            .par_iter()
            .map(|f| {
                let r = f.load_source().and_then(|u| sast_node_count(&u, vocab, merges));
                if let Err(e) = &r {
                    log::warn!("{}: {e}", f.path.display());
                }
                FragmentStat {
                    id: f.id.clone(),
                    sast_nodes: r.as_ref().ok().copied(),
                    error: r.err().map(|e| e.to_string()),
                }
            })
            .collect()
    };
    let stats = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    };
    let functionalities: BTreeSet<u64> = fragments.iter().map(|f| f.functionality_id).collect();
    Ok(CorpusStats::from_fragment_stats(stats, functionalities.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(funcs: u64, per: usize) -> Vec<Fragment> {
        (0..funcs)
            .flat_map(|f| {
                (0..per).map(move |k| Fragment {
                    id: format!("f{f}_{k}"),
                    path: PathBuf::from(format!("{f}/{k}.java")),
                    functionality_id: f,
                })
            })
            .collect()
    }

    fn counts(s: &str) -> SplitCounts {
        s.parse().unwrap()
    }

    #[test]
    fn counts_parse() {
        assert_eq!(
            counts("22,11,10"),
            SplitCounts {
                train: 22,
                val: 11,
                test: 10
            }
        );
        assert!("1,2".parse::<SplitCounts>().is_err());
        assert!("a,b,c".parse::<SplitCounts>().is_err());
    }

    #[test]
    fn one_functionality_per_split_has_no_negatives() {
        let err = build_split(&corpus(3, 2), counts("1,1,1"), 0, SplitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientNegatives { needed: 1, available: 0, .. }));
    }

    #[test]
    fn six_by_three() {
        let frags = corpus(6, 3);
        let m = build_split(&frags, counts("2,2,2"), 42, SplitOptions::default()).unwrap();
        for (_, p) in m.parts() {
            assert_eq!(p.functionalities.len(), 2);
            assert_eq!(p.positives, 2 * 3);
            assert_eq!(p.negatives, 6);
        }
        let again = build_split(&frags, counts("2,2,2"), 42, SplitOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn too_many_functionalities_requested() {
        let err = build_split(&corpus(4, 2), counts("2,2,1"), 0, SplitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientFunctionalities { requested: 5, available: 4 }));
    }

    #[test]
    fn singleton_functionality_rejected() {
        let mut frags = corpus(3, 2);
        frags.pop();
        let err = build_split(&frags, counts("3,0,0"), 0, SplitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientFragments { functionality: 2, count: 1 }));
    }

    #[test]
    fn positive_cap() {
        let frags = corpus(4, 5);
        let opts = SplitOptions {
            positive_cap: Some(7),
            ..Default::default()
        };
        let m = build_split(&frags, counts("4,0,0"), 1, opts).unwrap();
        assert_eq!((m.train.positives, m.train.negatives), (7, 7));
    }

    #[test]
    fn random_mode_shares_functionalities() {
        let frags = corpus(5, 8);
        let opts = SplitOptions {
            mode: SplitMode::Random,
            ..Default::default()
        };
        let m = build_split(&frags, counts("8,1,1"), 3, opts).unwrap();
        assert_eq!(m.train.fragments.len() + m.val.fragments.len() + m.test.fragments.len(), 40);
        assert_eq!(m.train.fragments.len(), 32);
        for (_, p) in m.parts() {
            assert_eq!(p.positives, p.negatives);
        }
    }

    #[test]
    fn index_parsing() {
        let text = "fragment_id,path,functionality_id\na,x/a.java,3\nb, /abs/b.java ,4\n";
        let f = parse_index(text, Path::new("/base"), "idx").unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].path, PathBuf::from("/base/x/a.java"));
        assert_eq!(f[1].path, PathBuf::from("/abs/b.java"));
        assert_eq!(f[1].functionality_id, 4);
        assert!(matches!(parse_index("a,p,x\n", Path::new("."), "idx"), Err(Error::Format { line: 1, .. })));
        assert!(parse_index("a,p,1\na,q,2\n", Path::new("."), "idx").is_err());
        assert!(parse_index("a,p\n", Path::new("."), "idx").is_err());
    }

    #[test]
    fn averages() {
        let stat = |n| FragmentStat {
            id: String::new(),
            sast_nodes: n,
            error: None,
        };
        assert_eq!(CorpusStats::from_fragment_stats(vec![stat(Some(57))], 1).avg_sast_nodes, 57.0);
        let s = CorpusStats::from_fragment_stats(vec![stat(Some(40)), stat(None), stat(Some(60))], 2);
        assert_eq!((s.avg_sast_nodes, s.parsed, s.failed), (50.0, 2, 1));
    }
}
