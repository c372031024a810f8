//! Run configuration: built-in defaults, overridden by a `key = value` file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use codegraph_core::ek::CLONE_MAX_TOKENS;
use codegraph_core::fusion::DEFAULT_THRESHOLD;
use codegraph_core::gnn::params::DEFAULT_DIMS;
use codegraph_core::Error;

pub const ENV_VAR: &str = "CODEGRAPH_CONFIG";
pub const DEFAULT_PATH: &str = "codegraph.conf";
pub const DEFAULT_LAMBDA: usize = 30;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub lambda: usize,
    pub dims: usize,
    pub seed: u64,
    pub params: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub merges: Option<PathBuf>,
    pub api: Option<PathBuf>,
    pub api_strict: bool,
    pub encoder: String,
    pub max_tokens: usize,
    pub threshold: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            lambda: DEFAULT_LAMBDA,
            dims: DEFAULT_DIMS,
            seed: DEFAULT_SEED,
            params: None,
            vocab: None,
            merges: None,
            api: None,
            api_strict: false,
            encoder: "reference".into(),
            max_tokens: CLONE_MAX_TOKENS,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Values given on the command line; `None` leaves the lower layer alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub lambda: Option<usize>,
    pub dims: Option<usize>,
    pub seed: Option<u64>,
    pub params: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub merges: Option<PathBuf>,
    pub api: Option<PathBuf>,
    pub api_strict: Option<bool>,
    pub encoder: Option<String>,
    pub max_tokens: Option<usize>,
    pub threshold: Option<f64>,
}

impl Overrides {
    fn apply(self, c: &mut Config) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$f = v;
                }
            )*};
        }
        take!(lambda, dims, seed, api_strict, encoder, max_tokens, threshold);
        macro_rules! take_path {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f;
                }
            )*};
        }
        take_path!(params, vocab, merges, api);
    }
}

/// Parse a config file. Lines are `key = value`; `#` starts a comment;
/// relative paths resolve against the file's directory.
pub fn parse_config(text: &str, source_name: &str, base_dir: &Path) -> Result<Overrides, Error> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| Error::Format {
            source_name: source_name.to_string(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| fail("expected `key = value`".into()))?;
        let num = |what: &str| fail(format!("invalid {what} value {value:?}"));
        let path = || {
            let p = PathBuf::from(value);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        match key {
            "lambda" => o.lambda = Some(value.parse().map_err(|_| num("lambda"))?),
            "dims" => o.dims = Some(value.parse().map_err(|_| num("dims"))?),
            "seed" => o.seed = Some(value.parse().map_err(|_| num("seed"))?),
            "max_tokens" => o.max_tokens = Some(value.parse().map_err(|_| num("max_tokens"))?),
            "threshold" => o.threshold = Some(value.parse().map_err(|_| num("threshold"))?),
            "api_strict" => o.api_strict = Some(value.parse().map_err(|_| num("api_strict"))?),
            "task" => {
                o.max_tokens = Some(match value {
                    "clone" => CLONE_MAX_TOKENS,
                    "summarization" => codegraph_core::ek::SUMMARIZATION_MAX_TOKENS,
                    _ => return Err(fail(format!("unknown task {value:?}"))),
                })
            }
            "encoder" => o.encoder = Some(value.to_string()),
            "params" => o.params = Some(path()),
            "vocab" => o.vocab = Some(path()),
            "merges" => o.merges = Some(path()),
            "api" => o.api = Some(path()),
            _ => return Err(fail(format!("unknown key {key:?}"))),
        }
    }
    Ok(o)
}

/// Which config file applies: an explicit path, then `$CODEGRAPH_CONFIG`,
/// then `./codegraph.conf` if it exists.
pub fn config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(ENV_VAR).filter(|v| !v.is_empty()) {
        return Some(PathBuf::from(p));
    }
    let default = PathBuf::from(DEFAULT_PATH);
    default.exists().then_some(default)
}

impl Config {
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Config, Error> {
        let mut c = Config::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let base = path.parent().unwrap_or(Path::new("."));
            parse_config(&text, &path.display().to_string(), base)?.apply(&mut c);
        }
        flags.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.lambda < 1 {
            return Err(Error::InvalidArgument("lambda must be at least 1".into()));
        }
        if self.dims < 2 {
            return Err(Error::InvalidArgument("dims must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument("threshold must be in [0, 1]".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidArgument("max_tokens must be positive".into()));
        }
        if self.vocab.is_some() != self.merges.is_some() {
            return Err(Error::InvalidArgument("vocab and merges must be given together".into()));
        }
        for p in [&self.params, &self.vocab, &self.merges, &self.api].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::io(p, std::io::ErrorKind::NotFound.into()));
            }
        }
        Ok(())
    }
}
