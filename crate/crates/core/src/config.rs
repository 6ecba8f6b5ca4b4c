//! Run configuration resolved from defaults, a key=value file, `UNIWALK_*`
//! environment variables and command-line flags, in increasing precedence.
//!
//! Config files hold one `key = value` per line; `#` starts a comment. Keys
//! are the long flag names (`walk-length`), underscores are accepted too.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{CvConfig, Method, MfHyperparams};
use crate::ingest::Delimiter;
use crate::recommender::Thresholds;
use crate::trainer::Hyperparams;

/// Every configurable key with its environment variable and help text.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("preset", "UNIWALK_PRESET", "hyperparameter preset: filmtrust, epinions or flixster"),
    ("c", "UNIWALK_C", "weight of social edges"),
    ("walk-length", "UNIWALK_WALK_LENGTH", "nodes per walk"),
    ("window", "UNIWALK_WINDOW", "window radius"),
    ("alpha", "UNIWALK_ALPHA", "weight of the similar-pair term"),
    ("beta", "UNIWALK_BETA", "weight of the dissimilar-pair term"),
    ("dim", "UNIWALK_DIM", "latent dimension"),
    ("lambda-b", "UNIWALK_LAMBDA_B", "bias regularization"),
    ("lambda-z", "UNIWALK_LAMBDA_Z", "latent regularization"),
    ("eta", "UNIWALK_ETA", "learning rate"),
    ("gamma", "UNIWALK_GAMMA", "momentum"),
    ("walks-per-node", "UNIWALK_WALKS_PER_NODE", "walks started at every node per kind and iteration"),
    ("iterations", "UNIWALK_ITERATIONS", "maximum training iterations"),
    ("seed", "UNIWALK_SEED", "random seed"),
    ("grad-clip", "UNIWALK_GRAD_CLIP", "per-block gradient norm bound (inf disables)"),
    ("clamp", "UNIWALK_CLAMP", "clamp predictions to the rating scale (true/false)"),
    ("patience", "UNIWALK_PATIENCE", "non-improving validation iterations before stopping"),
    ("validation-fraction", "UNIWALK_VALIDATION_FRACTION", "share of training ratings held out for early stopping"),
    ("cooc-scope", "UNIWALK_COOC_SCOPE", "iterations kept in co-occurrence counts: all or last"),
    ("mode", "UNIWALK_MODE", "reference (reproducible) or performance (parallel)"),
    ("threads", "UNIWALK_THREADS", "worker threads, 0 for all cores"),
    ("delimiter", "UNIWALK_DELIMITER", "input field separator: whitespace, tab, comma or one character"),
    ("ratings", "UNIWALK_RATINGS", "ratings file"),
    ("trust", "UNIWALK_TRUST", "trust file"),
    ("model", "UNIWALK_MODEL", "model file"),
    ("output", "UNIWALK_OUTPUT", "output file or prefix"),
    ("trace", "UNIWALK_TRACE", "training trace file"),
    ("manifest", "UNIWALK_MANIFEST", "run manifest file"),
    ("folds", "UNIWALK_FOLDS", "cross-validation folds"),
    ("methods", "UNIWALK_METHODS", "comma-separated methods: uniwalk, mf, ucf, icf, mean"),
    ("knn-k", "UNIWALK_KNN_K", "comma-separated neighborhood sizes for ucf and icf"),
    ("mf-epochs", "UNIWALK_MF_EPOCHS", "maximum matrix factorization epochs"),
    ("top-n", "UNIWALK_TOP_N", "recommendations per user"),
    ("k-expl", "UNIWALK_K_EXPL", "similar users and items per explanation"),
    ("user", "UNIWALK_USER", "target user id"),
    ("high-threshold", "UNIWALK_HIGH_THRESHOLD", "favorite rating threshold (default: scale midpoint)"),
    ("low-threshold", "UNIWALK_LOW_THRESHOLD", "dislike rating threshold (default: scale midpoint)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub hp: Hyperparams,
    pub threads: usize,
    pub delimiter: Delimiter,
    pub ratings: Option<PathBuf>,
    pub trust: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub folds: usize,
    pub methods: Vec<Method>,
    pub knn_k: Vec<usize>,
    pub mf_epochs: usize,
    pub top_n: usize,
    pub k_expl: usize,
    pub user: Option<String>,
    pub high_threshold: Option<f64>,
    pub low_threshold: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::with_preset("filmtrust").expect("known preset")
    }
}

fn preset(name: &str) -> Result<Hyperparams> {
    match name {
        "filmtrust" => Ok(Hyperparams::filmtrust()),
        "epinions" => Ok(Hyperparams::epinions()),
        "flixster" => Ok(Hyperparams::flixster()),
        _ => Err(Error::arg(format!("unknown preset {name:?}"))),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::arg(format!("{key}: cannot parse {value:?}")))
}

fn path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_owned(), |p| p.display().to_string())
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_owned(), T::to_string)
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Result<Vec<T>> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::arg(format!("{key}: empty list")));
    }
    Ok(items)
}

fn bool_value(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::arg(format!("{key}: expected true or false, got {value:?}"))),
    }
}

/// Canonical form of a key: lowercase, dashes.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl RunConfig {
    pub fn with_preset(name: &str) -> Result<Self> {
        Ok(Self {
            preset: name.to_owned(),
            hp: preset(name)?,
            threads: 0,
            delimiter: Delimiter::Whitespace,
            ratings: None,
            trust: None,
            model: None,
            output: None,
            trace: None,
            manifest: None,
            folds: 5,
            methods: vec![Method::UniWalk, Method::Mf, Method::Ucf, Method::Icf],
            knn_k: vec![50],
            mf_epochs: MfHyperparams::default().epochs,
            top_n: 10,
            k_expl: 5,
            user: None,
            high_threshold: None,
            low_threshold: None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let v = value.trim();
        let hp = &mut self.hp;
        match key.as_str() {
            "preset" => {
                self.hp = preset(v)?;
                self.preset = v.to_owned();
            }
            "c" => hp.c = num(&key, v)?,
            "walk-length" => hp.walk_length = num(&key, v)?,
            "window" => hp.window = num(&key, v)?,
            "alpha" => hp.alpha = num(&key, v)?,
            "beta" => hp.beta = num(&key, v)?,
            "dim" => hp.dim = num(&key, v)?,
            "lambda-b" => hp.lambda_b = num(&key, v)?,
            "lambda-z" => hp.lambda_z = num(&key, v)?,
            "eta" => hp.eta = num(&key, v)?,
            "gamma" => hp.gamma = num(&key, v)?,
            "walks-per-node" => hp.walks_per_node = num(&key, v)?,
            "iterations" => hp.iterations = num(&key, v)?,
            "seed" => hp.seed = num(&key, v)?,
            "grad-clip" => hp.grad_clip = num(&key, v)?,
            "clamp" => hp.clamp_predictions = bool_value(&key, v)?,
            "patience" => hp.patience = num(&key, v)?,
            "validation-fraction" => hp.validation_fraction = num(&key, v)?,
            "cooc-scope" => hp.cooc_scope = v.parse()?,
            "mode" => hp.mode = v.parse()?,
            "threads" => self.threads = num(&key, v)?,
            "delimiter" => self.delimiter = value.parse()?,
            "ratings" => self.ratings = path(v),
            "trust" => self.trust = path(v),
            "model" => self.model = path(v),
            "output" => self.output = path(v),
            "trace" => self.trace = path(v),
            "manifest" => self.manifest = path(v),
            "folds" => self.folds = num(&key, v)?,
            "methods" => self.methods = list(&key, v)?,
            "knn-k" => self.knn_k = list(&key, v)?,
            "mf-epochs" => self.mf_epochs = num(&key, v)?,
            "top-n" => self.top_n = num(&key, v)?,
            "k-expl" => self.k_expl = num(&key, v)?,
            "user" => self.user = (!v.is_empty()).then(|| v.to_owned()),
            "high-threshold" => self.high_threshold = if v == "none" { None } else { Some(num(&key, v)?) },
            "low-threshold" => self.low_threshold = if v == "none" { None } else { Some(num(&key, v)?) },
            _ => return Err(Error::arg(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let hp = &self.hp;
        let join = |v: &[String]| v.join(",");
        Some(match normalize_key(key).as_str() {
            "preset" => self.preset.clone(),
            "c" => hp.c.to_string(),
            "walk-length" => hp.walk_length.to_string(),
            "window" => hp.window.to_string(),
            "alpha" => hp.alpha.to_string(),
            "beta" => hp.beta.to_string(),
            "dim" => hp.dim.to_string(),
            "lambda-b" => hp.lambda_b.to_string(),
            "lambda-z" => hp.lambda_z.to_string(),
            "eta" => hp.eta.to_string(),
            "gamma" => hp.gamma.to_string(),
            "walks-per-node" => hp.walks_per_node.to_string(),
            "iterations" => hp.iterations.to_string(),
            "seed" => hp.seed.to_string(),
            "grad-clip" => hp.grad_clip.to_string(),
            "clamp" => hp.clamp_predictions.to_string(),
            "patience" => hp.patience.to_string(),
            "validation-fraction" => hp.validation_fraction.to_string(),
            "cooc-scope" => hp.cooc_scope.to_string(),
            "mode" => hp.mode.to_string(),
            "threads" => self.threads.to_string(),
            "delimiter" => self.delimiter.to_string(),
            "ratings" => show_path(&self.ratings),
            "trust" => show_path(&self.trust),
            "model" => show_path(&self.model),
            "output" => show_path(&self.output),
            "trace" => show_path(&self.trace),
            "manifest" => show_path(&self.manifest),
            "folds" => self.folds.to_string(),
            "methods" => join(&self.methods.iter().map(|m| m.as_str().to_owned()).collect::<Vec<_>>()),
            "knn-k" => join(&self.knn_k.iter().map(usize::to_string).collect::<Vec<_>>()),
            "mf-epochs" => self.mf_epochs.to_string(),
            "top-n" => self.top_n.to_string(),
            "k-expl" => self.k_expl.to_string(),
            "user" => self.user.clone().unwrap_or_default(),
            "high-threshold" => show_opt(&self.high_threshold),
            "low-threshold" => show_opt(&self.low_threshold),
            _ => return None,
        })
    }

    /// All keys with their resolved values.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|(k, _, _)| ((*k).to_owned(), self.get(k).expect("listed key")))
            .collect()
    }

    /// Apply layers in order; `preset` is applied first wherever it appears.
    pub fn from_layers(layers: &[Vec<(String, String)>]) -> Result<Self> {
        let preset_name = layers
            .iter()
            .flatten()
            .rfind(|(k, _)| normalize_key(k) == "preset")
            .map_or("filmtrust", |(_, v)| v.as_str());
        let mut cfg = Self::with_preset(preset_name.trim())?;
        for (k, v) in layers.iter().flatten() {
            if normalize_key(k) != "preset" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.folds < 2 {
            return Err(Error::arg("folds must be at least 2"));
        }
        if self.top_n < 1 || self.k_expl < 1 {
            return Err(Error::arg("top-n and k-expl must be at least 1"));
        }
        if self.knn_k.contains(&0) {
            return Err(Error::arg("knn-k values must be at least 1"));
        }
        Ok(())
    }

    pub fn cv_config(&self, knn_k: usize) -> CvConfig {
        CvConfig {
            uniwalk: self.hp.clone(),
            mf: MfHyperparams {
                epochs: self.mf_epochs,
                seed: self.hp.seed,
                ..MfHyperparams::default()
            },
            knn_k,
            clamp: self.hp.clamp_predictions,
            parallel_folds: true,
        }
    }

    /// Explicit thresholds, else the midpoint of `[min_r, max_r]`.
    pub fn thresholds(&self, min_r: f64, max_r: f64) -> Thresholds {
        let mid = Thresholds::midpoint(min_r, max_r);
        Thresholds {
            high: self.high_threshold.unwrap_or(mid.high),
            low: self.low_threshold.unwrap_or(mid.low),
        }
    }
}

/// Parse `key = value` lines.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        let key = normalize_key(k);
        if !KEYS.iter().any(|(known, _, _)| *known == key) {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("unknown configuration key {key:?}"),
            });
        }
        out.push((key, v.trim().to_owned()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            path: path.display().to_string(),
            bytes,
            sha256,
        })
    }
}

/// Everything needed to rerun a command exactly.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seconds: f64,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            tool: "uniwalk",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            seed: cfg.hp.seed,
            config: cfg.resolved(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seconds: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let cfg = RunConfig::default();
        for (k, _, _) in KEYS {
            let v = cfg.get(k).unwrap_or_else(|| panic!("no getter for {k}"));
            let mut other = RunConfig::default();
            other.set(k, &v).unwrap();
            assert_eq!(other, cfg, "{k}");
        }
        assert!(cfg.get("nope").is_none());
    }

    #[test]
    fn file_syntax() {
        let pairs = parse_config_text("# comment\nalpha = 0.1\n\nwalk_length=12 # trailing\n").unwrap();
        assert_eq!(pairs, vec![("alpha".into(), "0.1".into()), ("walk-length".into(), "12".into())]);
        assert!(matches!(parse_config_text("alpha 0.1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config_text("\nbogus = 1"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let cfg = RunConfig::from_layers(&[
            vec![("dim".into(), "7".into())],
            vec![("preset".into(), "epinions".into())],
        ])
        .unwrap();
        assert_eq!(cfg.preset, "epinions");
        assert_eq!(cfg.hp.dim, 7);
        assert_eq!(cfg.hp.c, Hyperparams::epinions().c);
    }

    #[test]
    fn bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("alpha", "much").is_err());
        assert!(cfg.set("methods", "uniwalk,bogus").is_err());
        assert!(cfg.set("clamp", "maybe").is_err());
        assert!(cfg.set("preset", "netflix").is_err());
        cfg.set("folds", "1").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f");
        fs::write(&p, b"abc").unwrap();
        let d = FileDigest::of(&p).unwrap();
        assert_eq!(d.bytes, 3);
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
