//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! dataset = data/transactions.csv
//! format = cj
//! dim = 32
//! epochs = 10
//! query_windows = 20,25
//! ```
//!
//! Every key has a default, unknown keys are errors, and parsing reports all
//! problems at once. [`RunConfig::to_text`] writes every key, so
//! `parse(to_text(c)) == c`.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::arm::{BucketGuard, DEFAULT_FUNCTIONS, DEFAULT_LIFT_SCALE, DEFAULT_TABLES, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::eval::{Scorer, TargetSelection, DEFAULT_NEGATIVES};
use crate::ingest::TransactionRecordFormat;
use crate::model::{ExecutionMode, Hyperparameters, NoiseKind};

/// Query windows for `eval`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryWindows {
    /// Drawn at random from the second half of the stream.
    Auto(usize),
    List(Vec<usize>),
}

/// Bucket guard presets selectable from the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardPreset {
    /// `max(2·√N, 4·N/2^F)`.
    Larger,
    /// `2·√N`.
    Sqrt,
    Off,
}

impl GuardPreset {
    pub fn guard(self) -> BucketGuard {
        match self {
            GuardPreset::Larger => BucketGuard::DEFAULT,
            GuardPreset::Sqrt => BucketGuard::SqrtN(2.0),
            GuardPreset::Off => BucketGuard::Off,
        }
    }

    fn name(self) -> &'static str {
        match self {
            GuardPreset::Larger => "larger",
            GuardPreset::Sqrt => "sqrt",
            GuardPreset::Off => "off",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: String,
    pub window_days: u32,
    pub hp: Hyperparameters,
    pub hash_functions: usize,
    pub hash_tables: usize,
    pub lift_scale: f64,
    pub top_k: usize,
    pub bucket_guard: GuardPreset,
    pub min_occurrences: u64,
    pub eval_negatives: usize,
    pub query_windows: QueryWindows,
    pub ks: Vec<usize>,
    pub scorers: Vec<Scorer>,
    pub targets: TargetSelection,
    pub repetition_pairs: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            format: "canonical".into(),
            window_days: 1,
            hp: Hyperparameters::default(),
            hash_functions: DEFAULT_FUNCTIONS,
            hash_tables: DEFAULT_TABLES,
            lift_scale: DEFAULT_LIFT_SCALE,
            top_k: DEFAULT_TOP_K,
            bucket_guard: GuardPreset::Larger,
            min_occurrences: 0,
            eval_negatives: DEFAULT_NEGATIVES,
            query_windows: QueryWindows::Auto(5),
            ks: vec![1, 5, 10],
            scorers: Scorer::ALL.to_vec(),
            targets: TargetSelection::All,
            repetition_pairs: 1000,
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: [&str; 26] = [
    "dataset",
    "format",
    "window_days",
    "dim",
    "eta",
    "negatives",
    "epochs",
    "tau",
    "price_clip",
    "seed",
    "value_weighting",
    "noise",
    "mode",
    "hash_functions",
    "hash_tables",
    "lift_scale",
    "top_k",
    "bucket_guard",
    "min_occurrences",
    "eval_negatives",
    "query_windows",
    "ks",
    "scorers",
    "targets",
    "repetition_pairs",
    "output_dir",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse()
        .map_err(|_| format!("`{key}`: cannot parse `{v}` as a number"))
}

fn list(key: &str, v: &str) -> std::result::Result<Vec<usize>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(key, x.trim())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let v = v.trim();
        let hp = &mut self.hp;
        match key {
            "dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "format" => self.format = v.to_string(),
            "window_days" => self.window_days = num(key, v)?,
            "dim" => hp.dim = num(key, v)?,
            "eta" => hp.eta = num(key, v)?,
            "negatives" => hp.negatives = num(key, v)?,
            "epochs" => hp.epochs = num(key, v)?,
            "tau" => hp.tau = num(key, v)?,
            "price_clip" => hp.price_clip = num(key, v)?,
            "seed" => hp.seed = num(key, v)?,
            "value_weighting" => {
                hp.value_weighting = match v {
                    "true" => true,
                    "false" => false,
                    _ => return Err(format!("`{key}`: expected true or false, got `{v}`")),
                }
            }
            "noise" => {
                hp.noise = match v {
                    "unigram" => NoiseKind::Unigram,
                    "uniform" => NoiseKind::Uniform,
                    _ => return Err(format!("`{key}`: expected unigram or uniform, got `{v}`")),
                }
            }
            "mode" => {
                hp.mode = match v {
                    "deterministic" => ExecutionMode::Deterministic,
                    "parallel" => ExecutionMode::Parallel,
                    _ => {
                        return Err(format!(
                            "`{key}`: expected deterministic or parallel, got `{v}`"
                        ))
                    }
                }
            }
            "hash_functions" => self.hash_functions = num(key, v)?,
            "hash_tables" => self.hash_tables = num(key, v)?,
            "lift_scale" => self.lift_scale = num(key, v)?,
            "top_k" => self.top_k = num(key, v)?,
            "bucket_guard" => {
                self.bucket_guard = match v {
                    "larger" => GuardPreset::Larger,
                    "sqrt" => GuardPreset::Sqrt,
                    "off" => GuardPreset::Off,
                    _ => return Err(format!("`{key}`: expected larger, sqrt or off, got `{v}`")),
                }
            }
            "min_occurrences" => self.min_occurrences = num(key, v)?,
            "eval_negatives" => self.eval_negatives = num(key, v)?,
            "query_windows" => {
                self.query_windows = match v.strip_prefix("auto:") {
                    Some(n) => QueryWindows::Auto(num(key, n)?),
                    None => QueryWindows::List(list(key, v)?),
                }
            }
            "ks" => self.ks = list(key, v)?,
            "scorers" => {
                self.scorers = v
                    .split(',')
                    .map(|s| {
                        Scorer::parse(s.trim())
                            .ok_or_else(|| format!("`{key}`: unknown scorer `{}`", s.trim()))
                    })
                    .collect::<std::result::Result<_, _>>()?
            }
            "targets" => {
                self.targets = match v {
                    "all" => TargetSelection::All,
                    "single" => TargetSelection::Single,
                    _ => return Err(format!("`{key}`: expected all or single, got `{v}`")),
                }
            }
            "repetition_pairs" => self.repetition_pairs = num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let hp = &self.hp;
        match key {
            "dataset" => self
                .dataset
                .as_ref()
                .map_or(String::new(), |p| p.display().to_string()),
            "format" => self.format.clone(),
            "window_days" => self.window_days.to_string(),
            "dim" => hp.dim.to_string(),
            "eta" => hp.eta.to_string(),
            "negatives" => hp.negatives.to_string(),
            "epochs" => hp.epochs.to_string(),
            "tau" => hp.tau.to_string(),
            "price_clip" => hp.price_clip.to_string(),
            "seed" => hp.seed.to_string(),
            "value_weighting" => hp.value_weighting.to_string(),
            "noise" => match hp.noise {
                NoiseKind::Unigram => "unigram",
                NoiseKind::Uniform => "uniform",
            }
            .into(),
            "mode" => match hp.mode {
                ExecutionMode::Deterministic => "deterministic",
                ExecutionMode::Parallel => "parallel",
            }
            .into(),
            "hash_functions" => self.hash_functions.to_string(),
            "hash_tables" => self.hash_tables.to_string(),
            "lift_scale" => self.lift_scale.to_string(),
            "top_k" => self.top_k.to_string(),
            "bucket_guard" => self.bucket_guard.name().into(),
            "min_occurrences" => self.min_occurrences.to_string(),
            "eval_negatives" => self.eval_negatives.to_string(),
            "query_windows" => match &self.query_windows {
                QueryWindows::Auto(n) => format!("auto:{n}"),
                QueryWindows::List(l) => join(l),
            },
            "ks" => join(&self.ks),
            "scorers" => self
                .scorers
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(","),
            "targets" => match self.targets {
                TargetSelection::All => "all",
                TargetSelection::Single => "single",
            }
            .into(),
            "repetition_pairs" => self.repetition_pairs.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            _ => unreachable!("key list and accessor out of sync: {key}"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut errors = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", n + 1));
                continue;
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) && KEYS.contains(&key) {
                errors.push(format!("line {}: duplicate key `{key}`", n + 1));
                continue;
            }
            if let Err(e) = cfg.set(key, value) {
                errors.push(format!("line {}: {e}", n + 1));
            }
        }
        errors.extend(cfg.problems());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides on top of the file, then revalidates.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut errors = Vec::new();
        for o in overrides {
            match o.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = self.set(k.trim(), v) {
                        errors.push(format!("override `{o}`: {e}"));
                    }
                }
                None => errors.push(format!("override `{o}`: expected key=value")),
            }
        }
        errors.extend(self.problems());
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Semantic checks on values that parsed.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let hp = &self.hp;
        if TransactionRecordFormat::by_name(&self.format).is_none() {
            p.push(format!("`format`: unknown format `{}` (canonical, cj)", self.format));
        }
        if self.window_days == 0 {
            p.push("`window_days` must be positive".into());
        }
        if hp.dim == 0 {
            p.push("`dim` must be positive".into());
        }
        if !(hp.eta > 0.0 && hp.eta.is_finite()) {
            p.push("`eta` must be positive".into());
        }
        if hp.epochs == 0 {
            p.push("`epochs` must be positive".into());
        }
        if !(hp.tau >= 0.0 && hp.tau.is_finite()) {
            p.push("`tau` must be nonnegative".into());
        }
        if !(hp.price_clip > 0.0 && hp.price_clip.is_finite()) {
            p.push("`price_clip` must be positive".into());
        }
        if !(1..=64).contains(&self.hash_functions) {
            p.push("`hash_functions` must be in 1..=64".into());
        }
        if self.hash_tables == 0 {
            p.push("`hash_tables` must be positive".into());
        }
        if !(self.lift_scale > 0.0 && self.lift_scale.is_finite()) {
            p.push("`lift_scale` must be positive".into());
        }
        if self.eval_negatives == 0 {
            p.push("`eval_negatives` must be positive".into());
        }
        match &self.query_windows {
            QueryWindows::Auto(0) => p.push("`query_windows`: auto count must be positive".into()),
            QueryWindows::List(l) if l.is_empty() => {
                p.push("`query_windows`: list is empty".into())
            }
            QueryWindows::List(l) if l.windows(2).any(|w| w[1] <= w[0]) => {
                p.push("`query_windows` must be strictly ascending".into())
            }
            _ => {}
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            p.push("`ks` must be a nonempty list of positive integers".into());
        }
        if self.scorers.is_empty() {
            p.push("`scorers` must name at least one scorer".into());
        }
        if self.repetition_pairs < 2 {
            p.push("`repetition_pairs` must be at least 2".into());
        }
        p
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            s.push_str(key);
            s.push_str(" = ");
            s.push_str(&self.get(key));
            s.push('\n');
        }
        s
    }

    /// SHA-256 of [`RunConfig::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn record_format(&self) -> TransactionRecordFormat {
        TransactionRecordFormat::by_name(&self.format).expect("validated format")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.hp.dim, 300);
        assert_eq!(c.hp.epochs, 50);
        assert_eq!((c.hash_functions, c.hash_tables), (4, 11));
        assert_eq!(c.lift_scale, 4.3);
        assert_eq!(c.top_k, 100);
        assert_eq!(c.window_days, 1);
    }

    #[test]
    fn reads_values_and_comments() {
        let c = RunConfig::parse(
            "# small run\ndim = 32\n\nepochs=10\nmode = parallel\nquery_windows = 3, 7\nks = 1,2\n",
        )
        .unwrap();
        assert_eq!(c.hp.dim, 32);
        assert_eq!(c.hp.epochs, 10);
        assert_eq!(c.hp.mode, ExecutionMode::Parallel);
        assert_eq!(c.query_windows, QueryWindows::List(vec![3, 7]));
        assert_eq!(c.ks, vec![1, 2]);
    }

    #[test]
    fn all_errors_listed_at_once() {
        let Err(Error::Config(errs)) =
            RunConfig::parse("dimm = 3\neta = fast\nmode = turbo\nno equals sign\nepochs = 0\n")
        else {
            panic!("expected config error");
        };
        assert_eq!(errs.len(), 5, "{errs:?}");
        assert!(errs[0].contains("unknown key `dimm`"));
        assert!(errs[1].contains("`eta`"));
        assert!(errs[2].contains("turbo"));
        assert!(errs[3].contains("line 4"));
        assert!(errs[4].contains("`epochs`"));
    }

    #[test]
    fn duplicate_key_is_an_error() {
        assert!(RunConfig::parse("dim = 3\ndim = 4\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let c = RunConfig::parse("seed = 1\n")
            .unwrap()
            .with_overrides(["seed=9", "top_k = 5"])
            .unwrap();
        assert_eq!(c.hp.seed, 9);
        assert_eq!(c.top_k, 5);
        assert!(RunConfig::default().with_overrides(["bogus=1"]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.hp.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    proptest! {
        #[test]
        fn text_round_trip(
            dim in 1usize..512,
            eta in 1e-6f64..1.0,
            tau in 0.0f64..5.0,
            seed in any::<u64>(),
            weighting in any::<bool>(),
            auto in any::<bool>(),
            qs in prop::collection::btree_set(0usize..100, 1..5),
            ks in prop::collection::vec(1usize..50, 1..4),
            dataset in prop::option::of("[a-z/]{1,12}\\.csv"),
        ) {
            let mut c = RunConfig::default();
            c.hp.dim = dim;
            c.hp.eta = eta;
            c.hp.tau = tau;
            c.hp.seed = seed;
            c.hp.value_weighting = weighting;
            c.query_windows = if auto { QueryWindows::Auto(qs.len()) } else { QueryWindows::List(qs.into_iter().collect()) };
            c.ks = ks;
            c.dataset = dataset.map(PathBuf::from);
            let back = RunConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), c.to_text());
        }
    }
}
