//! Experiment configuration: a flat `key=value` file merged with
//! command-line flags, flags taking precedence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fairdiv_core::btl::Repetitions;
use fairdiv_core::noise::Distribution;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("unknown flag `{0}`")]
    UnknownFlag(String),
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("seed required")]
    MissingSeed,
    #[error("subcommand required")]
    MissingSubcommand,
    #[error("{field} ({origin}): {message}")]
    Invalid {
        field: String,
        origin: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Rr,
    RrLowerbound,
    Welfare,
    Lp,
    OnlineEnvy,
    Balance,
    Multicolor,
    Btl,
    Mhr,
    VerifyStatcheck,
    VerifyAll,
}

impl Subcommand {
    pub const ALL: [Subcommand; 11] = [
        Subcommand::Rr,
        Subcommand::RrLowerbound,
        Subcommand::Welfare,
        Subcommand::Lp,
        Subcommand::OnlineEnvy,
        Subcommand::Balance,
        Subcommand::Multicolor,
        Subcommand::Btl,
        Subcommand::Mhr,
        Subcommand::VerifyStatcheck,
        Subcommand::VerifyAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Rr => "rr",
            Subcommand::RrLowerbound => "rr-lowerbound",
            Subcommand::Welfare => "welfare",
            Subcommand::Lp => "lp",
            Subcommand::OnlineEnvy => "online-envy",
            Subcommand::Balance => "balance",
            Subcommand::Multicolor => "multicolor",
            Subcommand::Btl => "btl",
            Subcommand::Mhr => "mhr",
            Subcommand::VerifyStatcheck => "verify-statcheck",
            Subcommand::VerifyAll => "verify-all",
        }
    }

    /// RNG tag for this subcommand's per-trial streams.
    pub fn tag(self) -> &'static str {
        self.name()
    }

    /// Subcommands whose true values live in `[-1, 1]` rather than `[0, 1]`.
    pub fn signed_values(self) -> bool {
        matches!(
            self,
            Subcommand::OnlineEnvy | Subcommand::Balance | Subcommand::Multicolor
        )
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

/// How bounded noise is placed for `rr`, `lp`, `online-envy`, `balance`
/// and `multicolor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Uniform noise in `[-eps, eps]` plus a per-agent shift drawn from
    /// `[0, 1]`.
    Shift,
    /// Uniform noise in `[-eps, eps]`.
    Box,
    /// The deterministic scheme that pulls Round-Robin towards poor items.
    Worst,
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shift" => Ok(NoiseKind::Shift),
            "box" => Ok(NoiseKind::Box),
            "worst" => Ok(NoiseKind::Worst),
            _ => Err(format!("expected shift, box or worst, got `{s}`")),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Shift => "shift",
            NoiseKind::Box => "box",
            NoiseKind::Worst => "worst",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    /// Comparison-graph edge probability (`btl`).
    pub p: f64,
    /// Comparisons per edge (`btl`).
    pub k: Repetitions,
    /// Colour count for `multicolor`; defaults to `n`.
    pub colors: usize,
    /// Distribution of the true values.
    pub truth: Distribution,
    /// Noise distribution for `welfare` and `mhr`.
    pub dist: Distribution,
    pub noise: NoiseKind,
    /// Round-Robin pick order; `None` means the identity.
    pub order: Option<Vec<usize>>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Side log for trial 0: balancer steps or BTL comparisons.
    #[serde(skip)]
    pub log: Option<PathBuf>,
    #[serde(skip)]
    pub json: bool,
    pub timings: bool,
}

impl ExperimentConfig {
    /// Defaults for `subcommand`: n = 4, m = 40, one trial, eps = 0.1,
    /// delta = 0.1, C = 0.1, p = 0.5, K = 100.
    pub fn new(subcommand: Subcommand, seed: u64) -> Self {
        Self::with_size(subcommand, seed, 4, 40)
    }

    /// Defaults whose values depend on the instance size.
    pub fn with_size(subcommand: Subcommand, seed: u64, n: usize, m: usize) -> Self {
        let signed = subcommand.signed_values();
        Self {
            subcommand,
            n,
            m,
            trials: 1,
            seed,
            eps: 0.1,
            delta: 0.1,
            c: 0.1,
            p: 0.5,
            k: Repetitions::Finite(100),
            colors: n,
            truth: if signed {
                Distribution::Uniform { lo: -1.0, hi: 1.0 }
            } else {
                Distribution::Uniform { lo: 0.0, hi: 1.0 }
            },
            dist: match subcommand {
                Subcommand::Mhr => Distribution::Exponential {
                    mean: fairdiv_core::noise::mhr_mean_threshold(n.max(1), m.max(1)),
                },
                _ => Distribution::Uniform { lo: -0.2, hi: 0.2 },
            },
            noise: if subcommand == Subcommand::Rr {
                NoiseKind::Shift
            } else {
                NoiseKind::Box
            },
            order: None,
            out: None,
            log: None,
            json: false,
            timings: false,
        }
    }
}

pub const KEYS: [&str; 19] = [
    "subcommand",
    "n",
    "m",
    "trials",
    "seed",
    "eps",
    "delta",
    "C",
    "p",
    "K",
    "colors",
    "truth",
    "dist",
    "noise",
    "order",
    "out",
    "log",
    "json",
    "timings",
];

/// Accepts `c` and `k` as spellings of `C` and `K`.
fn canonical_key(key: &str) -> Option<&'static str> {
    let key = match key {
        "c" => "C",
        "k" => "K",
        other => other,
    };
    KEYS.iter().copied().find(|k| *k == key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Line(usize),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Flag => f.write_str("flag"),
        }
    }
}

/// Unvalidated key/value pairs remembering where each came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<&'static str, (String, Origin)>,
}

impl RawConfig {
    /// Parses `key=value` lines. Blank lines and lines starting with `#`
    /// are skipped; whitespace around keys and values is trimmed.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: format!("expected key=value, got `{trimmed}`"),
                });
            };
            let key = key.trim();
            let canonical = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            })?;
            if raw.entries.contains_key(canonical) {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: canonical.to_string(),
                });
            }
            raw.entries
                .insert(canonical, (value.trim().to_string(), Origin::Line(line_no)));
        }
        Ok(raw)
    }

    /// Sets `key` from a command-line flag, overriding any file value.
    pub fn set_flag(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let canonical =
            canonical_key(key).ok_or_else(|| ConfigError::UnknownFlag(key.to_string()))?;
        self.entries.insert(canonical, (value.into(), Origin::Flag));
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, origin)) => {
                value
                    .parse::<T>()
                    .map(Some)
                    .map_err(|e| ConfigError::Invalid {
                        field: key.to_string(),
                        origin: origin.to_string(),
                        message: format!("cannot parse `{value}`: {e}"),
                    })
            }
        }
    }

    fn invalid(&self, key: &'static str, message: impl Into<String>) -> ConfigError {
        let origin = self
            .entries
            .get(key)
            .map(|(_, o)| o.to_string())
            .unwrap_or_else(|| "default".to_string());
        ConfigError::Invalid {
            field: key.to_string(),
            origin,
            message: message.into(),
        }
    }

    /// Applies defaults and validates against the subcommand's
    /// preconditions.
    pub fn build(&self) -> Result<ExperimentConfig, ConfigError> {
        let subcommand: Subcommand = self
            .get("subcommand")?
            .ok_or(ConfigError::MissingSubcommand)?;
        let seed: u64 = self.get("seed")?.ok_or(ConfigError::MissingSeed)?;
        let n: usize = self.get("n")?.unwrap_or(4);
        let m: usize = self.get("m")?.unwrap_or(40);
        let d = ExperimentConfig::with_size(subcommand, seed, n, m);
        let k = match self.entries.get("K").map(|(v, _)| v.as_str()) {
            Some("inf") => Repetitions::ExactLimit,
            _ => self.get("K")?.map_or(d.k, Repetitions::Finite),
        };
        let order =
            match self.entries.get("order") {
                None => None,
                Some((value, _)) => {
                    let parsed: Result<Vec<usize>, _> = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect();
                    Some(parsed.map_err(|e| {
                        self.invalid("order", format!("cannot parse `{value}`: {e}"))
                    })?)
                }
            };
        let config = ExperimentConfig {
            trials: self.get("trials")?.unwrap_or(d.trials),
            eps: self.get("eps")?.unwrap_or(d.eps),
            delta: self.get("delta")?.unwrap_or(d.delta),
            c: self.get("C")?.unwrap_or(d.c),
            p: self.get("p")?.unwrap_or(d.p),
            k,
            colors: self.get("colors")?.unwrap_or(d.colors),
            truth: self.get("truth")?.unwrap_or(d.truth),
            dist: self.get("dist")?.unwrap_or(d.dist),
            noise: self.get("noise")?.unwrap_or(d.noise),
            order,
            out: self.get("out")?,
            log: self.get("log")?,
            json: self.get("json")?.unwrap_or(d.json),
            timings: self.get("timings")?.unwrap_or(d.timings),
            ..d
        };
        self.validate(&config)?;
        Ok(config)
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), ConfigError> {
        use Subcommand::*;
        if cfg.trials == 0 {
            return Err(self.invalid("trials", "must be at least 1"));
        }
        if cfg.n == 0 {
            return Err(self.invalid("n", "must be at least 1"));
        }
        if !(cfg.eps.is_finite() && cfg.eps >= 0.0) {
            return Err(self.invalid("eps", "must be finite and non-negative"));
        }
        if !(cfg.delta > 0.0 && cfg.delta <= 0.5) {
            return Err(self.invalid("delta", "must lie in (0, 1/2]"));
        }
        if !(cfg.c > 0.0 && cfg.c < 0.125) {
            return Err(self.invalid("C", "must lie in (0, 1/8)"));
        }
        cfg.truth
            .validate()
            .map_err(|e| self.invalid("truth", e.to_string()))?;
        cfg.dist
            .validate()
            .map_err(|e| self.invalid("dist", e.to_string()))?;
        let Some((lo, hi)) = support_bounds(&cfg.truth) else {
            return Err(self.invalid("truth", "needs a bounded support"));
        };
        let signed = cfg.subcommand.signed_values();
        if signed && cfg.noise == NoiseKind::Shift {
            return Err(self.invalid(
                "noise",
                "shifted noise is not bounded by eps; use box or worst",
            ));
        }
        if signed && (lo < -1.0 || hi > 1.0) {
            return Err(self.invalid("truth", "support must lie in [-1, 1]"));
        }
        let uses_goods = matches!(cfg.subcommand, Rr | RrLowerbound | Welfare | Lp | Btl | Mhr);
        if uses_goods && (lo < 0.0 || hi > 1.0) {
            return Err(self.invalid("truth", "support must lie in [0, 1]"));
        }
        if let Some(order) = &cfg.order {
            let mut seen = vec![false; cfg.n];
            let ok = order.len() == cfg.n
                && order
                    .iter()
                    .all(|&i| i < cfg.n && !std::mem::replace(&mut seen[i], true));
            if !ok {
                return Err(self.invalid("order", format!("must be a permutation of 0..{}", cfg.n)));
            }
        }
        match cfg.subcommand {
            Lp if cfg.n < 2 => return Err(self.invalid("n", "lp needs at least two agents")),
            RrLowerbound if cfg.n < 2 => return Err(self.invalid("n", "needs at least two agents")),
            RrLowerbound if !(cfg.eps > 0.0 && cfg.eps <= 0.5) => {
                return Err(self.invalid("eps", "must lie in (0, 1/2]"))
            }
            Multicolor if cfg.colors < 2 => {
                return Err(self.invalid("colors", "must be at least 2"))
            }
            Balance | Multicolor if cfg.m == 0 => {
                return Err(self.invalid("m", "must be at least 1"))
            }
            Btl => {
                if cfg.m < 2 {
                    return Err(self.invalid("m", "btl needs at least two items"));
                }
                if cfg.n >= cfg.m {
                    return Err(self.invalid("n", "btl needs fewer agents than items"));
                }
                if !(cfg.p > 0.0 && cfg.p <= 1.0) {
                    return Err(self.invalid("p", "must lie in (0, 1]"));
                }
                if cfg.k == Repetitions::Finite(0) {
                    return Err(self.invalid("K", "must be at least 1"));
                }
            }
            Mhr => {
                if cfg.n * cfg.m < 4 {
                    return Err(self.invalid("m", "mhr needs n*m >= 4"));
                }
                if !cfg.dist.is_mhr() {
                    return Err(self.invalid("dist", "must be a non-negative MHR family"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Smallest interval containing the support, when it is bounded.
pub fn support_bounds(d: &Distribution) -> Option<(f64, f64)> {
    match d {
        Distribution::Uniform { lo, hi } => Some((*lo, *hi)),
        Distribution::PointMass(v) => Some((*v, *v)),
        Distribution::DiscreteTable { support, .. } => {
            let lo = support.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((lo, hi))
        }
        Distribution::Exponential { .. } | Distribution::HalfNormal { .. } => None,
    }
}

/// Parses a configuration file with no flag overrides.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    RawConfig::parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = parse_config("n=2\nm=4\nseed=7\nsubcommand=rr").unwrap();
        assert_eq!(cfg.subcommand, Subcommand::Rr);
        assert_eq!((cfg.n, cfg.m, cfg.seed, cfg.trials), (2, 4, 7, 1));
    }

    #[test]
    fn missing_seed() {
        let err = parse_config("n=2\nsubcommand=rr").unwrap_err();
        assert_eq!(err.to_string(), "seed required");
    }

    #[test]
    fn zero_trials() {
        let err = parse_config("seed=1\nsubcommand=rr\ntrials=0").unwrap_err();
        assert!(err.to_string().contains("trials"), "{err}");
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_config("seed=1\n\nbogus=3").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 3,
                key: "bogus".into()
            }
        );
    }

    #[test]
    fn syntax_and_value_errors_name_line() {
        assert_eq!(
            parse_config("seed=1\nnonsense").unwrap_err(),
            ConfigError::Syntax {
                line: 2,
                message: "expected key=value, got `nonsense`".into()
            }
        );
        let err = parse_config("subcommand=rr\nseed=1\nn=two")
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("n (line 3)"), "{err}");
        assert!(matches!(
            parse_config("seed=1\nseed=2").unwrap_err(),
            ConfigError::Duplicate { line: 2, .. }
        ));
    }

    #[test]
    fn flags_override_file() {
        let mut raw = RawConfig::parse("subcommand=rr\nseed=1\nn=3\n# comment\n").unwrap();
        raw.set_flag("n", "5").unwrap();
        raw.set_flag("K", "inf").unwrap();
        let cfg = raw.build().unwrap();
        assert_eq!(cfg.n, 5);
        assert_eq!(cfg.k, Repetitions::ExactLimit);
        assert!(raw.set_flag("nope", "1").is_err());
    }

    #[test]
    fn subcommand_preconditions() {
        assert!(parse_config("subcommand=lp\nseed=1\nn=1").is_err());
        assert!(parse_config("subcommand=btl\nseed=1\nn=5\nm=5").is_err());
        assert!(parse_config("subcommand=mhr\nseed=1\ndist=uniform:-1,1").is_err());
        assert!(parse_config("subcommand=balance\nseed=1\ntruth=uniform:0,2").is_err());
        assert!(parse_config("subcommand=rr\nseed=1\nn=3\norder=0,0,1").is_err());
        assert!(parse_config("subcommand=rr\nseed=1\nn=3\norder=2,0,1").is_ok());
        assert!(parse_config("subcommand=rr\nseed=1\ntruth=exp:1").is_err());
        assert!(parse_config("subcommand=welfare\nseed=1\ntruth=uniform:-1,1").is_err());
        assert!(parse_config("subcommand=verify-statcheck\nseed=1\ntruth=uniform:-1,1").is_ok());
        assert!(parse_config("subcommand=rr\nseed=1\nC=0.2").is_err());
    }

    #[test]
    fn defaults_depend_on_subcommand() {
        let cfg = parse_config("subcommand=online-envy\nseed=1").unwrap();
        assert_eq!(cfg.truth, Distribution::Uniform { lo: -1.0, hi: 1.0 });
        let cfg = parse_config("subcommand=mhr\nseed=1\nn=4\nm=40").unwrap();
        assert!(cfg.dist.is_mhr());
        let cfg = parse_config("subcommand=multicolor\nseed=1\nn=3").unwrap();
        assert_eq!(cfg.colors, 3);
    }
}
