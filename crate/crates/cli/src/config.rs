//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Where a value came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    File(usize),
    Set(usize),
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File(line) => write!(f, "config line {line}"),
            Origin::Set(i) => write!(f, "--set #{i}"),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {msg}")]
    Parse { origin: Origin, msg: String },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub value: String,
    pub origin: Origin,
}

/// Experiment name, seed, output directory and the parameter map.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub params: BTreeMap<String, Entry>,
}

const RESERVED: [&str; 3] = ["experiment", "seed", "out"];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File(i + 1);
            let (k, v) = split_pair(line).ok_or_else(|| ConfigError::Parse { origin, msg: format!("expected `key = value`, got `{line}`") })?;
            if cfg.params.contains_key(k) || (RESERVED.contains(&k) && cfg.reserved_set(k)) {
                return Err(ConfigError::Parse { origin, msg: format!("duplicate key `{k}`") });
            }
            cfg.insert(k, v, origin)?;
        }
        Ok(cfg)
    }

    /// Applies one `--set key=value` override; later overrides win.
    pub fn set(&mut self, index: usize, arg: &str) -> Result<(), ConfigError> {
        let origin = Origin::Set(index);
        let (k, v) = split_pair(arg).ok_or_else(|| ConfigError::Parse { origin, msg: format!("expected key=value, got `{arg}`") })?;
        self.params.remove(k);
        self.insert(k, v, origin)
    }

    fn reserved_set(&self, k: &str) -> bool {
        match k {
            "experiment" => self.experiment.is_some(),
            "seed" => self.seed.is_some(),
            _ => self.out.is_some(),
        }
    }

    fn insert(&mut self, k: &str, v: &str, origin: Origin) -> Result<(), ConfigError> {
        match k {
            "experiment" => self.experiment = Some(v.to_string()),
            "seed" => self.seed = Some(parse_value(k, v, origin)?),
            "out" => self.out = Some(v.to_string()),
            _ => {
                self.params.insert(k.to_string(), Entry { value: v.to_string(), origin });
            }
        }
        Ok(())
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    let valid = !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    valid.then_some((k, v))
}

fn parse_value<T: FromStr>(key: &str, v: &str, origin: Origin) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::Parse { origin, msg: format!("cannot parse `{v}` for `{key}`") })
}

/// Typed parameter access against an experiment's declared keys.
pub struct Params<'a> {
    entries: &'a BTreeMap<String, Entry>,
    defaults: &'a [(&'static str, &'static str)],
    seed: Option<u64>,
    experiment: &'static str,
}

impl<'a> Params<'a> {
    /// Fails on the first key the experiment does not declare.
    pub fn new(
        cfg: &'a ExperimentConfig,
        experiment: &'static str,
        defaults: &'a [(&'static str, &'static str)],
    ) -> Result<Self, ConfigError> {
        if let Some((k, e)) = cfg.params.iter().find(|(k, _)| !defaults.iter().any(|(d, _)| d == k)) {
            let known: Vec<&str> = defaults.iter().map(|(d, _)| *d).collect();
            return Err(ConfigError::Parse {
                origin: e.origin,
                msg: format!("unknown key `{k}` for {experiment}; known keys: {}", known.join(", ")),
            });
        }
        Ok(Self { entries: &cfg.params, defaults, seed: cfg.seed, experiment })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        match self.entries.get(key) {
            Some(e) => parse_value(key, &e.value, e.origin),
            None => {
                let (_, d) = self.defaults.iter().find(|(k, _)| *k == key).expect("key declared by experiment");
                parse_value(key, d, Origin::Flag)
            }
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let raw: String = self.get(key)?;
        let origin = self.entries.get(key).map_or(Origin::Flag, |e| e.origin);
        raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(key, s, origin)).collect()
    }

    /// Stochastic experiments call this; a missing seed is a usage error.
    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::Usage(format!("{} is stochastic and needs --seed", self.experiment)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_reserved_keys() {
        let cfg = ExperimentConfig::parse("# header\nexperiment = grover\nseed = 4\n\nn = 6  # qubits\n").unwrap();
        assert_eq!(cfg.experiment.as_deref(), Some("grover"));
        assert_eq!(cfg.seed, Some(4));
        assert_eq!(cfg.params["n"].value, "6");
        assert_eq!(cfg.params["n"].origin, Origin::File(5));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = ExperimentConfig::parse("n = 3\nthis is wrong\n").unwrap_err();
        assert!(err.to_string().starts_with("config line 2:"), "{err}");
        let err = ExperimentConfig::parse("n = 3\nn = 4\n").unwrap_err();
        assert!(err.to_string().contains("line 2") && err.to_string().contains("duplicate"));
    }

    #[test]
    fn unknown_and_unparsable_keys() {
        let cfg = ExperimentConfig::parse("n = 3\nbogus = 1\n").unwrap();
        let err = Params::new(&cfg, "grover", &[("n", "10")]).err().unwrap();
        assert!(err.to_string().contains("line 2") && err.to_string().contains("bogus"));
        let cfg = ExperimentConfig::parse("\nn = three\n").unwrap();
        let p = Params::new(&cfg, "grover", &[("n", "10")]).unwrap();
        assert!(p.get::<usize>("n").unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn overrides_win_and_defaults_apply() {
        let mut cfg = ExperimentConfig::parse("n = 3\n").unwrap();
        cfg.set(1, "n=7").unwrap();
        let p = Params::new(&cfg, "x", &[("n", "10"), ("eps", "0.5"), ("xs", "1, 2,3")]).unwrap();
        assert_eq!(p.get::<usize>("n").unwrap(), 7);
        assert_eq!(p.get::<f64>("eps").unwrap(), 0.5);
        assert_eq!(p.list::<u32>("xs").unwrap(), vec![1, 2, 3]);
        assert!(matches!(p.seed(), Err(ConfigError::Usage(_))));
    }
}
