//! The flat key-value config file and its translation into a [`RunConfig`].
//!
//! Format: one `key = value` pair per line, `#` comments, blank lines
//! ignored. No nesting. Derived parameters are never read from a file; they
//! are always recomputed from the free ones. Unknown keys are rejected so
//! typos fail loudly.

use crate::adversary::{StrategyKind, StrategyParams};
use crate::baselines::BaselineConfig;
use crate::engine::{ProtocolKind, RunConfig};
use crate::params::{parse_rational, validate_and_derive, ParamError, RawSimParams};
use crate::protocol::Mutation;
use crate::scheduler::MatchFraction;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Every key the config file accepts.
pub const KNOWN_KEYS: &[&str] = &[
    "n_target",
    "gamma",
    "adversary_budget",
    "alpha",
    "t_inner",
    "seed",
    "max_rounds",
    "epochs",
    "protocol",
    "adversary",
    "adversary_target_color",
    "adversary_round_offset",
    "adversary_epoch_cap",
    "adversary_stop_epoch",
    "match_fraction",
    "initial_population",
    "stop_on_violation",
    "keep_history",
    "mutation",
    "attempt1_phase_len",
    "attempt1_die_exponent",
    "attempt2_no_split_count",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("invalid value for '{key}': {message}")]
    InvalidValue { key: String, message: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("'max_rounds' and 'epochs' are mutually exclusive")]
    RoundsAndEpochs,
}

/// A parsed, override-applied key-value map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: idx + 1,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply a `key=value` override (CLI `--set`), after file parsing.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.map.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn required(&self, key: &'static str) -> Result<&str, ConfigError> {
        self.get(key).ok_or(ConfigError::MissingKey(key))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| ConfigError::InvalidValue {
                key: key.to_string(),
                message: e.to_string(),
            }),
        }
    }

    fn parse_bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some("true") | Some("1") => Ok(Some(true)),
            Some("false") | Some("0") => Ok(Some(false)),
            Some(other) => Err(ConfigError::InvalidValue {
                key: key.to_string(),
                message: format!("expected true/false, got '{other}'"),
            }),
        }
    }

    fn rational(&self, key: &'static str) -> Result<crate::params::Rational, ConfigError> {
        parse_rational(self.required(key)?).map_err(|message| ConfigError::InvalidValue {
            key: key.to_string(),
            message,
        })
    }

    /// Resolve the full run configuration. Derived parameters are recomputed;
    /// `epochs`, when given, is converted into rounds via the derived epoch
    /// length. Without either, the run defaults to 10 epochs.
    pub fn to_run_config(&self) -> Result<RunConfig, ConfigError> {
        let raw = RawSimParams {
            n_target: self
                .parse_as::<u64>("n_target")?
                .ok_or(ConfigError::MissingKey("n_target"))?,
            gamma: self.rational("gamma")?,
            adversary_budget: self
                .parse_as::<u64>("adversary_budget")?
                .ok_or(ConfigError::MissingKey("adversary_budget"))?,
            alpha: self.rational("alpha")?,
            t_inner: self.parse_as::<u32>("t_inner")?,
        };
        let params = validate_and_derive(&raw)?;

        let max_rounds = match (self.parse_as::<u64>("max_rounds")?, self.parse_as::<u64>("epochs")?)
        {
            (Some(_), Some(_)) => return Err(ConfigError::RoundsAndEpochs),
            (Some(r), None) => r,
            (None, Some(e)) => e * u64::from(params.epoch_length),
            (None, None) => 10 * u64::from(params.epoch_length),
        };

        let strategy_params = StrategyParams {
            target_color: self.parse_bool("adversary_target_color")?.unwrap_or(false),
            round_offset: self.parse_as::<u32>("adversary_round_offset")?,
            epoch_cap: self.parse_as::<u64>("adversary_epoch_cap")?,
            stop_epoch: self.parse_as::<u64>("adversary_stop_epoch")?,
        };
        let default_baseline = BaselineConfig::default();
        let baseline = BaselineConfig {
            attempt1_phase_len: self.parse_as::<u32>("attempt1_phase_len")?,
            attempt1_die_exponent: self
                .parse_as::<u32>("attempt1_die_exponent")?
                .unwrap_or(default_baseline.attempt1_die_exponent),
            attempt2_no_split_count: self
                .parse_as::<u64>("attempt2_no_split_count")?
                .unwrap_or(default_baseline.attempt2_no_split_count),
        };
        let mutation = match self.get("mutation") {
            None | Some("none") => Mutation::None,
            Some("no_consistency_check") => Mutation::NoConsistencyCheck,
            Some("always_split") => Mutation::AlwaysSplit,
            Some(other) => {
                return Err(ConfigError::InvalidValue {
                    key: "mutation".into(),
                    message: format!("unknown mutation '{other}'"),
                })
            }
        };
        let match_fraction = match self.get("match_fraction") {
            None | Some("exact") => MatchFraction::Exact,
            Some("uniform") => MatchFraction::UniformRandom,
            Some(other) => {
                return Err(ConfigError::InvalidValue {
                    key: "match_fraction".into(),
                    message: format!("expected exact|uniform, got '{other}'"),
                })
            }
        };

        let initial_population = self
            .parse_as::<u64>("initial_population")?
            .unwrap_or(params.n_target);
        Ok(RunConfig {
            seed: self.parse_as::<u64>("seed")?.unwrap_or(0),
            max_rounds,
            protocol: self
                .parse_as::<ProtocolKind>("protocol")?
                .unwrap_or(ProtocolKind::Main),
            strategy: self
                .parse_as::<StrategyKind>("adversary")?
                .unwrap_or(StrategyKind::Null),
            strategy_params,
            match_fraction,
            initial_population,
            stop_on_violation: self.parse_bool("stop_on_violation")?.unwrap_or(false),
            keep_history: self.parse_bool("keep_history")?.unwrap_or(false),
            mutation,
            baseline,
            step_parallel_threshold: crate::engine::DEFAULT_PARALLEL_THRESHOLD,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# population stability run
n_target = 65536
gamma = 0.5
adversary_budget = 0
alpha = 0.1
seed = 7
";

    #[test]
    fn parses_a_plain_config() {
        let cfg = Config::parse(BASE).unwrap();
        let run = cfg.to_run_config().unwrap();
        assert_eq!(run.params.n_target, 65536);
        assert_eq!(run.params.epoch_length, 2048);
        assert_eq!(run.seed, 7);
        assert_eq!(run.max_rounds, 10 * 2048);
        assert_eq!(run.strategy, StrategyKind::Null);
    }

    #[test]
    fn derived_fields_are_never_read_from_file() {
        // epoch_length is not a key at all.
        let text = format!("{BASE}epoch_length = 9\n");
        assert!(matches!(
            Config::parse(&text),
            Err(ConfigError::UnknownKey(k)) if k == "epoch_length"
        ));
    }

    #[test]
    fn overrides_apply_after_file_parse() {
        let mut cfg = Config::parse(BASE).unwrap();
        cfg.set("gamma", "1/4").unwrap();
        cfg.set("epochs", "2").unwrap();
        let run = cfg.to_run_config().unwrap();
        assert_eq!(run.params.gamma, crate::params::Rational::new(1, 4));
        assert_eq!(run.max_rounds, 2 * 2048);
    }

    #[test]
    fn rounds_and_epochs_are_mutually_exclusive() {
        let mut cfg = Config::parse(BASE).unwrap();
        cfg.set("epochs", "2").unwrap();
        cfg.set("max_rounds", "100").unwrap();
        assert!(matches!(
            cfg.to_run_config(),
            Err(ConfigError::RoundsAndEpochs)
        ));
    }

    #[test]
    fn rejects_invalid_populations() {
        let mut cfg = Config::parse(BASE).unwrap();
        cfg.set("n_target", "32768").unwrap(); // 2^15, log2 odd
        assert!(matches!(
            cfg.to_run_config(),
            Err(ConfigError::Param(ParamError::NotPowerOfFour(_)))
        ));
    }

    #[test]
    fn strategy_and_protocol_keys_round_trip() {
        let mut cfg = Config::parse(BASE).unwrap();
        cfg.set("adversary", "desync_inserter").unwrap();
        cfg.set("adversary_round_offset", "512").unwrap();
        cfg.set("protocol", "attempt2").unwrap();
        let run = cfg.to_run_config().unwrap();
        assert_eq!(run.strategy, StrategyKind::DesyncInserter);
        assert_eq!(run.strategy_params.round_offset, Some(512));
        assert_eq!(run.protocol, ProtocolKind::Attempt2);
    }

    #[test]
    fn malformed_lines_are_rejected_with_position() {
        let err = Config::parse("n_target 65536\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
    }
}
