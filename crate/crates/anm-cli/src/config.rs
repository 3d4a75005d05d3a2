//! Flat `key=value` run configuration.
//!
//! One assignment per line; blank lines and `#` comments are skipped.
//! Unknown keys are rejected by name. Command-line flags override any
//! value set here.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// Every key a configuration file may set. Keys a subcommand does not use
/// are permitted and ignored by it.
pub const ALLOWED_KEYS: &[&str] = &[
    // run-wide
    "seed",
    "sample_dt",
    "motifs",
    // search engines
    "population_size",
    "generations",
    "initial_motifs",
    "k_neighbours",
    "threshold_initial",
    "stagnation_gens",
    "burst_additions",
    "burst_window",
    "lower_factor",
    "raise_factor",
    "prune_start",
    "prune_end",
    "add_motif",
    "remove_motif",
    "replace_motif",
    "reweight_edge",
    "retarget_output",
    "ratio_low",
    "p_conn",
    "goal",
    // neuron model
    "tau_ms",
    "v_threshold",
    "v_reset",
    "refractory_steps",
    "dt_ms",
    // stimulus encoding
    "window_ms",
    "burst_ms",
    "spike_rate_per_ms",
    "lsb_channel_zero",
    // stimulus optimiser
    "min_length",
    "max_length",
    "elite_fraction",
    "pattern_mutation",
    // separability
    "separability_threshold",
];

/// Parsed configuration; values stay strings until a typed lookup.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Config::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Config, String> {
        let mut values = BTreeMap::new();
        let mut unknown = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("{origin}:{}: expected key=value, got {line:?}", index + 1));
            };
            let key = key.trim().to_string();
            if !ALLOWED_KEYS.contains(&key.as_str()) {
                unknown.push(key.clone());
            }
            values.insert(key, value.trim().to_string());
        }
        if !unknown.is_empty() {
            return Err(format!(
                "{origin}: unknown config key{} {}; known keys: {}",
                if unknown.len() == 1 { "" } else { "s" },
                unknown.join(", "),
                ALLOWED_KEYS.join(", ")
            ));
        }
        Ok(Config { values })
    }

    /// Typed lookup; `None` when the key is absent.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, String>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(ALLOWED_KEYS.contains(&key), "lookup of undeclared key {key}");
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key {key}={raw}: {e}")),
        }
    }

    /// Overwrite `field` when the key is present.
    pub fn apply<T>(&self, key: &str, field: &mut T) -> Result<(), String>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(value) = self.get(key)? {
            *field = value;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_assignments_comments_and_blanks() {
        let config = Config::parse("# run\nseed = 9\n\npopulation_size=24\n", "test").unwrap();
        assert_eq!(config.get::<u64>("seed").unwrap(), Some(9));
        assert_eq!(config.get::<usize>("population_size").unwrap(), Some(24));
        assert_eq!(config.get::<f64>("sample_dt").unwrap(), None);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = Config::parse("seeed=1\npopulation_size=2\ntypo=3\n", "test").unwrap_err();
        assert!(err.contains("seeed"));
        assert!(err.contains("typo"));
        assert!(err.contains("unknown config keys"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = Config::parse("seed=1\nnot an assignment\n", "test").unwrap_err();
        assert!(err.contains("test:2"));
    }

    #[test]
    fn typed_lookups_report_bad_values() {
        let config = Config::parse("seed=banana\n", "test").unwrap();
        let err = config.get::<u64>("seed").unwrap_err();
        assert!(err.contains("seed=banana"));
    }

    #[test]
    fn apply_overwrites_only_when_present() {
        let config = Config::parse("p_conn=0.5\n", "test").unwrap();
        let mut p_conn = 0.25;
        let mut ratio = 0.6;
        config.apply("p_conn", &mut p_conn).unwrap();
        config.apply("ratio_low", &mut ratio).unwrap();
        assert_eq!(p_conn, 0.5);
        assert_eq!(ratio, 0.6);
    }
}
