//! Plain `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::dil::{IdentityMode, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::SimulationConfig;
use crate::gallery::GalleryConfig;
use crate::lcnn::{InitScheme, Topology};
use crate::signal::PadMode;

/// Every accepted key with its default value.
const KEYS: &[(&str, &str)] = &[
    ("ablate.count", "600"),
    ("ablate.epochs", "15"),
    ("ablate.learning_rates", "0.001,0.0001"),
    ("eval.noise", "0.25"),
    ("eval.pad", "reflect"),
    ("eval.sigma_hi", "3"),
    ("eval.sigma_lo", "0.175"),
    ("eval.sizes", "11,15,19,23,27"),
    ("eval.wiener_nsr", "0.001"),
    ("model.depth", "5"),
    ("model.init", "near-identity"),
    ("model.init_noise", "0.01"),
    ("model.width", "32"),
    ("rkg.count", "2400"),
    ("rkg.noise", "0.25"),
    ("rkg.sigma_hi", "3"),
    ("rkg.sigma_lo", "0.175"),
    ("rkg.size", "11"),
    ("seed", ""),
    ("train.batch_size", "32"),
    ("train.beta1", "0.9"),
    ("train.beta2", "0.999"),
    ("train.epochs", "40"),
    ("train.epsilon_spec", "1e-12"),
    ("train.identity_mode", "full"),
    ("train.lambda1", "0.8"),
    ("train.lambda2", "0.8"),
    ("train.lambda3", "0.4"),
    ("train.learning_rate", "0.001"),
    ("train.spectrum_dims", "21x21"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { values }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(config_err(format!("unknown key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("key from KEYS table")
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key);
        raw.parse()
            .map_err(|_| config_err(format!("`{key}`: cannot parse `{raw}`")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| config_err(format!("`{key}`: cannot parse `{s}`")))
            })
            .collect()
    }

    pub fn seed(&self) -> Option<u64> {
        self.get("seed").parse().ok()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.values.insert("seed".into(), seed.to_string());
    }

    /// The seed, or a config error naming the command that needs it.
    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed()
            .ok_or_else(|| config_err(format!("`{command}` needs an explicit --seed")))
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let dims = self.get("train.spectrum_dims");
        let (p, q) = dims
            .split_once('x')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| config_err(format!("`train.spectrum_dims`: expected PxQ, got `{dims}`")))?;
        let cfg = TrainConfig {
            lambda1: self.parsed("train.lambda1")?,
            lambda2: self.parsed("train.lambda2")?,
            lambda3: self.parsed("train.lambda3")?,
            learning_rate: self.parsed("train.learning_rate")?,
            beta1: self.parsed("train.beta1")?,
            beta2: self.parsed("train.beta2")?,
            epochs: self.parsed("train.epochs")?,
            batch_size: self.parsed("train.batch_size")?,
            seed: self.seed().unwrap_or(0),
            spectrum_dims: (p, q),
            epsilon_spec: self.parsed("train.epsilon_spec")?,
            identity_mode: self.parsed::<IdentityMode>("train.identity_mode")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gallery_config(&self) -> Result<GalleryConfig> {
        Ok(GalleryConfig {
            count: self.parsed("rkg.count")?,
            size: self.parsed("rkg.size")?,
            sigma_range: (self.parsed("rkg.sigma_lo")?, self.parsed("rkg.sigma_hi")?),
            noise_amplitude: self.parsed("rkg.noise")?,
            seed: self.seed().unwrap_or(0),
        })
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            sizes: self.list("eval.sizes")?,
            sigma_range: (self.parsed("eval.sigma_lo")?, self.parsed("eval.sigma_hi")?),
            noise_amplitude: self.parsed("eval.noise")?,
            seed: self.seed().unwrap_or(0),
        })
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::uniform(self.parsed("model.depth")?, self.parsed("model.width")?)
    }

    pub fn init_scheme(&self) -> Result<InitScheme> {
        match self.get("model.init") {
            "near-identity" => Ok(InitScheme::NearIdentity {
                noise_std: self.parsed("model.init_noise")?,
            }),
            "scaled-normal" => Ok(InitScheme::ScaledNormal),
            other => Err(config_err(format!("`model.init`: unknown scheme `{other}`"))),
        }
    }

    pub fn wiener_nsr(&self) -> Result<f64> {
        self.parsed("eval.wiener_nsr")
    }

    pub fn pad_mode(&self) -> Result<PadMode> {
        self.parsed("eval.pad")
    }

    pub fn ablation_count(&self) -> Result<usize> {
        self.parsed("ablate.count")
    }

    pub fn ablation_epochs(&self) -> Result<usize> {
        self.parsed("ablate.epochs")
    }

    pub fn ablation_learning_rates(&self) -> Result<Vec<f64>> {
        self.list("ablate.learning_rates")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

/// Sorted `key=value` lines; keys without a value are omitted.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            if !v.is_empty() {
                writeln!(f, "{k}={v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_sorted_and_unique() {
        assert!(KEYS.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train_config().unwrap(), TrainConfig::default());
        assert_eq!(cfg.topology().unwrap(), Topology::default());
        assert_eq!(cfg.init_scheme().unwrap(), InitScheme::default());
        let g = cfg.gallery_config().unwrap();
        assert_eq!((g.count, g.size, g.noise_amplitude), (2400, 11, 0.25));
        assert_eq!(cfg.simulation_config().unwrap().sizes, vec![11, 15, 19, 23, 27]);
        assert_eq!(cfg.seed(), None);
    }

    #[test]
    fn round_trip_is_canonical() {
        let mut cfg = RunConfig::parse("train.epochs = 3\n# comment\n\nrkg.count=10\n").unwrap();
        cfg.set_seed(7);
        let text = cfg.to_string();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_string(), text);
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
        assert!(text.contains("seed=7\n"));
    }

    #[test]
    fn unknown_and_malformed_are_rejected() {
        assert!(matches!(RunConfig::parse("train.epoch = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("just words"), Err(Error::Config(_))));
        let cfg = RunConfig::parse("train.epochs = many").unwrap();
        assert!(matches!(cfg.train_config(), Err(Error::Config(_))));
        let cfg = RunConfig::parse("train.learning_rate = -1").unwrap();
        assert!(cfg.train_config().is_err());
        assert!(RunConfig::default().require_seed("gen-rkg").is_err());
    }
}
