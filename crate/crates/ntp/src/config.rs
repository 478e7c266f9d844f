//! Training configuration files.
//!
//! TOML or JSON (chosen by extension), keys named after the `Hyperparams`
//! fields. Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! k = 100
//! learning_rate = 0.001
//! batch_known = 10
//! negatives = 4
//! l2 = 0.01
//! mean_loss = true  # average the batch likelihood
//! clip = 1.0
//! epochs = 100
//! depth = 2
//! mu = 0.7071067811865476
//! kmax = 10        # 0 proves exactly
//! seed = 0
//! mode = "ntp-lambda"
//! ```

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ntp_core::trainer::{Hyperparams, Mode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_known: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negatives: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_loss: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    /// Later values win: `self` fields that are set replace those of `base`.
    pub fn overlay(&self, base: &Config) -> Config {
        macro_rules! pick {
            ($($f:ident),*) => { Config { $($f: self.$f.clone().or_else(|| base.$f.clone()),)* } };
        }
        pick!(k, learning_rate, batch_known, negatives, l2, mean_loss, clip, epochs, depth, mu, kmax, seed, mode)
    }

    pub fn apply(&self, hp: &mut Hyperparams) -> Result<()> {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { hp.$f = v; })* };
        }
        set!(k, learning_rate, batch_known, negatives, l2, mean_loss, clip, epochs, depth, mu, seed);
        if let Some(k) = self.kmax {
            hp.kmax = (k > 0).then_some(k);
        }
        if let Some(m) = &self.mode {
            hp.mode = m.parse::<Mode>()?;
        }
        Ok(())
    }

    pub fn hyperparams(&self) -> Result<Hyperparams> {
        let mut hp = Hyperparams::default();
        self.apply(&mut hp)?;
        hp.validate()?;
        Ok(hp)
    }

    /// Every key set, as written next to a run's outputs.
    pub fn resolved(hp: &Hyperparams) -> Config {
        Config {
            k: Some(hp.k),
            learning_rate: Some(hp.learning_rate),
            batch_known: Some(hp.batch_known),
            negatives: Some(hp.negatives),
            l2: Some(hp.l2),
            mean_loss: Some(hp.mean_loss),
            clip: Some(hp.clip),
            epochs: Some(hp.epochs),
            depth: Some(hp.depth),
            mu: Some(hp.mu),
            kmax: Some(hp.kmax.unwrap_or(0)),
            seed: Some(hp.seed),
            mode: Some(hp.mode.name().to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        let j = dir.path().join("c.json");
        fs::write(&t, "k = 5\nkmax = 0\nmode = \"complex\"\n").unwrap();
        fs::write(&j, r#"{"k": 5, "kmax": 0, "mode": "complex"}"#).unwrap();
        let (a, b) = (Config::load(&t).unwrap(), Config::load(&j).unwrap());
        assert_eq!(a, b);
        let hp = a.hyperparams().unwrap();
        assert_eq!((hp.k, hp.kmax, hp.mode), (5, None, Mode::ComplexOnly));
        assert_eq!(hp.epochs, Hyperparams::default().epochs);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        fs::write(&t, "dimension = 5\n").unwrap();
        assert!(Config::load(&t).is_err());
        let cfg = Config { depth: Some(0), ..Config::default() };
        assert!(cfg.hyperparams().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Config { k: Some(5), seed: Some(1), ..Config::default() };
        let flags = Config { seed: Some(9), ..Config::default() };
        let merged = flags.overlay(&file);
        assert_eq!((merged.k, merged.seed), (Some(5), Some(9)));
    }

    #[test]
    fn resolved_roundtrips() {
        let hp = Hyperparams { seed: 3, kmax: None, ..Hyperparams::default() };
        assert_eq!(Config::resolved(&hp).hyperparams().unwrap(), hp);
    }
}
