//! Line-oriented `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! data.interactions = ratings.csv
//! data.items = items.csv
//! split.holdout = 0.2
//! train.dim = 16
//! policy = cat, par
//! target.female = 0.3   # only used by `policy = custom`
//! ```
//!
//! Recognized keys: `data.interactions`, `data.items`, `synth.users`,
//! `synth.items`, `synth.minority_share`, `synth.affinity`, `synth.per_user`,
//! `split.holdout`, `train.dim`, `train.epochs`, `train.batch`,
//! `train.triplets`, `train.lr`, `rerank.k`, `rerank.pool`, `rerank.lambda`,
//! `calibrate.budget`, `calibrate.step`, `calibrate.mode`, `policy`,
//! `minority`, `seed`, `out`, `target.<attribute>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bpr::TrainConfig;
use crate::dataset::SynthParams;
use crate::error::{Error, Result};
use crate::exposure::PolicyKind;
use crate::rerank::{CalibrationMode, RerankConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { interactions: PathBuf, items: PathBuf },
    Synth(SynthParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub budget: f64,
    pub step: f64,
    pub mode: CalibrationMode,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            budget: 0.10,
            step: 0.05,
            mode: CalibrationMode::MinFeasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub holdout: f64,
    pub train: TrainConfig,
    /// `rerank.lambda` is ignored here; see [`Self::lambda`].
    pub rerank: RerankConfig,
    /// Fixed λ for every policy; `None` calibrates per policy.
    pub lambda: Option<f64>,
    pub calibration: CalibrationSettings,
    pub policies: Vec<PolicyKind>,
    pub custom_targets: BTreeMap<String, f64>,
    /// Minority attribute value; `None` picks the group with the smallest catalog share.
    pub minority: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let entries = parse_entries(text)?;
        let mut get = Entries { entries, used: Vec::new() };

        let seed: u64 = get.parse("seed")?.unwrap_or(0);
        let files = (get.raw("data.interactions"), get.raw("data.items"));
        let synth_keys = ["synth.users", "synth.items", "synth.minority_share", "synth.affinity", "synth.per_user"];
        let has_synth = synth_keys.iter().any(|k| get.entries.contains_key(*k));
        let data = match (files, has_synth) {
            ((Some(_), _) | (_, Some(_)), true) => {
                return Err(Error::Config("give either data.* files or a synth.* block, not both".into()))
            }
            ((Some(i), Some(m)), false) => DataSource::Files {
                interactions: base.join(i),
                items: base.join(m),
            },
            ((Some(_), None) | (None, Some(_)), false) => {
                return Err(Error::Config("data.interactions and data.items go together".into()))
            }
            ((None, None), true) => DataSource::Synth(SynthParams {
                num_users: get.parse("synth.users")?.unwrap_or(200),
                num_items: get.parse("synth.items")?.unwrap_or(100),
                minority_catalog_share: get.parse("synth.minority_share")?.unwrap_or(0.1),
                minority_affinity: get.parse("synth.affinity")?.unwrap_or(0.07),
                interactions_per_user: get.parse("synth.per_user")?.unwrap_or(20),
                seed,
            }),
            ((None, None), false) => {
                return Err(Error::Config("no dataset: set data.interactions/data.items or synth.*".into()))
            }
        };

        let defaults = TrainConfig::default();
        let train = TrainConfig {
            dim: get.parse("train.dim")?.unwrap_or(defaults.dim),
            epochs: get.parse("train.epochs")?.unwrap_or(defaults.epochs),
            batch_size: get.parse("train.batch")?.unwrap_or(defaults.batch_size),
            triplets_per_positive: get.parse("train.triplets")?.unwrap_or(defaults.triplets_per_positive),
            learning_rate: get.parse("train.lr")?.unwrap_or(defaults.learning_rate),
            seed: seed::derive(seed, "train"),
        };
        train.validate().map_err(|e| Error::Config(e.to_string()))?;

        let lambda: Option<f64> = get.parse("rerank.lambda")?;
        let rerank_defaults = RerankConfig::default();
        let rerank = RerankConfig::new(
            lambda.unwrap_or(1.0),
            get.parse("rerank.k")?.unwrap_or(rerank_defaults.k),
            get.parse("rerank.pool")?.unwrap_or(rerank_defaults.pool_size),
        )
        .map_err(|e| Error::Config(e.to_string()))?;

        let cal_defaults = CalibrationSettings::default();
        let calibration = CalibrationSettings {
            budget: get.parse("calibrate.budget")?.unwrap_or(cal_defaults.budget),
            step: get.parse("calibrate.step")?.unwrap_or(cal_defaults.step),
            mode: get.parse("calibrate.mode")?.unwrap_or(cal_defaults.mode),
        };

        let policies = match get.raw("policy") {
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PolicyKind::from_str)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Config(e.to_string()))?,
            None => vec![PolicyKind::Par],
        };
        if policies.is_empty() {
            return Err(Error::Config("policy list is empty".into()));
        }

        let holdout = get.parse("split.holdout")?.unwrap_or(0.2);
        let minority = get.raw("minority");
        let out = base.join(get.raw("out").unwrap_or_else(|| "out".into()));

        let mut custom_targets = BTreeMap::new();
        let target_keys: Vec<String> = get
            .entries
            .keys()
            .filter(|k| k.starts_with("target."))
            .cloned()
            .collect();
        for key in target_keys {
            let v: f64 = get.parse(&key)?.expect("key present");
            custom_targets.insert(key["target.".len()..].to_owned(), v);
        }
        if policies.contains(&PolicyKind::Custom) && custom_targets.is_empty() {
            return Err(Error::Config("policy custom needs target.<attribute> entries".into()));
        }

        get.finish()?;
        Ok(Self {
            data,
            holdout,
            train,
            rerank,
            lambda,
            calibration,
            policies,
            custom_targets,
            minority,
            seed,
            out,
        })
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut entries = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().to_owned();
        if entries.insert(key.clone(), (n + 1, value.trim().to_owned())).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", n + 1)));
        }
    }
    Ok(entries)
}

struct Entries {
    entries: BTreeMap<String, (usize, String)>,
    used: Vec<String>,
}

impl Entries {
    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key).map(|(_, v)| v.clone());
        if v.is_some() {
            self.used.push(key.to_owned());
        }
        v
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let line = self.entries.get(key).map(|(l, _)| *l);
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("line {}: invalid value {v:?} for {key}", line.unwrap_or(0)))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !self.used.contains(key) {
                return Err(Error::Config(format!("line {line}: unknown key {key:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_config() {
        let cfg = ExperimentConfig::parse(
            "data.interactions = x.csv\ndata.items = i.csv # items\n\ntrain.epochs=3\npolicy = cat, PAR\nrerank.lambda = 0.4\nseed = 9\n",
            Path::new("/tmp/exp"),
        )
        .unwrap();
        assert_eq!(
            cfg.data,
            DataSource::Files {
                interactions: "/tmp/exp/x.csv".into(),
                items: "/tmp/exp/i.csv".into()
            }
        );
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.dim, 16);
        assert_eq!(cfg.policies, vec![PolicyKind::Cat, PolicyKind::Par]);
        assert_eq!(cfg.lambda, Some(0.4));
        assert_eq!(cfg.rerank.k, 10);
        assert_eq!(cfg.rerank.pool_size, 100);
        assert_eq!(cfg.holdout, 0.2);
        assert_eq!(cfg.out, PathBuf::from("/tmp/exp/out"));
    }

    #[test]
    fn synth_defaults() {
        let cfg = ExperimentConfig::parse("synth.users = 50\nseed = 3\n", Path::new(".")).unwrap();
        match cfg.data {
            DataSource::Synth(p) => {
                assert_eq!(p.num_users, 50);
                assert_eq!(p.seed, 3);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.lambda, None);
        assert_eq!(cfg.policies, vec![PolicyKind::Par]);
    }

    #[test]
    fn rejects_both_sources() {
        let err = ExperimentConfig::parse("data.interactions = a\ndata.items = b\nsynth.users = 4\n", Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("not both"));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ExperimentConfig::parse("synth.users = 4\nbogus = 1\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("synth.users = four\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("synth.users 4\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("synth.users = 4\nsynth.users = 5\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("synth.users = 4\npolicy = custom\n", Path::new(".")).is_err());
    }

    #[test]
    fn custom_targets() {
        let cfg = ExperimentConfig::parse(
            "synth.users = 4\npolicy = custom\ntarget.minority = 0.3\ntarget.majority = 0.7\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.custom_targets.get("minority"), Some(&0.3));
    }
}
