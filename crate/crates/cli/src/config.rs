//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! domain = maze
//! seed = 0
//! preset = desk                 # desk | full
//! model.block_filters = 24      # any model config key
//! epochs = 30
//! lr = 0.001
//! curriculum_lr = 0.0001
//! curriculum_epochs = 10
//! batch_size = 32
//! lambda = 1.0
//! validation_fraction = 0.1
//! max_steps = 2000
//! goal_samples = true
//! budget = 200000               # expansions
//! time_limit = 60               # seconds
//! tier.maze-8x8 = maze 8x8 pairs=1 count=100 first_seed=20000 budget=20000
//! curriculum = maze-8x8, maze-10x10
//! out = runs/maze
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use coat_core::training::{CurriculumTier, TrainConfig};
use coat_core::{CoatError, DomainTag, GenParams, ModelConfig, SearchBudget};

use crate::error::{usage, CliError, Result};

pub const KEYS: &[&str] = &[
    "domain",
    "seed",
    "preset",
    "model.*",
    "epochs",
    "lr",
    "curriculum_lr",
    "curriculum_epochs",
    "batch_size",
    "lambda",
    "validation_fraction",
    "max_steps",
    "goal_samples",
    "budget",
    "time_limit",
    "tier.*",
    "curriculum",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    #[default]
    Desk,
    Full,
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => usage(format!("unknown preset {s:?} (expected desk or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierSpec {
    pub params: GenParams,
    pub count: usize,
    pub first_seed: u64,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Option<DomainTag>,
    pub seed: u64,
    pub preset: Preset,
    pub model: BTreeMap<String, String>,
    pub train: TrainConfig,
    pub goal_samples: bool,
    pub budget: SearchBudget,
    pub tiers: BTreeMap<String, TierSpec>,
    pub curriculum: Vec<String>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: None,
            seed: 0,
            preset: Preset::Desk,
            model: BTreeMap::new(),
            train: TrainConfig::default(),
            goal_samples: true,
            budget: SearchBudget::desk(),
            tiers: BTreeMap::new(),
            curriculum: Vec::new(),
            out: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => usage(format!("config key {key}: expected true or false, got {v:?}")),
    }
}

/// `maze 8x8 pairs=1`, `sokoban 7x7 boxes=3`, `floortile 4x4`; trailing
/// `key=value` tokens not consumed here are returned.
pub fn parse_gen_params(text: &str) -> Result<(GenParams, BTreeMap<String, String>)> {
    let mut toks = text.split_whitespace();
    let domain: DomainTag = toks
        .next()
        .ok_or_else(|| CliError::Usage("empty generator spec".into()))?
        .parse()
        .map_err(|e: CoatError| CliError::Usage(e.to_string()))?;
    let size = toks.next().ok_or_else(|| CliError::Usage(format!("generator spec {text:?} lacks HxW")))?;
    let (h, w) = size
        .split_once('x')
        .ok_or_else(|| CliError::Usage(format!("size {size:?} is not HxW")))?;
    let (h, w) = (num::<usize>("size", h)?, num::<usize>("size", w)?);
    let mut rest = BTreeMap::new();
    for t in toks {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value in generator spec, got {t:?}")))?;
        rest.insert(k.to_string(), v.to_string());
    }
    let params = match domain {
        DomainTag::Maze => GenParams::maze(h, w, rest.remove("pairs").map(|v| num("pairs", &v)).transpose()?.unwrap_or(4)),
        DomainTag::Sokoban => {
            GenParams::sokoban(h, w, rest.remove("boxes").map(|v| num("boxes", &v)).transpose()?.unwrap_or(2))
        }
        DomainTag::FloorTile => GenParams::floortile(h, w),
    };
    Ok((params, rest))
}

fn parse_tier(text: &str) -> Result<TierSpec> {
    let (params, mut rest) = parse_gen_params(text)?;
    let mut take = |k: &str| rest.remove(k).ok_or_else(|| CliError::Usage(format!("tier {text:?} lacks {k}=")));
    let tier = TierSpec {
        params,
        count: num("count", &take("count")?)?,
        first_seed: num("first_seed", &take("first_seed")?)?,
        budget: num("budget", &take("budget")?)?,
    };
    if let Some(k) = rest.keys().next() {
        return usage(format!("unknown tier key {k:?}"));
    }
    Ok(tier)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut expansions = cfg.budget.max_expansions;
        let mut time_limit = cfg.budget.time_limit;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let t = &mut cfg.train;
            match key {
                "domain" => cfg.domain = Some(value.parse().map_err(|e: CoatError| CliError::Usage(e.to_string()))?),
                "seed" => cfg.seed = num(key, value)?,
                "preset" => cfg.preset = value.parse()?,
                "epochs" => t.epochs = num(key, value)?,
                "lr" => t.lr = num(key, value)?,
                "curriculum_lr" => t.curriculum_lr = num(key, value)?,
                "curriculum_epochs" => t.curriculum_epochs = num(key, value)?,
                "batch_size" => t.batch_size = num(key, value)?,
                "lambda" => t.lambda = num(key, value)?,
                "validation_fraction" => t.validation_fraction = num(key, value)?,
                "max_steps" => t.max_steps = Some(num(key, value)?),
                "goal_samples" => cfg.goal_samples = flag(key, value)?,
                "budget" => expansions = Some(num(key, value)?),
                "time_limit" => time_limit = Some(Duration::from_secs_f64(num(key, value)?)),
                "curriculum" => {
                    cfg.curriculum = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                "out" => cfg.out = Some(PathBuf::from(value)),
                _ => {
                    if let Some(m) = key.strip_prefix("model.") {
                        cfg.model.insert(m.to_string(), value.to_string());
                    } else if let Some(label) = key.strip_prefix("tier.") {
                        cfg.tiers.insert(label.to_string(), parse_tier(value)?);
                    } else {
                        return usage(format!(
                            "config line {}: unknown key {key:?}; known keys: {}",
                            i + 1,
                            KEYS.join(", ")
                        ));
                    }
                }
            }
        }
        cfg.budget = SearchBudget::new(expansions, time_limit)?;
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        for label in &self.curriculum {
            if !self.tiers.contains_key(label) {
                return usage(format!("curriculum refers to undefined tier {label:?}"));
            }
        }
        if let Some(d) = self.domain {
            if let Some((label, _)) = self.tiers.iter().find(|(_, t)| t.params.domain() != d) {
                return usage(format!("tier {label} is not a {d} tier"));
            }
        }
        Ok(())
    }

    /// Preset sizes for `domain` with any `model.*` overrides applied.
    pub fn model_config(&self, domain: DomainTag) -> Result<ModelConfig> {
        let base = match self.preset {
            Preset::Desk => ModelConfig::desk(domain),
            Preset::Full => ModelConfig::full(domain),
        };
        let mut pairs: BTreeMap<String, String> = base.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for (k, v) in &self.model {
            if k == "domain" || !pairs.contains_key(k) {
                return usage(format!("model.{k} is not an adjustable model key"));
            }
            pairs.insert(k.clone(), v.clone());
        }
        Ok(ModelConfig::from_pairs(&pairs)?)
    }

    pub fn curriculum_tiers(&self) -> Vec<CurriculumTier> {
        self.curriculum
            .iter()
            .map(|label| {
                let t = &self.tiers[label];
                CurriculumTier {
                    label: label.clone(),
                    params: t.params.clone(),
                    count: t.count,
                    first_seed: t.first_seed,
                    budget: SearchBudget::expansions(t.budget),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let cfg = ExperimentConfig::parse(
            "domain = maze\nseed = 4 # trailing comment\nmodel.fc1_width = 32\nepochs=3\nbudget = 500\n\
             tier.m8 = maze 8x8 pairs=1 count=10 first_seed=100 budget=2000\ncurriculum = m8\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.train.seed, 4);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.budget.max_expansions, Some(500));
        assert_eq!(cfg.model_config(DomainTag::Maze).unwrap().fc1_width, 32);
        let tiers = cfg.curriculum_tiers();
        assert_eq!(tiers[0].params, GenParams::maze(8, 8, 1));
        assert_eq!(tiers[0].count, 10);
    }

    #[test]
    fn rejects_unknown_keys_and_undefined_tiers() {
        assert!(ExperimentConfig::parse("colour = red\n").is_err());
        assert!(ExperimentConfig::parse("curriculum = nowhere\n").is_err());
        assert!(ExperimentConfig::parse("tier.a = maze 8x8 count=1 first_seed=0\n").is_err());
        let cfg = ExperimentConfig::parse("model.d_e = 6\n").unwrap();
        assert!(cfg.model_config(DomainTag::Maze).is_err());
    }
}
