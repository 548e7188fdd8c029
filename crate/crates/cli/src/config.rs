use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use steamrec_core::{SplitConfig, Strategy, TrainConfig};

/// Run settings as they appear in a JSON config file or on the command line.
/// Every field is optional so the two sources can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub items: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub strategy: Option<Strategy>,
    pub rank: Option<usize>,
    pub iterations: Option<usize>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub train_fraction: Option<f64>,
    pub split_seed: Option<u64>,
    pub k: Option<usize>,
    pub users: Option<Vec<String>>,
    pub ranks: Option<Vec<usize>>,
    pub include_seen: Option<bool>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        Overrides {
            items: self.items.or(base.items),
            reviews: self.reviews.or(base.reviews),
            lexicon: self.lexicon.or(base.lexicon),
            out_dir: self.out_dir.or(base.out_dir),
            strategy: self.strategy.or(base.strategy),
            rank: self.rank.or(base.rank),
            iterations: self.iterations.or(base.iterations),
            lambda: self.lambda.or(base.lambda),
            seed: self.seed.or(base.seed),
            train_fraction: self.train_fraction.or(base.train_fraction),
            split_seed: self.split_seed.or(base.split_seed),
            k: self.k.or(base.k),
            users: self.users.or(base.users),
            ranks: self.ranks.or(base.ranks),
            include_seen: self.include_seen.or(base.include_seen),
            workers: self.workers.or(base.workers),
        }
    }
}

/// A complete, validated pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub items: PathBuf,
    pub reviews: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub strategy: Strategy,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub k: usize,
    /// Users to recommend for; empty means every user.
    pub users: Vec<String>,
    /// Extra ranks to sweep; empty skips the sweep.
    pub ranks: Vec<usize>,
    pub exclude_seen: bool,
}

impl RunConfig {
    pub fn resolve(o: Overrides) -> Result<Self> {
        let items = o.items.context("missing input: items file")?;
        let out_dir = o.out_dir.context("missing output directory")?;
        if items.as_os_str().is_empty() || out_dir.as_os_str().is_empty() {
            bail!("paths must be non-empty");
        }
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            rank: o.rank.unwrap_or(defaults.rank),
            iterations: o.iterations.unwrap_or(defaults.iterations),
            lambda: o.lambda.unwrap_or(defaults.lambda),
            seed: o.seed.unwrap_or(defaults.seed),
        };
        train.validate()?;
        let split_defaults = SplitConfig::default();
        let split = SplitConfig {
            train_fraction: o.train_fraction.unwrap_or(split_defaults.train_fraction),
            seed: o.split_seed.or(o.seed).unwrap_or(split_defaults.seed),
        };
        split.validate()?;
        let k = o.k.unwrap_or(5);
        if k == 0 {
            bail!("k must be at least 1");
        }
        let ranks = o.ranks.unwrap_or_default();
        for &rank in &ranks {
            TrainConfig { rank, ..train }.validate()?;
        }
        Ok(RunConfig {
            items,
            reviews: o.reviews,
            lexicon: o.lexicon,
            out_dir,
            strategy: o.strategy.unwrap_or(Strategy::PlaytimeSentiment),
            train,
            split,
            k,
            users: o.users.unwrap_or_default(),
            ranks,
            exclude_seen: !o.include_seen.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: Overrides = serde_json::from_str(
            r#"{"items": "a.json", "out_dir": "out", "rank": 8, "strategy": "recommend", "k": 3}"#,
        )
        .unwrap();
        let flags = Overrides {
            rank: Some(12),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(flags.over(file)).unwrap();
        assert_eq!(cfg.train.rank, 12);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.strategy, Strategy::PlaytimeRecommend);
        assert_eq!(cfg.split.train_fraction, 0.8);
        assert!(cfg.exclude_seen);
    }

    #[test]
    fn rejects_bad_values() {
        let base = Overrides {
            items: Some("a".into()),
            out_dir: Some("o".into()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(base.clone()).is_ok());
        assert!(RunConfig::resolve(Overrides {
            rank: Some(0),
            ..base.clone()
        })
        .is_err());
        assert!(RunConfig::resolve(Overrides {
            train_fraction: Some(1.0),
            ..base.clone()
        })
        .is_err());
        assert!(RunConfig::resolve(Overrides {
            k: Some(0),
            ..base.clone()
        })
        .is_err());
        assert!(RunConfig::resolve(Overrides {
            items: None,
            ..base
        })
        .is_err());
        assert!(serde_json::from_str::<Overrides>(r#"{"bogus": 1}"#).is_err());
    }
}
