//! Hold-out evaluation, rank sweeps and dataset statistics.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::als::{self, FactorModel, Observed, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::{InteractionTable, Review};
use crate::ratings::Strategy;
use crate::sentiment::{self, ClassCounts, Lexicon};

/// Test triples whose user or item never occurs in training are dropped.
pub const COLD_START_POLICY: &str = "drop";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub evaluated: usize,
    pub dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy: Option<String>,
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    /// Seed of the factor initialization.
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split_seed: Option<u64>,
    pub cold_start: String,
}

impl EvalReport {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = Some(strategy.name().to_string());
        self
    }
}

/// Seeded shuffle, then the first `⌊fraction · N⌋` triples train and the
/// rest test.
pub fn split<T: Clone>(ratings: &[T], config: &SplitConfig) -> Result<(Vec<T>, Vec<T>)> {
    config.validate()?;
    let n = ratings.len();
    let cut = (config.train_fraction * n as f64).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::Config(format!(
            "fraction {} of {n} ratings leaves an empty side",
            config.train_fraction
        )));
    }
    let mut shuffled = ratings.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let test = shuffled.split_off(cut);
    Ok((shuffled, test))
}

/// Squared-error summary over the test triples whose user and item both occur
/// in `train`.
pub fn rmse<T: Observed>(model: &FactorModel, train: &[T], test: &[T]) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Eval("empty test set".into()));
    }
    let mut seen_users = vec![false; model.n_users()];
    let mut seen_items = vec![false; model.n_items()];
    for t in train {
        if let Some(s) = seen_users.get_mut(t.user_index()) {
            *s = true;
        }
        if let Some(s) = seen_items.get_mut(t.item_index()) {
            *s = true;
        }
    }

    let mut sum = 0.0;
    let mut evaluated = 0;
    for t in test {
        let (u, i) = (t.user_index(), t.item_index());
        let warm = seen_users.get(u).copied().unwrap_or(false)
            && seen_items.get(i).copied().unwrap_or(false);
        if !warm {
            continue;
        }
        let e = model.predict(u, i)? - t.value();
        sum += e * e;
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(Error::Eval(format!(
            "all {} test ratings involve users or items unseen in training",
            test.len()
        )));
    }
    Ok(EvalReport {
        rmse: (sum / evaluated as f64).sqrt(),
        evaluated,
        dropped: test.len() - evaluated,
        strategy: None,
        rank: model.rank(),
        lambda: model.lambda(),
        iterations: 0,
        seed: model.seed(),
        train_fraction: None,
        split_seed: None,
        cold_start: COLD_START_POLICY.to_string(),
    })
}

fn train_and_score<T: Observed>(
    train: &[T],
    test: &[T],
    n_users: usize,
    n_items: usize,
    train_cfg: &TrainConfig,
    split_cfg: &SplitConfig,
) -> Result<EvalReport> {
    let (model, _) = als::train(train, n_users, n_items, train_cfg)?;
    let mut report = rmse(&model, train, test)?;
    report.iterations = train_cfg.iterations;
    report.train_fraction = Some(split_cfg.train_fraction);
    report.split_seed = Some(split_cfg.seed);
    Ok(report)
}

/// Split, train once, and score the held-out part.
pub fn evaluate<T: Observed + Clone>(
    ratings: &[T],
    n_users: usize,
    n_items: usize,
    train_cfg: &TrainConfig,
    split_cfg: &SplitConfig,
) -> Result<EvalReport> {
    let (train, test) = split(ratings, split_cfg)?;
    train_and_score(&train, &test, n_users, n_items, train_cfg, split_cfg)
}

/// One report per rank, all on the same split. Ranks train in parallel;
/// output order follows `ranks`.
pub fn sweep<T: Observed + Clone + Sync>(
    ratings: &[T],
    n_users: usize,
    n_items: usize,
    ranks: &[usize],
    train_cfg: &TrainConfig,
    split_cfg: &SplitConfig,
) -> Result<Vec<EvalReport>> {
    if ranks.is_empty() {
        return Err(Error::Config("no ranks to sweep".into()));
    }
    let (train, test) = split(ratings, split_cfg)?;
    ranks
        .par_iter()
        .map(|&rank| {
            let cfg = TrainConfig { rank, ..*train_cfg };
            train_and_score(&train, &test, n_users, n_items, &cfg, split_cfg)
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(mut w: W, reports: &[EvalReport]) -> Result<()> {
    writeln!(w, "rank,rmse,evaluated,dropped")?;
    for r in reports {
        writeln!(w, "{},{},{},{}", r.rank, r.rmse, r.evaluated, r.dropped)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTotal {
    pub item_id: u64,
    pub item_name: String,
    pub total_playtime: f64,
    pub owners: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTotal {
    pub user_id: String,
    pub total_playtime: f64,
    pub games: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub records: usize,
    pub users: usize,
    pub items: usize,
    pub sparsity: f64,
    pub reviews: usize,
    pub never_played: usize,
    pub avg_playtime_per_user: f64,
    pub avg_playtime_per_item: f64,
    pub top_items: Vec<ItemTotal>,
    pub top_users: Vec<UserTotal>,
    pub sentiment: Option<ClassCounts>,
}

const TOP_N: usize = 10;

pub fn stats(
    table: &InteractionTable,
    reviews: &[Review],
    lexicon: Option<&Lexicon>,
) -> StatsReport {
    let index = table.index();
    let item_totals: Vec<f64> = (0..table.n_items())
        .map(|i| table.item_adjacency(i).iter().map(|&(_, t)| t).sum())
        .collect();
    let user_totals: Vec<f64> = (0..table.n_users())
        .map(|u| table.user_adjacency(u).iter().map(|&(_, t)| t).sum())
        .collect();
    let total: f64 = table
        .interactions()
        .iter()
        .map(|x| x.playtime_forever)
        .sum();

    let top = |totals: &[f64]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..totals.len()).collect();
        order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
        order.truncate(TOP_N);
        order
    };

    let mean = |n: usize| if n == 0 { 0.0 } else { total / n as f64 };

    StatsReport {
        records: table.len(),
        users: table.n_users(),
        items: table.n_items(),
        sparsity: table.sparsity(),
        reviews: reviews.len(),
        never_played: table
            .interactions()
            .iter()
            .filter(|x| x.playtime_forever == 0.0)
            .count(),
        avg_playtime_per_user: mean(table.n_users()),
        avg_playtime_per_item: mean(table.n_items()),
        top_items: top(&item_totals)
            .into_iter()
            .map(|i| ItemTotal {
                item_id: index.item_id(i).unwrap_or_default(),
                item_name: table.item_name(i).unwrap_or_default().to_string(),
                total_playtime: item_totals[i],
                owners: table.item_adjacency(i).len(),
            })
            .collect(),
        top_users: top(&user_totals)
            .into_iter()
            .map(|u| UserTotal {
                user_id: index.user_id(u).unwrap_or_default().to_string(),
                total_playtime: user_totals[u],
                games: table.user_adjacency(u).len(),
            })
            .collect(),
        sentiment: lexicon.map(|l| sentiment::class_counts(reviews, l)),
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records\t{}", self.records)?;
        writeln!(f, "users\t{}", self.users)?;
        writeln!(f, "items\t{}", self.items)?;
        writeln!(f, "sparsity\t{:.6}", self.sparsity)?;
        writeln!(f, "never played\t{}", self.never_played)?;
        writeln!(f, "reviews\t{}", self.reviews)?;
        writeln!(
            f,
            "avg playtime per user\t{:.2}",
            self.avg_playtime_per_user
        )?;
        writeln!(
            f,
            "avg playtime per item\t{:.2}",
            self.avg_playtime_per_item
        )?;
        writeln!(f)?;
        writeln!(f, "top items by total playtime")?;
        writeln!(f, "item_id\titem_name\ttotal_playtime\towners")?;
        for it in &self.top_items {
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                it.item_id, it.item_name, it.total_playtime, it.owners
            )?;
        }
        writeln!(f)?;
        writeln!(f, "top users by total playtime")?;
        writeln!(f, "user_id\ttotal_playtime\tgames")?;
        for u in &self.top_users {
            writeln!(f, "{}\t{}\t{}", u.user_id, u.total_playtime, u.games)?;
        }
        if let Some(counts) = &self.sentiment {
            writeln!(f)?;
            writeln!(f, "review sentiment")?;
            write!(f, "{counts}")?;
        }
        Ok(())
    }
}
