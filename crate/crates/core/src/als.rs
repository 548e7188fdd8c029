//! Alternating least squares.
//!
//! Minimizes
//!
//! ```text
//! J = Σ_(u,i) (r_ui − x_u·y_i)² + λ (Σ_u n_u ‖x_u‖² + Σ_i n_i ‖y_i‖²)
//! ```
//!
//! where `n_u` and `n_i` count the observed ratings of a user or item. Each
//! half-step fixes one side and solves every row of the other side exactly:
//! `x_u = (Y_uᵀ Y_u + λ n_u I)⁻¹ Y_uᵀ r_u`.
//!
//! Rows are solved in parallel but each solve is sequential, so results do not
//! depend on the number of worker threads.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ratings::RatingTriple;

pub const MAX_RANK: usize = 200;
pub const DEFAULT_LAMBDA: f64 = 0.1;

const MAGIC: &[u8; 8] = b"STMRALS1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rank: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rank: 30,
            iterations: 10,
            lambda: DEFAULT_LAMBDA,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.rank > MAX_RANK {
            return Err(Error::Config(format!(
                "rank must be in 1..={MAX_RANK}, got {}",
                self.rank
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// User and item factor matrices, both row-major with `rank` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    rank: usize,
    lambda: f64,
    seed: u64,
    n_users: usize,
    n_items: usize,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
}

impl FactorModel {
    pub fn from_parts(
        rank: usize,
        lambda: f64,
        seed: u64,
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
    ) -> Result<Self> {
        if rank == 0
            || !user_factors.len().is_multiple_of(rank)
            || !item_factors.len().is_multiple_of(rank)
        {
            return Err(Error::Config(format!(
                "factor lengths {} and {} are not multiples of rank {rank}",
                user_factors.len(),
                item_factors.len()
            )));
        }
        if user_factors
            .iter()
            .chain(&item_factors)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Contract("factor entries must be finite".into()));
        }
        Ok(FactorModel {
            rank,
            lambda,
            seed,
            n_users: user_factors.len() / rank,
            n_items: item_factors.len() / rank,
            user_factors,
            item_factors,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn user_factors(&self) -> &[f64] {
        &self.user_factors
    }

    pub fn item_factors(&self) -> &[f64] {
        &self.item_factors
    }

    pub fn user_row(&self, user: usize) -> Option<&[f64]> {
        (user < self.n_users).then(|| &self.user_factors[user * self.rank..(user + 1) * self.rank])
    }

    pub fn item_row(&self, item: usize) -> Option<&[f64]> {
        (item < self.n_items).then(|| &self.item_factors[item * self.rank..(item + 1) * self.rank])
    }

    /// Unclamped `x_u · y_i`.
    pub fn predict(&self, user: usize, item: usize) -> Result<f64> {
        let x = self.user_row(user).ok_or_else(|| Error::Lookup {
            kind: "user index",
            key: user.to_string(),
        })?;
        let y = self.item_row(item).ok_or_else(|| Error::Lookup {
            kind: "item index",
            key: item.to_string(),
        })?;
        Ok(linalg::dot(x, y))
    }

    /// Writes the binary container: magic, rank, λ, seed, row counts, then
    /// both factor matrices row-major, all little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.rank as u32).to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.n_users as u64).to_le_bytes())?;
        w.write_all(&(self.n_items as u64).to_le_bytes())?;
        for v in self.user_factors.iter().chain(&self.item_factors) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut next8 = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)
                .map_err(|_| Error::Format("truncated header".into()))?;
            Ok(b8)
        };
        r.read_exact(&mut b4)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let rank = u32::from_le_bytes(b4) as usize;
        let lambda = f64::from_le_bytes(next8(&mut r)?);
        let seed = u64::from_le_bytes(next8(&mut r)?);
        let n_users = u64::from_le_bytes(next8(&mut r)?) as usize;
        let n_items = u64::from_le_bytes(next8(&mut r)?) as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("rank {rank} out of range")));
        }

        let mut read_matrix = |rows: usize| -> Result<Vec<f64>> {
            let len = rows
                .checked_mul(rank)
                .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
            let mut bytes = Vec::new();
            (&mut r).take(len as u64 * 8).read_to_end(&mut bytes)?;
            if bytes.len() != len * 8 {
                return Err(Error::Format("truncated factor matrix".into()));
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let user_factors = read_matrix(n_users)?;
        let item_factors = read_matrix(n_items)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after factor matrices".into()));
        }
        FactorModel::from_parts(rank, lambda, seed, user_factors, item_factors)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

/// Per-half-step objective values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Objective at initialization.
    pub initial: f64,
    /// Objective after each half-step: user, item, user, item, ...
    pub values: Vec<f64>,
}

impl LossTrace {
    pub fn last(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }
}

/// Seeded uniform `[0, 1) / √k` entries, user rows first.
pub fn init_model(n_users: usize, n_items: usize, config: &TrainConfig) -> Result<FactorModel> {
    config.validate()?;
    if n_users == 0 || n_items == 0 {
        return Err(Error::Config(format!(
            "need at least one user and item, got {n_users}×{n_items}"
        )));
    }
    let k = config.rank;
    let scale = 1.0 / (k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw =
        |n: usize| -> Vec<f64> { (0..n * k).map(|_| rng.random::<f64>() * scale).collect() };
    let user_factors = draw(n_users);
    let item_factors = draw(n_items);
    Ok(FactorModel {
        rank: k,
        lambda: config.lambda,
        seed: config.seed,
        n_users,
        n_items,
        user_factors,
        item_factors,
    })
}

/// Anything that carries one observed (user, item, value) rating.
pub trait Observed {
    fn user_index(&self) -> usize;
    fn item_index(&self) -> usize;
    fn value(&self) -> f64;
}

impl Observed for RatingTriple {
    fn user_index(&self) -> usize {
        self.user_index as usize
    }

    fn item_index(&self) -> usize {
        self.item_index as usize
    }

    fn value(&self) -> f64 {
        self.rating as f64
    }
}

/// Real-valued ratings, as produced by the planted-factor generators.
impl Observed for (u32, u32, f64) {
    fn user_index(&self) -> usize {
        self.0 as usize
    }

    fn item_index(&self) -> usize {
        self.1 as usize
    }

    fn value(&self) -> f64 {
        self.2
    }
}

/// Ratings grouped per user and per item: `(partner index, rating)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub by_user: Vec<Vec<(u32, f64)>>,
    pub by_item: Vec<Vec<(u32, f64)>>,
}

impl Observations {
    pub fn group<T: Observed>(ratings: &[T], n_users: usize, n_items: usize) -> Result<Self> {
        let mut by_user = vec![Vec::new(); n_users];
        let mut by_item = vec![Vec::new(); n_items];
        for t in ratings {
            let (u, i, r) = (t.user_index(), t.item_index(), t.value());
            if u >= n_users || i >= n_items {
                return Err(Error::Contract(format!(
                    "rating ({u}, {i}) outside a {n_users}×{n_items} model"
                )));
            }
            if !r.is_finite() {
                return Err(Error::Contract(format!("rating ({u}, {i}) is not finite")));
            }
            by_user[u].push((i as u32, r));
            by_item[i].push((u as u32, r));
        }
        Ok(Observations { by_user, by_item })
    }
}

/// Re-solves every row of `free` against the read-only `fixed` factors.
///
/// `groups[row]` lists `(partner, rating)` for that row; rows with no
/// observations keep their current values.
pub fn solve_half_step(
    fixed: &[f64],
    groups: &[Vec<(u32, f64)>],
    free: &mut [f64],
    rank: usize,
    lambda: f64,
    side: &'static str,
) -> Result<()> {
    debug_assert_eq!(free.len(), groups.len() * rank);
    free.par_chunks_mut(rank)
        .zip(groups.par_iter())
        .enumerate()
        .try_for_each_init(
            || (vec![0.0; rank * rank], vec![0.0; rank]),
            |(a, b), (row, (x, group))| {
                if group.is_empty() {
                    return Ok(());
                }
                solve_row(fixed, group, rank, lambda, a, b)
                    .map_err(|_| Error::Singular { side, row })?;
                x.copy_from_slice(b);
                Ok(())
            },
        )
}

fn solve_row(
    fixed: &[f64],
    group: &[(u32, f64)],
    k: usize,
    lambda: f64,
    a: &mut [f64],
    b: &mut [f64],
) -> std::result::Result<(), linalg::NotPositiveDefinite> {
    a.fill(0.0);
    b.fill(0.0);
    for &(partner, r) in group {
        let y = &fixed[partner as usize * k..(partner as usize + 1) * k];
        for p in 0..k {
            b[p] += r * y[p];
            for q in 0..=p {
                a[p * k + q] += y[p] * y[q];
            }
        }
    }
    let ridge = lambda * group.len() as f64;
    for p in 0..k {
        a[p * k + p] += ridge;
    }
    linalg::solve_spd(a, k, b)
}

/// The weighted-λ objective `J` of `model` on `obs`.
pub fn objective(model: &FactorModel, obs: &Observations) -> f64 {
    let k = model.rank;
    let lambda = model.lambda;
    // Per-row partial sums are added sequentially so the total does not depend
    // on how rayon splits the work.
    let user_terms: Vec<f64> = obs
        .by_user
        .par_iter()
        .enumerate()
        .map(|(u, group)| {
            let x = &model.user_factors[u * k..(u + 1) * k];
            let sq: f64 = group.iter().fold(0.0, |acc, &(i, r)| {
                let e =
                    r - linalg::dot(x, &model.item_factors[i as usize * k..(i as usize + 1) * k]);
                acc + e * e
            });
            sq + lambda * group.len() as f64 * linalg::dot(x, x)
        })
        .collect();
    let item_terms: Vec<f64> = obs
        .by_item
        .par_iter()
        .enumerate()
        .map(|(i, group)| {
            let y = &model.item_factors[i * k..(i + 1) * k];
            lambda * group.len() as f64 * linalg::dot(y, y)
        })
        .collect();
    user_terms.iter().sum::<f64>() + item_terms.iter().sum::<f64>()
}

/// Runs `iterations` sweeps on an existing model, recording `J` after each
/// half-step.
pub fn fit(model: &mut FactorModel, obs: &Observations, iterations: usize) -> Result<LossTrace> {
    if obs.by_user.len() != model.n_users || obs.by_item.len() != model.n_items {
        return Err(Error::Contract(format!(
            "observations cover {}×{} but the model is {}×{}",
            obs.by_user.len(),
            obs.by_item.len(),
            model.n_users,
            model.n_items
        )));
    }
    let k = model.rank;
    let lambda = model.lambda;
    let mut trace = LossTrace {
        initial: objective(model, obs),
        values: Vec::with_capacity(2 * iterations),
    };
    for _ in 0..iterations {
        solve_half_step(
            &model.item_factors,
            &obs.by_user,
            &mut model.user_factors,
            k,
            lambda,
            "user",
        )?;
        trace.values.push(objective(model, obs));
        solve_half_step(
            &model.user_factors,
            &obs.by_item,
            &mut model.item_factors,
            k,
            lambda,
            "item",
        )?;
        trace.values.push(objective(model, obs));
    }
    Ok(trace)
}

/// Initializes a `n_users × n_items` model and fits it to `ratings`.
pub fn train<T: Observed>(
    ratings: &[T],
    n_users: usize,
    n_items: usize,
    config: &TrainConfig,
) -> Result<(FactorModel, LossTrace)> {
    config.validate()?;
    if ratings.is_empty() {
        return Err(Error::Config("no ratings to train on".into()));
    }
    let obs = Observations::group(ratings, n_users, n_items)?;
    let mut model = init_model(n_users, n_items, config)?;
    let trace = fit(&mut model, &obs, config.iterations)?;
    Ok((model, trace))
}
