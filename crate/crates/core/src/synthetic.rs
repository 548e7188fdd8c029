//! Seeded synthetic rating data with known low-rank structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg;

/// Ratings sampled from `U Vᵀ` for random factors, without noise.
#[derive(Debug, Clone)]
pub struct Planted {
    pub n_users: usize,
    pub n_items: usize,
    pub rank: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub ratings: Vec<(u32, u32, f64)>,
}

/// Factors are uniform on `[0.5, 1.5)`; each cell is observed with
/// probability `density`. Every user and item gets at least one rating.
pub fn planted(n_users: usize, n_items: usize, rank: usize, density: f64, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors =
        |n: usize| -> Vec<f64> { (0..n * rank).map(|_| rng.random_range(0.5..1.5)).collect() };
    let user_factors = factors(n_users);
    let item_factors = factors(n_items);

    let value = |u: usize, i: usize| {
        linalg::dot(
            &user_factors[u * rank..(u + 1) * rank],
            &item_factors[i * rank..(i + 1) * rank],
        )
    };

    let mut observed = vec![false; n_users * n_items];
    for cell in observed.iter_mut() {
        *cell = rng.random_bool(density);
    }
    for u in 0..n_users {
        if !(0..n_items).any(|i| observed[u * n_items + i]) {
            observed[u * n_items + rng.random_range(0..n_items)] = true;
        }
    }
    for i in 0..n_items {
        if !(0..n_users).any(|u| observed[u * n_items + i]) {
            observed[rng.random_range(0..n_users) * n_items + i] = true;
        }
    }

    let ratings = (0..n_users)
        .flat_map(|u| (0..n_items).map(move |i| (u, i)))
        .filter(|&(u, i)| observed[u * n_items + i])
        .map(|(u, i)| (u as u32, i as u32, value(u, i)))
        .collect();

    Planted {
        n_users,
        n_items,
        rank,
        user_factors,
        item_factors,
        ratings,
    }
}
