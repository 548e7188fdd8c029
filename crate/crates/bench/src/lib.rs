//! Shared fixtures for the benchmarks.

use steamrec_core::ingest::{build_table, Interaction};
use steamrec_core::synthetic::{self, Planted};
use steamrec_core::InteractionTable;

pub fn planted(n_users: usize, n_items: usize, density: f64) -> Planted {
    synthetic::planted(n_users, n_items, 8, density, 42)
}

/// An interaction table with the same pattern as `data`, so a model trained
/// on it can be queried through the recommend API.
pub fn table(data: &Planted) -> InteractionTable {
    build_table(
        data.ratings
            .iter()
            .map(|&(u, i, r)| Interaction {
                user_id: format!("u{u}"),
                item_id: i as u64,
                item_name: format!("item {i}"),
                playtime_forever: r,
                playtime_2weeks: 0.0,
            })
            .collect(),
    )
}
