//! Top-K item lists from a trained factor model.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::als::FactorModel;
use crate::error::{Error, Result};
use crate::ingest::InteractionTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// 1-based rank in the list.
    pub position: usize,
    #[serde(skip)]
    pub item_index: usize,
    pub item_id: u64,
    pub item_name: String,
    pub score: f64,
}

/// One user's list, or the reason it could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecommendations {
    pub user_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub items: Option<Vec<Recommendation>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Orders by score descending, then item index ascending.
fn ranking(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best-scoring items for one user.
///
/// With `exclude_seen`, items the user already owns are skipped.
pub fn top_k(
    model: &FactorModel,
    table: &InteractionTable,
    user_index: usize,
    k: usize,
    exclude_seen: bool,
) -> Result<Vec<Recommendation>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let x = model.user_row(user_index).ok_or_else(|| Error::Lookup {
        kind: "user index",
        key: user_index.to_string(),
    })?;

    let mut seen = vec![false; model.n_items()];
    if exclude_seen {
        for &(item, _) in table.user_adjacency(user_index) {
            if let Some(s) = seen.get_mut(item as usize) {
                *s = true;
            }
        }
    }

    let mut scored: Vec<(usize, f64)> = (0..model.n_items())
        .filter(|&i| !seen[i])
        .map(|i| {
            (
                i,
                crate::linalg::dot(x, model.item_row(i).expect("in range")),
            )
        })
        .collect();

    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, ranking);
        scored.truncate(k);
    }
    scored.sort_by(ranking);

    let index = table.index();
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(pos, (item, score))| Recommendation {
            position: pos + 1,
            item_index: item,
            item_id: index.item_id(item).unwrap_or_default(),
            item_name: table.item_name(item).unwrap_or_default().to_string(),
            score,
        })
        .collect())
}

/// [`top_k`] for each user id, in input order. Unknown ids yield an entry
/// with `error` set instead of failing the batch.
pub fn batch_recommend(
    model: &FactorModel,
    table: &InteractionTable,
    user_ids: &[String],
    k: usize,
    exclude_seen: bool,
) -> Vec<UserRecommendations> {
    user_ids
        .par_iter()
        .map(|id| {
            let result = table
                .index()
                .user_index(id)
                .ok_or_else(|| Error::Lookup {
                    kind: "user",
                    key: id.clone(),
                })
                .and_then(|u| top_k(model, table, u, k, exclude_seen));
            match result {
                Ok(items) => UserRecommendations {
                    user_id: id.clone(),
                    items: Some(items),
                    error: None,
                },
                Err(e) => UserRecommendations {
                    user_id: id.clone(),
                    items: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Plain-text listing, one block per user.
pub fn format_table(lists: &[UserRecommendations]) -> String {
    let mut out = String::new();
    for list in lists {
        out.push_str(&format!("User {}\n", list.user_id));
        match (&list.items, &list.error) {
            (Some(items), _) => {
                out.push_str("S.no\tItem Id\tTitles\tScore\n");
                for r in items {
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{:.4}\n",
                        r.position, r.item_id, r.item_name, r.score
                    ));
                }
            }
            (None, Some(e)) => out.push_str(&format!("error: {e}\n")),
            (None, None) => {}
        }
        out.push('\n');
    }
    out
}
