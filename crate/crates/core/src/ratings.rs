//! Turning playtime into 1..5 ratings.
//!
//! Each interaction is rated against the median playtime of its game, then
//! optionally nudged by the review's sentiment or by the reviewer's explicit
//! recommend flag.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{InteractionTable, Review};
use crate::sentiment::{self, Lexicon, SentimentClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingTriple {
    pub user_index: u32,
    pub item_index: u32,
    pub rating: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Playtime against the item median only.
    #[serde(rename = "playtime")]
    PlaytimeOnly,
    /// Playtime, then ±1 from review sentiment.
    #[serde(rename = "sentiment")]
    PlaytimeSentiment,
    /// Playtime, then ±2 from the recommend flag.
    #[serde(rename = "recommend")]
    PlaytimeRecommend,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::PlaytimeOnly,
        Strategy::PlaytimeSentiment,
        Strategy::PlaytimeRecommend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::PlaytimeOnly => "playtime",
            Strategy::PlaytimeSentiment => "sentiment",
            Strategy::PlaytimeRecommend => "recommend",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "playtime" => Ok(Strategy::PlaytimeOnly),
            "sentiment" => Ok(Strategy::PlaytimeSentiment),
            "recommend" => Ok(Strategy::PlaytimeRecommend),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?} (expected playtime, sentiment or recommend)"
            ))),
        }
    }
}

/// Median of `values`; the mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Median playtime per item index, zeros included. Items without
/// interactions are absent.
pub fn median_playtime(table: &InteractionTable) -> HashMap<usize, f64> {
    (0..table.n_items())
        .into_par_iter()
        .filter_map(|item| {
            let mut times: Vec<f64> = table.item_adjacency(item).iter().map(|&(_, t)| t).collect();
            median(&mut times).map(|m| (item, m))
        })
        .collect()
}

/// Rates a playtime against the item median.
///
/// Bands are half-open with inclusive upper bounds: above the median is 5,
/// `(0.8m, m]` is 4, `(0.5m, 0.8m]` is 3, `(0.2m, 0.5m]` is 2 and the rest 1.
/// A zero median rates any play as 5 and no play as 1.
pub fn playtime_rating(playtime: f64, median: f64) -> Result<u8> {
    if !(playtime >= 0.0) || !(median >= 0.0) {
        return Err(Error::Contract(format!(
            "playtime {playtime} and median {median} must be non-negative"
        )));
    }
    if median == 0.0 {
        return Ok(if playtime > 0.0 { 5 } else { 1 });
    }
    Ok(if playtime > median {
        5
    } else if playtime > 0.8 * median {
        4
    } else if playtime > 0.5 * median {
        3
    } else if playtime > 0.2 * median {
        2
    } else {
        1
    })
}

pub fn adjust_with_sentiment(rating: u8, class: Option<SentimentClass>) -> u8 {
    match class {
        Some(SentimentClass::Positive) => (rating + 1).min(5),
        Some(SentimentClass::Negative) => rating.saturating_sub(1).max(1),
        _ => rating,
    }
}

pub fn adjust_with_recommendation(rating: u8, recommended: Option<bool>) -> u8 {
    match recommended {
        Some(true) if rating <= 3 => (rating + 2).min(5),
        Some(false) if rating >= 4 => rating.saturating_sub(2).max(1),
        _ => rating,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub triples: Vec<RatingTriple>,
    /// Reviews whose (user, item) pair has no interaction.
    pub skipped_reviews: usize,
}

/// One rating per interaction, in table order.
pub fn derive(
    table: &InteractionTable,
    reviews: &[Review],
    lexicon: &Lexicon,
    strategy: Strategy,
) -> Result<Derived> {
    let medians = median_playtime(table);

    let mut by_pair: HashMap<(u32, u32), &Review> = HashMap::new();
    let mut skipped_reviews = 0;
    if strategy != Strategy::PlaytimeOnly {
        let index = table.index();
        for review in reviews {
            match (
                index.user_index(&review.user_id),
                index.item_index(review.item_id),
            ) {
                (Some(u), Some(i)) => {
                    by_pair.insert((u as u32, i as u32), review);
                }
                _ => skipped_reviews += 1,
            }
        }
        // Pairs where both ids are known but the user never owned the item.
        let owned: std::collections::HashSet<(u32, u32)> = table.keys().iter().copied().collect();
        let before = by_pair.len();
        by_pair.retain(|k, _| owned.contains(k));
        skipped_reviews += before - by_pair.len();
    }

    let triples = table
        .keys()
        .par_iter()
        .zip(table.interactions().par_iter())
        .map(|(&(u, i), interaction)| {
            let m = medians[&(i as usize)];
            let base = playtime_rating(interaction.playtime_forever, m)?;
            let review = by_pair.get(&(u, i));
            let rating = match strategy {
                Strategy::PlaytimeOnly => base,
                Strategy::PlaytimeSentiment => adjust_with_sentiment(
                    base,
                    review.map(|r| sentiment::analyze(&r.text, lexicon).class),
                ),
                Strategy::PlaytimeRecommend => {
                    adjust_with_recommendation(base, review.map(|r| r.recommended))
                }
            };
            Ok(RatingTriple {
                user_index: u,
                item_index: i,
                rating,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Derived {
        triples,
        skipped_reviews,
    })
}

pub const CSV_HEADER: &str = "user_index,item_index,rating";

pub fn write_csv<W: Write>(mut writer: W, triples: &[RatingTriple]) -> Result<()> {
    writeln!(writer, "{CSV_HEADER}")?;
    for t in triples {
        writeln!(writer, "{},{},{}", t.user_index, t.item_index, t.rating)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<RatingTriple>> {
    let mut out = Vec::new();
    for (n, raw) in reader.lines().enumerate() {
        let line = n + 1;
        let raw = raw?;
        let raw = raw.trim();
        if raw.is_empty() || (line == 1 && raw == CSV_HEADER) {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        let num = |k: usize, key: &str| {
            cols[k]
                .parse::<u32>()
                .map_err(|_| Error::field(line, key, format!("not an integer: {:?}", cols[k])))
        };
        let rating = num(2, "rating")?;
        if !(1..=5).contains(&rating) {
            return Err(Error::field(
                line,
                "rating",
                format!("{rating} outside 1..5"),
            ));
        }
        out.push(RatingTriple {
            user_index: num(0, "user_index")?,
            item_index: num(1, "item_index")?,
            rating: rating as u8,
        });
    }
    Ok(out)
}
