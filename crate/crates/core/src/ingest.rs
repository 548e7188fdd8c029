//! Readers for the user-items and user-reviews dumps.
//!
//! Both dumps hold one user per line with an embedded list (`items` or
//! `reviews`). Lines may be strict JSON or the Python `repr` form the
//! public dumps ship in; [`normalize_literal`] rewrites the latter into JSON
//! before parsing.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One owned game of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: u64,
    pub item_name: String,
    /// Minutes played since purchase.
    pub playtime_forever: f64,
    /// Minutes played during the last two weeks.
    pub playtime_2weeks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub user_id: String,
    pub item_id: u64,
    pub text: String,
    pub recommended: bool,
    pub funny: u64,
    pub helpful: u64,
    pub posted: String,
}

/// Rewrites a Python-literal line into strict JSON.
///
/// Single-quoted strings become double-quoted, and the bare words `True`,
/// `False` and `None` become `true`, `false` and `null` when they occur
/// outside a string. Strict JSON passes through unchanged apart from raw
/// control characters inside strings, which are escaped.
pub fn normalize_literal(line: &str) -> String {
    let mut out = String::with_capacity(line.len() + 8);
    let mut chars = line.chars().peekable();
    let mut quote: Option<char> = None;

    while let Some(c) = chars.next() {
        match quote {
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    out.push('"');
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut word = String::from(c);
                    while let Some(&n) = chars.peek() {
                        if n.is_ascii_alphanumeric() || n == '_' {
                            word.push(n);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    out.push_str(match word.as_str() {
                        "True" => "true",
                        "False" => "false",
                        "None" => "null",
                        other => other,
                    });
                }
                _ => out.push(c),
            },
            Some(q) => match c {
                '\\' => match chars.next() {
                    Some('\'') => out.push('\''),
                    Some('"') => out.push_str("\\\""),
                    Some(e @ ('\\' | '/' | 'b' | 'f' | 'n' | 'r' | 't' | 'u')) => {
                        out.push('\\');
                        out.push(e);
                    }
                    Some('x') => push_code_point(&mut out, &mut chars, 2),
                    Some('U') => push_code_point(&mut out, &mut chars, 8),
                    Some(other) => {
                        out.push_str("\\\\");
                        out.push(other);
                    }
                    None => out.push_str("\\\\"),
                },
                c if c == q => {
                    quote = None;
                    out.push('"');
                }
                '"' => out.push_str("\\\""),
                c if (c as u32) < 0x20 => push_escaped_control(&mut out, c),
                c => out.push(c),
            },
        }
    }
    out
}

fn push_code_point(
    out: &mut String,
    chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
    digits: usize,
) {
    let hex: String = chars.by_ref().take(digits).collect();
    match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
        Some(c) if (c as u32) < 0x20 => push_escaped_control(out, c),
        Some('"') => out.push_str("\\\""),
        Some('\\') => out.push_str("\\\\"),
        Some(c) => out.push(c),
        // Leave the escape literal; the JSON parser reports the position.
        None => {
            out.push_str("\\\\");
            out.push_str(if digits == 2 { "x" } else { "U" });
            out.push_str(&hex);
        }
    }
}

fn push_escaped_control(out: &mut String, c: char) {
    out.push_str(&format!("\\u{:04x}", c as u32));
}

fn parse_line(raw: &str, line: usize) -> Result<Map<String, Value>> {
    let normalized = normalize_literal(raw);
    match serde_json::from_str::<Value>(&normalized) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Error::Parse {
            line,
            message: "expected an object".into(),
        }),
        Err(e) => Err(Error::Parse {
            line,
            message: e.to_string(),
        }),
    }
}

fn user_id_of(record: &Map<String, Value>, line: usize) -> Result<String> {
    match record.get("user_id") {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(Error::field(line, "user_id", "expected a string")),
        None => Err(Error::field(line, "user_id", "missing")),
    }
}

fn item_id_of(entry: &Map<String, Value>, line: usize) -> Result<u64> {
    match entry.get("item_id") {
        Some(Value::String(s)) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::field(line, "item_id", format!("not an unsigned integer: {s:?}"))),
        Some(Value::Number(n)) => n
            .as_u64()
            .ok_or_else(|| Error::field(line, "item_id", format!("not an unsigned integer: {n}"))),
        Some(_) => Err(Error::field(line, "item_id", "expected an integer")),
        None => Err(Error::field(line, "item_id", "missing")),
    }
}

fn minutes_of(entry: &Map<String, Value>, key: &str, line: usize) -> Result<f64> {
    let value = match entry.get(key) {
        None | Some(Value::Null) => return Ok(0.0),
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        Some(_) => None,
    };
    match value {
        Some(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(Error::field(line, key, "expected a non-negative number")),
    }
}

fn string_of(entry: &Map<String, Value>, key: &str) -> String {
    match entry.get(key) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => String::new(),
    }
}

/// Reads vote counts such as `"15 of 20 people (75%) found this review
/// helpful"`: the first integer in the text, or 0 when there is none.
fn count_of(entry: &Map<String, Value>, key: &str) -> u64 {
    match entry.get(key) {
        Some(Value::Number(n)) => n.as_u64().unwrap_or(0),
        Some(Value::String(s)) => {
            let digits: String = s
                .chars()
                .skip_while(|c| !c.is_ascii_digit())
                .take_while(|c| c.is_ascii_digit() || *c == ',')
                .filter(char::is_ascii_digit)
                .collect();
            digits.parse().unwrap_or(0)
        }
        _ => 0,
    }
}

fn entries<'a>(
    record: &'a Map<String, Value>,
    key: &str,
    line: usize,
) -> Result<Vec<&'a Map<String, Value>>> {
    match record.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(list)) => list
            .iter()
            .map(|v| {
                v.as_object()
                    .ok_or_else(|| Error::field(line, key, "list entries must be objects"))
            })
            .collect(),
        Some(_) => Err(Error::field(line, key, "expected a list")),
    }
}

/// Flattens user-items lines into one [`Interaction`] per (user, item).
///
/// Repeated (user, item) pairs keep the entry with the largest
/// `playtime_forever`, at the position where the pair first appeared.
pub fn parse_user_items<R: BufRead>(reader: R) -> Result<Vec<Interaction>> {
    let mut out: Vec<Interaction> = Vec::new();
    let mut seen: HashMap<(String, u64), usize> = HashMap::new();

    for (n, raw) in reader.lines().enumerate() {
        let line = n + 1;
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(&raw, line)?;
        let user_id = user_id_of(&record, line)?;
        for entry in entries(&record, "items", line)? {
            let interaction = Interaction {
                user_id: user_id.clone(),
                item_id: item_id_of(entry, line)?,
                item_name: string_of(entry, "item_name"),
                playtime_forever: minutes_of(entry, "playtime_forever", line)?,
                playtime_2weeks: minutes_of(entry, "playtime_2weeks", line)?,
            };
            keep_max_playtime(&mut out, &mut seen, interaction);
        }
    }
    Ok(out)
}

fn keep_max_playtime(
    out: &mut Vec<Interaction>,
    seen: &mut HashMap<(String, u64), usize>,
    interaction: Interaction,
) {
    let key = (interaction.user_id.clone(), interaction.item_id);
    match seen.get(&key) {
        Some(&pos) => {
            if interaction.playtime_forever > out[pos].playtime_forever {
                out[pos] = interaction;
            }
        }
        None => {
            seen.insert(key, out.len());
            out.push(interaction);
        }
    }
}

/// Flattens user-reviews lines into one [`Review`] per (user, item).
///
/// A later review of the same pair replaces the earlier one in place.
pub fn parse_reviews<R: BufRead>(reader: R) -> Result<Vec<Review>> {
    let mut out: Vec<Review> = Vec::new();
    let mut seen: HashMap<(String, u64), usize> = HashMap::new();

    for (n, raw) in reader.lines().enumerate() {
        let line = n + 1;
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let record = parse_line(&raw, line)?;
        let user_id = user_id_of(&record, line)?;
        for entry in entries(&record, "reviews", line)? {
            let recommended = match entry.get("recommend") {
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(Error::field(line, "recommend", "expected a boolean")),
                None => return Err(Error::field(line, "recommend", "missing")),
            };
            let review = Review {
                user_id: user_id.clone(),
                item_id: item_id_of(entry, line)?,
                text: string_of(entry, "review"),
                recommended,
                funny: count_of(entry, "funny"),
                helpful: count_of(entry, "helpful"),
                posted: string_of(entry, "posted"),
            };
            let key = (review.user_id.clone(), review.item_id);
            match seen.get(&key) {
                Some(&pos) => out[pos] = review,
                None => {
                    seen.insert(key, out.len());
                    out.push(review);
                }
            }
        }
    }
    Ok(out)
}

/// Dense indices for user and item ids, assigned in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdIndex {
    users: Vec<String>,
    items: Vec<u64>,
    user_lookup: HashMap<String, usize>,
    item_lookup: HashMap<u64, usize>,
}

impl IdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_user(&mut self, id: &str) -> usize {
        if let Some(&k) = self.user_lookup.get(id) {
            return k;
        }
        let k = self.users.len();
        self.users.push(id.to_string());
        self.user_lookup.insert(id.to_string(), k);
        k
    }

    pub fn insert_item(&mut self, id: u64) -> usize {
        *self.item_lookup.entry(id).or_insert_with(|| {
            self.items.push(id);
            self.items.len() - 1
        })
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_lookup.get(id).copied()
    }

    pub fn item_index(&self, id: u64) -> Option<usize> {
        self.item_lookup.get(&id).copied()
    }

    pub fn user_id(&self, index: usize) -> Option<&str> {
        self.users.get(index).map(String::as_str)
    }

    pub fn item_id(&self, index: usize) -> Option<u64> {
        self.items.get(index).copied()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }
}

/// Interactions plus their index and adjacency lists.
///
/// Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct InteractionTable {
    interactions: Vec<Interaction>,
    index: IdIndex,
    /// (user index, item index) of each interaction, parallel to `interactions`.
    keys: Vec<(u32, u32)>,
    item_names: Vec<String>,
    by_item: Vec<Vec<(u32, f64)>>,
    by_user: Vec<Vec<(u32, f64)>>,
}

/// Indexes `interactions`. Duplicate (user, item) pairs are merged with the
/// same max-playtime rule as [`parse_user_items`].
pub fn build_table(interactions: Vec<Interaction>) -> InteractionTable {
    let mut unique = Vec::with_capacity(interactions.len());
    let mut seen = HashMap::with_capacity(interactions.len());
    for interaction in interactions {
        keep_max_playtime(&mut unique, &mut seen, interaction);
    }

    let mut index = IdIndex::new();
    let mut keys = Vec::with_capacity(unique.len());
    let mut item_names: Vec<String> = Vec::new();
    let mut by_item: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut by_user: Vec<Vec<(u32, f64)>> = Vec::new();

    for interaction in &unique {
        let u = index.insert_user(&interaction.user_id);
        let i = index.insert_item(interaction.item_id);
        if u == by_user.len() {
            by_user.push(Vec::new());
        }
        if i == by_item.len() {
            by_item.push(Vec::new());
            item_names.push(interaction.item_name.clone());
        } else if item_names[i].is_empty() {
            item_names[i] = interaction.item_name.clone();
        }
        by_user[u].push((i as u32, interaction.playtime_forever));
        by_item[i].push((u as u32, interaction.playtime_forever));
        keys.push((u as u32, i as u32));
    }

    InteractionTable {
        interactions: unique,
        index,
        keys,
        item_names,
        by_item,
        by_user,
    }
}

impl InteractionTable {
    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn index(&self) -> &IdIndex {
        &self.index
    }

    /// Dense (user, item) indices of each interaction, in table order.
    pub fn keys(&self) -> &[(u32, u32)] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.index.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.index.n_items()
    }

    pub fn item_name(&self, item_index: usize) -> Option<&str> {
        self.item_names.get(item_index).map(String::as_str)
    }

    /// (user index, playtime) pairs for one item.
    pub fn item_adjacency(&self, item_index: usize) -> &[(u32, f64)] {
        self.by_item.get(item_index).map_or(&[], Vec::as_slice)
    }

    /// (item index, playtime) pairs for one user.
    pub fn user_adjacency(&self, user_index: usize) -> &[(u32, f64)] {
        self.by_user.get(user_index).map_or(&[], Vec::as_slice)
    }

    /// Fraction of the user × item grid that is observed; 0 for an empty table.
    pub fn sparsity(&self) -> f64 {
        let cells = self.n_users() as f64 * self.n_items() as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.len() as f64 / cells
        }
    }
}

/// Writes one strict-JSON record per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, records: &[T]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads records written by [`write_jsonl`].
pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, raw) in reader.lines().enumerate() {
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
