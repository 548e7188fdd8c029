//! Loading inputs and writing artifacts.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;
use steamrec_core::ingest::{self, parse_reviews, parse_user_items};
use steamrec_core::{FactorModel, Interaction, Lexicon, Review};

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

/// True when the first record of `path` is already flat (has `key` at the
/// top level) rather than a per-user record with an embedded list.
fn is_flat(path: &Path, key: &str) -> Result<bool> {
    for line in open(path)?.lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let normalized = ingest::normalize_literal(&line);
        return Ok(serde_json::from_str::<Value>(&normalized)
            .ok()
            .and_then(|v| v.get(key).cloned())
            .is_some());
    }
    Ok(false)
}

/// Reads either a raw user-items dump or a normalized `interactions.jsonl`.
pub fn load_interactions(path: &Path) -> Result<Vec<Interaction>> {
    let parsed = if is_flat(path, "item_id")? {
        ingest::read_jsonl(open(path)?)
    } else {
        parse_user_items(open(path)?)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

/// Reads either a raw user-reviews dump or a normalized `reviews.jsonl`.
pub fn load_reviews(path: &Path) -> Result<Vec<Review>> {
    let parsed = if is_flat(path, "item_id")? {
        ingest::read_jsonl(open(path)?)
    } else {
        parse_reviews(open(path)?)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

pub fn load_lexicon(path: Option<&Path>) -> Result<Lexicon> {
    match path {
        Some(p) => Lexicon::parse(open(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(Lexicon::bundled()),
    }
}

pub fn load_ratings(path: &Path) -> Result<Vec<steamrec_core::RatingTriple>> {
    steamrec_core::ratings::read_csv(open(path)?)
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<FactorModel> {
    FactorModel::read_from(open(path)?).with_context(|| format!("reading model {}", path.display()))
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes through `<path>.tmp` and renames on success, so `path` only ever
/// holds a complete artifact.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut w = BufWriter::new(
            File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?,
        );
        write(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        Ok(())
    })();
    match result {
        Ok(()) => fs::rename(&tmp, path)
            .with_context(|| format!("renaming {} to {}", tmp.display(), path.display())),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}
