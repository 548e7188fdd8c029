//! The end-to-end run: ingest, stats, derive, evaluate, train, recommend.
//!
//! Every artifact is written atomically and contains nothing that depends on
//! wall-clock time or thread count, so rerunning a config reproduces the
//! output directory byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;
use steamrec_core::ingest::{self, build_table, InteractionTable};
use steamrec_core::{als, eval, ratings, recommend, EvalReport, RatingTriple, Review};

use crate::config::RunConfig;
use crate::files::{self, write_atomic, write_text};

pub const INTERACTIONS: &str = "interactions.jsonl";
pub const REVIEWS: &str = "reviews.jsonl";
pub const STATS: &str = "stats.txt";
pub const RATINGS: &str = "ratings.csv";
pub const EVAL: &str = "eval.json";
pub const MODEL: &str = "model.bin";
pub const LOSS: &str = "loss.json";
pub const RECOMMENDATIONS: &str = "recommendations.json";
pub const SWEEP: &str = "sweep.csv";
pub const RUN: &str = "run.json";

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub interactions: usize,
    pub ratings: usize,
    pub skipped_reviews: usize,
    pub eval: EvalReport,
    pub sweep: Vec<EvalReport>,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn write_ratings(path: &Path, triples: &[RatingTriple]) -> Result<()> {
    write_atomic(path, |w| Ok(ratings::write_csv(w, triples)?))
}

pub fn write_model(path: &Path, model: &steamrec_core::FactorModel) -> Result<()> {
    write_atomic(path, |w| Ok(model.write_to(w)?))
}

pub fn write_recommendations(
    path: &Path,
    lists: &[steamrec_core::UserRecommendations],
) -> Result<()> {
    write_json(path, lists)
}

fn ingest_stage(cfg: &RunConfig) -> Result<(InteractionTable, Vec<Review>)> {
    let interactions = files::load_interactions(&cfg.items)?;
    let reviews = match &cfg.reviews {
        Some(p) => files::load_reviews(p)?,
        None => Vec::new(),
    };
    let table = build_table(interactions);
    info!(
        "ingested {} interactions ({} users, {} items), {} reviews",
        table.len(),
        table.n_users(),
        table.n_items(),
        reviews.len()
    );
    Ok((table, reviews))
}

/// Runs every stage in order, stopping at the first failure. The error names
/// the stage that failed.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Artifacts> {
    let out = |name: &str| cfg.out_dir.join(name);
    let mut written = Vec::new();

    let (table, reviews) = ingest_stage(cfg).context("stage ingest failed")?;
    (|| {
        write_atomic(&out(INTERACTIONS), |w| {
            Ok(ingest::write_jsonl(w, table.interactions())?)
        })?;
        write_atomic(&out(REVIEWS), |w| Ok(ingest::write_jsonl(w, &reviews)?))
    })()
    .context("stage ingest failed")?;
    written.extend([out(INTERACTIONS), out(REVIEWS)]);

    let lexicon = files::load_lexicon(cfg.lexicon.as_deref()).context("stage sentiment failed")?;

    let report = eval::stats(&table, &reviews, Some(&lexicon));
    write_text(&out(STATS), &report.to_string()).context("stage stats failed")?;
    written.push(out(STATS));

    let derived =
        ratings::derive(&table, &reviews, &lexicon, cfg.strategy).context("stage derive failed")?;
    write_ratings(&out(RATINGS), &derived.triples).context("stage derive failed")?;
    written.push(out(RATINGS));
    info!(
        "derived {} ratings with strategy {} ({} reviews unmatched)",
        derived.triples.len(),
        cfg.strategy,
        derived.skipped_reviews
    );

    let (n_users, n_items) = (table.n_users(), table.n_items());
    let report = eval::evaluate(&derived.triples, n_users, n_items, &cfg.train, &cfg.split)
        .context("stage evaluate failed")?
        .with_strategy(cfg.strategy);
    write_json(&out(EVAL), &report).context("stage evaluate failed")?;
    written.push(out(EVAL));
    info!(
        "held-out rmse {:.4} over {} ratings",
        report.rmse, report.evaluated
    );

    let sweep = if cfg.ranks.is_empty() {
        Vec::new()
    } else {
        let reports = eval::sweep(
            &derived.triples,
            n_users,
            n_items,
            &cfg.ranks,
            &cfg.train,
            &cfg.split,
        )
        .context("stage sweep failed")?;
        write_atomic(&out(SWEEP), |w| Ok(eval::write_sweep_csv(w, &reports)?))
            .context("stage sweep failed")?;
        written.push(out(SWEEP));
        reports
    };

    let (model, trace) =
        als::train(&derived.triples, n_users, n_items, &cfg.train).context("stage train failed")?;
    write_model(&out(MODEL), &model).context("stage train failed")?;
    write_json(&out(LOSS), &trace).context("stage train failed")?;
    written.extend([out(MODEL), out(LOSS)]);

    let users: Vec<String> = if cfg.users.is_empty() {
        (0..n_users)
            .filter_map(|u| table.index().user_id(u).map(str::to_string))
            .collect()
    } else {
        cfg.users.clone()
    };
    let lists = recommend::batch_recommend(&model, &table, &users, cfg.k, cfg.exclude_seen);
    write_recommendations(&out(RECOMMENDATIONS), &lists).context("stage recommend failed")?;
    written.push(out(RECOMMENDATIONS));

    write_json(&out(RUN), cfg).context("writing run record")?;
    written.push(out(RUN));

    Ok(Artifacts {
        out_dir: cfg.out_dir.clone(),
        files: written,
        interactions: table.len(),
        ratings: derived.triples.len(),
        skipped_reviews: derived.skipped_reviews,
        eval: report,
        sweep,
    })
}
