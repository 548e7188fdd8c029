//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steamrec_core::als::{self, TrainConfig};
use steamrec_core::eval::{self, SplitConfig};
use steamrec_core::ingest::{self, build_table, Interaction, Review};
use steamrec_core::ratings::{
    self, adjust_with_recommendation, adjust_with_sentiment, playtime_rating,
};
use steamrec_core::sentiment::{self, Lexicon, SentimentClass};
use steamrec_core::{synthetic, RatingTriple, Strategy};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

// 1. Rating derivation

/// The rating bands written out literally.
fn band_oracle(p: f64, m: f64) -> u8 {
    if m == 0.0 {
        return if p > 0.0 { 5 } else { 1 };
    }
    if p > m {
        5
    } else if p > 0.8 * m {
        4
    } else if p > 0.5 * m {
        3
    } else if p > 0.2 * m {
        2
    } else {
        1
    }
}

fn rating_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for n in 0..1000 {
        let m = match n % 10 {
            0 => 0.0,
            _ => rng.random_range(1..5000) as f64,
        };
        let p = match n % 7 {
            // exact band edges
            0 => m * [0.2, 0.5, 0.8, 1.0][n % 4],
            1 => 0.0,
            _ => rng.random_range(0..8000) as f64,
        };
        if playtime_rating(p, m).map_err(|e| e.to_string())? != band_oracle(p, m) {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || {
        format!("{mismatches} of 1000 band mismatches")
    })?;

    let classes = [
        Some(SentimentClass::Positive),
        Some(SentimentClass::Neutral),
        Some(SentimentClass::Negative),
    ];
    let mut cells = 0;
    for r in 1..=5u8 {
        for (c, class) in classes.iter().enumerate() {
            for flag in [Some(true), Some(false), None] {
                let sentiment_expect = match c {
                    0 => (r + 1).min(5),
                    1 => r,
                    _ => (r - 1).max(1),
                };
                let recommend_expect = match flag {
                    Some(true) if r <= 3 => (r + 2).min(5),
                    Some(false) if r >= 4 => r - 2,
                    _ => r,
                };
                ensure(adjust_with_sentiment(r, *class) == sentiment_expect, || {
                    format!("sentiment adjust of {r} with {class:?}")
                })?;
                ensure(
                    adjust_with_recommendation(r, flag) == recommend_expect,
                    || format!("recommend adjust of {r} with {flag:?}"),
                )?;
                cells += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "1000 pairs, 0 mismatches; {cells} adjustment cells"
    ))
}

// 2. Monotone loss

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<RatingTriple>, usize, usize) {
    let users = rng.random_range(1..=50);
    let items = rng.random_range(1..=50);
    let density = rng.random_range(0.05..0.6);
    let mut data = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng.random_bool(density) {
                data.push(RatingTriple {
                    user_index: u as u32,
                    item_index: i as u32,
                    rating: rng.random_range(1..=5),
                });
            }
        }
    }
    if data.is_empty() {
        data.push(RatingTriple {
            user_index: 0,
            item_index: 0,
            rating: 3,
        });
    }
    (data, users, items)
}

fn monotone_loss() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut steps = 0;
    for case in 0..50 {
        let (data, users, items) = random_instance(&mut rng);
        let cfg = TrainConfig {
            rank: rng.random_range(1..=5),
            iterations: 10,
            lambda: rng.random_range(0.01..1.0),
            seed: case,
        };
        let (_, trace) = als::train(&data, users, items, &cfg).map_err(|e| e.to_string())?;
        let mut prev = trace.initial;
        for (step, &j) in trace.values.iter().enumerate() {
            ensure(j <= prev + 1e-9 * prev.abs(), || {
                format!("instance {case}, half-step {step}: {prev} -> {j}")
            })?;
            prev = j;
            steps += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("50 instances, {steps} half-steps non-increasing"))
}

// 3. Planted factors

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let data = synthetic::planted(200, 100, 3, 0.2, 3);
    let cfg = TrainConfig {
        rank: 3,
        iterations: 10,
        lambda: 0.01,
        seed: 42,
    };
    let (model, _) = als::train(&data.ratings, 200, 100, &cfg).map_err(|e| e.to_string())?;
    let sq: f64 = data
        .ratings
        .iter()
        .map(|&(u, i, r)| (model.predict(u as usize, i as usize).unwrap() - r).powi(2))
        .sum();
    let train_rmse = (sq / data.ratings.len() as f64).sqrt();
    ensure(train_rmse < 0.05, || format!("train rmse {train_rmse:.4}"))?;

    let reports = eval::sweep(
        &data.ratings,
        200,
        100,
        &[1, 3],
        &cfg,
        &SplitConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let (r1, r3) = (reports[0].rmse, reports[1].rmse);
    ensure(r3 < r1, || {
        format!("test rmse rank 3 {r3:.4} vs rank 1 {r1:.4}")
    })?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "train rmse {train_rmse:.4}; test rmse k=1 {r1:.4}, k=3 {r3:.4}"
    ))
}

// 4. Small-instance oracle

fn objective_direct(data: &[RatingTriple], x: &[f64], y: &[f64], lambda: f64) -> f64 {
    let mut n_u = vec![0.0; x.len()];
    let mut n_i = vec![0.0; y.len()];
    let mut j = 0.0;
    for t in data {
        let (u, i) = (t.user_index as usize, t.item_index as usize);
        j += (t.rating as f64 - x[u] * y[i]).powi(2);
        n_u[u] += 1.0;
        n_i[i] += 1.0;
    }
    j + lambda
        * (x.iter().zip(&n_u).map(|(v, n)| n * v * v).sum::<f64>()
            + y.iter().zip(&n_i).map(|(v, n)| n * v * v).sum::<f64>())
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            hi = b
        } else {
            lo = a
        }
    }
    (lo + hi) / 2.0
}

/// Cyclic derivative-free line search over every coordinate until the
/// objective stops moving, best of several random starts.
fn coordinate_descent(
    data: &[RatingTriple],
    users: usize,
    items: usize,
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let mut x: Vec<f64> = (0..users).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut y: Vec<f64> = (0..items).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut prev = f64::INFINITY;
        for _ in 0..2000 {
            for u in 0..users {
                x[u] = golden_section(
                    |v| {
                        let mut t = x.clone();
                        t[u] = v;
                        objective_direct(data, &t, &y, lambda)
                    },
                    -10.0,
                    10.0,
                );
            }
            for i in 0..items {
                y[i] = golden_section(
                    |v| {
                        let mut t = y.clone();
                        t[i] = v;
                        objective_direct(data, &x, &t, lambda)
                    },
                    -10.0,
                    10.0,
                );
            }
            let j = objective_direct(data, &x, &y, lambda);
            if prev - j < 1e-13 * prev.max(1e-300) {
                break;
            }
            prev = j;
        }
        best = best.min(objective_direct(data, &x, &y, lambda));
    }
    best
}

fn small_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let cases = 20;
    for case in 0..cases {
        let users = rng.random_range(1..=4);
        let items = rng.random_range(1..=4);
        let mut data = Vec::new();
        for u in 0..users {
            for i in 0..items {
                if u == i % users || i == u % items || rng.random_bool(0.6) {
                    data.push(RatingTriple {
                        user_index: u as u32,
                        item_index: i as u32,
                        rating: rng.random_range(1..=5),
                    });
                }
            }
        }
        let lambda = 0.1;
        let cfg = TrainConfig {
            rank: 1,
            iterations: 200,
            lambda,
            seed: case,
        };
        let (model, _) = als::train(&data, users, items, &cfg).map_err(|e| e.to_string())?;
        let j = objective_direct(&data, model.user_factors(), model.item_factors(), lambda);
        let oracle = coordinate_descent(&data, users, items, lambda, &mut rng);
        let rel = (j - oracle).abs() / oracle;
        ensure(rel <= 0.01, || {
            format!("case {case}: als {j} vs oracle {oracle}")
        })?;
        worst = worst.max(rel);
    }
    Ok(format!("{cases} instances, worst relative gap {worst:.2e}"))
}

// 5. Determinism of the binary

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_binary(out: &Path, workers: Option<usize>) -> Result<(), String> {
    let items = fixture("items_100.jsonl");
    let reviews = fixture("reviews_100.jsonl");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_steamrec"));
    if let Some(w) = workers {
        cmd.arg("--workers").arg(w.to_string());
    }
    let status = cmd
        .arg("pipeline")
        .arg("--items")
        .arg(&items)
        .arg("--reviews")
        .arg(&reviews)
        .arg("--out")
        .arg(out)
        .args(["--rank", "5", "--k", "5"])
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || {
        format!("pipeline exited with {status}")
    })
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("a", None), ("b", None), ("w1", Some(1)), ("w8", Some(8))];
    for (name, workers) in runs {
        run_binary(&dir.path().join(name), workers)?;
    }
    let records = fs::read_to_string(dir.path().join("a/interactions.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    for artifact in ["ratings.csv", "model.bin", "recommendations.json"] {
        let read =
            |run: &str| fs::read(dir.path().join(run).join(artifact)).map_err(|e| e.to_string());
        let base = read("a")?;
        for (run, _) in &runs[1..] {
            ensure(read(run)? == base, || {
                format!("{artifact} differs between a and {run}")
            })?;
        }
    }
    Ok(format!(
        "{records} records; ratings, model and top-5 identical over 4 runs (1 and 8 workers)"
    ))
}

// 6. Sentiment labels

const POSITIVE_EXCERPT: &str = "Simple yet great replayability In opinion zombie horde team work good leave 4 dead plus global leveling system Alot earth zombie splatter fun whole family Amazed sort FPS rare";
const NEUTRAL_EXCERPT: &str = "Do buy game nothing shadow could amazing gamelf wan na se could go http://www.buildandshoot.com/serverlist_page.php Thanks jagex ing";
const NEGATIVE_EXCERPT: &str = "RUBBISH GAME DO NOT PLAY EVEN IF IT IS FREEABSOLUTE UTTER I DINNAE KNOW WHY YOU WOULD PLAY THIS GAME WHEN ITS ESSENTIALLY JUSTAN UNREAL TOURNAMENTESQUE GAME WITH ALL THE FUN SPEED REMOVED AND ARBITRARY LIMITATIONS PLACED ON VISUAL CUSTOMISATION AND WEAPONS";

fn sentiment_labels() -> Outcome {
    let lexicon = Lexicon::bundled();
    let mut compounds = Vec::new();
    for (text, want) in [
        (POSITIVE_EXCERPT, SentimentClass::Positive),
        (NEUTRAL_EXCERPT, SentimentClass::Neutral),
        (NEGATIVE_EXCERPT, SentimentClass::Negative),
    ] {
        let got = sentiment::analyze(text, &lexicon);
        ensure(got.class == want, || {
            format!(
                "excerpt expected {want}, got {} ({:.4})",
                got.class, got.compound
            )
        })?;
        compounds.push(format!("{:.3}", got.compound));
    }
    for (c, want) in [
        (0.8402, SentimentClass::Positive),
        (0.0, SentimentClass::Neutral),
        (-0.3964, SentimentClass::Negative),
    ] {
        let got = sentiment::classify(c).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("compound {c} classified {got}"))?;
    }
    Ok(format!(
        "excerpts {} ; published compounds labeled",
        compounds.join(" / ")
    ))
}

// 7. Strategy sensitivity

struct Corpus {
    interactions: Vec<Interaction>,
    reviews: Vec<Review>,
}

/// Users and items carry hidden low-rank tastes. Playtime follows the taste
/// through noise larger than the signal; reviews state it plainly. With a
/// clean playtime signal the coarse sentiment step does not help.
fn hidden_preference_corpus(seed: u64) -> Corpus {
    let (users, items, rank) = (400, 60, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors =
        |n: usize| -> Vec<f64> { (0..n * rank).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let xu = factors(users);
    let yi = factors(items);
    let scale: Vec<f64> = (0..items)
        .map(|_| 10f64.powf(rng.random_range(1.0..3.5)))
        .collect();

    let mut interactions = Vec::new();
    let mut reviews = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if !rng.random_bool(0.25) {
                continue;
            }
            let taste: f64 = (0..rank).map(|k| xu[u * rank + k] * yi[i * rank + k]).sum();
            let noise: f64 = rng.random_range(-1.0..1.0);
            let playtime = (scale[i] * (1.5 * taste + 2.0 * noise).exp()).round();
            interactions.push(Interaction {
                user_id: format!("u{u}"),
                item_id: i as u64,
                item_name: format!("Game {i}"),
                playtime_forever: playtime,
                playtime_2weeks: 0.0,
            });
            if rng.random_bool(0.7) {
                let text = if taste > 0.15 {
                    "Great game, I love it. Amazing and fun."
                } else if taste < -0.15 {
                    "Terrible and boring. A waste of money, awful."
                } else {
                    "It is a game about trains."
                };
                reviews.push(Review {
                    user_id: format!("u{u}"),
                    item_id: i as u64,
                    text: text.into(),
                    recommended: false,
                    funny: 0,
                    helpful: 0,
                    posted: String::new(),
                });
            }
        }
    }
    Corpus {
        interactions,
        reviews,
    }
}

fn strategy_sensitivity() -> Outcome {
    let corpus = hidden_preference_corpus(7);
    let table = build_table(corpus.interactions);
    let lexicon = Lexicon::bundled();
    let cfg = TrainConfig {
        rank: 3,
        iterations: 15,
        lambda: 0.1,
        seed: 42,
    };
    let split = SplitConfig::default();
    let (n_u, n_i) = (table.n_users(), table.n_items());

    let score = |triples: &[RatingTriple]| -> Result<f64, String> {
        Ok(eval::evaluate(triples, n_u, n_i, &cfg, &split)
            .map_err(|e| e.to_string())?
            .rmse)
    };
    let derive = |reviews: &[Review], s: Strategy| -> Result<Vec<RatingTriple>, String> {
        Ok(ratings::derive(&table, reviews, &lexicon, s)
            .map_err(|e| e.to_string())?
            .triples)
    };

    let playtime = derive(&corpus.reviews, Strategy::PlaytimeOnly)?;
    let with_sentiment = derive(&corpus.reviews, Strategy::PlaytimeSentiment)?;
    let (rmse_p, rmse_s) = (score(&playtime)?, score(&with_sentiment)?);
    ensure(rmse_s <= rmse_p, || {
        format!("sentiment {rmse_s:.4} > playtime {rmse_p:.4}")
    })?;

    // Flags that agree with the playtime rating, with a few disagreements.
    let rating_of: HashMap<(u64, String), u8> = table
        .interactions()
        .iter()
        .zip(&playtime)
        .map(|(it, t)| ((it.item_id, it.user_id.clone()), t.rating))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut flips = 0;
    let flagged: Vec<Review> = corpus
        .reviews
        .iter()
        .map(|r| {
            let mut agree = rating_of[&(r.item_id, r.user_id.clone())] >= 4;
            if rng.random_bool(0.001) {
                agree = !agree;
                flips += 1;
            }
            Review {
                recommended: agree,
                ..r.clone()
            }
        })
        .collect();
    let rmse_r = score(&derive(&flagged, Strategy::PlaytimeRecommend)?)?;
    let delta = rmse_r - rmse_p;
    ensure(delta.abs() < 0.1, || {
        format!("recommend {rmse_r:.4} vs playtime {rmse_p:.4}")
    })?;

    Ok(format!(
        "rmse playtime {rmse_p:.4}, sentiment {rmse_s:.4}, recommend {rmse_r:.4} (|delta| {:.4}, {flips} flips of {})",
        delta.abs(),
        flagged.len()
    ))
}

// 8. Ingestion

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn read_items(path: &Path) -> Result<Vec<Interaction>, String> {
    let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ingest::parse_user_items(std::io::BufReader::new(file)).map_err(|e| e.to_string())
}

/// Where the full user-items dump may live.
fn full_data() -> Option<PathBuf> {
    let path = match std::env::var_os("STEAMREC_FULL_ITEMS") {
        Some(p) => PathBuf::from(p),
        None => {
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/australian_users_items.json")
        }
    };
    path.is_file().then_some(path)
}

fn ingestion() -> Outcome {
    let mixed = read_items(&core_fixture("items_mixed.jsonl"))?;
    let twin = read_items(&core_fixture("items_twin.jsonl"))?;
    let lines = fs::read_to_string(core_fixture("items_mixed.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    ensure(lines == 20, || format!("fixture has {lines} lines"))?;
    ensure(!mixed.is_empty() && mixed == twin, || {
        "mixed fixture differs from its twin".into()
    })?;

    let full = match full_data() {
        None => "full data absent, sparsity check skipped (set STEAMREC_FULL_ITEMS)".to_string(),
        Some(path) => {
            let table = build_table(read_items(&path)?);
            let s = table.sparsity();
            ensure((s - 0.0066).abs() <= 0.0005, || {
                format!("full-data sparsity {s:.5}")
            })?;
            format!("full-data sparsity {s:.5}")
        }
    };
    Ok(format!(
        "{lines} lines, {} records match twin; {full}",
        mixed.len()
    ))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("rating derivation oracle", rating_oracle),
        ("als loss monotone", monotone_loss),
        ("planted factor recovery", planted_recovery),
        ("small-instance oracle", small_oracle),
        ("pipeline determinism", determinism),
        ("sentiment labels", sentiment_labels),
        ("strategy sensitivity", strategy_sensitivity),
        ("ingestion", ingestion),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail} [{:.2?}]", n + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
