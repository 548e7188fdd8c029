use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use steamrec_cli::config::{Overrides, RunConfig};
use steamrec_cli::files::{self, write_atomic};
use steamrec_cli::pipeline::{self, run_pipeline};
use steamrec_core::ingest::{self, build_table};
use steamrec_core::{
    als, eval, recommend, sentiment, RatingTriple, SplitConfig, Strategy, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "steamrec",
    version,
    about = "Playtime and review based game recommendations"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw dumps into interactions.jsonl and reviews.jsonl.
    Ingest {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        reviews: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset statistics.
    Stats {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        reviews: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Review sentiment.
    #[command(subcommand)]
    Sentiment(SentimentCommand),
    /// Turn interactions (and reviews) into a ratings CSV.
    Derive {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        reviews: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// playtime, sentiment or recommend
        #[arg(long)]
        strategy: Strategy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a factor model to a ratings CSV.
    Train {
        #[arg(long)]
        ratings: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hold-out RMSE as JSON.
    Evaluate {
        #[arg(long)]
        ratings: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Hold-out RMSE for several ranks on one split, as CSV.
    Sweep {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Top-K items for each user.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        users: Vec<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Keep items the user already owns.
        #[arg(long)]
        include_seen: bool,
        /// Print a plain table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Run every stage from a JSON config; flags override the file.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum SentimentCommand {
    /// Score one text.
    Score {
        #[arg(long)]
        text: String,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Class counts over a reviews file.
    Report {
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().rank)]
    rank: usize,
    #[arg(long, default_value_t = TrainConfig::default().iterations)]
    iters: usize,
    #[arg(long, default_value_t = TrainConfig::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            rank: self.rank,
            iterations: self.iters,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, visible_alias = "split", default_value_t = SplitConfig::default().train_fraction)]
    train_fraction: f64,
    /// Shuffle seed; defaults to --seed.
    #[arg(long)]
    split_seed: Option<u64>,
}

impl SplitArgs {
    fn config(&self, seed: u64) -> SplitConfig {
        SplitConfig {
            train_fraction: self.train_fraction,
            seed: self.split_seed.unwrap_or(seed),
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    items: Option<PathBuf>,
    #[arg(long)]
    reviews: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
}

impl PipelineArgs {
    fn overrides(self) -> Overrides {
        Overrides {
            items: self.items,
            reviews: self.reviews,
            lexicon: self.lexicon,
            out_dir: self.out,
            strategy: self.strategy,
            rank: self.rank,
            iterations: self.iters,
            lambda: self.lambda,
            seed: self.seed,
            train_fraction: self.train_fraction,
            split_seed: self.split_seed,
            k: self.k,
            users: self.users,
            ranks: self.ranks,
            include_seen: None,
            workers: None,
        }
    }
}

/// Ratings files carry indices only; the model size is one past the largest.
fn dimensions(ratings: &[RatingTriple]) -> (usize, usize) {
    ratings.iter().fold((0, 0), |(u, i), t| {
        (
            u.max(t.user_index as usize + 1),
            i.max(t.item_index as usize + 1),
        )
    })
}

fn print_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_table(items: &Path) -> Result<steamrec_core::InteractionTable> {
    Ok(build_table(files::load_interactions(items)?))
}

fn init_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            items,
            reviews,
            out,
        } => {
            let table = load_table(&items).context("stage ingest failed")?;
            let reviews = match reviews {
                Some(p) => files::load_reviews(&p).context("stage ingest failed")?,
                None => Vec::new(),
            };
            write_atomic(&out.join(pipeline::INTERACTIONS), |w| {
                Ok(ingest::write_jsonl(w, table.interactions())?)
            })
            .context("stage ingest failed")?;
            write_atomic(&out.join(pipeline::REVIEWS), |w| {
                Ok(ingest::write_jsonl(w, &reviews)?)
            })
            .context("stage ingest failed")?;
            info!(
                "wrote {} interactions and {} reviews",
                table.len(),
                reviews.len()
            );
        }
        Command::Stats {
            items,
            reviews,
            lexicon,
        } => {
            let table = load_table(&items).context("stage stats failed")?;
            let reviews = match reviews {
                Some(p) => files::load_reviews(&p).context("stage stats failed")?,
                None => Vec::new(),
            };
            let lexicon = files::load_lexicon(lexicon.as_deref())?;
            print!("{}", eval::stats(&table, &reviews, Some(&lexicon)));
        }
        Command::Sentiment(SentimentCommand::Score { text, lexicon }) => {
            let lexicon = files::load_lexicon(lexicon.as_deref())?;
            let result = sentiment::analyze(&text, &lexicon);
            println!("{:.4}\t{}", result.compound, result.class);
        }
        Command::Sentiment(SentimentCommand::Report { reviews, lexicon }) => {
            let lexicon = files::load_lexicon(lexicon.as_deref())?;
            let reviews = files::load_reviews(&reviews).context("stage sentiment failed")?;
            print!("{}", sentiment::class_counts(&reviews, &lexicon));
        }
        Command::Derive {
            items,
            reviews,
            lexicon,
            strategy,
            out,
        } => {
            let table = load_table(&items).context("stage derive failed")?;
            let reviews = match reviews {
                Some(p) => files::load_reviews(&p).context("stage derive failed")?,
                None if strategy != Strategy::PlaytimeOnly => {
                    bail!("strategy {strategy} needs --reviews")
                }
                None => Vec::new(),
            };
            let lexicon = files::load_lexicon(lexicon.as_deref())?;
            let derived = steamrec_core::ratings::derive(&table, &reviews, &lexicon, strategy)
                .context("stage derive failed")?;
            pipeline::write_ratings(&out, &derived.triples).context("stage derive failed")?;
            info!(
                "{} ratings, {} reviews unmatched",
                derived.triples.len(),
                derived.skipped_reviews
            );
        }
        Command::Train {
            ratings,
            train,
            out,
        } => {
            let triples = files::load_ratings(&ratings).context("stage train failed")?;
            let (u, i) = dimensions(&triples);
            let (model, trace) =
                als::train(&triples, u, i, &train.config()).context("stage train failed")?;
            pipeline::write_model(&out, &model).context("stage train failed")?;
            info!("final objective {:.6}", trace.last());
        }
        Command::Evaluate {
            ratings,
            train,
            split,
        } => {
            let triples = files::load_ratings(&ratings).context("stage evaluate failed")?;
            let (u, i) = dimensions(&triples);
            let cfg = train.config();
            let report = eval::evaluate(&triples, u, i, &cfg, &split.config(cfg.seed))
                .context("stage evaluate failed")?;
            print_json(&report)?;
        }
        Command::Sweep {
            ratings,
            ranks,
            train,
            split,
        } => {
            let triples = files::load_ratings(&ratings).context("stage sweep failed")?;
            let (u, i) = dimensions(&triples);
            let cfg = train.config();
            let reports = eval::sweep(&triples, u, i, &ranks, &cfg, &split.config(cfg.seed))
                .context("stage sweep failed")?;
            eval::write_sweep_csv(io::stdout().lock(), &reports)?;
        }
        Command::Recommend {
            model,
            items,
            users,
            k,
            include_seen,
            table,
        } => {
            let model = files::load_model(&model).context("stage recommend failed")?;
            let items_table = load_table(&items).context("stage recommend failed")?;
            if model.n_users() != items_table.n_users() || model.n_items() != items_table.n_items()
            {
                bail!(
                    "stage recommend failed: model is {}x{} but {} has {} users and {} items",
                    model.n_users(),
                    model.n_items(),
                    items.display(),
                    items_table.n_users(),
                    items_table.n_items()
                );
            }
            let lists = recommend::batch_recommend(&model, &items_table, &users, k, !include_seen);
            if table {
                print!("{}", recommend::format_table(&lists));
            } else {
                print_json(&lists)?;
            }
        }
        Command::Pipeline(args) => {
            let file = match &args.config {
                Some(p) => Overrides::from_file(p)?,
                None => Overrides::default(),
            };
            let cfg = RunConfig::resolve(args.overrides().over(file))?;
            let artifacts = run_pipeline(&cfg)?;
            info!(
                "wrote {} artifacts to {}",
                artifacts.files.len(),
                artifacts.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    // A config file may also ask for a worker count; the flag wins.
    let workers = cli.workers.or_else(|| match &cli.command {
        Command::Pipeline(PipelineArgs {
            config: Some(p), ..
        }) => Overrides::from_file(p).ok().and_then(|o| o.workers),
        _ => None,
    });
    let result = init_workers(workers).and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
