//! Collaborative filtering over Steam ownership data.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`ingest`] reads the raw user-items and user-reviews dumps (strict JSON or
//!   Python-literal lines) into indexed tables.
//! - [`sentiment`] scores review text against a valence lexicon.
//! - [`ratings`] turns playtime, sentiment and recommendation flags into 1..5 ratings.
//! - [`als`] fits user and item factor matrices with alternating least squares.
//! - [`eval`] splits ratings, measures RMSE and sweeps the latent rank.
//! - [`recommend`] ranks unseen items per user.

pub mod als;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod linalg;
pub mod ratings;
pub mod recommend;
pub mod sentiment;
pub mod synthetic;

pub use als::{FactorModel, LossTrace, TrainConfig};
pub use error::{Error, Result};
pub use eval::{EvalReport, SplitConfig, StatsReport};
pub use ingest::{IdIndex, Interaction, InteractionTable, Review};
pub use ratings::{RatingTriple, Strategy};
pub use recommend::{Recommendation, UserRecommendations};
pub use sentiment::{Lexicon, SentimentClass, SentimentResult};
