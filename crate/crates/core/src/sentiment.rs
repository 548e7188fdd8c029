//! Lexicon-based review sentiment.
//!
//! A reduced valence-sum scorer: each lexicon hit contributes its valence,
//! shifted by any booster and flipped by any negation among the three
//! preceding tokens. The sum is squashed into (-1, 1) by `s / sqrt(s² + 15)`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Review;

/// Normalization constant of the compound score.
pub const ALPHA: f64 = 15.0;
/// Multiplier applied to a valence inside a negation's scope.
pub const NEGATION_SCALAR: f64 = -0.74;
/// How many preceding tokens a negation or booster reaches.
pub const SCOPE: usize = 3;
pub const POSITIVE_THRESHOLD: f64 = 0.05;
pub const NEGATIVE_THRESHOLD: f64 = -0.05;

const BUNDLED: &str = include_str!("../data/lexicon.tsv");

const NEGATIONS: &[&str] = &[
    "not", "no", "never", "nothing", "nowhere", "none", "nor", "neither", "without", "cannot",
    "cant", "dont", "doesnt", "didnt", "isnt", "wasnt", "arent", "werent", "wont", "wouldnt",
    "couldnt", "shouldnt", "aint", "hardly", "rarely", "seldom", "despite", "nope",
    // Halves of "don't", "isn't", ... after splitting on the apostrophe.
    "t", "don", "doesn", "didn", "isn", "wasn", "aren", "weren", "couldn", "wouldn", "shouldn",
];

const BOOST: f64 = 0.293;

const BOOSTERS: &[(&str, f64)] = &[
    ("absolutely", BOOST),
    ("amazingly", BOOST),
    ("completely", BOOST),
    ("deeply", BOOST),
    ("especially", BOOST),
    ("extremely", BOOST),
    ("highly", BOOST),
    ("hugely", BOOST),
    ("incredibly", BOOST),
    ("insanely", BOOST),
    ("most", BOOST),
    ("really", BOOST),
    ("so", BOOST),
    ("totally", BOOST),
    ("truly", BOOST),
    ("utterly", BOOST),
    ("very", BOOST),
    ("barely", -BOOST),
    ("kinda", -BOOST),
    ("marginally", -BOOST),
    ("slightly", -BOOST),
    ("somewhat", -BOOST),
    ("sorta", -BOOST),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    valences: HashMap<String, f64>,
    negations: HashSet<String>,
    boosters: HashMap<String, f64>,
}

impl Lexicon {
    /// The lexicon shipped with the crate plus the default negation and
    /// booster lists.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED.as_bytes()).expect("bundled lexicon is well-formed")
    }

    /// Reads `token<TAB>valence` lines; `#` lines and blank lines are skipped.
    /// Negations and boosters are the built-in defaults.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut valences = HashMap::new();
        for (n, raw) in reader.lines().enumerate() {
            let line = n + 1;
            let raw = raw?;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (token, value) = trimmed.split_once('\t').ok_or_else(|| Error::Parse {
                line,
                message: "expected `token<TAB>valence`".into(),
            })?;
            let token = token.trim().to_lowercase();
            if token.is_empty() || token.contains(char::is_whitespace) {
                return Err(Error::field(line, "token", "empty or contains whitespace"));
            }
            let valence: f64 = value
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    Error::field(line, "valence", format!("not a finite number: {value:?}"))
                })?;
            valences.insert(token, valence);
        }
        Ok(Self::from_valences(valences))
    }

    pub fn from_valences(valences: HashMap<String, f64>) -> Self {
        Lexicon {
            valences,
            negations: NEGATIONS.iter().map(|s| s.to_string()).collect(),
            boosters: BOOSTERS.iter().map(|&(s, v)| (s.to_string(), v)).collect(),
        }
    }

    pub fn with_negations(mut self, negations: impl IntoIterator<Item = String>) -> Self {
        self.negations = negations.into_iter().collect();
        self
    }

    pub fn with_boosters(mut self, boosters: impl IntoIterator<Item = (String, f64)>) -> Self {
        self.boosters = boosters.into_iter().collect();
        self
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SentimentClass {
    Positive,
    Neutral,
    Negative,
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentClass::Positive => "Positive",
            SentimentClass::Neutral => "Neutral",
            SentimentClass::Negative => "Negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub compound: f64,
    pub class: SentimentClass,
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sum of scope-adjusted valences before normalization.
pub fn valence_sum(text: &str, lexicon: &Lexicon) -> f64 {
    let tokens = tokenize(text);
    let mut sum = 0.0;
    for (pos, token) in tokens.iter().enumerate() {
        let Some(mut valence) = lexicon.valence(token) else {
            continue;
        };
        let scope = &tokens[pos.saturating_sub(SCOPE)..pos];
        for prior in scope {
            if let Some(&inc) = lexicon.boosters.get(prior.as_str()) {
                valence += inc * valence.signum();
            }
        }
        if scope.iter().any(|t| lexicon.negations.contains(t.as_str())) {
            valence *= NEGATION_SCALAR;
        }
        sum += valence;
    }
    sum
}

/// Maps a valence sum into (-1, 1).
pub fn normalize(sum: f64) -> f64 {
    if sum == 0.0 {
        return 0.0;
    }
    let compound = sum / (sum * sum + ALPHA).sqrt();
    compound.clamp(-1.0, 1.0)
}

/// Compound score of `text`; 0 when nothing matches.
pub fn score(text: &str, lexicon: &Lexicon) -> f64 {
    normalize(valence_sum(text, lexicon))
}

pub fn classify(compound: f64) -> Result<SentimentClass> {
    if !(-1.0..=1.0).contains(&compound) {
        return Err(Error::Contract(format!(
            "compound {compound} outside [-1, 1]"
        )));
    }
    Ok(if compound >= POSITIVE_THRESHOLD {
        SentimentClass::Positive
    } else if compound <= NEGATIVE_THRESHOLD {
        SentimentClass::Negative
    } else {
        SentimentClass::Neutral
    })
}

pub fn analyze(text: &str, lexicon: &Lexicon) -> SentimentResult {
    let compound = score(text, lexicon);
    let class = classify(compound).expect("normalize keeps compound in [-1, 1]");
    SentimentResult { compound, class }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.positive + self.neutral + self.negative
    }

    fn add(mut self, class: SentimentClass) -> Self {
        match class {
            SentimentClass::Positive => self.positive += 1,
            SentimentClass::Neutral => self.neutral += 1,
            SentimentClass::Negative => self.negative += 1,
        }
        self
    }

    fn merge(self, other: Self) -> Self {
        ClassCounts {
            positive: self.positive + other.positive,
            neutral: self.neutral + other.neutral,
            negative: self.negative + other.negative,
        }
    }
}

impl fmt::Display for ClassCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.total().max(1) as f64;
        writeln!(f, "class\tcount\tshare")?;
        for (name, n) in [
            ("Positive", self.positive),
            ("Neutral", self.neutral),
            ("Negative", self.negative),
        ] {
            writeln!(f, "{name}\t{n}\t{:.4}", n as f64 / total)?;
        }
        Ok(())
    }
}

pub fn class_counts(reviews: &[Review], lexicon: &Lexicon) -> ClassCounts {
    reviews
        .par_iter()
        .map(|r| ClassCounts::default().add(analyze(&r.text, lexicon).class))
        .reduce(ClassCounts::default, ClassCounts::merge)
}
