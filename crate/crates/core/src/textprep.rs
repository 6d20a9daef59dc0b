//! Ingredient line cleaning.
//!
//! A raw line such as `"2 cups all-purpose flour, sifted"` goes through:
//! lowercase, parenthetical removal, comma head segment, non-alphabetic
//! characters to spaces, tokenization, stopword/unit/short-token removal.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::RawRecipe;

const BUILTIN_STOPWORDS: &str = include_str!("../lexicons/stopwords.txt");
const BUILTIN_UNITS: &str = include_str!("../lexicons/units.txt");

pub fn builtin_stopwords_text() -> &'static str {
    BUILTIN_STOPWORDS
}

pub fn builtin_units_text() -> &'static str {
    BUILTIN_UNITS
}

/// Parses a lexicon file: one token per line, `#` starts a comment.
pub fn parse_lexicon(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

#[derive(Debug, Clone)]
pub struct PrepConfig {
    pub stopwords: HashSet<String>,
    pub units: HashSet<String>,
    pub min_token_len: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            stopwords: parse_lexicon(BUILTIN_STOPWORDS),
            units: parse_lexicon(BUILTIN_UNITS),
            min_token_len: 2,
        }
    }
}

impl PrepConfig {
    pub fn from_texts(stopwords: &str, units: &str, min_token_len: usize) -> Self {
        Self {
            stopwords: parse_lexicon(stopwords),
            units: parse_lexicon(units),
            min_token_len,
        }
    }

    pub fn from_files(stopwords: &Path, units: &Path, min_token_len: usize) -> std::io::Result<Self> {
        Ok(Self::from_texts(
            &std::fs::read_to_string(stopwords)?,
            &std::fs::read_to_string(units)?,
            min_token_len,
        ))
    }
}

/// A cleaned ingredient name: lowercase alphabetic tokens joined by single
/// spaces, never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CleanIngredient(String);

impl CleanIngredient {
    /// Wraps text that already satisfies the clean-form invariant.
    pub fn new(text: &str) -> Option<Self> {
        is_clean_form(text).then(|| Self(text.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ')
    }
}

impl fmt::Display for CleanIngredient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CleanIngredient {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if is_clean_form(&s) {
            Ok(Self(s))
        } else {
            Err(format!("`{s}` is not a clean ingredient"))
        }
    }
}

impl From<CleanIngredient> for String {
    fn from(c: CleanIngredient) -> Self {
        c.0
    }
}

impl AsRef<str> for CleanIngredient {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// True when `text` is non-empty, made of lowercase alphabetic tokens
/// separated by exactly one space.
pub fn is_clean_form(text: &str) -> bool {
    !text.is_empty()
        && text.split(' ').all(|tok| {
            !tok.is_empty()
                && tok
                    .chars()
                    .all(|c| c.is_alphabetic() && c.to_lowercase().eq(std::iter::once(c)))
        })
}

/// Keeps the text before the first comma; later segments hold preparation
/// notes. Returns no segment when the head is blank.
pub fn segment_ingredient_line(line: &str) -> Vec<String> {
    let head = line.split(',').next().unwrap_or("").trim();
    if head.is_empty() {
        Vec::new()
    } else {
        vec![head.to_string()]
    }
}

/// Removes every parenthesized span, including nested ones. An unmatched
/// `(` removes everything after it.
pub fn strip_parentheticals(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn keep_char(c: char) -> bool {
    // Lowercasing can yield characters with no lowercase-stable form; those
    // are treated like punctuation so the output stays in clean form.
    c.is_alphabetic() && c.to_lowercase().eq(std::iter::once(c))
}

pub fn clean(line: &str, cfg: &PrepConfig) -> Option<CleanIngredient> {
    let lowered = line.to_lowercase();
    let stripped = strip_parentheticals(&lowered);
    let head = segment_ingredient_line(&stripped).into_iter().next()?;
    let letters: String = head
        .chars()
        .map(|c| if keep_char(c) { c } else { ' ' })
        .collect();
    let tokens: Vec<&str> = letters
        .split_whitespace()
        .filter(|t| t.chars().count() >= cfg.min_token_len)
        .filter(|t| !cfg.stopwords.contains(*t) && !cfg.units.contains(*t))
        .collect();
    if tokens.is_empty() {
        None
    } else {
        Some(CleanIngredient(tokens.join(" ")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreppedRecipe {
    pub title: String,
    pub ingredients: Vec<CleanIngredient>,
    pub labels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Default)]
pub struct PrepOutput {
    pub recipes: Vec<PreppedRecipe>,
    /// Recipes removed because no ingredient line survived cleaning.
    pub dropped: usize,
}

pub fn prep_corpus(raw: &[RawRecipe], cfg: &PrepConfig) -> PrepOutput {
    let mut out = PrepOutput::default();
    for r in raw {
        let mut ingredients: Vec<CleanIngredient> = Vec::new();
        for line in &r.ingredients {
            if let Some(c) = clean(line, cfg) {
                if !ingredients.contains(&c) {
                    ingredients.push(c);
                }
            }
        }
        if ingredients.is_empty() {
            out.dropped += 1;
            continue;
        }
        out.recipes.push(PreppedRecipe {
            title: r.title.trim().to_string(),
            ingredients,
            labels: r.labels.clone(),
        });
    }
    out
}
