//! String similarity and ingredient canonicalization.
//!
//! Jaccard and cosine compare word tokens; Jaro-Winkler compares characters.
//! [`canonicalize`] unions every pair scoring at or above the threshold and
//! names each resulting cluster.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::IngredientId;
use crate::textprep::CleanIngredient;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Error, PartialEq)]
pub enum CanonError {
    #[error("similarity threshold {0} is outside (0, 1]")]
    Threshold(f64),
    #[error("unknown similarity metric `{0}`")]
    UnknownMetric(String),
    #[error("invalid lexicon: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMetric {
    JaccardTokens,
    #[default]
    CosineTokens,
    JaroWinkler,
}

impl SimilarityMetric {
    pub fn score(self, a: &str, b: &str) -> f64 {
        match self {
            SimilarityMetric::JaccardTokens => jaccard(a, b),
            SimilarityMetric::CosineTokens => cosine(a, b),
            SimilarityMetric::JaroWinkler => jaro_winkler(a, b),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMetric::JaccardTokens => "jaccard_tokens",
            SimilarityMetric::CosineTokens => "cosine_tokens",
            SimilarityMetric::JaroWinkler => "jaro_winkler",
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMetric {
    type Err = CanonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jaccard_tokens" | "jaccard" => Ok(Self::JaccardTokens),
            "cosine_tokens" | "cosine" => Ok(Self::CosineTokens),
            "jaro_winkler" | "jaro-winkler" => Ok(Self::JaroWinkler),
            other => Err(CanonError::UnknownMetric(other.to_string())),
        }
    }
}

/// Token-set Jaccard; two empty token sets score 1.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<&str> = a.split_whitespace().collect();
    let tb: BTreeSet<&str> = b.split_whitespace().collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

fn token_counts(s: &str) -> HashMap<&str, u32> {
    let mut m = HashMap::new();
    for t in s.split_whitespace() {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

/// Cosine of token-count vectors; 0 when either side has no tokens.
pub fn cosine(a: &str, b: &str) -> f64 {
    let va = token_counts(a);
    let vb = token_counts(b);
    if va.is_empty() || vb.is_empty() {
        return 0.0;
    }
    let dot: u64 = va
        .iter()
        .filter_map(|(t, &x)| vb.get(t).map(|&y| x as u64 * y as u64))
        .sum();
    let na: u64 = va.values().map(|&x| x as u64 * x as u64).sum();
    let nb: u64 = vb.values().map(|&x| x as u64 * x as u64).sum();
    if dot == 0 {
        return 0.0;
    }
    if na == nb && dot == na {
        return 1.0;
    }
    // one square root of the exact integer product keeps perfect squares exact
    (dot as f64 / ((na * nb) as f64).sqrt()).min(1.0)
}

/// Jaro similarity over characters.
pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut a_matched = vec![false; a.len()];
    let mut b_matched = vec![false; b.len()];
    let mut matches = 0usize;
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_matched[j] && b[j] == ca {
                a_matched[i] = true;
                b_matched[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if matches == 0 {
        return 0.0;
    }
    let a_seq = a.iter().zip(&a_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let b_seq = b.iter().zip(&b_matched).filter(|(_, &m)| m).map(|(c, _)| c);
    let half_transpositions = a_seq.zip(b_seq).filter(|(x, y)| x != y).count();
    let m = matches as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler with prefix scale 0.1 and the prefix capped at 4 characters.
pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let j = jaro(a, b);
    let prefix = a
        .chars()
        .zip(b.chars())
        .take(4)
        .take_while(|(x, y)| x == y)
        .count();
    (j + prefix as f64 * 0.1 * (1.0 - j)).min(1.0)
}

/// Bidirectional map between clean ingredient texts and canonical ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngredientLexicon {
    pub canon: BTreeMap<IngredientId, String>,
    pub alias: BTreeMap<String, IngredientId>,
    #[serde(default)]
    pub metric: SimilarityMetric,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl IngredientLexicon {
    pub fn name(&self, id: IngredientId) -> Option<&str> {
        self.canon.get(&id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.canon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canon.is_empty()
    }

    /// Exact alias lookup, falling back to the best-scoring known alias
    /// (canonical names included) when it clears the lexicon threshold.
    pub fn resolve(&self, text: &str) -> Option<IngredientId> {
        if let Some(id) = self.alias.get(text) {
            return Some(*id);
        }
        let mut best: Option<(f64, IngredientId)> = None;
        for (alias, id) in &self.alias {
            let s = self.metric.score(text, alias);
            if s >= self.threshold && best.is_none_or(|(b, _)| s > b) {
                best = Some((s, *id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Checks the structural invariants: alias targets exist, every
    /// canonical name aliases to its own id.
    pub fn validate(&self) -> Result<(), CanonError> {
        for (text, id) in &self.alias {
            if !self.canon.contains_key(id) {
                return Err(CanonError::Invalid(format!(
                    "alias `{text}` points at missing id {id}"
                )));
            }
        }
        for (id, name) in &self.canon {
            if self.alias.get(name) != Some(id) {
                return Err(CanonError::Invalid(format!(
                    "canonical name `{name}` does not alias to its own id {id}"
                )));
            }
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(CanonError::Threshold(self.threshold));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicon serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CanonError> {
        let lex: Self =
            serde_json::from_str(text).map_err(|e| CanonError::Invalid(e.to_string()))?;
        lex.validate()?;
        Ok(lex)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins so roots are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Clusters ingredients with equal weight per member.
pub fn canonicalize(
    ingredients: &[CleanIngredient],
    metric: SimilarityMetric,
    threshold: f64,
) -> Result<IngredientLexicon, CanonError> {
    let weighted: Vec<(CleanIngredient, usize)> =
        ingredients.iter().map(|c| (c.clone(), 1)).collect();
    canonicalize_weighted(&weighted, metric, threshold)
}

/// Clusters ingredients, using `count` (corpus frequency) to pick each
/// cluster's naming member. Repeated texts have their counts summed.
pub fn canonicalize_weighted(
    ingredients: &[(CleanIngredient, usize)],
    metric: SimilarityMetric,
    threshold: f64,
) -> Result<IngredientLexicon, CanonError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CanonError::Threshold(threshold));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (c, n) in ingredients {
        *counts.entry(c.as_str()).or_insert(0) += n;
    }
    let texts: Vec<&str> = counts.keys().copied().collect();

    let mut uf = UnionFind::new(texts.len());
    for i in 0..texts.len() {
        for j in (i + 1)..texts.len() {
            if metric.score(texts[i], texts[j]) >= threshold {
                uf.union(i, j);
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..texts.len() {
        clusters.entry(uf.find(i)).or_default().push(i);
    }

    // Clusters are keyed by their smallest member, so iteration is ordered by
    // the lexicographically first member text.
    let members: Vec<Vec<&str>> = clusters
        .values()
        .map(|idx| idx.iter().map(|&i| texts[i]).collect())
        .collect();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut names: Vec<String> = Vec::with_capacity(members.len());
    for group in &members {
        let head = most_frequent(group, &counts);
        let common = common_tokens(head, group);
        let name = match common {
            Some(derived)
                if group.contains(&derived.as_str())
                    || (!counts.contains_key(derived.as_str()) && !taken.contains(&derived)) =>
            {
                derived
            }
            _ => head.to_string(),
        };
        taken.insert(name.clone());
        names.push(name);
    }

    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let mut canon = BTreeMap::new();
    let mut alias = BTreeMap::new();
    for (rank, &ci) in order.iter().enumerate() {
        let id = IngredientId(rank as u32);
        canon.insert(id, names[ci].clone());
        alias.insert(names[ci].clone(), id);
        for m in &members[ci] {
            alias.insert(m.to_string(), id);
        }
    }
    Ok(IngredientLexicon {
        canon,
        alias,
        metric,
        threshold,
    })
}

fn most_frequent<'a>(group: &[&'a str], counts: &BTreeMap<&str, usize>) -> &'a str {
    // `group` is sorted ascending, so the first maximum is the lexicographic
    // tie-break.
    let mut best = group[0];
    for &m in &group[1..] {
        if counts[m] > counts[best] {
            best = m;
        }
    }
    best
}

/// Tokens of `head` that occur in every member, in `head`'s order.
fn common_tokens(head: &str, group: &[&str]) -> Option<String> {
    let sets: Vec<BTreeSet<&str>> = group.iter().map(|m| m.split(' ').collect()).collect();
    let kept: Vec<&str> = head
        .split(' ')
        .filter(|t| sets.iter().all(|s| s.contains(t)))
        .collect();
    if kept.is_empty() {
        None
    } else {
        Some(kept.join(" "))
    }
}
