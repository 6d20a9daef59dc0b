//! Rule-driven recipe recommendation.
//!
//! The user's ingredients form the base. Rules whose antecedent lies inside
//! the base contribute their consequents; every subset of those consequents
//! joined with the base is a combination. Recipes must contain the base and
//! none of the excluded ingredients, and rank higher the larger the
//! combination they contain.
//!
//! The ranking (matched combination size desc, ingredient count asc, title)
//! is this crate's own choice; it is not derived from any published rule.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::corpus::{Corpus, IngredientId, Recipe};
use crate::rulemine::AssociationRule;

pub const DEFAULT_MAX_RESULTS: usize = 20;
pub const DEFAULT_CONSEQUENT_CAP: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum RecommendError {
    #[error("query has no base ingredients")]
    EmptyBase,
    #[error("ingredients are both included and excluded: {0:?}")]
    Overlap(Vec<IngredientId>),
    #[error("unknown ingredient id {0}")]
    UnknownIngredient(IngredientId),
    #[error("max_results must be positive")]
    ZeroResults,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendQuery {
    pub include: BTreeSet<IngredientId>,
    pub exclude: BTreeSet<IngredientId>,
    pub max_results: usize,
    pub consequent_cap: usize,
}

impl RecommendQuery {
    pub fn new(include: impl IntoIterator<Item = IngredientId>) -> Self {
        Self {
            include: include.into_iter().collect(),
            exclude: BTreeSet::new(),
            max_results: DEFAULT_MAX_RESULTS,
            consequent_cap: DEFAULT_CONSEQUENT_CAP,
        }
    }

    pub fn excluding(mut self, exclude: impl IntoIterator<Item = IngredientId>) -> Self {
        self.exclude = exclude.into_iter().collect();
        self
    }

    pub fn with_max_results(mut self, n: usize) -> Self {
        self.max_results = n;
        self
    }

    pub fn validate(&self) -> Result<(), RecommendError> {
        if self.include.is_empty() {
            return Err(RecommendError::EmptyBase);
        }
        if self.max_results == 0 {
            return Err(RecommendError::ZeroResults);
        }
        let overlap: Vec<IngredientId> = self.include.intersection(&self.exclude).copied().collect();
        if !overlap.is_empty() {
            return Err(RecommendError::Overlap(overlap));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Combination {
    pub items: BTreeSet<IngredientId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation<'a> {
    pub recipe: &'a Recipe,
    pub matched_combination_size: usize,
    pub matched_consequents: BTreeSet<IngredientId>,
}

fn fires(rule: &AssociationRule, base: &BTreeSet<IngredientId>) -> bool {
    !rule.antecedent.is_empty() && rule.antecedent.iter().all(|i| base.contains(i))
}

/// Union of consequents of every rule whose antecedent lies inside `base`,
/// minus the base itself.
pub fn consequents_for(
    rules: &[AssociationRule],
    base: &BTreeSet<IngredientId>,
) -> BTreeSet<IngredientId> {
    rules
        .iter()
        .filter(|r| fires(r, base))
        .flat_map(|r| r.consequent.iter().copied())
        .filter(|i| !base.contains(i))
        .collect()
}

/// The same consequents ordered by the best confidence of any rule that
/// produced them (desc), ties by id.
pub fn ranked_consequents(
    rules: &[AssociationRule],
    base: &BTreeSet<IngredientId>,
) -> Vec<IngredientId> {
    // (support_count, antecedent_count) of the best rule per item
    let mut best: BTreeMap<IngredientId, (u64, u64)> = BTreeMap::new();
    for r in rules.iter().filter(|r| fires(r, base)) {
        for &c in r.consequent.iter().filter(|c| !base.contains(c)) {
            let cand = (r.support_count, r.antecedent_count);
            best.entry(c)
                .and_modify(|cur| {
                    if ratio_cmp(cand, *cur) == Ordering::Greater {
                        *cur = cand;
                    }
                })
                .or_insert(cand);
        }
    }
    let mut items: Vec<(IngredientId, (u64, u64))> = best.into_iter().collect();
    items.sort_by(|a, b| ratio_cmp(b.1, a.1).then(a.0.cmp(&b.0)));
    items.into_iter().map(|(i, _)| i).collect()
}

fn ratio_cmp(a: (u64, u64), b: (u64, u64)) -> Ordering {
    (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
}

/// Every subset of the first `cap` consequents joined with `base`, ordered
/// by subset size then lexicographically.
pub fn expand_combinations(
    base: &BTreeSet<IngredientId>,
    consequents: &[IngredientId],
    cap: usize,
) -> Vec<Combination> {
    let mut kept: Vec<IngredientId> = consequents.iter().take(cap).copied().collect();
    kept.sort();
    kept.dedup();
    let k = kept.len();
    let mut subsets: Vec<Vec<IngredientId>> = (0u64..(1u64 << k))
        .map(|mask| {
            (0..k)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| kept[b])
                .collect()
        })
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|s| Combination {
            items: base.iter().copied().chain(s).collect(),
        })
        .collect()
}

pub fn recommend<'a>(
    corpus: &'a Corpus,
    rules: &[AssociationRule],
    query: &RecommendQuery,
) -> Result<Vec<Recommendation<'a>>, RecommendError> {
    query.validate()?;
    let lexicon = corpus.lexicon();
    if let Some(&id) = query
        .include
        .iter()
        .chain(&query.exclude)
        .find(|id| lexicon.name(**id).is_none())
    {
        return Err(RecommendError::UnknownIngredient(id));
    }

    let expansion: BTreeSet<IngredientId> = ranked_consequents(rules, &query.include)
        .into_iter()
        .take(query.consequent_cap)
        .collect();

    let mut out: Vec<Recommendation<'a>> = corpus
        .recipes()
        .iter()
        .filter(|r| query.include.is_subset(&r.ingredient_ids))
        .filter(|r| r.ingredient_ids.is_disjoint(&query.exclude))
        .map(|r| {
            let matched: BTreeSet<IngredientId> =
                expansion.intersection(&r.ingredient_ids).copied().collect();
            Recommendation {
                recipe: r,
                matched_combination_size: query.include.len() + matched.len(),
                matched_consequents: matched,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.matched_combination_size
            .cmp(&a.matched_combination_size)
            .then(a.recipe.ingredient_ids.len().cmp(&b.recipe.ingredient_ids.len()))
            .then_with(|| a.recipe.title.cmp(&b.recipe.title))
            .then(a.recipe.id.cmp(&b.recipe.id))
    });
    out.truncate(query.max_results);
    Ok(out)
}
