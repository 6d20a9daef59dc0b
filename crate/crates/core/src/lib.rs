//! Ingredient-driven recipe recommendation.
//!
//! The batch side turns a recipe corpus into serving artifacts:
//!
//! 1. [`corpus`] loads raw recipes (JSONL or CSV).
//! 2. [`textprep`] cleans ingredient lines into ingredient names.
//! 3. [`simcanon`] merges near-duplicate names into canonical ingredients.
//! 4. [`rulemine`] mines frequent itemsets (Apriori and FP-Growth) and rules.
//! 5. [`classify`] trains one multi-label classifier per taxonomy.
//!
//! [`pipeline`] runs those stages and writes a hashed artifact directory.
//! The query side ([`recommend`], [`ingnet`], [`api`]) answers requests
//! against a loaded [`pipeline::Bundle`].

pub mod api;
pub mod classify;
pub mod corpus;
pub mod ingnet;
pub mod pipeline;
pub mod recommend;
pub mod rulemine;
pub mod simcanon;
pub mod textprep;

pub use corpus::{Corpus, IngredientId, RawRecipe, Recipe, RecipeId, Taxonomy};
pub use simcanon::{IngredientLexicon, SimilarityMetric};
