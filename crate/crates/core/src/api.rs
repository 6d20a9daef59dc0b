//! Request and response bodies shared by the HTTP service and the CLI's
//! `--json` output, plus the query functions that produce them from a
//! loaded [`Bundle`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::classify::{predict_multilabel, Classifier};
use crate::corpus::IngredientId;
use crate::ingnet::{build_graph, export_graph, NodeLinkGraph};
use crate::pipeline::Bundle;
use crate::recommend::{recommend, RecommendError, RecommendQuery, DEFAULT_MAX_RESULTS};
use crate::textprep::clean;

pub const PREFIX_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    UnknownIngredient,
    NotReady,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::BadRequest => 400,
            ErrorCode::UnknownIngredient => 422,
            ErrorCode::NotReady => 503,
            ErrorCode::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Map<String, Value>>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn with_detail(mut self, key: &str, value: Value) -> Self {
        self.details
            .get_or_insert_with(Map::new)
            .insert(key.to_string(), value);
        self
    }

    pub fn unknown_ingredients(unresolved: &[String]) -> Self {
        Self::new(
            ErrorCode::UnknownIngredient,
            "none of the given ingredients matched a known ingredient",
        )
        .with_detail("unresolved", json!(unresolved))
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ApiError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    pub ingredients: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_results: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IngredientRef {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendedRecipe {
    pub recipe_id: u32,
    pub title: String,
    /// Canonical ingredient names, sorted by id.
    pub ingredients: Vec<String>,
    pub matched_combination_size: usize,
    pub matched_consequents: Vec<String>,
    pub labels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendResponse {
    /// Resolved query base.
    pub base: Vec<IngredientRef>,
    pub excluded: Vec<IngredientRef>,
    pub recommendations: Vec<RecommendedRecipe>,
    pub network: NodeLinkGraph,
    pub unresolved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub ingredients: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyPrediction {
    pub probabilities: BTreeMap<String, f64>,
    pub assigned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub ingredients: Vec<IngredientRef>,
    pub per_taxonomy: BTreeMap<String, TaxonomyPrediction>,
    pub unresolved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngredientsResponse {
    pub matches: Vec<IngredientRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthStatus {
    Loading,
    Ready,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthCounts {
    pub recipes: usize,
    pub rules: usize,
    pub ingredients: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: HealthStatus,
    pub artifact_manifest_hash: Option<String>,
    pub counts: Option<HealthCounts>,
}

impl HealthResponse {
    pub fn loading() -> Self {
        Self {
            status: HealthStatus::Loading,
            artifact_manifest_hash: None,
            counts: None,
        }
    }

    pub fn ready(bundle: &Bundle) -> Self {
        Self {
            status: HealthStatus::Ready,
            artifact_manifest_hash: Some(bundle.manifest_hash.clone()),
            counts: Some(HealthCounts {
                recipes: bundle.corpus.len(),
                rules: bundle.rules.len(),
                ingredients: bundle.lexicon().len(),
            }),
        }
    }
}

/// Outcome of cleaning and resolving a list of raw ingredient strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    pub ids: BTreeSet<IngredientId>,
    pub unresolved: Vec<String>,
}

pub fn resolve_raw(bundle: &Bundle, raw: &[String]) -> Resolution {
    let mut out = Resolution::default();
    for s in raw {
        match clean(s, &bundle.prep).and_then(|c| bundle.lexicon().resolve(c.as_str())) {
            Some(id) => {
                out.ids.insert(id);
            }
            None => {
                if !out.unresolved.contains(s) {
                    out.unresolved.push(s.clone());
                }
            }
        }
    }
    out
}

fn refs(bundle: &Bundle, ids: &BTreeSet<IngredientId>) -> Vec<IngredientRef> {
    ids.iter()
        .map(|&id| IngredientRef {
            id: id.0,
            name: bundle.lexicon().name(id).unwrap_or_default().to_string(),
        })
        .collect()
}

fn names(bundle: &Bundle, ids: impl IntoIterator<Item = IngredientId>) -> Vec<String> {
    ids.into_iter()
        .filter_map(|id| bundle.lexicon().name(id))
        .map(str::to_string)
        .collect()
}

pub fn recommend_raw(bundle: &Bundle, req: &RecommendRequest) -> Result<RecommendResponse, ApiError> {
    if req.ingredients.is_empty() {
        return Err(ApiError::bad_request("`ingredients` must not be empty"));
    }
    let include = resolve_raw(bundle, &req.ingredients);
    if include.ids.is_empty() {
        return Err(ApiError::unknown_ingredients(&include.unresolved));
    }
    let exclude = resolve_raw(bundle, &req.exclude);
    let mut unresolved = include.unresolved.clone();
    for s in exclude.unresolved {
        if !unresolved.contains(&s) {
            unresolved.push(s);
        }
    }
    let query = RecommendQuery::new(include.ids.iter().copied())
        .excluding(exclude.ids.iter().copied())
        .with_max_results(req.max_results.unwrap_or(DEFAULT_MAX_RESULTS));
    let recs = recommend(&bundle.corpus, &bundle.rules, &query).map_err(|e| match e {
        RecommendError::Overlap(ids) => ApiError::bad_request("ingredients are both included and excluded")
            .with_detail("overlap", json!(names(bundle, ids))),
        RecommendError::ZeroResults => ApiError::bad_request("`max_results` must be positive"),
        other => ApiError::new(ErrorCode::Internal, other.to_string()),
    })?;
    let graph = build_graph(&recs, &query.include, bundle.lexicon(), 1);
    let recommendations = recs
        .iter()
        .map(|r| RecommendedRecipe {
            recipe_id: r.recipe.id.0,
            title: r.recipe.title.clone(),
            ingredients: bundle.corpus.ingredient_names(r.recipe),
            matched_combination_size: r.matched_combination_size,
            matched_consequents: names(bundle, r.matched_consequents.iter().copied()),
            labels: r.recipe.labels.clone(),
        })
        .collect();
    Ok(RecommendResponse {
        base: refs(bundle, &query.include),
        excluded: refs(bundle, &query.exclude),
        recommendations,
        network: export_graph(&graph),
        unresolved,
    })
}

/// Runs every taxonomy's SGD model on the resolved ingredient set.
pub fn classify_raw(bundle: &Bundle, req: &ClassifyRequest) -> Result<ClassifyResponse, ApiError> {
    let res = resolve_raw(bundle, &req.ingredients);
    if res.ids.is_empty() {
        return Err(ApiError::bad_request("no ingredient resolved to a known ingredient")
            .with_detail("unresolved", json!(res.unresolved)));
    }
    let ingredient_names = names(bundle, res.ids.iter().copied());
    let per_taxonomy = bundle
        .sgd
        .iter()
        .map(|(t, model)| {
            let r = predict_multilabel(
                model as &dyn Classifier,
                ingredient_names.iter().map(String::as_str),
                bundle.threshold(),
            );
            (
                t.clone(),
                TaxonomyPrediction {
                    probabilities: r.per_class_probability,
                    assigned: r.assigned,
                },
            )
        })
        .collect();
    Ok(ClassifyResponse {
        ingredients: refs(bundle, &res.ids),
        per_taxonomy,
        unresolved: res.unresolved,
    })
}

/// Canonical names starting with the cleaned prefix, sorted, at most
/// [`PREFIX_LIMIT`]. A blank prefix lists the first names.
pub fn ingredients_by_prefix(bundle: &Bundle, prefix: &str) -> IngredientsResponse {
    let cleaned = if prefix.trim().is_empty() {
        String::new()
    } else {
        match clean(prefix, &bundle.prep) {
            Some(c) => c.as_str().to_string(),
            None => return IngredientsResponse { matches: Vec::new() },
        }
    };
    let mut matches: Vec<IngredientRef> = bundle
        .lexicon()
        .canon
        .iter()
        .filter(|(_, name)| name.starts_with(&cleaned))
        .map(|(id, name)| IngredientRef {
            id: id.0,
            name: name.clone(),
        })
        .collect();
    matches.sort_by(|a, b| a.name.cmp(&b.name));
    matches.truncate(PREFIX_LIMIT);
    IngredientsResponse { matches }
}
