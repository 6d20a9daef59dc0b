//! Recipe data model and corpus ingestion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcanon::IngredientLexicon;

/// Taxonomies used when a corpus does not configure its own.
pub const DEFAULT_TAXONOMIES: [&str; 3] = ["cuisines", "dietary", "course"];

/// Canonical ingredient identifier, assigned by [`crate::simcanon::canonicalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IngredientId(pub u32);

impl fmt::Display for IngredientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecipeId(pub u32);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("record {record}: {reason}")]
    Malformed { record: usize, reason: String },
    #[error("record {record}: unknown taxonomy label key `{key}`")]
    UnknownTaxonomy { record: usize, key: String },
    #[error("unsupported corpus format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("invalid corpus: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// A recipe as it appears on disk, before any cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecipe {
    pub title: String,
    pub ingredients: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
}

impl RawRecipe {
    fn validate(&self, record: usize, taxonomies: &[String]) -> Result<(), CorpusError> {
        if self.title.trim().is_empty() {
            return Err(CorpusError::Malformed {
                record,
                reason: "title is empty".into(),
            });
        }
        if self.ingredients.is_empty() {
            return Err(CorpusError::Malformed {
                record,
                reason: "ingredient list is empty".into(),
            });
        }
        for key in self.labels.keys() {
            if !taxonomies.iter().any(|t| t == key) {
                return Err(CorpusError::UnknownTaxonomy {
                    record,
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Reads a corpus file. `taxonomies` lists the accepted label keys.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    taxonomies: &[String],
) -> Result<Vec<RawRecipe>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), taxonomies),
        CorpusFormat::Csv => read_csv(file, taxonomies),
    }
}

/// Parses JSONL; blank lines are skipped, records are numbered by line.
pub fn read_jsonl<R: BufRead>(
    reader: R,
    taxonomies: &[String],
) -> Result<Vec<RawRecipe>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let record = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            record,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let recipe: RawRecipe =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                record,
                reason: e.to_string(),
            })?;
        recipe.validate(record, taxonomies)?;
        out.push(recipe);
    }
    Ok(out)
}

fn split_pipes(field: &str) -> Vec<String> {
    field
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses CSV with columns `title`, `ingredients`, then one column per
/// taxonomy. List-valued cells are pipe-separated.
pub fn read_csv<R: Read>(reader: R, taxonomies: &[String]) -> Result<Vec<RawRecipe>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Malformed {
            record: 1,
            reason: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (title_col, ingredients_col) = match (col("title"), col("ingredients")) {
        (Some(t), Some(i)) => (t, i),
        _ => {
            return Err(CorpusError::Malformed {
                record: 1,
                reason: "header must contain `title` and `ingredients` columns".into(),
            })
        }
    };
    let mut label_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == title_col || i == ingredients_col {
            continue;
        }
        let key = h.trim().to_string();
        if !taxonomies.contains(&key) {
            return Err(CorpusError::UnknownTaxonomy { record: 1, key });
        }
        label_cols.push((i, key));
    }

    let mut out = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        // header is record 1
        let record = idx + 2;
        let row = row.map_err(|e| CorpusError::Malformed {
            record,
            reason: e.to_string(),
        })?;
        let mut labels = BTreeMap::new();
        for (i, key) in &label_cols {
            let classes = split_pipes(row.get(*i).unwrap_or(""));
            if !classes.is_empty() {
                labels.insert(key.clone(), classes);
            }
        }
        let recipe = RawRecipe {
            title: row.get(title_col).unwrap_or("").to_string(),
            ingredients: split_pipes(row.get(ingredients_col).unwrap_or("")),
            labels,
        };
        recipe.validate(record, taxonomies)?;
        out.push(recipe);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut w: W, recipes: &[RawRecipe]) -> std::io::Result<()> {
    for r in recipes {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(w: W, recipes: &[RawRecipe], taxonomies: &[String]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["title".to_string(), "ingredients".to_string()];
    header.extend(taxonomies.iter().cloned());
    wtr.write_record(&header)?;
    for r in recipes {
        let mut row = vec![r.title.clone(), r.ingredients.join("|")];
        for t in taxonomies {
            row.push(r.labels.get(t).map(|v| v.join("|")).unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// A labeling dimension and its classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub name: String,
    pub classes: Vec<String>,
}

/// A cleaned, canonicalized recipe.
///
/// Labels keep their listed order per taxonomy; the first one is the
/// recipe's primary label for single-label evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: RecipeId,
    pub title: String,
    pub ingredient_ids: BTreeSet<IngredientId>,
    pub labels: BTreeMap<String, Vec<String>>,
}

impl Recipe {
    pub fn primary_label(&self, taxonomy: &str) -> Option<&str> {
        self.labels
            .get(taxonomy)
            .and_then(|v| v.first())
            .map(String::as_str)
    }

    pub fn has_label(&self, taxonomy: &str, class: &str) -> bool {
        self.labels
            .get(taxonomy)
            .is_some_and(|v| v.iter().any(|c| c == class))
    }
}

/// Drops repeated (title, ingredient set) pairs, keeping the first
/// occurrence and folding the repeats' labels into it.
pub fn dedup_recipes(recipes: Vec<Recipe>) -> Vec<Recipe> {
    let mut seen: HashMap<(String, BTreeSet<IngredientId>), usize> = HashMap::new();
    let mut out: Vec<Recipe> = Vec::with_capacity(recipes.len());
    for r in recipes {
        let key = (r.title.clone(), r.ingredient_ids.clone());
        match seen.get(&key) {
            Some(&idx) => {
                let kept = &mut out[idx];
                for (taxonomy, classes) in r.labels {
                    let slot = kept.labels.entry(taxonomy).or_default();
                    for c in classes {
                        if !slot.contains(&c) {
                            slot.push(c);
                        }
                    }
                }
            }
            None => {
                seen.insert(key, out.len());
                out.push(r);
            }
        }
    }
    out
}

/// An immutable, validated recipe collection.
#[derive(Debug, Clone)]
pub struct Corpus {
    recipes: Vec<Recipe>,
    lexicon: IngredientLexicon,
    taxonomies: Vec<Taxonomy>,
}

impl Corpus {
    /// Builds a corpus, deriving each taxonomy's class roster (sorted) from
    /// the recipes' labels. Recipe ids are reassigned to list positions.
    pub fn new(
        recipes: Vec<Recipe>,
        lexicon: IngredientLexicon,
        taxonomy_names: &[String],
    ) -> Result<Self, CorpusError> {
        let mut classes: BTreeMap<&str, BTreeSet<String>> = taxonomy_names
            .iter()
            .map(|t| (t.as_str(), BTreeSet::new()))
            .collect();
        let mut seen = BTreeSet::new();
        for r in &recipes {
            if r.ingredient_ids.is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "recipe `{}` has no ingredients",
                    r.title
                )));
            }
            if !seen.insert((r.title.as_str(), &r.ingredient_ids)) {
                return Err(CorpusError::Invalid(format!(
                    "duplicate recipe `{}`",
                    r.title
                )));
            }
            if let Some(id) = r.ingredient_ids.iter().find(|id| lexicon.name(**id).is_none()) {
                return Err(CorpusError::Invalid(format!(
                    "recipe `{}` references ingredient {id} missing from the lexicon",
                    r.title
                )));
            }
            for (t, cs) in &r.labels {
                let slot = classes.get_mut(t.as_str()).ok_or_else(|| {
                    CorpusError::Invalid(format!("unknown taxonomy `{t}` on `{}`", r.title))
                })?;
                for c in cs {
                    if c.trim().is_empty() {
                        return Err(CorpusError::Invalid(format!(
                            "empty class name on `{}`",
                            r.title
                        )));
                    }
                    slot.insert(c.clone());
                }
            }
        }
        let taxonomies = taxonomy_names
            .iter()
            .map(|name| Taxonomy {
                name: name.clone(),
                classes: classes[name.as_str()].iter().cloned().collect(),
            })
            .collect();
        let recipes = recipes
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.id = RecipeId(i as u32);
                r
            })
            .collect();
        Ok(Self {
            recipes,
            lexicon,
            taxonomies,
        })
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn recipe(&self, id: RecipeId) -> Option<&Recipe> {
        self.recipes.get(id.0 as usize)
    }

    pub fn lexicon(&self) -> &IngredientLexicon {
        &self.lexicon
    }

    pub fn taxonomies(&self) -> &[Taxonomy] {
        &self.taxonomies
    }

    pub fn taxonomy(&self, name: &str) -> Option<&Taxonomy> {
        self.taxonomies.iter().find(|t| t.name == name)
    }

    pub fn taxonomy_names(&self) -> Vec<String> {
        self.taxonomies.iter().map(|t| t.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    /// Canonical names of a recipe's ingredients, in id order.
    pub fn ingredient_names(&self, recipe: &Recipe) -> Vec<String> {
        recipe
            .ingredient_ids
            .iter()
            .filter_map(|id| self.lexicon.name(*id))
            .map(str::to_string)
            .collect()
    }

    /// The corpus rendered back into its on-disk form, with canonical
    /// ingredient names as the ingredient lines.
    pub fn to_raw(&self) -> Vec<RawRecipe> {
        self.recipes.iter().map(|r| self.recipe_to_raw(r)).collect()
    }

    pub fn recipe_to_raw(&self, r: &Recipe) -> RawRecipe {
        RawRecipe {
            title: r.title.clone(),
            ingredients: self.ingredient_names(r),
            labels: r.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub taxonomy: String,
    pub class: String,
    pub recipe_count: usize,
    pub mean_ingredients: f64,
}

/// Per-class recipe counts and mean ingredient counts, ordered by
/// taxonomy then class. Classes without recipes produce no row.
pub fn corpus_stats(corpus: &Corpus) -> Vec<ClassStats> {
    let mut rows = Vec::new();
    for t in corpus.taxonomies() {
        for class in &t.classes {
            let sizes: Vec<usize> = corpus
                .recipes()
                .iter()
                .filter(|r| r.has_label(&t.name, class))
                .map(|r| r.ingredient_ids.len())
                .collect();
            if sizes.is_empty() {
                continue;
            }
            rows.push(ClassStats {
                taxonomy: t.name.clone(),
                class: class.clone(),
                recipe_count: sizes.len(),
                mean_ingredients: sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
            });
        }
    }
    rows
}

pub fn write_stats_csv<W: Write>(w: W, rows: &[ClassStats]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["taxonomy", "class", "recipe_count", "mean_ingredients"])?;
    for r in rows {
        wtr.write_record([
            r.taxonomy.clone(),
            r.class.clone(),
            r.recipe_count.to_string(),
            format!("{:.4}", r.mean_ingredients),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
