//! Batch orchestration and the on-disk artifact bundle.
//!
//! [`run_pipeline`] runs load, clean, canonicalize, mine and train in order
//! and writes every stage's output as text or JSON. A `manifest.json`
//! records the config used, the input hash and a SHA-256 per file.
//! [`load_artifacts`] verifies those hashes and rebuilds a [`Bundle`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::{
    self, example_for, fit_nb, fit_sgd, grid_search_set, Evaluation, Grid, GridSearchResult, Hyper,
    LabeledExample, LinearModel, NbModel, TrainingSet, Vocabulary,
};
use crate::corpus::{
    dedup_recipes, load_corpus, read_jsonl, write_jsonl, Corpus, CorpusFormat, IngredientId,
    RawRecipe, Recipe, RecipeId, Taxonomy, DEFAULT_TAXONOMIES,
};
use crate::rulemine::{
    mine_rules, read_rules_json, rule_records, rules_from_records, write_rules_csv,
    write_rules_json, AssociationRule, MiningParams, TransactionDb,
};
use crate::simcanon::{canonicalize_weighted, IngredientLexicon, SimilarityMetric};
use crate::textprep::{
    builtin_stopwords_text, builtin_units_text, prep_corpus, CleanIngredient, PrepConfig,
};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

const STAGING_DIR: &str = ".partial";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("integrity check failed for `{file}`: {reason}")]
    Integrity { file: String, reason: String },
    #[error("artifacts use format_version {found}, this build reads {expected}; rerun the pipeline")]
    Version { found: u32, expected: u32 },
    #[error("artifact `{file}` is invalid: {reason}")]
    Artifact { file: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stage(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepSection {
    /// Stopword list; the built-in English list when absent.
    pub stopwords_path: Option<PathBuf>,
    /// Unit-token list; the built-in list when absent.
    pub units_path: Option<PathBuf>,
    pub min_token_len: usize,
}

impl Default for PrepSection {
    fn default() -> Self {
        Self {
            stopwords_path: None,
            units_path: None,
            min_token_len: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilaritySection {
    pub metric: SimilarityMetric,
    pub threshold: f64,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        Self {
            metric: SimilarityMetric::default(),
            threshold: crate::simcanon::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub defaults: Hyper,
    pub per_taxonomy: BTreeMap<String, Hyper>,
    pub nb_alpha: f64,
    pub threshold: f64,
    /// When set, each taxonomy's hyperparameters come from k-fold search
    /// over this grid instead of `defaults`/`per_taxonomy`.
    pub grid: Option<Grid>,
    pub folds: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        Self {
            defaults: Hyper::default(),
            per_taxonomy: BTreeMap::new(),
            nb_alpha: 1.0,
            threshold: classify::DEFAULT_THRESHOLD,
            grid: None,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_format: Option<CorpusFormat>,
    #[serde(default = "default_taxonomies")]
    pub taxonomies: Vec<String>,
    /// Left out of the manifest snapshot so moving the output does not
    /// change any hash.
    #[serde(default, skip_serializing_if = "path_is_empty")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub prep: PrepSection,
    #[serde(default)]
    pub similarity: SimilaritySection,
    #[serde(default)]
    pub mining: MiningParams,
    #[serde(default)]
    pub classify: ClassifySection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_taxonomies() -> Vec<String> {
    DEFAULT_TAXONOMIES.iter().map(|s| s.to_string()).collect()
}

fn default_seed() -> u64 {
    42
}

fn default_test_fraction() -> f64 {
    0.2
}

fn path_is_empty(p: &Path) -> bool {
    p.as_os_str().is_empty()
}

impl PipelineConfig {
    pub fn new(corpus_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus_path: corpus_path.into(),
            corpus_format: None,
            taxonomies: default_taxonomies(),
            output_dir: output_dir.into(),
            seed: default_seed(),
            test_fraction: default_test_fraction(),
            prep: PrepSection::default(),
            similarity: SimilaritySection::default(),
            mining: MiningParams::default(),
            classify: ClassifySection::default(),
            base_dir: PathBuf::new(),
        }
    }

    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: Self = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_file(&self) -> PathBuf {
        self.resolve(&self.corpus_path)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if path_is_empty(&self.output_dir) {
            return bad("output_dir is required".into());
        }
        let corpus = self.corpus_file();
        if !corpus.is_file() {
            return bad(format!("corpus file {} does not exist", corpus.display()));
        }
        for p in [&self.prep.stopwords_path, &self.prep.units_path].into_iter().flatten() {
            let full = self.resolve(p);
            if !full.is_file() {
                return bad(format!("lexicon file {} does not exist", full.display()));
            }
        }
        if self.taxonomies.is_empty() {
            return bad("at least one taxonomy is required".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} is outside (0, 1)", self.test_fraction));
        }
        if !(self.similarity.threshold > 0.0 && self.similarity.threshold <= 1.0) {
            return bad(format!(
                "similarity threshold {} is outside (0, 1]",
                self.similarity.threshold
            ));
        }
        self.mining
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let c = &self.classify;
        if !(c.threshold > 0.0 && c.threshold <= 1.0) {
            return bad(format!("classify threshold {} is outside (0, 1]", c.threshold));
        }
        if c.nb_alpha <= 0.0 {
            return bad(format!("nb_alpha {} must be positive", c.nb_alpha));
        }
        for h in std::iter::once(&c.defaults).chain(c.per_taxonomy.values()) {
            if h.learning_rate <= 0.0 || h.l2 < 0.0 {
                return bad(format!("invalid hyperparameters {h:?}"));
            }
        }
        if let Some(t) = c.per_taxonomy.keys().find(|t| !self.taxonomies.contains(t)) {
            return bad(format!("per_taxonomy names unknown taxonomy `{t}`"));
        }
        if c.grid.is_some() && c.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", c.folds));
        }
        Ok(())
    }

    pub fn hyper_for(&self, taxonomy: &str) -> Hyper {
        self.classify
            .per_taxonomy
            .get(taxonomy)
            .copied()
            .unwrap_or(self.classify.defaults)
    }

    fn prep_texts(&self) -> Result<(String, String), PipelineError> {
        let read = |p: &Option<PathBuf>, builtin: &str| -> Result<String, PipelineError> {
            match p {
                Some(p) => {
                    let full = self.resolve(p);
                    fs::read_to_string(&full).map_err(io_err(&full))
                }
                None => Ok(builtin.to_string()),
            }
        };
        Ok((
            read(&self.prep.stopwords_path, builtin_stopwords_text())?,
            read(&self.prep.units_path, builtin_units_text())?,
        ))
    }

    /// The config as recorded in the manifest.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_value(&c).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub recipes: usize,
    pub rules: usize,
    pub ingredients: usize,
    pub frequent_itemsets: usize,
    /// Records dropped because no ingredient line survived cleaning.
    pub dropped_recipes: usize,
    pub duplicate_recipes: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub corpus_sha256: String,
    pub counts: ManifestCounts,
    pub taxonomies: Vec<Taxonomy>,
    /// Relative path to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyEvaluation {
    pub hyper: Hyper,
    pub train_examples: usize,
    pub test_examples: usize,
    pub majority_baseline: f64,
    pub sgd: Evaluation,
    pub nb: Evaluation,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid_search: Option<GridSearchResult>,
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub manifest_hash: String,
    pub evaluation: BTreeMap<String, TaxonomyEvaluation>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Staging {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Staging {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

/// Runs every stage and writes the artifacts to `cfg.output_dir`. Outputs
/// are staged in a hidden subdirectory and moved into place only on
/// success.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_path();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let staging_dir = out.join(STAGING_DIR);
    if staging_dir.exists() {
        fs::remove_dir_all(&staging_dir).map_err(io_err(&staging_dir))?;
    }
    fs::create_dir_all(&staging_dir).map_err(io_err(&staging_dir))?;
    let mut staging = Staging {
        dir: staging_dir.clone(),
        files: BTreeMap::new(),
    };
    let result = run_stages(cfg, &mut staging).and_then(|s| {
        publish(&staging_dir, &out)?;
        Ok(s)
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging_dir);
    }
    result.map(|(manifest, manifest_hash, evaluation)| PipelineSummary {
        output_dir: out,
        manifest,
        manifest_hash,
        evaluation,
    })
}

fn publish(staging: &Path, out: &Path) -> Result<(), PipelineError> {
    let entries = fs::read_dir(staging).map_err(io_err(staging))?;
    for entry in entries {
        let entry = entry.map_err(io_err(staging))?;
        let target = out.join(entry.file_name());
        if target.is_dir() {
            fs::remove_dir_all(&target).map_err(io_err(&target))?;
        } else if target.exists() {
            fs::remove_file(&target).map_err(io_err(&target))?;
        }
        fs::rename(entry.path(), &target).map_err(io_err(&target))?;
    }
    fs::remove_dir(staging).map_err(io_err(staging))
}

type StageOutput = (Manifest, String, BTreeMap<String, TaxonomyEvaluation>);

/// Corpus after loading, cleaning, canonicalization and deduplication.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub corpus: Corpus,
    pub corpus_sha256: String,
    pub stopwords: String,
    pub units: String,
    pub dropped: usize,
    pub duplicates: usize,
}

/// Runs the corpus, textprep and simcanon stages without writing anything.
pub fn prepare_corpus(cfg: &PipelineConfig) -> Result<PreparedCorpus, PipelineError> {
    // corpus
    let corpus_file = cfg.corpus_file();
    let corpus_bytes = fs::read(&corpus_file).map_err(io_err(&corpus_file))?;
    let format = cfg
        .corpus_format
        .unwrap_or_else(|| CorpusFormat::from_path(&corpus_file));
    let raw = load_corpus(&corpus_file, format, &cfg.taxonomies).map_err(|e| stage("corpus")(&e))?;
    log::info!("loaded {} records from {}", raw.len(), corpus_file.display());

    // textprep
    let (stopwords, units) = cfg.prep_texts()?;
    let prep_cfg = PrepConfig::from_texts(&stopwords, &units, cfg.prep.min_token_len);
    let prepped = prep_corpus(&raw, &prep_cfg);
    if prepped.recipes.is_empty() {
        return Err(stage("textprep")(&"no recipe survived cleaning"));
    }

    // simcanon: weight each clean text by the number of recipes using it
    let mut freq: BTreeMap<&CleanIngredient, usize> = BTreeMap::new();
    for r in &prepped.recipes {
        for c in &r.ingredients {
            *freq.entry(c).or_insert(0) += 1;
        }
    }
    let weighted: Vec<(CleanIngredient, usize)> =
        freq.into_iter().map(|(c, n)| (c.clone(), n)).collect();
    let lexicon = canonicalize_weighted(&weighted, cfg.similarity.metric, cfg.similarity.threshold)
        .map_err(|e| stage("simcanon")(&e))?;

    let recipes: Vec<Recipe> = prepped
        .recipes
        .iter()
        .enumerate()
        .map(|(i, r)| Recipe {
            id: RecipeId(i as u32),
            title: r.title.clone(),
            ingredient_ids: r
                .ingredients
                .iter()
                .map(|c| lexicon.alias[c.as_str()])
                .collect(),
            labels: r.labels.clone(),
        })
        .collect();
    let before = recipes.len();
    let recipes = dedup_recipes(recipes);
    let duplicates = before - recipes.len();
    let corpus =
        Corpus::new(recipes, lexicon, &cfg.taxonomies).map_err(|e| stage("corpus")(&e))?;
    Ok(PreparedCorpus {
        corpus,
        corpus_sha256: sha256_hex(&corpus_bytes),
        stopwords,
        units,
        dropped: prepped.dropped,
        duplicates,
    })
}

fn run_stages(cfg: &PipelineConfig, staging: &mut Staging) -> Result<StageOutput, PipelineError> {
    let PreparedCorpus {
        corpus,
        corpus_sha256,
        stopwords,
        units,
        dropped,
        duplicates,
    } = prepare_corpus(cfg)?;
    staging.put("stopwords.txt", stopwords.as_bytes())?;
    staging.put("units.txt", units.as_bytes())?;
    staging.put("lexicon.json", corpus.lexicon().to_json().as_bytes())?;
    let mut recipes_jsonl = Vec::new();
    write_jsonl(&mut recipes_jsonl, &corpus.to_raw()).map_err(|e| stage("corpus")(&e))?;
    staging.put("recipes.jsonl", &recipes_jsonl)?;

    // rulemine
    let db = TransactionDb::new(corpus.recipes().iter().map(|r| r.ingredient_ids.iter().copied()))
        .map_err(|e| stage("rulemine")(&e))?;
    let mut transactions = String::new();
    for r in corpus.recipes() {
        transactions.push_str(&corpus.ingredient_names(r).join("|"));
        transactions.push('\n');
    }
    staging.put("transactions.txt", transactions.as_bytes())?;
    let (frequent, rules) = mine_rules(&db, &cfg.mining).map_err(|e| stage("rulemine")(&e))?;
    let lex = corpus.lexicon();
    let records = rule_records(&rules, |id| lex.name(id).expect("rule items are canonical"));
    let mut rules_json = Vec::new();
    write_rules_json(&mut rules_json, &records).map_err(|e| stage("rulemine")(&e))?;
    staging.put("rules.json", &rules_json)?;
    let mut rules_csv = Vec::new();
    write_rules_csv(&mut rules_csv, &records).map_err(|e| stage("rulemine")(&e))?;
    staging.put("rules.csv", &rules_csv)?;
    log::info!("mined {} frequent itemsets and {} rules", frequent.len(), rules.len());

    // classify
    let (train_idx, test_idx) = split_indices(corpus.len(), cfg.test_fraction, cfg.seed);
    let to_raw = |idx: &[usize]| -> Result<Vec<u8>, PipelineError> {
        let rows: Vec<RawRecipe> = idx
            .iter()
            .map(|&i| corpus.recipe_to_raw(&corpus.recipes()[i]))
            .collect();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &rows).map_err(|e| stage("classify")(&e))?;
        Ok(buf)
    };
    staging.put("split/train.jsonl", &to_raw(&train_idx)?)?;
    staging.put("split/test.jsonl", &to_raw(&test_idx)?)?;

    let vocab = Vocabulary::from_corpus(&corpus);
    let mut evaluation = BTreeMap::new();
    for tax in corpus.taxonomies() {
        let examples = |idx: &[usize]| -> Vec<LabeledExample> {
            idx.iter()
                .filter_map(|&i| example_for(&corpus, &corpus.recipes()[i], &tax.name, &tax.classes, &vocab))
                .collect()
        };
        let train = TrainingSet {
            taxonomy: tax.name.clone(),
            classes: tax.classes.clone(),
            vocab: vocab.clone(),
            examples: examples(&train_idx),
        };
        let test = examples(&test_idx);
        train.check_trainable().map_err(|e| stage("classify")(&e))?;
        let (hyper, grid_search) = match &cfg.classify.grid {
            Some(grid) => {
                let r = grid_search_set(&train, grid, cfg.classify.folds)
                    .map_err(|e| stage("classify")(&e))?;
                (r.best, Some(r))
            }
            None => (cfg.hyper_for(&tax.name), None),
        };
        let sgd = fit_sgd(&train, hyper);
        let nb = fit_nb(&train, cfg.classify.nb_alpha);
        staging.put(&format!("models/{}.sgd.json", tax.name), sgd.to_json().as_bytes())?;
        staging.put(&format!("models/{}.nb.json", tax.name), nb.to_json().as_bytes())?;
        let eval = TaxonomyEvaluation {
            hyper,
            train_examples: train.examples.len(),
            test_examples: test.len(),
            majority_baseline: classify::majority_baseline(&train.examples, &test, tax.classes.len()),
            sgd: classify::evaluate(&sgd, &test),
            nb: classify::evaluate(&nb, &test),
            grid_search,
        };
        log::info!(
            "{}: sgd accuracy {:.4}, nb {:.4}, majority baseline {:.4}",
            tax.name,
            eval.sgd.accuracy,
            eval.nb.accuracy,
            eval.majority_baseline
        );
        evaluation.insert(tax.name.clone(), eval);
    }
    let eval_json = serde_json::to_vec_pretty(&evaluation).expect("evaluation serializes");
    staging.put("evaluation.json", &eval_json)?;

    let manifest = Manifest {
        format_version: ARTIFACT_FORMAT_VERSION,
        config: cfg.snapshot(),
        corpus_sha256,
        counts: ManifestCounts {
            recipes: corpus.len(),
            rules: rules.len(),
            ingredients: corpus.lexicon().len(),
            frequent_itemsets: frequent.len(),
            dropped_recipes: dropped,
            duplicate_recipes: duplicates,
            train: train_idx.len(),
            test: test_idx.len(),
        },
        taxonomies: corpus.taxonomies().to_vec(),
        files: staging.files.clone(),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = staging.dir.join(MANIFEST_FILE);
    fs::write(&path, &manifest_bytes).map_err(io_err(&path))?;
    Ok((manifest, sha256_hex(&manifest_bytes), evaluation))
}

/// Seeded shuffle, then the first `ceil(fraction * n)` positions become the
/// test set. Both halves are returned in corpus order.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((test_fraction * n as f64).ceil() as usize).min(n);
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// An immutable, verified artifact set ready for queries.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub manifest_hash: String,
    pub config: PipelineConfig,
    pub corpus: Corpus,
    pub rules: Vec<AssociationRule>,
    pub prep: PrepConfig,
    pub sgd: BTreeMap<String, LinearModel>,
    pub nb: BTreeMap<String, NbModel>,
}

impl Bundle {
    pub fn lexicon(&self) -> &IngredientLexicon {
        self.corpus.lexicon()
    }

    pub fn threshold(&self) -> f64 {
        self.config.classify.threshold
    }

    pub fn taxonomy_names(&self) -> Vec<String> {
        self.corpus.taxonomy_names()
    }
}

pub fn load_artifacts(dir: &Path) -> Result<Bundle, PipelineError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_bytes = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let artifact = |file: &str, reason: String| PipelineError::Artifact {
        file: file.to_string(),
        reason,
    };
    let probe: serde_json::Value = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| artifact(MANIFEST_FILE, e.to_string()))?;
    let found = probe
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| artifact(MANIFEST_FILE, "missing format_version".into()))?;
    if found != u64::from(ARTIFACT_FORMAT_VERSION) {
        return Err(PipelineError::Version {
            found: found as u32,
            expected: ARTIFACT_FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(probe)
        .map_err(|e| artifact(MANIFEST_FILE, e.to_string()))?;
    let mut config: PipelineConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| artifact(MANIFEST_FILE, format!("config snapshot: {e}")))?;
    config.base_dir = dir.to_path_buf();

    let mut texts: BTreeMap<&str, String> = BTreeMap::new();
    for (rel, digest) in &manifest.files {
        let path = dir.join(rel);
        let bytes = fs::read(&path).map_err(|e| PipelineError::Integrity {
            file: rel.clone(),
            reason: e.to_string(),
        })?;
        if &sha256_hex(&bytes) != digest {
            return Err(PipelineError::Integrity {
                file: rel.clone(),
                reason: "content hash does not match manifest".into(),
            });
        }
        let text = String::from_utf8(bytes).map_err(|e| artifact(rel, e.to_string()))?;
        texts.insert(rel.as_str(), text);
    }
    let file = |rel: &str| -> Result<&str, PipelineError> {
        texts
            .get(rel)
            .map(String::as_str)
            .ok_or_else(|| artifact(rel, "listed in no manifest entry".into()))
    };

    let lexicon =
        IngredientLexicon::from_json(file("lexicon.json")?).map_err(|e| artifact("lexicon.json", e.to_string()))?;
    let taxonomy_names: Vec<String> = manifest.taxonomies.iter().map(|t| t.name.clone()).collect();
    let raw = read_jsonl(file("recipes.jsonl")?.as_bytes(), &taxonomy_names)
        .map_err(|e| artifact("recipes.jsonl", e.to_string()))?;
    let mut recipes = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let ids: Result<BTreeSet<IngredientId>, PipelineError> = r
            .ingredients
            .iter()
            .map(|n| {
                lexicon
                    .alias
                    .get(n)
                    .copied()
                    .ok_or_else(|| artifact("recipes.jsonl", format!("unknown ingredient `{n}`")))
            })
            .collect();
        recipes.push(Recipe {
            id: RecipeId(i as u32),
            title: r.title,
            ingredient_ids: ids?,
            labels: r.labels,
        });
    }
    let corpus = Corpus::new(recipes, lexicon, &taxonomy_names)
        .map_err(|e| artifact("recipes.jsonl", e.to_string()))?;
    if corpus.taxonomies() != manifest.taxonomies.as_slice() {
        return Err(artifact("recipes.jsonl", "class rosters differ from the manifest".into()));
    }

    let records =
        read_rules_json(file("rules.json")?.as_bytes()).map_err(|e| artifact("rules.json", e.to_string()))?;
    let lex = corpus.lexicon();
    let rules = rules_from_records(&records, |n| lex.alias.get(n).copied())
        .map_err(|e| artifact("rules.json", e.to_string()))?;

    let prep = PrepConfig::from_texts(
        file("stopwords.txt")?,
        file("units.txt")?,
        config.prep.min_token_len,
    );

    let mut sgd = BTreeMap::new();
    let mut nb = BTreeMap::new();
    for t in &taxonomy_names {
        let rel = format!("models/{t}.sgd.json");
        let m = LinearModel::from_json(file(&rel)?).map_err(|e| artifact(&rel, e.to_string()))?;
        sgd.insert(t.clone(), m);
        let rel = format!("models/{t}.nb.json");
        let m = NbModel::from_json(file(&rel)?).map_err(|e| artifact(&rel, e.to_string()))?;
        nb.insert(t.clone(), m);
    }

    Ok(Bundle {
        root: dir.to_path_buf(),
        manifest_hash: sha256_hex(&manifest_bytes),
        manifest,
        config,
        corpus,
        rules,
        prep,
        sgd,
        nb,
    })
}
