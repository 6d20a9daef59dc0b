//! Per-taxonomy multi-label classifiers over binary bag-of-ingredient
//! features.
//!
//! [`LinearModel`] is one-vs-rest logistic regression trained by plain SGD;
//! its per-class probabilities are independent sigmoids and do not sum to 1.
//! [`NbModel`] is multinomial naive Bayes, kept as a baseline. Both plug into
//! [`predict_multilabel`], which assigns every class at or above the
//! threshold and falls back to the argmax when none qualifies.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Recipe};

pub const DEFAULT_THRESHOLD: f64 = 0.3;
pub const MODEL_FORMAT_VERSION: u32 = 1;

const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("unknown taxonomy `{0}`")]
    UnknownTaxonomy(String),
    #[error("taxonomy `{taxonomy}` needs at least two classes, found {found}")]
    TooFewClasses { taxonomy: String, found: usize },
    #[error("class `{class}` of taxonomy `{taxonomy}` has no training examples")]
    EmptyClass { taxonomy: String, class: String },
    #[error("no labeled examples")]
    NoExamples,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("folds must be at least 2, got {0}")]
    Folds(usize),
    #[error("model format_version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file is invalid: {0}")]
    Invalid(String),
}

/// Ordered ingredient vocabulary; a feature index is a position here.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self { names, index }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::new(corpus.lexicon().canon.values().cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(Self::new(Vec::<String>::deserialize(d)?))
    }
}

/// Binary indicator vector stored as its sorted active indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub vocab_size: usize,
    pub active: Vec<usize>,
}

/// Out-of-vocabulary ingredients are ignored.
pub fn featurize<'a, I>(ingredients: I, vocab: &Vocabulary) -> FeatureVector
where
    I: IntoIterator<Item = &'a str>,
{
    let mut active: Vec<usize> = ingredients
        .into_iter()
        .filter_map(|n| vocab.index_of(n))
        .collect();
    active.sort_unstable();
    active.dedup();
    FeatureVector {
        vocab_size: vocab.len(),
        active,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-4,
            epochs: 30,
            seed: 42,
        }
    }
}

/// A featurized recipe with its class indices; `labels[0]` is the primary.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub labels: Vec<usize>,
}

impl LabeledExample {
    pub fn primary(&self) -> usize {
        self.labels[0]
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub taxonomy: String,
    pub classes: Vec<String>,
    pub vocab: Vocabulary,
    pub examples: Vec<LabeledExample>,
}

impl TrainingSet {
    /// Recipes without a label in `taxonomy` are skipped.
    pub fn from_corpus(corpus: &Corpus, taxonomy: &str) -> Result<Self, ClassifyError> {
        let tax = corpus
            .taxonomy(taxonomy)
            .ok_or_else(|| ClassifyError::UnknownTaxonomy(taxonomy.to_string()))?;
        let vocab = Vocabulary::from_corpus(corpus);
        let examples = corpus
            .recipes()
            .iter()
            .filter_map(|r| example_for(corpus, r, taxonomy, &tax.classes, &vocab))
            .collect();
        Ok(Self {
            taxonomy: taxonomy.to_string(),
            classes: tax.classes.clone(),
            vocab,
            examples,
        })
    }

    /// Rejects fewer than two classes or a class with no positive example.
    pub fn check_trainable(&self) -> Result<(), ClassifyError> {
        if self.classes.len() < 2 {
            return Err(ClassifyError::TooFewClasses {
                taxonomy: self.taxonomy.clone(),
                found: self.classes.len(),
            });
        }
        for (c, class) in self.classes.iter().enumerate() {
            if !self.examples.iter().any(|e| e.labels.contains(&c)) {
                return Err(ClassifyError::EmptyClass {
                    taxonomy: self.taxonomy.clone(),
                    class: class.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            taxonomy: self.taxonomy.clone(),
            classes: self.classes.clone(),
            vocab: self.vocab.clone(),
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// Featurizes one recipe against a model's classes and vocabulary. Labels
/// outside `classes` are dropped; `None` when no label remains.
pub fn example_for(
    corpus: &Corpus,
    recipe: &Recipe,
    taxonomy: &str,
    classes: &[String],
    vocab: &Vocabulary,
) -> Option<LabeledExample> {
    let labels: Vec<usize> = recipe
        .labels
        .get(taxonomy)?
        .iter()
        .filter_map(|l| classes.iter().position(|c| c == l))
        .collect();
    if labels.is_empty() {
        return None;
    }
    let names = corpus.ingredient_names(recipe);
    Some(LabeledExample {
        features: featurize(names.iter().map(String::as_str), vocab),
        labels,
    })
}

/// Common surface of the shipped models.
pub trait Classifier {
    fn taxonomy(&self) -> &str;
    fn classes(&self) -> &[String];
    fn vocab(&self) -> &Vocabulary;
    /// One probability per class, in class order.
    fn probabilities(&self, x: &FeatureVector) -> Vec<f64>;

    fn argmax(&self, x: &FeatureVector) -> usize {
        argmax(&self.probabilities(x))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized log-loss of one example under a single logistic unit:
/// `-[y ln p + (1-y) ln(1-p)] + (l2/2)|w|^2` with `p = sigmoid(w.x + b)`.
pub fn logistic_loss(weights: &[f64], bias: f64, x: &[f64], y: f64, l2: f64) -> f64 {
    let z: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bias;
    // ln(1 + e^z) computed without overflow
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    let data = softplus - y * z;
    let reg = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    data + reg
}

/// Analytic gradient of [`logistic_loss`]: `((p - y) x + l2 w, p - y)`.
pub fn logistic_gradient(weights: &[f64], bias: f64, x: &[f64], y: f64, l2: f64) -> (Vec<f64>, f64) {
    let z: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bias;
    let g = sigmoid(z) - y;
    let grad = weights
        .iter()
        .zip(x)
        .map(|(w, xi)| g * xi + l2 * w)
        .collect();
    (grad, g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format_version: u32,
    pub taxonomy: String,
    pub classes: Vec<String>,
    pub vocab: Vocabulary,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub hyper: Hyper,
}

impl LinearModel {
    fn zeros(set: &TrainingSet, hyper: Hyper) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            taxonomy: set.taxonomy.clone(),
            classes: set.classes.clone(),
            vocab: set.vocab.clone(),
            weights: vec![vec![0.0; set.vocab.len()]; set.classes.len()],
            biases: vec![0.0; set.classes.len()],
            hyper,
        }
    }

    pub fn score(&self, class: usize, x: &FeatureVector) -> f64 {
        let w = &self.weights[class];
        x.active.iter().map(|&j| w[j]).sum::<f64>() + self.biases[class]
    }

    /// One SGD step on one example for every class:
    /// `w <- w - lr (sigmoid(w.x + b) - y) x - lr l2 w`, `b <- b - lr (p - y)`.
    pub fn sgd_step(&mut self, example: &LabeledExample) {
        let lr = self.hyper.learning_rate;
        let decay = 1.0 - lr * self.hyper.l2;
        for c in 0..self.classes.len() {
            let y = if example.labels.contains(&c) { 1.0 } else { 0.0 };
            let g = sigmoid(self.score(c, &example.features)) - y;
            let w = &mut self.weights[c];
            if decay != 1.0 {
                for wj in w.iter_mut() {
                    *wj *= decay;
                }
            }
            for &j in &example.features.active {
                w[j] -= lr * g;
            }
            self.biases[c] -= lr * g;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        check_version(text)?;
        let m: Self = serde_json::from_str(text).map_err(|e| ClassifyError::Invalid(e.to_string()))?;
        let k = m.classes.len();
        if m.weights.len() != k
            || m.biases.len() != k
            || m.weights.iter().any(|w| w.len() != m.vocab.len())
        {
            return Err(ClassifyError::Invalid("weight shape does not match classes/vocab".into()));
        }
        Ok(m)
    }
}

fn check_version(text: &str) -> Result<(), ClassifyError> {
    #[derive(Deserialize)]
    struct Probe {
        format_version: u32,
    }
    let probe: Probe =
        serde_json::from_str(text).map_err(|e| ClassifyError::Invalid(e.to_string()))?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(ClassifyError::Version {
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    Ok(())
}

impl Classifier for LinearModel {
    fn taxonomy(&self) -> &str {
        &self.taxonomy
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn probabilities(&self, x: &FeatureVector) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| sigmoid(self.score(c, x)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
            .collect()
    }
}

/// SGD without the trainability check; used directly by cross-validation.
pub fn fit_sgd(set: &TrainingSet, hyper: Hyper) -> LinearModel {
    let mut model = LinearModel::zeros(set, hyper);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..set.examples.len()).collect();
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            model.sgd_step(&set.examples[i]);
        }
    }
    model
}

pub fn train_sgd(corpus: &Corpus, taxonomy: &str, hyper: Hyper) -> Result<LinearModel, ClassifyError> {
    let set = TrainingSet::from_corpus(corpus, taxonomy)?;
    set.check_trainable()?;
    Ok(fit_sgd(&set, hyper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub format_version: u32,
    pub taxonomy: String,
    pub classes: Vec<String>,
    pub vocab: Vocabulary,
    pub log_prior: Vec<f64>,
    pub log_likelihood: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl NbModel {
    /// Joint log-probability `ln P(c) + sum_j x_j ln P(j|c)` per class.
    pub fn joint_log_likelihood(&self, x: &FeatureVector) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(&self.log_likelihood)
            .map(|(prior, ll)| prior + x.active.iter().map(|&j| ll[j]).sum::<f64>())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        check_version(text)?;
        serde_json::from_str(text).map_err(|e| ClassifyError::Invalid(e.to_string()))
    }
}

impl Classifier for NbModel {
    fn taxonomy(&self) -> &str {
        &self.taxonomy
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn probabilities(&self, x: &FeatureVector) -> Vec<f64> {
        let jll = self.joint_log_likelihood(x);
        let max = jll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = jll.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }
}

/// Multinomial NB with Laplace smoothing. A multi-label example counts
/// toward every class it carries.
pub fn fit_nb(set: &TrainingSet, alpha: f64) -> NbModel {
    let k = set.classes.len();
    let v = set.vocab.len();
    let mut docs = vec![0u64; k];
    let mut feature_counts = vec![vec![0u64; v]; k];
    for e in &set.examples {
        for &c in &e.labels {
            docs[c] += 1;
            for &j in &e.features.active {
                feature_counts[c][j] += 1;
            }
        }
    }
    let total_docs: u64 = docs.iter().sum();
    let log_prior = docs
        .iter()
        .map(|&d| (d as f64 / total_docs as f64).ln())
        .collect();
    let log_likelihood = feature_counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            let denom = total as f64 + alpha * v as f64;
            row.iter()
                .map(|&n| ((n as f64 + alpha) / denom).ln())
                .collect()
        })
        .collect();
    NbModel {
        format_version: MODEL_FORMAT_VERSION,
        taxonomy: set.taxonomy.clone(),
        classes: set.classes.clone(),
        vocab: set.vocab.clone(),
        log_prior,
        log_likelihood,
        alpha,
    }
}

pub fn train_nb(corpus: &Corpus, taxonomy: &str, alpha: f64) -> Result<NbModel, ClassifyError> {
    let set = TrainingSet::from_corpus(corpus, taxonomy)?;
    set.check_trainable()?;
    Ok(fit_nb(&set, alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelResult {
    pub per_class_probability: BTreeMap<String, f64>,
    /// Assigned classes in the model's class order.
    pub assigned: Vec<String>,
}

/// Classes with probability at or above `threshold`; the single most
/// probable class (first on ties) when none reaches it.
pub fn assign_classes(classes: &[String], probs: &[f64], threshold: f64) -> Vec<String> {
    let assigned: Vec<String> = classes
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p >= threshold)
        .map(|(c, _)| c.clone())
        .collect();
    if assigned.is_empty() && !classes.is_empty() {
        vec![classes[argmax(probs)].clone()]
    } else {
        assigned
    }
}

pub fn predict_multilabel<'a, I>(model: &dyn Classifier, ingredients: I, threshold: f64) -> MultiLabelResult
where
    I: IntoIterator<Item = &'a str>,
{
    let x = featurize(ingredients, model.vocab());
    let probs = model.probabilities(&x);
    MultiLabelResult {
        per_class_probability: model
            .classes()
            .iter()
            .cloned()
            .zip(probs.iter().copied())
            .collect(),
        assigned: assign_classes(model.classes(), &probs, threshold),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub classes: Vec<String>,
    pub n: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<u64>>,
}

/// Confusion matrix and accuracy from parallel class-index lists.
pub fn evaluate_predictions(classes: &[String], truth: &[usize], predicted: &[usize]) -> Evaluation {
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let n = truth.len();
    let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
    Evaluation {
        classes: classes.to_vec(),
        n,
        accuracy: if n == 0 { 0.0 } else { trace as f64 / n as f64 },
        confusion,
    }
}

/// Argmax predictions scored against each example's primary label.
pub fn evaluate(model: &dyn Classifier, held_out: &[LabeledExample]) -> Evaluation {
    let truth: Vec<usize> = held_out.iter().map(LabeledExample::primary).collect();
    let predicted: Vec<usize> = held_out.iter().map(|e| model.argmax(&e.features)).collect();
    evaluate_predictions(model.classes(), &truth, &predicted)
}

/// Accuracy of always predicting the most common primary label of `train`.
pub fn majority_baseline(train: &[LabeledExample], test: &[LabeledExample], k: usize) -> f64 {
    let mut counts = vec![0usize; k];
    for e in train {
        counts[e.primary()] += 1;
    }
    let mut majority = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[majority] {
            majority = c;
        }
    }
    if test.is_empty() {
        return 0.0;
    }
    test.iter().filter(|e| e.primary() == majority).count() as f64 / test.len() as f64
}

pub fn write_evaluation_csv<W: Write>(mut w: W, taxonomy: &str, model: &str, e: &Evaluation) -> std::io::Result<()> {
    writeln!(w, "taxonomy,model,n,accuracy")?;
    writeln!(w, "{taxonomy},{model},{},{:.6}", e.n, e.accuracy)?;
    write!(w, "true\\predicted")?;
    for c in &e.classes {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for (c, row) in e.classes.iter().zip(&e.confusion) {
        write!(w, "{c}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Assigns examples to `folds` folds, stratified by primary label: each
/// class's members are shuffled with `seed` and dealt round-robin.
pub fn stratified_folds(examples: &[LabeledExample], k_classes: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k_classes];
    for (i, e) in examples.iter().enumerate() {
        by_class[e.primary()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub l2s: Vec<f64>,
    pub epochs: Vec<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    Hyper::default().seed
}

impl Grid {
    pub fn points(&self) -> Vec<Hyper> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &l2 in &self.l2s {
                for &epochs in &self.epochs {
                    out.push(Hyper {
                        learning_rate,
                        l2,
                        epochs,
                        seed: self.seed,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub hyper: Hyper,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: Hyper,
    pub folds: usize,
    pub table: Vec<CvRow>,
}

/// Stratified k-fold search over `grid`, scoring argmax accuracy. The best
/// point has the highest mean accuracy; ties go to smaller l2, then smaller
/// learning rate, then fewer epochs.
pub fn grid_search_set(set: &TrainingSet, grid: &Grid, folds: usize) -> Result<GridSearchResult, ClassifyError> {
    if folds < 2 {
        return Err(ClassifyError::Folds(folds));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(ClassifyError::EmptyGrid);
    }
    if set.examples.is_empty() {
        return Err(ClassifyError::NoExamples);
    }
    let k = set.classes.len();
    let mut sizes = vec![0usize; k];
    for e in &set.examples {
        sizes[e.primary()] += 1;
    }
    let smallest = sizes.iter().copied().filter(|&s| s > 0).min().unwrap_or(0);
    let mut folds_used = folds;
    if smallest < folds {
        folds_used = smallest.max(2);
        log::warn!(
            "taxonomy `{}`: smallest class has {smallest} members, using {folds_used} folds instead of {folds}",
            set.taxonomy
        );
    }
    let assignment = stratified_folds(&set.examples, k, folds_used, grid.seed);

    let mut table = Vec::with_capacity(points.len());
    for hyper in points {
        let mut accs = Vec::with_capacity(folds_used);
        for held in &assignment {
            if held.is_empty() {
                continue;
            }
            let train_idx: Vec<usize> = (0..set.examples.len())
                .filter(|i| held.binary_search(i).is_err())
                .collect();
            let model = fit_sgd(&set.subset(&train_idx), hyper);
            let test: Vec<LabeledExample> = held.iter().map(|&i| set.examples[i].clone()).collect();
            accs.push(evaluate(&model, &test).accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        table.push(CvRow {
            hyper,
            fold_accuracies: accs,
            mean_accuracy: mean,
        });
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            b.mean_accuracy
                .total_cmp(&a.mean_accuracy)
                .then(a.hyper.l2.total_cmp(&b.hyper.l2))
                .then(a.hyper.learning_rate.total_cmp(&b.hyper.learning_rate))
                .then(a.hyper.epochs.cmp(&b.hyper.epochs))
        })
        .expect("grid is non-empty")
        .hyper;
    Ok(GridSearchResult {
        best,
        folds: folds_used,
        table,
    })
}

pub fn grid_search(corpus: &Corpus, taxonomy: &str, grid: &Grid, folds: usize) -> Result<GridSearchResult, ClassifyError> {
    let set = TrainingSet::from_corpus(corpus, taxonomy)?;
    set.check_trainable()?;
    grid_search_set(&set, grid, folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{BigInt, BigRational, ToPrimitive};
    use proptest::prelude::*;
    use rand::Rng;

    fn vocab(names: &[&str]) -> Vocabulary {
        Vocabulary::new(names.iter().map(|s| s.to_string()).collect())
    }

    fn classes(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn example(active: &[usize], v: usize, labels: &[usize]) -> LabeledExample {
        LabeledExample {
            features: FeatureVector {
                vocab_size: v,
                active: active.to_vec(),
            },
            labels: labels.to_vec(),
        }
    }

    /// Class A (0) always has "soy" (index 0); class B (1) never does.
    pub(crate) fn separable_set() -> TrainingSet {
        let v = vocab(&["soy", "rice", "beef", "milk", "corn"]);
        let mut examples = Vec::new();
        for i in 0..20usize {
            let extra = [1 + i % 4];
            if i % 2 == 0 {
                examples.push(example(&[0, extra[0]], 5, &[0]));
            } else {
                examples.push(example(&extra, 5, &[1]));
            }
        }
        TrainingSet {
            taxonomy: "toy".into(),
            classes: classes(&["A", "B"]),
            vocab: v,
            examples,
        }
    }

    #[test]
    fn featurize_examples() {
        let v = vocab(&["basil", "garlic", "onions"]);
        assert!(featurize(std::iter::empty(), &v).active.is_empty());
        assert_eq!(featurize(["basil", "garlic", "onions"], &v).active, vec![0, 1, 2]);
        assert_eq!(featurize(["garlic", "basil", "saffron"], &v).active, vec![0, 1]);
    }

    #[test]
    fn sgd_separates_toy_set() {
        let set = separable_set();
        let hyper = Hyper {
            epochs: 50,
            ..Hyper::default()
        };
        let model = fit_sgd(&set, hyper);
        assert_eq!(evaluate(&model, &set.examples).accuracy, 1.0);
    }

    #[test]
    fn zero_epochs_gives_half() {
        let set = separable_set();
        let model = fit_sgd(
            &set,
            Hyper {
                epochs: 0,
                ..Hyper::default()
            },
        );
        assert!(model.weights.iter().flatten().all(|&w| w == 0.0));
        let p = model.probabilities(&set.examples[0].features);
        assert!(p.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn sgd_is_deterministic() {
        let set = separable_set();
        let a = fit_sgd(&set, Hyper::default());
        let b = fit_sgd(&set, Hyper::default());
        let bits = |m: &LinearModel| -> Vec<u64> {
            m.weights.iter().flatten().chain(&m.biases).map(|w| w.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn sgd_step_follows_gradient() {
        let set = separable_set();
        let hyper = Hyper {
            learning_rate: 0.3,
            l2: 0.05,
            epochs: 3,
            seed: 1,
        };
        let mut model = fit_sgd(&set, hyper);
        let e = &set.examples[3];
        let x: Vec<f64> = (0..5).map(|j| if e.features.active.contains(&j) { 1.0 } else { 0.0 }).collect();
        let before = model.clone();
        model.sgd_step(e);
        for c in 0..2 {
            let y = if e.labels.contains(&c) { 1.0 } else { 0.0 };
            let (gw, gb) = logistic_gradient(&before.weights[c], before.biases[c], &x, y, hyper.l2);
            for ((after, was), g) in model.weights[c].iter().zip(&before.weights[c]).zip(&gw) {
                assert!((after - (was - hyper.learning_rate * g)).abs() < 1e-12);
            }
            assert!((model.biases[c] - (before.biases[c] - hyper.learning_rate * gb)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = rng.gen_range(1..6);
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            let l2 = rng.gen_range(0.0..0.5);
            let (gw, gb) = logistic_gradient(&w, b, &x, y, l2);
            let h = 1e-6;
            for j in 0..d {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let num = (logistic_loss(&wp, b, &x, y, l2) - logistic_loss(&wm, b, &x, y, l2)) / (2.0 * h);
                let rel = (num - gw[j]).abs() / num.abs().max(gw[j].abs()).max(1e-8);
                assert!(rel < 1e-5, "rel {rel}");
            }
            let num = (logistic_loss(&w, b + h, &x, y, l2) - logistic_loss(&w, b - h, &x, y, l2)) / (2.0 * h);
            assert!((num - gb).abs() / num.abs().max(gb.abs()).max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn nb_two_doc_example() {
        let set = TrainingSet {
            taxonomy: "t".into(),
            classes: classes(&["A", "B"]),
            vocab: vocab(&["x", "y"]),
            examples: vec![example(&[0], 2, &[0]), example(&[1], 2, &[1])],
        };
        let m = fit_nb(&set, 1.0);
        assert!((m.log_prior[0].exp() - 0.5).abs() < 1e-15);
        assert!((m.log_prior[1].exp() - 0.5).abs() < 1e-15);
        assert!((m.log_likelihood[0][0].exp() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.log_likelihood[0][1].exp() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nb_large_alpha_flattens_likelihoods() {
        let set = TrainingSet {
            taxonomy: "t".into(),
            classes: classes(&["A", "B"]),
            vocab: vocab(&["x", "y", "z"]),
            examples: vec![example(&[0, 1], 3, &[0]), example(&[2], 3, &[1])],
        };
        let m = fit_nb(&set, 1e9);
        for row in &m.log_likelihood {
            for &ll in row {
                assert!((ll.exp() - 1.0 / 3.0).abs() < 1e-6);
            }
        }
    }

    /// Exact posterior by rational arithmetic for integer alpha.
    fn rational_posterior(set: &TrainingSet, alpha: i64, x: &FeatureVector) -> Vec<f64> {
        let k = set.classes.len();
        let v = set.vocab.len() as i64;
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let mut docs = vec![0i64; k];
        let mut counts = vec![vec![0i64; v as usize]; k];
        for e in &set.examples {
            for &c in &e.labels {
                docs[c] += 1;
                for &j in &e.features.active {
                    counts[c][j] += 1;
                }
            }
        }
        let total_docs: i64 = docs.iter().sum();
        let joint: Vec<BigRational> = (0..k)
            .map(|c| {
                let total: i64 = counts[c].iter().sum();
                let mut p = r(docs[c], total_docs);
                for &j in &x.active {
                    p *= r(counts[c][j] + alpha, total + alpha * v);
                }
                p
            })
            .collect();
        let z: BigRational = joint.iter().cloned().sum();
        joint.iter().map(|p| (p / &z).to_f64().unwrap()).collect()
    }

    #[test]
    fn nb_matches_exact_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(2..=3);
            let v = rng.gen_range(1..=4);
            let n = rng.gen_range(k..=8);
            let mut examples: Vec<LabeledExample> = (0..n)
                .map(|i| {
                    let active: Vec<usize> = (0..v).filter(|_| rng.gen_bool(0.5)).collect();
                    example(&active, v, &[i % k])
                })
                .collect();
            if rng.gen_bool(0.3) {
                let extra = (examples[0].labels[0] + 1) % k;
                examples[0].labels.push(extra);
            }
            let names: Vec<String> = (0..v).map(|j| format!("i{j}")).collect();
            let set = TrainingSet {
                taxonomy: "t".into(),
                classes: (0..k).map(|c| format!("c{c}")).collect(),
                vocab: Vocabulary::new(names),
                examples,
            };
            let alpha = rng.gen_range(1..=2);
            let m = fit_nb(&set, alpha as f64);
            let query = FeatureVector {
                vocab_size: v,
                active: (0..v).filter(|_| rng.gen_bool(0.5)).collect(),
            };
            let got = m.probabilities(&query);
            let want = rational_posterior(&set, alpha, &query);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
            }
            assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assignment_examples() {
        let cs = classes(&["Asian", "American", "Mexican"]);
        assert_eq!(assign_classes(&cs, &[0.5, 0.35, 0.15], 0.3), classes(&["Asian", "American"]));
        assert_eq!(assign_classes(&cs, &[0.1, 0.25, 0.2], 0.3), classes(&["American"]));
        assert_eq!(assign_classes(&cs, &[0.3, 0.0, 0.0], 0.3), classes(&["Asian"]));
    }

    #[test]
    fn evaluation_identities() {
        let cs = classes(&["a", "b", "c", "d", "e"]);
        let truth: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let perfect = evaluate_predictions(&cs, &truth, &truth);
        assert_eq!(perfect.accuracy, 1.0);
        for (i, row) in perfect.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v == 0, i != j);
            }
        }
        let constant = evaluate_predictions(&cs, &truth, &[2; 50]);
        assert_eq!(constant.accuracy, 0.2);
        for row in &constant.confusion {
            assert_eq!(row.iter().sum::<u64>(), 10);
        }
    }

    #[test]
    fn degenerate_training_sets() {
        let mut one = separable_set();
        one.classes.truncate(1);
        one.examples.retain(|e| e.labels == [0]);
        assert!(matches!(one.check_trainable(), Err(ClassifyError::TooFewClasses { .. })));
        let mut empty = separable_set();
        empty.classes.push("C".into());
        match empty.check_trainable() {
            Err(ClassifyError::EmptyClass { class, .. }) => assert_eq!(class, "C"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_single_point_and_duplicates() {
        let set = separable_set();
        let one = Grid {
            learning_rates: vec![0.2],
            l2s: vec![1e-4],
            epochs: vec![20],
            seed: 3,
        };
        let r = grid_search_set(&set, &one, 5).unwrap();
        assert_eq!(r.best.learning_rate, 0.2);
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].mean_accuracy, 1.0);

        let dup = Grid {
            learning_rates: vec![0.2, 0.2],
            ..one.clone()
        };
        let r = grid_search_set(&set, &dup, 4).unwrap();
        assert_eq!(r.table[0].fold_accuracies, r.table[1].fold_accuracies);
    }

    #[test]
    fn grid_prefers_smaller_l2_on_ties() {
        let set = separable_set();
        let grid = Grid {
            learning_rates: vec![0.5, 0.1],
            l2s: vec![1e-3, 1e-5],
            epochs: vec![50],
            seed: 1,
        };
        let r = grid_search_set(&set, &grid, 5).unwrap();
        assert!(r.table.iter().all(|row| row.mean_accuracy == 1.0));
        assert_eq!((r.best.l2, r.best.learning_rate), (1e-5, 0.1));
    }

    #[test]
    fn grid_reduces_folds_for_small_classes() {
        let mut set = separable_set();
        // class B down to 3 members
        let mut seen_b = 0;
        set.examples.retain(|e| {
            if e.labels == [1] {
                seen_b += 1;
                seen_b <= 3
            } else {
                true
            }
        });
        let grid = Grid {
            learning_rates: vec![0.1],
            l2s: vec![0.0],
            epochs: vec![10],
            seed: 1,
        };
        assert_eq!(grid_search_set(&set, &grid, 5).unwrap().folds, 3);
        assert!(matches!(grid_search_set(&set, &grid, 1), Err(ClassifyError::Folds(1))));
        let empty = Grid {
            learning_rates: vec![],
            ..grid
        };
        assert!(matches!(grid_search_set(&set, &empty, 3), Err(ClassifyError::EmptyGrid)));
    }

    #[test]
    fn stratified_folds_partition() {
        let set = separable_set();
        let folds = stratified_folds(&set.examples, 2, 5, 9);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..set.examples.len()).collect::<Vec<_>>());
        for f in &folds {
            let a = f.iter().filter(|&&i| set.examples[i].primary() == 0).count();
            assert_eq!(a, 2);
        }
    }

    #[test]
    fn model_json_round_trip_and_version_check() {
        let set = separable_set();
        let m = fit_sgd(&set, Hyper::default());
        let json = m.to_json();
        assert_eq!(LinearModel::from_json(&json).unwrap(), m);
        let bumped = json.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            LinearModel::from_json(&bumped),
            Err(ClassifyError::Version { found: 2, .. })
        ));
        let nb = fit_nb(&set, 1.0);
        assert_eq!(NbModel::from_json(&nb.to_json()).unwrap(), nb);
    }

    proptest! {
        #[test]
        fn threshold_semantics(probs in prop::collection::vec(0.0f64..=1.0, 1..8)) {
            let cs: Vec<String> = (0..probs.len()).map(|i| format!("c{i}")).collect();
            let got = assign_classes(&cs, &probs, DEFAULT_THRESHOLD);
            let above: Vec<String> = cs.iter().zip(&probs).filter(|(_, &p)| p >= 0.3).map(|(c, _)| c.clone()).collect();
            if above.is_empty() {
                let max = probs.iter().cloned().fold(f64::MIN, f64::max);
                prop_assert_eq!(got.len(), 1);
                let idx = cs.iter().position(|c| *c == got[0]).unwrap();
                prop_assert_eq!(probs[idx], max);
            } else {
                prop_assert_eq!(got, above);
            }
        }

        #[test]
        fn linear_probabilities_open_interval(
            w in prop::collection::vec(-60.0f64..60.0, 4),
            b in -60.0f64..60.0,
            active in prop::collection::btree_set(0usize..4, 0..4),
        ) {
            let m = LinearModel {
                format_version: MODEL_FORMAT_VERSION,
                taxonomy: "t".into(),
                classes: classes(&["a"]),
                vocab: vocab(&["p", "q", "r", "s"]),
                weights: vec![w],
                biases: vec![b],
                hyper: Hyper::default(),
            };
            let x = FeatureVector { vocab_size: 4, active: active.into_iter().collect() };
            for p in m.probabilities(&x) {
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
