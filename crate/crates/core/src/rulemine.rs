//! Frequent itemset mining and association rules.
//!
//! Supports are kept as integer transaction counts next to `n`, so results
//! from the two miners compare exactly; ratios are derived on demand.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::IngredientId;

pub type ItemId = IngredientId;

pub const DEFAULT_MIN_SUPPORT: f64 = 0.02;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.2;
pub const DEFAULT_MAX_LEN: usize = 6;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("transaction database is empty")]
    EmptyDatabase,
    #[error("transaction {0} is empty")]
    EmptyTransaction(usize),
    #[error("min_support {0} is outside (0, 1]")]
    MinSupport(f64),
    #[error("min_confidence {0} is outside (0, 1]")]
    MinConfidence(f64),
    #[error("frequent itemsets are not downward-closed: subset {0:?} missing")]
    NotDownwardClosed(Vec<ItemId>),
    #[error("unknown mining algorithm `{0}` (expected apriori or fp-growth)")]
    UnknownAlgorithm(String),
    #[error("rule table row {row}: {reason}")]
    RuleTable { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Apriori,
    FpGrowth,
}

impl FromStr for Algorithm {
    type Err = MiningError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apriori" => Ok(Algorithm::Apriori),
            "fp-growth" | "fp_growth" | "fpgrowth" => Ok(Algorithm::FpGrowth),
            other => Err(MiningError::UnknownAlgorithm(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningParams {
    pub min_support: f64,
    pub min_confidence: f64,
    pub algorithm: Algorithm,
    /// Largest itemset size mined; `None` is unbounded.
    pub max_len: Option<usize>,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            min_support: DEFAULT_MIN_SUPPORT,
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            algorithm: Algorithm::Apriori,
            max_len: Some(DEFAULT_MAX_LEN),
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<(), MiningError> {
        check_support(self.min_support)?;
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return Err(MiningError::MinConfidence(self.min_confidence));
        }
        Ok(())
    }
}

fn check_support(min_support: f64) -> Result<(), MiningError> {
    if min_support > 0.0 && min_support <= 1.0 {
        Ok(())
    } else {
        Err(MiningError::MinSupport(min_support))
    }
}

/// One transaction per recipe: a sorted, deduplicated item list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDb {
    transactions: Vec<Vec<ItemId>>,
}

impl TransactionDb {
    pub fn new<I, T>(transactions: I) -> Result<Self, MiningError>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = ItemId>,
    {
        let mut out = Vec::new();
        for (i, t) in transactions.into_iter().enumerate() {
            let set: BTreeSet<ItemId> = t.into_iter().collect();
            if set.is_empty() {
                return Err(MiningError::EmptyTransaction(i));
            }
            out.push(set.into_iter().collect());
        }
        Ok(Self { transactions: out })
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn transactions(&self) -> &[Vec<ItemId>] {
        &self.transactions
    }

    /// Number of transactions containing every item of `items` (sorted).
    pub fn count(&self, items: &[ItemId]) -> u64 {
        self.transactions
            .iter()
            .filter(|t| is_sorted_subset(items, t))
            .count() as u64
    }
}

/// Smallest transaction count whose support reaches `min_support`.
pub fn min_count(min_support: f64, n: usize) -> u64 {
    let x = min_support * n as f64;
    let r = x.round();
    let c = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (c as u64).max(1)
}

fn is_sorted_subset(small: &[ItemId], big: &[ItemId]) -> bool {
    let mut it = big.iter();
    'outer: for s in small {
        for b in it.by_ref() {
            match b.cmp(s) {
                Ordering::Less => continue,
                Ordering::Equal => continue 'outer,
                Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemset {
    pub items: Vec<ItemId>,
    pub count: u64,
    pub n: u64,
}

impl FrequentItemset {
    pub fn support(&self) -> f64 {
        self.count as f64 / self.n as f64
    }
}

/// All frequent itemsets of a database, keyed by sorted item list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequentItemsets {
    pub n: u64,
    pub counts: BTreeMap<Vec<ItemId>, u64>,
}

impl FrequentItemsets {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, items: &[ItemId]) -> Option<u64> {
        self.counts.get(items).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = FrequentItemset> + '_ {
        self.counts.iter().map(|(items, &count)| FrequentItemset {
            items: items.clone(),
            count,
            n: self.n,
        })
    }
}

pub fn mine(db: &TransactionDb, params: &MiningParams) -> Result<FrequentItemsets, MiningError> {
    match params.algorithm {
        Algorithm::Apriori => mine_frequent_apriori(db, params.min_support, params.max_len),
        Algorithm::FpGrowth => mine_frequent_fpgrowth(db, params.min_support, params.max_len),
    }
}

/// Level-wise Apriori. A size-k candidate is counted only when all of its
/// (k-1)-subsets were frequent.
pub fn mine_frequent_apriori(
    db: &TransactionDb,
    min_support: f64,
    max_len: Option<usize>,
) -> Result<FrequentItemsets, MiningError> {
    check_support(min_support)?;
    if db.is_empty() {
        return Err(MiningError::EmptyDatabase);
    }
    let threshold = min_count(min_support, db.len());
    let max_len = max_len.unwrap_or(usize::MAX);
    let mut counts: BTreeMap<Vec<ItemId>, u64> = BTreeMap::new();

    let mut singles: BTreeMap<ItemId, u64> = BTreeMap::new();
    for t in db.transactions() {
        for &i in t {
            *singles.entry(i).or_insert(0) += 1;
        }
    }
    let mut level: Vec<Vec<ItemId>> = Vec::new();
    for (i, c) in singles {
        if c >= threshold {
            counts.insert(vec![i], c);
            level.push(vec![i]);
        }
    }

    let mut k = 2;
    while !level.is_empty() && k <= max_len {
        let prev: BTreeSet<&Vec<ItemId>> = level.iter().collect();
        let candidates = apriori_gen(&level, &prev);
        let mut next = Vec::new();
        for cand in candidates {
            let c = db.count(&cand);
            if c >= threshold {
                counts.insert(cand.clone(), c);
                next.push(cand);
            }
        }
        level = next;
        k += 1;
    }
    Ok(FrequentItemsets {
        n: db.len() as u64,
        counts,
    })
}

/// Joins sorted (k-1)-itemsets sharing a (k-2)-prefix, then prunes any
/// candidate with an infrequent (k-1)-subset.
fn apriori_gen(level: &[Vec<ItemId>], prev: &BTreeSet<&Vec<ItemId>>) -> Vec<Vec<ItemId>> {
    let mut out = Vec::new();
    for (i, a) in level.iter().enumerate() {
        for b in &level[i + 1..] {
            let k1 = a.len();
            if a[..k1 - 1] != b[..k1 - 1] {
                // level is sorted, so no later b shares a's prefix
                break;
            }
            let mut cand = a.clone();
            cand.push(b[k1 - 1]);
            let all_subsets_frequent = (0..cand.len()).all(|skip| {
                let sub: Vec<ItemId> = cand
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != skip)
                    .map(|(_, &x)| x)
                    .collect();
                prev.contains(&sub)
            });
            if all_subsets_frequent {
                out.push(cand);
            }
        }
    }
    out
}

struct FpNode {
    item: Option<ItemId>,
    count: u64,
    parent: usize,
    children: HashMap<ItemId, usize>,
}

struct FpTree {
    nodes: Vec<FpNode>,
    /// item -> node indices, in insertion order
    header: BTreeMap<ItemId, Vec<usize>>,
    /// item -> total count in this tree
    item_counts: BTreeMap<ItemId, u64>,
}

impl FpTree {
    /// Builds a tree from weighted item paths, keeping items with count at
    /// least `threshold`, ordered by descending count then ascending id.
    fn build(paths: &[(Vec<ItemId>, u64)], threshold: u64) -> Self {
        let mut totals: BTreeMap<ItemId, u64> = BTreeMap::new();
        for (items, w) in paths {
            for &i in items {
                *totals.entry(i).or_insert(0) += w;
            }
        }
        totals.retain(|_, c| *c >= threshold);
        let rank = |i: &ItemId| (std::cmp::Reverse(totals[i]), *i);

        let mut tree = FpTree {
            nodes: vec![FpNode {
                item: None,
                count: 0,
                parent: 0,
                children: HashMap::new(),
            }],
            header: BTreeMap::new(),
            item_counts: totals.clone(),
        };
        for (items, w) in paths {
            let mut kept: Vec<ItemId> = items
                .iter()
                .copied()
                .filter(|i| totals.contains_key(i))
                .collect();
            kept.sort_by_key(rank);
            tree.insert(&kept, *w);
        }
        tree
    }

    fn insert(&mut self, items: &[ItemId], weight: u64) {
        let mut cur = 0;
        for &item in items {
            cur = match self.nodes[cur].children.get(&item) {
                Some(&child) => {
                    self.nodes[child].count += weight;
                    child
                }
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(FpNode {
                        item: Some(item),
                        count: weight,
                        parent: cur,
                        children: HashMap::new(),
                    });
                    self.nodes[cur].children.insert(item, idx);
                    self.header.entry(item).or_default().push(idx);
                    idx
                }
            };
        }
    }

    /// Prefix paths leading to each occurrence of `item`, weighted by that
    /// occurrence's count.
    fn conditional_base(&self, item: ItemId) -> Vec<(Vec<ItemId>, u64)> {
        let mut base = Vec::new();
        for &node in &self.header[&item] {
            let mut path = Vec::new();
            let mut cur = self.nodes[node].parent;
            while cur != 0 {
                path.push(self.nodes[cur].item.expect("non-root node has an item"));
                cur = self.nodes[cur].parent;
            }
            if !path.is_empty() {
                path.reverse();
                base.push((path, self.nodes[node].count));
            }
        }
        base
    }
}

/// FP-Growth over an FP-tree with recursive conditional-tree projection.
pub fn mine_frequent_fpgrowth(
    db: &TransactionDb,
    min_support: f64,
    max_len: Option<usize>,
) -> Result<FrequentItemsets, MiningError> {
    check_support(min_support)?;
    if db.is_empty() {
        return Err(MiningError::EmptyDatabase);
    }
    let threshold = min_count(min_support, db.len());
    let paths: Vec<(Vec<ItemId>, u64)> = db
        .transactions()
        .iter()
        .map(|t| (t.clone(), 1))
        .collect();
    let tree = FpTree::build(&paths, threshold);
    let mut counts = BTreeMap::new();
    fp_grow(
        &tree,
        &mut Vec::new(),
        threshold,
        max_len.unwrap_or(usize::MAX),
        &mut counts,
    );
    Ok(FrequentItemsets {
        n: db.len() as u64,
        counts,
    })
}

fn fp_grow(
    tree: &FpTree,
    suffix: &mut Vec<ItemId>,
    threshold: u64,
    max_len: usize,
    out: &mut BTreeMap<Vec<ItemId>, u64>,
) {
    for (&item, &count) in &tree.item_counts {
        suffix.push(item);
        let mut key = suffix.clone();
        key.sort();
        out.insert(key, count);
        if suffix.len() < max_len {
            let base = tree.conditional_base(item);
            if !base.is_empty() {
                let cond = FpTree::build(&base, threshold);
                if !cond.item_counts.is_empty() {
                    fp_grow(&cond, suffix, threshold, max_len, out);
                }
            }
        }
        suffix.pop();
    }
}

/// An association rule `antecedent -> consequent`, with exact counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationRule {
    pub antecedent: Vec<ItemId>,
    pub consequent: Vec<ItemId>,
    /// Transactions containing antecedent and consequent together.
    pub support_count: u64,
    /// Transactions containing the antecedent.
    pub antecedent_count: u64,
    pub n: u64,
}

impl AssociationRule {
    pub fn support(&self) -> f64 {
        self.support_count as f64 / self.n as f64
    }

    pub fn confidence(&self) -> f64 {
        self.support_count as f64 / self.antecedent_count as f64
    }

    /// Orders by confidence desc, support desc, then antecedent and
    /// consequent ascending. Ratios are compared by cross-multiplication.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        let lhs = self.support_count as u128 * other.antecedent_count as u128;
        let rhs = other.support_count as u128 * self.antecedent_count as u128;
        rhs.cmp(&lhs)
            .then_with(|| {
                let l = self.support_count as u128 * other.n as u128;
                let r = other.support_count as u128 * self.n as u128;
                r.cmp(&l)
            })
            .then_with(|| self.antecedent.cmp(&other.antecedent))
            .then_with(|| self.consequent.cmp(&other.consequent))
    }
}

/// Emits `A -> F \ A` for every frequent F (|F| >= 2) and non-empty proper
/// subset A whose confidence reaches `min_confidence`.
pub fn generate_rules(
    frequents: &FrequentItemsets,
    min_confidence: f64,
) -> Result<Vec<AssociationRule>, MiningError> {
    if !(min_confidence > 0.0 && min_confidence <= 1.0) {
        return Err(MiningError::MinConfidence(min_confidence));
    }
    for items in frequents.counts.keys().filter(|k| k.len() >= 2) {
        for skip in 0..items.len() {
            let sub: Vec<ItemId> = items
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != skip)
                .map(|(_, &x)| x)
                .collect();
            if !frequents.counts.contains_key(&sub) {
                return Err(MiningError::NotDownwardClosed(sub));
            }
        }
    }

    let mut rules = Vec::new();
    for (items, &count) in frequents.counts.iter().filter(|(k, _)| k.len() >= 2) {
        let k = items.len();
        for mask in 1..(1u64 << k) - 1 {
            let (mut ante, mut cons) = (Vec::new(), Vec::new());
            for (bit, &item) in items.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    ante.push(item);
                } else {
                    cons.push(item);
                }
            }
            let ante_count = frequents.counts[&ante];
            if count as f64 / ante_count as f64 >= min_confidence {
                rules.push(AssociationRule {
                    antecedent: ante,
                    consequent: cons,
                    support_count: count,
                    antecedent_count: ante_count,
                    n: frequents.n,
                });
            }
        }
    }
    rules.sort_by(|a, b| a.rank_cmp(b));
    Ok(rules)
}

/// Mines and generates rules in one step.
pub fn mine_rules(
    db: &TransactionDb,
    params: &MiningParams,
) -> Result<(FrequentItemsets, Vec<AssociationRule>), MiningError> {
    params.validate()?;
    let frequents = mine(db, params)?;
    let rules = generate_rules(&frequents, params.min_confidence)?;
    Ok((frequents, rules))
}

/// Serialized rule with item names instead of ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub support_count: u64,
    pub antecedent_count: u64,
    pub n: u64,
    pub support: f64,
    pub confidence: f64,
}

pub fn rule_records<'a, F>(rules: &[AssociationRule], name: F) -> Vec<RuleRecord>
where
    F: Fn(ItemId) -> &'a str,
{
    rules
        .iter()
        .map(|r| RuleRecord {
            antecedent: r.antecedent.iter().map(|&i| name(i).to_string()).collect(),
            consequent: r.consequent.iter().map(|&i| name(i).to_string()).collect(),
            support_count: r.support_count,
            antecedent_count: r.antecedent_count,
            n: r.n,
            support: r.support(),
            confidence: r.confidence(),
        })
        .collect()
}

fn names_to_ids<F>(names: &[String], row: usize, lookup: &F) -> Result<Vec<ItemId>, MiningError>
where
    F: Fn(&str) -> Option<ItemId>,
{
    let mut ids = names
        .iter()
        .map(|n| {
            lookup(n).ok_or_else(|| MiningError::RuleTable {
                row,
                reason: format!("unknown item `{n}`"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ids.sort();
    Ok(ids)
}

pub fn rules_from_records<F>(
    records: &[RuleRecord],
    lookup: F,
) -> Result<Vec<AssociationRule>, MiningError>
where
    F: Fn(&str) -> Option<ItemId>,
{
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(AssociationRule {
                antecedent: names_to_ids(&r.antecedent, i + 1, &lookup)?,
                consequent: names_to_ids(&r.consequent, i + 1, &lookup)?,
                support_count: r.support_count,
                antecedent_count: r.antecedent_count,
                n: r.n,
            })
        })
        .collect()
}

pub fn write_rules_json<W: Write>(w: W, records: &[RuleRecord]) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, records)
}

pub fn read_rules_json<R: Read>(r: R) -> Result<Vec<RuleRecord>, MiningError> {
    serde_json::from_reader(r).map_err(|e| MiningError::RuleTable {
        row: e.line(),
        reason: e.to_string(),
    })
}

/// CSV with columns antecedent, consequent, support_count, n, support,
/// confidence. Item lists are pipe-joined; ratios have six decimals.
pub fn write_rules_csv<W: Write>(w: W, records: &[RuleRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "antecedent",
        "consequent",
        "support_count",
        "n",
        "support",
        "confidence",
    ])?;
    for r in records {
        wtr.write_record([
            r.antecedent.join("|"),
            r.consequent.join("|"),
            r.support_count.to_string(),
            r.n.to_string(),
            format!("{:.6}", r.support),
            format!("{:.6}", r.confidence),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the CSV form back. The antecedent count is recovered from the
/// rounded confidence, which is exact while counts stay well below 10^5.
pub fn read_rules_csv<R: Read>(r: R) -> Result<Vec<RuleRecord>, MiningError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let err = |reason: String| MiningError::RuleTable {
            row: row_no,
            reason,
        };
        let row = row.map_err(|e| err(e.to_string()))?;
        if row.len() != 6 {
            return Err(err(format!("expected 6 columns, found {}", row.len())));
        }
        let list = |s: &str| -> Vec<String> {
            s.split('|')
                .filter(|x| !x.is_empty())
                .map(str::to_string)
                .collect()
        };
        let num = |s: &str| -> Result<f64, MiningError> {
            s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")))
        };
        let int = |s: &str| -> Result<u64, MiningError> {
            s.parse::<u64>().map_err(|e| err(format!("`{s}`: {e}")))
        };
        let support_count = int(&row[2])?;
        let confidence = num(&row[5])?;
        if confidence <= 0.0 {
            return Err(err("confidence must be positive".into()));
        }
        out.push(RuleRecord {
            antecedent: list(&row[0]),
            consequent: list(&row[1]),
            support_count,
            antecedent_count: (support_count as f64 / confidence).round() as u64,
            n: int(&row[3])?,
            support: num(&row[4])?,
            confidence,
        });
    }
    Ok(out)
}
