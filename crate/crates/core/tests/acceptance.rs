//! Acceptance suite: one check per release criterion, each printed as a
//! PASS/FAIL line. Exits non-zero when any check fails.
//!
//! Run with `cargo test -p pantry-core --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use num::{BigInt, BigRational, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pantry_core::classify::{
    assign_classes, evaluate, evaluate_predictions, fit_nb, fit_sgd, logistic_gradient,
    logistic_loss, FeatureVector, Hyper, LabeledExample, TrainingSet, Vocabulary,
};
use pantry_core::corpus::{Corpus, IngredientId, Recipe, RecipeId};
use pantry_core::ingnet::build_graph_from_sets;
use pantry_core::pipeline::{load_artifacts, run_pipeline, PipelineConfig};
use pantry_core::recommend::{expand_combinations, ranked_consequents, recommend, RecommendQuery};
use pantry_core::rulemine::{
    generate_rules, min_count, mine_frequent_apriori, mine_frequent_fpgrowth, read_rules_csv,
    AssociationRule, TransactionDb,
};
use pantry_core::simcanon::{canonicalize, cosine, jaccard, jaro_winkler, SimilarityMetric};
use pantry_core::textprep::CleanIngredient;
use pantry_core::IngredientLexicon;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(v: &[u32]) -> BTreeSet<IngredientId> {
    v.iter().map(|&i| IngredientId(i)).collect()
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn lexicon_of(names: &[&str]) -> IngredientLexicon {
    IngredientLexicon {
        canon: names
            .iter()
            .enumerate()
            .map(|(i, n)| (IngredientId(i as u32), n.to_string()))
            .collect(),
        alias: names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), IngredientId(i as u32)))
            .collect(),
        metric: SimilarityMetric::CosineTokens,
        threshold: 0.85,
    }
}

/// Brute-force frequent itemsets: every non-empty subset of the universe
/// whose count satisfies `count * 10 >= k * n`.
fn brute_force_frequent(db: &[Vec<u32>], universe: u32, k: u64) -> BTreeMap<Vec<IngredientId>, u64> {
    let n = db.len() as u64;
    let masks: Vec<u32> = db
        .iter()
        .map(|t| t.iter().fold(0u32, |m, &i| m | (1 << i)))
        .collect();
    let mut out = BTreeMap::new();
    for subset in 1u32..(1 << universe) {
        let count = masks.iter().filter(|&&m| m & subset == subset).count() as u64;
        if count > 0 && count * 10 >= k * n {
            let items = (0..universe)
                .filter(|b| subset & (1 << b) != 0)
                .map(IngredientId)
                .collect();
            out.insert(items, count);
        }
    }
    out
}

fn mining_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let cases = 250;
    let mut itemsets = 0usize;
    for case in 0..cases {
        let universe = rng.gen_range(1..=10u32);
        let n = rng.gen_range(1..=50usize);
        let density = rng.gen_range(0.1..0.9);
        let db: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let mut t: Vec<u32> = (0..universe).filter(|_| rng.gen_bool(density)).collect();
                if t.is_empty() {
                    t.push(rng.gen_range(0..universe));
                }
                t
            })
            .collect();
        let k = rng.gen_range(1..=9u64);
        let min_support = k as f64 / 10.0;
        let tdb = TransactionDb::new(db.iter().map(|t| t.iter().map(|&i| IngredientId(i))))
            .map_err(|e| e.to_string())?;
        let oracle = brute_force_frequent(&db, universe, k);
        let apriori = mine_frequent_apriori(&tdb, min_support, None).map_err(|e| e.to_string())?;
        let fp = mine_frequent_fpgrowth(&tdb, min_support, None).map_err(|e| e.to_string())?;
        ensure(apriori.counts == oracle, || format!("case {case}: apriori differs from brute force"))?;
        ensure(fp.counts == oracle, || format!("case {case}: fp-growth differs from brute force"))?;
        itemsets += oracle.len();
    }
    Ok(format!("{cases} databases, {itemsets} frequent itemsets, all three agree"))
}

struct Golden {
    dir: tempfile::TempDir,
    manifest_hash: String,
    elapsed: Duration,
    evaluation: Vec<(String, f64, f64)>,
}

fn run_golden() -> Result<Golden, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig::from_file(&repo_root().join("config/pipeline.toml"))
        .map_err(|e| e.to_string())?;
    cfg.output_dir = dir.path().join("artifacts");
    let start = Instant::now();
    let summary = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    Ok(Golden {
        evaluation: summary
            .evaluation
            .iter()
            .map(|(t, e)| (t.clone(), e.sgd.accuracy, e.majority_baseline))
            .collect(),
        dir,
        manifest_hash: summary.manifest_hash,
        elapsed,
    })
}

fn rules_reverify(golden: &Golden) -> Check {
    let out = golden.dir.path().join("artifacts");
    let bundle = load_artifacts(&out).map_err(|e| e.to_string())?;
    // raw transactions as written by the pipeline, one recipe per line
    let text = std::fs::read_to_string(out.join("transactions.txt")).map_err(|e| e.to_string())?;
    let transactions: Vec<BTreeSet<&str>> = text.lines().map(|l| l.split('|').collect()).collect();
    let n = transactions.len() as u64;
    ensure(n == bundle.corpus.len() as u64, || "transaction count differs from corpus".into())?;
    let min_sup = min_count(0.02, n as usize);
    let lex = bundle.lexicon();
    let count = |items: &[IngredientId]| -> u64 {
        let names: Vec<&str> = items.iter().map(|&i| lex.name(i).unwrap()).collect();
        transactions
            .iter()
            .filter(|t| names.iter().all(|x| t.contains(x)))
            .count() as u64
    };
    let csv = std::fs::read(out.join("rules.csv")).map_err(|e| e.to_string())?;
    let csv_rows = read_rules_csv(csv.as_slice()).map_err(|e| e.to_string())?;
    ensure(csv_rows.len() == bundle.rules.len(), || "rules.csv row count differs".into())?;
    ensure(!bundle.rules.is_empty(), || "no rules mined on the sample corpus".into())?;
    for (r, row) in bundle.rules.iter().zip(&csv_rows) {
        let both: Vec<IngredientId> = r.antecedent.iter().chain(&r.consequent).copied().collect();
        let sc = count(&both);
        let ac = count(&r.antecedent);
        ensure(sc == r.support_count && ac == r.antecedent_count && r.n == n, || {
            format!("rule {:?} -> {:?}: stored counts differ from transactions", r.antecedent, r.consequent)
        })?;
        ensure(sc >= min_sup, || format!("rule below min support: {sc} < {min_sup}"))?;
        ensure(sc as f64 / ac as f64 >= 0.2, || "rule below min confidence".into())?;
        ensure((row.support - sc as f64 / n as f64).abs() <= 5e-7, || "csv support differs".into())?;
        ensure((row.confidence - sc as f64 / ac as f64).abs() <= 5e-7, || "csv confidence differs".into())?;
    }
    Ok(format!("{} rules re-verified against {n} transactions", bundle.rules.len()))
}

fn worked_example() -> Check {
    // basil=0, garlic=1, onions=2, tomatoes=3
    let rule = |a: u32, c: u32| AssociationRule {
        antecedent: vec![IngredientId(a)],
        consequent: vec![IngredientId(c)],
        support_count: 1,
        antecedent_count: 1,
        n: 1,
    };
    let rules = vec![rule(1, 2), rule(0, 3)];
    let base = ids(&[1, 0]);
    let combos: BTreeSet<BTreeSet<IngredientId>> =
        expand_combinations(&base, &ranked_consequents(&rules, &base), 8)
            .into_iter()
            .map(|c| c.items)
            .collect();
    let expected: BTreeSet<BTreeSet<IngredientId>> =
        [ids(&[0, 1]), ids(&[0, 1, 2]), ids(&[0, 1, 3]), ids(&[0, 1, 2, 3])].into();
    ensure(combos == expected, || format!("got {combos:?}"))?;
    for k in 0..=8u32 {
        let cons: Vec<IngredientId> = (10..10 + k).map(IngredientId).collect();
        let got = expand_combinations(&ids(&[0]), &cons, 8).len();
        ensure(got == 1 << k, || format!("k={k}: {got} combinations"))?;
    }
    Ok("4 combinations for {garlic, basil}; 2^k holds for k = 0..8".into())
}

fn random_corpus(rng: &mut ChaCha8Rng, universe: u32) -> Corpus {
    let names: Vec<String> = (0..universe).map(|i| format!("item{i:02}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let n = rng.gen_range(1..=30usize);
    let recipes: Vec<Recipe> = (0..n)
        .map(|i| {
            let mut set: BTreeSet<IngredientId> =
                (0..universe).filter(|_| rng.gen_bool(0.35)).map(IngredientId).collect();
            if set.is_empty() {
                set.insert(IngredientId(rng.gen_range(0..universe)));
            }
            Recipe {
                id: RecipeId(i as u32),
                title: format!("recipe {i}"),
                ingredient_ids: set,
                labels: BTreeMap::new(),
            }
        })
        .collect();
    Corpus::new(recipes, lexicon_of(&name_refs), &[]).expect("valid random corpus")
}

fn recommend_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let cases = 1200;
    let mut results = 0usize;
    for case in 0..cases {
        let universe = rng.gen_range(3..=10u32);
        let corpus = random_corpus(&mut rng, universe);
        let db = TransactionDb::new(corpus.recipes().iter().map(|r| r.ingredient_ids.iter().copied()))
            .map_err(|e| e.to_string())?;
        let freq = mine_frequent_apriori(&db, rng.gen_range(0.05..0.6), Some(4)).map_err(|e| e.to_string())?;
        let rules = generate_rules(&freq, rng.gen_range(0.1..1.0)).map_err(|e| e.to_string())?;

        let mut pool: Vec<u32> = (0..universe).collect();
        pool.shuffle(&mut rng);
        let n_inc = rng.gen_range(1..=3.min(universe as usize - 1));
        let n_exc = rng.gen_range(0..=2.min(universe as usize - n_inc));
        let include = ids(&pool[..n_inc]);
        let exclude = ids(&pool[n_inc..n_inc + n_exc]);
        let all = corpus.len();
        let query = RecommendQuery::new(include.iter().copied())
            .excluding(exclude.iter().copied())
            .with_max_results(all);
        let recs = recommend(&corpus, &rules, &query).map_err(|e| format!("case {case}: {e}"))?;
        for r in &recs {
            ensure(include.is_subset(&r.recipe.ingredient_ids), || format!("case {case}: result misses base"))?;
            ensure(r.recipe.ingredient_ids.is_disjoint(&exclude), || format!("case {case}: result hits exclude"))?;
        }
        let expected = corpus
            .recipes()
            .iter()
            .filter(|r| include.is_subset(&r.ingredient_ids) && r.ingredient_ids.is_disjoint(&exclude))
            .count();
        ensure(recs.len() == expected, || format!("case {case}: {} results, {expected} eligible", recs.len()))?;

        // excluding one more ingredient can only remove results
        if let Some(&extra) = pool.get(n_inc + n_exc) {
            let mut more = exclude.clone();
            more.insert(IngredientId(extra));
            let narrower = recommend(
                &corpus,
                &rules,
                &RecommendQuery::new(include.iter().copied()).excluding(more).with_max_results(all),
            )
            .map_err(|e| e.to_string())?;
            let before: BTreeSet<RecipeId> = recs.iter().map(|r| r.recipe.id).collect();
            let after: BTreeSet<RecipeId> = narrower.iter().map(|r| r.recipe.id).collect();
            ensure(after.is_subset(&before), || format!("case {case}: exclusion not monotone"))?;
        }

        let capped = recommend(&corpus, &rules, &query.clone().with_max_results(3)).map_err(|e| e.to_string())?;
        ensure(capped.len() == recs.len().min(3), || format!("case {case}: truncation"))?;
        results += recs.len();
    }
    Ok(format!("{cases} random queries, {results} results, zero violations"))
}

fn random_clean(rng: &mut ChaCha8Rng) -> String {
    let words = rng.gen_range(1..=3);
    (0..words)
        .map(|_| {
            let len = rng.gen_range(1..=7);
            (0..len).map(|_| (b'a' + rng.gen_range(0..6u8)) as char).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn similarity_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let pairs = 12_000;
    let metrics = [
        SimilarityMetric::JaccardTokens,
        SimilarityMetric::CosineTokens,
        SimilarityMetric::JaroWinkler,
    ];
    for _ in 0..pairs {
        let a = random_clean(&mut rng);
        let b = random_clean(&mut rng);
        for m in metrics {
            let ab = m.score(&a, &b);
            let ba = m.score(&b, &a);
            ensure(ab == ba, || format!("{m}: asymmetric on {a:?}/{b:?}"))?;
            ensure((0.0..=1.0).contains(&ab), || format!("{m}: {ab} out of range"))?;
            ensure(m.score(&a, &a) == 1.0, || format!("{m}: identity fails on {a:?}"))?;
        }
    }
    let jw = jaro_winkler("martha", "marhta");
    ensure((jw - 0.9611).abs() <= 1e-4, || format!("jaro_winkler(martha, marhta) = {jw}"))?;
    let c = cosine("chicken breast", "chicken thighs");
    ensure(c == 0.5, || format!("cosine = {c}"))?;
    ensure(jaccard("chicken breast", "chicken thighs") == 1.0 / 3.0, || "jaccard".into())?;
    let lex = canonicalize(
        &[
            CleanIngredient::new("chicken breast").unwrap(),
            CleanIngredient::new("chicken thighs").unwrap(),
        ],
        SimilarityMetric::CosineTokens,
        0.5,
    )
    .map_err(|e| e.to_string())?;
    let id = lex.alias["chicken breast"];
    ensure(lex.len() == 1 && lex.name(id) == Some("chicken"), || format!("lexicon {:?}", lex.canon))?;
    Ok(format!("{pairs} pairs x 3 metrics; martha/marhta = {jw:.4}; cosine = 0.5; merge -> chicken"))
}

fn separable_toy() -> TrainingSet {
    let names = ["soy", "rice", "beef", "milk", "corn"];
    let examples = (0..20usize)
        .map(|i| {
            let extra = 1 + i % 4;
            let (active, label) = if i % 2 == 0 { (vec![0, extra], 0) } else { (vec![extra], 1) };
            LabeledExample {
                features: FeatureVector { vocab_size: 5, active },
                labels: vec![label],
            }
        })
        .collect();
    TrainingSet {
        taxonomy: "toy".into(),
        classes: vec!["A".into(), "B".into()],
        vocab: Vocabulary::new(names.iter().map(|s| s.to_string()).collect()),
        examples,
    }
}

fn exact_nb_posterior(set: &TrainingSet, alpha: i64, x: &FeatureVector) -> Vec<f64> {
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

fn classifier_checks() -> Check {
    use pantry_core::classify::Classifier;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.gen_range(1..=8);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let b = rng.gen_range(-1.0..1.0);
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let l2 = rng.gen_range(0.0..0.1);
        let (gw, gb) = logistic_gradient(&w, b, &x, y, l2);
        let h = 1e-6;
        let rel = |num: f64, ana: f64| (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8);
        for j in 0..d {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            let num = (logistic_loss(&wp, b, &x, y, l2) - logistic_loss(&wm, b, &x, y, l2)) / (2.0 * h);
            worst = worst.max(rel(num, gw[j]));
        }
        let num = (logistic_loss(&w, b + h, &x, y, l2) - logistic_loss(&w, b - h, &x, y, l2)) / (2.0 * h);
        worst = worst.max(rel(num, gb));
    }
    ensure(worst < 1e-5, || format!("worst relative gradient error {worst:e}"))?;

    let toy = separable_toy();
    let mut reached = None;
    for epochs in 1..=50 {
        let m = fit_sgd(&toy, Hyper { epochs, ..Hyper::default() });
        if evaluate(&m, &toy.examples).accuracy == 1.0 {
            reached = Some(epochs);
            break;
        }
    }
    let reached = reached.ok_or("SGD did not separate the toy set within 50 epochs")?;

    let mut nb_cases = 0;
    for _ in 0..300 {
        let k = rng.gen_range(2..=3);
        let v = rng.gen_range(1..=4);
        let n = rng.gen_range(k..=10);
        let mut examples: Vec<LabeledExample> = (0..n)
            .map(|i| LabeledExample {
                features: FeatureVector {
                    vocab_size: v,
                    active: (0..v).filter(|_| rng.gen_bool(0.5)).collect(),
                },
                labels: vec![i % k],
            })
            .collect();
        if rng.gen_bool(0.3) {
            let extra = (examples[0].labels[0] + 1) % k;
            examples[0].labels.push(extra);
        }
        let set = TrainingSet {
            taxonomy: "t".into(),
            classes: (0..k).map(|c| format!("c{c}")).collect(),
            vocab: Vocabulary::new((0..v).map(|j| format!("i{j}")).collect()),
            examples,
        };
        let alpha = rng.gen_range(1..=3);
        let model = fit_nb(&set, alpha as f64);
        for mask in 0..(1usize << v) {
            let x = FeatureVector {
                vocab_size: v,
                active: (0..v).filter(|j| mask & (1 << j) != 0).collect(),
            };
            let got = model.probabilities(&x);
            let want = exact_nb_posterior(&set, alpha, &x);
            for (g, w) in got.iter().zip(&want) {
                ensure((g - w).abs() <= 1e-12, || format!("NB posterior {got:?} vs exact {want:?}"))?;
            }
            nb_cases += 1;
        }
    }
    Ok(format!(
        "gradient rel err max {worst:.2e}; toy set separated after {reached} epochs; {nb_cases} NB posteriors exact"
    ))
}

fn threshold_semantics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut fallbacks = 0;
    let cases = 5000;
    for case in 0..cases {
        let k = rng.gen_range(1..=8);
        let classes: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let probs: Vec<f64> = (0..k)
            .map(|_| match rng.gen_range(0..6) {
                0 => 0.3,
                1 => rng.gen_range(0.0..0.3),
                _ => rng.gen_range(0.0..1.0),
            })
            .collect();
        let got = assign_classes(&classes, &probs, 0.3);
        let above: Vec<String> = classes
            .iter()
            .zip(&probs)
            .filter(|(_, &p)| p >= 0.3)
            .map(|(c, _)| c.clone())
            .collect();
        if above.is_empty() {
            fallbacks += 1;
            let max = probs.iter().cloned().fold(f64::MIN, f64::max);
            let first = probs.iter().position(|&p| p == max).unwrap();
            ensure(got == vec![classes[first].clone()], || format!("case {case}: fallback {got:?}"))?;
        } else {
            ensure(got == above, || format!("case {case}: {got:?} vs {above:?}"))?;
        }
    }
    let cs: Vec<String> = ["Asian", "American", "Mexican"].iter().map(|s| s.to_string()).collect();
    ensure(assign_classes(&cs, &[0.5, 0.35, 0.15], 0.3) == cs[..2].to_vec(), || "fixed example".into())?;
    Ok(format!("{cases} probability maps, {fallbacks} took the argmax fallback"))
}

fn evaluation_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    for case in 0..500 {
        let k = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=60);
        let classes: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let e = evaluate_predictions(&classes, &truth, &pred);
        for c in 0..k {
            let row: u64 = e.confusion[c].iter().sum();
            let want = truth.iter().filter(|&&t| t == c).count() as u64;
            ensure(row == want, || format!("case {case}: row {c} sums to {row}, want {want}"))?;
        }
        let trace: u64 = (0..k).map(|i| e.confusion[i][i]).sum();
        ensure(e.accuracy == trace as f64 / n as f64, || format!("case {case}: accuracy"))?;
    }
    for k in 2..=8usize {
        let per = 7;
        let classes: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let truth: Vec<usize> = (0..k * per).map(|i| i % k).collect();
        let e = evaluate_predictions(&classes, &truth, &vec![k - 1; k * per]);
        ensure(e.accuracy == 1.0 / k as f64, || format!("k={k}: constant predictor scored {}", e.accuracy))?;
    }
    Ok("row sums, trace/total on 500 random cases; constant predictor = 1/k for k = 2..8".into())
}

fn golden_pipeline(first: &Golden) -> Check {
    let second = run_golden()?;
    ensure(first.manifest_hash == second.manifest_hash, || {
        format!("manifest hashes differ: {} vs {}", first.manifest_hash, second.manifest_hash)
    })?;
    let a = std::fs::read(first.dir.path().join("artifacts/manifest.json")).map_err(|e| e.to_string())?;
    let b = std::fs::read(second.dir.path().join("artifacts/manifest.json")).map_err(|e| e.to_string())?;
    ensure(a == b, || "manifest bytes differ".into())?;
    let slowest = first.elapsed.max(second.elapsed);
    ensure(slowest < Duration::from_secs(60), || format!("pipeline took {slowest:?}"))?;
    let mut parts = Vec::new();
    for (t, acc, base) in &first.evaluation {
        ensure(acc > base, || format!("{t}: accuracy {acc:.4} does not beat majority baseline {base:.4}"))?;
        parts.push(format!("{t} {acc:.3}>{base:.3}"));
    }
    ensure(first.evaluation.len() == 3, || "expected three taxonomies".into())?;
    Ok(format!(
        "manifest {} reproduced; {:.2}s; {}",
        &first.manifest_hash[..12],
        slowest.as_secs_f64(),
        parts.join(", ")
    ))
}

fn network_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    let names: Vec<String> = (0..12).map(|i| format!("n{i}")).collect();
    for case in 0..100 {
        let universe = rng.gen_range(1..=12u32);
        let lists = rng.gen_range(0..=15);
        let sets: Vec<BTreeSet<IngredientId>> = (0..lists)
            .map(|_| {
                let mut s: BTreeSet<IngredientId> =
                    (0..universe).filter(|_| rng.gen_bool(0.3)).map(IngredientId).collect();
                if s.is_empty() {
                    s.insert(IngredientId(rng.gen_range(0..universe)));
                }
                s
            })
            .collect();
        let min = rng.gen_range(1..=3u32);
        let refs: Vec<&BTreeSet<IngredientId>> = sets.iter().collect();
        let g = build_graph_from_sets(&refs, &BTreeSet::new(), |id| names[id.0 as usize].as_str(), min);

        let nodes: BTreeSet<u32> = sets.iter().flatten().map(|i| i.0).collect();
        let mut expected_edges = BTreeMap::new();
        for &a in &nodes {
            for &b in nodes.range(a + 1..) {
                let w = sets
                    .iter()
                    .filter(|s| s.contains(&IngredientId(a)) && s.contains(&IngredientId(b)))
                    .count() as u32;
                if w >= min {
                    expected_edges.insert((a, b), w);
                }
            }
        }
        let got_edges: BTreeMap<(u32, u32), u32> = g.edges.iter().map(|e| ((e.a.0, e.b.0), e.weight)).collect();
        ensure(got_edges == expected_edges, || format!("case {case}: edge weights differ"))?;
        ensure(g.nodes.iter().map(|n| n.id.0).collect::<BTreeSet<_>>() == nodes, || format!("case {case}: node set"))?;

        // independent union-find over the oracle edges
        let mut parent: BTreeMap<u32, u32> = nodes.iter().map(|&n| (n, n)).collect();
        fn find(p: &mut BTreeMap<u32, u32>, x: u32) -> u32 {
            let mut r = x;
            while p[&r] != r {
                r = p[&r];
            }
            r
        }
        for &(a, b) in expected_edges.keys() {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra.max(rb), ra.min(rb));
            }
        }
        let mut groups: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for &n in &nodes {
            let r = find(&mut parent, n);
            groups.entry(r).or_default().insert(n);
        }
        let want: BTreeSet<BTreeSet<u32>> = groups.into_values().collect();
        let got: BTreeSet<BTreeSet<u32>> = g
            .clusters
            .iter()
            .map(|c| c.iter().map(|i| i.0).collect())
            .collect();
        ensure(got == want, || format!("case {case}: clusters {got:?} vs {want:?}"))?;
    }
    Ok("100 random recommendation lists; weights and components match oracles".into())
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, result: Check| match result {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(why) => {
            failures += 1;
            println!("FAIL  {name}: {why}");
        }
    };

    report("mining oracle equivalence", mining_oracle());
    let golden = run_golden();
    report(
        "rule correctness on sample corpus",
        golden.as_ref().map_err(Clone::clone).and_then(rules_reverify),
    );
    report("worked combination example", worked_example());
    report("recommendation contract", recommend_contract());
    report("similarity metrics", similarity_metrics());
    report("classifier gradient, separability, NB oracle", classifier_checks());
    report("multi-label threshold semantics", threshold_semantics());
    report("evaluation identities", evaluation_identities());
    report(
        "sample-corpus golden pipeline",
        golden.as_ref().map_err(Clone::clone).and_then(golden_pipeline),
    );
    report("network oracle", network_oracle());

    if failures > 0 {
        println!("{failures} acceptance check(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
