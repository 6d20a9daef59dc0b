//! `pantry` command-line tool.
//!
//! Exit codes: 0 on success, 1 on runtime failures, 2 on usage errors
//! (bad flags, unreadable inputs, out-of-range parameters). Data goes to
//! stdout, diagnostics to stderr.

use std::collections::BTreeSet;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pantry_core::api::{self, ApiError, ClassifyRequest, ErrorCode, RecommendRequest};
use pantry_core::classify::{evaluate, featurize, write_evaluation_csv, Classifier, LabeledExample};
use pantry_core::corpus::{corpus_stats, load_corpus, write_stats_csv, CorpusFormat};
use pantry_core::pipeline::{load_artifacts, prepare_corpus, run_pipeline, Bundle, PipelineConfig, PipelineError};
use pantry_core::recommend::DEFAULT_MAX_RESULTS;
use pantry_core::rulemine::{
    mine_rules, rule_records, write_rules_csv, Algorithm, ItemId, MiningError, MiningParams, TransactionDb,
    DEFAULT_MAX_LEN, DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_SUPPORT,
};
use pantry_core::IngredientId;
use pantry_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "pantry", version, about = "Ingredient-driven recipe recommender")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch pipeline operations
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// Mine association rules from a transaction file; rules CSV on stdout
    Mine(MineArgs),
    /// Recommend recipes for a set of ingredients
    Recommend(RecommendArgs),
    /// Predict labels for an ingredient list in every taxonomy
    Classify(ClassifyArgs),
    /// Score a trained model on a labeled recipe file; CSV on stdout
    Evaluate(EvaluateArgs),
    /// Per-class recipe counts and mean ingredient counts; CSV on stdout
    Stats(StatsArgs),
    /// Serve the HTTP API until interrupted
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Build the artifact directory from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct ArtifactsArg {
    /// Artifact directory written by `pipeline run`
    #[arg(long, env = "PANTRY_ARTIFACTS")]
    artifacts: PathBuf,
}

#[derive(Args)]
struct MineArgs {
    /// One transaction per line, items separated by `|` (or `,` when a line has no `|`)
    #[arg(long)]
    transactions: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    min_support: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
    min_confidence: f64,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Apriori)]
    algorithm: AlgorithmArg,
    /// Largest itemset size; 0 for no limit
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Apriori,
    FpGrowth,
}

#[derive(Args)]
struct RecommendArgs {
    #[command(flatten)]
    artifacts: ArtifactsArg,
    #[arg(long, value_delimiter = ',', required = true)]
    ingredients: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_RESULTS)]
    max_results: usize,
    /// Print the service response document instead of CSV
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    artifacts: ArtifactsArg,
    #[arg(long, value_delimiter = ',', required = true)]
    ingredients: Vec<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    artifacts: ArtifactsArg,
    #[arg(long)]
    taxonomy: String,
    /// Labeled recipes, JSONL or CSV (e.g. `split/test.jsonl` from the artifacts)
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Sgd)]
    model: ModelArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sgd,
    Nb,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Pipeline config whose prep and similarity settings to use
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    artifacts: ArtifactsArg,
    #[arg(long, env = "PANTRY_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Allowed CORS origin, `*` for any
    #[arg(long, env = "PANTRY_CORS_ORIGIN")]
    cors_origin: Option<String>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Pipeline {
            command: PipelineCommand::Run { config },
        } => pipeline_run(&config),
        Command::Mine(a) => mine(&a),
        Command::Recommend(a) => recommend(&a),
        Command::Classify(a) => classify(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Stats(a) => stats(&a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn pipeline_run(config: &Path) -> CmdResult {
    let cfg = PipelineConfig::from_file(config).map_err(usage)?;
    let summary = run_pipeline(&cfg).map_err(|e| match e {
        PipelineError::Config(_) => usage(e),
        other => runtime(other),
    })?;
    let c = &summary.manifest.counts;
    let classes: Vec<String> = summary
        .manifest
        .taxonomies
        .iter()
        .map(|t| format!("{}={}", t.name, t.classes.len()))
        .collect();
    println!(
        "recipes={} rules={} ingredients={} classes: {} manifest={} output={}",
        c.recipes,
        c.rules,
        c.ingredients,
        classes.join(" "),
        summary.manifest_hash,
        summary.output_dir.display()
    );
    Ok(())
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(anyhow!("cannot read {}: {e}", path.display())))
}

/// Splits a transaction file into item-name lists, skipping blank lines.
fn parse_transactions(text: &str) -> Vec<Vec<&str>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let sep = if l.contains('|') { '|' } else { ',' };
            l.split(sep).map(str::trim).filter(|s| !s.is_empty()).collect()
        })
        .collect()
}

fn mine(a: &MineArgs) -> CmdResult {
    let text = read_input(&a.transactions)?;
    let rows = parse_transactions(&text);
    // ids follow name order so output does not depend on line order
    let names: Vec<&str> = rows.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let id_of = |n: &str| IngredientId(names.binary_search(&n).expect("name was collected") as u32);
    let db = TransactionDb::new(rows.iter().map(|r| r.iter().map(|&n| id_of(n)).collect::<Vec<ItemId>>()))
        .map_err(usage)?;
    if db.is_empty() {
        return Err(usage(anyhow!("{} holds no transactions", a.transactions.display())));
    }
    let params = MiningParams {
        min_support: a.min_support,
        min_confidence: a.min_confidence,
        algorithm: match a.algorithm {
            AlgorithmArg::Apriori => Algorithm::Apriori,
            AlgorithmArg::FpGrowth => Algorithm::FpGrowth,
        },
        max_len: (a.max_len > 0).then_some(a.max_len),
    };
    let (frequent, rules) = mine_rules(&db, &params).map_err(|e| match e {
        MiningError::MinSupport(_) | MiningError::MinConfidence(_) => usage(e),
        other => runtime(other),
    })?;
    log::info!("{} transactions, {} frequent itemsets, {} rules", db.len(), frequent.len(), rules.len());
    let records = rule_records(&rules, |id| names[id.0 as usize]);
    write_rules_csv(io::stdout().lock(), &records).map_err(runtime)
}

fn load_bundle(a: &ArtifactsArg) -> Result<Bundle, Failure> {
    load_artifacts(&a.artifacts)
        .map_err(|e| runtime(anyhow!(e).context(format!("loading artifacts from {}", a.artifacts.display()))))
}

fn api_failure(e: ApiError) -> Failure {
    let mut msg = e.message.clone();
    if let Some(details) = &e.details {
        msg.push_str(&format!(" {}", serde_json::Value::Object(details.clone())));
    }
    match e.code {
        ErrorCode::BadRequest => usage(anyhow!(msg)),
        _ => runtime(anyhow!(msg)),
    }
}

fn warn_unresolved(unresolved: &[String]) {
    if !unresolved.is_empty() {
        eprintln!("warning: ignored unknown ingredients: {}", unresolved.join(", "));
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> CmdResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(runtime)?;
    writeln!(out)?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn recommend(a: &RecommendArgs) -> CmdResult {
    let bundle = load_bundle(&a.artifacts)?;
    let req = RecommendRequest {
        ingredients: a.ingredients.clone(),
        exclude: a.exclude.clone(),
        max_results: Some(a.max_results),
    };
    let resp = api::recommend_raw(&bundle, &req).map_err(api_failure)?;
    warn_unresolved(&resp.unresolved);
    if a.json {
        return print_json(&resp);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "rank,recipe_id,title,matched_combination_size,matched_consequents,ingredients")?;
    for (i, r) in resp.recommendations.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            r.recipe_id,
            csv_field(&r.title),
            r.matched_combination_size,
            csv_field(&r.matched_consequents.join("|")),
            csv_field(&r.ingredients.join("|")),
        )?;
    }
    Ok(())
}

fn classify(a: &ClassifyArgs) -> CmdResult {
    let bundle = load_bundle(&a.artifacts)?;
    let req = ClassifyRequest {
        ingredients: a.ingredients.clone(),
    };
    let resp = api::classify_raw(&bundle, &req).map_err(api_failure)?;
    warn_unresolved(&resp.unresolved);
    if a.json {
        return print_json(&resp);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "taxonomy,class,probability,assigned")?;
    for (t, p) in &resp.per_taxonomy {
        for (class, prob) in &p.probabilities {
            writeln!(out, "{},{},{prob:.6},{}", csv_field(t), csv_field(class), p.assigned.contains(class))?;
        }
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> CmdResult {
    let bundle = load_bundle(&a.artifacts)?;
    let model: &dyn Classifier = match a.model {
        ModelArg::Sgd => bundle.sgd.get(&a.taxonomy).map(|m| m as &dyn Classifier),
        ModelArg::Nb => bundle.nb.get(&a.taxonomy).map(|m| m as &dyn Classifier),
    }
    .ok_or_else(|| {
        usage(anyhow!(
            "unknown taxonomy `{}` (artifacts have: {})",
            a.taxonomy,
            bundle.taxonomy_names().join(", ")
        ))
    })?;
    read_input(&a.test)?;
    let raw = load_corpus(&a.test, CorpusFormat::from_path(&a.test), &bundle.taxonomy_names()).map_err(usage)?;

    let mut held_out = Vec::new();
    let mut unlabeled = 0;
    for r in &raw {
        let labels: Vec<usize> = r
            .labels
            .get(&a.taxonomy)
            .into_iter()
            .flatten()
            .filter_map(|l| model.classes().iter().position(|c| c == l))
            .collect();
        if labels.is_empty() {
            unlabeled += 1;
            continue;
        }
        let res = api::resolve_raw(&bundle, &r.ingredients);
        let names: Vec<&str> = res.ids.iter().filter_map(|&id| bundle.lexicon().name(id)).collect();
        held_out.push(LabeledExample {
            features: featurize(names, model.vocab()),
            labels,
        });
    }
    if unlabeled > 0 {
        log::warn!("skipped {unlabeled} recipes without a known `{}` label", a.taxonomy);
    }
    if held_out.is_empty() {
        return Err(usage(anyhow!(
            "{} has no recipes labeled in taxonomy `{}`",
            a.test.display(),
            a.taxonomy
        )));
    }
    let eval = evaluate(model, &held_out);
    let name = match a.model {
        ModelArg::Sgd => "sgd",
        ModelArg::Nb => "nb",
    };
    write_evaluation_csv(io::stdout().lock(), &a.taxonomy, name, &eval)?;
    Ok(())
}

fn stats(a: &StatsArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::from_file(p).map_err(usage)?,
        None => PipelineConfig::new(PathBuf::new(), PathBuf::new()),
    };
    read_input(&a.corpus)?;
    cfg.corpus_path = std::path::absolute(&a.corpus)?;
    cfg.corpus_format = None;
    let prepared = prepare_corpus(&cfg).map_err(|e| match e {
        PipelineError::Io { .. } => runtime(e),
        other => usage(other),
    })?;
    write_stats_csv(io::stdout().lock(), &corpus_stats(&prepared.corpus)).map_err(runtime)
}

fn serve(a: ServeArgs) -> CmdResult {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")
        .map_err(runtime)?;
    rt.block_on(serve_async(a))
}

async fn serve_async(a: ServeArgs) -> CmdResult {
    let addr = SocketAddr::new(a.host, a.port);
    if !a.artifacts.artifacts.join(pantry_core::pipeline::MANIFEST_FILE).is_file() {
        return Err(runtime(anyhow!(
            "no artifacts at {}; run `pantry pipeline run` first",
            a.artifacts.artifacts.display()
        )));
    }
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| runtime(anyhow!("cannot listen on {addr}: {e}")))?;
    let local = listener.local_addr()?;
    println!("listening on http://{local}");
    io::stdout().flush()?;

    // health answers `loading` until the bundle is in place
    let state = AppState::loading();
    let load_error: Arc<OnceLock<String>> = Arc::default();
    let failed = Arc::new(tokio::sync::Notify::new());
    {
        let (state, load_error, failed) = (state.clone(), load_error.clone(), failed.clone());
        let dir = a.artifacts.artifacts.clone();
        tokio::task::spawn_blocking(move || match load_artifacts(&dir) {
            Ok(bundle) => {
                log::info!("artifacts loaded, manifest {}", bundle.manifest_hash);
                state.set_bundle(bundle);
            }
            Err(e) => {
                let _ = load_error.set(format!("loading artifacts from {}: {e}", dir.display()));
                failed.notify_one();
            }
        });
    }
    let shutdown = async move {
        tokio::select! {
            _ = tokio::signal::ctrl_c() => log::info!("interrupted, shutting down"),
            _ = failed.notified() => {}
        }
    };
    let config = ServiceConfig {
        cors_origin: a.cors_origin,
    };
    pantry_service::serve(listener, state, &config, shutdown).await?;
    match load_error.get() {
        Some(msg) => Err(runtime(anyhow!("{msg}"))),
        None => Ok(()),
    }
}
