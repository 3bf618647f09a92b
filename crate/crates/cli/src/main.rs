//! `paperrec` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 data or format
//! error, 3 runtime error.

mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use paperrec::corpus::{load_corpus, read_corpus_file, save_corpus};
use paperrec::evaluation::{emit_report_json, emit_sweep_csv, evaluate};
use paperrec::recommend::{write_recommendations_csv, write_recommendations_json, Recommender};
use paperrec::similarity::{build_matrix, ensemble_sim, write_pairs_csv};
use paperrec::synthetic::{self, SyntheticConfig};
use paperrec::{Corpus, Error, EvaluationConfig, FieldMapping, RecommenderMode};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "paperrec", version, about = "Collaborative-filtering recommender for scholarly papers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a JSON-lines corpus and write a validated cache.
    Ingest(IngestArgs),
    /// Show a user's most similar users with per-component scores.
    Similar(SimilarArgs),
    /// Recommend papers to one user by neighbor majority vote.
    Recommend(RecommendArgs),
    /// Cross-validate the recommender over a top-N sweep.
    Evaluate(EvaluateArgs),
    /// Export every pairwise similarity with its breakdown as CSV.
    Matrix(MatrixArgs),
    /// Write a seeded synthetic corpus as JSON lines.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct SourceArgs {
    /// Flat TOML run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw JSON-lines corpus (plain or gzip).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus cache written by `ingest`.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Similarity weights `alpha,beta,gamma,mu`.
    #[arg(long)]
    weights: Option<String>,
}

impl SourceArgs {
    fn run_config(&self, flags: RunConfig) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            corpus: self.corpus.clone(),
            cache: self.cache.clone(),
            weights: self.weights.clone(),
            ..flags
        };
        let merged = file.overlay(flags);
        merged.check_inputs()?;
        Ok(merged)
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Destination cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Rename a source field, e.g. `--field id=paper_id`. Repeatable.
    #[arg(long = "field", value_name = "NAME=SOURCE")]
    fields: Vec<String>,
}

#[derive(Args, Debug)]
struct SimilarArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    user: String,
    #[arg(long)]
    top_n: Option<usize>,
    /// Optional CSV export of the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    user: String,
    #[arg(long)]
    top_n: Option<usize>,
    /// Minimum majority percentage in [0, 100].
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_recommendations: Option<usize>,
    /// `neighbors`, `corpus` or `file:<path>` with one paper id per line.
    #[arg(long)]
    candidates: Option<String>,
    /// Output directory for recommendations.json and recommendations.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_recommendations: Option<usize>,
    #[arg(long)]
    candidates: Option<String>,
    /// Strictly increasing neighbor counts, e.g. `5,10,20`.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, sweep.csv and config.toml.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recommend exactly the held-out papers; every metric must be 1.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    users: usize,
    #[arg(long, default_value_t = 300)]
    papers: usize,
    #[arg(long, default_value_t = 5)]
    communities: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parameter(msg: impl Into<String>) -> anyhow::Error {
    Error::Parameter(msg.into()).into()
}

fn load(config: &RunConfig) -> Result<Corpus> {
    if let Some(cache) = &config.cache {
        info!("loading cache {}", cache.display());
        return Ok(load_corpus(cache)?);
    }
    if let Some(raw) = &config.corpus {
        info!("parsing corpus {}", raw.display());
        let (corpus, report) = read_corpus_file(raw, &FieldMapping::default())?;
        if report.warnings() > 0 {
            warn!("{} warnings while parsing {}", report.warnings(), raw.display());
        }
        return Ok(corpus);
    }
    Err(parameter("either --cache or --corpus is required"))
}

fn field_mapping(renames: &[String]) -> Result<FieldMapping> {
    let mut mapping = FieldMapping::default();
    for rename in renames {
        let (name, source) = rename
            .split_once('=')
            .ok_or_else(|| parameter(format!("field rename `{rename}` is not NAME=SOURCE")))?;
        let slot = match name {
            "id" => &mut mapping.id,
            "title" => &mut mapping.title,
            "authors" => &mut mapping.authors,
            "keywords" => &mut mapping.keywords,
            "references" => &mut mapping.references,
            "citations" => &mut mapping.citations,
            other => return Err(parameter(format!("unknown field `{other}`"))),
        };
        *slot = source.to_string();
    }
    Ok(mapping)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let config = file.overlay(RunConfig {
        corpus: args.corpus.clone(),
        cache: args.cache.clone(),
        ..Default::default()
    });
    let raw = config.corpus.as_ref().ok_or_else(|| parameter("--corpus is required"))?;
    let cache = config.cache.as_ref().ok_or_else(|| parameter("--cache is required"))?;
    if !raw.exists() {
        return Err(parameter(format!("input {} does not exist", raw.display())));
    }
    let (corpus, report) = read_corpus_file(raw, &field_mapping(&args.fields)?)?;
    for bad in &report.malformed {
        warn!("line {}: {}", bad.line, bad.message);
    }
    for id in &report.duplicates {
        warn!("duplicate paper id {id}; keeping the first record");
    }
    save_corpus(&corpus, cache)?;
    println!(
        "{} papers, {} users, {} warnings",
        corpus.papers().len(),
        corpus.users().len(),
        report.warnings()
    );
    Ok(())
}

fn cmd_similar(args: &SimilarArgs) -> Result<()> {
    let config = args.source.run_config(RunConfig {
        top_n: args.top_n,
        ..Default::default()
    })?;
    let weights = config.weights()?;
    let n = config.params()?.top_n;
    let corpus = load(&config)?;
    let target = corpus.user(&args.user)?;
    let matrix = build_matrix(&corpus, &weights)?;
    let neighbors = matrix.top_n_neighbors(&args.user, n)?;
    if neighbors.len() < n {
        eprintln!(
            "note: requested {n} neighbors but only {} other users exist",
            neighbors.len()
        );
    }

    let rows: Vec<_> = neighbors
        .iter()
        .map(|nb| (nb, ensemble_sim(target, corpus.user(&nb.user_id).expect("neighbor in corpus"), &weights)))
        .collect();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{:>4}  {:<20} {:>8} {:>8} {:>8} {:>8} {:>8}", "rank", "user", "final", "key", "ref", "coauth", "cit")?;
    for (rank, (nb, b)) in rows.iter().enumerate() {
        writeln!(
            out,
            "{:>4}  {:<20} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            rank + 1,
            nb.user_id,
            nb.score,
            b.sim_key,
            b.sim_ref,
            b.sim_coauth,
            b.sim_cit
        )?;
    }

    if let Some(path) = &args.out {
        let mut csv = BufWriter::new(File::create(path)?);
        writeln!(csv, "rank,user_id,sim_key,sim_ref,sim_coauth,sim_cit,sim_final")?;
        for (rank, (nb, b)) in rows.iter().enumerate() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                rank + 1,
                nb.user_id,
                b.sim_key,
                b.sim_ref,
                b.sim_coauth,
                b.sim_cit,
                nb.score
            )?;
        }
        csv.flush()?;
    }
    Ok(())
}

fn cmd_recommend(args: &RecommendArgs) -> Result<()> {
    let config = args.source.run_config(RunConfig {
        top_n: args.top_n,
        threshold: args.threshold,
        max_recommendations: args.max_recommendations,
        candidates: args.candidates.clone(),
        out: args.out.clone(),
        ..Default::default()
    })?;
    let effective = config.effective()?;
    let weights = config.weights()?;
    let params = config.params()?;
    let strategy = config.candidates()?;
    let corpus = load(&config)?;
    corpus.user(&args.user)?;
    let matrix = build_matrix(&corpus, &weights)?;
    let recommender = Recommender::for_corpus(&corpus, &matrix)?;
    let pool = recommender.candidate_pool(&args.user, params.top_n, &strategy)?;
    let recs = if pool.is_empty() {
        info!("no candidate papers remain after exclusions");
        Vec::new()
    } else {
        recommender.recommend(&args.user, &pool, &params)?
    };

    for r in &recs {
        println!("{}\t{}\t{:.2}", r.paper_id, r.supporter_count, r.majority_pct);
    }
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write_recommendations_json(&recs, BufWriter::new(File::create(dir.join("recommendations.json"))?))?;
        write_recommendations_csv(&recs, BufWriter::new(File::create(dir.join("recommendations.csv"))?))?;
        effective.write_to(&dir.join("config.toml"))?;
    }
    eprintln!("{} recommendations for {} ({} candidates)", recs.len(), args.user, pool.len());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = args.source.run_config(RunConfig {
        threshold: args.threshold,
        max_recommendations: args.max_recommendations,
        candidates: args.candidates.clone(),
        sweep: args.sweep.clone(),
        folds: args.folds,
        seed: args.seed,
        out: args.out.clone(),
        oracle: args.oracle.then_some(true),
        ..Default::default()
    })?;
    let effective = config.effective()?;
    let dir = config.out.clone().ok_or_else(|| parameter("--out is required"))?;
    let evaluation = EvaluationConfig {
        weights: config.weights()?,
        params: config.params()?,
        candidates: config.candidates()?,
        top_n_sweep: config.sweep()?,
        folds: effective.folds.unwrap_or_default(),
        seed: effective.seed.unwrap_or_default(),
        mode: if effective.oracle == Some(true) {
            RecommenderMode::HeldOutOracle
        } else {
            RecommenderMode::Majority
        },
    };
    evaluation.validate()?;
    let corpus = load(&config)?;
    let report = evaluate(&corpus, &evaluation)?;

    create_dir(&dir)?;
    emit_report_json(&report, dir.join("report.json"))?;
    emit_sweep_csv(&report, dir.join("sweep.csv"))?;
    effective.write_to(&dir.join("config.toml"))?;
    println!("{} users evaluated, {} excluded", report.evaluated_users, report.excluded_users.len());
    println!("{:>6} {:>9} {:>9} {:>9}", "top_n", "precision", "recall", "f");
    for row in &report.summary {
        println!("{:>6} {:>9.4} {:>9.4} {:>9.4}", row.top_n, row.precision, row.recall, row.f_measure);
    }
    Ok(())
}

fn cmd_matrix(args: &MatrixArgs) -> Result<()> {
    let config = args.source.run_config(RunConfig::default())?;
    let weights = config.weights()?;
    let corpus = load(&config)?;
    let out = BufWriter::new(File::create(&args.out)?);
    write_pairs_csv(corpus.users(), &weights, out)?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let records = synthetic::generate_records(&SyntheticConfig {
        users: args.users,
        papers: args.papers,
        communities: args.communities,
        seed: args.seed,
        ..Default::default()
    })?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    synthetic::write_jsonl(&records, &mut out)?;
    out.flush()?;
    println!("{} papers written to {}", records.len(), args.out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parameter(_) | Error::UnknownUser(_) => 1,
                Error::Io(_) => 3,
                Error::Format(_)
                | Error::Version { .. }
                | Error::TooSmall(_)
                | Error::Infeasible(_)
                | Error::Csv(_)
                | Error::Json(_) => 2,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 1;
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Similar(args) => cmd_similar(args),
        Command::Recommend(args) => cmd_recommend(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
