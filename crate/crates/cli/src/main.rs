use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relstat_core::corpus_io::LabelPolicy;
use relstat_core::credibility::{CredibilityConfig, WeightSchedule, DEFAULT_EVIDENCE_K};
use relstat_core::enhancement::{ScoreRepresentation, StatementTemplate};
use relstat_core::evaluation::Metric;
use relstat_core::fusion::FusionConfig;
use relstat_core::lexical::{Bm25Params, Stemmer, Tokenizer, DEFAULT_DEPTH, ENGLISH_STOPWORDS};
use relstat_core::pipeline::{self, CredInputs, PipelineConfig, SCORER_ENV};
use relstat_core::rerank::{
    Backend, InputVariant, RerankRunConfig, ScorerHandle, DEFAULT_BATCH_SIZE, DEFAULT_MAX_IN_FLIGHT,
};
use relstat_core::{Error, Result};

/// BM25 retrieval, credibility scoring and statement-enhanced re-ranking.
#[derive(Parser)]
#[command(name = "relstat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 index from a JSONL corpus (also used for evidence).
    Index(IndexArgs),
    /// Retrieve the top-n documents per topic into a TREC run.
    Retrieve(RetrieveArgs),
    /// Score the credibility of every retrieved document.
    Cred(CredArgs),
    /// Prepend relevance statements to retrieved documents.
    Enhance(EnhanceArgs),
    /// Weighted arithmetic mean of topicality and credibility.
    Fuse(FuseArgs),
    /// Re-rank a first-stage run with the configured scorer.
    Rerank(RerankArgs),
    /// Evaluate a run against qrels.
    Eval(EvalArgs),
    /// Pairwise significance tests between runs.
    Compare(CompareArgs),
    /// Run a grid of re-ranking configurations and compare them.
    Sweep(SweepArgs),
    /// Run every stage from a TOML config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct TokenizerArgs {
    #[arg(long, value_enum, default_value = "none")]
    stemmer: StemmerArg,
    /// Drop English stopwords.
    #[arg(long)]
    stopwords: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StemmerArg {
    None,
    Porter,
}

impl TokenizerArgs {
    fn tokenizer(&self) -> Tokenizer {
        let stemmer = match self.stemmer {
            StemmerArg::None => Stemmer::None,
            StemmerArg::Porter => Stemmer::Porter,
        };
        let t = Tokenizer::default().with_stemmer(stemmer);
        if self.stopwords {
            t.with_stopwords(ENGLISH_STOPWORDS.iter().copied())
        } else {
            t
        }
    }
}

#[derive(Args)]
struct Bm25Args {
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
}

impl Bm25Args {
    fn params(&self) -> Result<Bm25Params> {
        let p = Bm25Params { k1: self.k1, b: self.b };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Treat the input as an evidence collection (`article_id` records).
    #[arg(long)]
    evidence: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    n: usize,
    #[arg(long, default_value = "bm25")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bm25: Bm25Args,
}

#[derive(Args)]
struct CredArgs {
    #[arg(long)]
    evidence_index: PathBuf,
    #[arg(long)]
    evidence: PathBuf,
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EVIDENCE_K)]
    k: usize,
    /// linear_decay, uniform or custom:w1,w2,...
    #[arg(long, default_value = "linear_decay")]
    schedule: String,
    /// Score assigned when no evidence article is found.
    #[arg(long, default_value_t = 0.0)]
    no_evidence_score: f64,
    /// stub:<seed> or a scorer base URL; defaults to $RELSTAT_SCORER, then stub:0.
    #[arg(long)]
    embedder: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    bm25: Bm25Args,
}

#[derive(Args)]
struct StatementArgs {
    /// decimal:<p>, integer:<m> or segmented.
    #[arg(long, default_value = "decimal:4")]
    repr: String,
    /// c1, c2, t1, t2, tc or score_only.
    #[arg(long)]
    template: Option<String>,
    /// Min-max normalize credibility per topic before rendering.
    #[arg(long)]
    normalize_credibility: bool,
    /// Only the top n first-stage documents are considered.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    n: usize,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    cred: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    statement: StatementArgs,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    cred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    w_topicality: f64,
    #[arg(long, default_value_t = 0.5)]
    w_credibility: f64,
    #[arg(long, default_value = "wam")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScorerArgs {
    /// stub:<seed> or a scorer base URL; defaults to $RELSTAT_SCORER, then stub:0.
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_IN_FLIGHT)]
    max_in_flight: usize,
}

impl ScorerArgs {
    fn handle(&self) -> Result<ScorerHandle> {
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(Error::validation("batch size and max in flight must be at least 1"));
        }
        Ok(ScorerHandle {
            backend: backend(self.scorer.as_deref())?,
            batch_size: self.batch_size,
            max_in_flight: self.max_in_flight,
        })
    }
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    topics: PathBuf,
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    cred: Option<PathBuf>,
    /// plain_ce, bm25cat, credcat, bm25credcat, rel_score or rel_stat.
    #[arg(long)]
    variant: String,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    statement: StatementArgs,
    #[command(flatten)]
    scorer: ScorerArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Map graded labels >= 1 to 1 instead of rejecting them.
    #[arg(long)]
    binarize_labels: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, num_args = 2.., required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ndcg10,p10,mrr10,map")]
    metrics: Vec<String>,
    #[arg(long)]
    binarize_labels: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "plain_ce,bm25cat,credcat,bm25credcat,rel_score,rel_stat"
    )]
    variants: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "c1,c2")]
    templates: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "decimal:4")]
    reprs: Vec<String>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
}

fn backend(flag: Option<&str>) -> Result<Backend> {
    match flag {
        Some(s) => s.parse(),
        None => match std::env::var(SCORER_ENV) {
            Ok(s) => s.parse(),
            Err(_) => Ok(Backend::Stub(0)),
        },
    }
}

fn parse_all<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.parse()).collect()
}

fn policy(binarize: bool) -> LabelPolicy {
    if binarize {
        LabelPolicy::Binarize
    } else {
        LabelPolicy::Strict
    }
}

fn report(line: serde_json::Value) {
    println!("{line}");
}

fn rerank_config(variant: &str, tag: Option<String>, s: &StatementArgs) -> Result<RerankRunConfig> {
    let variant: InputVariant = variant.parse()?;
    let mut cfg = RerankRunConfig::new(variant);
    cfg.representation = s.repr.parse()?;
    if let Some(t) = &s.template {
        cfg.template = Some(t.parse()?);
    }
    cfg.first_stage_n = s.n;
    cfg.normalize_credibility = s.normalize_credibility;
    if let Some(tag) = tag {
        cfg.tag = tag;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    cfg.apply_env()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(a) => {
            let tok = a.tokenizer.tokenizer();
            let index = if a.evidence {
                pipeline::evidence_index_stage(&a.corpus, &tok, &a.out)?
            } else {
                pipeline::index_stage(&a.corpus, &tok, &a.out)?
            };
            report(serde_json::json!({"documents": index.doc_count(), "terms": index.terms().count()}));
        }
        Command::Retrieve(a) => {
            if a.n == 0 {
                return Err(Error::validation("n must be at least 1"));
            }
            let lists = pipeline::retrieve_stage(&a.index, &a.topics, a.n, a.bm25.params()?, &a.tag, &a.out)?;
            report(serde_json::json!({"topics": lists.len(), "entries": lists.iter().map(|l| l.len()).sum::<usize>()}));
        }
        Command::Cred(a) => {
            let config = CredibilityConfig {
                k: a.k,
                schedule: a.schedule.parse::<WeightSchedule>()?,
                no_evidence_score: a.no_evidence_score,
                bm25: a.bm25.params()?,
            };
            let embedder = pipeline::make_embedder(
                &backend(a.embedder.as_deref())?,
                DEFAULT_BATCH_SIZE,
                DEFAULT_MAX_IN_FLIGHT,
            )?;
            let inputs = CredInputs {
                evidence_index: &a.evidence_index,
                evidence: &a.evidence,
                topics: &a.topics,
                run: &a.run,
                corpus: &a.corpus,
            };
            let scores = pipeline::cred_stage(&inputs, &config, embedder.as_ref(), &a.out)?;
            let flagged = scores.iter().filter(|s| s.no_evidence_flag).count();
            report(serde_json::json!({"scored": scores.len(), "no_evidence": flagged}));
        }
        Command::Enhance(a) => {
            let repr: ScoreRepresentation = a.statement.repr.parse()?;
            let template: StatementTemplate = a.statement.template.as_deref().unwrap_or("c2").parse()?;
            if a.statement.n == 0 {
                return Err(Error::validation("n must be at least 1"));
            }
            pipeline::enhance_stage(
                &a.run,
                a.cred.as_deref(),
                &a.corpus,
                template,
                repr.validate()?,
                a.statement.normalize_credibility,
                a.statement.n,
                &a.out,
            )?;
            report(serde_json::json!({"template": template.id(), "representation": repr.to_string()}));
        }
        Command::Fuse(a) => {
            let fusion = FusionConfig::new(a.w_topicality, a.w_credibility)?;
            let lists = pipeline::fuse_stage(&a.run, &a.cred, fusion, &a.tag, &a.out)?;
            report(serde_json::json!({"topics": lists.len()}));
        }
        Command::Rerank(a) => {
            let cfg = rerank_config(&a.variant, a.tag, &a.statement)?;
            let handle = a.scorer.handle()?;
            let lists = pipeline::rerank_stage(&cfg, &a.topics, &a.run, a.cred.as_deref(), &a.corpus, &handle, &a.out)?;
            report(serde_json::json!({"tag": cfg.tag, "topics": lists.len()}));
        }
        Command::Eval(a) => {
            let r = pipeline::eval_stage(&a.run, &a.qrels, policy(a.binarize_labels), &a.out)?;
            report(serde_json::to_value(r.mean).expect("metrics serialize"));
        }
        Command::Compare(a) => {
            let metrics: Vec<Metric> = parse_all(&a.metrics)?;
            let r = pipeline::compare_stage(&a.runs, &a.qrels, policy(a.binarize_labels), &metrics, &a.out)?;
            let significant = r.results.iter().filter(|s| s.significant_at_0_05).count();
            report(serde_json::json!({"comparisons": r.n_comparisons, "significant": significant}));
        }
        Command::Sweep(a) => {
            let cfg = load_config(&a.config)?;
            let variants: Vec<InputVariant> = parse_all(&a.variants)?;
            let templates: Vec<StatementTemplate> = parse_all(&a.templates)?;
            let reprs: Vec<ScoreRepresentation> = parse_all(&a.reprs)?;
            let entries = pipeline::expand_sweep(&variants, &templates, &reprs, cfg.lexical.n)?;
            let summary = pipeline::run_sweep(&cfg, &entries)?;
            report(serde_json::json!({"runs": summary.runs}));
        }
        Command::Pipeline(a) => {
            let cfg = load_config(&a.config)?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            report(serde_json::to_value(&outcome.stages).expect("stages serialize"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relstat: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
