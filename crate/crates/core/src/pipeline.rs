//! Stage functions shared by the CLI subcommands and the end-to-end
//! pipeline, plus the checksum manifest that lets a rerun skip stages whose
//! inputs and parameters are unchanged.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus_io::{
    load_corpus, load_evidence, load_qrels, load_topics, read_run, write_jsonl, write_run, Document, LabelPolicy,
};
use crate::credibility::{
    read_scores, score_run, write_scores, CredibilityConfig, CredibilityTable, Embedder, HashingEmbedder,
    WeightSchedule,
};
use crate::enhancement::{ScoreRepresentation, StatementTemplate};
use crate::error::{Error, Result};
use crate::evaluation::{compare_reports, evaluate_run, EvalReport, Metric, SignificanceResult};
use crate::fusion::{wam_run, FusionConfig};
use crate::lexical::{
    read_index, retrieve, runs_to_entries, write_index, Bm25Params, InvertedIndex, RankedList, Stemmer, Tokenizer,
    DEFAULT_DEPTH, ENGLISH_STOPWORDS,
};
use crate::rerank::{enhance_list, rerank_run, Backend, InputVariant, RerankRunConfig, ScorerHandle};

/// Environment variable overriding the scorer endpoint.
pub const SCORER_ENV: &str = "RELSTAT_SCORER";

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::validation(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), "json", e.to_string()))
}

pub fn make_embedder(backend: &Backend, batch_size: usize, max_in_flight: usize) -> Result<Box<dyn Embedder>> {
    match backend {
        Backend::Stub(seed) => Ok(Box::new(HashingEmbedder::new(HashingEmbedder::DEFAULT_DIM, *seed))),
        #[cfg(feature = "remote")]
        Backend::Remote(url) => Ok(Box::new(
            crate::rerank::remote::RemoteScorer::new(url.clone()).with_limits(batch_size, max_in_flight),
        )),
        #[cfg(not(feature = "remote"))]
        Backend::Remote(url) => {
            let _ = (batch_size, max_in_flight);
            Err(Error::validation(format!(
                "remote embedder {url} not supported in this build"
            )))
        }
    }
}

// ---- stages -------------------------------------------------------------

pub fn index_stage(corpus: &Path, tokenizer: &Tokenizer, out: &Path) -> Result<InvertedIndex> {
    let docs = load_corpus(corpus)?;
    let index = InvertedIndex::build(&docs, tokenizer)?;
    write_index(&index, out)?;
    Ok(index)
}

pub fn evidence_index_stage(evidence: &Path, tokenizer: &Tokenizer, out: &Path) -> Result<InvertedIndex> {
    let docs: Vec<Document> = load_evidence(evidence)?.iter().map(|a| a.as_document()).collect();
    let index = InvertedIndex::build(&docs, tokenizer)?;
    write_index(&index, out)?;
    Ok(index)
}

pub fn retrieve_stage(
    index: &Path,
    topics: &Path,
    n: usize,
    params: Bm25Params,
    tag: &str,
    out: &Path,
) -> Result<Vec<RankedList>> {
    let index = read_index(index)?;
    let topics = load_topics(topics)?;
    let lists = topics
        .iter()
        .map(|t| retrieve(&index, t, n, params))
        .collect::<Result<Vec<_>>>()?;
    write_run(&runs_to_entries(&lists, tag), out)?;
    Ok(lists)
}

pub struct CredInputs<'a> {
    pub evidence_index: &'a Path,
    pub evidence: &'a Path,
    pub topics: &'a Path,
    pub run: &'a Path,
    pub corpus: &'a Path,
}

pub fn cred_stage(
    inputs: &CredInputs<'_>,
    config: &CredibilityConfig,
    embedder: &dyn Embedder,
    out: &Path,
) -> Result<Vec<crate::credibility::CredibilityScore>> {
    let evidence_index = read_index(inputs.evidence_index)?;
    let evidence = load_evidence(inputs.evidence)?;
    let topics = load_topics(inputs.topics)?;
    let lists = RankedList::from_run(&read_run(inputs.run)?);
    let docs = load_corpus(inputs.corpus)?;
    let corpus: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let scores = score_run(&topics, &lists, &corpus, &evidence, &evidence_index, config, embedder)?;
    write_scores(&scores, out)?;
    Ok(scores)
}

#[allow(clippy::too_many_arguments)]
pub fn enhance_stage(
    run: &Path,
    cred: Option<&Path>,
    corpus: &Path,
    template: StatementTemplate,
    repr: ScoreRepresentation,
    normalize_credibility: bool,
    first_stage_n: usize,
    out: &Path,
) -> Result<()> {
    let lists = RankedList::from_run(&read_run(run)?);
    let table = cred
        .map(|p| read_scores(p).and_then(CredibilityTable::new))
        .transpose()?;
    let docs = load_corpus(corpus)?;
    let corpus: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut records = Vec::new();
    for list in &lists {
        let head = RankedList {
            topic_id: list.topic_id.clone(),
            items: list.items.iter().take(first_stage_n).cloned().collect(),
        };
        records.extend(enhance_list(
            &head,
            &corpus,
            table.as_ref(),
            template,
            repr,
            normalize_credibility,
        )?);
    }
    write_jsonl(&records, out)
}

pub fn rerank_stage(
    config: &RerankRunConfig,
    topics: &Path,
    run: &Path,
    cred: Option<&Path>,
    corpus: &Path,
    handle: &ScorerHandle,
    out: &Path,
) -> Result<Vec<RankedList>> {
    config.validate()?;
    let topics = load_topics(topics)?;
    let lists = RankedList::from_run(&read_run(run)?);
    let table = match cred {
        Some(p) => Some(CredibilityTable::new(read_scores(p)?)?),
        None if config.needs_credibility() => {
            return Err(Error::validation(format!(
                "variant {} needs a credibility file",
                config.variant
            )))
        }
        None => None,
    };
    let docs = load_corpus(corpus)?;
    let reranked = rerank_run(config, &topics, &lists, &docs, table.as_ref(), handle)?;
    write_run(&runs_to_entries(&reranked, &config.tag), out)?;
    Ok(reranked)
}

pub fn fuse_stage(run: &Path, cred: &Path, fusion: FusionConfig, tag: &str, out: &Path) -> Result<Vec<RankedList>> {
    let lists = RankedList::from_run(&read_run(run)?);
    let table = CredibilityTable::new(read_scores(cred)?)?;
    let fused = wam_run(&lists, &table, fusion)?;
    write_run(&runs_to_entries(&fused, tag), out)?;
    Ok(fused)
}

pub fn eval_stage(run: &Path, qrels: &Path, policy: LabelPolicy, out: &Path) -> Result<EvalReport> {
    let report = evaluate_run(&read_run(run)?, &load_qrels(qrels, policy)?)?;
    write_json(&report, out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metrics: Vec<Metric>,
    pub n_comparisons: usize,
    pub means: BTreeMap<String, crate::evaluation::MetricValues>,
    pub results: Vec<SignificanceResult>,
}

pub fn compare_stage(
    runs: &[PathBuf],
    qrels: &Path,
    policy: LabelPolicy,
    metrics: &[Metric],
    out: &Path,
) -> Result<ComparisonReport> {
    let qrels = load_qrels(qrels, policy)?;
    let reports = runs
        .iter()
        .map(|r| evaluate_run(&read_run(r)?, &qrels))
        .collect::<Result<Vec<_>>>()?;
    let report = comparison(&reports, metrics)?;
    write_json(&report, out)?;
    Ok(report)
}

pub fn comparison(reports: &[EvalReport], metrics: &[Metric]) -> Result<ComparisonReport> {
    let mut tags = std::collections::HashSet::new();
    for r in reports {
        if !tags.insert(r.run_tag.as_str()) {
            return Err(Error::validation(format!("run tag \"{}\" appears twice", r.run_tag)));
        }
    }
    let results = compare_reports(reports, metrics)?;
    Ok(ComparisonReport {
        metrics: metrics.to_vec(),
        n_comparisons: results.first().map_or(0, |r| r.n_comparisons),
        means: reports.iter().map(|r| (r.run_tag.clone(), r.mean)).collect(),
        results,
    })
}

// ---- configuration ------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub evidence: PathBuf,
    pub topics: PathBuf,
    #[serde(default)]
    pub qrels: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexicalConfig {
    pub k1: f64,
    pub b: f64,
    pub n: usize,
    pub stemmer: Stemmer,
    pub stopwords: bool,
}

impl Default for LexicalConfig {
    fn default() -> Self {
        LexicalConfig {
            k1: 1.2,
            b: 0.75,
            n: DEFAULT_DEPTH,
            stemmer: Stemmer::None,
            stopwords: false,
        }
    }
}

impl LexicalConfig {
    pub fn tokenizer(&self) -> Tokenizer {
        let t = Tokenizer::default().with_stemmer(self.stemmer);
        if self.stopwords {
            t.with_stopwords(ENGLISH_STOPWORDS.iter().copied())
        } else {
            t
        }
    }

    pub fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CredSection {
    pub k: usize,
    pub schedule: String,
    pub embedder: Backend,
    pub no_evidence_score: f64,
}

impl Default for CredSection {
    fn default() -> Self {
        CredSection {
            k: crate::credibility::DEFAULT_EVIDENCE_K,
            schedule: "linear_decay".into(),
            embedder: Backend::Stub(0),
            no_evidence_score: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceSection {
    pub representation: ScoreRepresentation,
    pub template: StatementTemplate,
    pub normalize_credibility: bool,
}

impl Default for EnhanceSection {
    fn default() -> Self {
        EnhanceSection {
            representation: ScoreRepresentation::Decimal(4),
            template: StatementTemplate::C2,
            normalize_credibility: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankSection {
    pub variant: InputVariant,
    pub scorer: Backend,
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub tag: Option<String>,
}

impl Default for RerankSection {
    fn default() -> Self {
        RerankSection {
            variant: InputVariant::RelStat,
            scorer: Backend::Stub(0),
            batch_size: crate::rerank::DEFAULT_BATCH_SIZE,
            max_in_flight: crate::rerank::DEFAULT_MAX_IN_FLIGHT,
            tag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub binarize_labels: bool,
    pub metrics: Vec<Metric>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            binarize_labels: false,
            metrics: Metric::all().to_vec(),
        }
    }
}

impl EvalSection {
    pub fn policy(&self) -> LabelPolicy {
        if self.binarize_labels {
            LabelPolicy::Binarize
        } else {
            LabelPolicy::Strict
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub lexical: LexicalConfig,
    #[serde(default)]
    pub credibility: CredSection,
    #[serde(default)]
    pub enhancement: EnhanceSection,
    #[serde(default)]
    pub rerank: RerankSection,
    /// Also produce a WAM run with these weights.
    #[serde(default)]
    pub fusion: Option<FusionConfig>,
    #[serde(default)]
    pub eval: EvalSection,
}

impl PipelineConfig {
    /// Reads a TOML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, "config", e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.evidence);
        fix(&mut self.paths.topics);
        fix(&mut self.paths.output_dir);
        if let Some(q) = self.paths.qrels.as_mut() {
            fix(q);
        }
    }

    /// Applies `RELSTAT_SCORER` (if set) to both the scorer and embedder.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SCORER_ENV) {
            let backend: Backend = v.parse()?;
            self.rerank.scorer = backend.clone();
            self.credibility.embedder = backend;
        }
        Ok(())
    }

    pub fn credibility_config(&self) -> Result<CredibilityConfig> {
        Ok(CredibilityConfig {
            k: self.credibility.k,
            schedule: self.credibility.schedule.parse::<WeightSchedule>()?,
            no_evidence_score: self.credibility.no_evidence_score,
            bm25: self.lexical.params(),
        })
    }

    pub fn rerank_config(&self) -> RerankRunConfig {
        let variant = self.rerank.variant;
        RerankRunConfig {
            variant,
            representation: self.enhancement.representation,
            template: match variant {
                InputVariant::RelStat => Some(self.enhancement.template),
                InputVariant::RelScore => Some(StatementTemplate::ScoreOnly),
                _ => None,
            },
            first_stage_n: self.lexical.n,
            tag: self.rerank.tag.clone().unwrap_or_else(|| variant.id().to_string()),
            normalize_credibility: self.enhancement.normalize_credibility,
        }
    }

    pub fn scorer_handle(&self) -> ScorerHandle {
        ScorerHandle {
            backend: self.rerank.scorer.clone(),
            batch_size: self.rerank.batch_size.max(1),
            max_in_flight: self.rerank.max_in_flight.max(1),
        }
    }

    /// Checks parameter domains and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        let mut inputs = vec![
            ("corpus", &self.paths.corpus),
            ("evidence", &self.paths.evidence),
            ("topics", &self.paths.topics),
        ];
        if let Some(q) = &self.paths.qrels {
            inputs.push(("qrels", q));
        }
        for (name, p) in inputs {
            if !p.is_file() {
                return Err(Error::validation(format!("{name} path {} does not exist", p.display())));
            }
        }
        self.lexical.params().validate()?;
        if self.lexical.n == 0 {
            return Err(Error::validation("lexical.n must be at least 1"));
        }
        let cred = self.credibility_config()?;
        crate::credibility::make_weights(cred.k, &cred.schedule)?;
        self.rerank_config().validate()?;
        if let Some(f) = &self.fusion {
            f.validate()?;
        }
        if self.eval.metrics.is_empty() {
            return Err(Error::validation("eval.metrics must not be empty"));
        }
        Ok(())
    }
}

// ---- manifest -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub params: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Every stage's parameters and the checksums of what it read and wrote.
/// Output paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    fn find(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub name: String,
    pub executed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub stages: Vec<StageStatus>,
    pub run: PathBuf,
    pub report: Option<PathBuf>,
}

struct Runner<'a> {
    out_dir: &'a Path,
    previous: Manifest,
    manifest: Manifest,
    statuses: Vec<StageStatus>,
}

impl Runner<'_> {
    /// Runs `work` unless the previous manifest shows the same parameters,
    /// the same input checksums and intact outputs.
    fn stage(
        &mut self,
        name: &str,
        params: serde_json::Value,
        inputs: &[(&str, &Path)],
        outputs: &[&str],
        work: impl FnOnce() -> Result<()>,
    ) -> Result<()> {
        let mut input_sums = BTreeMap::new();
        for (role, p) in inputs {
            input_sums.insert(role.to_string(), sha256_file(p).map_err(|e| e.in_stage(name))?);
        }
        let reusable = self.previous.find(name).is_some_and(|prev| {
            prev.params == params
                && prev.inputs == input_sums
                && outputs.iter().all(|o| {
                    prev.outputs
                        .get(*o)
                        .is_some_and(|sum| sha256_file(&self.out_dir.join(o)).is_ok_and(|actual| &actual == sum))
                })
        });
        if !reusable {
            work().map_err(|e| e.in_stage(name))?;
        }
        let mut output_sums = BTreeMap::new();
        for o in outputs {
            output_sums.insert(
                o.to_string(),
                sha256_file(&self.out_dir.join(o)).map_err(|e| e.in_stage(name))?,
            );
        }
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            params,
            inputs: input_sums,
            outputs: output_sums,
        });
        self.statuses.push(StageStatus {
            name: name.to_string(),
            executed: !reusable,
        });
        Ok(())
    }
}

/// index → retrieve → cred → enhance → rerank (→ fuse) → eval.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let out = config.paths.output_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let manifest_path = out.join(MANIFEST_FILE);
    let previous = if manifest_path.is_file() {
        read_json(&manifest_path).unwrap_or_default()
    } else {
        Manifest::default()
    };
    let mut r = Runner {
        out_dir: out,
        previous,
        manifest: Manifest::default(),
        statuses: Vec::new(),
    };

    let p = &config.paths;
    let tokenizer = config.lexical.tokenizer();
    let tok_json = serde_json::to_value(&tokenizer).expect("tokenizer serializes");
    let to_json = |v: &dyn erased::Ser| v.json();

    let idx = out.join("corpus.idx");
    r.stage(
        "index",
        tok_json.clone(),
        &[("corpus", &p.corpus)],
        &["corpus.idx"],
        || index_stage(&p.corpus, &tokenizer, &idx).map(drop),
    )?;

    let ev_idx = out.join("evidence.idx");
    r.stage(
        "evidence_index",
        tok_json,
        &[("evidence", &p.evidence)],
        &["evidence.idx"],
        || evidence_index_stage(&p.evidence, &tokenizer, &ev_idx).map(drop),
    )?;

    let first_stage = out.join("first_stage.run");
    let lex = &config.lexical;
    r.stage(
        "retrieve",
        serde_json::json!({"k1": lex.k1, "b": lex.b, "n": lex.n, "tag": "bm25"}),
        &[("index", &idx), ("topics", &p.topics)],
        &["first_stage.run"],
        || retrieve_stage(&idx, &p.topics, lex.n, lex.params(), "bm25", &first_stage).map(drop),
    )?;

    let cred_path = out.join("cred.jsonl");
    let cred_cfg = config.credibility_config()?;
    r.stage(
        "cred",
        to_json(&(&cred_cfg, &config.credibility.embedder)),
        &[
            ("evidence_index", &ev_idx),
            ("evidence", &p.evidence),
            ("topics", &p.topics),
            ("run", &first_stage),
            ("corpus", &p.corpus),
        ],
        &["cred.jsonl"],
        || {
            let embedder = make_embedder(
                &config.credibility.embedder,
                config.rerank.batch_size,
                config.rerank.max_in_flight,
            )?;
            let inputs = CredInputs {
                evidence_index: &ev_idx,
                evidence: &p.evidence,
                topics: &p.topics,
                run: &first_stage,
                corpus: &p.corpus,
            };
            cred_stage(&inputs, &cred_cfg, embedder.as_ref(), &cred_path).map(drop)
        },
    )?;

    let rerank_cfg = config.rerank_config();
    if let Some(template) = rerank_cfg.effective_template() {
        let enhanced = out.join("enhanced.jsonl");
        r.stage(
            "enhance",
            to_json(&(&rerank_cfg, template)),
            &[("run", &first_stage), ("cred", &cred_path), ("corpus", &p.corpus)],
            &["enhanced.jsonl"],
            || {
                enhance_stage(
                    &first_stage,
                    Some(&cred_path),
                    &p.corpus,
                    template,
                    rerank_cfg.representation,
                    rerank_cfg.normalize_credibility,
                    rerank_cfg.first_stage_n,
                    &enhanced,
                )
            },
        )?;
    }

    let reranked = out.join("reranked.run");
    let handle = config.scorer_handle();
    r.stage(
        "rerank",
        to_json(&(&rerank_cfg, &handle.backend)),
        &[
            ("topics", &p.topics),
            ("run", &first_stage),
            ("cred", &cred_path),
            ("corpus", &p.corpus),
        ],
        &["reranked.run"],
        || {
            rerank_stage(
                &rerank_cfg,
                &p.topics,
                &first_stage,
                Some(&cred_path),
                &p.corpus,
                &handle,
                &reranked,
            )
            .map(drop)
        },
    )?;

    if let Some(fusion) = config.fusion {
        let wam = out.join("wam.run");
        r.stage(
            "fuse",
            to_json(&fusion),
            &[("run", &first_stage), ("cred", &cred_path)],
            &["wam.run"],
            || fuse_stage(&first_stage, &cred_path, fusion, "wam", &wam).map(drop),
        )?;
    }

    let mut report = None;
    if let Some(qrels) = &p.qrels {
        let policy = config.eval.policy();
        let mut runs: Vec<(&str, PathBuf)> = vec![("reranked", reranked.clone()), ("first_stage", first_stage.clone())];
        if config.fusion.is_some() {
            runs.push(("wam", out.join("wam.run")));
        }
        let names: Vec<String> = runs
            .iter()
            .map(|(n, _)| {
                if *n == "reranked" {
                    "report.json".to_string()
                } else {
                    format!("report.{n}.json")
                }
            })
            .collect();
        let mut inputs: Vec<(&str, &Path)> = vec![("qrels", qrels.as_path())];
        inputs.extend(runs.iter().map(|(n, p)| (*n, p.as_path())));
        let outputs: Vec<&str> = names.iter().map(String::as_str).collect();
        r.stage("eval", to_json(&config.eval), &inputs, &outputs, || {
            for ((_, run), name) in runs.iter().zip(&names) {
                eval_stage(run, qrels, policy, &out.join(name))?;
            }
            Ok(())
        })?;
        report = Some(out.join("report.json"));
    }

    write_json(&r.manifest, &manifest_path)?;
    Ok(PipelineOutcome {
        stages: r.statuses,
        run: reranked,
        report,
    })
}

mod erased {
    /// Serializes any stage parameter bundle to JSON for the manifest.
    pub trait Ser {
        fn json(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Ser for T {
        fn json(&self) -> serde_json::Value {
            serde_json::to_value(self).expect("stage parameters serialize")
        }
    }
}

// ---- sweep --------------------------------------------------------------

/// One re-ranking configuration of an ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub config: RerankRunConfig,
}

fn repr_slug(r: ScoreRepresentation) -> String {
    match r {
        ScoreRepresentation::Decimal(p) => format!("dec{p}"),
        ScoreRepresentation::Integer(m) => format!("int{m}"),
        ScoreRepresentation::Segmented => "seg".into(),
    }
}

/// Expands variants × templates × representations into the distinct run
/// configurations they imply, each with its own tag. Templates only vary
/// `rel_stat`; `plain_ce` ignores representations.
pub fn expand_sweep(
    variants: &[InputVariant],
    templates: &[StatementTemplate],
    reprs: &[ScoreRepresentation],
    first_stage_n: usize,
) -> Result<Vec<SweepEntry>> {
    let mut out: Vec<SweepEntry> = Vec::new();
    let mut push = |cfg: RerankRunConfig| -> Result<()> {
        cfg.validate()?;
        if !out.iter().any(|e| e.config.tag == cfg.tag) {
            out.push(SweepEntry { config: cfg });
        }
        Ok(())
    };
    for &v in variants {
        match v {
            InputVariant::PlainCe => {
                let mut c = RerankRunConfig::new(v);
                c.first_stage_n = first_stage_n;
                push(c)?;
            }
            InputVariant::RelStat => {
                for &t in templates.iter().filter(|t| **t != StatementTemplate::ScoreOnly) {
                    for &r in reprs {
                        let mut c = RerankRunConfig::new(v);
                        c.template = Some(t);
                        c.representation = r;
                        c.first_stage_n = first_stage_n;
                        c.tag = format!("{}.{}.{}", v.id(), t.id(), repr_slug(r));
                        push(c)?;
                    }
                }
            }
            _ => {
                for &r in reprs {
                    let mut c = RerankRunConfig::new(v);
                    c.representation = r;
                    c.first_stage_n = first_stage_n;
                    c.tag = format!("{}.{}", v.id(), repr_slug(r));
                    push(c)?;
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::validation("sweep expands to no runs"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
}

/// Runs the shared first stages through `run_pipeline`'s artifacts, then
/// one re-ranking per sweep entry. Runs land in `<output_dir>/sweep/`.
pub fn run_sweep(config: &PipelineConfig, entries: &[SweepEntry]) -> Result<SweepSummary> {
    let base = run_pipeline(config)?;
    let out = config.paths.output_dir.join("sweep");
    let p = &config.paths;
    let first_stage = config.paths.output_dir.join("first_stage.run");
    let cred = config.paths.output_dir.join("cred.jsonl");
    let handle = config.scorer_handle();
    let mut runs = vec![first_stage.clone()];
    for e in entries {
        let path = out.join(format!("{}.run", e.config.tag));
        rerank_stage(
            &e.config,
            &p.topics,
            &first_stage,
            Some(&cred),
            &p.corpus,
            &handle,
            &path,
        )
        .map_err(|err| err.in_stage(&format!("sweep:{}", e.config.tag)))?;
        runs.push(path);
    }
    let comparison = match &p.qrels {
        Some(q) if runs.len() >= 2 => Some(compare_stage(
            &runs,
            q,
            config.eval.policy(),
            &config.eval.metrics,
            &out.join("comparison.json"),
        )?),
        _ => None,
    };
    drop(base);
    let summary = SweepSummary {
        runs: runs
            .iter()
            .map(|r| r.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        comparison,
    };
    write_json(&summary, &out.join("summary.json"))?;
    Ok(summary)
}
