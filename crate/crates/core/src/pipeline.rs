//! Stage-per-command pipeline with file artifacts.
//!
//! Every stage writes into `<output_dir>/<stage>/` and records a
//! `manifest.json` (config snapshot, seed, sha-256 of inputs and outputs)
//! plus a `run_log.json` with the wall time. Manifests are deterministic;
//! the run log is not. A downstream stage refuses to run when an upstream
//! manifest is missing, or when any file or setting it recorded has
//! changed since.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::attribution::rank_categories;
use crate::attribution::{
    build_pairs, load_token_vectors, train, AttributionModel, BaselineScorer, DataSplit,
    TokenVectors, TrainingConfig, VectorBank,
};
use crate::corpus::{
    compute_stats, english_heuristic_filter, ingest_auto, load_annotations, Comment, SentenceKey,
    DEFAULT_ENGLISH_MIN_RATIO,
};
use crate::embedding::{load_vectors_filtered, EmbeddingStore, BUNDLED_STOPWORDS};
use crate::error::{Error, Result};
use crate::evaluation::{
    category_breakdown, evaluate, write_breakdown, EvaluationReport, ScoredSentence,
};
use crate::factors::{factor_embedding, load_catalog, FactorCatalog, BUNDLED_CATALOG};
use crate::pruning::{
    prune, token_frequency_export, write_similarity_records, write_token_frequencies, PruneParams,
};
use crate::topics::{fit_lda, LdaConfig, TopicModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Comment dump, JSON array or JSON lines.
    pub corpus: PathBuf,
    /// Static word vectors.
    pub vectors: PathBuf,
    /// Defaults to the bundled list.
    pub stopwords: Option<PathBuf>,
    /// Defaults to the bundled catalog.
    pub catalog: Option<PathBuf>,
    /// Sentence label file; required from `train` on.
    pub labels: Option<PathBuf>,
    /// Contextual token vectors for corpus sentences. When set together
    /// with `factor_token_vectors` they replace static vectors for the
    /// attribution model.
    pub sentence_token_vectors: Option<PathBuf>,
    pub factor_token_vectors: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub english_filter: bool,
    pub min_function_word_ratio: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            english_filter: false,
            min_function_word_ratio: DEFAULT_ENGLISH_MIN_RATIO,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Resolution cut-offs; 1 is always evaluated.
    pub ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { ks: vec![1, 3] }
    }
}

/// One TOML file driving every stage. Relative paths are resolved against
/// the directory holding the config file. The top-level `seed` replaces
/// the seeds of the `topics` and `train` sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub paths: Paths,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub prune: PruneParams,
    #[serde(default)]
    pub topics: LdaConfig,
    #[serde(default)]
    pub train: TrainingConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    /// Parses a config whose relative paths resolve against the current
    /// directory.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_owned()))?;
        config.set_seed(config.seed);
        Ok(config)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.topics.seed = seed;
        self.train.seed = seed;
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.output_dir().join(stage.name())
    }

    fn optional(&self, path: &Option<PathBuf>) -> Option<PathBuf> {
        path.as_deref().map(|p| self.resolve(p))
    }

    fn catalog(&self) -> Result<FactorCatalog> {
        match self.optional(&self.paths.catalog) {
            Some(p) => load_catalog(p),
            None => Ok(FactorCatalog::bundled()),
        }
    }

    fn token_vector_paths(&self) -> Option<(PathBuf, PathBuf)> {
        Some((
            self.optional(&self.paths.sentence_token_vectors)?,
            self.optional(&self.paths.factor_token_vectors)?,
        ))
    }

    /// Loads static vectors for the given tokens plus every catalog token.
    fn store_for<'a>(
        &self,
        catalog: &FactorCatalog,
        tokens: impl IntoIterator<Item = &'a str>,
    ) -> Result<EmbeddingStore> {
        let mut wanted: HashSet<String> = tokens.into_iter().map(str::to_owned).collect();
        for f in catalog.factors() {
            wanted.extend(f.phrase.iter().cloned());
        }
        let stopwords = self.optional(&self.paths.stopwords);
        load_vectors_filtered(
            self.resolve(&self.paths.vectors),
            stopwords.as_deref(),
            |t| wanted.contains(t),
        )
    }

    /// Sha-256 of a raw input by role; bundled defaults hash their text.
    fn input_hash(&self, role: &str) -> Result<Option<String>> {
        let bundled = |text: &str| Ok(Some(sha256_hex(text.as_bytes())));
        let path = match role {
            "corpus" => Some(self.resolve(&self.paths.corpus)),
            "vectors" => Some(self.resolve(&self.paths.vectors)),
            "labels" => self.optional(&self.paths.labels),
            "sentence_token_vectors" => self.optional(&self.paths.sentence_token_vectors),
            "factor_token_vectors" => self.optional(&self.paths.factor_token_vectors),
            "stopwords" => match self.optional(&self.paths.stopwords) {
                None => return bundled(BUNDLED_STOPWORDS),
                p => p,
            },
            "catalog" => match self.optional(&self.paths.catalog) {
                None => return bundled(BUNDLED_CATALOG),
                p => p,
            },
            _ => return Ok(None),
        };
        path.map(|p| sha256_file(&p)).transpose()
    }

    /// Settings a stage's outputs depend on, as recorded in its manifest.
    fn settings(&self, stage: Stage) -> Value {
        match stage {
            Stage::Ingest => json!({ "ingest": self.ingest }),
            Stage::Prune => json!({ "prune": self.prune }),
            Stage::Topics => json!({ "topics": self.topics }),
            Stage::Train => json!({
                "train": self.train,
                "token_vectors": self.token_vector_paths().is_some(),
            }),
            Stage::Eval => json!({ "eval": self.eval }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Prune,
    Topics,
    Train,
    Eval,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Prune => "prune",
            Stage::Topics => "topics",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }

    /// Name of the artifact the stage produces, used in diagnostics.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Ingest => "corpus",
            Stage::Prune => "pruned corpus",
            Stage::Topics => "topics",
            Stage::Train => "model",
            Stage::Eval => "evaluation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    /// Full config snapshot, paths as written in the config file.
    pub config: RunConfig,
    pub settings: Value,
    /// Raw inputs by role and upstream artifacts by relative path, to
    /// sha-256 hex digests.
    pub inputs: BTreeMap<String, String>,
    /// Files written by the stage, relative to its directory.
    pub outputs: BTreeMap<String, String>,
    pub summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Collects a stage's outputs and writes its manifest.
struct StageWriter<'a> {
    config: &'a RunConfig,
    stage: Stage,
    dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    started: Instant,
}

impl<'a> StageWriter<'a> {
    fn new(config: &'a RunConfig, stage: Stage) -> Result<Self> {
        let dir = config.stage_dir(stage);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(StageWriter {
            config,
            stage,
            dir,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    fn raw_input(&mut self, role: &str) -> Result<()> {
        if let Some(h) = self.config.input_hash(role)? {
            self.inputs.insert(role.to_owned(), h);
        }
        Ok(())
    }

    fn artifact_input(&mut self, relative: &str) -> Result<()> {
        let h = sha256_file(&self.config.output_dir().join(relative))?;
        self.inputs.insert(relative.to_owned(), h);
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(name.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    /// Registers a file already written into the stage directory.
    fn record(&mut self, name: &str) -> Result<()> {
        let h = sha256_file(&self.dir.join(name))?;
        self.outputs.insert(name.to_owned(), h);
        Ok(())
    }

    fn finish(self, summary: Value) -> Result<StageManifest> {
        let manifest = StageManifest {
            stage: self.stage.name().to_owned(),
            seed: self.config.seed,
            config: self.config.clone(),
            settings: self.config.settings(self.stage),
            inputs: self.inputs,
            outputs: self.outputs,
            summary,
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, to_json(&manifest)?).map_err(|e| Error::io(&path, e))?;
        let log = json!({
            "stage": self.stage.name(),
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = self.dir.join("run_log.json");
        std::fs::write(&path, to_json(&log)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Loads an upstream manifest and checks that nothing it depended on or
/// produced has changed.
pub fn check_stage(config: &RunConfig, stage: Stage) -> Result<StageManifest> {
    let dir = config.stage_dir(stage);
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(Error::MissingArtifact(format!(
            "{} (run `{}` first)",
            stage.artifact(),
            stage.name()
        )));
    }
    let manifest: StageManifest = read_json(&path)?;
    let stale = |reason: String| Error::StaleArtifact {
        stage: stage.name().to_owned(),
        reason,
    };
    if manifest.settings != config.settings(stage) {
        return Err(stale(
            "stage settings differ from the current config".into(),
        ));
    }
    for (name, recorded) in &manifest.outputs {
        let file = dir.join(name);
        if !file.exists() || sha256_file(&file)? != *recorded {
            return Err(stale(format!("{name} was modified or removed")));
        }
    }
    for (role, recorded) in &manifest.inputs {
        let current = if role.contains('/') {
            let file = config.output_dir().join(role);
            file.exists().then(|| sha256_file(&file)).transpose()?
        } else {
            config.input_hash(role)?
        };
        if current.as_ref() != Some(recorded) {
            return Err(stale(format!("input {role} changed since the stage ran")));
        }
    }
    Ok(manifest)
}

fn load_comments(config: &RunConfig, relative: &str) -> Result<Vec<Comment>> {
    read_json(&config.output_dir().join(relative))
}

const INGESTED: &str = "ingest/corpus.json";
const PRUNED: &str = "prune/corpus.json";
const LABELED: &str = "train/labeled.json";

/// Reads and normalizes the comment dump.
pub fn cmd_ingest(config: &RunConfig) -> Result<StageManifest> {
    let mut comments = ingest_auto(config.resolve(&config.paths.corpus))?;
    let n_read = comments.len();
    if config.ingest.english_filter {
        comments = english_heuristic_filter(&comments, config.ingest.min_function_word_ratio);
    }
    let stats = compute_stats(&comments);

    let mut w = StageWriter::new(config, Stage::Ingest)?;
    w.raw_input("corpus")?;
    w.write("corpus.json", &to_json(&comments)?)?;
    w.write("stats.json", &to_json(&stats)?)?;
    w.finish(json!({
        "n_read": n_read,
        "n_comments": stats.n_comments,
        "n_sentences": stats.n_sentences,
    }))
}

/// Keeps comments close to some attribution factor.
pub fn cmd_prune(config: &RunConfig) -> Result<StageManifest> {
    check_stage(config, Stage::Ingest)?;
    let comments = load_comments(config, INGESTED)?;
    let catalog = config.catalog()?;
    let store = config.store_for(&catalog, comments.iter().flat_map(Comment::tokens))?;
    let stats = compute_stats(&comments);
    let outcome = prune(&comments, &catalog, &store, &stats, &config.prune)?;
    let kept_ids: HashSet<&str> = outcome.kept.iter().map(|c| c.id.as_str()).collect();
    let kept_flags: Vec<bool> = comments
        .iter()
        .map(|c| kept_ids.contains(c.id.as_str()))
        .collect();
    let freqs = token_frequency_export(&outcome.kept, store.stopwords());

    let mut w = StageWriter::new(config, Stage::Prune)?;
    w.artifact_input(INGESTED)?;
    for role in ["vectors", "stopwords", "catalog"] {
        w.raw_input(role)?;
    }
    w.write("corpus.json", &to_json(&outcome.kept)?)?;
    w.write_with("similarity.tsv", |b| {
        write_similarity_records(&outcome.records, &kept_flags, b)
    })?;
    w.write_with("token_frequencies.tsv", |b| {
        write_token_frequencies(&freqs, b)
    })?;
    w.finish(json!({
        "n_input": comments.len(),
        "n_kept": outcome.kept.len(),
    }))
}

/// Fits LDA over the pruned corpus.
pub fn cmd_topics(config: &RunConfig) -> Result<StageManifest> {
    check_stage(config, Stage::Prune)?;
    let comments = load_comments(config, PRUNED)?;
    let stopwords = match config.optional(&config.paths.stopwords) {
        Some(p) => crate::embedding::load_stopwords(p)?,
        None => crate::embedding::bundled_stopwords(),
    };
    let model = fit_lda(&comments, &stopwords, &config.topics)?;

    let mut w = StageWriter::new(config, Stage::Topics)?;
    w.artifact_input(PRUNED)?;
    w.raw_input("stopwords")?;
    w.write_with("topic_word.txt", |b| {
        TopicModel::write_matrix(&model.topic_word, b)
    })?;
    w.write_with("doc_topic.txt", |b| {
        TopicModel::write_matrix(&model.doc_topic, b)
    })?;
    w.write("vocabulary.txt", lines(&model.vocabulary).as_bytes())?;
    w.write("doc_ids.txt", lines(&model.doc_ids).as_bytes())?;
    w.write_with("summary.tsv", |b| model.write_summary(10, b))?;
    w.finish(json!({
        "n_topics": model.n_topics(),
        "vocabulary_size": model.vocabulary.len(),
        "n_documents": model.doc_ids.len(),
    }))
}

fn lines(items: &[String]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

/// Vector bank for `comments`: contextual token vectors when configured,
/// static vectors otherwise.
fn build_bank(
    config: &RunConfig,
    comments: &[Comment],
    catalog: &FactorCatalog,
) -> Result<VectorBank> {
    match config.token_vector_paths() {
        Some((sentences, factors)) => {
            let (_, sentence_blocks) = load_token_vectors(sentences)?;
            let (_, factor_blocks) = load_token_vectors(factors)?;
            let bank = VectorBank::from_token_vectors(sentence_blocks, factor_blocks, catalog)?;
            bank.check_alignment(comments)?;
            Ok(bank)
        }
        None => {
            let store = config.store_for(catalog, comments.iter().flat_map(Comment::tokens))?;
            VectorBank::from_static(comments, catalog, &store)
        }
    }
}

/// Labeled comments that survived pruning.
fn labeled_corpus(config: &RunConfig, catalog: &FactorCatalog) -> Result<(Vec<Comment>, usize)> {
    let labels = config
        .optional(&config.paths.labels)
        .ok_or_else(|| Error::InvalidConfig("paths.labels is required to train".into()))?;
    let ingested = load_comments(config, INGESTED)?;
    let annotated = load_annotations(&ingested, labels, catalog)?;
    let kept: HashSet<String> = load_comments(config, PRUNED)?
        .into_iter()
        .map(|c| c.id)
        .collect();
    let is_labeled = |c: &Comment| c.sentences.iter().any(|s| s.is_annotated());
    let dropped = annotated
        .iter()
        .filter(|c| is_labeled(c) && !kept.contains(&c.id))
        .count();
    let labeled = annotated
        .into_iter()
        .filter(|c| kept.contains(&c.id) && is_labeled(c))
        .collect();
    Ok((labeled, dropped))
}

/// Trains the attribution model on labeled sentences of the pruned corpus.
pub fn cmd_train(config: &RunConfig) -> Result<StageManifest> {
    check_stage(config, Stage::Ingest)?;
    check_stage(config, Stage::Prune)?;
    let catalog = config.catalog()?;
    let (labeled, dropped) = labeled_corpus(config, &catalog)?;
    let bank = build_bank(config, &labeled, &catalog)?;
    let pairs = build_pairs(&labeled, &catalog);
    let outcome = train(&pairs, &bank, &config.train)?;

    let mut w = StageWriter::new(config, Stage::Train)?;
    w.artifact_input(INGESTED)?;
    w.artifact_input(PRUNED)?;
    let mut roles = vec!["labels", "catalog", "stopwords"];
    if config.token_vector_paths().is_some() {
        roles.extend(["sentence_token_vectors", "factor_token_vectors"]);
    } else {
        roles.push("vectors");
    }
    for role in roles {
        w.raw_input(role)?;
    }
    let mut model = outcome.model;
    model.provenance.data_hashes = w.inputs.clone();
    model.save(w.dir.join("model"))?;
    w.record("model/manifest.json")?;
    w.record("model/weights.txt")?;
    w.write("labeled.json", &to_json(&labeled)?)?;
    w.write("split.json", &to_json(&outcome.split)?)?;
    w.write_with("history.tsv", |b| {
        use std::io::Write;
        writeln!(
            b,
            "epoch\ttrain_loss\tselection_loss\tselection_threshold\tselection_f1"
        )?;
        for r in &outcome.history {
            writeln!(
                b,
                "{}\t{:.9}\t{:.9}\t{:.9}\t{:.9}",
                r.epoch, r.train_loss, r.selection_loss, r.selection_threshold, r.selection_f1
            )?;
        }
        Ok(())
    })?;
    w.finish(json!({
        "n_labeled_comments": labeled.len(),
        "n_labeled_comments_pruned_away": dropped,
        "n_pairs": pairs.len(),
        "n_train_sentences": outcome.split.train.len(),
        "n_selection_sentences": outcome.split.selection.len(),
        "n_holdout_sentences": outcome.split.holdout.len(),
        "selected_epoch": model.provenance.selected_epoch,
        "detection_threshold": model.detection_threshold,
    }))
}

fn sentence_truth(comments: &[Comment]) -> BTreeMap<SentenceKey, (BTreeSet<String>, Vec<String>)> {
    let mut out = BTreeMap::new();
    for c in comments {
        for s in &c.sentences {
            if let Some(labels) = &s.labels {
                out.insert(c.sentence_key(s.index), (labels.clone(), s.tokens.clone()));
            }
        }
    }
    out
}

/// Model and baseline reports over the holdout sentences.
pub struct EvalOutput {
    pub model: EvaluationReport,
    pub baseline: EvaluationReport,
}

/// Evaluates the trained model and the idf-weighted cosine baseline on
/// the holdout split.
pub fn cmd_eval(config: &RunConfig) -> Result<(StageManifest, EvalOutput)> {
    check_stage(config, Stage::Train)?;
    let train_dir = config.stage_dir(Stage::Train);
    let model = AttributionModel::load(train_dir.join("model"))?;
    let split: DataSplit = read_json(&train_dir.join("split.json"))?;
    let labeled = load_comments(config, LABELED)?;
    let catalog = config.catalog()?;
    let bank = build_bank(config, &labeled, &catalog)?;
    let truth = sentence_truth(&labeled);
    let threshold = model
        .detection_threshold
        .ok_or_else(|| Error::InvalidInput("model has no tuned detection threshold".into()))?;

    let mut scored = Vec::with_capacity(split.holdout.len());
    for key in &split.holdout {
        let (labels, _) = &truth[key];
        let vectors = bank
            .sentence(key)
            .ok_or_else(|| Error::InvalidInput(format!("no token vectors for sentence {key}")))?;
        let (max_score, ranked_categories) = if vectors.is_empty() {
            (0.0, Vec::new())
        } else {
            let ranked = model.rank_factors(&vectors.vectors, &catalog, bank.factors())?;
            let cats = rank_categories(&ranked, &catalog);
            (ranked[0].1, cats.into_iter().map(|(c, _)| c).collect())
        };
        scored.push(ScoredSentence {
            key: key.clone(),
            max_score,
            ranked_categories,
            truth: labels.clone(),
        });
    }
    let report = evaluate(&scored, threshold, &config.eval.ks)?;

    let store = config.store_for(&catalog, labeled.iter().flat_map(Comment::tokens))?;
    let stats = compute_stats(&labeled);
    let scorer = BaselineScorer::new(&catalog, &store, &stats);
    let baseline_scored = |keys: &[SentenceKey]| -> Vec<ScoredSentence> {
        keys.iter()
            .map(|key| {
                let (labels, tokens) = &truth[key];
                let ranked = scorer.rank(tokens);
                ScoredSentence {
                    key: key.clone(),
                    max_score: ranked.first().map_or(0.0, |r| r.1),
                    ranked_categories: rank_categories(&ranked, &catalog)
                        .into_iter()
                        .map(|(c, _)| c)
                        .collect(),
                    truth: labels.clone(),
                }
            })
            .collect()
    };
    let tuning_keys = if split.selection.is_empty() {
        &split.train
    } else {
        &split.selection
    };
    let tuning: Vec<(f64, bool)> = baseline_scored(tuning_keys)
        .iter()
        .map(|s| (s.max_score, !s.truth.is_empty()))
        .collect();
    let baseline_threshold = crate::attribution::tune_threshold(&tuning)?.threshold;
    let baseline = evaluate(
        &baseline_scored(&split.holdout),
        baseline_threshold,
        &config.eval.ks,
    )?;

    let mut w = StageWriter::new(config, Stage::Eval)?;
    for name in [
        "train/model/manifest.json",
        "train/model/weights.txt",
        "train/split.json",
        LABELED,
    ] {
        w.artifact_input(name)?;
    }
    for role in ["catalog", "vectors", "stopwords"] {
        w.raw_input(role)?;
    }
    w.write_with("report.txt", |b| {
        use std::io::Write;
        writeln!(b, "attribution model (threshold {threshold:.6})")?;
        report.write_table(&mut *b)?;
        writeln!(
            b,
            "\nidf-weighted cosine baseline (threshold {baseline_threshold:.6})"
        )?;
        baseline.write_table(&mut *b)
    })?;
    w.write_with("metrics.tsv", |b| report.write_kv(b))?;
    w.write_with("baseline_metrics.tsv", |b| baseline.write_kv(b))?;
    w.write_with("breakdown.tsv", |b| {
        write_breakdown(&category_breakdown(&labeled, &catalog), b)
    })?;
    w.write_with("predictions.tsv", |b| {
        use std::io::Write;
        writeln!(b, "sentence\tmax_score\tdetected\ttop_categories\ttruth")?;
        for s in &scored {
            let top: Vec<&str> = s
                .ranked_categories
                .iter()
                .take(3)
                .map(String::as_str)
                .collect();
            let truth: Vec<&str> = s.truth.iter().map(String::as_str).collect();
            writeln!(
                b,
                "{}\t{:.9}\t{}\t{}\t{}",
                s.key,
                s.max_score,
                u8::from(s.max_score >= threshold),
                top.join(","),
                if truth.is_empty() {
                    "NONE".to_owned()
                } else {
                    truth.join(",")
                }
            )?;
        }
        Ok(())
    })?;
    let manifest = w.finish(json!({
        "n_holdout_sentences": scored.len(),
        "threshold": threshold,
        "baseline_threshold": baseline_threshold,
    }))?;
    Ok((
        manifest,
        EvalOutput {
            model: report,
            baseline,
        },
    ))
}

/// Prediction for one sentence of ad-hoc text.
#[derive(Clone, Debug, PartialEq)]
pub struct SentencePrediction {
    pub text: String,
    pub detected: bool,
    pub max_score: f64,
    /// Categories by best factor score, highest first.
    pub categories: Vec<(String, f64)>,
}

/// Scores ad-hoc text sentence by sentence with the trained model, using
/// static vectors for its tokens.
pub fn cmd_predict(config: &RunConfig, text: &str) -> Result<Vec<SentencePrediction>> {
    check_stage(config, Stage::Train)?;
    let model = AttributionModel::load(config.stage_dir(Stage::Train).join("model"))?;
    let threshold = model
        .detection_threshold
        .ok_or_else(|| Error::InvalidInput("model has no tuned detection threshold".into()))?;
    let catalog = config.catalog()?;
    let comment = Comment::new("input", "", "", text);
    let store = config.store_for(&catalog, comment.tokens())?;
    if store.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: store.dim(),
        });
    }
    let factor_reps: BTreeMap<String, Vec<f64>> = match config.token_vector_paths() {
        Some((_, factors)) => {
            let (_, blocks) = load_token_vectors(factors)?;
            VectorBank::from_token_vectors(Vec::new(), blocks, &catalog)?
                .factors()
                .clone()
        }
        None => catalog
            .factors()
            .iter()
            .map(|f| Ok((f.id.clone(), factor_embedding(f, &store)?)))
            .collect::<Result<_>>()?,
    };

    let mut out = Vec::new();
    for s in &comment.sentences {
        let vectors = TokenVectors::from_store(comment.sentence_key(s.index), &s.tokens, &store);
        if vectors.is_empty() {
            continue;
        }
        let prediction = model.predict(&vectors.vectors, &catalog, &factor_reps)?;
        let max_score = prediction.ranked[0].1;
        out.push(SentencePrediction {
            text: s.text.clone(),
            detected: max_score >= threshold,
            max_score,
            categories: prediction.ranked_categories(&catalog),
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("text has no tokens".into()));
    }
    Ok(out)
}
