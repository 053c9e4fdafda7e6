//! File-based pipeline stages.
//!
//! Every stage reads the previous stage's files under the run's output
//! directory, writes its own, and leaves a `manifest.json` (stage, tool
//! version, config hash, seed, SHA-256 of inputs and outputs) plus the
//! effective `run_config.toml` next to them.
//!
//! ```text
//! <out>/ingest/{dataset.json, triples.txt, lexicon.json}
//! <out>/instances/{train,validation,test}.jsonl, node_split.json, stats.json
//! <out>/prompts/<task>-<style>-<icl>/{train,validation,test}.jsonl, icl_example.json, stats.json
//! <out>/prompts/special_tokens.txt
//! <out>/baselines/<kind>/{model.toml, model.bin, train.json}
//! <out>/eval/<run>/{outcomes.jsonl, report.jsonl, report.txt, summary.json}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineModel, ModelKind};
use crate::client::{run_batch, BatchItem, Completer, HttpCompleter, StubCompleter};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{gold_answer, parse_link_answer, parse_relation_answer, per_hop_report, Answer, EvalOutcome, Report};
use crate::graph::{KnowledgeGraph, NodeId, RelationId};
use crate::ingest::{self, compare_with_reference, reference_stats, DatasetManifest, Lexicon, ReferenceStats};
use crate::io::{read_json, read_jsonl, sha256_file, sha256_hex, write_json, write_jsonl, write_text};
use crate::promptgen::{
    assemble, emit_special_tokens_manifest, relation_options, select_icl_example, token_budget_filter, Icl,
    IclExample, PromptBuilder, PromptRecord, Task,
};
use crate::sampler::{
    balance_negatives, collect_instances, make_validation_split, node_split, stream, NodeSplit, PathInstance,
    SampleStats, Split,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const SPLITS: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

/// Artifact paths under one output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn ingest_dir(&self) -> PathBuf {
        self.root.join("ingest")
    }
    pub fn dataset_json(&self) -> PathBuf {
        self.ingest_dir().join("dataset.json")
    }
    pub fn triples(&self) -> PathBuf {
        self.ingest_dir().join("triples.txt")
    }
    pub fn lexicon(&self) -> PathBuf {
        self.ingest_dir().join("lexicon.json")
    }

    pub fn instances_dir(&self) -> PathBuf {
        self.root.join("instances")
    }
    pub fn instances(&self, split: Split) -> PathBuf {
        self.instances_dir().join(format!("{}.jsonl", split.as_str()))
    }

    pub fn prompts_root(&self) -> PathBuf {
        self.root.join("prompts")
    }
    pub fn prompts_dir(&self, set: &str) -> PathBuf {
        self.prompts_root().join(set)
    }
    pub fn prompts(&self, set: &str, split: Split) -> PathBuf {
        self.prompts_dir(set).join(format!("{}.jsonl", split.as_str()))
    }
    pub fn icl_example(&self, set: &str) -> PathBuf {
        self.prompts_dir(set).join("icl_example.json")
    }
    pub fn special_tokens(&self) -> PathBuf {
        self.prompts_root().join("special_tokens.txt")
    }

    pub fn baseline_dir(&self, kind: ModelKind) -> PathBuf {
        self.root.join("baselines").join(kind.name())
    }
    pub fn baseline_checkpoint(&self, kind: ModelKind) -> PathBuf {
        self.baseline_dir(kind).join("model.toml")
    }

    pub fn eval_dir(&self, run: &str) -> PathBuf {
        self.root.join("eval").join(run)
    }
}

fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { path, stage })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Path relative to the output directory → SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn digests(root: &Path, files: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    files
        .iter()
        .map(|f| {
            let key = f.strip_prefix(root).unwrap_or(f).to_string_lossy().replace('\\', "/");
            Ok((key, sha256_file(f)?))
        })
        .collect()
}

fn finish_stage(cfg: &RunConfig, dir: &Path, stage: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<()> {
    let root = &cfg.out_dir;
    let manifest = StageManifest {
        stage: stage.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        inputs: digests(root, inputs)?,
        outputs: digests(root, outputs)?,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_text(&dir.join("run_config.toml"), &cfg.to_toml()?)
}

/// Published counts for a recognized benchmark.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCounts {
    pub name: String,
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

impl From<ReferenceStats> for ReferenceCounts {
    fn from(r: ReferenceStats) -> Self {
        ReferenceCounts {
            name: r.name.to_string(),
            entities: r.entities,
            relations: r.relations,
            triples: r.triples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub dataset: DatasetManifest,
    pub reference: Option<ReferenceCounts>,
    pub reference_mismatches: Vec<String>,
}

pub fn run_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    cfg.validate()?;
    let dir = cfg
        .dataset_dir
        .as_deref()
        .ok_or_else(|| Error::Config("no dataset directory given (set dataset_dir or pass --dataset-dir)".into()))?;
    let loaded = ingest::load_dataset(dir, &cfg.load_options())?;
    let reference = reference_stats(&loaded.manifest.name);
    let reference_mismatches = reference
        .as_ref()
        .map(|r| compare_with_reference(&loaded.manifest, r))
        .unwrap_or_default();
    for m in &reference_mismatches {
        log::warn!("{m}");
    }
    let summary = IngestSummary {
        dataset: loaded.manifest,
        reference: reference.map(ReferenceCounts::from),
        reference_mismatches,
    };

    let layout = Layout::new(&cfg.out_dir);
    write_json(&layout.dataset_json(), &summary)?;
    let mut buf = Vec::new();
    ingest::write_triples_file(&mut buf, loaded.graph.triples()).map_err(|e| Error::io(layout.triples(), e))?;
    write_text(&layout.triples(), std::str::from_utf8(&buf).expect("ascii triples"))?;
    write_json(&layout.lexicon(), &loaded.lexicon)?;
    finish_stage(
        cfg,
        &layout.ingest_dir(),
        "ingest",
        &[],
        &[layout.dataset_json(), layout.triples(), layout.lexicon()],
    )?;
    Ok(summary)
}

/// The ingested graph and lexicon.
pub fn load_ingested(layout: &Layout) -> Result<(KnowledgeGraph, Lexicon)> {
    let summary: IngestSummary = read_json(&require(layout.dataset_json(), "ingest")?)?;
    let path = require(layout.triples(), "ingest")?;
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let triples = ingest::parse_triples_file(BufReader::new(file), &path.display().to_string())?;
    let graph = KnowledgeGraph::build(summary.dataset.entities, summary.dataset.relations, triples)?;
    let lexicon: Lexicon = read_json(&require(layout.lexicon(), "ingest")?)?;
    Ok((graph, lexicon))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub train_nodes: usize,
    pub test_nodes: usize,
    pub train: SampleStats,
    pub test: SampleStats,
    /// Split name → instance count after balancing.
    pub instances: BTreeMap<String, usize>,
}

pub fn run_sample(cfg: &RunConfig) -> Result<SampleSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let (graph, _) = load_ingested(&layout)?;
    let split = node_split(&graph, &cfg.split_spec())?;
    let sampler = cfg.sampler_config();

    let g_train = graph.induced_subgraph(&split.train)?;
    let (train, mut train_stats) =
        collect_instances(&g_train, &split.train, &sampler, Split::Train, cfg.seed, stream::ROOT_ORDER_TRAIN)?;
    let train = balance_negatives(train, cfg.seed, stream::BALANCE_TRAIN);
    train_stats.negatives_after_balancing = train.iter().filter(|i| !i.is_positive()).count();
    let (train, validation) = make_validation_split(train, &cfg.split_spec())?;

    let g_test = graph.induced_subgraph(&split.test)?;
    let (test, mut test_stats) =
        collect_instances(&g_test, &split.test, &sampler, Split::Test, cfg.seed, stream::ROOT_ORDER_TEST)?;
    let test = balance_negatives(test, cfg.seed, stream::BALANCE_TEST);
    test_stats.negatives_after_balancing = test.iter().filter(|i| !i.is_positive()).count();

    let mut outputs = Vec::new();
    let mut counts = BTreeMap::new();
    for (s, items) in [(Split::Train, &train), (Split::Validation, &validation), (Split::Test, &test)] {
        write_jsonl(&layout.instances(s), items)?;
        outputs.push(layout.instances(s));
        counts.insert(s.as_str().to_string(), items.len());
    }
    let summary = SampleSummary {
        train_nodes: split.train.len(),
        test_nodes: split.test.len(),
        train: train_stats,
        test: test_stats,
        instances: counts,
    };
    let dir = layout.instances_dir();
    write_json(&dir.join("node_split.json"), &split)?;
    write_json(&dir.join("stats.json"), &summary)?;
    outputs.extend([dir.join("node_split.json"), dir.join("stats.json")]);
    finish_stage(cfg, &dir, "sample", &[layout.triples()], &outputs)?;
    Ok(summary)
}

pub fn load_instances(layout: &Layout, split: Split) -> Result<Vec<PathInstance>> {
    read_jsonl(&require(layout.instances(split), "sample")?)
}

pub fn load_node_split(layout: &Layout) -> Result<NodeSplit> {
    read_json(&require(layout.instances_dir().join("node_split.json"), "sample")?)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSummary {
    pub prompt_set: String,
    pub kept: BTreeMap<String, usize>,
    pub dropped_over_budget: BTreeMap<String, usize>,
    pub icl_example: Option<String>,
}

pub fn run_genprompts(cfg: &RunConfig) -> Result<PromptSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let (graph, lexicon) = load_ingested(&layout)?;
    let p = &cfg.prompts;
    let set = cfg.prompt_set();

    let instances: Vec<Vec<PathInstance>> = SPLITS
        .iter()
        .map(|&s| load_instances(&layout, s))
        .collect::<Result<_>>()?;
    let mut frequency: BTreeMap<RelationId, usize> = BTreeMap::new();
    for r in instances[0].iter().filter_map(|i| i.gold_relation) {
        *frequency.entry(r).or_default() += 1;
    }
    let max_options = (p.max_options > 0).then_some(p.max_options);
    let options = relation_options(graph.relation_count(), max_options, &frequency);
    let builder = PromptBuilder::new(&lexicon, p.task, p.style, &options);

    let train_records = builder.records(&instances[0], Icl::None)?;
    let icl = match p.icl {
        Icl::None => None,
        Icl::OneShot => Some(select_icl_example(&train_records, p.task, p.style, cfg.seed)?),
    };

    let mut summary = PromptSummary {
        prompt_set: set.clone(),
        icl_example: icl.as_ref().map(|ex| ex.record.meta.id.clone()),
        ..Default::default()
    };
    let mut outputs = Vec::new();
    for (k, &split) in SPLITS.iter().enumerate() {
        let (records, split_icl) = match split {
            Split::Test => (builder.records(&instances[k], p.icl)?, icl.as_ref()),
            Split::Train => (train_records.clone(), None),
            Split::Validation => (builder.records(&instances[k], Icl::None)?, None),
        };
        let (kept, dropped) = if p.token_limit > 0 {
            token_budget_filter(records, p.token_limit, split_icl)?
        } else {
            (records, 0)
        };
        if dropped > 0 {
            log::warn!("{dropped} {} record(s) exceed the {}-token budget", split.as_str(), p.token_limit);
        }
        let path = layout.prompts(&set, split);
        write_jsonl(&path, &kept)?;
        outputs.push(path);
        summary.kept.insert(split.as_str().to_string(), kept.len());
        summary.dropped_over_budget.insert(split.as_str().to_string(), dropped);
    }
    let dir = layout.prompts_dir(&set);
    if let Some(ex) = &icl {
        write_json(&layout.icl_example(&set), ex)?;
        outputs.push(layout.icl_example(&set));
    }
    emit_special_tokens_manifest(graph.entity_count(), graph.relation_count(), &layout.special_tokens())?;
    write_json(&dir.join("stats.json"), &summary)?;
    outputs.extend([layout.special_tokens(), dir.join("stats.json")]);
    let inputs: Vec<PathBuf> = SPLITS.iter().map(|&s| layout.instances(s)).chain([layout.lexicon()]).collect();
    finish_stage(cfg, &dir, "genprompts", &inputs, &outputs)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub checkpoint: PathBuf,
    pub training_triples: usize,
    /// Triples removed because they join the endpoints of an evaluation instance.
    pub held_out_triples: usize,
    pub epoch_losses: Vec<f64>,
}

/// The ingested graph minus every triple linking the endpoints of a
/// validation or test instance, so the baseline never sees the edges it is
/// asked about.
pub fn baseline_training_graph(graph: &KnowledgeGraph, evaluation: &[PathInstance]) -> Result<(KnowledgeGraph, usize)> {
    let held: BTreeSet<(NodeId, NodeId)> = evaluation.iter().map(|i| (i.first(), i.last())).collect();
    let kept: Vec<_> = graph
        .triples()
        .iter()
        .filter(|t| !held.contains(&(t.head, t.tail)))
        .copied()
        .collect();
    let removed = graph.triple_count() - kept.len();
    Ok((KnowledgeGraph::build(graph.entity_count(), graph.relation_count(), kept)?, removed))
}

pub fn run_train_baseline(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let (graph, _) = load_ingested(&layout)?;
    let mut evaluation = load_instances(&layout, Split::Validation)?;
    evaluation.extend(load_instances(&layout, Split::Test)?);
    let (g_fit, held_out) = baseline_training_graph(&graph, &evaluation)?;
    let kind = cfg.baseline.kind;
    let (model, report) = baselines::train(&g_fit, kind, &cfg.train_config())?;
    let checkpoint = layout.baseline_checkpoint(kind);
    model.save(&checkpoint)?;
    let summary = TrainSummary {
        kind,
        checkpoint: checkpoint.strip_prefix(&cfg.out_dir).unwrap_or(&checkpoint).to_path_buf(),
        training_triples: g_fit.triple_count(),
        held_out_triples: held_out,
        epoch_losses: report.epoch_losses,
    };
    let dir = layout.baseline_dir(kind);
    write_json(&dir.join("train.json"), &summary)?;
    finish_stage(
        cfg,
        &dir,
        "train-baseline",
        &[layout.triples(), layout.instances(Split::Validation), layout.instances(Split::Test)],
        &[checkpoint.clone(), checkpoint.with_extension("bin"), dir.join("train.json")],
    )?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub run: String,
    pub prompt_set: Option<String>,
    pub records: usize,
    pub transport_failures: usize,
    pub threshold: Option<f64>,
    pub report: Report,
}

fn write_eval(cfg: &RunConfig, run: &str, outcomes: &[EvalOutcome], summary: &EvalSummary, inputs: &[PathBuf]) -> Result<()> {
    let dir = Layout::new(&cfg.out_dir).eval_dir(run);
    let files = [
        dir.join("outcomes.jsonl"),
        dir.join("report.jsonl"),
        dir.join("report.txt"),
        dir.join("summary.json"),
    ];
    write_jsonl(&files[0], outcomes)?;
    write_jsonl(&files[1], &summary.report.records())?;
    write_text(&files[2], &summary.report.table())?;
    write_json(&files[3], summary)?;
    finish_stage(cfg, &dir, "eval", inputs, &files)
}

pub fn run_eval_baseline(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<EvalSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    let path = match checkpoint {
        Some(p) => p.to_path_buf(),
        None => layout.baseline_checkpoint(cfg.baseline.kind),
    };
    let model = BaselineModel::load(&require(path.clone(), "train-baseline")?)?;
    let validation = load_instances(&layout, Split::Validation)?;
    let test = load_instances(&layout, Split::Test)?;
    let threshold = baselines::calibrate_threshold(&model, &validation)?;
    let outcomes = baselines::evaluate_link(&model, &test, threshold)?;
    let run = format!("baseline-{}", model.kind.name());
    let summary = EvalSummary {
        run: run.clone(),
        prompt_set: None,
        records: outcomes.len(),
        transport_failures: 0,
        threshold: Some(threshold),
        report: per_hop_report(Task::Link, &outcomes, cfg.max_hops()),
    };
    write_eval(
        cfg,
        &run,
        &outcomes,
        &summary,
        &[path, layout.instances(Split::Validation), layout.instances(Split::Test)],
    )?;
    Ok(summary)
}

/// Test records of the configured prompt set and its exemplar, if any.
pub fn load_eval_records(cfg: &RunConfig) -> Result<(Vec<PromptRecord>, Option<IclExample>)> {
    let layout = Layout::new(&cfg.out_dir);
    let set = cfg.prompt_set();
    let records: Vec<PromptRecord> = read_jsonl(&require(layout.prompts(&set, Split::Test), "genprompts")?)?;
    let icl = match cfg.prompts.icl {
        Icl::None => None,
        Icl::OneShot => Some(read_json(&require(layout.icl_example(&set), "genprompts")?)?),
    };
    Ok((records, icl))
}

fn run_name_for(cfg: &RunConfig) -> String {
    let who = match cfg.eval.stub {
        Some(p) => format!("stub-{p}"),
        None => cfg
            .client
            .model
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect(),
    };
    format!("{}-{who}", cfg.prompt_set())
}

/// Evaluates the configured prompt set with the configured stub or endpoint.
pub fn run_eval(cfg: &RunConfig) -> Result<EvalSummary> {
    cfg.validate()?;
    let (records, _) = load_eval_records(cfg)?;
    match cfg.eval.stub {
        Some(policy) => run_eval_with(cfg, &StubCompleter::for_records(policy, &records), &run_name_for(cfg)),
        None => {
            if cfg.client.endpoint.is_empty() {
                return Err(Error::Config("no endpoint configured (set client.endpoint or pass --stub)".into()));
            }
            let completer = HttpCompleter::new(cfg.client.clone())?;
            run_eval_with(cfg, &completer, &run_name_for(cfg))
        }
    }
}

pub fn run_eval_with(cfg: &RunConfig, completer: &dyn Completer, run: &str) -> Result<EvalSummary> {
    let layout = Layout::new(&cfg.out_dir);
    let (graph_relations, lexicon) = if cfg.prompts.task == Task::Relation {
        let lexicon: Lexicon = read_json(&require(layout.lexicon(), "ingest")?)?;
        (lexicon.relation_count, lexicon)
    } else {
        (0, Lexicon::default())
    };
    let (records, icl) = load_eval_records(cfg)?;
    let items = records
        .iter()
        .map(|r| {
            Ok(BatchItem {
                id: r.meta.id.clone(),
                prompt: assemble(r, icl.as_ref())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let results = run_batch(&items, completer, cfg.client.max_in_flight);

    let mut transport_failures = 0;
    let mut first_error = None;
    let outcomes: Vec<EvalOutcome> = records
        .iter()
        .zip(results)
        .map(|(r, res)| {
            let (predicted, raw_response) = match res.response {
                Ok(text) => {
                    let a = match r.meta.task {
                        Task::Link => parse_link_answer(&text),
                        Task::Relation => parse_relation_answer(&text, graph_relations, &lexicon),
                    };
                    (a, text)
                }
                Err(e) => {
                    transport_failures += 1;
                    log::warn!("{}: {e}", r.meta.id);
                    let msg = format!("error: {e}");
                    first_error.get_or_insert(e);
                    (Answer::Unparseable, msg)
                }
            };
            EvalOutcome {
                id: r.meta.id.clone(),
                gold: gold_answer(r),
                predicted,
                hops: r.meta.hops,
                raw_response,
            }
        })
        .collect();

    let summary = EvalSummary {
        run: run.to_string(),
        prompt_set: Some(cfg.prompt_set()),
        records: outcomes.len(),
        transport_failures,
        threshold: None,
        report: per_hop_report(cfg.prompts.task, &outcomes, cfg.max_hops()),
    };
    let mut inputs = vec![layout.prompts(&cfg.prompt_set(), Split::Test)];
    if icl.is_some() {
        inputs.push(layout.icl_example(&cfg.prompt_set()));
    }
    write_eval(cfg, run, &outcomes, &summary, &inputs)?;

    if !outcomes.is_empty() && transport_failures == outcomes.len() {
        return Err(first_error.expect("at least one failure").into());
    }
    let rate = summary.report.parse_failure_rate;
    if rate > cfg.eval.max_parse_failure_rate {
        return Err(Error::ParseFailureCeiling {
            rate,
            ceiling: cfg.eval.max_parse_failure_rate,
        });
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub source: PathBuf,
    pub report: Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub task: Task,
    pub rows: Vec<ComparisonRow>,
}

/// Fingerprint of the (id, gold) pairs an outcome file was scored against.
pub fn outcome_fingerprint(outcomes: &[EvalOutcome]) -> String {
    let mut pairs: Vec<String> = outcomes.iter().map(|o| format!("{}\t{}", o.id, o.gold)).collect();
    pairs.sort();
    sha256_hex(pairs.join("\n").as_bytes())
}

fn row_label(path: &Path) -> String {
    let named_file = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| s != "outcomes");
    named_file
        .or_else(|| {
            path.parent()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| path.display().to_string())
}

/// Merges outcome files scored on the same records into one comparison.
pub fn build_comparison(files: &[PathBuf], max_hops: usize) -> Result<Comparison> {
    if files.is_empty() {
        return Err(Error::Config("report needs at least one outcome file".into()));
    }
    let mut rows = Vec::new();
    let mut reference: Option<(String, &Path)> = None;
    let mut task = None;
    for path in files {
        let outcomes: Vec<EvalOutcome> = read_jsonl(path)?;
        let fp = outcome_fingerprint(&outcomes);
        match &reference {
            None => reference = Some((fp, path)),
            Some((want, first)) if *want != fp => {
                return Err(Error::Mismatch(format!(
                    "{} and {} were scored on different records; refusing to merge",
                    first.display(),
                    path.display()
                )))
            }
            _ => {}
        }
        let t = if outcomes.iter().any(|o| matches!(o.gold, Answer::Relation(_))) {
            Task::Relation
        } else {
            Task::Link
        };
        task.get_or_insert(t);
        rows.push(ComparisonRow {
            label: row_label(path),
            source: path.clone(),
            report: per_hop_report(t, &outcomes, max_hops),
        });
    }
    Ok(Comparison {
        task: task.expect("at least one file"),
        rows,
    })
}

impl Comparison {
    /// One row per outcome file: overall metrics, then the per-hop F1 (link)
    /// or accuracy (relation).
    pub fn table(&self) -> String {
        use std::fmt::Write;
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let hops = self.rows.iter().map(|r| r.report.per_hop.len()).max().unwrap_or(0);
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
        let per_hop_name = match self.task {
            Task::Link => "F1",
            Task::Relation => "acc",
        };
        let mut s = String::new();
        let _ = write!(s, "{:<width$} {:>7} {:>8} {:>8} {:>8}", "model", "n", "F1", "AUC", "accuracy");
        for h in 1..=hops {
            let _ = write!(s, " {:>8}", format!("{per_hop_name}@{h}"));
        }
        s.push('\n');
        for row in &self.rows {
            let m = &row.report.overall;
            let _ = write!(
                s,
                "{:<width$} {:>7} {:>8} {:>8} {:>8}",
                row.label,
                m.n,
                fmt(m.f1),
                fmt(m.auc),
                fmt(m.accuracy)
            );
            for h in row.report.per_hop.iter() {
                let v = match self.task {
                    Task::Link => h.metrics.f1,
                    Task::Relation => h.metrics.accuracy,
                };
                let _ = write!(s, " {:>8}", fmt(v));
            }
            s.push('\n');
        }
        s
    }
}
