//! Knowledge-prompt rendering.
//!
//! Each path instance becomes an `(instruction, input, output)` record in one
//! of two styles. `Ablation` records carry no instruction and a bare final
//! answer. `Kgllm` records carry an instruction listing the answer options and
//! an expected output that restates every hop as a reasoning clause before the
//! final answer.
//!
//! Context sentences always use the `Node_<id>` / `relation_<id>` tokens;
//! lexicon names only appear inside the reasoning clauses and the final
//! relation answer.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, RelationId};
use crate::ingest::Lexicon;
use crate::io;
use crate::sampler::{seeded_rng, stream, Label, PathInstance, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Link,
    Relation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Ablation,
    Kgllm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Icl {
    #[default]
    None,
    OneShot,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Link => "link",
            Task::Relation => "relation",
        })
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Ablation => "ablation",
            Style::Kgllm => "kgllm",
        })
    }
}

impl fmt::Display for Icl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Icl::None => "none",
            Icl::OneShot => "one_shot",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub id: String,
    pub instance_id: String,
    pub task: Task,
    pub style: Style,
    pub icl: Icl,
    pub hops: usize,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_relation: Option<RelationId>,
    pub split: Split,
}

/// One instruction-tuning example. Serialized field names follow the usual
/// `instruction` / `input` / `output` convention.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub meta: RecordMeta,
}

pub fn node_token(id: NodeId) -> String {
    format!("Node_{id}")
}

pub fn relation_token(id: RelationId) -> String {
    format!("relation_{id}")
}

/// Reasoning-clause text for a node: its lexicon phrase, else `Node_<id>`.
pub fn textualize_node(id: NodeId, lexicon: &Lexicon) -> Result<String> {
    if id.index() >= lexicon.entity_count {
        return Err(Error::NodeOutOfRange {
            id: id.0,
            count: lexicon.entity_count,
        });
    }
    Ok(lexicon
        .entity_phrase(id)
        .map_or_else(|| node_token(id), str::to_string))
}

/// Reasoning-clause text for a relation: its lexicon phrase, else `relation_<id>`.
pub fn textualize_relation(id: RelationId, lexicon: &Lexicon) -> Result<String> {
    if id.index() >= lexicon.relation_count {
        return Err(Error::RelationOutOfRange {
            id: id.0,
            count: lexicon.relation_count,
        });
    }
    Ok(lexicon
        .relation_phrase(id)
        .map_or_else(|| relation_token(id), str::to_string))
}

fn short_node_name(id: NodeId, lexicon: &Lexicon) -> String {
    lexicon.entity_name(id).map_or_else(|| node_token(id), str::to_string)
}

fn short_relation_name(id: RelationId, lexicon: &Lexicon) -> String {
    lexicon
        .relation_name(id)
        .map_or_else(|| relation_token(id), str::to_string)
}

fn hop_sentence(head: NodeId, relation: RelationId, tail: NodeId) -> String {
    format!(
        "{} has {} with {}",
        node_token(head),
        relation_token(relation),
        node_token(tail)
    )
}

/// One sentence per hop, joined by single spaces.
pub fn render_context(instance: &PathInstance) -> String {
    instance
        .nodes
        .windows(2)
        .zip(&instance.relations)
        .map(|(pair, &r)| format!("{}.", hop_sentence(pair[0], r, pair[1])))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_question(instance: &PathInstance, task: Task) -> String {
    let (first, last) = (node_token(instance.first()), node_token(instance.last()));
    match task {
        Task::Link => format!("Is {first} connected with {last}?"),
        Task::Relation => format!("What is the relationship between {first} and {last}?"),
    }
}

pub fn render_input(instance: &PathInstance, task: Task) -> String {
    format!("{} {}", render_context(instance), render_question(instance, task))
}

fn reasoning_chain(instance: &PathInstance, lexicon: &Lexicon) -> Result<String> {
    let mut clauses = Vec::with_capacity(instance.hops);
    for (pair, &r) in instance.nodes.windows(2).zip(&instance.relations) {
        clauses.push(format!(
            "{}, means {} {} {}.",
            hop_sentence(pair[0], r, pair[1]),
            textualize_node(pair[0], lexicon)?,
            textualize_relation(r, lexicon)?,
            textualize_node(pair[1], lexicon)?,
        ));
    }
    Ok(clauses.join(" "))
}

fn gold_of(instance: &PathInstance) -> Result<RelationId> {
    match (instance.label, instance.gold_relation) {
        (Label::Positive, Some(r)) => Ok(r),
        _ => Err(Error::Contract(format!(
            "relation prediction needs a positive instance with a gold relation; {} has none",
            instance.id
        ))),
    }
}

pub fn render_expected_output(
    instance: &PathInstance,
    task: Task,
    style: Style,
    lexicon: &Lexicon,
) -> Result<String> {
    let answer = |yes: bool| if yes { "The answer is yes." } else { "The answer is no." };
    match (style, task) {
        (Style::Ablation, Task::Link) => Ok(answer(instance.is_positive()).to_string()),
        (Style::Ablation, Task::Relation) => Ok(format!(
            "The relationship between the first node and the last node is {}.",
            relation_token(gold_of(instance)?)
        )),
        (Style::Kgllm, task) => {
            let gold = match task {
                Task::Relation => Some(gold_of(instance)?),
                Task::Link => instance.gold_relation.filter(|_| instance.is_positive()),
            };
            let chain = reasoning_chain(instance, lexicon)?;
            let first = textualize_node(instance.first(), lexicon)?;
            let last = textualize_node(instance.last(), lexicon)?;
            let conclusion = match gold {
                Some(r) => format!("So {first} {} {last}.", textualize_relation(r, lexicon)?),
                None => format!("So {first} is not connected with {last}."),
            };
            let final_sentence = match (task, gold) {
                (Task::Link, _) => answer(gold.is_some()).to_string(),
                (Task::Relation, Some(r)) => format!(
                    "The relationship between {} and {} is {}.",
                    short_node_name(instance.first(), lexicon),
                    short_node_name(instance.last(), lexicon),
                    short_relation_name(r, lexicon)
                ),
                (Task::Relation, None) => unreachable!("relation gold checked above"),
            };
            Ok(format!("{chain} {conclusion}\n{final_sentence}"))
        }
    }
}

/// Relation ids offered as answer options. With a cap, the most frequent
/// relations in `frequency` win (ties to the lower id); the result is listed
/// in ascending id order either way.
pub fn relation_options(
    relation_count: usize,
    max_options: Option<usize>,
    frequency: &BTreeMap<RelationId, usize>,
) -> Vec<RelationId> {
    let all: Vec<RelationId> = (0..relation_count as u32).map(RelationId).collect();
    let Some(cap) = max_options.filter(|&c| c < relation_count) else {
        return all;
    };
    let mut ranked = all;
    ranked.sort_by_key(|r| (std::cmp::Reverse(frequency.get(r).copied().unwrap_or(0)), *r));
    ranked.truncate(cap);
    ranked.sort();
    ranked
}

pub fn render_instruction(task: Task, style: Style, options: &[RelationId], lexicon: &Lexicon) -> String {
    if style == Style::Ablation {
        return String::new();
    }
    let steps = "Explain what each relation in the context means step by step, then choose exactly one answer from the options.";
    match task {
        Task::Link => format!(
            "Determine whether the first node and the last node in the context are connected. {steps}\nOptions: yes, no"
        ),
        Task::Relation => {
            let listed: Vec<String> = options.iter().map(|&r| short_relation_name(r, lexicon)).collect();
            format!(
                "Determine the relationship between the first node and the last node in the context. {steps}\nOptions: {}",
                listed.join(", ")
            )
        }
    }
}

/// Renders records for one (task, style) pair.
pub struct PromptBuilder<'a> {
    lexicon: &'a Lexicon,
    task: Task,
    style: Style,
    instruction: String,
}

impl<'a> PromptBuilder<'a> {
    pub fn new(lexicon: &'a Lexicon, task: Task, style: Style, options: &[RelationId]) -> Self {
        PromptBuilder {
            lexicon,
            task,
            style,
            instruction: render_instruction(task, style, options, lexicon),
        }
    }

    pub fn instruction(&self) -> &str {
        &self.instruction
    }

    pub fn record(&self, instance: &PathInstance, icl: Icl) -> Result<PromptRecord> {
        Ok(PromptRecord {
            instruction: self.instruction.clone(),
            input: render_input(instance, self.task),
            output: render_expected_output(instance, self.task, self.style, self.lexicon)?,
            meta: RecordMeta {
                id: format!("{}/{}", instance.id, self.task),
                instance_id: instance.id.clone(),
                task: self.task,
                style: self.style,
                icl,
                hops: instance.hops,
                label: instance.label,
                gold_relation: instance.gold_relation,
                split: instance.split,
            },
        })
    }

    /// Records for every instance the task applies to: all of them for link
    /// prediction, positives only for relation prediction.
    pub fn records(&self, instances: &[PathInstance], icl: Icl) -> Result<Vec<PromptRecord>> {
        instances
            .iter()
            .filter(|i| self.task == Task::Link || i.is_positive())
            .map(|i| self.record(i, icl))
            .collect()
    }
}

/// A solved 2-hop positive training record prepended to evaluation prompts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IclExample {
    pub record: PromptRecord,
}

impl IclExample {
    pub fn block(&self) -> String {
        format!(
            "### Context:\n{}\nAnswer:\n{}",
            self.record.input, self.record.output
        )
    }
}

/// Seeded pick among the 2-hop positive records matching `task` and `style`.
pub fn select_icl_example(
    train_records: &[PromptRecord],
    task: Task,
    style: Style,
    seed: u64,
) -> Result<IclExample> {
    let mut candidates: Vec<&PromptRecord> = train_records
        .iter()
        .filter(|r| {
            r.meta.task == task && r.meta.style == style && r.meta.hops == 2 && r.meta.label == Label::Positive
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "no 2-hop positive {task}/{style} training record available as an in-context example"
        )));
    }
    candidates.sort_by(|a, b| a.meta.id.cmp(&b.meta.id));
    let pick = seeded_rng(seed, stream::ICL).gen_range(0..candidates.len());
    Ok(IclExample {
        record: candidates[pick].clone(),
    })
}

/// Final prompt text: exemplar block, instruction, then the query context
/// ending in the `Answer:` cue.
pub fn assemble(record: &PromptRecord, icl: Option<&IclExample>) -> Result<String> {
    let mut text = String::new();
    if let Some(ex) = icl {
        if ex.record.meta.instance_id == record.meta.instance_id {
            return Err(Error::Contract(format!(
                "in-context example {} cannot prefix its own query",
                record.meta.instance_id
            )));
        }
        text.push_str(&ex.block());
        text.push_str("\n\n");
    }
    if !record.instruction.is_empty() {
        text.push_str("### Instruction:\n");
        text.push_str(&record.instruction);
        text.push_str("\n\n");
    }
    text.push_str("### Context:\n");
    text.push_str(&record.input);
    text.push_str("\nAnswer:\n");
    Ok(text)
}

/// Approximate token count: whitespace-delimited words × 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    (text.split_whitespace().count() * 13).div_ceil(10)
}

/// Drops records whose assembled prompt exceeds `limit` estimated tokens.
pub fn token_budget_filter(
    records: Vec<PromptRecord>,
    limit: usize,
    icl: Option<&IclExample>,
) -> Result<(Vec<PromptRecord>, usize)> {
    let mut kept = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for r in records {
        let icl = icl.filter(|ex| ex.record.meta.instance_id != r.meta.instance_id);
        if estimate_tokens(&assemble(&r, icl)?) <= limit {
            kept.push(r);
        } else {
            dropped += 1;
        }
    }
    Ok((kept, dropped))
}

pub fn export_jsonl(records: &[PromptRecord], path: &Path) -> Result<()> {
    io::write_jsonl(path, records)
}

pub fn import_jsonl(path: &Path) -> Result<Vec<PromptRecord>> {
    io::read_jsonl(path)
}

/// Every `Node_<id>` then every `relation_<id>` token, one per line.
pub fn special_tokens(entity_count: usize, relation_count: usize) -> String {
    let mut s = String::new();
    for e in 0..entity_count as u32 {
        s.push_str(&node_token(NodeId(e)));
        s.push('\n');
    }
    for r in 0..relation_count as u32 {
        s.push_str(&relation_token(RelationId(r)));
        s.push('\n');
    }
    s
}

pub fn emit_special_tokens_manifest(entity_count: usize, relation_count: usize, path: &Path) -> Result<()> {
    io::write_text(path, &special_tokens(entity_count, relation_count))
}
