//! Answer parsing and metrics for generated responses.
//!
//! Hard yes/no outputs carry no scores, so the binary AUC is the balanced
//! accuracy `(TPR + TNR) / 2`. Unparseable link answers count as "no" for F1
//! and AUC; the parse-failure rate is reported separately.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::graph::RelationId;
use crate::ingest::Lexicon;
use crate::promptgen::{PromptRecord, Task};
use crate::sampler::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Answer {
    Yes,
    No,
    Relation(RelationId),
    Unparseable,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => f.write_str("yes"),
            Answer::No => f.write_str("no"),
            Answer::Relation(r) => write!(f, "relation_{r}"),
            Answer::Unparseable => f.write_str("unparseable"),
        }
    }
}

impl From<Answer> for String {
    fn from(a: Answer) -> Self {
        a.to_string()
    }
}

impl TryFrom<String> for Answer {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.as_str() {
            "yes" => Ok(Answer::Yes),
            "no" => Ok(Answer::No),
            "unparseable" => Ok(Answer::Unparseable),
            other => other
                .strip_prefix("relation_")
                .and_then(|k| k.parse().ok())
                .map(|k| Answer::Relation(RelationId(k)))
                .ok_or_else(|| format!("unknown answer {other:?}")),
        }
    }
}

/// Gold answer for a rendered record.
pub fn gold_answer(record: &PromptRecord) -> Answer {
    match record.meta.task {
        Task::Link => match record.meta.label {
            Label::Positive => Answer::Yes,
            Label::Negative => Answer::No,
        },
        Task::Relation => record
            .meta
            .gold_relation
            .map_or(Answer::Unparseable, Answer::Relation),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub id: String,
    pub gold: Answer,
    pub predicted: Answer,
    pub hops: usize,
    pub raw_response: String,
}

impl EvalOutcome {
    pub fn is_correct(&self) -> bool {
        self.predicted != Answer::Unparseable && self.predicted == self.gold
    }
}

fn answer_phrase() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)the\s+answer\s+is\s*:?\s*(yes|no)\b").unwrap())
}

fn trailing_word() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no)\W*$").unwrap())
}

fn relation_token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\brelation_(\d+)\b").unwrap())
}

fn relationship_is() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)relationship\s+between\s+.*?\s+is\s+([^\n]+)").unwrap())
}

/// The last "the answer is yes/no" wins; a bare trailing yes/no is the fallback.
pub fn parse_link_answer(text: &str) -> Answer {
    let from = |word: &str| {
        if word.eq_ignore_ascii_case("yes") {
            Answer::Yes
        } else {
            Answer::No
        }
    };
    if let Some(c) = answer_phrase().captures_iter(text).last() {
        return from(&c[1]);
    }
    trailing_word()
        .captures(text.trim())
        .map_or(Answer::Unparseable, |c| from(&c[1]))
}

/// The last "relationship between … is X" sentence decides, with X read as
/// a `relation_<k>` token or a lexicon relation name. Without such a
/// sentence, the last in-range `relation_<k>` token anywhere is taken.
pub fn parse_relation_answer(text: &str, relation_count: usize, lexicon: &Lexicon) -> Answer {
    let in_range = |s: &str| {
        relation_token_re()
            .captures_iter(s)
            .filter_map(|c| c[1].parse::<u32>().ok())
            .filter(|&k| (k as usize) < relation_count)
            .last()
            .map(RelationId)
    };
    let stated = relationship_is().captures_iter(text).last().and_then(|c| {
        let tail = c[1].trim().trim_end_matches(|ch: char| ch == '.' || ch.is_whitespace());
        in_range(tail).or_else(|| lexicon.relation_by_name(tail))
    });
    stated
        .or_else(|| in_range(text))
        .map_or(Answer::Unparseable, Answer::Relation)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Positive class is "yes"; anything but a "yes" prediction counts as "no".
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a EvalOutcome>) -> Self {
        let mut c = Confusion::default();
        for o in outcomes {
            let predicted_yes = o.predicted == Answer::Yes;
            match (o.gold == Answer::Yes, predicted_yes) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 || denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    /// `(TPR + TNR) / 2`; `None` unless both classes are present.
    pub fn balanced_auc(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        if pos == 0 || neg == 0 {
            return None;
        }
        Some((self.tp as f64 / pos as f64 + self.tn as f64 / neg as f64) / 2.0)
    }
}

pub fn f1(outcomes: &[EvalOutcome]) -> f64 {
    Confusion::from_outcomes(outcomes).f1()
}

pub fn auc_binary(outcomes: &[EvalOutcome]) -> Option<f64> {
    Confusion::from_outcomes(outcomes).balanced_auc()
}

/// Fraction of outcomes whose parsed prediction equals the gold answer.
pub fn accuracy(outcomes: &[EvalOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.is_correct()).count() as f64 / outcomes.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Metrics {
    fn compute(task: Task, outcomes: &[&EvalOutcome]) -> Self {
        let owned: Vec<EvalOutcome> = outcomes.iter().map(|&o| o.clone()).collect();
        let n = owned.len();
        if n == 0 {
            return Metrics { n, f1: None, auc: None, accuracy: None };
        }
        match task {
            Task::Link => Metrics {
                n,
                f1: Some(f1(&owned)),
                auc: auc_binary(&owned),
                accuracy: Some(accuracy(&owned)),
            },
            Task::Relation => Metrics {
                n,
                f1: None,
                auc: None,
                accuracy: Some(accuracy(&owned)),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopRow {
    pub hop: usize,
    pub metrics: Metrics,
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: Task,
    pub overall: Metrics,
    pub per_hop: Vec<HopRow>,
    pub parse_failure_rate: f64,
    pub gold_counts: BTreeMap<String, usize>,
    pub predicted_counts: BTreeMap<String, usize>,
}

/// One line of the machine-readable report; `hop` is absent for overall rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub hop: Option<usize>,
    pub value: Option<f64>,
    pub n: usize,
}

fn class_key(a: Answer) -> String {
    match a {
        Answer::Relation(_) => "relation".to_string(),
        other => other.to_string(),
    }
}

/// Overall and per-hop metrics; hop buckets run from 1 to `max(max_hops, largest hop seen)`.
pub fn per_hop_report(task: Task, outcomes: &[EvalOutcome], max_hops: usize) -> Report {
    let all: Vec<&EvalOutcome> = outcomes.iter().collect();
    let top = outcomes.iter().map(|o| o.hops).max().unwrap_or(0).max(max_hops);
    let per_hop = (1..=top)
        .map(|hop| {
            let bucket: Vec<&EvalOutcome> = outcomes.iter().filter(|o| o.hops == hop).collect();
            HopRow {
                hop,
                empty: bucket.is_empty(),
                metrics: Metrics::compute(task, &bucket),
            }
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.predicted == Answer::Unparseable).count();
    let mut gold_counts = BTreeMap::new();
    let mut predicted_counts = BTreeMap::new();
    for o in outcomes {
        *gold_counts.entry(class_key(o.gold)).or_insert(0) += 1;
        *predicted_counts.entry(class_key(o.predicted)).or_insert(0) += 1;
    }
    Report {
        task,
        overall: Metrics::compute(task, &all),
        per_hop,
        parse_failure_rate: if outcomes.is_empty() {
            0.0
        } else {
            failures as f64 / outcomes.len() as f64
        },
        gold_counts,
        predicted_counts,
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl Report {
    pub fn records(&self) -> Vec<MetricRecord> {
        let mut out = Vec::new();
        let mut push = |hop: Option<usize>, m: &Metrics| {
            let metrics: &[(&str, Option<f64>)] = match self.task {
                Task::Link => &[("f1", m.f1), ("auc", m.auc), ("accuracy", m.accuracy)],
                Task::Relation => &[("accuracy", m.accuracy)],
            };
            for &(name, value) in metrics {
                out.push(MetricRecord {
                    metric: name.to_string(),
                    hop,
                    value,
                    n: m.n,
                });
            }
        };
        push(None, &self.overall);
        for row in &self.per_hop {
            push(Some(row.hop), &row.metrics);
        }
        out.push(MetricRecord {
            metric: "parse_failure_rate".to_string(),
            hop: None,
            value: Some(self.parse_failure_rate),
            n: self.overall.n,
        });
        out
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task: {}", self.task);
        let _ = writeln!(s, "{:<8} {:>7} {:>8} {:>8} {:>9}", "hops", "n", "F1", "AUC", "accuracy");
        let mut row = |label: String, m: &Metrics, note: &str| {
            let _ = writeln!(
                s,
                "{:<8} {:>7} {:>8} {:>8} {:>9}{note}",
                label,
                m.n,
                fmt_metric(m.f1),
                fmt_metric(m.auc),
                fmt_metric(m.accuracy)
            );
        };
        row("all".into(), &self.overall, "");
        for r in &self.per_hop {
            row(r.hop.to_string(), &r.metrics, if r.empty { "  (empty)" } else { "" });
        }
        let _ = writeln!(s, "parse failure rate: {:.4}", self.parse_failure_rate);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(gold: bool, predicted: Answer, hops: usize) -> EvalOutcome {
        EvalOutcome {
            id: String::new(),
            gold: if gold { Answer::Yes } else { Answer::No },
            predicted,
            hops,
            raw_response: String::new(),
        }
    }

    #[test]
    fn link_parsing() {
        assert_eq!(
            parse_link_answer("Node_1 has relation_2 with Node_3, means a b c. So X is connected with Y.\nThe answer is yes."),
            Answer::Yes
        );
        assert_eq!(parse_link_answer("The answer is no."), Answer::No);
        assert_eq!(parse_link_answer("relation_4"), Answer::Unparseable);
        assert_eq!(parse_link_answer("The answer is yes. Wait, the answer is no"), Answer::No);
        assert_eq!(parse_link_answer("THE ANSWER IS YES"), Answer::Yes);
        assert_eq!(parse_link_answer("I think... yes."), Answer::Yes);
        assert_eq!(parse_link_answer("No"), Answer::No);
        assert_eq!(parse_link_answer("the answer is nowhere"), Answer::Unparseable);
        assert_eq!(parse_link_answer(""), Answer::Unparseable);
    }

    #[test]
    fn relation_parsing() {
        let lex = Lexicon::empty(10, 200).with_relation(179, "music_artist_genre", None);
        assert_eq!(
            parse_relation_answer("The relationship between the first node and the last node is relation_1.", 200, &lex),
            Answer::Relation(RelationId(1))
        );
        assert_eq!(
            parse_relation_answer("The relationship between Miles Davis and Jazz is music_artist_genre. ", 200, &lex),
            Answer::Relation(RelationId(179))
        );
        assert_eq!(
            parse_relation_answer("The relationship between the Node_47405 and Node_46501 is relation_179.", 200, &lex),
            Answer::Relation(RelationId(179))
        );
        assert_eq!(parse_relation_answer("yes", 200, &lex), Answer::Unparseable);
        assert_eq!(parse_relation_answer("relation_900", 200, &lex), Answer::Unparseable);
    }

    #[test]
    fn answer_serde() {
        for a in [Answer::Yes, Answer::No, Answer::Unparseable, Answer::Relation(RelationId(12))] {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<Answer>(&s).unwrap(), a);
        }
        assert_eq!(serde_json::to_string(&Answer::Relation(RelationId(3))).unwrap(), "\"relation_3\"");
        assert!(serde_json::from_str::<Answer>("\"maybe\"").is_err());
    }

    #[test]
    fn f1_examples() {
        let perfect: Vec<_> = (0..10).map(|i| link(i % 2 == 0, if i % 2 == 0 { Answer::Yes } else { Answer::No }, 1)).collect();
        assert_eq!(f1(&perfect), 1.0);
        let all_yes: Vec<_> = (0..10).map(|i| link(i % 2 == 0, Answer::Yes, 1)).collect();
        assert_eq!(f1(&all_yes), 2.0 / 3.0);
        let none: Vec<_> = (0..10).map(|i| link(i % 2 == 0, Answer::No, 1)).collect();
        assert_eq!(f1(&none), 0.0);
    }

    #[test]
    fn auc_examples() {
        let all_yes: Vec<_> = (0..10).map(|i| link(i % 2 == 0, Answer::Yes, 1)).collect();
        assert_eq!(auc_binary(&all_yes), Some(0.5));
        // TPR 0.8 (4/5), TNR 0.6 (3/5)
        let mut v = Vec::new();
        v.extend((0..4).map(|_| link(true, Answer::Yes, 1)));
        v.push(link(true, Answer::Unparseable, 1));
        v.extend((0..3).map(|_| link(false, Answer::No, 1)));
        v.extend((0..2).map(|_| link(false, Answer::Yes, 1)));
        assert!((auc_binary(&v).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(auc_binary(&[link(true, Answer::Yes, 1)]), None);
    }

    #[test]
    fn accuracy_examples() {
        let rel = |g: u32, p: Answer| EvalOutcome {
            id: String::new(),
            gold: Answer::Relation(RelationId(g)),
            predicted: p,
            hops: 2,
            raw_response: String::new(),
        };
        let mut v: Vec<_> = (0..7).map(|k| rel(k, Answer::Relation(RelationId(k)))).collect();
        v.extend((0..3).map(|k| rel(k, Answer::Relation(RelationId(k + 1)))));
        assert!((accuracy(&v) - 0.7).abs() < 1e-12);
        let bad: Vec<_> = (0..4).map(|k| rel(k, Answer::Unparseable)).collect();
        assert_eq!(accuracy(&bad), 0.0);
    }

    #[test]
    fn per_hop_buckets() {
        let v: Vec<_> = (0..6).map(|i| link(i % 2 == 0, Answer::Yes, 2)).collect();
        let r = per_hop_report(Task::Link, &v, 5);
        assert_eq!(r.per_hop.len(), 5);
        for row in &r.per_hop {
            assert_eq!(row.empty, row.hop != 2);
        }
        assert_eq!(r.per_hop.iter().map(|h| h.metrics.n).sum::<usize>(), r.overall.n);
    }

    #[test]
    fn per_hop_known_stats() {
        let mut v = vec![link(true, Answer::Yes, 1), link(true, Answer::Yes, 1)];
        // hop 3: tp=1 fn=1 tn=1 fp=1 -> F1 = 2/4, AUC = 0.5, acc = 0.5
        v.push(link(true, Answer::Yes, 3));
        v.push(link(true, Answer::Unparseable, 3));
        v.push(link(false, Answer::No, 3));
        v.push(link(false, Answer::Yes, 3));
        let r = per_hop_report(Task::Link, &v, 5);
        let h1 = &r.per_hop[0].metrics;
        assert_eq!((h1.n, h1.f1, h1.auc, h1.accuracy), (2, Some(1.0), None, Some(1.0)));
        let h3 = &r.per_hop[2].metrics;
        assert_eq!((h3.n, h3.f1, h3.auc, h3.accuracy), (4, Some(0.5), Some(0.5), Some(0.5)));
        assert!((r.parse_failure_rate - 1.0 / 6.0).abs() < 1e-12);
        let recs = r.records();
        assert!(recs.iter().any(|m| m.metric == "f1" && m.hop == Some(3) && m.value == Some(0.5)));
        assert!(r.table().contains("(empty)"));
    }
}
