//! TransE, DistMult and ComplEx embedding baselines.
//!
//! Scores (higher = more plausible):
//!
//! | model    | score(h, r, t)                         |
//! |----------|----------------------------------------|
//! | TransE   | `-‖e_h + w_r - e_t‖₂`                  |
//! | DistMult | `Σ e_h[i] · w_r[i] · e_t[i]`           |
//! | ComplEx  | `Re(Σ e_h[i] · w_r[i] · conj(e_t[i]))` |
//!
//! Training is plain SGD over filtered corruptions: a margin ranking loss for
//! TransE and a logistic loss for the two bilinear models. A multi-hop
//! instance is scored by its endpoints, taking the best relation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Answer, EvalOutcome};
use crate::graph::{KnowledgeGraph, NodeId, RelationId, Triple};
use crate::sampler::{seeded_rng, stream, Label, PathInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        }
    }

    fn is_complex(self) -> bool {
        self == ModelKind::ComplEx
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            other => Err(format!("unknown model kind {other:?} (expected transe, distmult or complex)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// TransE ranking margin.
    pub margin: f64,
    pub negatives: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            epochs: 5,
            learning_rate: 0.01,
            margin: 1.0,
            negatives: 1,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.negatives == 0 || self.batch_size == 0 {
            return Err(Error::Config("dim, negatives and batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0 && self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::Config("learning_rate and margin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    EntityRe,
    EntityIm,
    RelationRe,
    RelationIm,
}

/// Gradient rows keyed by (table, row).
pub type SparseGrad = BTreeMap<(Param, u32), Vec<f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel {
    pub kind: ModelKind,
    pub entity_count: usize,
    pub relation_count: usize,
    pub dim: usize,
    pub entity_re: Vec<f64>,
    /// Empty unless the model is ComplEx.
    pub entity_im: Vec<f64>,
    pub relation_re: Vec<f64>,
    pub relation_im: Vec<f64>,
    pub config: TrainConfig,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn normalize(row: &mut [f64]) {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        row.iter_mut().for_each(|v| *v /= norm);
    }
}

impl BaselineModel {
    /// Seeded initialization. TransE rows are unit-normalized.
    pub fn init(
        kind: ModelKind,
        entity_count: usize,
        relation_count: usize,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let mut rng = seeded_rng(config.seed, stream::BASELINE);
        let bound = match kind {
            ModelKind::TransE => 6.0 / (d as f64).sqrt(),
            _ => (6.0 / (2 * d) as f64).sqrt(),
        };
        let mut table = |rows: usize| -> Vec<f64> { (0..rows * d).map(|_| rng.gen_range(-bound..bound)).collect() };
        let entity_re = table(entity_count);
        let relation_re = table(relation_count);
        let (entity_im, relation_im) = if kind.is_complex() {
            (table(entity_count), table(relation_count))
        } else {
            (Vec::new(), Vec::new())
        };
        let mut m = BaselineModel {
            kind,
            entity_count,
            relation_count,
            dim: d,
            entity_re,
            entity_im,
            relation_re,
            relation_im,
            config: config.clone(),
        };
        if kind == ModelKind::TransE {
            m.entity_re.chunks_mut(d).for_each(normalize);
            m.relation_re.chunks_mut(d).for_each(normalize);
        }
        Ok(m)
    }

    fn row(&self, p: Param, i: u32) -> &[f64] {
        let d = self.dim;
        let table = match p {
            Param::EntityRe => &self.entity_re,
            Param::EntityIm => &self.entity_im,
            Param::RelationRe => &self.relation_re,
            Param::RelationIm => &self.relation_im,
        };
        &table[i as usize * d..(i as usize + 1) * d]
    }

    pub fn row_mut(&mut self, p: Param, i: u32) -> &mut [f64] {
        let d = self.dim;
        let table = match p {
            Param::EntityRe => &mut self.entity_re,
            Param::EntityIm => &mut self.entity_im,
            Param::RelationRe => &mut self.relation_re,
            Param::RelationIm => &mut self.relation_im,
        };
        &mut table[i as usize * d..(i as usize + 1) * d]
    }

    pub fn entity_row(&self, e: NodeId) -> &[f64] {
        self.row(Param::EntityRe, e.0)
    }

    fn check(&self, h: NodeId, r: RelationId, t: NodeId) -> Result<()> {
        for n in [h, t] {
            if n.index() >= self.entity_count {
                return Err(Error::NodeOutOfRange { id: n.0, count: self.entity_count });
            }
        }
        if r.index() >= self.relation_count {
            return Err(Error::RelationOutOfRange { id: r.0, count: self.relation_count });
        }
        Ok(())
    }

    pub fn score_triple(&self, h: NodeId, r: RelationId, t: NodeId) -> Result<f64> {
        self.check(h, r, t)?;
        Ok(self.score(Triple { head: h, relation: r, tail: t }))
    }

    pub(crate) fn score(&self, x: Triple) -> f64 {
        let (h, r, t) = (x.head.0, x.relation.0, x.tail.0);
        let eh = self.row(Param::EntityRe, h);
        let wr = self.row(Param::RelationRe, r);
        let et = self.row(Param::EntityRe, t);
        match self.kind {
            ModelKind::TransE => -eh
                .iter()
                .zip(wr)
                .zip(et)
                .map(|((a, b), c)| (a + b - c).powi(2))
                .sum::<f64>()
                .sqrt(),
            ModelKind::DistMult => eh.iter().zip(wr).zip(et).map(|((a, b), c)| a * b * c).sum(),
            ModelKind::ComplEx => {
                let hi = self.row(Param::EntityIm, h);
                let ri = self.row(Param::RelationIm, r);
                let ti = self.row(Param::EntityIm, t);
                (0..self.dim)
                    .map(|k| {
                        eh[k] * wr[k] * et[k] + hi[k] * wr[k] * ti[k] + eh[k] * ri[k] * ti[k]
                            - hi[k] * ri[k] * et[k]
                    })
                    .sum()
            }
        }
    }

    /// Training loss of one positive against its corruptions.
    pub fn loss(&self, positive: Triple, negatives: &[Triple]) -> f64 {
        let sp = self.score(positive);
        match self.kind {
            ModelKind::TransE => negatives
                .iter()
                .map(|&n| (self.config.margin - sp + self.score(n)).max(0.0))
                .sum(),
            _ => softplus(-sp) + negatives.iter().map(|&n| softplus(self.score(n))).sum::<f64>(),
        }
    }

    /// Adds `coef · ∂score/∂θ` for every parameter row touched by `x`.
    fn accumulate_score_grad(&self, x: Triple, coef: f64, grad: &mut SparseGrad) {
        let d = self.dim;
        let (h, r, t) = (x.head.0, x.relation.0, x.tail.0);
        let mut add = |p: Param, i: u32, f: &dyn Fn(usize) -> f64| {
            let row = grad.entry((p, i)).or_insert_with(|| vec![0.0; d]);
            for (k, v) in row.iter_mut().enumerate() {
                *v += coef * f(k);
            }
        };
        let eh = self.row(Param::EntityRe, h);
        let wr = self.row(Param::RelationRe, r);
        let et = self.row(Param::EntityRe, t);
        match self.kind {
            ModelKind::TransE => {
                let u: Vec<f64> = (0..d).map(|k| eh[k] + wr[k] - et[k]).collect();
                let dist = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if dist == 0.0 {
                    return;
                }
                // score = -dist, ∂dist/∂h = u / dist
                add(Param::EntityRe, h, &|k| -u[k] / dist);
                add(Param::RelationRe, r, &|k| -u[k] / dist);
                add(Param::EntityRe, t, &|k| u[k] / dist);
            }
            ModelKind::DistMult => {
                add(Param::EntityRe, h, &|k| wr[k] * et[k]);
                add(Param::RelationRe, r, &|k| eh[k] * et[k]);
                add(Param::EntityRe, t, &|k| eh[k] * wr[k]);
            }
            ModelKind::ComplEx => {
                let hi = self.row(Param::EntityIm, h);
                let ri = self.row(Param::RelationIm, r);
                let ti = self.row(Param::EntityIm, t);
                add(Param::EntityRe, h, &|k| wr[k] * et[k] + ri[k] * ti[k]);
                add(Param::EntityIm, h, &|k| wr[k] * ti[k] - ri[k] * et[k]);
                add(Param::RelationRe, r, &|k| eh[k] * et[k] + hi[k] * ti[k]);
                add(Param::RelationIm, r, &|k| eh[k] * ti[k] - hi[k] * et[k]);
                add(Param::EntityRe, t, &|k| eh[k] * wr[k] - hi[k] * ri[k]);
                add(Param::EntityIm, t, &|k| hi[k] * wr[k] + eh[k] * ri[k]);
            }
        }
    }

    /// Loss and its analytic gradient.
    pub fn loss_and_grad(&self, positive: Triple, negatives: &[Triple], grad: &mut SparseGrad) -> f64 {
        let sp = self.score(positive);
        match self.kind {
            ModelKind::TransE => {
                let mut loss = 0.0;
                for &n in negatives {
                    let l = self.config.margin - sp + self.score(n);
                    if l > 0.0 {
                        loss += l;
                        self.accumulate_score_grad(positive, -1.0, grad);
                        self.accumulate_score_grad(n, 1.0, grad);
                    }
                }
                loss
            }
            _ => {
                let mut loss = softplus(-sp);
                self.accumulate_score_grad(positive, -sigmoid(-sp), grad);
                for &n in negatives {
                    let sn = self.score(n);
                    loss += softplus(sn);
                    self.accumulate_score_grad(n, sigmoid(sn), grad);
                }
                loss
            }
        }
    }

    fn apply(&mut self, grad: &SparseGrad, lr: f64) {
        for (&(p, i), g) in grad {
            for (v, dv) in self.row_mut(p, i).iter_mut().zip(g) {
                *v -= lr * dv;
            }
        }
        if self.kind == ModelKind::TransE {
            for &(p, i) in grad.keys() {
                if p == Param::EntityRe {
                    normalize(self.row_mut(p, i));
                }
            }
        }
    }

    /// Best score over all relations between two endpoints.
    pub fn endpoint_score(&self, first: NodeId, last: NodeId) -> Result<f64> {
        self.check(first, RelationId(0), last)?;
        Ok((0..self.relation_count as u32)
            .map(|r| self.score(Triple { head: first, relation: RelationId(r), tail: last }))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn predict_link(&self, instance: &PathInstance, threshold: f64) -> Result<Answer> {
        let s = self.endpoint_score(instance.first(), instance.last())?;
        Ok(if s >= threshold { Answer::Yes } else { Answer::No })
    }

    pub fn is_finite(&self) -> bool {
        [&self.entity_re, &self.entity_im, &self.relation_re, &self.relation_im]
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn corrupt(g: &KnowledgeGraph, positive: Triple, rng: &mut ChaCha8Rng) -> Option<Triple> {
    const ATTEMPTS: usize = 32;
    let n = g.entity_count() as u32;
    for _ in 0..ATTEMPTS {
        let e = NodeId(rng.gen_range(0..n));
        let c = if rng.gen_bool(0.5) {
            Triple { head: e, ..positive }
        } else {
            Triple { tail: e, ..positive }
        };
        if !g.contains(c.head, c.relation, c.tail) {
            return Some(c);
        }
    }
    None
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per positive, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub skipped_corruptions: usize,
}

/// Trains a model on every triple of `g`.
pub fn train(g: &KnowledgeGraph, kind: ModelKind, cfg: &TrainConfig) -> Result<(BaselineModel, TrainReport)> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut model = BaselineModel::init(kind, g.entity_count(), g.relation_count(), cfg)?;
    let mut rng = seeded_rng(cfg.seed, stream::BASELINE + 100);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..g.triple_count()).collect();
    let mut negatives = Vec::with_capacity(cfg.negatives);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = SparseGrad::new();
            for &i in batch {
                let pos = g.triples()[i];
                negatives.clear();
                for _ in 0..cfg.negatives {
                    match corrupt(g, pos, &mut rng) {
                        Some(n) => negatives.push(n),
                        None => report.skipped_corruptions += 1,
                    }
                }
                total += model.loss_and_grad(pos, &negatives, &mut grad);
            }
            model.apply(&grad, cfg.learning_rate);
        }
        report.epoch_losses.push(total / g.triple_count() as f64);
    }
    if !model.is_finite() {
        return Err(Error::Contract(format!(
            "{} training diverged; lower the learning rate",
            kind.name()
        )));
    }
    Ok((model, report))
}

/// A random small model with one positive and a few corruptions, for
/// gradient checking.
#[derive(Clone, Debug)]
pub struct GradProbe {
    pub model: BaselineModel,
    pub positive: Triple,
    pub negatives: Vec<Triple>,
}

impl GradProbe {
    pub fn random(kind: ModelKind, seed: u64) -> Self {
        let cfg = TrainConfig {
            dim: 6,
            // wide enough that every TransE hinge term is active
            margin: 5.0,
            seed,
            ..Default::default()
        };
        let mut model = BaselineModel::init(kind, 5, 3, &cfg).expect("valid probe config");
        let mut rng = seeded_rng(seed, 99);
        // break unit norms so the probe is generic
        for v in model.entity_re.iter_mut() {
            *v *= rng.gen_range(0.5..1.5);
        }
        let mut triple = || Triple::new(rng.gen_range(0..5), rng.gen_range(0..3), rng.gen_range(0..5));
        let positive = triple();
        let negatives = (0..2).map(|_| triple()).collect();
        GradProbe { model, positive, negatives }
    }
}

/// Largest relative error between the analytic gradient and central finite
/// differences of the loss, over every touched parameter entry.
pub fn grad_check(probe: &GradProbe, eps: f64) -> f64 {
    let mut analytic = SparseGrad::new();
    probe.model.loss_and_grad(probe.positive, &probe.negatives, &mut analytic);
    let mut touched: Vec<(Param, u32)> = Vec::new();
    for x in std::iter::once(probe.positive).chain(probe.negatives.iter().copied()) {
        let mut params = vec![
            (Param::EntityRe, x.head.0),
            (Param::EntityRe, x.tail.0),
            (Param::RelationRe, x.relation.0),
        ];
        if probe.model.kind.is_complex() {
            params.extend([
                (Param::EntityIm, x.head.0),
                (Param::EntityIm, x.tail.0),
                (Param::RelationIm, x.relation.0),
            ]);
        }
        touched.extend(params);
    }
    touched.sort();
    touched.dedup();

    let mut worst: f64 = 0.0;
    let mut m = probe.model.clone();
    for (p, i) in touched {
        for k in 0..m.dim {
            let orig = m.row(p, i)[k];
            m.row_mut(p, i)[k] = orig + eps;
            let up = m.loss(probe.positive, &probe.negatives);
            m.row_mut(p, i)[k] = orig - eps;
            let down = m.loss(probe.positive, &probe.negatives);
            m.row_mut(p, i)[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(&(p, i)).map_or(0.0, |g| g[k]);
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

/// F1-maximizing threshold over the distinct scores, ties to the lower one.
/// Scores at or above the threshold are predicted positive.
pub fn calibrate_from_scores(scored: &[(f64, bool)]) -> Result<f64> {
    if scored.is_empty() {
        return Err(Error::Config("cannot calibrate a threshold on an empty validation set".into()));
    }
    if scored.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::Contract("non-finite validation score".into()));
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = sorted.iter().filter(|(_, y)| *y).count();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::NEG_INFINITY, sorted[0].0);
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == s {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fn_ = positives - tp;
        let f1 = if tp == 0 { 0.0 } else { (2 * tp) as f64 / (2 * tp + fp + fn_) as f64 };
        if f1 >= best.0 {
            best = (f1, s);
        }
    }
    Ok(best.1)
}

pub fn calibrate_threshold(m: &BaselineModel, validation: &[PathInstance]) -> Result<f64> {
    let scored = validation
        .iter()
        .map(|i| Ok((m.endpoint_score(i.first(), i.last())?, i.label == Label::Positive)))
        .collect::<Result<Vec<_>>>()?;
    calibrate_from_scores(&scored)
}

/// Link-prediction outcomes for `instances` at a fixed threshold.
pub fn evaluate_link(m: &BaselineModel, instances: &[PathInstance], threshold: f64) -> Result<Vec<EvalOutcome>> {
    instances
        .iter()
        .map(|i| {
            let s = m.endpoint_score(i.first(), i.last())?;
            Ok(EvalOutcome {
                id: format!("{}/link", i.id),
                gold: if i.is_positive() { Answer::Yes } else { Answer::No },
                predicted: if s >= threshold { Answer::Yes } else { Answer::No },
                hops: i.hops,
                raw_response: format!("score={s:.6} threshold={threshold:.6}"),
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: ModelKind,
    entities: usize,
    relations: usize,
    dim: usize,
    seed: u64,
    config: TrainConfig,
}

fn data_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

impl BaselineModel {
    /// Writes a TOML header at `path` and little-endian f64 rows next to it
    /// (`.bin`): entity real, entity imaginary, relation real, relation
    /// imaginary; imaginary tables only for ComplEx.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader {
            kind: self.kind,
            entities: self.entity_count,
            relations: self.relation_count,
            dim: self.dim,
            seed: self.config.seed,
            config: self.config.clone(),
        };
        let text = toml::to_string(&header).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::with_capacity(8 * (self.entity_re.len() + self.relation_re.len()) * 2);
        for table in [&self.entity_re, &self.entity_im, &self.relation_re, &self.relation_im] {
            for v in table.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let data = data_path(path);
        fs::write(&data, bytes).map_err(|e| Error::io(&data, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let h: CheckpointHeader =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let data = data_path(path);
        let bytes = fs::read(&data).map_err(|e| Error::io(&data, e))?;
        let parts = if h.kind.is_complex() { 2 } else { 1 };
        let (ne, nr) = (h.entities * h.dim * parts, h.relations * h.dim * parts);
        if bytes.len() != 8 * (ne + nr) {
            return Err(Error::Config(format!(
                "{}: expected {} bytes, found {}",
                data.display(),
                8 * (ne + nr),
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut rest = values.as_slice();
        let mut take = |n: usize| {
            let (a, b) = rest.split_at(n);
            rest = b;
            a.to_vec()
        };
        let (ee, rr) = (h.entities * h.dim, h.relations * h.dim);
        let entity_re = take(ee);
        let entity_im = if parts == 2 { take(ee) } else { Vec::new() };
        let relation_re = take(rr);
        let relation_im = if parts == 2 { take(rr) } else { Vec::new() };
        Ok(BaselineModel {
            kind: h.kind,
            entity_count: h.entities,
            relation_count: h.relations,
            dim: h.dim,
            entity_re,
            entity_im,
            relation_re,
            relation_im,
            config: h.config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ModelKind) -> BaselineModel {
        BaselineModel::init(kind, 5, 2, &TrainConfig { dim: 4, seed: 3, ..Default::default() }).unwrap()
    }

    #[test]
    fn transe_translation_identity_scores_zero() {
        let mut m = tiny(ModelKind::TransE);
        let h = m.row(Param::EntityRe, 0).to_vec();
        let r = m.row(Param::RelationRe, 1).to_vec();
        let t: Vec<f64> = h.iter().zip(&r).map(|(a, b)| a + b).collect();
        m.row_mut(Param::EntityRe, 2).copy_from_slice(&t);
        assert_eq!(m.score_triple(NodeId(0), RelationId(1), NodeId(2)).unwrap(), 0.0);
        assert!(m.score_triple(NodeId(0), RelationId(1), NodeId(3)).unwrap() < 0.0);
    }

    #[test]
    fn distmult_zero_relation_scores_zero() {
        let mut m = tiny(ModelKind::DistMult);
        m.row_mut(Param::RelationRe, 0).fill(0.0);
        for h in 0..5 {
            for t in 0..5 {
                assert_eq!(m.score_triple(NodeId(h), RelationId(0), NodeId(t)).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn hand_computed_scores() {
        for kind in ModelKind::ALL {
            let m = tiny(kind);
            let (h, r, t) = (1u32, 1u32, 4u32);
            let eh = m.row(Param::EntityRe, h);
            let wr = m.row(Param::RelationRe, r);
            let et = m.row(Param::EntityRe, t);
            let expected = match kind {
                ModelKind::TransE => {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += (eh[k] + wr[k] - et[k]) * (eh[k] + wr[k] - et[k]);
                    }
                    -s.sqrt()
                }
                ModelKind::DistMult => {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += eh[k] * wr[k] * et[k];
                    }
                    s
                }
                ModelKind::ComplEx => {
                    // Re(h · r · conj(t)) through explicit complex products
                    let hi = m.row(Param::EntityIm, h);
                    let ri = m.row(Param::RelationIm, r);
                    let ti = m.row(Param::EntityIm, t);
                    let mut s = 0.0;
                    for k in 0..4 {
                        let (pr, pi) = (eh[k] * wr[k] - hi[k] * ri[k], eh[k] * ri[k] + hi[k] * wr[k]);
                        s += pr * et[k] + pi * ti[k];
                    }
                    s
                }
            };
            let got = m.score_triple(NodeId(h), RelationId(r), NodeId(t)).unwrap();
            assert!((got - expected).abs() < 1e-12, "{kind:?}: {got} vs {expected}");
        }
    }

    #[test]
    fn out_of_range_ids() {
        let m = tiny(ModelKind::DistMult);
        assert!(m.score_triple(NodeId(5), RelationId(0), NodeId(0)).is_err());
        assert!(m.score_triple(NodeId(0), RelationId(2), NodeId(0)).is_err());
    }

    #[test]
    fn predict_link_extreme_thresholds() {
        let m = tiny(ModelKind::ComplEx);
        let inst = PathInstance {
            id: "x".into(),
            nodes: vec![NodeId(0), NodeId(1), NodeId(2)],
            relations: vec![RelationId(0), RelationId(1)],
            hops: 2,
            label: Label::Negative,
            gold_relation: None,
            split: crate::sampler::Split::Test,
        };
        assert_eq!(m.predict_link(&inst, f64::INFINITY).unwrap(), Answer::No);
        assert_eq!(m.predict_link(&inst, f64::NEG_INFINITY).unwrap(), Answer::Yes);
    }

    #[test]
    fn calibration_examples() {
        let sep = [(0.1, false), (0.2, false), (0.7, true), (0.9, true)];
        assert_eq!(calibrate_from_scores(&sep).unwrap(), 0.7);
        let same = [(0.5, true), (0.5, false), (0.5, true)];
        assert_eq!(calibrate_from_scores(&same).unwrap(), 0.5);
        assert!(calibrate_from_scores(&[]).is_err());
    }

    #[test]
    fn grad_checks_pass_for_each_kind() {
        for kind in ModelKind::ALL {
            for seed in 0..10 {
                let err = grad_check(&GradProbe::random(kind, seed), 1e-5);
                assert!(err < 1e-4, "{kind:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for kind in ModelKind::ALL {
            let m = tiny(kind);
            let path = dir.path().join(format!("{}.toml", kind.name()));
            m.save(&path).unwrap();
            assert_eq!(BaselineModel::load(&path).unwrap(), m);
        }
    }
}
