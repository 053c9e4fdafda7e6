//! Instance construction: node-level split, depth-first path enumeration,
//! endpoint labelling, negative balancing and validation hold-out.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, NodeId, RelationId};

/// Independent random streams derived from the run seed.
pub mod stream {
    pub const NODE_SPLIT: u64 = 1;
    pub const ROOT_ORDER_TRAIN: u64 = 2;
    pub const ROOT_ORDER_TEST: u64 = 3;
    pub const BALANCE_TRAIN: u64 = 4;
    pub const BALANCE_TEST: u64 = 5;
    pub const VALIDATION: u64 = 6;
    pub const ICL: u64 = 7;
    pub const BASELINE: u64 = 8;
}

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// A labelled simple path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathInstance {
    pub id: String,
    pub nodes: Vec<NodeId>,
    pub relations: Vec<RelationId>,
    pub hops: usize,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_relation: Option<RelationId>,
    pub split: Split,
}

impl PathInstance {
    pub fn first(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn last(&self) -> NodeId {
        *self.nodes.last().expect("path has at least two nodes")
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Positive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_node_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            seed: 0,
            train_node_fraction: 0.8,
            validation_fraction: 0.2,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_node_fraction", self.train_node_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: BTreeSet<NodeId>,
    pub test: BTreeSet<NodeId>,
}

/// Seeded partition of all node ids; `round(fraction * entity_count)` go to train.
pub fn node_split(g: &KnowledgeGraph, spec: &SplitSpec) -> Result<NodeSplit> {
    spec.validate()?;
    let n = g.entity_count();
    if n < 2 {
        return Err(Error::Config(format!("node split needs at least 2 entities, graph has {n}")));
    }
    let mut ids: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
    ids.shuffle(&mut seeded_rng(spec.seed, stream::NODE_SPLIT));
    let train_len = (spec.train_node_fraction * n as f64).round() as usize;
    let test = ids.split_off(train_len).into_iter().collect();
    Ok(NodeSplit {
        train: ids.into_iter().collect(),
        test,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawPath {
    pub nodes: Vec<NodeId>,
    pub relations: Vec<RelationId>,
}

impl RawPath {
    pub fn hops(&self) -> usize {
        self.relations.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathOptions {
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Stop a root's traversal after this many emitted paths.
    pub per_root_cap: Option<usize>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            min_nodes: 2,
            max_nodes: 6,
            per_root_cap: Some(10_000),
        }
    }
}

impl PathOptions {
    pub fn uncapped(min_nodes: usize, max_nodes: usize) -> Self {
        PathOptions {
            min_nodes,
            max_nodes,
            per_root_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_nodes < 2 || self.max_nodes < self.min_nodes {
            return Err(Error::Config(format!(
                "path node bounds must satisfy 2 <= min <= max, got {}..={}",
                self.min_nodes, self.max_nodes
            )));
        }
        Ok(())
    }
}

struct Dfs<'a> {
    g: &'a KnowledgeGraph,
    opts: &'a PathOptions,
    nodes: Vec<NodeId>,
    relations: Vec<RelationId>,
    out: Vec<RawPath>,
    truncated: bool,
}

impl Dfs<'_> {
    /// Returns false once the per-root cap stops the walk.
    fn extend(&mut self) -> bool {
        let here = *self.nodes.last().unwrap();
        for edge in self.g.outgoing(here) {
            if self.nodes.contains(&edge.tail) {
                continue;
            }
            let emits = self.nodes.len() + 1 >= self.opts.min_nodes;
            if emits && self.opts.per_root_cap.is_some_and(|cap| self.out.len() >= cap) {
                self.truncated = true;
                return false;
            }
            self.nodes.push(edge.tail);
            self.relations.push(edge.relation);
            if emits {
                self.out.push(RawPath {
                    nodes: self.nodes.clone(),
                    relations: self.relations.clone(),
                });
            }
            let go_on = self.nodes.len() >= self.opts.max_nodes || self.extend();
            self.nodes.pop();
            self.relations.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
}

/// Simple paths starting at `root`, in DFS pre-order over edges sorted by
/// (relation, tail). The flag is true when the per-root cap cut the walk short.
pub fn paths_from_root(g: &KnowledgeGraph, root: NodeId, opts: &PathOptions) -> (Vec<RawPath>, bool) {
    let mut dfs = Dfs {
        g,
        opts,
        nodes: vec![root],
        relations: Vec::new(),
        out: Vec::new(),
        truncated: false,
    };
    if opts.max_nodes >= 2 {
        dfs.extend();
    }
    (dfs.out, dfs.truncated)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Enumeration {
    pub paths: Vec<RawPath>,
    pub truncated_roots: usize,
}

/// Every node is a DFS root exactly once, in ascending id order.
///
/// Paths are unique by (node sequence, relation sequence) without an explicit
/// dedup pass: the graph holds each triple once and a DFS from a fixed root
/// never revisits the same edge sequence.
pub fn enumerate_paths(g: &KnowledgeGraph, opts: &PathOptions) -> Result<Enumeration> {
    opts.validate()?;
    let per_root: Vec<(Vec<RawPath>, bool)> = (0..g.entity_count() as u32)
        .into_par_iter()
        .map(|r| paths_from_root(g, NodeId(r), opts))
        .collect();
    let mut e = Enumeration::default();
    for (paths, truncated) in per_root {
        e.truncated_roots += truncated as usize;
        e.paths.extend(paths);
    }
    Ok(e)
}

/// Label and gold relation of a path against the enumeration graph.
pub fn endpoint_label(g_enum: &KnowledgeGraph, first: NodeId, last: NodeId) -> (Label, Option<RelationId>) {
    match g_enum.endpoint_relations(first, last).next() {
        Some(r) => (Label::Positive, Some(r)),
        None => (Label::Negative, None),
    }
}

pub fn check_path(g: &KnowledgeGraph, nodes: &[NodeId], relations: &[RelationId]) -> Result<()> {
    if nodes.len() < 2 || relations.len() + 1 != nodes.len() {
        return Err(Error::Contract(format!(
            "a path needs n >= 2 nodes and n - 1 relations, got {} nodes and {} relations",
            nodes.len(),
            relations.len()
        )));
    }
    for (i, n) in nodes.iter().enumerate() {
        g.check_node(*n)?;
        if nodes[..i].contains(n) {
            return Err(Error::Contract(format!("node {n} repeats in path")));
        }
    }
    for (pair, &r) in nodes.windows(2).zip(relations) {
        if !g.contains(pair[0], r, pair[1]) {
            return Err(Error::Contract(format!(
                "({}, {}, {}) is not an edge of the enumeration graph",
                pair[0], r, pair[1]
            )));
        }
    }
    Ok(())
}

/// Labels a path: positive iff its endpoints are joined by a direct edge,
/// with the lowest such relation as the gold relation.
pub fn label_instance(
    g_enum: &KnowledgeGraph,
    path: RawPath,
    id: String,
    split: Split,
) -> Result<PathInstance> {
    check_path(g_enum, &path.nodes, &path.relations)?;
    let (label, gold_relation) = endpoint_label(g_enum, path.nodes[0], *path.nodes.last().unwrap());
    Ok(PathInstance {
        id,
        hops: path.relations.len(),
        nodes: path.nodes,
        relations: path.relations,
        label,
        gold_relation,
        split,
    })
}

/// Drops negatives uniformly at random until they are no more numerous than
/// positives. Survivors keep their relative order.
pub fn balance_negatives(instances: Vec<PathInstance>, seed: u64, stream: u64) -> Vec<PathInstance> {
    let positives = instances.iter().filter(|i| i.is_positive()).count();
    let negatives = instances.len() - positives;
    if negatives <= positives {
        return instances;
    }
    let keep: BTreeSet<usize> = index::sample(&mut seeded_rng(seed, stream), negatives, positives)
        .into_iter()
        .collect();
    let mut neg_index = 0;
    instances
        .into_iter()
        .filter(|inst| {
            if inst.is_positive() {
                return true;
            }
            neg_index += 1;
            keep.contains(&(neg_index - 1))
        })
        .collect()
}

/// Moves `round(validation_fraction * n)` instances of each class to validation.
pub fn make_validation_split(
    instances: Vec<PathInstance>,
    spec: &SplitSpec,
) -> Result<(Vec<PathInstance>, Vec<PathInstance>)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed, stream::VALIDATION);
    let mut picked = vec![false; instances.len()];
    for label in [Label::Positive, Label::Negative] {
        let members: Vec<usize> = instances
            .iter()
            .enumerate()
            .filter(|(_, i)| i.label == label)
            .map(|(k, _)| k)
            .collect();
        let take = (spec.validation_fraction * members.len() as f64).round() as usize;
        for k in index::sample(&mut rng, members.len(), take) {
            picked[members[k]] = true;
        }
    }
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (inst, to_validation) in instances.into_iter().zip(picked) {
        if to_validation {
            validation.push(PathInstance {
                split: Split::Validation,
                ..inst
            });
        } else {
            train.push(inst);
        }
    }
    Ok((train, validation))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub paths: PathOptions,
    /// Maximum instances kept per (hops, label) cell.
    pub cell_cap: Option<usize>,
    /// Roots traversed concurrently per merge round.
    pub chunk_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            paths: PathOptions::default(),
            cell_cap: Some(20_000),
            chunk_size: 512,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    pub roots: usize,
    pub roots_visited: usize,
    pub truncated_roots: usize,
    pub paths_enumerated: usize,
    pub dropped_by_cell_cap: usize,
    /// "<hops>/<label>" → instances kept before balancing.
    pub cells: BTreeMap<String, usize>,
    pub positives: usize,
    pub negatives_before_balancing: usize,
    pub negatives_after_balancing: usize,
}

/// Enumerates and labels paths rooted at `roots` in `g_enum`, visiting roots
/// in a seeded order and applying the per-cell cap first-come. Output does
/// not depend on the number of worker threads.
pub fn collect_instances(
    g_enum: &KnowledgeGraph,
    roots: &BTreeSet<NodeId>,
    cfg: &SamplerConfig,
    split: Split,
    seed: u64,
    order_stream: u64,
) -> Result<(Vec<PathInstance>, SampleStats)> {
    cfg.paths.validate()?;
    let mut order: Vec<NodeId> = roots.iter().copied().collect();
    order.shuffle(&mut seeded_rng(seed, order_stream));

    let hop_range = cfg.paths.min_nodes - 1..cfg.paths.max_nodes;
    let open_cells = hop_range.len() + hop_range.filter(|&h| h >= 2).count();
    let mut cells: BTreeMap<(usize, Label), usize> = BTreeMap::new();
    let mut stats = SampleStats {
        roots: order.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    let cell_full = |cells: &BTreeMap<(usize, Label), usize>, key| {
        cfg.cell_cap.is_some_and(|cap| cells.get(&key).copied().unwrap_or(0) >= cap)
    };

    'chunks: for chunk in order.chunks(cfg.chunk_size.max(1)) {
        let batch: Vec<(Vec<RawPath>, bool)> = chunk
            .par_iter()
            .map(|&root| paths_from_root(g_enum, root, &cfg.paths))
            .collect();
        for (paths, truncated) in batch {
            stats.roots_visited += 1;
            stats.truncated_roots += truncated as usize;
            stats.paths_enumerated += paths.len();
            for path in paths {
                let (label, gold) = endpoint_label(g_enum, path.nodes[0], *path.nodes.last().unwrap());
                let key = (path.hops(), label);
                if cell_full(&cells, key) {
                    stats.dropped_by_cell_cap += 1;
                    continue;
                }
                *cells.entry(key).or_default() += 1;
                out.push(PathInstance {
                    id: format!("{}-{:07}", split.as_str(), out.len()),
                    hops: path.hops(),
                    nodes: path.nodes,
                    relations: path.relations,
                    label,
                    gold_relation: gold,
                    split,
                });
            }
            // 1-hop negatives cannot exist, so that cell never fills.
            let filled = cells.keys().filter(|&&k| cell_full(&cells, k)).count();
            if cfg.cell_cap.is_some() && filled >= open_cells {
                break 'chunks;
            }
        }
    }
    stats.cells = cells
        .iter()
        .map(|((hops, label), n)| (format!("{hops}/{}", label_str(*label)), *n))
        .collect();
    stats.positives = out.iter().filter(|i| i.is_positive()).count();
    stats.negatives_before_balancing = out.len() - stats.positives;
    Ok((out, stats))
}

fn label_str(label: Label) -> &'static str {
    match label {
        Label::Positive => "positive",
        Label::Negative => "negative",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Triple;

    fn graph(e: usize, r: usize, ts: &[(u32, u32, u32)]) -> KnowledgeGraph {
        KnowledgeGraph::build(e, r, ts.iter().map(|&(h, r, t)| Triple::new(h, r, t))).unwrap()
    }

    fn node_seqs(e: &Enumeration) -> BTreeSet<Vec<u32>> {
        e.paths.iter().map(|p| p.nodes.iter().map(|n| n.0).collect()).collect()
    }

    fn inst(id: usize, label: Label) -> PathInstance {
        PathInstance {
            id: format!("i{id}"),
            nodes: vec![NodeId(0), NodeId(1)],
            relations: vec![RelationId(0)],
            hops: 1,
            label,
            gold_relation: (label == Label::Positive).then_some(RelationId(0)),
            split: Split::Train,
        }
    }

    #[test]
    fn node_split_sizes_and_determinism() {
        let g = graph(10, 1, &[]);
        let spec = SplitSpec { seed: 3, ..Default::default() };
        let a = node_split(&g, &spec).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (8, 2));
        assert!(a.train.is_disjoint(&a.test));
        assert_eq!(a, node_split(&g, &spec).unwrap());
        assert!(node_split(&graph(1, 1, &[]), &spec).is_err());
    }

    #[test]
    fn wn18rr_sized_split() {
        let g = graph(40_943, 1, &[]);
        let s = node_split(&g, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (32_754, 8_189));
    }

    #[test]
    fn chain_paths() {
        let g = graph(3, 1, &[(0, 0, 1), (1, 0, 2)]);
        let e = enumerate_paths(&g, &PathOptions::default()).unwrap();
        let expected: BTreeSet<Vec<u32>> = [vec![0, 1], vec![1, 2], vec![0, 1, 2]].into();
        assert_eq!(node_seqs(&e), expected);
        assert_eq!(e.paths.len(), 3);
    }

    #[test]
    fn triangle_paths() {
        let g = graph(3, 3, &[(0, 0, 1), (1, 1, 2), (0, 2, 2)]);
        let e = enumerate_paths(&g, &PathOptions::default()).unwrap();
        let expected: BTreeSet<Vec<u32>> = [vec![0, 1], vec![1, 2], vec![0, 2], vec![0, 1, 2]].into();
        assert_eq!(node_seqs(&e), expected);
    }

    #[test]
    fn isolated_node_and_self_loop_yield_nothing() {
        assert!(enumerate_paths(&graph(1, 1, &[]), &PathOptions::default()).unwrap().paths.is_empty());
        assert!(enumerate_paths(&graph(1, 1, &[(0, 0, 0)]), &PathOptions::default())
            .unwrap()
            .paths
            .is_empty());
    }

    #[test]
    fn per_root_cap_truncates_and_reports() {
        // star: 0 -> 1..=5
        let ts: Vec<_> = (1..=5).map(|t| (0, 0, t)).collect();
        let g = graph(6, 1, &ts);
        let opts = PathOptions { per_root_cap: Some(3), ..Default::default() };
        let e = enumerate_paths(&g, &opts).unwrap();
        assert_eq!(e.paths.len(), 3);
        assert_eq!(e.truncated_roots, 1);
        let exact = PathOptions { per_root_cap: Some(5), ..Default::default() };
        assert_eq!(enumerate_paths(&g, &exact).unwrap().truncated_roots, 0);
    }

    #[test]
    fn max_nodes_bound() {
        let ts: Vec<_> = (0..9).map(|i| (i, 0, i + 1)).collect();
        let g = graph(10, 1, &ts);
        let e = enumerate_paths(&g, &PathOptions::uncapped(2, 6)).unwrap();
        assert!(e.paths.iter().all(|p| (2..=6).contains(&p.nodes.len())));
        // chain of 10 nodes: for k nodes there are 10 - k + 1 paths
        assert_eq!(e.paths.len(), (2..=6).map(|k| 11 - k).sum::<usize>());
    }

    #[test]
    fn labelling_examples() {
        let tri = graph(3, 3, &[(0, 0, 1), (1, 1, 2), (0, 2, 2)]);
        let path = RawPath { nodes: vec![NodeId(0), NodeId(1), NodeId(2)], relations: vec![RelationId(0), RelationId(1)] };
        let i = label_instance(&tri, path.clone(), "a".into(), Split::Train).unwrap();
        assert_eq!(i.label, Label::Positive);
        assert_eq!(i.gold_relation, Some(RelationId(2)));
        assert_eq!(i.hops, 2);

        let chain = graph(3, 3, &[(0, 0, 1), (1, 1, 2)]);
        let i = label_instance(&chain, path, "b".into(), Split::Train).unwrap();
        assert_eq!(i.label, Label::Negative);
        assert_eq!(i.gold_relation, None);

        let one = RawPath { nodes: vec![NodeId(0), NodeId(1)], relations: vec![RelationId(0)] };
        let i = label_instance(&chain, one, "c".into(), Split::Train).unwrap();
        assert_eq!((i.label, i.gold_relation), (Label::Positive, Some(RelationId(0))));

        let bogus = RawPath { nodes: vec![NodeId(1), NodeId(0)], relations: vec![RelationId(0)] };
        assert!(label_instance(&chain, bogus, "d".into(), Split::Train).is_err());
    }

    #[test]
    fn gold_relation_is_lowest_direct_relation() {
        let g = graph(3, 6, &[(0, 0, 1), (1, 0, 2), (0, 5, 2), (0, 3, 2)]);
        let path = RawPath { nodes: vec![NodeId(0), NodeId(1), NodeId(2)], relations: vec![RelationId(0), RelationId(0)] };
        let i = label_instance(&g, path, "x".into(), Split::Test).unwrap();
        assert_eq!(i.gold_relation, Some(RelationId(3)));
    }

    #[test]
    fn balancing_examples() {
        let mut v: Vec<_> = (0..10).map(|i| inst(i, Label::Positive)).collect();
        v.extend((10..40).map(|i| inst(i, Label::Negative)));
        let a = balance_negatives(v.clone(), 9, stream::BALANCE_TRAIN);
        let neg = a.iter().filter(|i| !i.is_positive()).count();
        assert_eq!((a.len() - neg, neg), (10, 10));
        assert_eq!(a, balance_negatives(v.clone(), 9, stream::BALANCE_TRAIN));
        // survivors keep relative order
        let ids: Vec<_> = a.iter().map(|i| i.id[1..].parse::<usize>().unwrap()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));

        let mut few: Vec<_> = (0..10).map(|i| inst(i, Label::Positive)).collect();
        few.extend((10..15).map(|i| inst(i, Label::Negative)));
        assert_eq!(balance_negatives(few.clone(), 9, 0), few);
    }

    #[test]
    fn validation_split_examples() {
        let spec = SplitSpec { seed: 5, ..Default::default() };
        let mut v: Vec<_> = (0..100).map(|i| inst(i, Label::Positive)).collect();
        v.extend((100..200).map(|i| inst(i, Label::Negative)));
        let (train, val) = make_validation_split(v.clone(), &spec).unwrap();
        let count = |xs: &[PathInstance], l| xs.iter().filter(|i| i.label == l).count();
        assert_eq!((count(&train, Label::Positive), count(&train, Label::Negative)), (80, 80));
        assert_eq!((count(&val, Label::Positive), count(&val, Label::Negative)), (20, 20));
        assert!(val.iter().all(|i| i.split == Split::Validation));
        assert_eq!(make_validation_split(v, &spec).unwrap(), (train, val));

        let mut small: Vec<_> = (0..5).map(|i| inst(i, Label::Positive)).collect();
        small.extend((5..10).map(|i| inst(i, Label::Negative)));
        let (train, val) = make_validation_split(small, &spec).unwrap();
        assert_eq!((train.len(), val.len()), (8, 2));
        assert_eq!(count(&val, Label::Positive), 1);
    }

    #[test]
    fn bad_fractions_rejected() {
        let g = graph(4, 1, &[]);
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            let spec = SplitSpec { train_node_fraction: f, ..Default::default() };
            assert!(node_split(&g, &spec).is_err());
        }
    }

    #[test]
    fn cell_cap_limits_each_cell() {
        // complete digraph on 6 nodes has many paths
        let mut ts = Vec::new();
        for h in 0..6 {
            for t in 0..6 {
                if h != t && (h + t) % 3 != 0 {
                    ts.push((h, 0, t));
                }
            }
        }
        let g = graph(6, 1, &ts);
        let cfg = SamplerConfig { cell_cap: Some(4), chunk_size: 2, ..Default::default() };
        let (inst, stats) = collect_instances(&g, &g.all_nodes(), &cfg, Split::Train, 1, 0).unwrap();
        let mut cells: BTreeMap<(usize, Label), usize> = BTreeMap::new();
        for i in &inst {
            *cells.entry((i.hops, i.label)).or_default() += 1;
        }
        assert!(cells.values().all(|&n| n <= 4));
        assert!(stats.dropped_by_cell_cap > 0);
        for i in &inst {
            assert_eq!(endpoint_label(&g, i.first(), i.last()).0, i.label);
        }
    }
}
