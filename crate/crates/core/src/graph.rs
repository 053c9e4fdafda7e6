//! Directed, relation-labelled knowledge graph.
//!
//! A graph is a set of `(head, relation, tail)` triples over dense integer id
//! spaces. It is immutable once built and can be shared freely between
//! threads.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: NodeId,
    pub relation: RelationId,
    pub tail: NodeId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple {
            head: NodeId(head),
            relation: RelationId(relation),
            tail: NodeId(tail),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeGraph {
    entity_count: usize,
    relation_count: usize,
    /// Sorted by (head, relation, tail); doubles as the forward adjacency.
    triples: Vec<Triple>,
    /// `triples[offsets[h]..offsets[h + 1]]` are the outgoing edges of `h`.
    offsets: Vec<usize>,
    /// (head, tail, relation), sorted, for endpoint lookups.
    by_endpoint: Vec<(NodeId, NodeId, RelationId)>,
    duplicates_collapsed: usize,
}

impl KnowledgeGraph {
    /// Builds a graph, collapsing duplicate triples.
    pub fn build(
        entity_count: usize,
        relation_count: usize,
        triples: impl IntoIterator<Item = Triple>,
    ) -> Result<Self> {
        let mut list = Vec::new();
        for (index, t) in triples.into_iter().enumerate() {
            if t.head.index() >= entity_count
                || t.tail.index() >= entity_count
                || t.relation.index() >= relation_count
            {
                return Err(Error::TripleOutOfBounds {
                    index,
                    head: t.head.0,
                    relation: t.relation.0,
                    tail: t.tail.0,
                    entity_count,
                    relation_count,
                });
            }
            list.push(t);
        }
        let raw_len = list.len();
        list.sort_unstable();
        list.dedup();
        let duplicates_collapsed = raw_len - list.len();
        if duplicates_collapsed > 0 {
            log::warn!("collapsed {duplicates_collapsed} duplicate triple(s)");
        }
        Ok(Self::from_sorted_unique(
            entity_count,
            relation_count,
            list,
            duplicates_collapsed,
        ))
    }

    fn from_sorted_unique(
        entity_count: usize,
        relation_count: usize,
        triples: Vec<Triple>,
        duplicates_collapsed: usize,
    ) -> Self {
        let mut offsets = vec![0usize; entity_count + 1];
        for t in &triples {
            offsets[t.head.index() + 1] += 1;
        }
        for i in 0..entity_count {
            offsets[i + 1] += offsets[i];
        }
        let mut by_endpoint: Vec<_> = triples
            .iter()
            .map(|t| (t.head, t.tail, t.relation))
            .collect();
        by_endpoint.sort_unstable();
        KnowledgeGraph {
            entity_count,
            relation_count,
            triples,
            offsets,
            by_endpoint,
            duplicates_collapsed,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn relation_count(&self) -> usize {
        self.relation_count
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of duplicate input triples dropped by [`KnowledgeGraph::build`].
    pub fn duplicates_collapsed(&self) -> usize {
        self.duplicates_collapsed
    }

    /// All triples in (head, relation, tail) order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn check_node(&self, id: NodeId) -> Result<()> {
        if id.index() < self.entity_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id: id.0,
                count: self.entity_count,
            })
        }
    }

    pub fn check_relation(&self, id: RelationId) -> Result<()> {
        if id.index() < self.relation_count {
            Ok(())
        } else {
            Err(Error::RelationOutOfRange {
                id: id.0,
                count: self.relation_count,
            })
        }
    }

    /// Outgoing edges of `node`, ordered by (relation, tail).
    ///
    /// Panics if `node` is out of range.
    pub fn outgoing(&self, node: NodeId) -> &[Triple] {
        let i = node.index();
        &self.triples[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.outgoing(node).len()
    }

    pub fn contains(&self, head: NodeId, relation: RelationId, tail: NodeId) -> bool {
        head.index() < self.entity_count
            && self
                .outgoing(head)
                .binary_search(&Triple {
                    head,
                    relation,
                    tail,
                })
                .is_ok()
    }

    /// Ascending ids of every relation `r` with `(head, r, tail)` in the graph.
    pub fn direct_relations(&self, head: NodeId, tail: NodeId) -> Result<Vec<RelationId>> {
        self.check_node(head)?;
        self.check_node(tail)?;
        Ok(self.endpoint_relations(head, tail).collect())
    }

    /// Unchecked variant of [`KnowledgeGraph::direct_relations`].
    pub(crate) fn endpoint_relations(
        &self,
        head: NodeId,
        tail: NodeId,
    ) -> impl Iterator<Item = RelationId> + '_ {
        let start = self
            .by_endpoint
            .partition_point(|&(h, t, _)| (h, t) < (head, tail));
        self.by_endpoint[start..]
            .iter()
            .take_while(move |&&(h, t, _)| h == head && t == tail)
            .map(|&(_, _, r)| r)
    }

    pub fn has_direct_link(&self, head: NodeId, tail: NodeId) -> bool {
        self.endpoint_relations(head, tail).next().is_some()
    }

    /// Subgraph keeping only triples whose head and tail are both in `nodes`.
    /// Id spaces are unchanged.
    pub fn induced_subgraph(&self, nodes: &BTreeSet<NodeId>) -> Result<Self> {
        let mut mask = vec![false; self.entity_count];
        for &n in nodes {
            self.check_node(n)?;
            mask[n.index()] = true;
        }
        let kept: Vec<Triple> = self
            .triples
            .iter()
            .filter(|t| mask[t.head.index()] && mask[t.tail.index()])
            .copied()
            .collect();
        Ok(Self::from_sorted_unique(
            self.entity_count,
            self.relation_count,
            kept,
            0,
        ))
    }

    pub fn all_nodes(&self) -> BTreeSet<NodeId> {
        (0..self.entity_count as u32).map(NodeId).collect()
    }
}
