//! Partially directed graphs with the queries structure search needs.
//!
//! A [`Pdag`] stores at most one edge per unordered pair, either directed or
//! undirected. Per-node neighborhoods are kept as sorted lists for
//! deterministic enumeration; a global pair index gives O(1) membership.

mod bits;
mod convert;
mod dsep;
pub mod format;
mod meek;

pub(crate) use bits::{mask_to_nodeset, nodeset_to_mask, BitPdag};
pub use convert::{cpdag_from_dag, is_cpdag, mec_equal, pdag_to_dag};
pub use dsep::{d_connected, d_separated};
pub use meek::meek_close;
pub(crate) use meek::meek_close_in_place;

use smallvec::SmallVec;
use std::collections::HashMap;
use thiserror::Error;

/// Node index within a fixed-size graph.
pub type NodeId = u32;

/// Errors raised by graph construction, mutation, and conversion.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {node} out of range for a graph on {p} nodes")]
    NodeOutOfRange { node: NodeId, p: usize },
    #[error("invalid edge {u}, {v}: {reason}")]
    InvalidEdge { u: NodeId, v: NodeId, reason: &'static str },
    #[error("pdag admits no consistent extension")]
    NoConsistentExtension,
    #[error("directed part contains a cycle")]
    DirectedCycle,
    #[error("expected a cpdag (completed, Meek-closed) graph")]
    NotACpdag,
    #[error("graphs have different node counts ({a} vs {b})")]
    SizeMismatch { a: usize, b: usize },
    #[error("unknown variable name '{name}'")]
    UnknownName { name: String },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Sorted, duplicate-free set of node ids. Small sets stay inline.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet(SmallVec<[NodeId; 8]>);

impl NodeSet {
    pub fn new() -> Self {
        NodeSet(SmallVec::new())
    }

    pub fn singleton(v: NodeId) -> Self {
        let mut s = SmallVec::new();
        s.push(v);
        NodeSet(s)
    }

    pub fn from_slice(vs: &[NodeId]) -> Self {
        let mut s: SmallVec<[NodeId; 8]> = vs.into();
        s.sort_unstable();
        s.dedup();
        NodeSet(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Inserts `v`; returns false when already present.
    pub fn insert(&mut self, v: NodeId) -> bool {
        match self.0.binary_search(&v) {
            Ok(_) => false,
            Err(i) => {
                self.0.insert(i, v);
                true
            }
        }
    }

    /// Removes `v`; returns false when absent.
    pub fn remove(&mut self, v: NodeId) -> bool {
        match self.0.binary_search(&v) {
            Ok(i) => {
                self.0.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let mut out = self.clone();
        for v in other.iter() {
            out.insert(v);
        }
        out
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.iter().copied().filter(|&v| other.contains(v)).collect())
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.iter().copied().filter(|&v| !other.contains(v)).collect())
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    /// Copy of `self` with `v` added.
    pub fn with(&self, v: NodeId) -> NodeSet {
        let mut out = self.clone();
        out.insert(v);
        out
    }

    /// Copy of `self` with `v` removed.
    pub fn without(&self, v: NodeId) -> NodeSet {
        let mut out = self.clone();
        out.remove(v);
        out
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut s: SmallVec<[NodeId; 8]> = iter.into_iter().collect();
        s.sort_unstable();
        s.dedup();
        NodeSet(s)
    }
}

impl<'a> IntoIterator for &'a NodeSet {
    type Item = NodeId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, NodeId>>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

/// One edge of a [`Pdag`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Directed(NodeId, NodeId),
    Undirected(NodeId, NodeId),
}

/// Orientation of the stored pair (lo, hi) in the global index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairMark {
    Undirected,
    LoToHi,
    HiToLo,
}

fn pair_key(u: NodeId, v: NodeId) -> u64 {
    let (lo, hi) = if u < v { (u, v) } else { (v, u) };
    ((lo as u64) << 32) | hi as u64
}

/// Partially directed graph on nodes `0..p`, at most one edge per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Pdag {
    p: usize,
    parents: Vec<NodeSet>,
    children: Vec<NodeSet>,
    undirected: Vec<NodeSet>,
    pairs: HashMap<u64, PairMark>,
}

impl Pdag {
    /// Empty graph on `p` nodes.
    pub fn new(p: usize) -> Self {
        Pdag {
            p,
            parents: vec![NodeSet::new(); p],
            children: vec![NodeSet::new(); p],
            undirected: vec![NodeSet::new(); p],
            pairs: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    fn check_pair(&self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        for &n in &[u, v] {
            if (n as usize) >= self.p {
                return Err(GraphError::NodeOutOfRange { node: n, p: self.p });
            }
        }
        if u == v {
            return Err(GraphError::InvalidEdge { u, v, reason: "self-loop" });
        }
        Ok(())
    }

    /// Adds `u -> v`. Rejects self-loops and duplicate pairs.
    pub fn add_directed(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        if self.pairs.contains_key(&pair_key(u, v)) {
            return Err(GraphError::InvalidEdge { u, v, reason: "pair already has an edge" });
        }
        let mark = if u < v { PairMark::LoToHi } else { PairMark::HiToLo };
        self.pairs.insert(pair_key(u, v), mark);
        self.children[u as usize].insert(v);
        self.parents[v as usize].insert(u);
        Ok(())
    }

    /// Adds `u -- v`. Rejects self-loops and duplicate pairs.
    pub fn add_undirected(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        if self.pairs.contains_key(&pair_key(u, v)) {
            return Err(GraphError::InvalidEdge { u, v, reason: "pair already has an edge" });
        }
        self.pairs.insert(pair_key(u, v), PairMark::Undirected);
        self.undirected[u as usize].insert(v);
        self.undirected[v as usize].insert(u);
        Ok(())
    }

    /// Removes whatever edge joins `u` and `v`.
    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        match self.edge_between(u, v) {
            None => Err(GraphError::InvalidEdge { u, v, reason: "no edge to remove" }),
            Some(Edge::Undirected(..)) => {
                self.pairs.remove(&pair_key(u, v));
                self.undirected[u as usize].remove(v);
                self.undirected[v as usize].remove(u);
                Ok(())
            }
            Some(Edge::Directed(a, b)) => {
                self.pairs.remove(&pair_key(u, v));
                self.children[a as usize].remove(b);
                self.parents[b as usize].remove(a);
                Ok(())
            }
        }
    }

    /// Turns existing `u -- v` into `u -> v`.
    pub fn orient(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        if !self.has_undirected(u, v) {
            return Err(GraphError::InvalidEdge { u, v, reason: "orient expects an undirected edge" });
        }
        self.undirected[u as usize].remove(v);
        self.undirected[v as usize].remove(u);
        let mark = if u < v { PairMark::LoToHi } else { PairMark::HiToLo };
        self.pairs.insert(pair_key(u, v), mark);
        self.children[u as usize].insert(v);
        self.parents[v as usize].insert(u);
        Ok(())
    }

    /// Orients `u -> v`, accepting an edge already directed that way.
    pub(crate) fn ensure_directed(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        if self.has_directed(u, v) {
            return Ok(());
        }
        if self.has_directed(v, u) {
            return Err(GraphError::InvalidEdge { u, v, reason: "edge directed the other way" });
        }
        self.orient(u, v)
    }

    /// Drops every edge incident to `v`.
    pub(crate) fn isolate_node(&mut self, v: NodeId) {
        let vs = v as usize;
        for u in std::mem::take(&mut self.parents[vs]).iter() {
            self.children[u as usize].remove(v);
            self.pairs.remove(&pair_key(u, v));
        }
        for u in std::mem::take(&mut self.children[vs]).iter() {
            self.parents[u as usize].remove(v);
            self.pairs.remove(&pair_key(u, v));
        }
        for u in std::mem::take(&mut self.undirected[vs]).iter() {
            self.undirected[u as usize].remove(v);
            self.pairs.remove(&pair_key(u, v));
        }
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<Edge> {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        match self.pairs.get(&pair_key(u, v))? {
            PairMark::Undirected => Some(Edge::Undirected(lo, hi)),
            PairMark::LoToHi => Some(Edge::Directed(lo, hi)),
            PairMark::HiToLo => Some(Edge::Directed(hi, lo)),
        }
    }

    pub fn adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.pairs.contains_key(&pair_key(u, v))
    }

    pub fn has_directed(&self, u: NodeId, v: NodeId) -> bool {
        matches!(self.edge_between(u, v), Some(Edge::Directed(a, b)) if a == u && b == v)
    }

    pub fn has_undirected(&self, u: NodeId, v: NodeId) -> bool {
        matches!(self.edge_between(u, v), Some(Edge::Undirected(..)))
    }

    /// Parents of `v` (tails of directed edges into `v`).
    pub fn parents_of(&self, v: NodeId) -> &NodeSet {
        &self.parents[v as usize]
    }

    /// Children of `v` (heads of directed edges out of `v`).
    pub fn children_of(&self, v: NodeId) -> &NodeSet {
        &self.children[v as usize]
    }

    /// Undirected neighbors Ne(v).
    pub fn neighbors_of(&self, v: NodeId) -> &NodeSet {
        &self.undirected[v as usize]
    }

    /// All adjacent nodes Adj(v) = Pa(v) + Ch(v) + Ne(v).
    pub fn adjacents_of(&self, v: NodeId) -> NodeSet {
        let vs = v as usize;
        self.parents[vs].union(&self.children[vs]).union(&self.undirected[vs])
    }

    /// Edges in deterministic order: scans nodes ascending, directed edges by
    /// source then target, undirected once with lo < hi.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.p as NodeId {
            for v in self.children[u as usize].iter() {
                out.push(Edge::Directed(u, v));
            }
            for v in self.undirected[u as usize].iter() {
                if u < v {
                    out.push(Edge::Undirected(u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn directed_edge_count(&self) -> usize {
        self.children.iter().map(|c| c.len()).sum()
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.edge_count() - self.directed_edge_count()
    }

    pub fn has_undirected_edges(&self) -> bool {
        self.undirected.iter().any(|n| !n.is_empty())
    }

    /// True when every edge is directed and the graph is acyclic.
    pub fn is_dag(&self) -> bool {
        !self.has_undirected_edges() && self.topological_order().is_ok()
    }

    /// Kahn's algorithm over the directed part, smallest index first.
    /// Undirected edges are ignored.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let mut indeg: Vec<usize> = (0..self.p).map(|v| self.parents[v].len()).collect();
        let mut ready: Vec<NodeId> =
            (0..self.p as NodeId).filter(|&v| indeg[v as usize] == 0).collect();
        // min-heap behavior with a sorted stack keeps the order canonical
        ready.sort_unstable_by(|a, b| b.cmp(a));
        let mut order = Vec::with_capacity(self.p);
        while let Some(v) = ready.pop() {
            order.push(v);
            for c in self.children[v as usize].iter() {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    let at = ready.binary_search_by(|x| c.cmp(x)).unwrap_or_else(|i| i);
                    ready.insert(at, c);
                }
            }
        }
        if order.len() == self.p {
            Ok(order)
        } else {
            Err(GraphError::DirectedCycle)
        }
    }

    /// Descendants of `v` through directed edges, excluding `v`.
    pub fn descendants_of(&self, v: NodeId) -> NodeSet {
        let mut seen = vec![false; self.p];
        let mut stack: Vec<NodeId> = self.children[v as usize].iter().collect();
        let mut out = NodeSet::new();
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut seen[u as usize], true) {
                continue;
            }
            out.insert(u);
            stack.extend(self.children[u as usize].iter());
        }
        out
    }

    /// Ancestors of `v` through directed edges, excluding `v`.
    pub fn ancestors_of(&self, v: NodeId) -> NodeSet {
        let mut seen = vec![false; self.p];
        let mut stack: Vec<NodeId> = self.parents[v as usize].iter().collect();
        let mut out = NodeSet::new();
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut seen[u as usize], true) {
                continue;
            }
            out.insert(u);
            stack.extend(self.parents[u as usize].iter());
        }
        out
    }

    /// True when every two distinct members of `set` are adjacent.
    /// The empty set and singletons are cliques.
    pub fn is_clique(&self, set: &NodeSet) -> bool {
        let s = set.as_slice();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                if !self.adjacent(s[i], s[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// True when every semi-directed path from `y` to `x` passes through
    /// `blocker`. Semi-directed steps follow `u -> w` or `u -- w`. Endpoints
    /// count as path members, so `y` or `x` inside `blocker` blocks trivially.
    pub fn semi_directed_blocked(&self, y: NodeId, x: NodeId, blocker: &NodeSet) -> bool {
        if blocker.contains(y) || blocker.contains(x) {
            return true;
        }
        let mut seen = vec![false; self.p];
        seen[y as usize] = true;
        let mut stack = vec![y];
        while let Some(u) = stack.pop() {
            if u == x {
                return false;
            }
            for w in self.children[u as usize].iter().chain(self.undirected[u as usize].iter()) {
                if !seen[w as usize] && !blocker.contains(w) {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
        true
    }

    /// Builds a DAG from directed edge pairs. Convenience for tests and synth.
    pub fn from_directed_edges(p: usize, edges: &[(NodeId, NodeId)]) -> Result<Pdag, GraphError> {
        let mut g = Pdag::new(p);
        for &(u, v) in edges {
            g.add_directed(u, v)?;
        }
        g.topological_order()?;
        Ok(g)
    }
}
