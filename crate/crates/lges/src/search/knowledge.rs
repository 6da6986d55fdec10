//! Prior assumptions ⟨R, F⟩: required and forbidden edges, directed or
//! undirected, plus the insertion priority buckets derived from them.
//!
//! Assumptions may be wrong; they reorder the insertion scan and can seed the
//! initial class, but a score-decreasing insertion is never admitted because
//! of them.

use crate::graph::{cpdag_from_dag, pdag_to_dag, NodeId, Pdag};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KnowledgeError {
    #[error("line {line}: unknown variable name {name:?}")]
    UnknownName { line: usize, name: String },
    #[error("line {line}: cannot parse {text:?}, expected `require|forbid A ->|-- B`")]
    Malformed { line: usize, text: String },
    #[error("assertion {0} appears as both required and forbidden")]
    Conflict(String),
    #[error("self loops are not allowed: {0}")]
    SelfLoop(String),
    #[error("knowledge references node {node} but the model has {p} variables")]
    OutOfRange { node: NodeId, p: usize },
}

/// One edge assertion. Undirected assertions are stored with the smaller
/// endpoint first so the two spellings compare equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeAssertion {
    Directed(NodeId, NodeId),
    Undirected(NodeId, NodeId),
}

impl EdgeAssertion {
    pub fn directed(x: NodeId, y: NodeId) -> Self {
        EdgeAssertion::Directed(x, y)
    }

    pub fn undirected(x: NodeId, y: NodeId) -> Self {
        EdgeAssertion::Undirected(x.min(y), x.max(y))
    }

    fn describe(&self) -> String {
        match self {
            EdgeAssertion::Directed(x, y) => format!("{x} -> {y}"),
            EdgeAssertion::Undirected(x, y) => format!("{x} -- {y}"),
        }
    }

    fn max_node(&self) -> NodeId {
        match *self {
            EdgeAssertion::Directed(x, y) | EdgeAssertion::Undirected(x, y) => x.max(y),
        }
    }
}

/// The assumption sets R (required) and F (forbidden).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorKnowledge {
    required: BTreeSet<EdgeAssertion>,
    forbidden: BTreeSet<EdgeAssertion>,
}

impl PriorKnowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.required.is_empty() && self.forbidden.is_empty()
    }

    pub fn require(&mut self, a: EdgeAssertion) -> Result<(), KnowledgeError> {
        if a.is_self_loop() {
            return Err(KnowledgeError::SelfLoop(a.describe()));
        }
        if self.forbidden.contains(&a) {
            return Err(KnowledgeError::Conflict(a.describe()));
        }
        self.required.insert(a);
        Ok(())
    }

    pub fn forbid(&mut self, a: EdgeAssertion) -> Result<(), KnowledgeError> {
        if a.is_self_loop() {
            return Err(KnowledgeError::SelfLoop(a.describe()));
        }
        if self.required.contains(&a) {
            return Err(KnowledgeError::Conflict(a.describe()));
        }
        self.forbidden.insert(a);
        Ok(())
    }

    pub fn required(&self) -> impl Iterator<Item = &EdgeAssertion> {
        self.required.iter()
    }

    pub fn forbidden(&self) -> impl Iterator<Item = &EdgeAssertion> {
        self.forbidden.iter()
    }

    /// X -* Y ∈ R: some required assertion keeps an edge from x toward y.
    pub fn requires_toward(&self, x: NodeId, y: NodeId) -> bool {
        self.required.contains(&EdgeAssertion::Directed(x, y))
            || self.required.contains(&EdgeAssertion::undirected(x, y))
    }

    /// Y -> X ∈ R.
    pub fn requires_reverse(&self, x: NodeId, y: NodeId) -> bool {
        self.required.contains(&EdgeAssertion::Directed(y, x))
    }

    /// X -> Y ∈ F or X - Y ∈ F.
    pub fn forbids_toward(&self, x: NodeId, y: NodeId) -> bool {
        self.forbidden.contains(&EdgeAssertion::Directed(x, y))
            || self.forbidden.contains(&EdgeAssertion::undirected(x, y))
    }

    pub fn max_node(&self) -> Option<NodeId> {
        self.required
            .iter()
            .chain(self.forbidden.iter())
            .map(EdgeAssertion::max_node)
            .max()
    }

    pub fn validate_for(&self, p: usize) -> Result<(), KnowledgeError> {
        match self.max_node() {
            Some(m) if m as usize >= p => Err(KnowledgeError::OutOfRange { node: m, p }),
            _ => Ok(()),
        }
    }

    /// Parses the line grammar `require|forbid A ->|-- B` with `#` comments.
    pub fn parse(text: &str, names: &[String]) -> Result<Self, KnowledgeError> {
        let mut k = PriorKnowledge::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(KnowledgeError::Malformed { line, text: body.to_string() });
            }
            let resolve = |name: &str| -> Result<NodeId, KnowledgeError> {
                names
                    .iter()
                    .position(|n| n == name)
                    .map(|i| i as NodeId)
                    .ok_or_else(|| KnowledgeError::UnknownName { line, name: name.to_string() })
            };
            let a = resolve(toks[1])?;
            let b = resolve(toks[3])?;
            let assertion = match toks[2] {
                "->" => EdgeAssertion::directed(a, b),
                "--" => EdgeAssertion::undirected(a, b),
                _ => return Err(KnowledgeError::Malformed { line, text: body.to_string() }),
            };
            match toks[0] {
                "require" => k.require(assertion)?,
                "forbid" => k.forbid(assertion)?,
                _ => return Err(KnowledgeError::Malformed { line, text: body.to_string() }),
            }
        }
        Ok(k)
    }

    /// Writes the same grammar back out, deterministically ordered.
    pub fn to_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        let name = |v: NodeId| names[v as usize].as_str();
        for a in &self.required {
            match a {
                EdgeAssertion::Directed(x, y) => {
                    writeln!(out, "require {} -> {}", name(*x), name(*y)).unwrap()
                }
                EdgeAssertion::Undirected(x, y) => {
                    writeln!(out, "require {} -- {}", name(*x), name(*y)).unwrap()
                }
            }
        }
        for a in &self.forbidden {
            match a {
                EdgeAssertion::Directed(x, y) => {
                    writeln!(out, "forbid {} -> {}", name(*x), name(*y)).unwrap()
                }
                EdgeAssertion::Undirected(x, y) => {
                    writeln!(out, "forbid {} -- {}", name(*x), name(*y)).unwrap()
                }
            }
        }
        out
    }
}

impl EdgeAssertion {
    fn is_self_loop(&self) -> bool {
        match *self {
            EdgeAssertion::Directed(x, y) | EdgeAssertion::Undirected(x, y) => x == y,
        }
    }
}

/// Non-adjacent ordered pairs split into the four priority buckets, scanned
/// in order: required, weakly required, ambivalent, forbidden.
#[derive(Clone, Debug, Default)]
pub struct PriorityList {
    pub required: Vec<(NodeId, NodeId)>,
    pub weakly_required: Vec<(NodeId, NodeId)>,
    pub ambivalent: Vec<(NodeId, NodeId)>,
    pub forbidden: Vec<(NodeId, NodeId)>,
}

impl PriorityList {
    pub fn buckets(&self) -> [&[(NodeId, NodeId)]; 4] {
        [&self.required, &self.weakly_required, &self.ambivalent, &self.forbidden]
    }

    pub fn pair_count(&self) -> usize {
        self.required.len()
            + self.weakly_required.len()
            + self.ambivalent.len()
            + self.forbidden.len()
    }
}

/// Classifies every non-adjacent ordered pair of `e` into its bucket. The
/// buckets partition exactly the non-adjacent pairs; forbidden pairs stay in
/// the list (at lowest priority) so wrong assumptions cannot block recovery.
pub fn get_priority_inserts(e: &Pdag, k: &PriorKnowledge) -> PriorityList {
    let p = e.node_count() as NodeId;
    let mut list = PriorityList::default();
    for x in 0..p {
        for y in 0..p {
            if x == y || e.adjacent(x, y) {
                continue;
            }
            if k.requires_toward(x, y) {
                list.required.push((x, y));
            } else if k.requires_reverse(x, y) {
                list.weakly_required.push((x, y));
            } else if k.forbids_toward(x, y) {
                list.forbidden.push((x, y));
            } else {
                list.ambivalent.push((x, y));
            }
        }
    }
    list
}

/// Builds an initial CPDAG containing the required edges, skipping any
/// assertion that conflicts with earlier ones or would make the graph
/// non-extendable. Returns the class and a description of every skip.
pub fn knowledge_init(p: usize, k: &PriorKnowledge) -> (Pdag, Vec<String>) {
    let mut g = Pdag::new(p);
    let mut skipped = Vec::new();
    for a in &k.required {
        let mut trial = g.clone();
        let added = match *a {
            EdgeAssertion::Directed(x, y) => trial.add_directed(x, y),
            EdgeAssertion::Undirected(x, y) => trial.add_undirected(x, y),
        };
        let ok = added.is_ok() && pdag_to_dag(&trial).is_ok();
        if ok {
            g = trial;
        } else {
            let msg = format!("skipping required edge {}", a.describe());
            log::warn!("{msg}");
            skipped.push(msg);
        }
    }
    let dag = pdag_to_dag(&g).expect("incremental construction keeps the graph extendable");
    (cpdag_from_dag(&dag), skipped)
}
