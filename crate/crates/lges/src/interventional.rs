//! Refining an observational class with interventional data.
//!
//! Intervening on X severs the influence of X's parents, so an undirected
//! edge X - Y can be oriented by testing whether X and Y stay marginally
//! dependent under a regime that intervenes on X but not Y. [`i_orient`] runs
//! that test for every undirected edge, propagating each orientation with
//! Meek's rules, and records where every arrowhead came from.

use crate::graph::{d_connected, meek_close_in_place, Edge, GraphError, NodeId, NodeSet, Pdag};
use crate::parallel;
use crate::score::{bic_local, SufficientStats};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterventionError {
    #[error("duplicate target set in family")]
    DuplicateTargets,
    #[error("target node {node} out of range for {p} nodes")]
    OutOfRange { node: NodeId, p: usize },
    #[error("entry covers {got} nodes, family covers {expected}")]
    NodeCountMismatch { got: usize, expected: usize },
    #[error("unknown variable name '{name}' in manifest")]
    UnknownName { name: String },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// What one regime can answer about marginal dependence.
#[derive(Clone, Debug)]
pub enum InterventionEvidence {
    /// Sufficient statistics of samples drawn under the regime.
    Stats(SufficientStats),
    /// The true DAG; queries go to its mutilation under the regime's targets.
    Oracle(Pdag),
}

impl InterventionEvidence {
    fn node_count(&self) -> usize {
        match self {
            InterventionEvidence::Stats(s) => s.p(),
            InterventionEvidence::Oracle(t) => t.node_count(),
        }
    }
}

/// A family of interventional regimes over one variable set. The empty
/// target set denotes the observational regime; it never qualifies for an
/// orientation test but belongs to the family by convention.
#[derive(Clone, Debug, Default)]
pub struct InterventionFamily {
    entries: Vec<(NodeSet, InterventionEvidence)>,
}

impl InterventionFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a regime. Target sets must be distinct and in range, and every
    /// entry must cover the same variables.
    pub fn push(
        &mut self,
        targets: NodeSet,
        evidence: InterventionEvidence,
    ) -> Result<(), InterventionError> {
        let p = evidence.node_count();
        if let Some((_, first)) = self.entries.first() {
            let expected = first.node_count();
            if p != expected {
                return Err(InterventionError::NodeCountMismatch { got: p, expected });
            }
        }
        if let Some(node) = targets.iter().find(|&t| t as usize >= p) {
            return Err(InterventionError::OutOfRange { node, p });
        }
        if self.entries.iter().any(|(t, _)| *t == targets) {
            return Err(InterventionError::DuplicateTargets);
        }
        self.entries.push((targets, evidence));
        Ok(())
    }

    /// Family with oracle evidence for each target set, plus the
    /// observational regime when `targets` omits it.
    ///
    /// `truth` must be a DAG; duplicate or out-of-range targets panic.
    pub fn from_oracle(truth: &Pdag, targets: &[NodeSet]) -> Self {
        assert!(truth.is_dag(), "oracle truth must be a DAG");
        let mut family = Self::new();
        if !targets.iter().any(|t| t.is_empty()) {
            family
                .push(NodeSet::new(), InterventionEvidence::Oracle(truth.clone()))
                .expect("first entry cannot conflict");
        }
        for t in targets {
            family
                .push(t.clone(), InterventionEvidence::Oracle(truth.clone()))
                .expect("targets must be distinct and in range");
        }
        family
    }

    pub fn entries(&self) -> &[(NodeSet, InterventionEvidence)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Removes every edge pointing into a member of `targets`.
fn mutilated(g: &Pdag, targets: &NodeSet) -> Pdag {
    let mut out = g.clone();
    for t in targets.iter() {
        for u in g.parents_of(t).iter() {
            out.remove_edge(u, t).expect("edge exists in the source graph");
        }
    }
    out
}

/// Sample-limit sign of s(y, {x}) - s(y, {}) under an intervention on
/// `target`: +1 when `x` and `y` are d-connected given nothing in the
/// mutilated truth, -1 otherwise. Requires `x` in `target` and `y` outside.
pub fn interventional_oracle_delta(truth: &Pdag, target: &NodeSet, x: NodeId, y: NodeId) -> f64 {
    debug_assert!(target.contains(x) && !target.contains(y));
    if d_connected(&mutilated(truth, target), x, y, &NodeSet::new()) {
        1.0
    } else {
        -1.0
    }
}

/// BIC marginal-score difference s(y, {x}) - s(y, {}) on one regime's data.
/// Positive when modeling `y` on `x` pays for the extra parameter.
pub fn interventional_bic_delta(stats: &SufficientStats, x: NodeId, y: NodeId) -> f64 {
    let lambda = (stats.n() as f64).ln() / 2.0;
    bic_local(stats, y, &NodeSet::singleton(x), lambda)
        - bic_local(stats, y, &NodeSet::new(), lambda)
}

/// How a directed edge of the refined graph got its arrowhead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientationSource {
    /// Already directed in the observational input.
    Observational,
    /// Oriented by the summed marginal score test.
    ScoreTest,
    /// Propagated by Meek's rules after a score-test orientation.
    Meek,
}

/// Refined class plus a provenance record keyed by (tail, head). Every
/// directed edge of `cpdag` has an entry; undirected edges have none.
#[derive(Clone, Debug)]
pub struct IMecResult {
    pub cpdag: Pdag,
    pub oriented_by: BTreeMap<(NodeId, NodeId), OrientationSource>,
}

/// Summed delta over regimes intervening on `x` but not `y`; `None` when no
/// regime qualifies.
fn delta_sum(family: &InterventionFamily, x: NodeId, y: NodeId) -> Option<f64> {
    let mut qualified = false;
    let mut sum = 0.0;
    for (targets, evidence) in family.entries() {
        if !targets.contains(x) || targets.contains(y) {
            continue;
        }
        qualified = true;
        sum += match evidence {
            InterventionEvidence::Stats(s) => interventional_bic_delta(s, x, y),
            InterventionEvidence::Oracle(t) => interventional_oracle_delta(t, targets, x, y),
        };
    }
    qualified.then_some(sum)
}

/// Orients undirected edges of `e0` from the family's evidence.
///
/// Ordered pairs (x, y) with x - y undirected are snapshotted up front and
/// their deltas computed in one parallel pass; the orient-and-propagate loop
/// then runs sequentially, skipping pairs an earlier orientation already
/// resolved. A positive sum orients x -> y, a negative one y -> x, and a pair
/// with no qualifying regime or an exactly zero sum stays undirected.
///
/// The output keeps `e0`'s skeleton. When `e0` is the true observational
/// class and the evidence is faithful, the result is the interventional
/// essential graph; on a wrong input it is best effort.
pub fn i_orient(e0: &Pdag, family: &InterventionFamily) -> IMecResult {
    let mut g = e0.clone();
    let mut oriented_by = BTreeMap::new();
    for edge in e0.edges() {
        if let Edge::Directed(u, v) = edge {
            oriented_by.insert((u, v), OrientationSource::Observational);
        }
    }

    let pairs: Vec<(NodeId, NodeId)> = (0..e0.node_count() as NodeId)
        .flat_map(|x| e0.neighbors_of(x).iter().map(move |y| (x, y)).collect::<Vec<_>>())
        .collect();
    let deltas = parallel::map_vec(pairs.clone(), |(x, y)| delta_sum(family, x, y));

    for (&(x, y), delta) in pairs.iter().zip(deltas) {
        if !g.has_undirected(x, y) {
            continue;
        }
        let Some(delta) = delta else { continue };
        let (tail, head) = if delta > 0.0 {
            (x, y)
        } else if delta < 0.0 {
            (y, x)
        } else {
            continue;
        };
        g.orient(tail, head).expect("edge checked undirected");
        oriented_by.insert((tail, head), OrientationSource::ScoreTest);
        for (a, b) in meek_close_in_place(&mut g) {
            oriented_by.insert((a, b), OrientationSource::Meek);
        }
    }
    IMecResult { cpdag: g, oriented_by }
}

/// One regime in a manifest: target variable names and its dataset path.
/// The entry with no targets is the observational dataset.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub targets: Vec<String>,
    pub data: String,
}

#[derive(Deserialize, Serialize)]
struct Manifest {
    entries: Vec<ManifestEntry>,
}

/// Parses `{"entries": [{"targets": [...], "data": "path"}, ...]}`.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, InterventionError> {
    let manifest: Manifest = serde_json::from_str(text)?;
    Ok(manifest.entries)
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let manifest = Manifest { entries: entries.to_vec() };
    serde_json::to_string_pretty(&manifest).expect("manifest entries serialize") + "\n"
}

/// Maps an entry's target names onto node ids against `names`.
pub fn resolve_targets(targets: &[String], names: &[String]) -> Result<NodeSet, InterventionError> {
    let mut out = NodeSet::new();
    for t in targets {
        let id = names
            .iter()
            .position(|n| n == t)
            .ok_or_else(|| InterventionError::UnknownName { name: t.clone() })?;
        out.insert(id as NodeId);
    }
    Ok(out)
}

/// Reconstructs the output of [`i_orient`] from its provenance: apply the
/// observational and score-test orientations to the input's skeleton, then
/// close under Meek's rules once. Used by tests to pin the provenance record.
pub fn replay_orientations(e0: &Pdag, result: &IMecResult) -> Result<Pdag, GraphError> {
    let mut g = e0.clone();
    for (&(tail, head), source) in &result.oriented_by {
        if *source != OrientationSource::Meek && !g.has_directed(tail, head) {
            g.orient(tail, head)?;
        }
    }
    meek_close_in_place(&mut g);
    Ok(g)
}
