//! Operator selection policies. Greedy scans consider every candidate; the
//! safe and conservative scans first gate each pair through a single local
//! score test against a fixed consistent extension of the host class.

use crate::graph::{Edge, NodeId, Pdag};
use crate::ops::{self, cmp_candidates, Operator, ScoredOp};
use crate::parallel;
use crate::score::DecomposableScore;
use std::sync::atomic::{AtomicU64, Ordering};

/// Pairs the strategies skipped without enumerating support sets. `gated` are
/// pairs filtered by the non-descendant score gate, `discarded` are pairs the
/// conservative scan dropped after seeing a score-decreasing candidate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub gated: u64,
    pub discarded: u64,
}

/// Every ordered non-adjacent pair (x, y), ascending.
pub fn nonadjacent_pairs(e: &Pdag) -> Vec<(NodeId, NodeId)> {
    let p = e.node_count() as NodeId;
    let mut out = Vec::new();
    for x in 0..p {
        for y in 0..p {
            if x != y && !e.adjacent(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

fn better(cand: &ScoredOp, best: &Option<ScoredOp>) -> bool {
    best.as_ref().map_or(true, |b| cmp_candidates(cand, b) == std::cmp::Ordering::Less)
}

fn best_insert_for_pair(
    e: &Pdag,
    score: &dyn DecomposableScore,
    x: NodeId,
    y: NodeId,
) -> Option<ScoredOp> {
    let mut best = None;
    for op in ops::insert_candidates(e, x, y) {
        let delta = ops::insert_delta(e, score, &op);
        let cand = ScoredOp { op: Operator::Insert(op), delta };
        if better(&cand, &best) {
            best = Some(cand);
        }
    }
    best
}

pub(crate) fn scan_inserts(
    e: &Pdag,
    score: &dyn DecomposableScore,
    pairs: &[(NodeId, NodeId)],
) -> Option<ScoredOp> {
    parallel::filter_map_best(pairs, |&(x, y)| best_insert_for_pair(e, score, x, y), cmp_candidates)
}

/// Highest-delta valid Insert over all non-adjacent pairs, if any clears the
/// score's threshold.
pub fn get_greedy_insert(e: &Pdag, score: &dyn DecomposableScore) -> Option<ScoredOp> {
    let pairs = nonadjacent_pairs(e);
    scan_inserts(e, score, &pairs).filter(|s| s.delta > score.epsilon())
}

/// Keeps the pairs (x, y) whose x is a non-descendant of y in `g` and whose
/// single-parent addition raises y's local score. One delta evaluation per
/// pair, independent of how many support sets the pair would admit.
fn gate_pairs(
    g: &Pdag,
    score: &dyn DecomposableScore,
    pairs: &[(NodeId, NodeId)],
) -> (Vec<(NodeId, NodeId)>, u64) {
    let p = g.node_count();
    let mut desc: Vec<Option<crate::graph::NodeSet>> = vec![None; p];
    let mut kept = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        let d = desc[y as usize].get_or_insert_with(|| g.descendants_of(y));
        if d.contains(x) {
            continue;
        }
        if score.local_delta(y, g.parents_of(y), x) > score.epsilon() {
            kept.push((x, y));
        }
    }
    let gated = (pairs.len() - kept.len()) as u64;
    (kept, gated)
}

pub(crate) fn safe_insert_with_stats(
    e: &Pdag,
    g: &Pdag,
    candidates: &[(NodeId, NodeId)],
    score: &dyn DecomposableScore,
) -> (Option<ScoredOp>, ScanStats) {
    let (kept, gated) = gate_pairs(g, score, candidates);
    let best = scan_inserts(e, score, &kept).filter(|s| s.delta > score.epsilon());
    (best, ScanStats { gated, discarded: 0 })
}

/// Safe insertion scan: gate each candidate pair against `g`, then evaluate
/// every valid support set for the surviving pairs and return the global
/// maximum if it clears the threshold. `g` must be a consistent extension of
/// `e` and is held fixed for the whole call.
pub fn get_safe_insert(
    e: &Pdag,
    g: &Pdag,
    candidates: &[(NodeId, NodeId)],
    score: &dyn DecomposableScore,
) -> Option<ScoredOp> {
    safe_insert_with_stats(e, g, candidates, score).0
}

pub(crate) fn conservative_insert_with_stats(
    e: &Pdag,
    g: &Pdag,
    candidates: &[(NodeId, NodeId)],
    score: &dyn DecomposableScore,
) -> (Option<ScoredOp>, ScanStats) {
    let (kept, gated) = gate_pairs(g, score, candidates);
    let dropped = AtomicU64::new(0);
    let best = parallel::filter_map_best(
        &kept,
        |&(x, y)| {
            let mut best = None;
            for op in ops::insert_candidates(e, x, y) {
                let delta = ops::insert_delta(e, score, &op);
                if delta < 0.0 {
                    // one decreasing support set disqualifies the whole pair
                    dropped.fetch_add(1, Ordering::Relaxed);
                    return None;
                }
                let cand = ScoredOp { op: Operator::Insert(op), delta };
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
            best
        },
        cmp_candidates,
    )
    .filter(|s| s.delta > score.epsilon());
    (best, ScanStats { gated, discarded: dropped.load(Ordering::Relaxed) })
}

/// Conservative insertion scan: like [`get_safe_insert`], but a pair is
/// discarded outright when any of its support sets scores negative.
pub fn get_conservative_insert(
    e: &Pdag,
    g: &Pdag,
    candidates: &[(NodeId, NodeId)],
    score: &dyn DecomposableScore,
) -> Option<ScoredOp> {
    conservative_insert_with_stats(e, g, candidates, score).0
}

/// Ordered pairs (x, y) holding an edge deletable toward y: x -> y or x - y.
pub(crate) fn delete_pairs(e: &Pdag) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for edge in e.edges() {
        match edge {
            Edge::Directed(u, v) => out.push((u, v)),
            Edge::Undirected(u, v) => {
                out.push((u, v));
                out.push((v, u));
            }
        }
    }
    out
}

/// Highest-delta valid Delete over all edges, if any clears the threshold.
pub fn get_greedy_delete(e: &Pdag, score: &dyn DecomposableScore) -> Option<ScoredOp> {
    let pairs = delete_pairs(e);
    parallel::filter_map_best(
        &pairs,
        |&(x, y)| {
            let mut best = None;
            for op in ops::delete_candidates(e, x, y) {
                let delta = ops::delete_delta(e, score, &op);
                let cand = ScoredOp { op: Operator::Delete(op), delta };
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
            best
        },
        cmp_candidates,
    )
    .filter(|s| s.delta > score.epsilon())
}

/// Ordered pairs (x, y) whose edge a Turn may reverse: y -> x or x - y.
fn turn_pairs(e: &Pdag) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for edge in e.edges() {
        match edge {
            Edge::Directed(u, v) => out.push((v, u)),
            Edge::Undirected(u, v) => {
                out.push((u, v));
                out.push((v, u));
            }
        }
    }
    out
}

/// Highest-delta valid Turn over all reversible edges, if any clears the
/// threshold. The host graph converts to mask form once per scan.
pub fn get_greedy_turn(e: &Pdag, score: &dyn DecomposableScore) -> Option<ScoredOp> {
    let pairs = turn_pairs(e);
    let bits = crate::graph::BitPdag::from_pdag(e);
    parallel::filter_map_best(
        &pairs,
        |&(x, y)| {
            let mut best = None;
            for op in ops::turn_candidates(e, x, y) {
                let delta = match &bits {
                    Some(b) => ops::evaluate_turn_bits(b, score, &op),
                    None => ops::evaluate_turn(e, score, &op),
                };
                let Some(delta) = delta else { continue };
                let cand = ScoredOp { op: Operator::Turn(op), delta };
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
            best
        },
        cmp_candidates,
    )
    .filter(|s| s.delta > score.epsilon())
}
