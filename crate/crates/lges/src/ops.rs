//! The CPDAG-to-CPDAG search operators: Insert, Delete, and a Turn built as a
//! validated Delete+Insert composite.
//!
//! Validity conditions follow Chickering's characterization: an Insert(X,Y,T)
//! is valid when NA ∪ T is a clique and every semi-directed path from Y to X
//! crosses NA ∪ T, where NA = Ne(Y) ∩ Adj(X); a Delete(X,Y,H) is valid when
//! NA ∖ H is a clique. Valid operators score and apply as if a suitable member
//! DAG of the class had one edge added or removed, which the exhaustive tests
//! verify directly.

use crate::graph::{
    cpdag_from_dag, mask_to_nodeset, nodeset_to_mask, pdag_to_dag, BitPdag, GraphError, NodeId,
    NodeSet, Pdag,
};
use crate::score::DecomposableScore;
use std::cmp::Ordering;

/// Insert the edge x -> y and orient t - y as t -> y for every t in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertOp {
    pub x: NodeId,
    pub y: NodeId,
    pub t: NodeSet,
}

/// Remove the edge between x and y (present as x -> y or x - y) and orient
/// x - h as x -> h and y - h as y -> h for every h in `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeleteOp {
    pub x: NodeId,
    pub y: NodeId,
    pub h: NodeSet,
}

/// Reverse an edge present as y -> x or x - y into x -> y. Runs as
/// Delete(y, x, c) followed by Insert(x, y, {}) on the intermediate class.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnOp {
    pub x: NodeId,
    pub y: NodeId,
    pub c: NodeSet,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Insert(InsertOp),
    Delete(DeleteOp),
    Turn(TurnOp),
}

impl Operator {
    pub fn x(&self) -> NodeId {
        match self {
            Operator::Insert(o) => o.x,
            Operator::Delete(o) => o.x,
            Operator::Turn(o) => o.x,
        }
    }

    pub fn y(&self) -> NodeId {
        match self {
            Operator::Insert(o) => o.y,
            Operator::Delete(o) => o.y,
            Operator::Turn(o) => o.y,
        }
    }

    pub fn set(&self) -> &NodeSet {
        match self {
            Operator::Insert(o) => &o.t,
            Operator::Delete(o) => &o.h,
            Operator::Turn(o) => &o.c,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Operator::Insert(_) => 0,
            Operator::Delete(_) => 1,
            Operator::Turn(_) => 2,
        }
    }
}

/// An operator together with its local score delta.
#[derive(Clone, Debug)]
pub struct ScoredOp {
    pub op: Operator,
    pub delta: f64,
}

/// Total order over candidates: larger delta first, ties broken by operator
/// kind, then (x, y), then smaller witness set, then lexicographic witness.
/// `Ordering::Less` means "preferred", so a fold with min_by is deterministic
/// regardless of evaluation order.
pub fn cmp_candidates(a: &ScoredOp, b: &ScoredOp) -> Ordering {
    b.delta
        .partial_cmp(&a.delta)
        .expect("score deltas must be finite")
        .then(a.op.kind_rank().cmp(&b.op.kind_rank()))
        .then(a.op.x().cmp(&b.op.x()))
        .then(a.op.y().cmp(&b.op.y()))
        .then(a.op.set().len().cmp(&b.op.set().len()))
        .then(a.op.set().cmp(b.op.set()))
}

/// NA = Ne(y) ∩ Adj(x), the undirected neighbors of y adjacent to x.
pub fn na_set(e: &Pdag, x: NodeId, y: NodeId) -> NodeSet {
    e.neighbors_of(y).intersection(&e.adjacents_of(x))
}

pub fn insert_valid(e: &Pdag, op: &InsertOp) -> bool {
    let InsertOp { x, y, ref t } = *op;
    if x == y || e.adjacent(x, y) {
        return false;
    }
    let allowed = e.neighbors_of(y).difference(&e.adjacents_of(x));
    if !t.is_subset(&allowed) {
        return false;
    }
    let block = na_set(e, x, y).union(t);
    e.is_clique(&block) && e.semi_directed_blocked(y, x, &block)
}

/// s(y, NA ∪ T ∪ Pa(y) ∪ {x}) - s(y, NA ∪ T ∪ Pa(y)).
pub fn insert_delta(e: &Pdag, score: &dyn DecomposableScore, op: &InsertOp) -> f64 {
    let base = na_set(e, op.x, op.y).union(&op.t).union(e.parents_of(op.y));
    score.local_delta(op.y, &base, op.x)
}

pub fn delete_valid(e: &Pdag, op: &DeleteOp) -> bool {
    let DeleteOp { x, y, ref h } = *op;
    if x == y || !(e.has_directed(x, y) || e.has_undirected(x, y)) {
        return false;
    }
    let na = na_set(e, x, y);
    h.is_subset(&na) && e.is_clique(&na.difference(h))
}

/// s(y, (NA ∖ H) ∪ Pa(y) ∖ {x}) - s(y, (NA ∖ H) ∪ Pa(y) ∪ {x}).
pub fn delete_delta(e: &Pdag, score: &dyn DecomposableScore, op: &DeleteOp) -> f64 {
    let base = na_set(e, op.x, op.y)
        .difference(&op.h)
        .union(e.parents_of(op.y))
        .without(op.x);
    -score.local_delta(op.y, &base, op.x)
}

pub fn turn_valid(e: &Pdag, op: &TurnOp) -> bool {
    turn_intermediate(e, op).is_some()
}

/// Sum of the Delete delta on `e` and the Insert delta on the intermediate
/// class. Panics when the operator is invalid for `e`.
pub fn turn_delta(e: &Pdag, score: &dyn DecomposableScore, op: &TurnOp) -> f64 {
    evaluate_turn(e, score, op).expect("turn operator must be valid for the host CPDAG")
}

/// Validity check and delta in one pass; `None` when either half is invalid.
pub fn evaluate_turn(e: &Pdag, score: &dyn DecomposableScore, op: &TurnOp) -> Option<f64> {
    match BitPdag::from_pdag(e) {
        Some(bits) => evaluate_turn_bits(&bits, score, op),
        None => evaluate_turn_general(e, score, op),
    }
}

fn evaluate_turn_general(e: &Pdag, score: &dyn DecomposableScore, op: &TurnOp) -> Option<f64> {
    let (del, mid, ins) = turn_parts(e, op)?;
    let d = delete_delta(e, score, &del);
    Some(d + insert_delta(&mid, score, &ins))
}

/// Mask-based twin of [`evaluate_turn_general`] taking the host graph in its
/// bit form so scans convert once. The intermediate class is a canonical
/// object, so both paths feed identical sets to the score and return
/// identical deltas.
pub(crate) fn evaluate_turn_bits(
    bits: &BitPdag,
    score: &dyn DecomposableScore,
    op: &TurnOp,
) -> Option<f64> {
    let b = |v: NodeId| 1u64 << v;
    // delete half: Delete(op.y, op.x, C) must be valid for the host
    let (dx, dy) = (op.y, op.x);
    if dx == dy || !(bits.has_directed(dx, dy) || bits.has_undirected(dx, dy)) {
        return None;
    }
    let h = nodeset_to_mask(&op.c);
    let na_del = bits.ne(dy) & bits.adj(dx);
    if h & !na_del != 0 || !bits.is_clique(na_del & !h) {
        return None;
    }
    let mut mid = *bits;
    mid.remove_edge(dx, dy);
    for hh in op.c.iter() {
        if mid.has_undirected(dx, hh) {
            mid.orient(dx, hh);
        }
        if mid.has_undirected(dy, hh) {
            mid.orient(dy, hh);
        }
    }
    if !mid.extend_to_dag() {
        return None;
    }
    mid.recomplete_from_dag();
    // Insert(x, y, ∅) validity on the intermediate: x, y are non-adjacent
    // there by construction, so only the clique and blocking checks remain.
    let na_ins = mid.ne(op.y) & mid.adj(op.x);
    if !mid.is_clique(na_ins) || !mid.semi_directed_blocked(op.y, op.x, na_ins) {
        return None;
    }
    let del_base = mask_to_nodeset(((na_del & !h) | bits.pa(dy)) & !b(dx));
    let ins_base = mask_to_nodeset(na_ins | mid.pa(op.y));
    Some(score.local_delta(op.y, &ins_base, op.x) - score.local_delta(dy, &del_base, dx))
}

fn turn_intermediate(e: &Pdag, op: &TurnOp) -> Option<Pdag> {
    turn_parts(e, op).map(|(_, mid, _)| mid)
}

fn turn_parts(e: &Pdag, op: &TurnOp) -> Option<(DeleteOp, Pdag, InsertOp)> {
    let del = DeleteOp { x: op.y, y: op.x, h: op.c.clone() };
    if !delete_valid(e, &del) {
        return None;
    }
    let mid = apply_delete(e, &del).ok()?;
    let ins = InsertOp { x: op.x, y: op.y, t: NodeSet::new() };
    if !insert_valid(&mid, &ins) {
        return None;
    }
    Some((del, mid, ins))
}

fn recomplete(g: &Pdag) -> Result<Pdag, GraphError> {
    let dag = pdag_to_dag(g)?;
    Ok(cpdag_from_dag(&dag))
}

/// Applies the Insert edit and recompletes. An error here on a validated
/// operator indicates a validity bug and is surfaced, not swallowed.
pub fn apply_insert(e: &Pdag, op: &InsertOp) -> Result<Pdag, GraphError> {
    let mut g = e.clone();
    g.add_directed(op.x, op.y)?;
    for t in op.t.iter() {
        g.orient(t, op.y)?;
    }
    recomplete(&g)
}

pub fn apply_delete(e: &Pdag, op: &DeleteOp) -> Result<Pdag, GraphError> {
    let mut g = e.clone();
    if !(g.has_directed(op.x, op.y) || g.has_undirected(op.x, op.y)) {
        return Err(GraphError::InvalidEdge {
            u: op.x,
            v: op.y,
            reason: "delete requires an edge x -> y or x - y",
        });
    }
    g.remove_edge(op.x, op.y)?;
    for h in op.h.iter() {
        if g.has_undirected(op.x, h) {
            g.orient(op.x, h)?;
        }
        if g.has_undirected(op.y, h) {
            g.orient(op.y, h)?;
        }
    }
    recomplete(&g)
}

pub fn apply_turn(e: &Pdag, op: &TurnOp) -> Result<Pdag, GraphError> {
    let del = DeleteOp { x: op.y, y: op.x, h: op.c.clone() };
    let mid = apply_delete(e, &del)?;
    let ins = InsertOp { x: op.x, y: op.y, t: NodeSet::new() };
    apply_insert(&mid, &ins)
}

pub fn apply(e: &Pdag, op: &Operator) -> Result<Pdag, GraphError> {
    match op {
        Operator::Insert(o) => apply_insert(e, o),
        Operator::Delete(o) => apply_delete(e, o),
        Operator::Turn(o) => apply_turn(e, o),
    }
}

/// All valid Insert(x, y, T) for the pair, T ordered smallest-first then
/// lexicographic so downstream tie-breaking is reproducible.
pub fn insert_candidates(e: &Pdag, x: NodeId, y: NodeId) -> Vec<InsertOp> {
    if x == y || e.adjacent(x, y) {
        return Vec::new();
    }
    let na = na_set(e, x, y);
    if !e.is_clique(&na) {
        return Vec::new();
    }
    let pool: Vec<NodeId> = e.neighbors_of(y).difference(&e.adjacents_of(x)).iter().collect();
    let mut sets = Vec::new();
    let mut cur = NodeSet::new();
    clique_extensions(e, &na, &pool, 0, &mut cur, &mut sets);
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    // blocking is monotone in T, so one check suffices when NA already blocks
    if !e.semi_directed_blocked(y, x, &na) {
        sets.retain(|t| e.semi_directed_blocked(y, x, &na.union(t)));
    }
    sets.into_iter().map(|t| InsertOp { x, y, t }).collect()
}

/// Collects every subset of `pool[start..]` that keeps `na` ∪ subset a clique.
/// Non-clique branches prune the whole subtree.
fn clique_extensions(
    e: &Pdag,
    na: &NodeSet,
    pool: &[NodeId],
    start: usize,
    cur: &mut NodeSet,
    out: &mut Vec<NodeSet>,
) {
    out.push(cur.clone());
    for i in start..pool.len() {
        let c = pool[i];
        if na.iter().chain(cur.iter()).all(|m| e.adjacent(m, c)) {
            cur.insert(c);
            clique_extensions(e, na, pool, i + 1, cur, out);
            cur.remove(c);
        }
    }
}

/// All valid Delete(x, y, H) for the pair, H ordered smallest-first then
/// lexicographic. Valid H are exactly NA ∖ K over clique subsets K of NA.
pub fn delete_candidates(e: &Pdag, x: NodeId, y: NodeId) -> Vec<DeleteOp> {
    if x == y || !(e.has_directed(x, y) || e.has_undirected(x, y)) {
        return Vec::new();
    }
    let na = na_set(e, x, y);
    let pool: Vec<NodeId> = na.iter().collect();
    let mut keeps = Vec::new();
    let mut cur = NodeSet::new();
    clique_extensions(e, &NodeSet::new(), &pool, 0, &mut cur, &mut keeps);
    let mut hs: Vec<NodeSet> = keeps.into_iter().map(|k| na.difference(&k)).collect();
    hs.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    hs.into_iter().map(|h| DeleteOp { x, y, h }).collect()
}

/// Candidate Turn(x, y, c) support sets for reversing y -> x or x - y into
/// x -> y. Each candidate still needs [`evaluate_turn`] to confirm the insert
/// half on the intermediate class.
pub fn turn_candidates(e: &Pdag, x: NodeId, y: NodeId) -> Vec<TurnOp> {
    delete_candidates(e, y, x)
        .into_iter()
        .map(|d| TurnOp { x, y, c: d.h })
        .collect()
}
