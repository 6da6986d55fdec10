//! Meek's four orientation rules, applied to a fixed point.

use std::collections::VecDeque;

use super::{NodeId, Pdag};

/// Returns a copy of `e` with Meek's rules applied until none fires.
pub fn meek_close(e: &Pdag) -> Pdag {
    let mut g = e.clone();
    meek_close_in_place(&mut g);
    g
}

/// Closes `g` under Meek's rules in place; returns the orientations applied,
/// in application order, as (tail, head) pairs.
///
/// Worklist form: every rule premise reads edges incident to the fired pair
/// or to a shared adjacent, and orientation never changes adjacency, so a new
/// arc t -> h can only enable firings on undirected edges touching t, h, or
/// one of their adjacents. Those are requeued after each orientation.
pub(crate) fn meek_close_in_place(g: &mut Pdag) -> Vec<(NodeId, NodeId)> {
    let p = g.node_count();
    let mut applied = Vec::new();
    let mut queue: VecDeque<(NodeId, NodeId)> = VecDeque::new();
    let mut queued = vec![false; p * p];
    for u in 0..p as NodeId {
        for v in g.neighbors_of(u).iter() {
            if u < v {
                queued[u as usize * p + v as usize] = true;
                queue.push_back((u, v));
            }
        }
    }
    while let Some((a, b)) = queue.pop_front() {
        queued[a as usize * p + b as usize] = false;
        if !g.has_undirected(a, b) {
            continue;
        }
        let (t, h) = if rule_orients(g, a, b) {
            (a, b)
        } else if rule_orients(g, b, a) {
            (b, a)
        } else {
            continue;
        };
        g.orient(t, h).expect("edge checked undirected");
        applied.push((t, h));
        for x in [t, h] {
            for w in g.adjacents_of(x).with(x).iter() {
                for z in g.neighbors_of(w).iter() {
                    let (lo, hi) = (w.min(z), w.max(z));
                    let slot = &mut queued[lo as usize * p + hi as usize];
                    if !*slot {
                        *slot = true;
                        queue.push_back((lo, hi));
                    }
                }
            }
        }
    }
    applied
}

/// True when some Meek rule orients `u -- v` as `u -> v`.
fn rule_orients(g: &Pdag, u: NodeId, v: NodeId) -> bool {
    // R1: a -> u, u -- v, a not adjacent to v
    for a in g.parents_of(u).iter() {
        if !g.adjacent(a, v) {
            return true;
        }
    }
    // R2: u -> w -> v with u -- v
    for w in g.children_of(u).iter() {
        if g.has_directed(w, v) {
            return true;
        }
    }
    // R3: u -- w -> v and u -- z -> v with w, z non-adjacent
    let ne = g.neighbors_of(u).as_slice();
    for (i, &w) in ne.iter().enumerate() {
        if !g.has_directed(w, v) {
            continue;
        }
        for &z in &ne[i + 1..] {
            if g.has_directed(z, v) && !g.adjacent(w, z) {
                return true;
            }
        }
    }
    // R4: u -- w -> z -> v with w non-adjacent to v and u adjacent to z
    for w in g.neighbors_of(u).iter() {
        if g.adjacent(w, v) {
            continue;
        }
        for z in g.children_of(w).iter() {
            if g.has_directed(z, v) && g.adjacent(u, z) {
                return true;
            }
        }
    }
    false
}
