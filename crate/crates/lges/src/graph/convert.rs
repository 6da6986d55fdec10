//! Conversions between PDAGs, consistent DAG extensions, and CPDAGs.

use super::{GraphError, NodeId, Pdag};

/// Extends `e` to a DAG in its equivalence class (Dor-Tarsi).
///
/// Repeatedly removes a vertex that is a sink of the remaining directed part
/// and whose undirected neighbors are adjacent to every other vertex adjacent
/// to it, orienting its undirected edges inward first. Fails with
/// `NoConsistentExtension` when no such vertex exists while undirected edges
/// remain, and with `DirectedCycle` when the directed part is cyclic.
pub fn pdag_to_dag(e: &Pdag) -> Result<Pdag, GraphError> {
    let p = e.node_count();
    let mut work = e.clone();
    let mut out = e.clone();
    let mut alive: Vec<bool> = vec![true; p];
    let mut und_left = work.undirected_edge_count();

    // Removability of v depends only on edges incident to v and on adjacencies
    // between members of adj(v), so a vertex that failed the test needs
    // re-testing only after one of its adjacents is peeled.
    let mut stack: Vec<NodeId> = (0..p as NodeId).rev().collect();
    let mut on_stack: Vec<bool> = vec![true; p];

    while und_left > 0 {
        let v = loop {
            let Some(v) = stack.pop() else {
                return Err(GraphError::NoConsistentExtension);
            };
            on_stack[v as usize] = false;
            if alive[v as usize] && removable_sink(&work, v) {
                break v;
            }
        };
        und_left -= work.neighbors_of(v).len();
        for w in work.neighbors_of(v).iter().collect::<Vec<_>>() {
            out.ensure_directed(w, v)?;
        }
        let adj = work.adjacents_of(v);
        work.isolate_node(v);
        alive[v as usize] = false;
        for w in adj.iter() {
            if alive[w as usize] && !on_stack[w as usize] {
                on_stack[w as usize] = true;
                stack.push(w);
            }
        }
    }

    // a cyclic directed part can survive the loop when its edges were
    // directed from the start
    out.topological_order()?;
    Ok(out)
}

/// Dor-Tarsi removal test: v is a sink of the directed part and its
/// undirected neighbors are adjacent to every other vertex adjacent to v.
fn removable_sink(work: &Pdag, v: NodeId) -> bool {
    if !work.children_of(v).is_empty() {
        return false;
    }
    let ne = work.neighbors_of(v).as_slice();
    if ne.is_empty() {
        return true;
    }
    let adj = work.adjacents_of(v);
    for &w in ne {
        for a in adj.iter() {
            if a != w && !work.adjacent(w, a) {
                return false;
            }
        }
    }
    true
}

/// CPDAG of the equivalence class of the DAG `d`: skeleton, v-structure
/// orientations, and Meek closure.
pub fn cpdag_from_dag(d: &Pdag) -> Pdag {
    debug_assert!(d.is_dag(), "cpdag_from_dag expects a DAG");
    let p = d.node_count();
    let mut e = Pdag::new(p);
    for u in 0..p as NodeId {
        for v in d.children_of(u).iter() {
            e.add_undirected(u, v).expect("skeleton edge");
        }
    }
    // orient unshielded colliders in their true direction
    for z in 0..p as NodeId {
        let pa = d.parents_of(z);
        let s = pa.as_slice();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                if !d.adjacent(s[i], s[j]) {
                    e.ensure_directed(s[i], z).expect("v-structure edge");
                    e.ensure_directed(s[j], z).expect("v-structure edge");
                }
            }
        }
    }
    super::meek_close_in_place(&mut e);
    e
}

/// True when `e` is a completed PDAG: it equals the CPDAG recomputed from one
/// of its consistent extensions.
pub fn is_cpdag(e: &Pdag) -> bool {
    match pdag_to_dag(e) {
        Ok(d) => cpdag_from_dag(&d) == *e,
        Err(_) => false,
    }
}

/// True when two CPDAGs denote the same Markov equivalence class.
///
/// Errors on graphs of different size or on inputs that are not CPDAGs.
pub fn mec_equal(a: &Pdag, b: &Pdag) -> Result<bool, GraphError> {
    if a.node_count() != b.node_count() {
        return Err(GraphError::SizeMismatch { a: a.node_count(), b: b.node_count() });
    }
    if !is_cpdag(a) || !is_cpdag(b) {
        return Err(GraphError::NotACpdag);
    }
    Ok(a == b)
}
