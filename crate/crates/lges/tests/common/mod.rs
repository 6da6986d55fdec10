//! Brute-force oracles shared by integration tests.
//!
//! Everything here is deliberately naive: exhaustive enumeration and simple
//! path scans, independent of the library's reachability and closure code, so
//! the two can check each other.

#![allow(dead_code)]

use lges::graph::{Edge, NodeId, NodeSet, Pdag};
use rand::Rng;

/// Every labeled DAG on `p` nodes, by assigning each unordered pair one of
/// {absent, lo->hi, hi->lo} and keeping the acyclic ones.
pub fn all_dags(p: usize) -> Vec<Pdag> {
    let pairs: Vec<(NodeId, NodeId)> = (0..p as NodeId)
        .flat_map(|u| (u + 1..p as NodeId).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    let mut states = vec![0u8; pairs.len()];
    loop {
        let mut g = Pdag::new(p);
        let mut ok = true;
        for (i, &(u, v)) in pairs.iter().enumerate() {
            let r = match states[i] {
                0 => Ok(()),
                1 => g.add_directed(u, v),
                _ => g.add_directed(v, u),
            };
            if r.is_err() {
                ok = false;
                break;
            }
        }
        if ok && g.topological_order().is_ok() {
            out.push(g);
        }
        // odometer over base-3 states
        let mut i = 0;
        loop {
            if i == states.len() {
                return out;
            }
            states[i] += 1;
            if states[i] < 3 {
                break;
            }
            states[i] = 0;
            i += 1;
        }
    }
}

/// Random DAG: random topological permutation, independent edge coin flips.
pub fn random_dag<R: Rng>(rng: &mut R, p: usize, edge_prob: f64) -> Pdag {
    let mut order: Vec<NodeId> = (0..p as NodeId).collect();
    for i in (1..p).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut g = Pdag::new(p);
    for i in 0..p {
        for j in i + 1..p {
            if rng.gen_bool(edge_prob) {
                g.add_directed(order[i], order[j]).unwrap();
            }
        }
    }
    g
}

/// Unordered skeleton pairs of a graph.
pub fn skeleton(g: &Pdag) -> Vec<(NodeId, NodeId)> {
    let mut out: Vec<(NodeId, NodeId)> = g
        .edges()
        .into_iter()
        .map(|e| match e {
            Edge::Directed(u, v) | Edge::Undirected(u, v) => (u.min(v), u.max(v)),
        })
        .collect();
    out.sort_unstable();
    out
}

/// Unshielded colliders (a, z, b) with a < b, a -> z <- b, a and b non-adjacent.
pub fn v_structures(d: &Pdag) -> Vec<(NodeId, NodeId, NodeId)> {
    let mut out = Vec::new();
    for z in 0..d.node_count() as NodeId {
        let pa = d.parents_of(z);
        let s = pa.as_slice();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                if !d.adjacent(s[i], s[j]) {
                    out.push((s[i], z, s[j]));
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// All DAGs Markov equivalent to `d`: same skeleton, same v-structures
/// (Verma-Pearl), found by trying every orientation of the skeleton.
pub fn brute_mec(d: &Pdag) -> Vec<Pdag> {
    let skel = skeleton(d);
    let target = v_structures(d);
    let mut out = Vec::new();
    for mask in 0u64..1 << skel.len() {
        let mut g = Pdag::new(d.node_count());
        for (i, &(u, v)) in skel.iter().enumerate() {
            if mask >> i & 1 == 0 {
                g.add_directed(u, v).unwrap();
            } else {
                g.add_directed(v, u).unwrap();
            }
        }
        if g.topological_order().is_ok() && v_structures(&g) == target {
            out.push(g);
        }
    }
    out
}

/// Essential graph of `d`'s class by intersecting orientations over the MEC.
pub fn brute_cpdag(d: &Pdag) -> Pdag {
    let members = brute_mec(d);
    let mut out = Pdag::new(d.node_count());
    for (u, v) in skeleton(d) {
        let forward = members.iter().all(|m| m.has_directed(u, v));
        let backward = members.iter().all(|m| m.has_directed(v, u));
        if forward {
            out.add_directed(u, v).unwrap();
        } else if backward {
            out.add_directed(v, u).unwrap();
        } else {
            out.add_undirected(u, v).unwrap();
        }
    }
    out
}

/// d-separation by enumerating every simple skeleton path and checking the
/// blocking definition directly.
pub fn path_enum_d_separated(dag: &Pdag, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
    assert!(x != y && !z.contains(x) && !z.contains(y));
    let p = dag.node_count();
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); p];
    for u in 0..p as NodeId {
        for v in dag.children_of(u).iter() {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
    }
    let mut path = vec![x];
    let mut on_path = vec![false; p];
    on_path[x as usize] = true;
    !has_active_path(dag, &adj, y, z, &mut path, &mut on_path)
}

fn has_active_path(
    dag: &Pdag,
    adj: &[Vec<NodeId>],
    y: NodeId,
    z: &NodeSet,
    path: &mut Vec<NodeId>,
    on_path: &mut Vec<bool>,
) -> bool {
    let last = *path.last().unwrap();
    if last == y {
        return path_is_active(dag, path, z);
    }
    for &w in &adj[last as usize] {
        if on_path[w as usize] {
            continue;
        }
        path.push(w);
        on_path[w as usize] = true;
        let hit = has_active_path(dag, adj, y, z, path, on_path);
        path.pop();
        on_path[w as usize] = false;
        if hit {
            return true;
        }
    }
    false
}

fn path_is_active(dag: &Pdag, path: &[NodeId], z: &NodeSet) -> bool {
    for i in 1..path.len() - 1 {
        let (a, w, b) = (path[i - 1], path[i], path[i + 1]);
        let collider = dag.has_directed(a, w) && dag.has_directed(b, w);
        if collider {
            let opens = z.contains(w) || dag.descendants_of(w).iter().any(|d| z.contains(d));
            if !opens {
                return false;
            }
        } else if z.contains(w) {
            return false;
        }
    }
    true
}

/// Covered edges u -> v of a DAG: Pa(v) = Pa(u) + {u}.
pub fn covered_edges(d: &Pdag) -> Vec<(NodeId, NodeId)> {
    let mut out = Vec::new();
    for e in d.edges() {
        if let Edge::Directed(u, v) = e {
            if *d.parents_of(v) == d.parents_of(u).with(u) {
                out.push((u, v));
            }
        }
    }
    out
}

/// Applies up to `steps` random covered-edge reversals; the result is Markov
/// equivalent to the input by Chickering's transformational characterization.
pub fn random_covered_walk<R: Rng>(rng: &mut R, d: &Pdag, steps: usize) -> Pdag {
    let mut g = d.clone();
    for _ in 0..steps {
        let cov = covered_edges(&g);
        if cov.is_empty() {
            break;
        }
        let (u, v) = cov[rng.gen_range(0..cov.len())];
        g.remove_edge(u, v).unwrap();
        g.add_directed(v, u).unwrap();
        debug_assert!(g.topological_order().is_ok());
    }
    g
}

/// Removes every edge pointing into a member of `targets`.
pub fn mutilate(d: &Pdag, targets: &NodeSet) -> Pdag {
    let mut g = d.clone();
    for t in targets.iter() {
        for u in d.parents_of(t).iter() {
            g.remove_edge(u, t).unwrap();
        }
    }
    g
}

/// Interventional essential graph oracle: keeps the MEC members whose
/// mutilated graphs match the truth's (skeleton and v-structures, per target),
/// then intersects orientations.
pub fn brute_imec_essential(truth: &Pdag, families: &[NodeSet]) -> Pdag {
    let members: Vec<Pdag> = brute_mec(truth)
        .into_iter()
        .filter(|m| {
            families.iter().all(|targets| {
                let mt = mutilate(truth, targets);
                let mm = mutilate(m, targets);
                skeleton(&mt) == skeleton(&mm) && v_structures(&mt) == v_structures(&mm)
            })
        })
        .collect();
    assert!(!members.is_empty(), "truth itself always qualifies");
    let mut out = Pdag::new(truth.node_count());
    for (u, v) in skeleton(truth) {
        let forward = members.iter().all(|m| m.has_directed(u, v));
        let backward = members.iter().all(|m| m.has_directed(v, u));
        if forward {
            out.add_directed(u, v).unwrap();
        } else if backward {
            out.add_directed(v, u).unwrap();
        } else {
            out.add_undirected(u, v).unwrap();
        }
    }
    out
}

/// All subsets of `0..p` excluding `x` and `y`, for conditioning sweeps.
pub fn conditioning_sets(p: usize, x: NodeId, y: NodeId) -> Vec<NodeSet> {
    let rest: Vec<NodeId> = (0..p as NodeId).filter(|&v| v != x && v != y).collect();
    (0u32..1 << rest.len())
        .map(|mask| {
            rest.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}
