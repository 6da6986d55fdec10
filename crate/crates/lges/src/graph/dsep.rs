//! d-separation on DAGs via active-trail reachability.

use super::{NodeId, NodeSet, Pdag};

/// How the trail enters a node: through an arrow pointing at it (head) or an
/// arrow leaving it (tail).
#[derive(Clone, Copy, PartialEq)]
enum Entry {
    Head,
    Tail,
}

/// True when `x` and `y` are d-separated by `z` in the DAG `dag`.
///
/// Requires `x != y` and neither endpoint inside `z`. Linear in the number of
/// edges: walks (node, entry-direction) states of active trails, letting a
/// collider pass only when it is in `z` or has a descendant there.
pub fn d_separated(dag: &Pdag, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
    !d_connected(dag, x, y, z)
}

/// Complement of [`d_separated`].
pub fn d_connected(dag: &Pdag, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
    debug_assert!(!dag.has_undirected_edges(), "d-separation is defined on DAGs");
    assert!(x != y, "d-separation endpoints must differ");
    assert!(!z.contains(x) && !z.contains(y), "conditioning set must exclude endpoints");

    let p = dag.node_count();
    // ancestors-or-self of the conditioning set, for collider openings
    let mut anc_z = vec![false; p];
    let mut stack: Vec<NodeId> = z.iter().collect();
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut anc_z[v as usize], true) {
            continue;
        }
        stack.extend(dag.parents_of(v).iter());
    }

    let mut seen_head = vec![false; p];
    let mut seen_tail = vec![false; p];
    let mut queue: Vec<(NodeId, Entry)> = Vec::new();
    // x is a free starting point: leave through any incident edge
    for c in dag.children_of(x).iter() {
        queue.push((c, Entry::Head));
    }
    for pa in dag.parents_of(x).iter() {
        queue.push((pa, Entry::Tail));
    }

    while let Some((v, how)) = queue.pop() {
        let vs = v as usize;
        let seen = match how {
            Entry::Head => &mut seen_head[vs],
            Entry::Tail => &mut seen_tail[vs],
        };
        if std::mem::replace(seen, true) {
            continue;
        }
        if v == y {
            return true;
        }
        let in_z = z.contains(v);
        match how {
            Entry::Head => {
                // chain u -> v -> c passes a non-collider
                if !in_z {
                    for c in dag.children_of(v).iter() {
                        queue.push((c, Entry::Head));
                    }
                }
                // collider u -> v <- w opens when v is in or above z
                if anc_z[vs] {
                    for w in dag.parents_of(v).iter() {
                        queue.push((w, Entry::Tail));
                    }
                }
            }
            Entry::Tail => {
                if !in_z {
                    for c in dag.children_of(v).iter() {
                        queue.push((c, Entry::Head));
                    }
                    for w in dag.parents_of(v).iter() {
                        queue.push((w, Entry::Tail));
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(p: usize, edges: &[(NodeId, NodeId)]) -> Pdag {
        Pdag::from_directed_edges(p, edges).unwrap()
    }

    #[test]
    fn chain_blocks_on_middle() {
        let g = dag(3, &[(0, 1), (1, 2)]);
        assert!(!d_separated(&g, 0, 2, &NodeSet::new()));
        assert!(d_separated(&g, 0, 2, &NodeSet::singleton(1)));
    }

    #[test]
    fn fork_blocks_on_root() {
        let g = dag(3, &[(1, 0), (1, 2)]);
        assert!(!d_separated(&g, 0, 2, &NodeSet::new()));
        assert!(d_separated(&g, 0, 2, &NodeSet::singleton(1)));
    }

    #[test]
    fn collider_opens_when_conditioned() {
        let g = dag(3, &[(0, 1), (2, 1)]);
        assert!(d_separated(&g, 0, 2, &NodeSet::new()));
        assert!(!d_separated(&g, 0, 2, &NodeSet::singleton(1)));
    }

    #[test]
    fn collider_opens_through_descendant() {
        // 0 -> 1 <- 2, 1 -> 3
        let g = dag(4, &[(0, 1), (2, 1), (1, 3)]);
        assert!(d_separated(&g, 0, 2, &NodeSet::new()));
        assert!(!d_separated(&g, 0, 2, &NodeSet::singleton(3)));
    }

    #[test]
    fn adjacent_nodes_never_separate() {
        let g = dag(3, &[(0, 1), (0, 2), (2, 1)]);
        assert!(!d_separated(&g, 0, 1, &NodeSet::new()));
        assert!(!d_separated(&g, 0, 1, &NodeSet::singleton(2)));
    }
}
