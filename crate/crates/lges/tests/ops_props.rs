//! Operator calculus checked against brute-force equivalence-class scoring on
//! every four-node state.

mod common;

use lges::graph::{cpdag_from_dag, d_separated, mec_equal, pdag_to_dag};
use lges::ops::{
    apply_delete, apply_insert, delete_candidates, delete_delta, insert_candidates, insert_delta,
    na_set, turn_candidates, turn_delta, turn_valid, InsertOp, TurnOp,
};
use lges::score::SufficientStats;
use lges::{BicScore, DecomposableScore, GraphScore, NodeId, NodeSet, OracleScore, Pdag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn unique_cpdags(p: usize) -> Vec<Pdag> {
    let mut out: Vec<Pdag> = Vec::new();
    for d in common::all_dags(p) {
        let e = cpdag_from_dag(&d);
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

fn bic_total(score: &BicScore, dag: &Pdag) -> f64 {
    match score.graph_score(dag) {
        GraphScore::Bic(v) => v,
        GraphScore::Oracle { .. } => unreachable!(),
    }
}

fn fixed_score(n: usize, p: usize, seed: u64) -> BicScore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    BicScore::new(SufficientStats::from_rows(n, p, &rows).unwrap())
}

#[test]
fn four_node_mec_count_is_185() {
    assert_eq!(unique_cpdags(4).len(), 185);
}

/// Every valid Insert must behave as adding x -> y to a member DAG whose
/// parent set at y equals NA ∪ T ∪ Pa(y): the delta formula has to equal the
/// brute-force total-score difference, and the applied class has to equal the
/// CPDAG of the modified member.
#[test]
fn insert_delta_matches_brute_force_dag_difference_exhaustively() {
    let score = fixed_score(60, 4, 17);
    for e in unique_cpdags(4) {
        let members = common::brute_mec(&e);
        for x in 0..4 as NodeId {
            for y in 0..4 as NodeId {
                if x == y || e.adjacent(x, y) {
                    continue;
                }
                for op in insert_candidates(&e, x, y) {
                    let want_pa = na_set(&e, x, y).union(&op.t).union(e.parents_of(y));
                    let delta = insert_delta(&e, &score, &op);
                    let applied = apply_insert(&e, &op).unwrap();
                    let mut found = false;
                    for g in &members {
                        if g.parents_of(y) != &want_pa || g.descendants_of(y).contains(x) {
                            continue;
                        }
                        found = true;
                        let mut g2 = g.clone();
                        g2.add_directed(x, y).unwrap();
                        let diff = bic_total(&score, &g2) - bic_total(&score, g);
                        assert!(
                            (diff - delta).abs() <= 1e-8 * delta.abs().max(1.0),
                            "delta {delta} vs brute {diff} for Insert({x},{y},{:?})",
                            op.t
                        );
                        assert_eq!(mec_equal(&cpdag_from_dag(&g2), &applied), Ok(true));
                    }
                    assert!(found, "no member realizes Insert({x},{y},{:?})", op.t);
                }
            }
        }
    }
}

/// Mirror of the insert check for Delete: the member has parent set
/// (NA ∖ H) ∪ Pa(y) ∪ {x} at y, and removing x -> y from it must reproduce
/// both the delta and the applied class.
#[test]
fn delete_delta_matches_brute_force_dag_difference_exhaustively() {
    let score = fixed_score(60, 4, 18);
    for e in unique_cpdags(4) {
        let members = common::brute_mec(&e);
        for x in 0..4 as NodeId {
            for y in 0..4 as NodeId {
                if !(e.has_directed(x, y) || e.has_undirected(x, y)) {
                    continue;
                }
                for op in delete_candidates(&e, x, y) {
                    let want_pa =
                        na_set(&e, x, y).difference(&op.h).union(e.parents_of(y)).with(x);
                    let delta = delete_delta(&e, &score, &op);
                    let applied = apply_delete(&e, &op).unwrap();
                    let mut found = false;
                    for g in &members {
                        if g.parents_of(y) != &want_pa {
                            continue;
                        }
                        found = true;
                        let mut g2 = g.clone();
                        g2.remove_edge(x, y).unwrap();
                        let diff = bic_total(&score, &g2) - bic_total(&score, g);
                        assert!(
                            (diff - delta).abs() <= 1e-8 * delta.abs().max(1.0),
                            "delta {delta} vs brute {diff} for Delete({x},{y},{:?})",
                            op.h
                        );
                        assert_eq!(mec_equal(&cpdag_from_dag(&g2), &applied), Ok(true));
                    }
                    assert!(found, "no member realizes Delete({x},{y},{:?})", op.h);
                }
            }
        }
    }
}

/// With the truth's own CPDAG as state, every edge is real, so the oracle
/// penalizes its removal for every choice of H.
#[test]
fn deleting_a_true_edge_is_always_negative_under_oracle() {
    for truth in common::all_dags(4) {
        let e = cpdag_from_dag(&truth);
        let oracle = OracleScore::new(truth);
        for x in 0..4 as NodeId {
            for y in 0..4 as NodeId {
                if !(e.has_directed(x, y) || e.has_undirected(x, y)) {
                    continue;
                }
                for op in delete_candidates(&e, x, y) {
                    assert_eq!(delete_delta(&e, &oracle, &op), -1.0);
                }
            }
        }
    }
}

/// A score-decreasing valid Insert(X,Y,T) must be witnessed by some member
/// DAG in which X is a non-descendant of Y and the truth separates X from Y
/// given that member's parent set at Y.
#[test]
fn negative_insert_deltas_witness_member_separation() {
    let states = unique_cpdags(4);
    let member_sets: Vec<Vec<Pdag>> = states.iter().map(common::brute_mec).collect();
    let truths: Vec<Pdag> = states.iter().map(|e| pdag_to_dag(e).unwrap()).collect();

    for truth in &truths {
        let oracle = OracleScore::new(truth.clone());
        for (e, members) in states.iter().zip(&member_sets) {
            for x in 0..4 as NodeId {
                for y in 0..4 as NodeId {
                    if x == y || e.adjacent(x, y) {
                        continue;
                    }
                    for op in insert_candidates(e, x, y) {
                        if insert_delta(e, &oracle, &op) >= 0.0 {
                            continue;
                        }
                        let witnessed = members.iter().any(|g| {
                            !g.descendants_of(y).contains(x)
                                && d_separated(truth, x, y, g.parents_of(y))
                        });
                        assert!(witnessed, "no witness for Insert({x},{y},{:?})", op.t);
                    }
                }
            }
        }
    }
}

/// Every applied Insert can be undone by some valid Delete on the result.
#[test]
fn insert_then_matching_delete_recovers_the_class() {
    for e in unique_cpdags(4) {
        for x in 0..4 as NodeId {
            for y in 0..4 as NodeId {
                if x == y || e.adjacent(x, y) {
                    continue;
                }
                for op in insert_candidates(&e, x, y) {
                    let e2 = apply_insert(&e, &op).unwrap();
                    let recovered = delete_candidates(&e2, x, y)
                        .iter()
                        .chain(delete_candidates(&e2, y, x).iter())
                        .any(|del| {
                            apply_delete(&e2, del)
                                .map(|back| mec_equal(&back, &e) == Ok(true))
                                .unwrap_or(false)
                        });
                    assert!(recovered, "Insert({x},{y},{:?}) has no inverse Delete", op.t);
                }
            }
        }
    }
}

/// The invalid T = {a, b} with a, b non-adjacent has no member realization:
/// no DAG of the class points both neighbors into y.
#[test]
fn invalid_clique_insert_has_no_member_realization() {
    let mut e = Pdag::new(4);
    e.add_undirected(0, 1).unwrap();
    e.add_undirected(1, 2).unwrap();
    let op = InsertOp { x: 3, y: 1, t: NodeSet::from_slice(&[0, 2]) };
    assert!(!lges::ops::insert_valid(&e, &op));
    let claimed = NodeSet::from_slice(&[0, 2]);
    assert!(common::brute_mec(&e).iter().all(|g| !claimed.is_subset(g.parents_of(1))));
}

/// Truth is the chain Z -> X -> Y. The state orients both edges into X via a
/// wrong v-structure; turning X's edge to Y removes it. The state's class is
/// not an I-map of the chain (it claims Y independent of Z), so the reversal
/// gains likelihood of order n, and the composite delta must equal the exact
/// difference of class totals, which are member-invariant.
#[test]
fn turn_fixes_wrong_v_structure_with_positive_bic_delta() {
    let (n, p) = (2000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = vec![0.0; n * p];
    for r in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        rows[r * p] = z + ex; // X
        rows[r * p + 1] = rows[r * p] + ey; // Y
        rows[r * p + 2] = z; // Z
    }
    let score = BicScore::new(SufficientStats::from_rows(n, p, &rows).unwrap());

    let state = Pdag::from_directed_edges(3, &[(1, 0), (2, 0)]).unwrap();
    let op = TurnOp { x: 0, y: 1, c: NodeSet::new() };
    assert!(turn_valid(&state, &op));
    let delta = turn_delta(&state, &score, &op);
    assert!(delta > 0.0, "reversal should gain, got {delta}");

    let result = lges::ops::apply_turn(&state, &op).unwrap();
    assert!(result.has_undirected(0, 1) && result.has_undirected(0, 2));

    // exhaustive class scoring: totals agree across members, delta telescopes
    let totals = |e: &Pdag| -> Vec<f64> {
        common::brute_mec(e).iter().map(|g| bic_total(&score, g)).collect()
    };
    let before = totals(&state);
    let after = totals(&result);
    for w in before.windows(2).chain(after.windows(2)) {
        assert!((w[0] - w[1]).abs() < 1e-7 * w[0].abs());
    }
    let brute = after[0] - before[0];
    assert!(
        (brute - delta).abs() <= 1e-7 * delta.abs(),
        "turn delta {delta} vs class difference {brute}"
    );
}

/// At the truth's own CPDAG the oracle is indifferent to any valid reversal:
/// the delete half loses exactly what the insert half regains.
#[test]
fn turns_at_the_truth_are_oracle_neutral() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..60 {
        let p = 4 + rng.gen_range(0..2);
        let truth = common::random_dag(&mut rng, p, 0.5);
        let e = cpdag_from_dag(&truth);
        let oracle = OracleScore::new(truth);
        let p = e.node_count() as NodeId;
        for x in 0..p {
            for y in 0..p {
                if x == y {
                    continue;
                }
                for op in turn_candidates(&e, x, y) {
                    if turn_valid(&e, &op) {
                        assert_eq!(turn_delta(&e, &oracle, &op), 0.0);
                    }
                }
            }
        }
    }
}
