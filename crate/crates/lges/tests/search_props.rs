//! Engine-level properties: termination at the true class under the oracle
//! for every policy, the safe-gate equivalence, knowledge robustness, phase
//! postconditions, and trace replay against recorded deltas.

mod common;

use lges::graph::{cpdag_from_dag, d_separated, is_cpdag, mec_equal, pdag_to_dag};
use lges::ops::{self, Operator, ScoredOp};
use lges::search::strategies::{get_greedy_insert, get_safe_insert, nonadjacent_pairs};
use lges::search::{replay, EdgeAssertion, KnowledgeMode, PhaseKind};
use lges::{
    run_search, BicScore, DecomposableScore, GraphScore, InsertStrategy, NodeId, OracleScore,
    Pdag, PriorKnowledge, SearchConfig, SufficientStats,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Every valid operator with a strictly positive oracle delta.
fn positive_ops(e: &Pdag, score: &dyn DecomposableScore) -> Vec<ScoredOp> {
    let mut out = Vec::new();
    let p = e.node_count() as NodeId;
    for x in 0..p {
        for y in 0..p {
            if x == y {
                continue;
            }
            for op in ops::insert_candidates(e, x, y) {
                let delta = ops::insert_delta(e, score, &op);
                if delta > score.epsilon() {
                    out.push(ScoredOp { op: Operator::Insert(op), delta });
                }
            }
            for op in ops::delete_candidates(e, x, y) {
                let delta = ops::delete_delta(e, score, &op);
                if delta > score.epsilon() {
                    out.push(ScoredOp { op: Operator::Delete(op), delta });
                }
            }
            for op in ops::turn_candidates(e, x, y) {
                if let Some(delta) = ops::evaluate_turn(e, score, &op) {
                    if delta > score.epsilon() {
                        out.push(ScoredOp { op: Operator::Turn(op), delta });
                    }
                }
            }
        }
    }
    out
}

/// An arbitrary score-increasing policy suffices for exact recovery: apply a
/// uniformly random positive operator until none remains.
#[test]
fn randomized_operator_policy_terminates_at_the_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for truth in common::all_dags(4) {
        let want = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth.clone());
        for _ in 0..10 {
            let mut e = Pdag::new(4);
            let mut steps = 0;
            loop {
                assert!(steps < 100, "randomized policy failed to terminate");
                let cands = positive_ops(&e, &score);
                let Some(pick) = cands.get(rng.gen_range(0..cands.len().max(1))) else {
                    break;
                };
                e = ops::apply(&e, &pick.op).unwrap();
                steps += 1;
            }
            assert_eq!(mec_equal(&e, &want), Ok(true), "stalled away from the truth");
        }
    }
}

#[test]
fn engines_recover_every_four_node_class_under_the_oracle() {
    for truth in common::all_dags(4) {
        let want = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth.clone());
        for config in [SearchConfig::ges(4), SearchConfig::lges0(4), SearchConfig::lges(4)] {
            let out = run_search(&config, &score).unwrap();
            assert_eq!(
                mec_equal(&out.cpdag, &want),
                Ok(true),
                "{:?} missed the class of {truth:?}",
                config.algorithm
            );
        }
    }
}

#[test]
fn engines_recover_random_seven_node_classes_under_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..25 {
        let truth = common::random_dag(&mut rng, 7, 0.35);
        let want = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth.clone());
        for config in [SearchConfig::ges(7), SearchConfig::lges0(7), SearchConfig::lges(7)] {
            let out = run_search(&config, &score).unwrap();
            assert_eq!(mec_equal(&out.cpdag, &want), Ok(true), "{:?}", config.algorithm);
        }
    }
}

/// The safe scan finds an insertion exactly when the greedy scan does, at
/// every state an LGES run passes through.
#[test]
fn safe_scan_is_empty_exactly_when_greedy_is_along_lges_runs() {
    for truth in common::all_dags(4) {
        let score = OracleScore::new(truth.clone());
        let out = run_search(&SearchConfig::lges(4), &score).unwrap();
        let mut states = vec![out.trace.initial.clone()];
        for s in &out.trace.steps {
            states.push(ops::apply(states.last().unwrap(), &s.op).unwrap());
        }
        for e in &states {
            let g = pdag_to_dag(e).unwrap();
            let pairs = nonadjacent_pairs(e);
            let safe = get_safe_insert(e, &g, &pairs, &score);
            let greedy = get_greedy_insert(e, &score);
            assert_eq!(
                safe.is_some(),
                greedy.is_some(),
                "safe and greedy scans disagree at {e:?}"
            );
        }
    }
}

/// Prior assumptions reorder the insertion scan but never change the oracle
/// fixed point, no matter how wrong they are.
#[test]
fn arbitrary_knowledge_never_changes_the_oracle_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60u64 {
        let p = 4 + (trial % 3) as usize;
        let truth = common::random_dag(&mut rng, p, 0.5);
        let want = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth.clone());
        let mut k = PriorKnowledge::new();
        for x in 0..p as NodeId {
            for y in 0..p as NodeId {
                if x == y {
                    continue;
                }
                let a = if rng.gen_bool(0.3) {
                    EdgeAssertion::undirected(x, y)
                } else {
                    EdgeAssertion::directed(x, y)
                };
                let roll: f64 = rng.gen();
                if roll < 0.12 {
                    let _ = k.require(a);
                } else if roll < 0.24 {
                    let _ = k.forbid(a);
                }
            }
        }
        let plain = run_search(&SearchConfig::lges(p), &score).unwrap();
        let config = SearchConfig::lges(p).with_knowledge(k, KnowledgeMode::Prioritize);
        let guided = run_search(&config, &score).unwrap();
        assert_eq!(mec_equal(&guided.cpdag, &plain.cpdag), Ok(true));
        assert_eq!(mec_equal(&guided.cpdag, &want), Ok(true));
    }
}

#[test]
fn lges_plus_agrees_with_lges_under_the_oracle() {
    for truth in common::all_dags(4) {
        let score = OracleScore::new(truth.clone());
        let a = run_search(&SearchConfig::lges(4), &score).unwrap();
        let b = run_search(&SearchConfig::lges_plus(4), &score).unwrap();
        assert_eq!(mec_equal(&a.cpdag, &b.cpdag), Ok(true), "escape wrapper drifted");
    }
}

/// After the forward phase of LGES-0 with the safe strategy, every separation
/// claimed by the state holds in the truth. The conservative strategy keeps
/// the weaker guarantee: the state's skeleton covers the true skeleton.
#[test]
fn lges0_forward_phase_postconditions() {
    let mut conservative_misses = 0usize;
    for truth in common::all_dags(4) {
        let want = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth.clone());

        let out = run_search(&SearchConfig::lges0(4), &score).unwrap();
        let fwd = out.trace.phases.iter().find(|r| r.phase == PhaseKind::Forward).unwrap();
        let member = pdag_to_dag(&fwd.state).unwrap();
        for x in 0..4 {
            for y in x + 1..4 {
                for s in common::conditioning_sets(4, x, y) {
                    if d_separated(&member, x, y, &s) {
                        assert!(
                            d_separated(&truth, x, y, &s),
                            "post-forward state claims a separation the truth lacks"
                        );
                    }
                }
            }
        }

        let config = SearchConfig::lges0(4).with_strategy(InsertStrategy::Conservative);
        let cons = run_search(&config, &score).unwrap();
        let fwd = cons.trace.phases.iter().find(|r| r.phase == PhaseKind::Forward).unwrap();
        for (u, v) in common::skeleton(&truth) {
            assert!(
                fwd.state.adjacent(u, v),
                "conservative forward phase lost the true edge {u}-{v}"
            );
        }
        if mec_equal(&cons.cpdag, &want) != Ok(true) {
            conservative_misses += 1;
        }
    }
    // exact recovery for the conservative variant is an open question; the
    // sweep records how often it happens without requiring it
    if conservative_misses > 0 {
        eprintln!("conservative LGES-0 missed {conservative_misses} of 543 four-node classes");
    }
}

#[test]
fn replayed_traces_reproduce_outputs_and_match_totals_under_bic() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (p, n) = (8, 4000);
    let truth = common::random_dag(&mut rng, p, 0.3);
    let rows = sem_rows(&mut rng, &truth, n);
    let score = BicScore::new(SufficientStats::from_rows(n, p, &rows).unwrap());
    let eps = score.epsilon();
    let total = |e: &Pdag| -> f64 {
        match score.graph_score(&pdag_to_dag(e).unwrap()) {
            GraphScore::Bic(t) => t,
            GraphScore::Oracle { .. } => unreachable!(),
        }
    };
    let configs = [
        SearchConfig::ges(p),
        SearchConfig::lges0(p),
        SearchConfig::lges(p),
        SearchConfig::lges(p).with_strategy(InsertStrategy::Conservative),
        SearchConfig::lges_plus(p),
    ];
    for config in configs {
        let out = run_search(&config, &score).unwrap();
        assert!(is_cpdag(&out.cpdag));
        assert!(!out.trace.steps.is_empty());
        let replayed = replay(&out.trace.initial, &out.trace.steps).unwrap();
        assert_eq!(replayed, out.cpdag, "replay must reproduce the terminal class");

        let mut state = out.trace.initial.clone();
        let mut t = total(&state);
        for s in &out.trace.steps {
            state = ops::apply(&state, &s.op).unwrap();
            let t2 = total(&state);
            assert!(
                (t2 - t - s.delta).abs() <= 1e-6 * (1.0 + t.abs()),
                "recorded delta {} vs total change {}",
                s.delta,
                t2 - t
            );
            // forced deletions in escape restarts are the only non-improving steps
            if s.delta > eps {
                assert!(t2 > t);
            }
            t = t2;
        }
        assert!(out.trace.score_evals > 0);
        assert!(out.trace.cache_hits > 0);
    }
}

#[test]
fn hard_forbid_blocks_the_pair_while_soft_forbid_recovers() {
    let truth = Pdag::from_directed_edges(2, &[(0, 1)]).unwrap();
    let want = cpdag_from_dag(&truth);
    let score = OracleScore::new(truth);
    let mut k = PriorKnowledge::new();
    k.forbid(EdgeAssertion::directed(0, 1)).unwrap();
    k.forbid(EdgeAssertion::directed(1, 0)).unwrap();

    let config = SearchConfig::lges(2).with_knowledge(k.clone(), KnowledgeMode::Prioritize);
    let soft = run_search(&config, &score).unwrap();
    assert_eq!(mec_equal(&soft.cpdag, &want), Ok(true), "wrong forbiddance must lose");

    let config = config.with_hard_forbid(true);
    let hard = run_search(&config, &score).unwrap();
    assert_eq!(hard.cpdag.edge_count(), 0, "hard forbid must suppress the pair");
}

#[test]
fn initialization_seeds_the_class_and_search_repairs_it() {
    // the assumed edge 2 -> 0 is wrong; deletion-first removes it
    let truth = Pdag::from_directed_edges(3, &[(0, 1)]).unwrap();
    let want = cpdag_from_dag(&truth);
    let score = OracleScore::new(truth);
    let mut k = PriorKnowledge::new();
    k.require(EdgeAssertion::directed(2, 0)).unwrap();
    let config = SearchConfig::lges(3).with_knowledge(k, KnowledgeMode::Initialize);
    let out = run_search(&config, &score).unwrap();
    assert!(out.trace.initial.adjacent(2, 0), "seeding must include the required edge");
    assert_eq!(mec_equal(&out.cpdag, &want), Ok(true));
    assert_eq!(replay(&out.trace.initial, &out.trace.steps).unwrap(), out.cpdag);
}

#[test]
fn ges_runs_with_knowledge_but_ignores_prioritization() {
    let truth = Pdag::from_directed_edges(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
    let score = OracleScore::new(truth);
    let mut k = PriorKnowledge::new();
    k.require(EdgeAssertion::directed(3, 0)).unwrap();
    k.forbid(EdgeAssertion::undirected(1, 2)).unwrap();
    let plain = run_search(&SearchConfig::ges(4), &score).unwrap();
    let config = SearchConfig::ges(4).with_knowledge(k, KnowledgeMode::Prioritize);
    let guided = run_search(&config, &score).unwrap();
    assert_eq!(plain.cpdag, guided.cpdag);
    assert_eq!(plain.trace.steps, guided.trace.steps);
}

/// At small samples the highest-scoring first insertion varies: modeling the
/// true adjacency usually wins, but the spurious edge into Y sometimes does,
/// and extending the wrong member never does.
#[test]
fn finite_sample_forward_choices_split_between_trajectories() {
    // nodes: 0 = X1, 1 = X2, 2 = Y, 3 = Z; truth X1 -> Z <- X2, Z -> Y
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100;
    let ga = Pdag::from_directed_edges(4, &[(3, 2), (0, 3)]).unwrap();
    let gb = Pdag::from_directed_edges(4, &[(3, 2), (0, 2)]).unwrap();
    let gc = Pdag::from_directed_edges(4, &[(2, 3), (0, 2)]).unwrap();
    let (mut a_wins, mut b_wins, mut c_wins) = (0, 0, 0);
    // one fixed parameterization from the usual ranges; only noise is redrawn
    let (w13, w23, w32) = (0.7, -1.2, 1.0);
    let sd: Vec<f64> = [0.3f64, 0.4, 0.3, 0.3].iter().map(|v| v.sqrt()).collect();
    for _ in 0..200 {
        let mut rows = vec![0.0; n * 4];
        for r in 0..n {
            let draw = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
            let x1 = draw(&mut rng) * sd[0];
            let x2 = draw(&mut rng) * sd[1];
            let z = w13 * x1 + w23 * x2 + draw(&mut rng) * sd[3];
            let y = w32 * z + draw(&mut rng) * sd[2];
            rows[r * 4] = x1;
            rows[r * 4 + 1] = x2;
            rows[r * 4 + 2] = y;
            rows[r * 4 + 3] = z;
        }
        let score = BicScore::new(SufficientStats::from_rows(n, 4, &rows).unwrap());
        let t = |g: &Pdag| -> f64 {
            match score.graph_score(g) {
                GraphScore::Bic(v) => v,
                GraphScore::Oracle { .. } => unreachable!(),
            }
        };
        let (ta, tb, tc) = (t(&ga), t(&gb), t(&gc));
        if ta >= tb && ta >= tc {
            a_wins += 1;
        } else if tb > ta && tb >= tc {
            b_wins += 1;
        } else {
            c_wins += 1;
        }
    }
    eprintln!("forward-choice split: a = {a_wins}, b = {b_wins}, c = {c_wins}");
    assert_eq!(b_wins, 0, "the wrong-member extension must never win");
    assert!(c_wins >= 1, "the alternate trajectory should appear at small n");
    assert!(a_wins > c_wins, "the true adjacency should win most of the time");
}

fn topo_order(d: &Pdag) -> Vec<NodeId> {
    let p = d.node_count();
    let mut placed = vec![false; p];
    let mut order = Vec::with_capacity(p);
    while order.len() < p {
        for v in 0..p as NodeId {
            if !placed[v as usize] && d.parents_of(v).iter().all(|u| placed[u as usize]) {
                placed[v as usize] = true;
                order.push(v);
            }
        }
    }
    order
}

/// Ancestral samples with all weights 0.9; equal signs rule out path
/// cancellation, so the data is faithful to the structure.
fn sem_rows<R: Rng>(rng: &mut R, dag: &Pdag, n: usize) -> Vec<f64> {
    let p = dag.node_count();
    let order = topo_order(dag);
    let mut rows = vec![0.0; n * p];
    for r in 0..n {
        for &v in &order {
            let mut val: f64 = StandardNormal.sample(rng);
            for u in dag.parents_of(v).iter() {
                val += 0.9 * rows[r * p + u as usize];
            }
            rows[r * p + v as usize] = val;
        }
    }
    rows
}
