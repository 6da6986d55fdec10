//! Greedy equivalence search engines over CPDAG states.
//!
//! One generic loop hosts every variant: a phase schedule (forward, turning,
//! backward, run once each; or deletion-first with single interleaved
//! insertions) combined with an insertion strategy (greedy over all pairs, or
//! the safe and conservative gated scans working through priority buckets).
//! Every accepted operator strictly increases the score past the backend's
//! threshold, and a step budget bounds runaway schedules.

pub mod knowledge;
pub mod strategies;
pub mod trace;

pub use knowledge::{
    get_priority_inserts, knowledge_init, EdgeAssertion, KnowledgeError, PriorKnowledge,
    PriorityList,
};
pub use trace::{replay, PhaseKind, PhaseRecord, SearchTrace, SkipEvent, TraceStep};

use crate::graph::{is_cpdag, pdag_to_dag, GraphError, NodeId, Pdag};
use crate::ops::{self, cmp_candidates, Operator, ScoredOp};
use crate::score::{DecomposableScore, GraphScore};
use std::time::Instant;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Ges,
    Lges0,
    Lges,
    LgesPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertStrategy {
    Greedy,
    Safe,
    Conservative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phases {
    ForwardTurningBackward,
    DeletionFirstInterleaved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnowledgeMode {
    None,
    Prioritize,
    Initialize,
}

/// Full description of one search run. Constructors pick the conventional
/// strategy and schedule for each algorithm; fields stay public for variants.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub insert_strategy: InsertStrategy,
    pub phases: Phases,
    /// Starting class. Must be a CPDAG; empty by default.
    pub init: Pdag,
    pub knowledge: PriorKnowledge,
    pub knowledge_mode: KnowledgeMode,
    /// Skip the forbidden bucket outright instead of trying it last. Off by
    /// default: wrong assumptions would become unrecoverable.
    pub hard_forbid: bool,
    /// Recorded for provenance; the built-in policies are deterministic.
    pub seed: u64,
    /// Accepted-operator budget per constituent run, `10 p^2` when unset.
    pub max_steps: Option<usize>,
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, p: usize) -> Self {
        let (insert_strategy, phases) = match algorithm {
            Algorithm::Ges => (InsertStrategy::Greedy, Phases::ForwardTurningBackward),
            Algorithm::Lges0 => (InsertStrategy::Safe, Phases::ForwardTurningBackward),
            Algorithm::Lges | Algorithm::LgesPlus => {
                (InsertStrategy::Safe, Phases::DeletionFirstInterleaved)
            }
        };
        SearchConfig {
            algorithm,
            insert_strategy,
            phases,
            init: Pdag::new(p),
            knowledge: PriorKnowledge::new(),
            knowledge_mode: KnowledgeMode::None,
            hard_forbid: false,
            seed: 0,
            max_steps: None,
        }
    }

    pub fn ges(p: usize) -> Self {
        Self::new(Algorithm::Ges, p)
    }

    pub fn lges0(p: usize) -> Self {
        Self::new(Algorithm::Lges0, p)
    }

    pub fn lges(p: usize) -> Self {
        Self::new(Algorithm::Lges, p)
    }

    pub fn lges_plus(p: usize) -> Self {
        Self::new(Algorithm::LgesPlus, p)
    }

    pub fn with_strategy(mut self, s: InsertStrategy) -> Self {
        self.insert_strategy = s;
        self
    }

    pub fn with_init(mut self, e: Pdag) -> Self {
        self.init = e;
        self
    }

    pub fn with_knowledge(mut self, k: PriorKnowledge, mode: KnowledgeMode) -> Self {
        self.knowledge = k;
        self.knowledge_mode = mode;
        self
    }

    pub fn with_hard_forbid(mut self, on: bool) -> Self {
        self.hard_forbid = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_steps(mut self, steps: usize) -> Self {
        self.max_steps = Some(steps);
        self
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("{algorithm:?} cannot run with the {strategy:?} insertion strategy")]
    InvalidStrategy { algorithm: Algorithm, strategy: InsertStrategy },
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid prior knowledge: {0}")]
    Knowledge(#[from] KnowledgeError),
    #[error("step budget of {budget} accepted operators exhausted")]
    BudgetExhausted { budget: usize, trace: Box<SearchTrace> },
    #[error("operator application failed at step {step}: {source}")]
    Application {
        step: usize,
        #[source]
        source: GraphError,
        trace: Box<SearchTrace>,
    },
}

/// Terminal class plus the full step record of how the run got there.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub cpdag: Pdag,
    pub trace: SearchTrace,
}

fn validate(config: &SearchConfig) -> Result<(), SearchError> {
    let coherent = match config.algorithm {
        Algorithm::Ges => matches!(config.insert_strategy, InsertStrategy::Greedy),
        _ => matches!(config.insert_strategy, InsertStrategy::Safe | InsertStrategy::Conservative),
    };
    if !coherent {
        return Err(SearchError::InvalidStrategy {
            algorithm: config.algorithm,
            strategy: config.insert_strategy,
        });
    }
    if !is_cpdag(&config.init) {
        return Err(SearchError::InvalidConfig("initial graph must be a CPDAG".into()));
    }
    config.knowledge.validate_for(config.init.node_count())?;
    if config.knowledge_mode == KnowledgeMode::Initialize && config.init.edge_count() > 0 {
        return Err(SearchError::InvalidConfig(
            "knowledge initialization conflicts with an explicit initial class".into(),
        ));
    }
    Ok(())
}

fn initial_class(config: &SearchConfig) -> Pdag {
    if config.knowledge_mode == KnowledgeMode::Initialize {
        knowledge_init(config.init.node_count(), &config.knowledge).0
    } else {
        config.init.clone()
    }
}

/// Runs the configured search. This is the generic engine; the named
/// algorithms are configurations of it, via the [`SearchConfig`] constructors.
pub fn run_search(
    config: &SearchConfig,
    score: &dyn DecomposableScore,
) -> Result<SearchOutcome, SearchError> {
    validate(config)?;
    if config.algorithm == Algorithm::LgesPlus {
        return lges_plus(config, score);
    }
    let mut engine = Engine::new(config, score, initial_class(config), None);
    engine.run()?;
    Ok(engine.finish())
}

struct Engine<'a> {
    config: &'a SearchConfig,
    score: &'a dyn DecomposableScore,
    e: Pdag,
    trace: SearchTrace,
    /// Unordered pair whose insertions are off limits (restart runs).
    excluded: Option<(NodeId, NodeId)>,
    budget: usize,
}

impl<'a> Engine<'a> {
    fn new(
        config: &'a SearchConfig,
        score: &'a dyn DecomposableScore,
        init: Pdag,
        excluded: Option<(NodeId, NodeId)>,
    ) -> Self {
        let p = init.node_count();
        let budget = config.max_steps.unwrap_or(10 * p * p);
        let trace = SearchTrace { initial: init.clone(), ..SearchTrace::default() };
        Engine { config, score, e: init, trace, excluded, budget }
    }

    fn run(&mut self) -> Result<(), SearchError> {
        match self.config.phases {
            Phases::ForwardTurningBackward => {
                self.run_phase(PhaseKind::Forward, true, |s| {
                    let mut k = 0;
                    while s.forward_step()? {
                        k += 1;
                    }
                    Ok(k)
                })?;
                self.run_phase(PhaseKind::Turning, true, Self::exhaust_turns)?;
                self.run_phase(PhaseKind::Backward, true, Self::exhaust_deletes)?;
            }
            Phases::DeletionFirstInterleaved => loop {
                let mut moved = 0;
                moved += self.run_phase(PhaseKind::Backward, false, Self::exhaust_deletes)?;
                moved += self.run_phase(PhaseKind::Turning, false, Self::exhaust_turns)?;
                moved += self.run_phase(PhaseKind::Forward, false, |s| {
                    Ok(usize::from(s.forward_step()?))
                })?;
                if moved == 0 {
                    break;
                }
            },
        }
        Ok(())
    }

    fn finish(self) -> SearchOutcome {
        let mut trace = self.trace;
        trace.score_evals = self.score.eval_count();
        if let Some((h, m)) = self.score.cache_stats() {
            trace.cache_hits = h;
            trace.cache_misses = m;
        }
        SearchOutcome { cpdag: self.e, trace }
    }

    fn run_phase<F>(&mut self, kind: PhaseKind, record_empty: bool, f: F) -> Result<usize, SearchError>
    where
        F: FnOnce(&mut Self) -> Result<usize, SearchError>,
    {
        let t0 = Instant::now();
        let steps = f(self)?;
        if steps > 0 || record_empty {
            self.trace.phases.push(PhaseRecord {
                phase: kind,
                steps,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                state: self.e.clone(),
            });
        }
        Ok(steps)
    }

    fn exhaust_deletes(&mut self) -> Result<usize, SearchError> {
        let mut k = 0;
        while let Some(sop) = strategies::get_greedy_delete(&self.e, self.score) {
            self.accept(PhaseKind::Backward, sop)?;
            k += 1;
        }
        Ok(k)
    }

    fn exhaust_turns(&mut self) -> Result<usize, SearchError> {
        let mut k = 0;
        while let Some(sop) = strategies::get_greedy_turn(&self.e, self.score) {
            self.accept(PhaseKind::Turning, sop)?;
            k += 1;
        }
        Ok(k)
    }

    /// Finds and accepts at most one insertion. Returns whether one landed.
    fn forward_step(&mut self) -> Result<bool, SearchError> {
        let found = match self.config.insert_strategy {
            InsertStrategy::Greedy => {
                let pairs = self.without_excluded(strategies::nonadjacent_pairs(&self.e));
                strategies::scan_inserts(&self.e, self.score, &pairs)
                    .filter(|s| s.delta > self.score.epsilon())
            }
            InsertStrategy::Safe | InsertStrategy::Conservative => self.prioritized_insert()?,
        };
        match found {
            Some(sop) => {
                self.accept(PhaseKind::Forward, sop)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Scans the priority buckets in order against a fresh consistent
    /// extension; the first bucket yielding an operator wins, so lower
    /// priority pairs are only reached when every higher bucket came up dry.
    fn prioritized_insert(&mut self) -> Result<Option<ScoredOp>, SearchError> {
        let g = pdag_to_dag(&self.e).map_err(|source| self.application_error(source))?;
        let empty = PriorKnowledge::new();
        let prioritized = self.config.knowledge_mode == KnowledgeMode::Prioritize;
        let k = if prioritized { &self.config.knowledge } else { &empty };
        let list = get_priority_inserts(&self.e, k);
        for (rank, bucket) in list.buckets().into_iter().enumerate() {
            if rank == 3 && prioritized && self.config.hard_forbid {
                continue;
            }
            let pairs = self.without_excluded(bucket.to_vec());
            if pairs.is_empty() {
                continue;
            }
            let (got, stats) = match self.config.insert_strategy {
                InsertStrategy::Safe => {
                    strategies::safe_insert_with_stats(&self.e, &g, &pairs, self.score)
                }
                InsertStrategy::Conservative => {
                    strategies::conservative_insert_with_stats(&self.e, &g, &pairs, self.score)
                }
                InsertStrategy::Greedy => unreachable!("greedy never scans buckets"),
            };
            if stats.gated + stats.discarded > 0 {
                self.trace.skips.push(SkipEvent {
                    step: self.trace.steps.len(),
                    gated: stats.gated,
                    discarded: stats.discarded,
                });
            }
            if got.is_some() {
                return Ok(got);
            }
        }
        Ok(None)
    }

    fn without_excluded(&self, mut pairs: Vec<(NodeId, NodeId)>) -> Vec<(NodeId, NodeId)> {
        if let Some((a, b)) = self.excluded {
            pairs.retain(|&(x, y)| (x.min(y), x.max(y)) != (a, b));
        }
        pairs
    }

    fn accept(&mut self, phase: PhaseKind, sop: ScoredOp) -> Result<(), SearchError> {
        if self.trace.steps.len() >= self.budget {
            return Err(SearchError::BudgetExhausted {
                budget: self.budget,
                trace: Box::new(std::mem::take(&mut self.trace)),
            });
        }
        let step = self.trace.steps.len();
        #[cfg(debug_assertions)]
        let before = self.bic_total(&self.e);
        let next = ops::apply(&self.e, &sop.op).map_err(|source| self.application_error(source))?;
        #[cfg(debug_assertions)]
        self.debug_monotone(before, &next, sop.delta);
        self.trace.steps.push(TraceStep { step, phase, op: sop.op, delta: sop.delta });
        self.e = next;
        Ok(())
    }

    fn application_error(&self, source: GraphError) -> SearchError {
        SearchError::Application {
            step: self.trace.steps.len(),
            source,
            trace: Box::new(self.trace.clone()),
        }
    }

    /// Total BIC of a consistent extension, `None` under non-BIC backends.
    #[cfg(debug_assertions)]
    fn bic_total(&self, e: &Pdag) -> Option<f64> {
        let g = pdag_to_dag(e).ok()?;
        match self.score.graph_score(&g) {
            GraphScore::Bic(t) => Some(t),
            GraphScore::Oracle { .. } => None,
        }
    }

    /// Accepted operators must raise the class total by exactly their delta;
    /// checked against member totals, which are class invariants.
    #[cfg(debug_assertions)]
    fn debug_monotone(&self, before: Option<f64>, next: &Pdag, delta: f64) {
        let (Some(b), Some(a)) = (before, self.bic_total(next)) else {
            return;
        };
        let tol = 1e-7 * (1.0 + b.abs().max(a.abs()));
        debug_assert!(a > b, "accepted operator lowered the total: {b} -> {a}");
        debug_assert!(
            (a - b - delta).abs() <= tol,
            "total change {} disagrees with operator delta {delta}",
            a - b
        );
    }
}

/// Every valid deletion at `e`, scored, in deterministic order. Includes
/// score-decreasing ones: the escape wrapper forces them.
fn all_deletions_scored(e: &Pdag, score: &dyn DecomposableScore) -> Vec<ScoredOp> {
    let mut out = Vec::new();
    for (x, y) in strategies::delete_pairs(e) {
        for op in ops::delete_candidates(e, x, y) {
            let delta = ops::delete_delta(e, score, &op);
            out.push(ScoredOp { op: Operator::Delete(op), delta });
        }
    }
    out
}

fn member_total(
    e: &Pdag,
    score: &dyn DecomposableScore,
    trace: &SearchTrace,
) -> Result<GraphScore, SearchError> {
    let g = pdag_to_dag(e).map_err(|source| SearchError::Application {
        step: trace.steps.len(),
        source,
        trace: Box::new(trace.clone()),
    })?;
    Ok(score.graph_score(&g))
}

/// The escape wrapper: run the base search, then repeatedly force the best
/// candidate deletion and re-run with that pair's insertions excluded,
/// keeping the result only when the class total strictly improves. Rejected
/// restarts are discarded wholesale, so the trace replays to the output.
fn lges_plus(
    config: &SearchConfig,
    score: &dyn DecomposableScore,
) -> Result<SearchOutcome, SearchError> {
    let mut engine = Engine::new(config, score, initial_class(config), None);
    engine.run()?;
    let mut e = engine.e;
    let mut trace = engine.trace;
    let eps = score.epsilon();

    let mut total = member_total(&e, score, &trace)?;
    let mut deletions = all_deletions_scored(&e, score);
    while let Some(idx) = deletions
        .iter()
        .enumerate()
        .min_by(|a, b| cmp_candidates(a.1, b.1))
        .map(|(i, _)| i)
    {
        let forced = deletions[idx].clone();
        let (fx, fy) = (forced.op.x(), forced.op.y());
        let e1 = ops::apply(&e, &forced.op).map_err(|source| SearchError::Application {
            step: trace.steps.len(),
            source,
            trace: Box::new(trace.clone()),
        })?;
        let mut sub = Engine::new(config, score, e1, Some((fx.min(fy), fx.max(fy))));
        sub.run()?;
        let candidate = member_total(&sub.e, score, &trace)?;
        if candidate.improves_over(&total, eps) {
            let base = trace.steps.len();
            trace.steps.push(TraceStep {
                step: base,
                phase: PhaseKind::Backward,
                op: forced.op,
                delta: forced.delta,
            });
            for s in sub.trace.steps {
                trace.steps.push(TraceStep {
                    step: base + 1 + s.step,
                    phase: s.phase,
                    op: s.op,
                    delta: s.delta,
                });
            }
            trace.skips.extend(sub.trace.skips.iter().map(|sk| SkipEvent {
                step: sk.step + base + 1,
                ..*sk
            }));
            trace.phases.extend(sub.trace.phases);
            e = sub.e;
            total = candidate;
            deletions = all_deletions_scored(&e, score);
        } else {
            deletions.remove(idx);
        }
    }

    trace.score_evals = score.eval_count();
    if let Some((h, m)) = score.cache_stats() {
        trace.cache_hits = h;
        trace.cache_misses = m;
    }
    Ok(SearchOutcome { cpdag: e, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cpdag_from_dag, mec_equal};
    use crate::score::OracleScore;

    #[test]
    fn empty_truth_returns_the_empty_class_immediately() {
        let score = OracleScore::new(Pdag::new(4));
        for config in [SearchConfig::ges(4), SearchConfig::lges(4), SearchConfig::lges0(4)] {
            let out = run_search(&config, &score).unwrap();
            assert_eq!(out.cpdag.edge_count(), 0);
            assert!(out.trace.steps.is_empty());
        }
    }

    #[test]
    fn initializing_at_the_truth_is_a_fixed_point() {
        let truth = Pdag::from_directed_edges(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        let init = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth);
        for algorithm in [Algorithm::Ges, Algorithm::Lges0, Algorithm::Lges, Algorithm::LgesPlus] {
            let config = SearchConfig::new(algorithm, 4).with_init(init.clone());
            let out = run_search(&config, &score).unwrap();
            assert_eq!(out.cpdag, init);
            assert!(out.trace.steps.is_empty(), "{algorithm:?} moved off the truth");
        }
    }

    #[test]
    fn recovers_a_collider_from_scratch() {
        let truth = Pdag::from_directed_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let want = cpdag_from_dag(&truth);
        let score = OracleScore::new(truth);
        for algorithm in [Algorithm::Ges, Algorithm::Lges0, Algorithm::Lges, Algorithm::LgesPlus] {
            let out = run_search(&SearchConfig::new(algorithm, 3), &score).unwrap();
            assert_eq!(mec_equal(&out.cpdag, &want), Ok(true), "{algorithm:?} missed");
        }
    }

    #[test]
    fn strategy_and_algorithm_must_cohere() {
        let score = OracleScore::new(Pdag::new(3));
        let bad = SearchConfig::ges(3).with_strategy(InsertStrategy::Safe);
        assert!(matches!(
            run_search(&bad, &score),
            Err(SearchError::InvalidStrategy { algorithm: Algorithm::Ges, .. })
        ));
        let bad = SearchConfig::lges(3).with_strategy(InsertStrategy::Greedy);
        assert!(matches!(run_search(&bad, &score), Err(SearchError::InvalidStrategy { .. })));
    }

    #[test]
    fn initialize_mode_rejects_an_explicit_init() {
        let mut k = PriorKnowledge::new();
        k.require(EdgeAssertion::directed(0, 1)).unwrap();
        let mut init = Pdag::new(3);
        init.add_undirected(1, 2).unwrap();
        let config = SearchConfig::lges(3)
            .with_init(init)
            .with_knowledge(k, KnowledgeMode::Initialize);
        let score = OracleScore::new(Pdag::new(3));
        assert!(matches!(run_search(&config, &score), Err(SearchError::InvalidConfig(_))));
    }

    #[test]
    fn budget_exhaustion_reports_the_partial_trace() {
        let truth = Pdag::from_directed_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let score = OracleScore::new(truth);
        let config = SearchConfig::lges(4).with_max_steps(1);
        let err = run_search(&config, &score).unwrap_err();
        match err {
            SearchError::BudgetExhausted { budget: 1, trace } => {
                assert_eq!(trace.steps.len(), 1);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_knowledge_is_rejected() {
        let mut k = PriorKnowledge::new();
        k.require(EdgeAssertion::directed(0, 9)).unwrap();
        let config = SearchConfig::lges(3).with_knowledge(k, KnowledgeMode::Prioritize);
        let score = OracleScore::new(Pdag::new(3));
        assert!(matches!(run_search(&config, &score), Err(SearchError::Knowledge(_))));
    }
}
