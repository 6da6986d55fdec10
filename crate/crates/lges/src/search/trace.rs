//! Step-by-step record of a search run: every accepted operator with its
//! delta, per-phase wall times and state snapshots, gate skip counts, and the
//! score backend's evaluation and cache counters.

use crate::graph::{GraphError, NodeId, NodeSet, Pdag};
use crate::ops::{self, DeleteOp, InsertOp, Operator, TurnOp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Phase label attached to trace entries. Interleaved schedules reuse the
/// same labels: insertion segments are Forward, deletion segments Backward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseKind {
    Forward,
    Turning,
    Backward,
}

impl PhaseKind {
    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::Forward => "forward",
            PhaseKind::Turning => "turning",
            PhaseKind::Backward => "backward",
        }
    }
}

/// One accepted operator. `step` indexes the state the operator produced, so
/// replaying steps 0..k from the initial class yields state k+1.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub phase: PhaseKind,
    pub op: Operator,
    pub delta: f64,
}

/// Pairs a strategy skipped without enumerating support sets, recorded per
/// insertion scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkipEvent {
    pub step: usize,
    pub gated: u64,
    pub discarded: u64,
}

/// One contiguous run of same-phase work, with the class it ended on.
#[derive(Clone, Debug)]
pub struct PhaseRecord {
    pub phase: PhaseKind,
    pub steps: usize,
    pub wall_ms: f64,
    pub state: Pdag,
}

#[derive(Clone, Debug)]
pub struct SearchTrace {
    /// Class the run actually started from, after any knowledge seeding.
    pub initial: Pdag,
    pub steps: Vec<TraceStep>,
    pub skips: Vec<SkipEvent>,
    pub phases: Vec<PhaseRecord>,
    pub score_evals: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

impl Default for SearchTrace {
    fn default() -> Self {
        SearchTrace {
            initial: Pdag::new(0),
            steps: Vec::new(),
            skips: Vec::new(),
            phases: Vec::new(),
            score_evals: 0,
            cache_hits: 0,
            cache_misses: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unknown op kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
}

#[derive(Serialize, Deserialize)]
struct StepRecord {
    step: usize,
    phase: String,
    op: String,
    x: NodeId,
    y: NodeId,
    set: Vec<NodeId>,
    delta: f64,
}

fn op_kind(op: &Operator) -> &'static str {
    match op {
        Operator::Insert(_) => "insert",
        Operator::Delete(_) => "delete",
        Operator::Turn(_) => "turn",
    }
}

impl SearchTrace {
    /// One JSON object per accepted step, newline delimited.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let rec = StepRecord {
                step: s.step,
                phase: s.phase.name().to_string(),
                op: op_kind(&s.op).to_string(),
                x: s.op.x(),
                y: s.op.y(),
                set: s.op.set().iter().collect(),
                delta: s.delta,
            };
            out.push_str(&serde_json::to_string(&rec).expect("trace records are plain data"));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`SearchTrace::to_jsonl`], recovering the operator list.
    pub fn parse_jsonl(text: &str) -> Result<Vec<(Operator, f64)>, TraceError> {
        let mut out = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: StepRecord =
                serde_json::from_str(raw).map_err(|source| TraceError::Json { line, source })?;
            let set = NodeSet::from_slice(&rec.set);
            let op = match rec.op.as_str() {
                "insert" => Operator::Insert(InsertOp { x: rec.x, y: rec.y, t: set }),
                "delete" => Operator::Delete(DeleteOp { x: rec.x, y: rec.y, h: set }),
                "turn" => Operator::Turn(TurnOp { x: rec.x, y: rec.y, c: set }),
                other => {
                    return Err(TraceError::UnknownKind { line, kind: other.to_string() })
                }
            };
            out.push((op, rec.delta));
        }
        Ok(out)
    }
}

/// Applies the logged operators to `init` in order. The result must equal the
/// final class of the run that produced the steps.
pub fn replay<'a, I>(init: &Pdag, steps: I) -> Result<Pdag, GraphError>
where
    I: IntoIterator<Item = &'a TraceStep>,
{
    let mut e = init.clone();
    for s in steps {
        e = ops::apply(&e, &s.op)?;
    }
    Ok(e)
}
