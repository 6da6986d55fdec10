//! Synthetic benchmarks: Erdős–Rényi DAGs, linear-Gaussian structural
//! equation models with soft interventions, CPDAG evaluation metrics, dataset
//! CSV round-tripping, and a seed-parallel benchmark sweep.
//!
//! Everything is driven by explicit seeds through a portable generator, so a
//! benchmark row regenerates bit-identically from its (cell, seed) key.

use crate::graph::{cpdag_from_dag, NodeId, NodeSet, Pdag};
use crate::parallel;
use crate::score::{BicScore, DecomposableScore, SufficientStats};
use crate::search::{run_search, Algorithm, InsertStrategy, SearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("node counts differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("model: {0}")]
    BadModel(String),
}

/// Random DAG with `expected_edges` edges in expectation: a seeded random
/// permutation fixes the topological order and each forward pair enters
/// independently with probability `expected_edges / C(p, 2)`, clamped to one
/// with a warning when the request exceeds the complete graph.
pub fn er_dag(p: usize, expected_edges: usize, seed: u64) -> Pdag {
    assert!(p >= 1, "need at least one node");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = p * (p - 1) / 2;
    if pairs == 0 {
        if expected_edges > 0 {
            log::warn!("requested {expected_edges} edges on {p} node(s); returning empty graph");
        }
        return Pdag::new(p);
    }
    let mut prob = expected_edges as f64 / pairs as f64;
    if prob > 1.0 {
        log::warn!("requested {expected_edges} edges but only {pairs} pairs exist; clamping");
        prob = 1.0;
    }
    let mut order: Vec<NodeId> = (0..p as NodeId).collect();
    for i in (1..p).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut g = Pdag::new(p);
    for i in 0..p {
        for j in i + 1..p {
            if rng.gen_bool(prob) {
                g.add_directed(order[i], order[j]).expect("forward pairs respect the order");
            }
        }
    }
    g
}

/// Linear-Gaussian structural equation model over a DAG.
#[derive(Clone, Debug)]
pub struct SemModel {
    dag: Pdag,
    /// row-major p x p; weights[u * p + v] is the coefficient on edge u -> v
    weights: Vec<f64>,
    noise_means: Vec<f64>,
    noise_vars: Vec<f64>,
}

impl SemModel {
    /// Weights must be nonzero exactly on the DAG's edges and the noise
    /// variances strictly positive.
    pub fn new(
        dag: Pdag,
        weights: Vec<f64>,
        noise_means: Vec<f64>,
        noise_vars: Vec<f64>,
    ) -> Result<Self, SynthError> {
        let p = dag.node_count();
        if !dag.is_dag() {
            return Err(SynthError::BadModel("graph must be a DAG".into()));
        }
        if weights.len() != p * p || noise_means.len() != p || noise_vars.len() != p {
            return Err(SynthError::BadModel("parameter shapes do not match the graph".into()));
        }
        for u in 0..p as NodeId {
            for v in 0..p as NodeId {
                let w = weights[u as usize * p + v as usize];
                if dag.has_directed(u, v) != (w != 0.0) {
                    return Err(SynthError::BadModel(format!(
                        "weight support mismatch at ({u}, {v})"
                    )));
                }
            }
        }
        if noise_vars.iter().any(|&v| v <= 0.0) {
            return Err(SynthError::BadModel("noise variances must be positive".into()));
        }
        Ok(SemModel { dag, weights, noise_means, noise_vars })
    }

    pub fn dag(&self) -> &Pdag {
        &self.dag
    }

    pub fn node_count(&self) -> usize {
        self.dag.node_count()
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> f64 {
        self.weights[u as usize * self.node_count() + v as usize]
    }

    pub fn noise_means(&self) -> &[f64] {
        &self.noise_means
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_vars
    }

    /// One-norm condition estimate of I - W^T from total path weights.
    fn condition_estimate(&self) -> f64 {
        let p = self.node_count();
        let b = self.path_weights();
        let norm_a = (0..p)
            .map(|u| 1.0 + (0..p).map(|v| self.weights[u * p + v].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let norm_inv = (0..p)
            .map(|j| (0..p).map(|v| b[v * p + j].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        norm_a * norm_inv
    }

    /// b[v * p + j] = summed weight over all directed paths j to v (1 at j).
    fn path_weights(&self) -> Vec<f64> {
        let p = self.node_count();
        let order = self.dag.topological_order().expect("model graph is a DAG");
        let mut b = vec![0.0; p * p];
        for j in 0..p {
            b[j * p + j] = 1.0;
            for &v in &order {
                for u in self.dag.parents_of(v).iter() {
                    b[v as usize * p + j] +=
                        self.weights[u as usize * p + v as usize] * b[u as usize * p + j];
                }
            }
        }
        b
    }

    /// Divides each node's outgoing weight row by its l1 norm when the
    /// implied linear system is nearly singular (condition estimate above
    /// 2.5e2); a well-conditioned model passes through unchanged.
    ///
    /// Past that estimate, path products amplify ancestral noise enough that
    /// downstream relations turn near-deterministic and likelihood gaps
    /// between distinct structures sink below sampling noise at usable n.
    pub fn stabilized(mut self) -> SemModel {
        if self.condition_estimate() > 2.5e2 {
            let p = self.node_count();
            for u in 0..p {
                let norm: f64 = (0..p).map(|v| self.weights[u * p + v].abs()).sum();
                if norm > 0.0 {
                    for v in 0..p {
                        self.weights[u * p + v] /= norm;
                    }
                }
            }
        }
        self
    }

    /// Closed-form covariance (I - W^T)^-1 D (I - W^T)^-T of the
    /// observational distribution, row-major p x p.
    pub fn covariance(&self) -> Vec<f64> {
        let p = self.node_count();
        let b = self.path_weights();
        let mut sigma = vec![0.0; p * p];
        for a in 0..p {
            for c in 0..p {
                sigma[a * p + c] = (0..p)
                    .map(|j| b[a * p + j] * self.noise_vars[j] * b[c * p + j])
                    .sum();
            }
        }
        sigma
    }
}

/// Draws a model for `dag`: weights uniform on [-2, -0.5] + [0.5, 2], noise
/// means standard normal, noise variances uniform on [0.1, 0.5]. When the
/// implied system is nearly singular (condition estimate above 2.5e2), each
/// node's outgoing weight row is l1 normalized to keep sampling stable.
pub fn sem_from_dag(dag: &Pdag, seed: u64) -> SemModel {
    let p = dag.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; p * p];
    for u in 0..p as NodeId {
        for v in dag.children_of(u).iter() {
            let magnitude = rng.gen_range(0.5..2.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            weights[u as usize * p + v as usize] = sign * magnitude;
        }
    }
    let noise_means: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise_vars: Vec<f64> = (0..p).map(|_| rng.gen_range(0.1..0.5)).collect();
    SemModel { dag: dag.clone(), weights, noise_means, noise_vars }.stabilized()
}

/// Ancestral samples from `model`, row-major n x p. Nodes in `target` ignore
/// their structural equation and draw an independent standard normal.
pub fn sample_sem(model: &SemModel, n: usize, seed: u64, target: Option<&NodeSet>) -> Vec<f64> {
    assert!(n >= 1, "need at least one sample");
    let p = model.node_count();
    let order = model.dag.topological_order().expect("model graph is a DAG");
    let sds: Vec<f64> = model.noise_vars.iter().map(|v| v.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![0.0; n * p];
    for r in 0..n {
        for &v in &order {
            let z: f64 = StandardNormal.sample(&mut rng);
            let vi = v as usize;
            rows[r * p + vi] = if target.is_some_and(|t| t.contains(v)) {
                z
            } else {
                let mut val = model.noise_means[vi] + sds[vi] * z;
                for u in model.dag.parents_of(v).iter() {
                    val += model.weights[u as usize * p + vi] * rows[r * p + u as usize];
                }
                val
            };
        }
    }
    rows
}

/// Structural comparison of two classes over the same nodes.
///
/// `shd` counts unordered pairs that are adjacent in exactly one graph or
/// adjacent in both with different marks. Precision, recall, and f1 use
/// ordered-pair containment: a class contains (x, y) when it has x -> y or
/// x - y. Two empty graphs count as a perfect match.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub shd: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub excess_adj: usize,
    pub missing_adj: usize,
    pub wrong_orient: usize,
}

/// Compares `estimated` against `truth`; see [`Metrics`] for conventions.
pub fn shd(estimated: &Pdag, truth: &Pdag) -> Result<Metrics, SynthError> {
    let p = estimated.node_count();
    if truth.node_count() != p {
        return Err(SynthError::SizeMismatch { left: p, right: truth.node_count() });
    }
    let (mut excess, mut missing, mut wrong) = (0, 0, 0);
    for u in 0..p as NodeId {
        for v in u + 1..p as NodeId {
            match (estimated.adjacent(u, v), truth.adjacent(u, v)) {
                (true, false) => excess += 1,
                (false, true) => missing += 1,
                (true, true) => {
                    let marks = |g: &Pdag| {
                        (g.has_directed(u, v), g.has_directed(v, u), g.has_undirected(u, v))
                    };
                    if marks(estimated) != marks(truth) {
                        wrong += 1;
                    }
                }
                (false, false) => {}
            }
        }
    }

    let contains = |g: &Pdag, x: NodeId, y: NodeId| g.has_directed(x, y) || g.has_undirected(x, y);
    let (mut est_total, mut truth_total, mut tp) = (0usize, 0usize, 0usize);
    for x in 0..p as NodeId {
        for y in 0..p as NodeId {
            if x == y {
                continue;
            }
            let in_est = contains(estimated, x, y);
            let in_truth = contains(truth, x, y);
            est_total += in_est as usize;
            truth_total += in_truth as usize;
            tp += (in_est && in_truth) as usize;
        }
    }
    let (precision, recall) = if est_total == 0 && truth_total == 0 {
        (1.0, 1.0)
    } else {
        (
            if est_total == 0 { 0.0 } else { tp as f64 / est_total as f64 },
            if truth_total == 0 { 0.0 } else { tp as f64 / truth_total as f64 },
        )
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        shd: excess + missing + wrong,
        precision,
        recall,
        f1,
        excess_adj: excess,
        missing_adj: missing,
        wrong_orient: wrong,
    })
}

/// Writes a dataset as CSV: a header row of names, then one numeric row per
/// sample. `rows` is row-major with `names.len()` values per sample.
pub fn write_dataset_csv<W: io::Write>(
    writer: W,
    names: &[String],
    rows: &[f64],
) -> Result<(), SynthError> {
    let p = names.len();
    assert!(p > 0 && rows.len() % p == 0, "rows must be a whole number of samples");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names)?;
    for row in rows.chunks_exact(p) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads the CSV format of [`write_dataset_csv`]; returns the header names
/// and the row-major values.
pub fn read_dataset_csv<R: io::Read>(reader: R) -> Result<(Vec<String>, Vec<f64>), SynthError> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let names: Vec<String> = r
        .headers()
        .map_err(SynthError::Csv)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut values = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(SynthError::BadRow {
                row: i + 2,
                reason: format!("expected {} fields, got {}", names.len(), record.len()),
            });
        }
        for raw in record.iter() {
            let v: f64 = raw.trim().parse().map_err(|_| SynthError::BadRow {
                row: i + 2,
                reason: format!("'{raw}' is not a number"),
            })?;
            values.push(v);
        }
    }
    Ok((names, values))
}

/// Generation parameters recorded next to simulated datasets.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct GenParams {
    pub p: usize,
    pub expected_edges: usize,
    pub n: usize,
    pub seed: u64,
}

/// One benchmark cell: a graph size and density swept over seeds, with every
/// listed algorithm run on the same per-seed dataset.
#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub p: usize,
    /// expected edges = density * p, the ER-k convention
    pub density: f64,
    pub n: usize,
    pub algorithms: Vec<(Algorithm, InsertStrategy)>,
    pub seeds: Vec<u64>,
}

/// One benchmark result row; column order matches the emitted CSV.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchRow {
    pub algorithm: String,
    pub p: usize,
    pub density: f64,
    pub n: usize,
    pub seed: u64,
    pub shd: usize,
    pub f1: f64,
    pub excess: usize,
    pub missing: usize,
    pub wrong: usize,
    pub wall_time_ms: f64,
    pub score_evals: u64,
    pub status: String,
}

/// Canonical row label for an algorithm-strategy pairing.
pub fn algorithm_label(algorithm: Algorithm, strategy: InsertStrategy) -> String {
    let a = match algorithm {
        Algorithm::Ges => "ges",
        Algorithm::Lges0 => "lges0",
        Algorithm::Lges => "lges",
        Algorithm::LgesPlus => "lges+",
    };
    let s = match strategy {
        InsertStrategy::Greedy => "greedy",
        InsertStrategy::Safe => "safe",
        InsertStrategy::Conservative => "conservative",
    };
    format!("{a}-{s}")
}

/// Runs every (cell, seed, algorithm) combination and returns rows in that
/// deterministic order. Seeds fan out across the worker pool; the algorithms
/// within one (cell, seed) run sequentially on a shared dataset, and the wall
/// time covers the search call alone. A failed run produces a row with its
/// error in `status` and zeroed metrics; the sweep continues.
pub fn run_benchmark(specs: &[BenchmarkSpec]) -> Vec<BenchRow> {
    let tasks: Vec<(BenchmarkSpec, u64)> = specs
        .iter()
        .flat_map(|spec| spec.seeds.iter().map(move |&seed| (spec.clone(), seed)))
        .collect();
    parallel::map_vec(tasks, |(spec, seed)| run_cell_seed(&spec, seed))
        .into_iter()
        .flatten()
        .collect()
}

fn run_cell_seed(spec: &BenchmarkSpec, seed: u64) -> Vec<BenchRow> {
    let expected = (spec.density * spec.p as f64).round() as usize;
    let truth = er_dag(spec.p, expected, seed);
    let truth_cpdag = cpdag_from_dag(&truth);
    let model = sem_from_dag(&truth, seed.wrapping_add(1));
    let rows = sample_sem(&model, spec.n, seed.wrapping_add(2), None);
    let stats = SufficientStats::from_rows(spec.n, spec.p, &rows)
        .expect("generated data is finite and long enough");

    spec.algorithms
        .iter()
        .map(|&(algorithm, strategy)| {
            let score = BicScore::new(stats.clone());
            let config = SearchConfig::new(algorithm, spec.p).with_strategy(strategy);
            let started = Instant::now();
            let outcome = run_search(&config, &score);
            let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
            let mut row = BenchRow {
                algorithm: algorithm_label(algorithm, strategy),
                p: spec.p,
                density: spec.density,
                n: spec.n,
                seed,
                shd: 0,
                f1: 0.0,
                excess: 0,
                missing: 0,
                wrong: 0,
                wall_time_ms,
                score_evals: score.eval_count(),
                status: "ok".into(),
            };
            match outcome {
                Ok(out) => {
                    let m = shd(&out.cpdag, &truth_cpdag).expect("node counts match");
                    row.shd = m.shd;
                    row.f1 = m.f1;
                    row.excess = m.excess_adj;
                    row.missing = m.missing_adj;
                    row.wrong = m.wrong_orient;
                }
                Err(e) => row.status = e.to_string(),
            }
            row
        })
        .collect()
}

/// Serializes rows with a header line, ready for external plotting.
pub fn bench_rows_to_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}
