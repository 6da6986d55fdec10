//! Local scores: linear-Gaussian BIC over cached sufficient statistics, and
//! an exact oracle that answers score deltas from d-separation in a known DAG.
//!
//! Search code only ever consumes score *differences* through
//! [`DecomposableScore::local_delta`], so the oracle never has to fabricate
//! absolute local values (none exist for it).

use crate::graph::{d_connected, NodeId, NodeSet, Pdag};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("need at least two rows, got {n}")]
    InsufficientData { n: usize },
    #[error("non-finite value in row {row}, column {col}")]
    NonFiniteData { row: usize, col: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
}

/// Mean vector and centered scatter matrix, accumulated in one stable pass.
#[derive(Clone, Debug)]
pub struct SufficientStats {
    n: usize,
    p: usize,
    means: Vec<f64>,
    /// row-major p x p, scatter[i*p+j] = sum_k (x_ki - mean_i)(x_kj - mean_j)
    scatter: Vec<f64>,
}

impl SufficientStats {
    /// Builds stats from `n` rows of `p` values in row-major order, using the
    /// Welford-style update so means never lose precision to large offsets.
    pub fn from_rows(n: usize, p: usize, values: &[f64]) -> Result<Self, ScoreError> {
        if values.len() != n * p {
            return Err(ScoreError::RaggedRow {
                row: values.len() / p.max(1),
                got: values.len() % p.max(1),
                expected: p,
            });
        }
        if n < 2 {
            return Err(ScoreError::InsufficientData { n });
        }
        let mut means = vec![0.0; p];
        let mut scatter = vec![0.0; p * p];
        let mut delta = vec![0.0; p];
        for (k, row) in values.chunks_exact(p).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ScoreError::NonFiniteData { row: k, col: j });
                }
                delta[j] = v - means[j];
                means[j] += delta[j] / (k + 1) as f64;
            }
            // delta holds x - old_mean; (x - new_mean) = delta * k/(k+1)
            let shrink = k as f64 / (k + 1) as f64;
            for i in 0..p {
                let di = delta[i];
                let row_i = &mut scatter[i * p..(i + 1) * p];
                for j in 0..p {
                    row_i[j] += di * delta[j] * shrink;
                }
            }
        }
        Ok(SufficientStats { n, p, means, scatter })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scatter(&self, i: usize, j: usize) -> f64 {
        self.scatter[i * self.p + j]
    }
}

/// In-place Cholesky factorization; true on success. `a` is k x k row-major.
fn cholesky(a: &mut [f64], k: usize) -> bool {
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= a[i * k + m] * a[j * k + m];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                a[i * k + i] = s.sqrt();
            } else {
                a[i * k + j] = s / a[j * k + j];
            }
        }
    }
    true
}

/// Solves L L^T x = b given the Cholesky factor in `a`'s lower triangle.
fn cholesky_solve(a: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut s = b[i];
        for m in 0..i {
            s -= a[i * k + m] * b[m];
        }
        b[i] = s / a[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for m in i + 1..k {
            s -= a[m * k + i] * b[m];
        }
        b[i] = s / a[i * k + i];
    }
}

/// Residual variance of regressing `y` on `parents`, from scatter alone.
/// Falls back to a ridge jitter of 1e-10 * trace when the normal equations
/// are not positive definite, and to the marginal variance if that fails too.
fn residual_variance(stats: &SufficientStats, y: NodeId, parents: &NodeSet) -> f64 {
    let n = stats.n as f64;
    let yy = stats.scatter(y as usize, y as usize);
    let k = parents.len();
    if k == 0 {
        return floor_variance(yy / n, yy / n);
    }
    let idx: Vec<usize> = parents.iter().map(|v| v as usize).collect();
    let mut a = vec![0.0; k * k];
    for (i, &pi) in idx.iter().enumerate() {
        for (j, &pj) in idx.iter().enumerate() {
            a[i * k + j] = stats.scatter(pi, pj);
        }
    }
    let b: Vec<f64> = idx.iter().map(|&pi| stats.scatter(y as usize, pi)).collect();

    let mut fac = a.clone();
    let mut solved = cholesky(&mut fac, k);
    if !solved {
        let trace: f64 = (0..k).map(|i| a[i * k + i]).sum();
        let jitter = 1e-10 * trace;
        fac.copy_from_slice(&a);
        for i in 0..k {
            fac[i * k + i] += jitter;
        }
        solved = cholesky(&mut fac, k);
    }
    if !solved {
        // degenerate block (for example all-zero columns): regress on nothing
        return floor_variance(yy / n, yy / n);
    }
    let mut beta = b.clone();
    cholesky_solve(&fac, k, &mut beta);
    let explained: f64 = b.iter().zip(&beta).map(|(bi, be)| bi * be).sum();
    floor_variance((yy - explained) / n, yy / n)
}

/// Keeps log() finite: exact collinearity or a zero-variance column would
/// otherwise send the likelihood term to infinity.
fn floor_variance(sigma2: f64, marginal: f64) -> f64 {
    let floor = (1e-15 * marginal).max(f64::MIN_POSITIVE);
    if sigma2.is_finite() {
        sigma2.max(floor)
    } else {
        floor
    }
}

/// Local Gaussian BIC: n/2 * -(1 + ln sigma2_mle) - lambda * (|parents| + 2).
///
/// The parameter count charges the regression coefficients plus intercept and
/// residual variance; lambda = ln(n)/2 is the classic BIC weight. Any
/// consistent normalization works for search, which only compares sums.
pub fn bic_local(stats: &SufficientStats, y: NodeId, parents: &NodeSet, lambda: f64) -> f64 {
    let n = stats.n as f64;
    let sigma2 = residual_variance(stats, y, parents);
    -0.5 * n * (1.0 + sigma2.ln()) - lambda * (parents.len() as f64 + 2.0)
}

/// Memoizes local scores keyed by (child, sorted parent set).
///
/// Reads happen concurrently; writes serialize through the lock. A racing
/// double-computation stores the same value twice, so results stay exact.
#[derive(Debug, Default)]
pub struct ScoreCache {
    map: RwLock<HashMap<(NodeId, NodeSet), f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, y: NodeId, parents: &NodeSet, f: impl FnOnce() -> f64) -> f64 {
        if let Some(&v) = self.map.read().unwrap().get(&(y, parents.clone())) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = f();
        self.map.write().unwrap().insert((y, parents.clone()), v);
        v
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Totals comparable between graphs under one score backend.
///
/// BIC totals are summed local scores of a consistent extension. The oracle
/// orders graphs by local Markov violations against the truth, then by edge
/// count, which realizes score consistency exactly in the sample limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphScore {
    Bic(f64),
    Oracle { violations: u64, edges: u64 },
}

impl GraphScore {
    /// Strict improvement of `self` over `other` at threshold `eps`.
    pub fn improves_over(&self, other: &GraphScore, eps: f64) -> bool {
        match (self, other) {
            (GraphScore::Bic(a), GraphScore::Bic(b)) => a - b > eps,
            (
                GraphScore::Oracle { violations: va, edges: ea },
                GraphScore::Oracle { violations: vb, edges: eb },
            ) => va < vb || (va == vb && ea < eb),
            _ => panic!("comparing totals from different score backends"),
        }
    }
}

/// Score interface the search consumes: deltas of one local term, plus whole
/// graph totals for restart acceptance, an improvement threshold, and an
/// evaluation counter for benchmarks.
pub trait DecomposableScore: Sync {
    /// s(y, base + {x}) - s(y, base); `x` must not be in `base`.
    fn local_delta(&self, y: NodeId, base: &NodeSet, x: NodeId) -> f64;

    /// Total score of a DAG, comparable via [`GraphScore::improves_over`].
    fn graph_score(&self, dag: &Pdag) -> GraphScore;

    /// Threshold for strict score increase.
    fn epsilon(&self) -> f64;

    /// Number of delta evaluations so far (schedule-independent).
    fn eval_count(&self) -> u64;

    /// (hits, misses) when the backend caches local terms, otherwise `None`.
    fn cache_stats(&self) -> Option<(u64, u64)> {
        None
    }
}

/// Linear-Gaussian BIC over sufficient statistics with a persistent cache.
pub struct BicScore {
    stats: SufficientStats,
    lambda: f64,
    cache: ScoreCache,
    evals: AtomicU64,
}

impl BicScore {
    pub fn new(stats: SufficientStats) -> Self {
        let lambda = (stats.n() as f64).ln() / 2.0;
        BicScore { stats, lambda, cache: ScoreCache::new(), evals: AtomicU64::new(0) }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    /// Cached local score s(y, parents).
    pub fn local(&self, y: NodeId, parents: &NodeSet) -> f64 {
        self.cache.get_or_compute(y, parents, || bic_local(&self.stats, y, parents, self.lambda))
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }
}

impl DecomposableScore for BicScore {
    fn local_delta(&self, y: NodeId, base: &NodeSet, x: NodeId) -> f64 {
        debug_assert!(!base.contains(x) && !base.contains(y) && x != y);
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.local(y, &base.with(x)) - self.local(y, base)
    }

    fn graph_score(&self, dag: &Pdag) -> GraphScore {
        let total = (0..dag.node_count() as NodeId)
            .map(|v| self.local(v, dag.parents_of(v)))
            .sum();
        GraphScore::Bic(total)
    }

    fn epsilon(&self) -> f64 {
        1e-9 * self.stats.n() as f64
    }

    fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    fn cache_stats(&self) -> Option<(u64, u64)> {
        Some((self.cache.hits(), self.cache.misses()))
    }
}

/// Exact oracle against a known truth DAG. A delta is +1 when the candidate
/// parent adds a real dependence (x and y d-connected given the base set in
/// the truth) and -1 otherwise, the sample-limit sign of any consistent score.
pub struct OracleScore {
    truth: Pdag,
    evals: AtomicU64,
}

impl OracleScore {
    /// `truth` must be a DAG.
    pub fn new(truth: Pdag) -> Self {
        assert!(truth.is_dag(), "oracle truth must be a DAG");
        OracleScore { truth, evals: AtomicU64::new(0) }
    }

    pub fn truth(&self) -> &Pdag {
        &self.truth
    }
}

impl DecomposableScore for OracleScore {
    fn local_delta(&self, y: NodeId, base: &NodeSet, x: NodeId) -> f64 {
        debug_assert!(!base.contains(x) && !base.contains(y) && x != y);
        self.evals.fetch_add(1, Ordering::Relaxed);
        if d_connected(&self.truth, x, y, base) {
            1.0
        } else {
            -1.0
        }
    }

    fn graph_score(&self, dag: &Pdag) -> GraphScore {
        let p = dag.node_count();
        let mut violations = 0u64;
        for v in 0..p as NodeId {
            let pa = dag.parents_of(v);
            let desc = dag.descendants_of(v);
            for u in 0..p as NodeId {
                if u == v || desc.contains(u) || pa.contains(u) {
                    continue;
                }
                // local Markov demands v independent of u given Pa(v)
                if d_connected(&self.truth, u, v, pa) {
                    violations += 1;
                }
            }
        }
        GraphScore::Oracle { violations, edges: dag.directed_edge_count() as u64 }
    }

    fn epsilon(&self) -> f64 {
        0.0
    }

    fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}
