//! Communication topologies: row-stochastic weighted digraphs, the graph
//! predicates the stability results rely on, and the homogeneous Markov chain
//! that drives topology switching.
//!
//! Graphs are stored densely. An edge `(i, j)` exists iff `a_ij > 0` exactly.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{min_entry, Matrix};

/// Tolerance on row sums, column sums and symmetry of weight matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("weight matrix is empty")]
    Empty,
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("weight a[{i}][{j}] = {value} must be finite and non-negative")]
    InvalidWeight { i: usize, j: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("self-loop weight a[{i}][{i}] must be positive")]
    MissingSelfLoop { i: usize },
    #[error("adjacency is not symmetric at ({i}, {j})")]
    AsymmetricAdjacency { i: usize, j: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("expected {expected} nodes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("expected {expected} graphs, found {found}")]
    WrongGraphCount { expected: usize, found: usize },
    #[error("graph {index} is not strongly connected")]
    NotStronglyConnected { index: usize },
    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),
    #[error("invalid initial distribution: {0}")]
    InvalidInitial(String),
}

/// Row-stochastic weighted adjacency matrix with positive self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    weights: Matrix,
}

impl WeightedDigraph {
    pub fn new(weights: Matrix) -> Result<Self, TopologyError> {
        let (rows, cols) = weights.shape();
        if rows == 0 {
            return Err(TopologyError::Empty);
        }
        if rows != cols {
            return Err(TopologyError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            let mut sum = 0.0;
            for j in 0..cols {
                let value = weights[(i, j)];
                if !value.is_finite() || value < 0.0 {
                    return Err(TopologyError::InvalidWeight { i, j, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(TopologyError::NotStochastic { row: i, sum });
            }
            if weights[(i, i)] <= 0.0 {
                return Err(TopologyError::MissingSelfLoop { i });
            }
        }
        Ok(Self { weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TopologyError> {
        let n = rows.len();
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(TopologyError::NotSquare { rows: n, cols: bad.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(Matrix::from_row_slice(n, n, &flat))
    }

    /// No communication: `A = I`.
    pub fn isolated(n: usize) -> Self {
        Self { weights: Matrix::identity(n, n) }
    }

    /// Complete graph with uniform weights `1/n`.
    pub fn complete(n: usize) -> Self {
        Self { weights: Matrix::from_element(n, n, 1.0 / n as f64) }
    }

    /// Metropolis weights on an undirected edge list: `a_ij = 1/(1 + max(d_i, d_j))`
    /// for neighbours, the remainder on the diagonal. The result is symmetric
    /// and doubly stochastic.
    pub fn metropolis(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let mut adjacent = vec![vec![false; n]; n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(TopologyError::DimensionMismatch { expected: n, found: i.max(j) + 1 });
            }
            if i != j {
                adjacent[i][j] = true;
                adjacent[j][i] = true;
            }
        }
        let degree: Vec<usize> = adjacent.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if adjacent[i][j] {
                    w[(i, j)] = 1.0 / (1 + degree[i].max(degree[j])) as f64;
                }
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        Self::new(w)
    }

    /// Path `0 – 1 – … – n−1` with Metropolis weights.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::metropolis(n, &edges).expect("path weights are valid")
    }

    /// Cycle on `n` nodes with Metropolis weights.
    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::metropolis(n, &edges).expect("cycle weights are valid")
    }

    /// Directed cycle `i → i+1`: `a_ii = self_weight`, `a_{i,i+1} = 1 − self_weight`.
    pub fn directed_cycle(n: usize, self_weight: f64) -> Result<Self, TopologyError> {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            w[(i, i)] += self_weight;
            w[(i, (i + 1) % n)] += 1.0 - self_weight;
        }
        Self::new(w)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights[(i, j)] > 0.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    fn first_asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.weights[(i, j)] - self.weights[(j, i)]).abs() > STOCHASTIC_TOL {
                    return Some((i, j));
                }
            }
        }
        None
    }

    fn require_undirected(&self) -> Result<(), TopologyError> {
        match self.first_asymmetry() {
            Some((i, j)) => Err(TopologyError::AsymmetricAdjacency { i, j }),
            None => Ok(()),
        }
    }

    fn require_symmetric_edges(&self) -> Result<(), TopologyError> {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has_edge(i, j) != self.has_edge(j, i) {
                    return Err(TopologyError::AsymmetricAdjacency { i, j });
                }
            }
        }
        Ok(())
    }

    fn hop_distances(&self, source: usize) -> Vec<Option<usize>> {
        bfs_levels(self.n(), source, |i, j| self.has_edge(i, j))
    }
}

/// Breadth-first hop counts from `source` over the relation `edge(i, j)`.
#[allow(clippy::needless_range_loop)]
fn bfs_levels(n: usize, source: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    level[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = level[u].unwrap() + 1;
        for v in 0..n {
            if v != u && level[v].is_none() && edge(u, v) {
                level[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    level
}

/// `reach[i][j]` iff `j` is reachable from `i` (every node reaches itself).
fn reachability(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<bool>> {
    (0..n)
        .map(|s| bfs_levels(n, s, &edge).into_iter().map(|l| l.is_some()).collect())
        .collect()
}

/// Connectivity of an undirected graph on the edges `{(i, j) : a_ij > 0}`.
pub fn is_connected_undirected(g: &WeightedDigraph) -> Result<bool, TopologyError> {
    g.require_undirected()?;
    Ok(g.hop_distances(0).iter().all(Option::is_some))
}

/// Largest shortest-path hop count between two nodes; self-loops are ignored.
/// Only the edge set has to be symmetric, weights may differ across an edge.
pub fn diameter(g: &WeightedDigraph) -> Result<usize, TopologyError> {
    g.require_symmetric_edges()?;
    let mut d = 0;
    for s in 0..g.n() {
        for level in g.hop_distances(s) {
            d = d.max(level.ok_or(TopologyError::Disconnected)?);
        }
    }
    Ok(d)
}

/// Smallest entry of `A^k`. `k = 0` yields the smallest entry of the identity.
pub fn matrix_power_min_entry(g: &WeightedDigraph, k: usize) -> f64 {
    min_entry(&matrix_power(g.weights(), k))
}

pub fn matrix_power(a: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// In-degree equals out-degree at every node, i.e. `A` is doubly stochastic.
pub fn is_balanced(g: &WeightedDigraph) -> bool {
    g.weights.column_iter().all(|c| (c.sum() - 1.0).abs() <= STOCHASTIC_TOL)
}

pub fn is_strongly_connected(g: &WeightedDigraph) -> bool {
    let n = g.n();
    let forward = g.hop_distances(0);
    let backward = bfs_levels(n, 0, |i, j| g.has_edge(j, i));
    forward.iter().chain(backward.iter()).all(Option::is_some)
}

/// Union of graphs on a shared vertex set: edge union, weights `(1/k) Σ A_j`.
pub fn union_graphs(gs: &[WeightedDigraph]) -> Result<WeightedDigraph, TopologyError> {
    let first = gs.first().ok_or(TopologyError::Empty)?;
    let n = first.n();
    let mut sum = Matrix::zeros(n, n);
    for g in gs {
        if g.n() != n {
            return Err(TopologyError::DimensionMismatch { expected: n, found: g.n() });
        }
        sum += g.weights();
    }
    sum /= gs.len() as f64;
    WeightedDigraph::new(sum)
}

/// Smallest entry of the ordered product `A_1 A_2 ⋯ A_n` of `n` strongly
/// connected graphs with positive diagonals; strictly positive under that
/// precondition.
pub fn product_positivity_check(gs: &[WeightedDigraph]) -> Result<f64, TopologyError> {
    let first = gs.first().ok_or(TopologyError::Empty)?;
    let n = first.n();
    if gs.len() != n {
        return Err(TopologyError::WrongGraphCount { expected: n, found: gs.len() });
    }
    let mut product = Matrix::identity(n, n);
    for (index, g) in gs.iter().enumerate() {
        if g.n() != n {
            return Err(TopologyError::DimensionMismatch { expected: n, found: g.n() });
        }
        if !is_strongly_connected(g) {
            return Err(TopologyError::NotStronglyConnected { index });
        }
        product = &product * g.weights();
    }
    Ok(min_entry(&product))
}

/// A finite set of graphs on one vertex set, switched by a homogeneous Markov chain.
///
/// States are indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTopology {
    graphs: Vec<WeightedDigraph>,
    transition: Matrix,
    initial: Vec<f64>,
}

impl MarkovTopology {
    pub fn new(
        graphs: Vec<WeightedDigraph>,
        transition: Matrix,
        initial: Vec<f64>,
    ) -> Result<Self, TopologyError> {
        let n = graphs.first().ok_or(TopologyError::Empty)?.n();
        if let Some(g) = graphs.iter().find(|g| g.n() != n) {
            return Err(TopologyError::DimensionMismatch { expected: n, found: g.n() });
        }
        let s = graphs.len();
        if transition.shape() != (s, s) {
            return Err(TopologyError::InvalidTransition(format!(
                "expected {s}x{s}, got {}x{}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        for (i, row) in transition.row_iter().enumerate() {
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(TopologyError::InvalidTransition(format!("row {i} has an invalid probability")));
            }
            if (row.sum() - 1.0).abs() > STOCHASTIC_TOL {
                return Err(TopologyError::InvalidTransition(format!("row {i} sums to {}", row.sum())));
            }
        }
        if initial.len() != s {
            return Err(TopologyError::InvalidInitial(format!("expected {s} entries, got {}", initial.len())));
        }
        if initial.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(TopologyError::InvalidInitial("probabilities must be non-negative".into()));
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(TopologyError::InvalidInitial(format!("sums to {total}")));
        }
        Ok(Self { graphs, transition, initial })
    }

    /// Chain that starts in `start` with probability one.
    pub fn starting_at(
        graphs: Vec<WeightedDigraph>,
        transition: Matrix,
        start: usize,
    ) -> Result<Self, TopologyError> {
        let mut initial = vec![0.0; graphs.len()];
        if start >= initial.len() {
            return Err(TopologyError::InvalidInitial(format!("start state {start} out of range")));
        }
        initial[start] = 1.0;
        Self::new(graphs, transition, initial)
    }

    pub fn graphs(&self) -> &[WeightedDigraph] {
        &self.graphs
    }

    pub fn graph(&self, state: usize) -> &WeightedDigraph {
        &self.graphs[state]
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn states(&self) -> usize {
        self.graphs.len()
    }

    pub fn n(&self) -> usize {
        self.graphs[0].n()
    }

    /// Irreducibility and aperiodicity of the chain.
    ///
    /// For a reducible chain the second value is the conjunction of the
    /// aperiodicity of each recurrent (closed) class.
    pub fn irreducible_aperiodic(&self) -> (bool, bool) {
        let s = self.states();
        let edge = |i: usize, j: usize| self.transition[(i, j)] > 0.0;
        let reach = reachability(s, edge);
        let irreducible = reach.iter().all(|r| r.iter().all(|&b| b));

        let mut assigned = vec![false; s];
        let mut aperiodic = true;
        for root in 0..s {
            if assigned[root] {
                continue;
            }
            let class: Vec<usize> = (0..s).filter(|&j| reach[root][j] && reach[j][root]).collect();
            for &c in &class {
                assigned[c] = true;
            }
            let closed = class.iter().all(|&i| (0..s).all(|j| !edge(i, j) || class.contains(&j)));
            if closed && class_period(&class, edge) != 1 {
                aperiodic = false;
            }
        }
        (irreducible, aperiodic)
    }

    /// Sample `r(0), …, r(horizon − 1)` with a generator seeded from `seed`.
    pub fn sample_path(&self, horizon: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_path_with(horizon, &mut rng)
    }

    pub fn sample_path_with<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Vec<usize> {
        let mut path = Vec::with_capacity(horizon);
        if horizon == 0 {
            return path;
        }
        let mut state = sample_categorical(&self.initial, rng);
        path.push(state);
        for _ in 1..horizon {
            let row: Vec<f64> = self.transition.row(state).iter().copied().collect();
            state = sample_categorical(&row, rng);
            path.push(state);
        }
        path
    }

    /// Smallest `l` such that every entry of `P^l` is positive, if any.
    pub fn primitivity_index(&self) -> Option<usize> {
        let s = self.states();
        // Wielandt's bound for primitive matrices.
        let bound = (s - 1) * (s - 1) + 1;
        let mut power = self.transition.clone();
        for l in 1..=bound {
            if power.iter().all(|&p| p > 0.0) {
                return Some(l);
            }
            power = &power * &self.transition;
        }
        None
    }

    pub fn union_graph(&self) -> WeightedDigraph {
        union_graphs(&self.graphs).expect("graphs share the vertex set")
    }
}

fn class_period(class: &[usize], edge: impl Fn(usize, usize) -> bool) -> usize {
    let s = class.iter().copied().max().map_or(0, |m| m + 1);
    let inside = |i: usize, j: usize| class.contains(&i) && class.contains(&j) && edge(i, j);
    let root = class[0];
    let mut level = vec![None; s];
    level[root] = Some(0usize);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for v in 0..s {
            if inside(u, v) && level[v].is_none() {
                level[v] = Some(level[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for &u in class {
        for &v in class {
            if inside(u, v) {
                let (lu, lv) = (level[u].unwrap() as i64, level[v].unwrap() as i64);
                g = gcd(g, (lu + 1 - lv).unsigned_abs() as usize);
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sample_categorical<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}
