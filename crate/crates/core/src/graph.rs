//! Directed weighted communication graphs and the matrices derived from them.
//!
//! An edge `(i, j, a_ij)` means node `i` observes node `j`. Node indices are
//! zero-based in the library; configuration files use one-based indices and
//! are converted on load.
//!
//! The Laplacian follows the sign convention in which `x' = L x` is the
//! consensus flow: `L_ii = -d_i`, `L_ij = a_ij`. [`LaplacianMatrix::standard`]
//! gives the usual positive semidefinite form `-L` used for coherence.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub observer: usize,
    pub observed: usize,
    pub weight: T,
}

/// Immutable directed weighted graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology<T> {
    node_count: usize,
    // sorted by (observer, observed)
    edges: Vec<Edge<T>>,
    // offsets[i]..offsets[i + 1] indexes the out-edges of node i
    offsets: Vec<usize>,
}

impl<T: Scalar> NetworkTopology<T> {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidTopology("graph needs at least one node".into()));
        }
        let mut list: Vec<Edge<T>> = Vec::new();
        for (i, j, w) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidTopology(format!(
                    "edge ({}, {}) references a node outside 1..={node_count}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidTopology(format!("self-loop at node {}", i + 1)));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::InvalidTopology(format!(
                    "edge ({}, {}) has non-positive weight {w}",
                    i + 1,
                    j + 1
                )));
            }
            list.push(Edge {
                observer: i,
                observed: j,
                weight: w,
            });
        }
        list.sort_by_key(|e| (e.observer, e.observed));
        if let Some(dup) = list
            .windows(2)
            .find(|p| p[0].observer == p[1].observer && p[0].observed == p[1].observed)
        {
            return Err(Error::InvalidTopology(format!(
                "duplicate edge ({}, {})",
                dup[0].observer + 1,
                dup[0].observed + 1
            )));
        }
        let mut offsets = vec![0usize; node_count + 1];
        for e in &list {
            offsets[e.observer + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            node_count,
            edges: list,
            offsets,
        })
    }

    /// Builds a graph from one-based `(i, j, a_ij)` triples.
    pub fn from_one_based(node_count: usize, edges: &[(usize, usize, T)]) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            if i == 0 || j == 0 {
                return Err(Error::InvalidTopology(format!(
                    "edge ({i}, {j}) uses index 0; node indices start at 1"
                )));
            }
            zero_based.push((i - 1, j - 1, w));
        }
        Self::new(node_count, zero_based)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Out-edges of node `i`, i.e. the neighborhood `N_i` with weights.
    pub fn neighbors(&self, i: usize) -> &[Edge<T>] {
        &self.edges[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Index range of node `i`'s edges within [`Self::edges`].
    pub fn edge_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn neighbor_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Weighted out-degree `d_i = sum_j a_ij`.
    pub fn degree(&self, i: usize) -> T {
        self.neighbors(i).iter().fold(T::zero(), |acc, e| acc + e.weight)
    }

    pub fn in_degree(&self, j: usize) -> T {
        self.edges
            .iter()
            .filter(|e| e.observed == j)
            .fold(T::zero(), |acc, e| acc + e.weight)
    }

    pub fn degrees(&self) -> DVector<T> {
        DVector::from_fn(self.node_count, |i, _| self.degree(i))
    }

    pub fn adjacency(&self) -> DMatrix<T> {
        let mut a = DMatrix::zeros(self.node_count, self.node_count);
        for e in &self.edges {
            a[(e.observer, e.observed)] = e.weight;
        }
        a
    }

    /// True iff every node reaches every other node along directed edges.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.node_count;
        let mut forward = vec![Vec::new(); n];
        let mut backward = vec![Vec::new(); n];
        for e in &self.edges {
            forward[e.observer].push(e.observed);
            backward[e.observed].push(e.observer);
        }
        reaches_all(&forward, 0) && reaches_all(&backward, 0)
    }

    /// True iff weighted in-degree equals weighted out-degree at every node.
    pub fn is_balanced(&self) -> bool {
        let tol = T::lit(1e-12);
        let mut inflow = vec![T::zero(); self.node_count];
        for e in &self.edges {
            inflow[e.observed] += e.weight;
        }
        (0..self.node_count).all(|i| {
            let out = self.degree(i);
            let scale = T::one().max(out.abs()).max(inflow[i].abs());
            (out - inflow[i]).abs() <= tol * scale
        })
    }

    /// Number of weakly connected components.
    pub fn weak_component_count(&self) -> usize {
        let n = self.node_count;
        let mut undirected = vec![Vec::new(); n];
        for e in &self.edges {
            undirected[e.observer].push(e.observed);
            undirected[e.observed].push(e.observer);
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                for &w in &undirected[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    /// Converts the weights to another scalar type.
    pub fn cast<U: Scalar>(&self) -> NetworkTopology<U> {
        NetworkTopology {
            node_count: self.node_count,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    observer: e.observer,
                    observed: e.observed,
                    weight: U::lit(e.weight.as_f64()),
                })
                .collect(),
            offsets: self.offsets.clone(),
        }
    }
}

fn reaches_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    reached == adj.len()
}

/// Laplacian with `L_ii = -d_i` and `L_ij = a_ij`. Every row sums to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix<T: Scalar>(DMatrix<T>);

impl<T: Scalar> LaplacianMatrix<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `Δ = Diag(d_i)` recovered from the diagonal.
    pub fn degree_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.0.diagonal().map(|d| -d))
    }

    /// `A = L + Δ`.
    pub fn adjacency(&self) -> DMatrix<T> {
        &self.0 + self.degree_matrix()
    }

    /// The conventional graph Laplacian `Δ - A = -L`, with eigenvalues in the
    /// closed right half plane.
    pub fn standard(&self) -> DMatrix<T> {
        -self.0.clone()
    }
}

pub fn build_laplacian<T: Scalar>(topology: &NetworkTopology<T>) -> LaplacianMatrix<T> {
    let n = topology.node_count();
    let mut l = DMatrix::zeros(n, n);
    for e in topology.edges() {
        l[(e.observer, e.observed)] = e.weight;
    }
    for i in 0..n {
        let row_sum = l.row(i).sum();
        l[(i, i)] = -row_sum;
    }
    LaplacianMatrix(l)
}

/// Left null vector `ω` of the Laplacian, normalised so `ωᵀ1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftNullVector<T: Scalar> {
    pub omega: DVector<T>,
}

impl<T: Scalar> LeftNullVector<T> {
    /// `‖ωᵀ L‖₂`.
    pub fn residual(&self, laplacian: &LaplacianMatrix<T>) -> T {
        (laplacian.matrix().transpose() * &self.omega).norm()
    }
}

/// Solves `ωᵀL = 0`, `ωᵀ1 = 1`.
///
/// Fails with [`Error::DegenerateNullSpace`] when the zero eigenvalue of `L`
/// is not simple, which happens exactly when the graph has more than one
/// closed strongly connected class.
pub fn left_null_vector<T: Scalar>(laplacian: &LaplacianMatrix<T>) -> Result<LeftNullVector<T>> {
    let n = laplacian.dim();
    if n == 1 {
        return Ok(LeftNullVector {
            omega: DVector::from_element(1, T::one()),
        });
    }
    let lt = laplacian.matrix().transpose();
    let dim = null_space_dim(&lt, T::lit(1e-9));
    if dim != 1 {
        return Err(Error::DegenerateNullSpace { dim });
    }
    // Replace one (redundant) equation of Lᵀω = 0 by the normalisation.
    let mut system = lt;
    let mut rhs = DVector::zeros(n);
    for c in 0..n {
        system[(n - 1, c)] = T::one();
    }
    rhs[n - 1] = T::one();
    let omega = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular system for left null vector".into()))?;
    Ok(LeftNullVector { omega })
}

/// Number of singular values below `rel_tol · σ_max`.
pub(crate) fn null_space_dim<T: Scalar>(m: &DMatrix<T>, rel_tol: T) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(T::zero(), |a, &b| a.max(b));
    if max == T::zero() {
        return m.ncols();
    }
    let rank = sv.iter().filter(|&&s| s > rel_tol * max).count();
    m.ncols() - rank
}

/// Graph families used by scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFamily {
    Complete,
    /// Edges `(1,2), (2,3), …, (N,1)`.
    DirectedCycle,
    /// Each node observes both ring neighbours.
    UndirectedRing,
    /// Edges `(1,2), (2,3), …, (N-1,N)`; not strongly connected for N > 1.
    Path,
    /// One-based `(i, j, a_ij)` triples; `weight` is ignored.
    Custom(Vec<(usize, usize, f64)>),
}

pub fn make_graph<T: Scalar>(family: &GraphFamily, n: usize, weight: T) -> Result<NetworkTopology<T>> {
    if n == 0 {
        return Err(invalid("graph.n", "must be at least 1"));
    }
    if !(weight > T::zero()) || !weight.is_finite() {
        return Err(invalid("graph.weight", "must be a positive finite number"));
    }
    let mut edges = Vec::new();
    match family {
        GraphFamily::Complete => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        edges.push((i, j, weight));
                    }
                }
            }
        }
        GraphFamily::DirectedCycle => {
            if n > 1 {
                edges.extend((0..n).map(|i| (i, (i + 1) % n, weight)));
            }
        }
        GraphFamily::UndirectedRing => {
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            if n > 1 {
                for i in 0..n {
                    pairs.push((i, (i + 1) % n));
                    pairs.push((i, (i + n - 1) % n));
                }
            }
            pairs.sort_unstable();
            pairs.dedup();
            edges.extend(pairs.into_iter().map(|(i, j)| (i, j, weight)));
        }
        GraphFamily::Path => {
            edges.extend((0..n.saturating_sub(1)).map(|i| (i, i + 1, weight)));
        }
        GraphFamily::Custom(list) => {
            let typed: Vec<_> = list.iter().map(|&(i, j, w)| (i, j, T::lit(w))).collect();
            return NetworkTopology::from_one_based(n, &typed);
        }
    }
    NetworkTopology::new(n, edges)
}

/// Random strongly connected digraph: a directed Hamiltonian cycle over a
/// random permutation plus each remaining ordered pair with probability
/// `extra_edge_prob`. Weights are uniform in `weight_range`.
pub fn random_strongly_connected<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    extra_edge_prob: f64,
    weight_range: (f64, f64),
    rng: &mut R,
) -> Result<NetworkTopology<T>> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let (lo, hi) = weight_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(invalid("weight_range", "need 0 < low <= high"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        let swap = rng.random_range(0..=k);
        order.swap(k, swap);
    }
    let mut present = vec![vec![false; n]; n];
    if n > 1 {
        for k in 0..n {
            present[order[k]][order[(k + 1) % n]] = true;
        }
    }
    for (i, row) in present.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            if i != j && !*slot && rng.random_bool(extra_edge_prob) {
                *slot = true;
            }
        }
    }
    let mut edges = Vec::new();
    for (i, row) in present.iter().enumerate() {
        for (j, &on) in row.iter().enumerate() {
            if on {
                let w = if hi > lo { rng.random_range(lo..hi) } else { lo };
                edges.push((i, j, T::lit(w)));
            }
        }
    }
    NetworkTopology::new(n, edges)
}
