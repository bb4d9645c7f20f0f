//! Nearest-neighbour graphs on the sphere, kernel weights, and the
//! normalized symmetric Laplacian.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::matrix::{dist, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KnnMode {
    /// Edge when either endpoint is among the other's k nearest neighbours.
    Symmetric,
    /// Edge only when each endpoint is among the other's k nearest neighbours.
    Mutual,
}

impl std::str::FromStr for KnnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(KnnMode::Symmetric),
            "mutual" => Ok(KnnMode::Mutual),
            other => Err(Error::invalid(format!("unknown k-NN mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeRule {
    KnnSymmetric,
    KnnMutual,
    Full,
}

impl EdgeRule {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeRule::KnnSymmetric => "knn_symmetric",
            EdgeRule::KnnMutual => "knn_mutual",
            EdgeRule::Full => "full",
        }
    }
}

impl From<KnnMode> for EdgeRule {
    fn from(m: KnnMode) -> Self {
        match m {
            KnnMode::Symmetric => EdgeRule::KnnSymmetric,
            KnnMode::Mutual => EdgeRule::KnnMutual,
        }
    }
}

/// Undirected edges as `(i, j)` pairs with `i < j`, sorted.
pub type EdgeSet = Vec<(usize, usize)>;

/// Symmetric nonnegative weight matrix with zero diagonal.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    pub weights: Matrix,
    pub rule: EdgeRule,
    pub k: Option<usize>,
    pub kernel_scale: f64,
}

impl WeightedGraph {
    pub fn n_nodes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.weights.rows().map(|r| r.iter().sum()).collect()
    }

    /// Positive-weight edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn edge_set(&self) -> EdgeSet {
        self.edges().into_iter().map(|(i, j, _)| (i, j)).collect()
    }

    /// Nodes with zero degree.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        self.degrees()
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Induced subgraph on `keep` (in the given order).
    pub fn subgraph(&self, keep: &[usize]) -> WeightedGraph {
        WeightedGraph {
            weights: self.weights.select(keep, keep),
            rule: self.rule,
            k: self.k,
            kernel_scale: self.kernel_scale,
        }
    }

    pub fn component_labels(&self) -> Vec<usize> {
        connected_components(&self.edge_set(), self.n_nodes())
    }

    /// Builds a graph directly from a weight matrix (used for externally
    /// supplied graphs). The matrix must be square, symmetric, nonnegative
    /// with zero diagonal.
    pub fn from_weights(weights: Matrix) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::invalid("weight matrix must be square"));
        }
        if weights.max_asymmetry() > 0.0 {
            return Err(Error::invalid("weight matrix must be symmetric"));
        }
        let n = weights.nrows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::invalid("weight matrix must have zero diagonal"));
            }
        }
        if weights.as_slice().iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(WeightedGraph {
            weights,
            rule: EdgeRule::Full,
            k: None,
            kernel_scale: 1.0,
        })
    }
}

/// For each point, its `k` nearest other points by chordal distance; ties
/// broken by lower index.
pub fn knn_lists(points: &Matrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "k must satisfy 1 <= k < N = {n}, got {k}"
        )));
    }
    let dmat = pairwise_distances(points);
    let mut lists = Vec::with_capacity(n);
    let mut cand: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i));
        let row = dmat.row(i);
        let cmp = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        lists.push(cand.clone());
    }
    Ok(lists)
}

pub fn pairwise_distances(points: &Matrix) -> Matrix {
    let n = points.nrows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dist(points.row(i), points.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Undirected k-NN edge set in the requested mode. Self-loops are excluded.
pub fn knn_edges(points: &Matrix, k: usize, mode: KnnMode) -> Result<EdgeSet> {
    let lists = knn_lists(points, k)?;
    let n = points.nrows();
    let mut member = vec![false; n * n];
    for (i, l) in lists.iter().enumerate() {
        for &j in l {
            member[i * n + j] = true;
        }
    }
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (member[i * n + j], member[j * n + i]);
            let keep = match mode {
                KnnMode::Symmetric => a || b,
                KnnMode::Mutual => a && b,
            };
            if keep {
                edges.insert((i, j));
            }
        }
    }
    Ok(edges.into_iter().collect())
}

fn check_scale(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("kernel scale must be positive, got {s}")))
    }
}

/// Exponential kernel `exp(-s ‖x_i - x_j‖)`.
#[inline]
pub fn kernel(s: f64, a: &[f64], b: &[f64]) -> f64 {
    (-s * dist(a, b)).exp()
}

/// Kernel-weighted adjacency on the given edges.
pub fn kernel_weights(points: &Matrix, edges: &[(usize, usize)], s: f64) -> Result<WeightedGraph> {
    check_scale(s)?;
    let n = points.nrows();
    let mut w = Matrix::zeros(n, n);
    for &(i, j) in edges {
        if i >= n || j >= n || i == j {
            return Err(Error::invalid(format!("edge ({i}, {j}) invalid for {n} points")));
        }
        let v = kernel(s, points.row(i), points.row(j));
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    Ok(WeightedGraph {
        weights: w,
        rule: EdgeRule::Full,
        k: None,
        kernel_scale: s,
    })
}

/// k-NN graph with kernel weights in one call.
pub fn knn_graph(points: &Matrix, k: usize, mode: KnnMode, s: f64) -> Result<WeightedGraph> {
    check_scale(s)?;
    let edges = knn_edges(points, k, mode)?;
    let mut g = kernel_weights(points, &edges, s)?;
    g.rule = mode.into();
    g.k = Some(k);
    Ok(g)
}

/// Fully connected kernel matrix with zero diagonal.
pub fn full_kernel_matrix(points: &Matrix, s: f64) -> Result<WeightedGraph> {
    check_scale(s)?;
    let n = points.nrows();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kernel(s, points.row(i), points.row(j));
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(WeightedGraph {
        weights: w,
        rule: EdgeRule::Full,
        k: None,
        kernel_scale: s,
    })
}

/// `L = I - D^{-1/2} W D^{-1/2}`. Fails if any node has zero degree.
pub fn laplacian(g: &WeightedGraph) -> Result<Matrix> {
    let isolated = g.isolated_nodes();
    if let Some(&first) = isolated.first() {
        return Err(Error::IsolatedNode {
            first,
            count: isolated.len(),
        });
    }
    let inv_sqrt: Vec<f64> = g.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = g.n_nodes();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = -inv_sqrt[i] * g.weights[(i, j)] * inv_sqrt[j];
            l[(i, j)] = if i == j { 1.0 + v } else { v };
        }
    }
    // Exact symmetry regardless of evaluation order.
    for i in 0..n {
        for j in (i + 1)..n {
            l[(j, i)] = l[(i, j)];
        }
    }
    Ok(l)
}

/// Union-find component labels; each label is the smallest node index in
/// its component.
pub fn connected_components(edges: &[(usize, usize)], n_nodes: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n_nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            // Keep the smaller index as root so roots are canonical.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    (0..n_nodes).map(|i| find(&mut parent, i)).collect()
}

/// Number of distinct component labels.
pub fn component_count(labels: &[usize]) -> usize {
    labels.iter().enumerate().filter(|(i, &l)| *i == l).count()
}
