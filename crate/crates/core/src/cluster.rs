//! Spectral clustering of extremal angles and estimation of the atoms and
//! masses of the angular measure.
//!
//! Pipeline: k-NN graph on the angles → kernel weights → strip isolated
//! nodes → normalized Laplacian → eigenvectors of the `m` smallest
//! eigenvalues → row-normalize → k-means → map labels back.

use crate::error::{Error, Result};
use crate::extremal::ExtremalSample;
use crate::graph::{full_kernel_matrix, knn_graph, laplacian, EdgeRule, KnnMode, WeightedGraph};
use crate::matrix::{norm, Matrix};
use crate::numerics::eigen::{sym_eigen_with, sym_eigenvalues, EigenMethod};
use crate::numerics::kmeans::{kmeans, KMeansConfig};
use crate::rng::RandomStream;

/// Row norms below this are treated as zero by [`row_normalize`].
pub const ZERO_ROW_TOL: f64 = 1e-12;

/// Default tolerance below which a Laplacian eigenvalue counts as zero.
pub const DEFAULT_ZERO_EIGEN_TOL: f64 = 1e-8;

/// `k_n = ⌈N_n / (τ ln N_n)⌉ + 1`.
pub fn choose_k_n(n_extremes: usize, tau: f64) -> Result<usize> {
    if n_extremes < 2 {
        return Err(Error::invalid("need at least 2 extremes to choose k_n"));
    }
    if !(tau > 1.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must exceed 1, got {tau}")));
    }
    let n = n_extremes as f64;
    Ok((n / (tau * n.ln())).ceil() as usize + 1)
}

/// Scales each row to unit norm. Rows with norm below [`ZERO_ROW_TOL`] are
/// set to zero and flagged.
pub fn row_normalize(u: &Matrix) -> (Matrix, Vec<bool>) {
    let mut v = u.clone();
    let mut zero = vec![false; u.nrows()];
    for i in 0..u.nrows() {
        let r = norm(u.row(i));
        let row = v.row_mut(i);
        if r < ZERO_ROW_TOL {
            row.iter_mut().for_each(|x| *x = 0.0);
            zero[i] = true;
        } else {
            row.iter_mut().for_each(|x| *x /= r);
        }
    }
    (v, zero)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralConfig {
    /// Number of clusters.
    pub m: usize,
    /// Neighbour count of the k-NN graph.
    pub k_n: usize,
    /// Kernel scale in `exp(-s ‖x − y‖)`.
    pub s: f64,
    pub mode: KnnMode,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub eigen_method: EigenMethod,
}

impl SpectralConfig {
    pub fn new(m: usize, k_n: usize) -> Self {
        let km = KMeansConfig::new(m);
        SpectralConfig {
            m,
            k_n,
            s: 1.0,
            mode: KnnMode::Symmetric,
            restarts: km.restarts,
            tol: km.tol,
            max_iter: km.max_iter,
            eigen_method: EigenMethod::default(),
        }
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.m,
            restarts: self.restarts,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Outcome of clustering the nodes of a weighted graph.
#[derive(Clone, Debug)]
pub struct SpectralPartition {
    /// Cluster of each node; `None` for isolated nodes.
    pub labels: Vec<Option<usize>>,
    /// Ascending spectrum of the Laplacian of the non-isolated subgraph.
    pub eigenvalues: Vec<f64>,
    /// Isolated nodes, stripped before the Laplacian was formed.
    pub isolated: Vec<usize>,
    /// Nodes whose spectral embedding row was numerically zero.
    pub zero_rows: Vec<usize>,
}

/// Relabels clusters in order of their smallest member.
fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    raw.iter()
        .map(|&l| {
            if l >= map.len() {
                map.resize(l + 1, None);
            }
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Steps 1–4 of normalized spectral clustering on an arbitrary weighted
/// graph.
///
/// The Laplacian is block diagonal over connected components, so the
/// eigenproblem is solved per component; for eigenvalues shared across
/// components (in particular the zeros) this picks the component-supported
/// basis of the eigenspace.
pub fn spectral_partition(
    g: &WeightedGraph,
    m: usize,
    kmeans_cfg: &KMeansConfig,
    method: EigenMethod,
    stream: &mut RandomStream,
) -> Result<SpectralPartition> {
    if m == 0 {
        return Err(Error::invalid("cluster count m must be at least 1"));
    }
    let n = g.n_nodes();
    let isolated = g.isolated_nodes();
    let keep: Vec<usize> = (0..n).filter(|i| !isolated.contains(i)).collect();
    if m > keep.len() {
        return Err(Error::invalid(format!(
            "m = {m} exceeds the {} non-isolated nodes",
            keep.len()
        )));
    }
    let sub = g.subgraph(&keep);
    let lap = laplacian(&sub)?;
    let comp = sub.component_labels();

    // (eigenvalue, block index, local eigenvector index)
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![usize::MAX; keep.len()];
    for (i, &c) in comp.iter().enumerate() {
        if block_of[c] == usize::MAX {
            block_of[c] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[block_of[c]].push(i);
    }
    let mut spectra = Vec::with_capacity(blocks.len());
    let mut pool: Vec<(f64, usize, usize)> = Vec::with_capacity(keep.len());
    for (b, members) in blocks.iter().enumerate() {
        let ed = sym_eigen_with(&lap.select(members, members), method)?;
        for (t, &lam) in ed.eigenvalues.iter().enumerate() {
            pool.push((lam, b, t));
        }
        spectra.push(ed);
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let eigenvalues: Vec<f64> = pool.iter().map(|p| p.0).collect();

    let mut u = Matrix::zeros(keep.len(), m);
    for (col, &(_, b, t)) in pool.iter().take(m).enumerate() {
        for (local, &node) in blocks[b].iter().enumerate() {
            u[(node, col)] = spectra[b].eigenvectors[(local, t)];
        }
    }
    let (v, zero) = row_normalize(&u);
    let km = kmeans(&v, &KMeansConfig { k: m, ..*kmeans_cfg }, stream)?;
    let sub_labels = canonical_labels(&km.labels);

    let mut labels = vec![None; n];
    for (i, &node) in keep.iter().enumerate() {
        labels[node] = Some(sub_labels[i]);
    }
    let zero_rows = zero
        .iter()
        .enumerate()
        .filter(|(_, &z)| z)
        .map(|(i, _)| keep[i])
        .collect();
    Ok(SpectralPartition {
        labels,
        eigenvalues,
        isolated,
        zero_rows,
    })
}

/// Normalized member means `ĉ_j` and frequencies `π̂_j = N̂_j / N`.
/// Unlabelled points count toward `N` only.
pub fn estimate_atoms(angles: &Matrix, labels: &[Option<usize>], m: usize) -> (Matrix, Vec<f64>) {
    let d = angles.ncols();
    let n = angles.nrows();
    let mut sums = Matrix::zeros(m, d);
    let mut counts = vec![0usize; m];
    let mut first = vec![None; m];
    for (i, l) in labels.iter().enumerate() {
        if let Some(j) = *l {
            counts[j] += 1;
            first[j].get_or_insert(i);
            for (s, v) in sums.row_mut(j).iter_mut().zip(angles.row(i)) {
                *s += v;
            }
        }
    }
    let mut atoms = Matrix::zeros(m, d);
    for j in 0..m {
        let r = norm(sums.row(j));
        if r > ZERO_ROW_TOL {
            for (a, s) in atoms.row_mut(j).iter_mut().zip(sums.row(j)) {
                *a = s / r;
            }
        } else if let Some(i) = first[j] {
            // Members cancel out; fall back to the first member's direction.
            atoms.row_mut(j).copy_from_slice(angles.row(i));
        }
    }
    let masses = counts.iter().map(|&c| c as f64 / n as f64).collect();
    (atoms, masses)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMetadata {
    pub k_n: usize,
    pub s: f64,
    pub rule: EdgeRule,
    pub seed: u64,
    pub kmeans_variant: &'static str,
}

#[derive(Clone, Debug)]
pub struct ClusteringResult {
    /// Cluster of each extreme; `None` for stripped singletons.
    pub labels: Vec<Option<usize>>,
    pub m: usize,
    pub laplacian_eigenvalues: Vec<f64>,
    /// m×d estimated atom locations `ĉ_j`.
    pub atoms: Matrix,
    /// Estimated masses `π̂_j`; together with `singleton_mass` they sum to 1.
    pub masses: Vec<f64>,
    /// Positions (within the extremal sample) of stripped isolated nodes.
    pub singletons: Vec<usize>,
    pub singleton_mass: f64,
    /// Positions whose spectral embedding row was zero.
    pub zero_rows: Vec<usize>,
    pub metadata: ClusterMetadata,
}

impl ClusteringResult {
    /// The partition as sorted lists of original sample indices.
    pub fn partition(&self, extremes: &ExtremalSample) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.m];
        for (pos, l) in self.labels.iter().enumerate() {
            if let Some(j) = l {
                groups[*j].push(extremes.indices[pos]);
            }
        }
        groups
    }
}

/// End-to-end extremal spectral clustering.
pub fn spectral_cluster(
    extremes: &ExtremalSample,
    cfg: &SpectralConfig,
    stream: &mut RandomStream,
) -> Result<ClusteringResult> {
    let seed = stream.seed();
    let g = knn_graph(&extremes.angles, cfg.k_n, cfg.mode, cfg.s)?;
    let part = spectral_partition(&g, cfg.m, &cfg.kmeans_config(), cfg.eigen_method, stream)?;
    let (atoms, masses) = estimate_atoms(&extremes.angles, &part.labels, cfg.m);
    let n = extremes.len();
    Ok(ClusteringResult {
        labels: part.labels,
        m: cfg.m,
        laplacian_eigenvalues: part.eigenvalues,
        atoms,
        masses,
        singleton_mass: part.isolated.len() as f64 / n as f64,
        singletons: part.isolated,
        zero_rows: part.zero_rows,
        metadata: ClusterMetadata {
            k_n: cfg.k_n,
            s: cfg.s,
            rule: g.rule,
            seed,
            kmeans_variant: "kmeans++ lloyd+transfer",
        },
    })
}

/// Eigenvalues of the fully connected kernel matrix, descending.
pub fn screeplot(angles: &Matrix, s: f64) -> Result<Vec<f64>> {
    if angles.nrows() < 2 {
        return Err(Error::invalid("screeplot needs at least 2 points"));
    }
    let g = full_kernel_matrix(angles, s)?;
    let mut ev = sym_eigenvalues(&g.weights)?;
    ev.reverse();
    Ok(ev)
}
