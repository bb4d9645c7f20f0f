//! Replicated simulation study: spectral clustering against spherical
//! k-means on the same extremal samples, scored against the exact measure.

use std::io::Write;

use rayon::prelude::*;

use crate::cluster::{choose_k_n, spectral_cluster, SpectralConfig};
use crate::error::{Error, Result};
use crate::extremal::{select_extremes, SelectionRule};
use crate::graph::KnnMode;
use crate::matrix::{dist, Matrix};
use crate::measure::{lfm_angular_measure, ma_angular_measure, mass_error, match_atoms, AngularMeasure, AtomCountPolicy};
use crate::numerics::kmeans::{spherical_kmeans, KMeansConfig};
use crate::rng::RandomStream;
use crate::variates::{simulate_lfm, simulate_ma_embedding, FactorLaw, FactorModelSpec, SampleMatrix, TailCase};

/// Loadings of the four-dimensional two-factor model used in the studies.
pub fn two_factor_loadings() -> Matrix {
    Matrix::from_rows(&[[0.1, 0.9], [0.2, 0.8], [0.3, 0.7], [0.4, 0.6]]).expect("static shape")
}

/// Coefficients of the moving-average example.
pub const MA_COEFFS: [f64; 4] = [1.0, 0.5, -0.6, 1.5];

#[derive(Clone, Debug)]
pub enum BenchModel {
    /// `X = A Z + σ N η` with Fréchet factors.
    Factor { loadings: Matrix, alpha: f64 },
    /// Lag embedding of a moving average with symmetric stable innovations.
    MovingAverage { coeffs: Vec<f64>, alpha: f64, embed_dim: usize },
}

impl BenchModel {
    pub fn simulate(&self, n: usize, sigma: f64, stream: &mut RandomStream) -> Result<SampleMatrix> {
        match self {
            BenchModel::Factor { loadings, alpha } => {
                let spec = FactorModelSpec::new(
                    loadings.clone(),
                    *alpha,
                    sigma,
                    FactorLaw::Frechet,
                    TailCase::Nonnegative,
                )?;
                simulate_lfm(&spec, n, stream)
            }
            BenchModel::MovingAverage { coeffs, alpha, embed_dim } => {
                simulate_ma_embedding(coeffs, *alpha, n, *embed_dim, stream)
            }
        }
    }

    /// Signal part of the angular measure, normalized to total mass 1.
    pub fn signal_measure(&self) -> Result<AngularMeasure> {
        match self {
            BenchModel::Factor { loadings, alpha } => lfm_angular_measure(loadings, *alpha, TailCase::Nonnegative),
            BenchModel::MovingAverage { coeffs, alpha, embed_dim } => ma_angular_measure(coeffs, *alpha, *embed_dim),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridCell {
    pub n: usize,
    pub n_extremes: usize,
    pub tau: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Spectral,
    SphericalKMeans,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::SphericalKMeans => "spherical_kmeans",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub cell_index: usize,
    pub cell: GridCell,
    pub replication: usize,
    pub method: Method,
    pub k_n: usize,
    /// Frobenius error of the matched atoms.
    pub center_error: f64,
    /// Largest distance between a matched pair of atoms.
    pub max_atom_error: f64,
    /// Largest absolute mass difference over matched atoms.
    pub mass_error: f64,
    pub atoms: Matrix,
    pub masses: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchSettings {
    pub mode: KnnMode,
    pub s: f64,
    pub restarts: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            mode: KnnMode::Symmetric,
            s: 1.0,
            restarts: KMeansConfig::new(1).restarts,
        }
    }
}

fn score(atoms: &Matrix, masses: &[f64], truth: &AngularMeasure) -> Result<(f64, f64, f64)> {
    let matching = match_atoms(atoms, &truth.atoms, AtomCountPolicy::Strict)?;
    let worst = matching
        .permutation
        .iter()
        .enumerate()
        .map(|(j, &i)| dist(atoms.row(i), truth.atoms.row(j)))
        .fold(0.0, f64::max);
    Ok((matching.cost, worst, mass_error(atoms, masses, truth)?))
}

/// One replication of one grid cell: simulate, keep the top `N_n` radii,
/// cluster with both methods using as many clusters as the truth has atoms.
pub fn run_replication(
    model: &BenchModel,
    truth: &AngularMeasure,
    cell_index: usize,
    cell: GridCell,
    replication: usize,
    settings: &BenchSettings,
    stream: &mut RandomStream,
) -> Result<[BenchRow; 2]> {
    let m = truth.len();
    let sample = model.simulate(cell.n, cell.sigma, &mut stream.substream_named("sample"))?;
    let extremes = select_extremes(&sample.x, SelectionRule::TopCount(cell.n_extremes))?;
    let k_n = choose_k_n(extremes.len(), cell.tau)?;

    let mut cfg = SpectralConfig::new(m, k_n);
    cfg.mode = settings.mode;
    cfg.s = settings.s;
    cfg.restarts = settings.restarts;
    let spec = spectral_cluster(&extremes, &cfg, &mut stream.substream_named("spectral"))?;
    let (c1, w1, p1) = score(&spec.atoms, &spec.masses, truth)?;

    let km_cfg = KMeansConfig::new(m).with_restarts(settings.restarts);
    let km = spherical_kmeans(&extremes.angles, &km_cfg, &mut stream.substream_named("baseline"))?;
    let mut counts = vec![0usize; m];
    for &l in &km.labels {
        counts[l] += 1;
    }
    let km_masses: Vec<f64> = counts.iter().map(|&c| c as f64 / extremes.len() as f64).collect();
    let (c2, w2, p2) = score(&km.centroids, &km_masses, truth)?;

    let row = |method, center_error, max_atom_error, mass_error, atoms: Matrix, masses: Vec<f64>| BenchRow {
        cell_index,
        cell,
        replication,
        method,
        k_n,
        center_error,
        max_atom_error,
        mass_error,
        atoms,
        masses,
    };
    Ok([
        row(Method::Spectral, c1, w1, p1, spec.atoms, spec.masses),
        row(Method::SphericalKMeans, c2, w2, p2, km.centroids, km_masses),
    ])
}

/// Runs every (cell, replication) pair in parallel. Each pair draws from its
/// own labelled substream, so results do not depend on scheduling; rows come
/// back sorted by cell, replication, then method.
pub fn run_benchmark(
    model: &BenchModel,
    cells: &[GridCell],
    replications: usize,
    settings: &BenchSettings,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    let truth = model.signal_measure()?;
    let root = RandomStream::new(seed);
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..replications).map(move |r| (c, r)))
        .collect();
    let out: Result<Vec<[BenchRow; 2]>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut s = root.substream(c as u64).substream(r as u64);
            run_replication(model, &truth, c, cells[c], r, settings, &mut s)
        })
        .collect();
    Ok(out?.into_iter().flatten().collect())
}

/// `n,n_extremes,tau,sigma,replication,method,k_n,center_error,max_atom_error,mass_error`.
pub fn write_benchmark_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    w.write_record([
        "n",
        "n_extremes",
        "tau",
        "sigma",
        "replication",
        "method",
        "k_n",
        "center_error",
        "max_atom_error",
        "mass_error",
    ])
    .map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.cell.n.to_string(),
            r.cell.n_extremes.to_string(),
            r.cell.tau.to_string(),
            r.cell.sigma.to_string(),
            r.replication.to_string(),
            r.method.as_str().to_string(),
            r.k_n.to_string(),
            r.center_error.to_string(),
            r.max_atom_error.to_string(),
            r.mass_error.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
