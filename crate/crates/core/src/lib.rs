//! Spectral clustering of multivariate extremes.
//!
//! Heavy-tailed observations are thresholded by radius, their angular parts
//! are connected in a k-nearest-neighbour graph, and normalized spectral
//! clustering recovers the atoms of the angular measure. The crate also
//! simulates linear factor models, computes their exact angular measures,
//! and scores estimates against them.

pub mod benchmark;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod error;
pub mod extremal;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod measure;
pub mod numerics;
pub mod rng;
pub mod variates;

pub use cluster::{choose_k_n, screeplot, spectral_cluster, ClusteringResult, SpectralConfig};
pub use error::{Error, Result};
pub use extremal::{marginal_rank_transform, select_extremes, ExtremalSample, SelectionRule};
pub use graph::{knn_graph, laplacian, KnnMode, WeightedGraph};
pub use matrix::Matrix;
pub use measure::{
    center_error, ess, lfm_angular_measure, limit_deviation_sampler, noisy_lfm_angular_measure, snr,
    AngularMeasure, AtomCountPolicy,
};
pub use rng::RandomStream;
pub use variates::{simulate_lfm, simulate_ma_embedding, FactorLaw, FactorModelSpec, SampleMatrix, TailCase};
