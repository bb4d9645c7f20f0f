//! Dense numerical kernels: symmetric eigensolvers, k-means variants and
//! optimal assignment.

pub mod eigen;
pub mod kmeans;
pub mod matching;

pub use eigen::{sym_eigen, sym_eigen_tridiagonal, sym_eigen_with, sym_eigenvalues, EigenDecomposition, EigenMethod};
pub use kmeans::{kmeans, spherical_kmeans, KMeansConfig, KMeansResult};
pub use matching::{assign_min_cost, best_matching, Matching};
