//! Python bindings. Matrices cross the boundary as lists of rows.

use extremal_spectral as es;
use es::{Error, KnnMode, Matrix, RandomStream, SelectionRule, TailCase};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::MissingLatents => PyValueError::new_err(e.to_string()),
        Error::Io { .. } | Error::Parse { .. } => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(to_py)
}

fn parse_mode(mode: &str) -> PyResult<KnnMode> {
    mode.parse()
        .map_err(|_| PyValueError::new_err(format!("mode must be 'symmetric' or 'mutual', got '{mode}'")))
}

#[pyclass(name = "Sample", get_all)]
pub struct PySample {
    pub x: Vec<Vec<f64>>,
    pub z: Option<Vec<Vec<f64>>>,
}

#[pyclass(name = "Extremes", get_all)]
pub struct PyExtremes {
    pub threshold: f64,
    pub indices: Vec<usize>,
    pub radii: Vec<f64>,
    pub angles: Vec<Vec<f64>>,
}

#[pymethods]
impl PyExtremes {
    fn __len__(&self) -> usize {
        self.indices.len()
    }
}

#[pyclass(name = "AngularMeasure", get_all)]
pub struct PyAngularMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

#[pyclass(name = "Clustering", get_all)]
pub struct PyClustering {
    /// Cluster per extreme, `None` for isolated points.
    pub labels: Vec<Option<usize>>,
    pub atoms: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
    pub singleton_mass: f64,
    pub eigenvalues: Vec<f64>,
    pub k_n: usize,
}

#[pyfunction]
#[pyo3(signature = (loadings, alpha, n, seed, sigma = 0.0))]
fn simulate_lfm(loadings: Vec<Vec<f64>>, alpha: f64, n: usize, seed: u64, sigma: f64) -> PyResult<PySample> {
    let spec = es::FactorModelSpec::new(matrix(&loadings)?, alpha, sigma, es::FactorLaw::Frechet, TailCase::Nonnegative)
        .map_err(to_py)?;
    let s = es::simulate_lfm(&spec, n, &mut RandomStream::new(seed)).map_err(to_py)?;
    Ok(PySample {
        x: s.x.to_rows(),
        z: s.z.map(|z| z.to_rows()),
    })
}

/// Keep the `n_extremes` largest radii, or those above the `beta` quantile.
#[pyfunction]
#[pyo3(signature = (x, n_extremes = None, beta = None))]
fn select_extremes(x: Vec<Vec<f64>>, n_extremes: Option<usize>, beta: Option<f64>) -> PyResult<PyExtremes> {
    let rule = match (n_extremes, beta) {
        (Some(k), None) => SelectionRule::TopCount(k),
        (None, Some(b)) => SelectionRule::Quantile(b),
        _ => return Err(PyValueError::new_err("give exactly one of n_extremes and beta")),
    };
    let e = es::select_extremes(&matrix(&x)?, rule).map_err(to_py)?;
    Ok(PyExtremes {
        threshold: e.threshold,
        indices: e.indices,
        radii: e.radii,
        angles: e.angles.to_rows(),
    })
}

#[pyfunction]
#[pyo3(signature = (angles, m, k_n, s = 1.0, mode = "symmetric", seed = 0))]
fn spectral_cluster(angles: Vec<Vec<f64>>, m: usize, k_n: usize, s: f64, mode: &str, seed: u64) -> PyResult<PyClustering> {
    let extremes = es::ExtremalSample::from_angles(matrix(&angles)?).map_err(to_py)?;
    let mut cfg = es::SpectralConfig::new(m, k_n);
    cfg.s = s;
    cfg.mode = parse_mode(mode)?;
    let r = es::spectral_cluster(&extremes, &cfg, &mut RandomStream::new(seed)).map_err(to_py)?;
    Ok(PyClustering {
        labels: r.labels,
        atoms: r.atoms.to_rows(),
        masses: r.masses,
        singleton_mass: r.singleton_mass,
        eigenvalues: r.laplacian_eigenvalues,
        k_n: r.metadata.k_n,
    })
}

#[pyfunction]
#[pyo3(signature = (angles, s = 1.0))]
fn screeplot(angles: Vec<Vec<f64>>, s: f64) -> PyResult<Vec<f64>> {
    es::screeplot(&matrix(&angles)?, s).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (loadings, alpha, symmetric = false))]
fn lfm_angular_measure(loadings: Vec<Vec<f64>>, alpha: f64, symmetric: bool) -> PyResult<PyAngularMeasure> {
    let case = if symmetric { TailCase::Symmetric } else { TailCase::Nonnegative };
    let mu = es::lfm_angular_measure(&matrix(&loadings)?, alpha, case).map_err(to_py)?;
    Ok(PyAngularMeasure {
        atoms: mu.atoms.to_rows(),
        masses: mu.masses,
    })
}

#[pyfunction]
fn choose_k_n(n_extremes: usize, tau: f64) -> PyResult<usize> {
    es::choose_k_n(n_extremes, tau).map_err(to_py)
}

#[pyfunction]
fn snr(loadings: Vec<Vec<f64>>, sigma: f64) -> PyResult<f64> {
    es::snr(&matrix(&loadings)?, sigma).map_err(to_py)
}

#[pyfunction]
fn ess(snr: f64, n_extremes: usize) -> u64 {
    es::ess(snr, n_extremes)
}

#[pymodule]
#[pyo3(name = "extremal_spectral")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_class::<PyExtremes>()?;
    m.add_class::<PyAngularMeasure>()?;
    m.add_class::<PyClustering>()?;
    m.add_function(wrap_pyfunction!(simulate_lfm, m)?)?;
    m.add_function(wrap_pyfunction!(select_extremes, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(screeplot, m)?)?;
    m.add_function(wrap_pyfunction!(lfm_angular_measure, m)?)?;
    m.add_function(wrap_pyfunction!(choose_k_n, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add_function(wrap_pyfunction!(ess, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_python_classes() {
        Python::initialize();
        Python::attach(|py| {
            assert!(to_py(Error::Config("x".into())).is_instance_of::<PyValueError>(py));
            assert!(to_py(Error::Parse { line: 2, message: "x".into() }).is_instance_of::<PyIOError>(py));
            assert!(to_py(Error::DegenerateSample("x".into())).is_instance_of::<PyRuntimeError>(py));
        });
    }

    #[test]
    fn bindings_round_trip() {
        let s = simulate_lfm(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0, 500, 3, 0.0).unwrap();
        assert_eq!(s.x.len(), 500);
        let e = select_extremes(s.x, Some(50), None).unwrap();
        assert_eq!(e.angles.len(), 50);
        let r = spectral_cluster(e.angles, 2, 6, 1.0, "mutual", 1).unwrap();
        let total: f64 = r.masses.iter().sum::<f64>() + r.singleton_mass;
        assert!((total - 1.0).abs() < 1e-12);
        assert!(parse_mode("both").is_err());
        assert!(select_extremes(vec![vec![1.0]], None, None).is_err());
    }
}
