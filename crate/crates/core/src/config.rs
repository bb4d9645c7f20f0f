//! Run configuration: defaults, `key=value` files, and validation.

use std::path::{Path, PathBuf};

use crate::benchmark::{two_factor_loadings, MA_COEFFS};
use crate::cluster::choose_k_n;
use crate::error::{Error, Result};
use crate::extremal::{quantile_count, SelectionRule};
use crate::graph::KnnMode;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Two-factor model with Fréchet factors, no noise.
    Lfm,
    /// The same model plus scaled Gaussian noise.
    LfmNoisy,
    /// Lag embedding of a moving average.
    Ma,
    /// Observations read from a CSV file.
    Csv,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lfm => "lfm",
            ModelKind::LfmNoisy => "lfm-noisy",
            ModelKind::Ma => "ma",
            ModelKind::Csv => "csv",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lfm" => Ok(ModelKind::Lfm),
            "lfm-noisy" | "lfm_noisy" => Ok(ModelKind::LfmNoisy),
            "ma" => Ok(ModelKind::Ma),
            "csv" => Ok(ModelKind::Csv),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelKind,
    pub input: Option<PathBuf>,
    /// Tail index; defaults to 1 for the factor models and 1.8 for the MA model.
    pub alpha: Option<f64>,
    pub sigma: f64,
    pub loadings: Matrix,
    pub coeffs: Vec<f64>,
    pub embed_dim: usize,
    pub n: usize,
    pub selection: SelectionRule,
    pub tau: f64,
    /// Overrides the neighbour count derived from `tau`.
    pub k_n: Option<usize>,
    pub s: f64,
    /// Cluster count; defaults to the number of atoms of the simulated model.
    pub m: Option<usize>,
    pub mode: KnnMode,
    pub rank_transform: bool,
    pub reps: usize,
    pub out: PathBuf,
    pub grid_n: Vec<usize>,
    pub grid_nn: Vec<usize>,
    pub grid_tau: Vec<f64>,
    pub grid_sigma: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            model: ModelKind::Lfm,
            input: None,
            alpha: None,
            sigma: 0.0,
            loadings: two_factor_loadings(),
            coeffs: MA_COEFFS.to_vec(),
            embed_dim: 2,
            n: 25_000,
            selection: SelectionRule::TopCount(400),
            tau: 5.0,
            k_n: None,
            s: 1.0,
            m: None,
            mode: KnnMode::Symmetric,
            rank_transform: false,
            reps: 50,
            out: PathBuf::from("out"),
            grid_n: vec![1000, 5000, 25_000, 125_000],
            grid_nn: vec![100, 200, 400, 800],
            grid_tau: vec![3.0, 5.0, 7.0, 9.0],
            grid_sigma: vec![0.0],
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key}='{v}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|x| parse(key, x)).collect()
}

/// Rows separated by `;`, entries by `,`.
fn parse_matrix(key: &str, v: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = v.split(';').map(|r| parse_list(key, r)).collect::<Result<_>>()?;
    Matrix::from_rows(&rows).map_err(|e| Error::Config(format!("{key}: {e}")))
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "model" => self.model = v.parse()?,
            "input" => self.input = Some(PathBuf::from(v)),
            "alpha" => self.alpha = Some(parse(key, v)?),
            "sigma" => self.sigma = parse(key, v)?,
            "loadings" => self.loadings = parse_matrix(key, v)?,
            "coeffs" => self.coeffs = parse_list(key, v)?,
            "embed_dim" => self.embed_dim = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "beta" => self.selection = SelectionRule::Quantile(parse(key, v)?),
            "nn" => self.selection = SelectionRule::TopCount(parse(key, v)?),
            "tau" => self.tau = parse(key, v)?,
            "k_n" => self.k_n = Some(parse(key, v)?),
            "s" => self.s = parse(key, v)?,
            "m" => self.m = Some(parse(key, v)?),
            "mode" => self.mode = v.parse().map_err(|_| Error::Config(format!("unknown mode '{v}'")))?,
            "rank_transform" => self.rank_transform = parse(key, v)?,
            "reps" => self.reps = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "grid_n" => self.grid_n = parse_list(key, v)?,
            "grid_nn" => self.grid_nn = parse_list(key, v)?,
            "grid_tau" => self.grid_tau = parse_list(key, v)?,
            "grid_sigma" => self.grid_sigma = parse_list(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.model {
            ModelKind::Ma => 1.8,
            _ => 1.0,
        })
    }

    /// Number of atoms of the simulated model's angular measure, used as the
    /// default cluster count.
    pub fn model_atoms(&self) -> Option<usize> {
        match self.model {
            ModelKind::Lfm => Some(self.loadings.ncols()),
            // One extra cluster absorbs the noise directions.
            ModelKind::LfmNoisy => Some(self.loadings.ncols() + 1),
            ModelKind::Ma => Some(2 * (self.coeffs.len() + self.embed_dim - 1)),
            ModelKind::Csv => None,
        }
    }

    pub fn m(&self) -> Result<usize> {
        self.m
            .or_else(|| self.model_atoms())
            .ok_or_else(|| Error::Config("m is required for csv input".into()))
    }

    /// Expected extreme count for an `n`-row sample, when known up front.
    pub fn planned_extremes(&self, n: usize) -> usize {
        match self.selection {
            SelectionRule::Quantile(beta) => quantile_count(beta, n),
            SelectionRule::TopCount(k) => k,
            SelectionRule::Threshold(_) => n,
        }
    }

    /// Neighbour count for `n_extremes` points.
    pub fn k_n(&self, n_extremes: usize) -> Result<usize> {
        match self.k_n {
            Some(k) => Ok(k),
            None => choose_k_n(n_extremes, self.tau).map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// Checks the parameters that feed simulation and selection.
    pub fn validate_common(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {alpha}"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if self.model == ModelKind::Lfm && self.sigma != 0.0 {
            return bad("model lfm has no noise; use lfm-noisy for sigma > 0".into());
        }
        if self.model == ModelKind::Ma && alpha > 2.0 {
            return bad(format!("stable innovations need alpha <= 2, got {alpha}"));
        }
        if self.model == ModelKind::Csv && self.input.is_none() {
            return bad("model csv needs --input".into());
        }
        if self.model != ModelKind::Csv && self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if let SelectionRule::Quantile(b) = self.selection {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("beta must lie in [0, 1), got {b}"));
            }
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        if !(self.tau > 1.0) {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        Ok(())
    }

    /// Checks cluster parameters against an extreme count.
    pub fn validate_cluster(&self, n_extremes: usize) -> Result<()> {
        if n_extremes < 2 {
            return Err(Error::Config(format!("only {n_extremes} extremes selected")));
        }
        let k = self.k_n(n_extremes)?;
        if k == 0 || k >= n_extremes {
            return Err(Error::Config(format!("k_n = {k} must lie in [1, N_n = {n_extremes})")));
        }
        let m = self.m()?;
        if m == 0 || m > n_extremes {
            return Err(Error::Config(format!("m = {m} must lie in [1, N_n = {n_extremes}]")));
        }
        Ok(())
    }

    pub fn validate_benchmark(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.model == ModelKind::Csv {
            return bad("benchmark needs a simulated model".into());
        }
        if self.grid_n.len() != self.grid_nn.len() || self.grid_n.is_empty() {
            return bad("grid_n and grid_nn must be nonempty and of equal length".into());
        }
        if self.grid_tau.is_empty() || self.grid_sigma.is_empty() {
            return bad("grid_tau and grid_sigma must be nonempty".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.grid_tau.iter().any(|&t| !(t > 1.0)) {
            return bad("every tau must exceed 1".into());
        }
        if self.grid_sigma.iter().any(|&s| !(s >= 0.0)) || (self.model != ModelKind::LfmNoisy && self.grid_sigma.iter().any(|&s| s != 0.0)) {
            return bad("sigma grid must be nonnegative, and zero unless the model is lfm-noisy".into());
        }
        let atoms = self.model_atoms().unwrap_or(0);
        for (&n, &nn) in self.grid_n.iter().zip(&self.grid_nn) {
            if nn < 2 || nn >= n {
                return bad(format!("need 2 <= N_n < n, got N_n={nn}, n={n}"));
            }
            if atoms > nn {
                return bad(format!("{atoms} clusters exceed N_n={nn}"));
            }
            for &tau in &self.grid_tau {
                let k = choose_k_n(nn, tau)?;
                if k >= nn {
                    return bad(format!("k_n = {k} must be below N_n = {nn}"));
                }
            }
        }
        Ok(())
    }

    /// Deterministic text form used for hashing.
    pub fn canonical(&self) -> String {
        format!(
            "seed={}\nmodel={}\ninput={:?}\nalpha={}\nsigma={}\nloadings={:?}\ncoeffs={:?}\nembed_dim={}\n\
             n={}\nselection={:?}\ntau={}\nk_n={:?}\ns={}\nm={:?}\nmode={:?}\nrank_transform={}\nreps={}\n\
             grid_n={:?}\ngrid_nn={:?}\ngrid_tau={:?}\ngrid_sigma={:?}\n",
            self.seed,
            self.model.as_str(),
            self.input,
            self.alpha(),
            self.sigma,
            self.loadings.to_rows(),
            self.coeffs,
            self.embed_dim,
            self.n,
            self.selection,
            self.tau,
            self.k_n,
            self.s,
            self.m,
            self.mode,
            self.rank_transform,
            self.reps,
            self.grid_n,
            self.grid_nn,
            self.grid_tau,
            self.grid_sigma,
        )
    }
}
