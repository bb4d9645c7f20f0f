//! Heavy-tailed variates and the data-generating models: the linear factor
//! model `X = A Z + σ N η` and the lag embedding of a moving-average process.
//!
//! Fréchet and Pareto draws use exact inverse transforms, so each variate is a
//! monotone function of a single uniform from the stream.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::rng::RandomStream;

/// Marginal law of the latent factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorLaw {
    Frechet,
    Pareto,
    SymmetricStable,
}

/// Whether factors (and loadings) are nonnegative or symmetric about zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TailCase {
    Nonnegative,
    Symmetric,
}

impl std::str::FromStr for FactorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frechet" => Ok(FactorLaw::Frechet),
            "pareto" => Ok(FactorLaw::Pareto),
            "symmetric_stable" | "stable" => Ok(FactorLaw::SymmetricStable),
            other => Err(Error::invalid(format!("unknown factor law '{other}'"))),
        }
    }
}

impl std::str::FromStr for TailCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonnegative" => Ok(TailCase::Nonnegative),
            "symmetric" => Ok(TailCase::Symmetric),
            other => Err(Error::invalid(format!("unknown tail case '{other}'"))),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tail index must be positive, got {alpha}")))
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        Err(Error::invalid("count must be at least 1"))
    } else {
        Ok(())
    }
}

/// Inverse CDF of the Fréchet law `F(x) = exp(-x^{-α})`.
#[inline]
pub fn frechet_quantile(u: f64, alpha: f64) -> f64 {
    (-u.ln()).powf(-1.0 / alpha)
}

/// Inverse survival function of the Pareto law `P(W > x) = x^{-α}`, `x ≥ 1`.
#[inline]
pub fn pareto_quantile(u: f64, alpha: f64) -> f64 {
    u.powf(-1.0 / alpha)
}

/// Chambers–Mallows–Stuck map for a standard symmetric α-stable variate,
/// given `v` uniform on (-π/2, π/2) and `w` standard exponential. At α = 2
/// this is `2 sin(v) √w`, a centered normal with variance 2.
#[inline]
pub fn cms_symmetric(alpha: f64, v: f64, w: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let av = alpha * v;
    av.sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

fn draw_frechet(stream: &mut RandomStream, alpha: f64) -> f64 {
    frechet_quantile(stream.uniform(), alpha)
}

fn draw_pareto(stream: &mut RandomStream, alpha: f64) -> f64 {
    pareto_quantile(stream.uniform(), alpha)
}

fn draw_stable(stream: &mut RandomStream, alpha: f64) -> f64 {
    let v = (stream.uniform() - 0.5) * 2.0 * FRAC_PI_2;
    let w = stream.exponential();
    cms_symmetric(alpha, v, w)
}

pub fn sample_frechet(stream: &mut RandomStream, alpha: f64, count: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_count(count)?;
    Ok((0..count).map(|_| draw_frechet(stream, alpha)).collect())
}

pub fn sample_pareto(stream: &mut RandomStream, alpha: f64, count: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_count(count)?;
    Ok((0..count).map(|_| draw_pareto(stream, alpha)).collect())
}

/// Standard symmetric α-stable variates, `0 < α ≤ 2`, in the scale
/// convention where α = 2 has variance 2. Tail tests should use `|X|`.
pub fn sample_sym_stable(stream: &mut RandomStream, alpha: f64, count: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid(format!(
            "stable index must lie in (0, 2], got {alpha}"
        )));
    }
    check_count(count)?;
    Ok((0..count).map(|_| draw_stable(stream, alpha)).collect())
}

pub fn sample_std_normal(stream: &mut RandomStream, count: usize) -> Result<Vec<f64>> {
    check_count(count)?;
    Ok((0..count).map(|_| stream.standard_normal()).collect())
}

/// One factor draw under `law`, symmetrized by a random sign when the law
/// itself is one-sided and `case` is symmetric.
fn draw_factor(stream: &mut RandomStream, law: FactorLaw, case: TailCase, alpha: f64) -> f64 {
    match law {
        FactorLaw::SymmetricStable => draw_stable(stream, alpha),
        FactorLaw::Frechet | FactorLaw::Pareto => {
            let x = if law == FactorLaw::Frechet {
                draw_frechet(stream, alpha)
            } else {
                draw_pareto(stream, alpha)
            };
            match case {
                TailCase::Nonnegative => x,
                TailCase::Symmetric => stream.sign() * x,
            }
        }
    }
}

pub(crate) fn sample_factors(
    stream: &mut RandomStream,
    law: FactorLaw,
    case: TailCase,
    alpha: f64,
    count: usize,
) -> Vec<f64> {
    (0..count).map(|_| draw_factor(stream, law, case, alpha)).collect()
}

/// Parameters of the linear factor model `X = A Z + σ ε`.
#[derive(Clone, Debug)]
pub struct FactorModelSpec {
    /// d×p loading matrix.
    pub loadings: Matrix,
    pub alpha: f64,
    pub sigma: f64,
    pub factor_law: FactorLaw,
    pub case: TailCase,
}

impl FactorModelSpec {
    pub fn new(
        loadings: Matrix,
        alpha: f64,
        sigma: f64,
        factor_law: FactorLaw,
        case: TailCase,
    ) -> Result<Self> {
        let spec = FactorModelSpec {
            loadings,
            alpha,
            sigma,
            factor_law,
            case,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The noiseless nonnegative Fréchet model with the given loadings.
    pub fn frechet(loadings: Matrix, alpha: f64) -> Result<Self> {
        Self::new(loadings, alpha, 0.0, FactorLaw::Frechet, TailCase::Nonnegative)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        validate_loadings(&self.loadings, self.case)?;
        match (self.case, self.factor_law) {
            (TailCase::Nonnegative, FactorLaw::SymmetricStable) => Err(Error::invalid(
                "symmetric stable factors are incompatible with the nonnegative case",
            )),
            (_, FactorLaw::SymmetricStable) if self.alpha > 2.0 => Err(Error::invalid(format!(
                "stable index must lie in (0, 2], got {}",
                self.alpha
            ))),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.loadings.ncols()
    }
}

/// Checks that every column has positive norm and, in the nonnegative case,
/// that all entries are ≥ 0.
pub fn validate_loadings(a: &Matrix, case: TailCase) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("loading matrix must be non-empty"));
    }
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("loading matrix has non-finite entries"));
    }
    for k in 0..a.ncols() {
        if norm(&a.column(k)) <= 0.0 {
            return Err(Error::invalid(format!("loading column {k} is zero")));
        }
    }
    if case == TailCase::Nonnegative && a.as_slice().iter().any(|&x| x < 0.0) {
        return Err(Error::invalid(
            "nonnegative case requires nonnegative loadings",
        ));
    }
    Ok(())
}

/// Observations with the latent quantities that produced them, when known.
#[derive(Clone, Debug)]
pub struct SampleMatrix {
    /// n×d observations.
    pub x: Matrix,
    /// n×p latent factors.
    pub z: Option<Matrix>,
    /// Fréchet noise multipliers, one per row.
    pub eta: Option<Vec<f64>>,
    /// n×d standard normal noise directions.
    pub noise: Option<Matrix>,
}

impl SampleMatrix {
    pub fn observed(x: Matrix) -> Self {
        SampleMatrix {
            x,
            z: None,
            eta: None,
            noise: None,
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Assembles `X = Z Aᵀ + σ (N scaled rowwise by η)` from given parts.
pub fn lfm_from_parts(
    spec: &FactorModelSpec,
    z: Matrix,
    eta: Option<Vec<f64>>,
    noise: Option<Matrix>,
) -> Result<SampleMatrix> {
    let (d, p) = (spec.dim(), spec.n_factors());
    if z.ncols() != p {
        return Err(Error::invalid(format!(
            "factor matrix has {} columns but loadings have {p}",
            z.ncols()
        )));
    }
    let n = z.nrows();
    let mut x = z.matmul(&spec.loadings.transpose())?;
    if spec.sigma > 0.0 {
        let (eta_v, nm) = match (&eta, &noise) {
            (Some(e), Some(m)) if e.len() == n && m.nrows() == n && m.ncols() == d => (e, m),
            _ => {
                return Err(Error::invalid(
                    "noisy model needs eta (n) and noise (n×d) parts",
                ))
            }
        };
        for i in 0..n {
            let scale = spec.sigma * eta_v[i];
            for (xv, nv) in x.row_mut(i).iter_mut().zip(nm.row(i)) {
                *xv += scale * nv;
            }
        }
    }
    Ok(SampleMatrix {
        x,
        z: Some(z),
        eta,
        noise,
    })
}

/// Draws `n` iid rows of the linear factor model. Latent factors are always
/// retained; η and N are retained when σ > 0.
pub fn simulate_lfm(spec: &FactorModelSpec, n: usize, stream: &mut RandomStream) -> Result<SampleMatrix> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let (d, p) = (spec.dim(), spec.n_factors());
    let mut zs = stream.substream_named("factors");
    let z = Matrix::from_vec(
        n,
        p,
        sample_factors(&mut zs, spec.factor_law, spec.case, spec.alpha, n * p),
    )?;
    let (eta, noise) = if spec.sigma > 0.0 {
        let mut es = stream.substream_named("eta");
        let mut ns = stream.substream_named("noise");
        let eta = sample_frechet(&mut es, spec.alpha, n)?;
        let noise = Matrix::from_vec(n, d, sample_std_normal(&mut ns, n * d)?)?;
        (Some(eta), Some(noise))
    } else {
        (None, None)
    };
    // Advance the caller's stream so repeated calls produce fresh samples.
    let _ = stream.next_u64();
    lfm_from_parts(spec, z, eta, noise)
}

/// Banded loading matrix of the lag embedding: row `r` holds the
/// coefficients shifted right by `r`, so `(Y_t, …, Y_{t-D+1}) = A (Z_t, …)`.
pub fn ma_loading_matrix(coeffs: &[f64], embed_dim: usize) -> Result<Matrix> {
    if coeffs.is_empty() {
        return Err(Error::invalid("moving-average coefficients must be non-empty"));
    }
    if embed_dim < 2 {
        return Err(Error::invalid("embedding dimension must be at least 2"));
    }
    let p = coeffs.len() + embed_dim - 1;
    let mut a = Matrix::zeros(embed_dim, p);
    for r in 0..embed_dim {
        for (k, &c) in coeffs.iter().enumerate() {
            a[(r, r + k)] = c;
        }
    }
    Ok(a)
}

/// Simulates `Y_t = Σ_k c_k Z_{t-k}` with symmetric α-stable innovations and
/// returns the overlapping lag vectors `(Y_t, …, Y_{t-D+1})` as rows. The
/// latent matrix holds `(Z_t, …, Z_{t-p+1})` for each row.
pub fn simulate_ma_embedding(
    coeffs: &[f64],
    alpha: f64,
    n: usize,
    embed_dim: usize,
    stream: &mut RandomStream,
) -> Result<SampleMatrix> {
    let a = ma_loading_matrix(coeffs, embed_dim)?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let p = a.ncols();
    let mut zs = stream.substream_named("innovations");
    // innovations[s] = Z_{s - (p - 1)}; row t uses Z_t … Z_{t-p+1}.
    let innovations = sample_sym_stable(&mut zs, alpha, n + p - 1)?;
    let z = Matrix::from_fn(n, p, |t, m| innovations[t + p - 1 - m]);
    let _ = stream.next_u64();
    let spec = FactorModelSpec::new(a, alpha, 0.0, FactorLaw::SymmetricStable, TailCase::Symmetric)?;
    lfm_from_parts(&spec, z, None, None)
}
