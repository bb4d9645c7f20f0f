//! Angular measures of factor models, the limit law of angular deviations
//! near an atom, and error metrics against a known measure.

use std::io::Write;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::numerics::matching::{best_matching, match_subset, Matching};
use crate::rng::RandomStream;
use crate::variates::{ma_loading_matrix, pareto_quantile, sample_factors, validate_loadings, FactorLaw, SampleMatrix, TailCase};

/// Atoms closer than this are merged.
pub const ATOM_MERGE_TOL: f64 = 1e-10;

/// A discrete angular measure, optionally mixed with a uniform component.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularMeasure {
    /// One unit vector per row.
    pub atoms: Matrix,
    pub masses: Vec<f64>,
    /// Mass of the uniform component; 0 for a noiseless model.
    pub continuous_mass: f64,
}

impl AngularMeasure {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.continuous_mass
    }
}

/// Column norms raised to α, and their sum `w`.
fn weighted_column_norms(a: &Matrix, alpha: f64) -> Result<(Vec<f64>, f64)> {
    let norms: Vec<f64> = (0..a.ncols()).map(|k| norm(&a.column(k))).collect();
    if let Some(k) = norms.iter().position(|&r| r == 0.0) {
        return Err(Error::invalid(format!("loading column {k} is zero")));
    }
    let pw: Vec<f64> = norms.iter().map(|r| r.powf(alpha)).collect();
    let w = pw.iter().sum();
    Ok((norms, w))
}

fn push_atom(atoms: &mut Vec<Vec<f64>>, masses: &mut Vec<f64>, c: Vec<f64>, mass: f64) {
    let hit = atoms
        .iter()
        .position(|a| a.iter().zip(&c).all(|(x, y)| (x - y).abs() <= ATOM_MERGE_TOL));
    match hit {
        Some(i) => masses[i] += mass,
        None => {
            atoms.push(c);
            masses.push(mass);
        }
    }
}

fn discrete_measure(a: &Matrix, alpha: f64, case: TailCase, extra_weight: f64) -> Result<AngularMeasure> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("tail index must be positive, got {alpha}")));
    }
    validate_loadings(a, case)?;
    let (norms, w_signal) = weighted_column_norms(a, alpha)?;
    let w = w_signal + extra_weight;
    let mut atoms = Vec::new();
    let mut masses = Vec::new();
    for (k, &r) in norms.iter().enumerate() {
        let c: Vec<f64> = a.column(k).iter().map(|v| v / r).collect();
        let mass = r.powf(alpha) / w;
        match case {
            TailCase::Nonnegative => push_atom(&mut atoms, &mut masses, c, mass),
            TailCase::Symmetric => {
                let neg = c.iter().map(|v| -v).collect();
                push_atom(&mut atoms, &mut masses, c, mass / 2.0);
                push_atom(&mut atoms, &mut masses, neg, mass / 2.0);
            }
        }
    }
    Ok(AngularMeasure {
        atoms: Matrix::from_rows(&atoms)?,
        masses,
        continuous_mass: extra_weight / w,
    })
}

/// Angular measure of `X = A Z`: atoms `a^(k)/‖a^(k)‖` with mass
/// `‖a^(k)‖^α / Σ_l ‖a^(l)‖^α`, split evenly over `±` in the symmetric case.
pub fn lfm_angular_measure(a: &Matrix, alpha: f64, case: TailCase) -> Result<AngularMeasure> {
    discrete_measure(a, alpha, case, 0.0)
}

/// `Σ_k ‖a^(k)‖^α`.
pub fn lfm_weight(a: &Matrix, alpha: f64) -> Result<f64> {
    Ok(weighted_column_norms(a, alpha)?.1)
}

/// Angular measure of `X = A Z + σ N η` with α = 1 and N standard normal in
/// the observation dimension: the noise contributes a uniform component of
/// mass `σ E‖N‖ / w`.
pub fn noisy_lfm_angular_measure(a: &Matrix, alpha: f64, sigma: f64) -> Result<AngularMeasure> {
    if alpha != 1.0 {
        return Err(Error::invalid("the noisy factor model measure is defined for alpha = 1 only"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let extra = sigma * expected_normal_norm(a.nrows())?;
    discrete_measure(a, alpha, TailCase::Nonnegative, extra)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `E‖N‖ = √2 Γ((d+1)/2) / Γ(d/2)` for N standard normal in dimension d.
pub fn expected_normal_norm(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let d = d as f64;
    Ok(std::f64::consts::SQRT_2 * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp())
}

/// Angular measure of the lag embedding of a moving average with symmetric
/// innovations.
pub fn ma_angular_measure(coeffs: &[f64], alpha: f64, embed_dim: usize) -> Result<AngularMeasure> {
    let a = ma_loading_matrix(coeffs, embed_dim)?;
    lfm_angular_measure(&a, alpha, TailCase::Symmetric)
}

fn check_factor_index(a: &Matrix, j: usize) -> Result<()> {
    if j >= a.ncols() {
        Err(Error::invalid(format!(
            "factor index {j} out of range for {} factors",
            a.ncols()
        )))
    } else {
        Ok(())
    }
}

/// Deviation `S*` of the limit law given a vector `x_rest = Σ_{m≠j} a^(m) Z_m`:
/// `S*_l = ‖a^(j)‖² x_l − a_{lj} ⟨a^(j), x⟩`.
fn limit_deviation(aj: &[f64], x_rest: &[f64]) -> Vec<f64> {
    let nj2 = dot(aj, aj);
    let proj = dot(aj, x_rest);
    x_rest.iter().zip(aj).map(|(x, a)| nj2 * x - a * proj).collect()
}

/// Draws from the weak limit of `u_n (X/‖X‖ − c_j)` given that factor `j`
/// (0-based) caused the extreme: `S* / (‖a^(j)‖² W)` with `W` Pareto(α) and
/// the remaining factors drawn from `law`.
pub fn limit_deviation_sampler(
    a: &Matrix,
    alpha: f64,
    j: usize,
    law: FactorLaw,
    count: usize,
    stream: &mut RandomStream,
) -> Result<Matrix> {
    check_factor_index(a, j)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("tail index must be positive, got {alpha}")));
    }
    let case = match law {
        FactorLaw::SymmetricStable => TailCase::Symmetric,
        _ => TailCase::Nonnegative,
    };
    let (d, p) = (a.nrows(), a.ncols());
    let aj = a.column(j);
    let nj2 = dot(&aj, &aj);
    if nj2 == 0.0 {
        return Err(Error::invalid(format!("loading column {j} is zero")));
    }
    let mut out = Matrix::zeros(count, d);
    let mut x_rest = vec![0.0; d];
    for r in 0..count {
        let w = pareto_quantile(stream.uniform(), alpha);
        let z = sample_factors(stream, law, case, alpha, p);
        x_rest.iter_mut().for_each(|v| *v = 0.0);
        for (m, zm) in z.iter().enumerate().filter(|(m, _)| *m != j) {
            for (l, x) in x_rest.iter_mut().enumerate() {
                *x += a[(l, m)] * zm;
            }
        }
        let s = limit_deviation(&aj, &x_rest);
        for (o, v) in out.row_mut(r).iter_mut().zip(s) {
            *o = v / (nj2 * w);
        }
    }
    Ok(out)
}

/// `max_r |Σ_l a_{lj} S_{r,l}|` over the rows of a deviation sample.
pub fn max_linear_constraint(a: &Matrix, j: usize, deviations: &Matrix) -> Result<f64> {
    check_factor_index(a, j)?;
    let aj = a.column(j);
    Ok(deviations.rows().map(|r| dot(&aj, r).abs()).fold(0.0, f64::max))
}

/// `u_n (X_i/‖X_i‖ − c_j)` over the rows with `‖X_i‖ > u_n` and
/// `Z_{ij} > u_n / w^{1/α}`. May be empty.
pub fn empirical_deviation_sample(
    sample: &SampleMatrix,
    a: &Matrix,
    alpha: f64,
    u_n: f64,
    j: usize,
) -> Result<Matrix> {
    check_factor_index(a, j)?;
    if !(u_n > 0.0) || !u_n.is_finite() {
        return Err(Error::invalid(format!("threshold must be positive, got {u_n}")));
    }
    let z = sample.z.as_ref().ok_or(Error::MissingLatents)?;
    if z.ncols() != a.ncols() || sample.dim() != a.nrows() {
        return Err(Error::invalid("sample shape does not match the loading matrix"));
    }
    let w = lfm_weight(a, alpha)?;
    let z_cut = u_n / w.powf(1.0 / alpha);
    let aj = a.column(j);
    let nj = norm(&aj);
    let mut rows = Vec::new();
    for i in 0..sample.n() {
        let x = sample.x.row(i);
        let r = norm(x);
        if r > u_n && z[(i, j)] > z_cut {
            rows.push(x.iter().zip(&aj).map(|(xv, av)| u_n * (xv / r - av / nj)).collect::<Vec<_>>());
        }
    }
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, a.nrows()));
    }
    Matrix::from_rows(&rows)
}

/// Signal fraction `Σ‖a^(k)‖ / (Σ‖a^(k)‖ + σ E‖N‖)` of the α = 1 noisy model.
pub fn snr(a: &Matrix, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let (_, w) = weighted_column_norms(a, 1.0)?;
    Ok(w / (w + sigma * expected_normal_norm(a.nrows())?))
}

/// Effective sample size `SNR · N_n`, rounded to the nearest integer.
pub fn ess(snr: f64, n_extremes: usize) -> u64 {
    (snr * n_extremes as f64).round() as u64
}

/// How to compare atom sets of different sizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AtomCountPolicy {
    /// Sizes must agree.
    #[default]
    Strict,
    /// Match the smaller set into the larger and ignore the rest.
    Truncate,
}

/// Matching between estimated atoms and a reference set. When the estimate
/// has fewer atoms under [`AtomCountPolicy::Truncate`], `permutation[i]` is
/// the reference row matched to estimate `i` instead.
pub fn match_atoms(estimated: &Matrix, truth: &Matrix, policy: AtomCountPolicy) -> Result<Matching> {
    match policy {
        AtomCountPolicy::Strict => best_matching(estimated, truth),
        AtomCountPolicy::Truncate if estimated.nrows() >= truth.nrows() => match_subset(estimated, truth),
        AtomCountPolicy::Truncate => match_subset(truth, estimated),
    }
}

/// Frobenius norm of the difference between estimated atoms and the
/// reference atoms under the best matching.
pub fn center_error(estimated: &Matrix, truth: &AngularMeasure, policy: AtomCountPolicy) -> Result<f64> {
    Ok(match_atoms(estimated, &truth.atoms, policy)?.cost)
}

/// Largest absolute mass difference under the best atom matching.
pub fn mass_error(
    estimated_atoms: &Matrix,
    estimated_masses: &[f64],
    truth: &AngularMeasure,
) -> Result<f64> {
    let m = best_matching(estimated_atoms, &truth.atoms)?;
    Ok(m
        .permutation
        .iter()
        .zip(&truth.masses)
        .map(|(&i, t)| (estimated_masses[i] - t).abs())
        .fold(0.0, f64::max))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS statistic needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("KS statistic needs finite values"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut k, mut best) = (0, 0, 0.0f64);
    while i < a.len() && k < b.len() {
        let t = a[i].min(b[k]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while k < b.len() && b[k] <= t {
            k += 1;
        }
        best = best.max((i as f64 / na - k as f64 / nb).abs());
    }
    Ok(best)
}

/// Per-coordinate KS statistics between the rows of two samples.
pub fn ks_per_coordinate(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid("samples have different dimensions"));
    }
    (0..a.ncols()).map(|c| ks_two_sample(&a.column(c), &b.column(c))).collect()
}

/// CSV with header `atom_index,c1..cd,mass` and a trailing `continuous` row.
pub fn write_measure_csv<W: Write>(out: W, measure: &AngularMeasure) -> Result<()> {
    let d = measure.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["atom_index".to_string()];
    header.extend((1..=d).map(|i| format!("c{i}")));
    header.push("mass".into());
    let wrap = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    w.write_record(&header).map_err(wrap)?;
    for (k, mass) in measure.masses.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(measure.atoms.row(k).iter().map(|v| v.to_string()));
        rec.push(mass.to_string());
        w.write_record(&rec).map_err(wrap)?;
    }
    let mut rec = vec!["continuous".to_string()];
    rec.extend(std::iter::repeat_n(String::new(), d));
    rec.push(measure.continuous_mass.to_string());
    w.write_record(&rec).map_err(wrap)?;
    w.flush().map_err(|e| Error::invalid(format!("csv flush failed: {e}")))?;
    Ok(())
}
