//! Radial thresholding and angular parts of the extremes.

use crate::error::{Error, Result};
use crate::matrix::{dist, norm, Matrix};
use crate::variates::SampleMatrix;

/// Observations whose Euclidean radius exceeds a threshold, with their
/// projections onto the unit sphere.
#[derive(Clone, Debug)]
pub struct ExtremalSample {
    pub threshold: f64,
    /// Row indices into the original sample, ascending.
    pub indices: Vec<usize>,
    pub radii: Vec<f64>,
    /// N×d unit vectors.
    pub angles: Matrix,
    /// Size of the original sample.
    pub n: usize,
}

impl ExtremalSample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.angles.ncols()
    }

    /// Wraps points that already live on the sphere (e.g. test fixtures).
    pub fn from_angles(angles: Matrix) -> Result<Self> {
        let mut out = Matrix::zeros(angles.nrows(), angles.ncols());
        for i in 0..angles.nrows() {
            let r = norm(angles.row(i));
            if r <= 0.0 {
                return Err(Error::DegenerateSample(format!("row {i} has zero norm")));
            }
            for (o, v) in out.row_mut(i).iter_mut().zip(angles.row(i)) {
                *o = v / r;
            }
        }
        let n = out.nrows();
        Ok(ExtremalSample {
            threshold: 0.0,
            indices: (0..n).collect(),
            radii: vec![1.0; n],
            angles: out,
            n,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionRule {
    /// Keep radii strictly above the β empirical quantile.
    Quantile(f64),
    /// Keep the `N` largest radii.
    TopCount(usize),
    /// Keep radii strictly above a fixed level `u`.
    Threshold(f64),
}

/// Marginal standardization `Y_ij = 1 / (1 - rank_ij / (n + 1))`.
///
/// Ranks run from 1 to n within each column, ties broken by row order, so
/// every output column is a permutation of `{(n+1)/n, …, n+1}`.
pub fn marginal_rank_transform(x: &Matrix) -> Result<Matrix> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::invalid("rank transform needs at least 2 rows"));
    }
    let mut out = Matrix::zeros(n, d);
    let mut order: Vec<usize> = (0..n).collect();
    let np1 = (n + 1) as f64;
    for j in 0..d {
        order.sort_by(|&a, &b| x[(a, j)].total_cmp(&x[(b, j)]).then(a.cmp(&b)));
        for (rank0, &i) in order.iter().enumerate() {
            let rank = (rank0 + 1) as f64;
            out[(i, j)] = np1 / (np1 - rank);
        }
    }
    Ok(out)
}

/// `⌈βn⌉`, robust to β·n landing a hair above an integer in floating point.
fn ceil_index(beta: f64, n: usize) -> usize {
    let t = beta * n as f64;
    let r = t.round();
    if (t - r).abs() <= 1e-9 * (n as f64).max(1.0) {
        r as usize
    } else {
        t.ceil() as usize
    }
}

/// Number of extremes the quantile rule keeps from `n` distinct radii.
pub fn quantile_count(beta: f64, n: usize) -> usize {
    n - ceil_index(beta, n).min(n)
}

/// Selects the extremal part of the sample by radius.
///
/// Zero-radius rows are dropped first. Under the quantile rule the
/// threshold is the order statistic at position `⌈βn⌉` (1-based, ascending);
/// under the top-count rule it is the (N+1)-th largest radius. Retained rows
/// strictly exceed the threshold, which may leave the sample empty under
/// the fixed-level rule; on ties the lower original indices are kept
/// and the set is truncated to the requested count.
pub fn select_extremes(x: &Matrix, rule: SelectionRule) -> Result<ExtremalSample> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("need at least 2 rows to select extremes"));
    }
    let radii: Vec<f64> = x.rows().map(norm).collect();
    let mut live: Vec<usize> = (0..n).filter(|&i| radii[i] > 0.0).collect();
    if live.is_empty() {
        return Err(Error::DegenerateSample("all radii are zero".into()));
    }
    // Ascending by radius, larger index first on ties so that the tail end
    // lists the lowest index first among equals.
    live.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(b.cmp(&a)));
    let m = live.len();

    let (threshold, wanted) = match rule {
        SelectionRule::Quantile(beta) => {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid(format!("quantile must lie in [0, 1), got {beta}")));
            }
            let pos = ceil_index(beta, m);
            let u = if pos == 0 { 0.0 } else { radii[live[pos - 1]] };
            (u, m - pos)
        }
        SelectionRule::TopCount(k) => {
            if k == 0 || k >= n {
                return Err(Error::invalid(format!(
                    "top count must satisfy 1 <= N < n = {n}, got {k}"
                )));
            }
            if k >= m {
                return Err(Error::DegenerateSample(format!(
                    "only {m} nonzero radii, cannot keep {k}"
                )));
            }
            (radii[live[m - k - 1]], k)
        }
        SelectionRule::Threshold(u) => {
            if !(u >= 0.0) || !u.is_finite() {
                return Err(Error::invalid(format!("threshold must be finite and nonnegative, got {u}")));
            }
            (u, m)
        }
    };

    let mut kept: Vec<usize> = live
        .iter()
        .rev()
        .copied()
        .filter(|&i| radii[i] > threshold)
        .take(wanted)
        .collect();
    kept.sort_unstable();

    let d = x.ncols();
    let mut angles = Matrix::zeros(kept.len(), d);
    for (r, &i) in kept.iter().enumerate() {
        let rad = radii[i];
        for (a, v) in angles.row_mut(r).iter_mut().zip(x.row(i)) {
            *a = v / rad;
        }
    }
    Ok(ExtremalSample {
        threshold,
        radii: kept.iter().map(|&i| radii[i]).collect(),
        indices: kept,
        angles,
        n,
    })
}

/// Open interval of admissible exponents γ for `u_n = n^γ`:
/// `((α+2)/(α(α+3)), 1/α)`.
pub fn threshold_exponent_interval(alpha: f64) -> (f64, f64) {
    ((alpha + 2.0) / (alpha * (alpha + 3.0)), 1.0 / alpha)
}

/// Midpoint of [`threshold_exponent_interval`].
pub fn default_threshold_exponent(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("tail index must be positive, got {alpha}")));
    }
    let (lo, hi) = threshold_exponent_interval(alpha);
    Ok(0.5 * (lo + hi))
}

/// `h_n = u_n^{(α-1)/4} n^{(2-α)/(4α)}`.
pub fn h_sequence(n: usize, u_n: f64, alpha: f64) -> Result<f64> {
    if !(u_n > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {u_n}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("tail index must be positive, got {alpha}")));
    }
    let n = n as f64;
    Ok(u_n.powf((alpha - 1.0) / 4.0) * n.powf((2.0 - alpha) / (4.0 * alpha)))
}

/// `a* = √d · max |a_mj|`.
pub fn a_star(loadings: &Matrix) -> f64 {
    let max = loadings.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (loadings.nrows() as f64).sqrt() * max
}

/// Which latent factor produced each extreme.
#[derive(Clone, Debug)]
pub struct FactorAttribution {
    /// Factor index when exactly one `|Z_ij|` exceeds `u_n / a*`.
    pub labels: Vec<Option<usize>>,
    /// Sign of the attributing factor (always +1 for nonnegative factors).
    pub signs: Vec<f64>,
    /// True iff no extreme has two or more factors with `|Z_ij| > h_n`.
    pub b_n: bool,
    /// Extremes that individually violate the at-most-one condition.
    pub multi_exceedances: usize,
}

pub fn factor_attribution(
    sample: &SampleMatrix,
    extremes: &ExtremalSample,
    h_n: f64,
    a_star: f64,
) -> Result<FactorAttribution> {
    let z = sample.z.as_ref().ok_or(Error::MissingLatents)?;
    if !(a_star > 0.0) {
        return Err(Error::invalid("a* must be positive"));
    }
    let cut = extremes.threshold / a_star;
    let mut labels = Vec::with_capacity(extremes.len());
    let mut signs = Vec::with_capacity(extremes.len());
    let mut multi = 0;
    for &i in &extremes.indices {
        let row = z.row(i);
        let mut hit = None;
        let mut hits = 0;
        let mut over_h = 0;
        for (j, &v) in row.iter().enumerate() {
            if v.abs() > cut {
                hits += 1;
                hit = Some(j);
            }
            if v.abs() > h_n {
                over_h += 1;
            }
        }
        if over_h >= 2 {
            multi += 1;
        }
        let label = if hits == 1 { hit } else { None };
        signs.push(label.map_or(1.0, |j| row[j].signum()));
        labels.push(label);
    }
    Ok(FactorAttribution {
        labels,
        signs,
        b_n: multi == 0,
        multi_exceedances: multi,
    })
}

/// Radius around the atom `c_j` within which extremes attributed to factor
/// `j` must fall on the event B_n: `8 (a*)² / ‖a^{(j)}‖^α · h_n / u_n`.
pub fn near_center_bound(a_star: f64, column_norm: f64, alpha: f64, h_n: f64, u_n: f64) -> f64 {
    8.0 * a_star * a_star / column_norm.powf(alpha) * h_n / u_n
}

/// Counts attributed extremes lying farther from their (signed) atom than
/// [`near_center_bound`]. Returns `(violations, checked)`.
pub fn near_center_violations(
    extremes: &ExtremalSample,
    attribution: &FactorAttribution,
    loadings: &Matrix,
    alpha: f64,
    h_n: f64,
) -> (usize, usize) {
    let astar = a_star(loadings);
    let mut violations = 0;
    let mut checked = 0;
    for (r, label) in attribution.labels.iter().enumerate() {
        let Some(j) = *label else { continue };
        let col = loadings.column(j);
        let cn = norm(&col);
        let sign = attribution.signs[r];
        let center: Vec<f64> = col.iter().map(|v| sign * v / cn).collect();
        let bound = near_center_bound(astar, cn, alpha, h_n, extremes.threshold);
        checked += 1;
        if dist(extremes.angles.row(r), &center) > bound {
            violations += 1;
        }
    }
    (violations, checked)
}
