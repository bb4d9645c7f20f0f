//! Optimal one-to-one matching of estimated atoms to reference atoms.

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

/// Minimum-cost assignment of every row to a distinct column
/// (Hungarian algorithm with potentials, O(r²c)). Requires rows ≤ cols.
/// Returns the column assigned to each row.
pub fn assign_min_cost(cost: &Matrix) -> Result<Vec<usize>> {
    let (rows, cols) = (cost.nrows(), cost.ncols());
    if rows > cols {
        return Err(Error::invalid(format!(
            "assignment needs rows <= cols, got {rows}x{cols}"
        )));
    }
    if cost.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("assignment costs must be finite"));
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    Ok(out)
}

/// Result of matching estimated rows to reference rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    /// `permutation[j]` is the estimated row matched to reference row `j`.
    pub permutation: Vec<usize>,
    /// Frobenius norm of the matched difference matrix.
    pub cost: f64,
}

/// Permutation of the estimated rows minimizing `Σ_j ‖est_{π(j)} − truth_j‖²`.
pub fn best_matching(estimated: &Matrix, truth: &Matrix) -> Result<Matching> {
    if estimated.nrows() != truth.nrows() || estimated.ncols() != truth.ncols() {
        return Err(Error::invalid(format!(
            "cannot match {}x{} estimate against {}x{} reference",
            estimated.nrows(),
            estimated.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    match_subset(estimated, truth)
}

/// Matches every reference row to a distinct estimated row when there are
/// at least as many estimates; unmatched estimates are ignored.
pub fn match_subset(estimated: &Matrix, truth: &Matrix) -> Result<Matching> {
    if estimated.ncols() != truth.ncols() {
        return Err(Error::invalid("dimension mismatch between estimate and reference"));
    }
    let cost = Matrix::from_fn(truth.nrows(), estimated.nrows(), |j, i| {
        sq_dist(truth.row(j), estimated.row(i))
    });
    let permutation = assign_min_cost(&cost)?;
    let total: f64 = permutation.iter().enumerate().map(|(j, &i)| cost[(j, i)]).sum();
    Ok(Matching {
        permutation,
        cost: total.sqrt(),
    })
}
