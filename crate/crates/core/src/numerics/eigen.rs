//! Symmetric eigensolvers.
//!
//! [`sym_eigen`] is cyclic Jacobi: slow for large matrices but accurate and
//! simple. [`sym_eigen_tridiagonal`] reduces to tridiagonal form with
//! Householder reflections and finishes with the implicit QL iteration; it is
//! the workhorse for Laplacians with hundreds of nodes.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EigenMethod {
    Jacobi,
    #[default]
    Householder,
}

impl std::str::FromStr for EigenMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(EigenMethod::Jacobi),
            "householder" | "ql" => Ok(EigenMethod::Householder),
            other => Err(Error::invalid(format!("unknown eigensolver '{other}'"))),
        }
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as the
/// columns of `eigenvectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Builds from eigenvalues and eigenvectors stored as rows, sorting
    /// ascending (stable, so equal eigenvalues keep their relative order).
    fn from_rows(values: Vec<f64>, vec_rows: Matrix) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvalues = order.iter().map(|&i| values[i]).collect();
        let eigenvectors = Matrix::from_fn(n, n, |r, c| vec_rows[(order[c], r)]);
        EigenDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }
}

fn symmetrized(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = m.frobenius_norm().max(1.0);
    if m.max_asymmetry() > SYMMETRY_TOL * scale {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let n = m.nrows();
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

pub fn sym_eigen_with(m: &Matrix, method: EigenMethod) -> Result<EigenDecomposition> {
    match method {
        EigenMethod::Jacobi => sym_eigen(m),
        EigenMethod::Householder => sym_eigen_tridiagonal(m),
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius mass drops below
/// `1e-12 · ‖M‖_F`; gives up after 100 sweeps.
pub fn sym_eigen(m: &Matrix) -> Result<EigenDecomposition> {
    let mut a = symmetrized(m)?;
    let n = a.nrows();
    let target = JACOBI_REL_TOL * a.frobenius_norm();
    // Eigenvectors accumulate as rows: vt[p] is the p-th column of V.
    let mut vt = Matrix::identity(n);

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= target {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NumericalFailure {
                message: format!("Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"),
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    a[(k, p)] = np;
                    a[(p, k)] = np;
                    a[(k, q)] = nq;
                    a[(q, k)] = nq;
                }
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)]).collect();
    Ok(EigenDecomposition::from_rows(values, vt))
}

/// rows (p, q) ← (c·p − s·q, s·p + c·q)
#[inline]
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.ncols();
    let (lo, hi) = (p.min(q), p.max(q));
    let (rlo, rhi) = two_rows_mut(m, lo, hi, cols);
    let (rp, rq) = if p < q { (rlo, rhi) } else { (rhi, rlo) };
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Disjoint mutable borrows of rows `lo < hi`.
fn two_rows_mut(m: &mut Matrix, lo: usize, hi: usize, cols: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(lo < hi);
    let buf = m.buffer_mut();
    let (a, b) = buf.split_at_mut(hi * cols);
    (&mut a[lo * cols..(lo + 1) * cols], &mut b[..cols])
}

/// Householder tridiagonalization of a symmetric matrix. Returns the
/// diagonal, the subdiagonal (`off[k] = T[k+1][k]`, last entry 0), and the
/// reflectors `(v, β)` for rows/columns `k+1..n`.
fn tridiagonalize(mut a: Matrix) -> (Vec<f64>, Vec<f64>, Vec<(Vec<f64>, f64)>) {
    let n = a.nrows();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        diag[k] = a[(k, k)];
        let m = n - k - 1;
        let x = a.row(k)[k + 1..].to_vec();
        if m == 1 {
            off[k] = x[0];
            continue;
        }
        let tail: f64 = x[1..].iter().map(|v| v * v).sum();
        if tail == 0.0 {
            off[k] = x[0];
            reflectors.push((Vec::new(), 0.0));
            continue;
        }
        let xnorm = (x[0] * x[0] + tail).sqrt();
        let alpha = if x[0] > 0.0 { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        let beta = 2.0 / vtv;
        off[k] = alpha;

        // p = β A22 v, using the symmetric trailing block.
        let base = k + 1;
        for (r, pr) in p[..m].iter_mut().enumerate() {
            let row = &a.row(base + r)[base..];
            *pr = beta * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        let kk = 0.5 * beta * p[..m].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        for r in 0..m {
            p[r] -= kk * v[r];
        }
        // A22 ← A22 − v wᵀ − w vᵀ
        for r in 0..m {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut a.row_mut(base + r)[base..];
            for ((cell, &vc), &wc) in row.iter_mut().zip(&v).zip(&p[..m]) {
                *cell -= vr * wc + wr * vc;
            }
        }
        reflectors.push((v, beta));
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1, n - 1)];
    }
    (diag, off, reflectors)
}

/// Qᵀ where Q = H_0 H_1 ⋯ H_{n-3}, assembled by backward accumulation.
fn accumulate_qt(n: usize, reflectors: &[(Vec<f64>, f64)]) -> Matrix {
    let mut q = Matrix::identity(n);
    let mut u = vec![0.0; n];
    for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
        if *beta == 0.0 {
            continue;
        }
        let base = k + 1;
        // Q ← H_k Q, touching rows/cols base..n only.
        u[base..].iter_mut().for_each(|x| *x = 0.0);
        for (r, &vr) in v.iter().enumerate() {
            let row = &q.row(base + r)[base..];
            for (uc, &qc) in u[base..].iter_mut().zip(row) {
                *uc += vr * qc;
            }
        }
        for (r, &vr) in v.iter().enumerate() {
            let f = beta * vr;
            let row = &mut q.row_mut(base + r)[base..];
            for (qc, &uc) in row.iter_mut().zip(&u[base..]) {
                *qc -= f * uc;
            }
        }
    }
    q.transpose()
}

/// Implicit QL on a symmetric tridiagonal matrix (EISPACK tql2). `e[i]` is
/// the subdiagonal entry `T[i+1][i]`. Rotations are applied to the rows of
/// `zt` when given.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NumericalFailure {
                        message: "tridiagonal QL did not converge".into(),
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        // columns (i, i+1) of Z are rows of Zᵀ
                        rotate_pair(z, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// (z_i, z_{i+1}) ← (c z_i − s z_{i+1}, s z_i + c z_{i+1}) on rows of `zt`.
#[inline]
fn rotate_pair(zt: &mut Matrix, i: usize, c: f64, s: f64) {
    let cols = zt.ncols();
    let (ri, rj) = two_rows_mut(zt, i, i + 1, cols);
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

/// Full symmetric eigendecomposition by Householder tridiagonalization and
/// implicit QL.
pub fn sym_eigen_tridiagonal(m: &Matrix) -> Result<EigenDecomposition> {
    let a = symmetrized(m)?;
    let n = a.nrows();
    let (mut d, mut e, refl) = tridiagonalize(a);
    let mut zt = accumulate_qt(n, &refl);
    tridiagonal_ql(&mut d, &mut e, Some(&mut zt))?;
    Ok(EigenDecomposition::from_rows(d, zt))
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let a = symmetrized(m)?;
    let (mut d, mut e, _) = tridiagonalize(a);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}
