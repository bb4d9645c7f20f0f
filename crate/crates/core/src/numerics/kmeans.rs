//! Lloyd's k-means with k-means++ seeding and a single-point transfer
//! refinement, and the spherical variant (Lloyd only).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, sq_dist, Matrix};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig {
            k,
            restarts: 10,
            tol: 1e-8,
            max_iter: 300,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// K×m centroids (unit rows for the spherical variant).
    pub centroids: Matrix,
    /// Sum of squared Euclidean distances to assigned centroids.
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Euclidean,
    Spherical,
}

fn validate(points: &Matrix, cfg: &KMeansConfig) -> Result<()> {
    let n = points.nrows();
    if cfg.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if cfg.k > n {
        return Err(Error::invalid(format!("k = {} exceeds point count {n}", cfg.k)));
    }
    if cfg.restarts == 0 || cfg.max_iter == 0 {
        return Err(Error::invalid("restarts and max_iter must be positive"));
    }
    Ok(())
}

/// Best of `cfg.restarts` k-means++ initialised Lloyd runs.
pub fn kmeans(points: &Matrix, cfg: &KMeansConfig, stream: &mut RandomStream) -> Result<KMeansResult> {
    validate(points, cfg)?;
    Ok(run_restarts(points, cfg, stream, Flavor::Euclidean))
}

/// k-means on the unit sphere: assignment by cosine similarity, centroids
/// are normalized cluster sums. Input rows must be unit vectors.
pub fn spherical_kmeans(
    points: &Matrix,
    cfg: &KMeansConfig,
    stream: &mut RandomStream,
) -> Result<KMeansResult> {
    validate(points, cfg)?;
    if points.rows().any(|r| (norm(r) - 1.0).abs() > 1e-9) {
        return Err(Error::invalid("spherical k-means needs unit-norm rows"));
    }
    Ok(run_restarts(points, cfg, stream, Flavor::Spherical))
}

fn run_restarts(
    points: &Matrix,
    cfg: &KMeansConfig,
    stream: &mut RandomStream,
    flavor: Flavor,
) -> KMeansResult {
    let base = stream.clone();
    let _ = stream.next_u64();
    let runs: Vec<KMeansResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut s = base.substream(r as u64);
            let mut res = lloyd(points, cfg, &mut s, flavor);
            res.restart = r;
            res
        })
        .collect();
    runs.into_iter()
        .min_by(|a, b| a.inertia.total_cmp(&b.inertia).then(a.restart.cmp(&b.restart)))
        .expect("at least one restart")
}

/// k-means++ seeding: first centre uniform, the rest with probability
/// proportional to squared distance to the nearest chosen centre.
fn seed_plus_plus(points: &Matrix, k: usize, stream: &mut RandomStream) -> Matrix {
    let n = points.nrows();
    let mut centroids = Matrix::zeros(k, points.ncols());
    let first = stream.index(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points.rows().map(|p| sq_dist(p, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = stream.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc >= target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            stream.index(n)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, p) in points.rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

/// Nearest centroid (lowest index on ties) and its squared distance.
#[inline]
fn nearest(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().enumerate() {
        let d = sq_dist(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Most similar unit centroid (lowest index on ties) and the similarity.
#[inline]
fn most_similar(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, row) in centroids.rows().enumerate() {
        let s = dot(p, row);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

fn assign(points: &Matrix, centroids: &Matrix, labels: &mut [usize], cost: &mut [f64], flavor: Flavor) -> f64 {
    let mut total = 0.0;
    for (i, p) in points.rows().enumerate() {
        let (c, v) = match flavor {
            Flavor::Euclidean => nearest(p, centroids),
            Flavor::Spherical => {
                let (c, s) = most_similar(p, centroids);
                // ‖p − c‖² = 2 − 2 cos for unit vectors
                (c, (2.0 - 2.0 * s).max(0.0))
            }
        };
        labels[i] = c;
        cost[i] = v;
        total += v;
    }
    total
}

fn lloyd(points: &Matrix, cfg: &KMeansConfig, stream: &mut RandomStream, flavor: Flavor) -> KMeansResult {
    let (n, dim, k) = (points.nrows(), points.ncols(), cfg.k);
    let mut centroids = seed_plus_plus(points, k, stream);
    let mut labels = vec![0; n];
    let mut cost = vec![0.0; n];
    let mut trace = Vec::new();

    for _ in 0..cfg.max_iter {
        trace.push(assign(points, &centroids, &mut labels, &mut cost, flavor));

        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, p) in points.rows().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next = Matrix::zeros(k, dim);
        let mut degenerate = Vec::new();
        for c in 0..k {
            let row = sums.row(c).to_vec();
            let out = next.row_mut(c);
            match flavor {
                Flavor::Euclidean if counts[c] > 0 => {
                    for (o, s) in out.iter_mut().zip(&row) {
                        *o = s / counts[c] as f64;
                    }
                }
                Flavor::Spherical if counts[c] > 0 && norm(&row) > 1e-12 => {
                    let r = norm(&row);
                    for (o, s) in out.iter_mut().zip(&row) {
                        *o = s / r;
                    }
                }
                _ => degenerate.push(c),
            }
        }
        // Reseed each degenerate cluster at the currently worst-served point.
        for c in degenerate {
            let far = (0..n)
                .filter(|&i| cost[i] > 0.0)
                .max_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(b.cmp(&a)));
            match far {
                Some(i) => {
                    next.row_mut(c).copy_from_slice(points.row(i));
                    cost[i] = 0.0;
                }
                None => next.row_mut(c).copy_from_slice(centroids.row(c)),
            }
        }
        let shift = (0..k)
            .map(|c| sq_dist(centroids.row(c), next.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < cfg.tol {
            break;
        }
    }
    if flavor == Flavor::Euclidean {
        centroids = transfer_refine(points, &mut labels, centroids, cfg.max_iter);
    }
    let inertia = assign(points, &centroids, &mut labels, &mut cost, flavor);
    trace.push(inertia);
    KMeansResult {
        labels,
        centroids,
        inertia,
        trace,
        restart: 0,
    }
}

/// Single-point transfers (Hartigan): moving `x` from cluster `a` to `b`
/// changes the inertia by `n_b/(n_b+1)‖x−μ_b‖² − n_a/(n_a−1)‖x−μ_a‖²`.
/// Applies strictly improving moves until none remain, starting from a Lloyd
/// fixed point, and returns the cluster means.
fn transfer_refine(points: &Matrix, labels: &mut [usize], centroids: Matrix, max_passes: usize) -> Matrix {
    let (n, dim, k) = (points.nrows(), points.ncols(), centroids.nrows());
    let mut counts = vec![0usize; k];
    let mut means = Matrix::zeros(k, dim);
    for (i, p) in points.rows().enumerate() {
        counts[labels[i]] += 1;
        for (m, v) in means.row_mut(labels[i]).iter_mut().zip(p) {
            *m += v;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            // Keep an unused centroid where it was.
            means.row_mut(c).copy_from_slice(centroids.row(c));
        } else {
            let cnt = counts[c] as f64;
            means.row_mut(c).iter_mut().for_each(|m| *m /= cnt);
        }
    }
    for _ in 0..max_passes {
        let mut moved = false;
        for i in 0..n {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let x = points.row(i);
            let na = counts[a] as f64;
            let leave = na / (na - 1.0) * sq_dist(x, means.row(a));
            let mut best = (a, 0.0);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let delta = nb / (nb + 1.0) * sq_dist(x, means.row(b)) - leave;
                if delta < best.1 - 1e-12 * leave.max(1e-300) {
                    best = (b, delta);
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            let nb = counts[b] as f64;
            for (m, v) in means.row_mut(a).iter_mut().zip(x) {
                *m = (*m * na - v) / (na - 1.0);
            }
            for (m, v) in means.row_mut(b).iter_mut().zip(x) {
                *m = (*m * nb + v) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            labels[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    // Recompute means exactly to shed incremental rounding.
    let mut sums = Matrix::zeros(k, dim);
    for (i, p) in points.rows().enumerate() {
        for (m, v) in sums.row_mut(labels[i]).iter_mut().zip(p) {
            *m += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let cnt = counts[c] as f64;
            for (m, s) in means.row_mut(c).iter_mut().zip(sums.row(c)) {
                *m = s / cnt;
            }
        }
    }
    means
}

/// Sum of squared distances from each point to its labelled centroid.
pub fn inertia_of(points: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    points
        .rows()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_points(s: &mut RandomStream, n: usize, d: usize) -> Matrix {
        Matrix::from_fn(n, d, |_, _| s.standard_normal())
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let mut s = RandomStream::new(1);
        let p = random_points(&mut s, 6, 2);
        let r = kmeans(&p, &KMeansConfig::new(6), &mut s).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.labels.clone();
        seen.sort();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn separated_pairs() {
        let p = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]).unwrap();
        let mut s = RandomStream::new(2);
        let r = kmeans(&p, &KMeansConfig::new(2), &mut s).unwrap();
        let mut cents = r.centroids.to_rows();
        cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cents, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
        assert!((r.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invariants_hold() {
        let mut s = RandomStream::new(3);
        for _ in 0..10 {
            let p = random_points(&mut s, 60, 3);
            let r = kmeans(&p, &KMeansConfig::new(4), &mut s).unwrap();
            for (i, row) in p.rows().enumerate() {
                assert_eq!(nearest(row, &r.centroids).0, r.labels[i]);
            }
            let re = inertia_of(&p, &r.labels, &r.centroids);
            assert!((re - r.inertia).abs() <= 1e-9 * re.max(1e-300));
            for w in r.trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "trace increased: {:?}", r.trace);
            }
        }
    }

    #[test]
    fn reproducible_with_same_stream() {
        let mut s = RandomStream::new(4);
        let p = random_points(&mut s, 40, 2);
        let a = kmeans(&p, &KMeansConfig::new(3), &mut RandomStream::new(99)).unwrap();
        let b = kmeans(&p, &KMeansConfig::new(3), &mut RandomStream::new(99)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia.to_bits(), b.inertia.to_bits());
    }

    #[test]
    fn rejects_k_above_n() {
        let p = Matrix::zeros(3, 2);
        let mut s = RandomStream::new(0);
        assert!(kmeans(&p, &KMeansConfig::new(4), &mut s).is_err());
        assert!(kmeans(&p, &KMeansConfig::new(0), &mut s).is_err());
    }

    #[test]
    fn duplicate_points_leave_no_empty_cluster_crash() {
        let p = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let mut s = RandomStream::new(5);
        let r = kmeans(&p, &KMeansConfig::new(3), &mut s).unwrap();
        assert!(r.inertia.abs() < 1e-12);
    }

    fn unit(v: &[f64]) -> Vec<f64> {
        let r = norm(v);
        v.iter().map(|x| x / r).collect()
    }

    #[test]
    fn spherical_antipodal_clusters() {
        let mut s = RandomStream::new(6);
        let mut rows = Vec::new();
        for sign in [1.0, -1.0] {
            for _ in 0..10 {
                rows.push(unit(&[sign, 0.01 * s.standard_normal(), 0.01 * s.standard_normal()]));
            }
        }
        let p = Matrix::from_rows(&rows).unwrap();
        let r = spherical_kmeans(&p, &KMeansConfig::new(2), &mut s).unwrap();
        let mut firsts: Vec<f64> = r.centroids.rows().map(|c| c[0]).collect();
        firsts.sort_by(f64::total_cmp);
        assert!((firsts[0] + 1.0).abs() < 1e-3 && (firsts[1] - 1.0).abs() < 1e-3);
        for c in r.centroids.rows() {
            assert!((norm(c) - 1.0).abs() < 1e-12);
        }
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn spherical_single_cluster_is_normalized_mean() {
        let mut s = RandomStream::new(7);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| unit(&[1.0 + s.uniform(), s.uniform(), s.uniform()]))
            .collect();
        let p = Matrix::from_rows(&rows).unwrap();
        let r = spherical_kmeans(&p, &KMeansConfig::new(1), &mut s).unwrap();
        let mut mean = vec![0.0; 3];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let mean = unit(&mean);
        for (a, b) in r.centroids.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        let bad = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(spherical_kmeans(&bad, &KMeansConfig::new(1), &mut s).is_err());
    }
}
