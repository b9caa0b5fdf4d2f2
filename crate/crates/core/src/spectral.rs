//! Normalized spectral clustering and the k-means back end.

use faer::Mat;
use rand::Rng;

use crate::affinity::SimilarityGraph;
use crate::error::{Error, Result};
use crate::numkernel::{sym_eig, DenseMatrix, EigenEnd};
use crate::seeding::stream_rng;

/// Degree given to vertices without edges.
pub const ISOLATED_DEGREE: f64 = 1e-12;
/// Lloyd iterations stop once no centroid moves farther than this.
pub const KMEANS_SHIFT_TOL: f64 = 1e-9;
pub const KMEANS_MAX_ITERS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 20;

/// Cluster index per point, in `[0, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} outside 0..{k}")));
        }
        Ok(ClusterLabels { labels, k })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// True when some label in `0..k` has no point.
    pub fn has_empty_cluster(&self) -> bool {
        self.sizes().contains(&0)
    }
}

/// Symmetric normalized Laplacian `I − D^{-1/2} W D^{-1/2}`.
pub fn normalized_laplacian(w: &SimilarityGraph) -> Result<DenseMatrix> {
    let n = w.len();
    if w.w.ncols() != n {
        return Err(Error::dim("similarity matrix must be square"));
    }
    let wm = w.w.as_ref();
    let mut inv_sqrt = vec![0.0; n];
    for (j, s) in inv_sqrt.iter_mut().enumerate() {
        let col = w.w.column(j);
        if let Some(v) = col.iter().find(|v| **v < 0.0) {
            return Err(Error::invalid(format!(
                "negative similarity {v} in column {j}"
            )));
        }
        let d: f64 = col.iter().sum();
        *s = 1.0 / if d > 0.0 { d } else { ISOLATED_DEGREE }.sqrt();
    }
    let l = Mat::from_fn(n, n, |i, j| {
        let off = -inv_sqrt[i] * wm[(i, j)] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    });
    DenseMatrix::from_mat(l)
}

/// Laplacian eigenpairs used for the embedding.
#[derive(Clone, Debug)]
pub struct SpectralEmbedding {
    /// Smallest `k` Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// One row per point, unit norm (zero rows stay zero).
    pub rows: DenseMatrix,
}

pub fn spectral_embedding(w: &SimilarityGraph, k: usize) -> Result<SpectralEmbedding> {
    if !w.symmetrized {
        return Err(Error::invalid(
            "spectral clustering needs a symmetrized graph",
        ));
    }
    let n = w.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cluster count {k} outside 1..={n}")));
    }
    let lap = normalized_laplacian(w)?;
    let eig = sym_eig(&lap, k, EigenEnd::Smallest)?;
    let mut rows = eig.vectors.into_inner();
    for i in 0..n {
        let norm = (0..k)
            .map(|j| rows[(i, j)] * rows[(i, j)])
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for j in 0..k {
                rows[(i, j)] /= norm;
            }
        }
    }
    Ok(SpectralEmbedding {
        eigenvalues: eig.values,
        rows: DenseMatrix::from_mat(rows)?,
    })
}

/// Embeds with the `k` smallest Laplacian eigenvectors, normalizes rows and
/// runs k-means with `restarts` seeded starts.
pub fn spectral_cluster(
    w: &SimilarityGraph,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterLabels> {
    let emb = spectral_embedding(w, k)?;
    Ok(kmeans(&emb.rows, k, restarts, seed)?.labels)
}

/// Cluster count suggested by the largest gap among the `max_k + 1`
/// smallest Laplacian eigenvalues. Diagnostic only.
pub fn eigengap_estimate(w: &SimilarityGraph, max_k: usize) -> Result<(usize, Vec<f64>)> {
    let n = w.len();
    let m = (max_k + 1).min(n);
    let lap = normalized_laplacian(w)?;
    let values = sym_eig(&lap, m, EigenEnd::Smallest)?.values;
    let best = (1..m)
        .max_by(|&a, &b| {
            (values[a] - values[a - 1])
                .total_cmp(&(values[b] - values[b - 1]))
                .then(b.cmp(&a))
        })
        .unwrap_or(1);
    Ok((best, values))
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub labels: ClusterLabels,
    /// Sum of squared distances to the assigned centroids.
    pub cost: f64,
    pub iterations: usize,
    /// Cost after each Lloyd iteration of the winning restart.
    pub cost_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm on the rows of `points`, best of `restarts` runs.
/// Each run seeds one centroid at a random point and the rest greedily at
/// the point farthest from those chosen; its randomness comes only from
/// `(seed, restart index)`.
pub fn kmeans(points: &DenseMatrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let (n, dim) = points.shape();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    if restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..dim).map(|j| points.get(i, j)).collect())
        .collect();
    let mut best: Option<KMeansResult> = None;
    for restart in 0..restarts {
        let run = lloyd(&rows, k, restart as u64, seed);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(rows: &[Vec<f64>], k: usize, restart: u64, seed: u64) -> KMeansResult {
    let n = rows.len();
    let mut rng = stream_rng(seed, restart);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows[rng.random_range(0..n)].clone());
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let far = (0..n)
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .unwrap();
        let c = rows[far].clone();
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }

    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut cost_trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        for (i, r) in rows.iter().enumerate() {
            let (l, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, cen)| (c, sq_dist(r, cen)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            labels[i] = l;
            dists[i] = d;
        }
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        // An empty cluster takes over the point worst served by its centroid.
        for c in 0..k {
            if sizes[c] == 0 {
                let far = (0..n)
                    .filter(|&i| sizes[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(p) = far {
                    sizes[labels[p]] -= 1;
                    labels[p] = c;
                    dists[p] = 0.0;
                    sizes[c] = 1;
                }
            }
        }
        cost_trace.push(dists.iter().sum());

        let dim = rows[0].len();
        let mut next = vec![vec![0.0; dim]; k];
        for (r, &l) in rows.iter().zip(&labels) {
            for (a, v) in next[l].iter_mut().zip(r) {
                *a += v;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            if sizes[c] == 0 {
                next[c] = centroids[c].clone();
                continue;
            }
            next[c].iter_mut().for_each(|v| *v /= sizes[c] as f64);
            shift = shift.max(sq_dist(&next[c], &centroids[c]).sqrt());
        }
        centroids = next;
        if shift < KMEANS_SHIFT_TOL || iterations >= KMEANS_MAX_ITERS {
            break;
        }
    }
    let cost = rows
        .iter()
        .zip(&labels)
        .map(|(r, &l)| sq_dist(r, &centroids[l]))
        .sum();
    KMeansResult {
        labels: ClusterLabels { labels, k },
        cost,
        iterations,
        cost_trace,
    }
}
