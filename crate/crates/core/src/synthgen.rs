//! Synthetic unions of subspaces sharing a common intersection, and
//! Frobenius-calibrated Gaussian noise.
//!
//! Every subspace is `M ⊕ Rᵢ`: a shared `y`-dimensional subspace `M` plus a
//! private `(d − y)`-dimensional part drawn inside the orthogonal complement
//! of `M`, so any two subspaces intersect in exactly `M`.

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::datamodel::{normalize_columns, DataMatrix};
use crate::error::{Error, Result};
use crate::numkernel::{mat_mul, thin_svd, DenseMatrix};
use crate::seeding::stream_rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    /// Ambient dimension.
    pub ambient_dim: usize,
    pub clusters: usize,
    /// Dimension of each subspace.
    pub subspace_dim: usize,
    /// Dimension of the subspace shared by all clusters.
    pub intersection_dim: usize,
    pub points_per_cluster: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let SynthConfig {
            ambient_dim: m1,
            clusters: n,
            subspace_dim: d,
            intersection_dim: y,
            points_per_cluster: p,
            ..
        } = *self;
        if n == 0 || p == 0 {
            return Err(Error::invalid(
                "need at least one cluster and one point per cluster",
            ));
        }
        if y >= d {
            return Err(Error::invalid(format!(
                "intersection dimension {y} must be smaller than subspace dimension {d}"
            )));
        }
        if d > m1 {
            return Err(Error::invalid(format!(
                "subspace dimension {d} exceeds ambient dimension {m1}"
            )));
        }
        Ok(())
    }

    /// Dimension of the span of all subspaces, `min(M₁, y + N(d − y))`.
    pub fn union_rank(&self) -> usize {
        let full =
            self.intersection_dim + self.clusters * (self.subspace_dim - self.intersection_dim);
        full.min(self.ambient_dim)
    }

    /// True when the private parts fit side by side in the complement of the
    /// shared part, so the subspaces are independent modulo the intersection.
    pub fn is_independent(&self) -> bool {
        self.intersection_dim + self.clusters * (self.subspace_dim - self.intersection_dim)
            <= self.ambient_dim
    }

    pub fn total_points(&self) -> usize {
        self.clusters * self.points_per_cluster
    }
}

/// Dataset together with the bases it was drawn from.
#[derive(Clone, Debug)]
pub struct SynthDataset {
    /// Unit-norm points with contiguous cluster labels.
    pub data: DataMatrix,
    /// Orthonormal basis of the shared subspace (`M₁ x y`, absent when y = 0).
    pub shared: Option<DenseMatrix>,
    /// Orthonormal basis of each subspace, shared columns first (`M₁ x d`).
    pub bases: Vec<DenseMatrix>,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal basis of the column space of a full-column-rank `m`.
fn orthonormalize(m: Mat<f64>) -> Result<Mat<f64>> {
    let k = m.ncols();
    let svd = thin_svd(&DenseMatrix::from_mat(m)?, k)?;
    if svd.numerical_rank() < k {
        return Err(Error::Factorization("random basis lost rank".into()));
    }
    Ok(svd.u.into_inner())
}

pub fn generate(cfg: &SynthConfig) -> Result<DataMatrix> {
    Ok(generate_with_bases(cfg)?.data)
}

pub fn generate_with_bases(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let SynthConfig {
        ambient_dim: m1,
        clusters: n,
        subspace_dim: d,
        intersection_dim: y,
        points_per_cluster: per,
        seed,
    } = *cfg;
    let mut rng = stream_rng(seed, 0);

    // A random orthonormal frame: the first y columns span the shared
    // subspace and the rest span its orthogonal complement.
    let frame = orthonormalize(gaussian(&mut rng, m1, m1))?;
    let shared = Mat::from_fn(m1, y, |i, j| frame[(i, j)]);
    let complement = Mat::from_fn(m1, m1 - y, |i, j| frame[(i, y + j)]);

    let mut bases = Vec::with_capacity(n);
    for _ in 0..n {
        let coords = orthonormalize(gaussian(&mut rng, m1 - y, d - y))?;
        let private = mat_mul(complement.as_ref(), coords.as_ref());
        let v = Mat::from_fn(m1, d, |i, j| {
            if j < y {
                shared[(i, j)]
            } else {
                private[(i, j - y)]
            }
        });
        bases.push(v);
    }

    let mut points = Mat::<f64>::zeros(m1, n * per);
    let mut labels = Vec::with_capacity(n * per);
    for (c, v) in bases.iter().enumerate() {
        let coeffs = gaussian(&mut rng, d, per);
        let block = mat_mul(v.as_ref(), coeffs.as_ref());
        for j in 0..per {
            points
                .col_as_slice_mut(c * per + j)
                .copy_from_slice(block.col_as_slice(j));
            labels.push(c);
        }
    }
    let meta = format!("synth m1={m1} n={n} d={d} y={y} per_cluster={per} seed={seed}");
    let raw = DataMatrix::new(DenseMatrix::from_mat(points)?, Some(labels), meta)?;
    Ok(SynthDataset {
        data: normalize_columns(&raw)?,
        shared: (y > 0).then(|| DenseMatrix::from_mat_unchecked(shared)),
        bases: bases
            .into_iter()
            .map(DenseMatrix::from_mat_unchecked)
            .collect(),
    })
}

/// `D + αE` with `E` standard normal and `α = τ‖D‖/‖E‖`, so the added
/// noise has exactly relative Frobenius norm `τ`. `τ = 0` returns `D`
/// unchanged. Columns are not renormalized.
pub fn add_noise(d: &DataMatrix, tau: f64, seed: u64) -> Result<DataMatrix> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!(
            "noise ratio must be non-negative, got {tau}"
        )));
    }
    if tau == 0.0 {
        return Ok(d.clone());
    }
    let (rows, cols) = d.data.shape();
    let mut rng = stream_rng(seed, 1);
    let e = gaussian(&mut rng, rows, cols);
    let alpha = tau * d.data.frobenius_norm() / e.norm_l2();
    let noisy = Mat::from_fn(rows, cols, |i, j| d.data.get(i, j) + alpha * e[(i, j)]);
    let meta = format!("{}\nnoise tau={tau} seed={seed}", d.source_meta);
    DataMatrix::new(DenseMatrix::from_mat(noisy)?, d.labels.clone(), meta)
}
