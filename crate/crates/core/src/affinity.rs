//! Neighborhoods from direction responses, angular edge weights, and the
//! symmetrized similarity graph.

use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::numkernel::DenseMatrix;

/// Index sets of size `g`, one per point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborhoodSet {
    pub per_point: Vec<Vec<usize>>,
    pub g: usize,
}

/// Nonnegative weight matrix over the points.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    pub w: DenseMatrix,
    pub symmetrized: bool,
}

/// Neighborhood size used when none is given: one more than the subspace
/// dimension (at least 3) when that is known, else a quarter of the mean
/// cluster size clamped to `[3, 50]`.
pub fn default_neighbors(points: usize, clusters: usize, subspace_dim: Option<usize>) -> usize {
    let g = match subspace_dim {
        Some(d) => (d + 1).max(3),
        None => points.div_ceil(4 * clusters.max(1)).clamp(3, 50),
    };
    g.min(points.max(1))
}

/// Indices of the `g` largest entries of `row`; ties go to the lower index.
/// `skip` is left out of the candidates.
pub(crate) fn top_indices(row: &[f64], g: usize, skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| Some(j) != skip).collect();
    let order = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
    if g < idx.len() {
        idx.select_nth_unstable_by(g, order);
        idx.truncate(g);
    }
    idx.sort_by(order);
    idx
}

/// For each row i of `responses`, the `g` columns with the largest values.
/// With `exclude_self` the diagonal entry is not a candidate.
pub fn select_neighborhoods(
    responses: &DenseMatrix,
    g: usize,
    exclude_self: bool,
) -> Result<NeighborhoodSet> {
    let (n, m) = responses.shape();
    if n != m {
        return Err(Error::dim(format!("responses must be square, got {n}x{m}")));
    }
    let limit = if exclude_self { n - 1 } else { n };
    if g == 0 || g > limit {
        return Err(Error::invalid(format!(
            "neighborhood size {g} outside 1..={limit}"
        )));
    }
    // Rows are strided in column-major storage; walk columns of the transpose.
    let rows = responses.transpose();
    let per_point = (0..n)
        .map(|i| top_indices(rows.column(i), g, exclude_self.then_some(i)))
        .collect();
    Ok(NeighborhoodSet { per_point, g })
}

/// `exp(−2·acos(c))` with `c` clamped to `[−1, 1]`.
#[inline]
pub fn angular_weight(cosine: f64) -> f64 {
    (-2.0 * cosine.clamp(-1.0, 1.0).acos()).exp()
}

/// Weights `W[i,j] = exp(−2·acos(xᵢᵀxⱼ))` for `j` in the neighborhood of
/// `i`, zero elsewhere. With `renormalize`, columns of `x` are scaled to unit
/// norm first.
pub fn angular_weights(
    x: &DenseMatrix,
    nbrs: &NeighborhoodSet,
    renormalize: bool,
) -> Result<SimilarityGraph> {
    let n = x.ncols();
    if nbrs.per_point.len() != n {
        return Err(Error::dim(format!(
            "{} neighborhoods for {n} points",
            nbrs.per_point.len()
        )));
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| {
            if renormalize {
                let s = x.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            } else {
                1.0
            }
        })
        .collect();
    let mut w = Mat::<f64>::zeros(n, n);
    for (i, set) in nbrs.per_point.iter().enumerate() {
        let xi = x.column(i);
        for &j in set {
            if j >= n {
                return Err(Error::dim(format!(
                    "neighbor index {j} out of range for {n} points"
                )));
            }
            let c =
                xi.iter().zip(x.column(j)).map(|(a, b)| a * b).sum::<f64>() * norms[i] * norms[j];
            w[(i, j)] = angular_weight(c);
        }
    }
    Ok(SimilarityGraph {
        w: DenseMatrix::from_mat_unchecked(w),
        symmetrized: false,
    })
}

impl SimilarityGraph {
    /// `W + Wᵀ`. Rejected if already symmetrized.
    pub fn symmetrize(self) -> Result<SimilarityGraph> {
        if self.symmetrized {
            return Err(Error::invalid("similarity graph is already symmetrized"));
        }
        let w = self.w.as_ref();
        let sym = Mat::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] + w[(j, i)]);
        Ok(SimilarityGraph {
            w: DenseMatrix::from_mat_unchecked(sym),
            symmetrized: true,
        })
    }

    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.w.nrows() == 0
    }

    /// Writes nonzero entries as `i,j,weight` lines (0-based indices).
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let n = self.len();
        let mut out = String::from("i,j,weight\n");
        for i in 0..n {
            for j in 0..n {
                let v = self.w.get(i, j);
                if v != 0.0 {
                    writeln!(out, "{i},{j},{v:.17e}").expect("writing to a String");
                }
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn row_matrix(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn top_g_with_ties_prefers_lower_index() {
        let r = row_matrix(&[
            vec![1.0, 0.9, 0.1],
            vec![0.5, 0.5, 0.5],
            vec![0.0, 0.2, 0.2],
        ]);
        let n = select_neighborhoods(&r, 2, false).unwrap();
        assert_eq!(n.per_point[0], vec![0, 1]);
        assert_eq!(n.per_point[1], vec![0, 1]);
        assert_eq!(n.per_point[2], vec![1, 2]);
        let n = select_neighborhoods(&r, 2, true).unwrap();
        assert_eq!(n.per_point[0], vec![1, 2]);
        assert_eq!(n.per_point[1], vec![0, 2]);
    }

    #[test]
    fn neighborhood_size_bounds() {
        let r = DenseMatrix::identity(3);
        assert!(select_neighborhoods(&r, 0, false).is_err());
        assert!(select_neighborhoods(&r, 4, false).is_err());
        assert!(select_neighborhoods(&r, 3, true).is_err());
        assert!(select_neighborhoods(&r, 3, false).is_ok());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(angular_weight(1.0), 1.0);
        assert!((angular_weight(0.0) - (-PI).exp()).abs() < 1e-15);
        assert!((angular_weight(0.0) - 0.04322).abs() < 1e-5);
        assert!((angular_weight(-1.0) - 0.001867).abs() < 1e-6);
        assert_eq!(angular_weight(1.0 + 1e-12), 1.0);
    }

    #[test]
    fn weights_follow_neighborhoods() {
        let x = row_matrix(&[vec![1.0, 0.0, 0.6], vec![0.0, 1.0, 0.8]]);
        let nbrs = NeighborhoodSet {
            per_point: vec![vec![0, 2], vec![1, 0], vec![2, 1]],
            g: 2,
        };
        let w = angular_weights(&x, &nbrs, false).unwrap();
        assert_eq!(w.w.get(0, 0), 1.0);
        assert!((w.w.get(0, 2) - angular_weight(0.6)).abs() < 1e-15);
        assert_eq!(w.w.get(0, 1), 0.0);
        assert!((w.w.get(1, 0) - (-PI).exp()).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!((0..3).filter(|&j| w.w.get(i, j) != 0.0).count(), 2);
        }
    }

    #[test]
    fn renormalization_changes_short_columns_only() {
        let x = row_matrix(&[vec![0.5, 1.0], vec![0.0, 0.0]]);
        let nbrs = NeighborhoodSet {
            per_point: vec![vec![1], vec![0]],
            g: 1,
        };
        let raw = angular_weights(&x, &nbrs, false).unwrap();
        let renorm = angular_weights(&x, &nbrs, true).unwrap();
        assert!((raw.w.get(0, 1) - angular_weight(0.5)).abs() < 1e-15);
        assert_eq!(renorm.w.get(0, 1), 1.0);
    }

    #[test]
    fn symmetrize_examples() {
        let mut w = Mat::zeros(3, 3);
        w[(0, 1)] = 0.5;
        let g = SimilarityGraph {
            w: DenseMatrix::from_mat(w).unwrap(),
            symmetrized: false,
        };
        let s = g.symmetrize().unwrap();
        assert_eq!(s.w.get(0, 1), 0.5);
        assert_eq!(s.w.get(1, 0), 0.5);
        assert!(s.clone().symmetrize().is_err());

        let both = SimilarityGraph {
            w: DenseMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap(),
            symmetrized: false,
        };
        assert_eq!(both.symmetrize().unwrap().w.get(0, 1), 0.6);

        let zero = SimilarityGraph {
            w: DenseMatrix::zeros(2, 2),
            symmetrized: false,
        };
        assert_eq!(zero.symmetrize().unwrap().w, DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn default_neighbor_rule() {
        assert_eq!(default_neighbors(400, 4, Some(10)), 11);
        assert_eq!(default_neighbors(400, 4, Some(1)), 3);
        assert_eq!(default_neighbors(400, 4, None), 25);
        assert_eq!(default_neighbors(10_000, 2, None), 50);
        assert_eq!(default_neighbors(8, 4, None), 3);
    }

    #[test]
    fn edge_list_export() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let g = SimilarityGraph {
            w: DenseMatrix::from_rows(&[vec![0.0, 0.25], vec![0.0, 1.0]]).unwrap(),
            symmetrized: false,
        };
        g.write_edge_list(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,weight");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1,2.5"));
        assert!(lines[2].starts_with("1,1,1.0"));
    }
}
