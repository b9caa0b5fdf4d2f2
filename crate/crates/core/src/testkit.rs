//! Helpers shared by unit tests.

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numkernel::DenseMatrix;

pub fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).unwrap()
}

pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let mut d = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    d
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut aug = Mat::from_fn(n, 2 * n, |i, j| {
        if j < n {
            a[(i, j)]
        } else if j - n == i {
            1.0
        } else {
            0.0
        }
    });
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| {
                aug[(x, col)]
                    .abs()
                    .partial_cmp(&aug[(y, col)].abs())
                    .unwrap()
            })
            .unwrap();
        for j in 0..2 * n {
            let t = aug[(col, j)];
            aug[(col, j)] = aug[(piv, j)];
            aug[(piv, j)] = t;
        }
        let d = aug[(col, col)];
        for j in 0..2 * n {
            aug[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = aug[(i, col)];
                for j in 0..2 * n {
                    aug[(i, j)] -= f * aug[(col, j)];
                }
            }
        }
    }
    Mat::from_fn(n, n, |i, j| aug[(i, j + n)])
}
