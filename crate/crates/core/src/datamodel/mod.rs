//! Dataset representation (one column per point), column normalization and
//! projection onto the dominant left singular subspace.

mod csv_io;
mod pgm;

use std::path::Path;

use faer::Mat;

pub use csv_io::{read_csv, read_labels, write_csv, write_labels};
pub use pgm::{read_pgm, read_pgm_dir, PgmImage};

use crate::error::{Error, Result};
use crate::numkernel::{mat_mul, numerical_rank, thin_svd, DenseMatrix};

/// Raw dataset: `data` is M₁ x M₂ with one point per column.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    pub data: DenseMatrix,
    /// Ground-truth cluster per column, when known.
    pub labels: Option<Vec<usize>>,
    pub source_meta: String,
}

impl DataMatrix {
    pub fn new(
        data: DenseMatrix,
        labels: Option<Vec<usize>>,
        source_meta: impl Into<String>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != data.ncols() {
                return Err(Error::dim(format!(
                    "{} labels for {} points",
                    l.len(),
                    data.ncols()
                )));
            }
        }
        Ok(DataMatrix {
            data,
            labels,
            source_meta: source_meta.into(),
        })
    }

    /// Ambient dimension M₁.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of points M₂.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of distinct ground-truth clusters (`max label + 1`).
    pub fn cluster_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// Index of the first all-zero column, if any.
    pub fn first_zero_column(&self) -> Option<usize> {
        (0..self.len()).find(|&j| self.data.column(j).iter().all(|&v| v == 0.0))
    }

    /// Keeps only the given columns (and their labels), in that order.
    pub fn select(&self, columns: &[usize]) -> Result<DataMatrix> {
        let data = self.data.select_columns(columns)?;
        let labels = self
            .labels
            .as_ref()
            .map(|l| columns.iter().map(|&j| l[j]).collect());
        DataMatrix::new(data, labels, self.source_meta.clone())
    }
}

/// Scales every column to unit ℓ₂ norm.
pub fn normalize_columns(d: &DataMatrix) -> Result<DataMatrix> {
    if let Some(j) = d.first_zero_column() {
        return Err(Error::ZeroColumn(j));
    }
    let (m1, m2) = d.data.shape();
    let norms: Vec<f64> = (0..m2)
        .map(|j| d.data.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let data = DenseMatrix::from_fn(m1, m2, |i, j| d.data.get(i, j) / norms[j])?;
    DataMatrix::new(data, d.labels.clone(), d.source_meta.clone())
}

/// How many left singular vectors span the working subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankPolicy {
    /// Numerical rank (singular values above 1e-12 of the largest).
    Exact,
    Fixed(usize),
    /// Smallest r capturing at least this fraction of the squared spectrum.
    Energy(f64),
}

impl std::str::FromStr for RankPolicy {
    type Err = Error;

    /// Parses `exact`, `fixed:R` or `energy:T`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(RankPolicy::Exact);
        }
        let bad = || {
            Error::invalid(format!(
                "rank policy `{s}` (expected exact, fixed:R or energy:T)"
            ))
        };
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "fixed" => value.parse().map(RankPolicy::Fixed).map_err(|_| bad()),
            "energy" => {
                let t: f64 = value.parse().map_err(|_| bad())?;
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Error::invalid(format!(
                        "energy threshold {t} outside (0, 1]"
                    )));
                }
                Ok(RankPolicy::Energy(t))
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for RankPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankPolicy::Exact => write!(f, "exact"),
            RankPolicy::Fixed(r) => write!(f, "fixed:{r}"),
            RankPolicy::Energy(t) => write!(f, "energy:{t}"),
        }
    }
}

/// Orthonormal basis `q` (M₁ x r) of the working subspace and reduced
/// coordinates `x = qᵀ D` (r x M₂).
#[derive(Clone, Debug)]
pub struct ProjectedData {
    pub q: DenseMatrix,
    pub x: DenseMatrix,
    pub rank: usize,
    /// Fraction of ‖D‖²_F retained by the projection.
    pub energy_captured: f64,
    /// All singular values of D, non-increasing.
    pub singular_values: Vec<f64>,
}

pub fn project_to_span(d: &DataMatrix, policy: RankPolicy) -> Result<ProjectedData> {
    let (m1, m2) = d.data.shape();
    let full = m1.min(m2);
    if let RankPolicy::Fixed(r) = policy {
        if r == 0 || r > full {
            return Err(Error::invalid(format!("fixed rank {r} outside 1..={full}")));
        }
    }
    let svd = thin_svd(&d.data, full)?;
    let energies: Vec<f64> = svd
        .s
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s * s;
            Some(*acc)
        })
        .collect();
    let total = *energies.last().unwrap();
    let rank = match policy {
        RankPolicy::Exact => numerical_rank(&svd.s).max(1),
        RankPolicy::Fixed(r) => r,
        RankPolicy::Energy(t) => {
            energies
                .iter()
                .position(|&e| e >= t * total)
                .unwrap_or(full)
                + 1
        }
    };
    let u = svd.u.as_ref();
    let q = Mat::from_fn(m1, rank, |i, j| u[(i, j)]);
    let x = mat_mul(q.as_ref().transpose(), d.data.as_ref());
    let energy_captured = if total > 0.0 {
        energies[rank - 1] / total
    } else {
        1.0
    };
    Ok(ProjectedData {
        q: DenseMatrix::from_mat(q)?,
        x: DenseMatrix::from_mat(x)?,
        rank,
        energy_captured,
        singular_values: svd.s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    PgmDir,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "pgm-dir" | "pgm" => Ok(InputFormat::PgmDir),
            other => Err(Error::invalid(format!("unknown input format `{other}`"))),
        }
    }
}

/// Loads a dataset and rejects all-zero points.
pub fn load_matrix(path: impl AsRef<Path>, format: InputFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    let d = match format {
        InputFormat::Csv => read_csv(path)?,
        InputFormat::PgmDir => read_pgm_dir(path)?,
    };
    if let Some(j) = d.first_zero_column() {
        return Err(Error::parse(path, format!("point {j} is all zeros")));
    }
    Ok(d)
}
