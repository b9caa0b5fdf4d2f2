//! Clustering error, the TSC baseline, the innovation-subspace diagnostic,
//! and the experiment harness.

mod experiment;
mod probe;
mod realdata;

use faer::Mat;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::affinity::{angular_weight, top_indices, SimilarityGraph};
use crate::datamodel::DataMatrix;
use crate::error::{Error, Result};
use crate::numkernel::{mat_mul, thin_svd, DenseMatrix};
use crate::spectral::{spectral_cluster, ClusterLabels};

pub use experiment::{
    run_experiment, AlgorithmKind, DataSection, DscSection, ExperimentResult, ExperimentSpec,
    GridPoint, SummaryRow, SweepAxis, SweepVariable, TrialFailure, TrialRecord, TscSection,
};
pub use probe::{
    neighborhood_probe, run_probe_suite, ProbeOutcome, ProbeRegime, ProbeSuite, ProbeSummary,
};
pub use realdata::{run_subject_protocol, SubjectProtocol, SubjectRun};

/// Any bench file, told apart by its top-level `kind` key.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BenchSpec {
    Sweep(ExperimentSpec),
    Probe(ProbeSuite),
    Real(SubjectProtocol),
}

impl BenchSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: BenchSpec =
            toml::from_str(text).map_err(|e| Error::invalid(format!("bench spec: {e}")))?;
        match &spec {
            BenchSpec::Sweep(s) => s.validate()?,
            BenchSpec::Probe(s) => s.validate()?,
            BenchSpec::Real(s) => s.validate()?,
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("bench spec serializes")
    }

    pub fn name(&self) -> &str {
        match self {
            BenchSpec::Sweep(s) => &s.name,
            BenchSpec::Probe(s) => &s.name,
            BenchSpec::Real(s) => &s.name,
        }
    }
}

/// Residual norm below which a subspace counts as contained in the others.
pub const INNOVATION_TOL: f64 = 1e-8;

/// Percentage of points misassigned under the best one-to-one matching of
/// predicted to true labels.
pub fn clustering_error(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::dim(format!(
            "{} predicted labels for {} points",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("no points to compare"));
    }
    let k = predicted.iter().chain(truth).max().unwrap() + 1;
    let mut agree = vec![vec![0i64; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        agree[p][t] += 1;
    }
    let weights = Matrix::from_rows(agree).expect("square confusion matrix");
    let (matched, _) = kuhn_munkres(&weights);
    let wrong = truth.len() as i64 - matched;
    Ok(100.0 * wrong as f64 / truth.len() as f64)
}

/// [`clustering_error`] for labelings held as [`ClusterLabels`].
pub fn labels_error(predicted: &ClusterLabels, truth: &[usize]) -> Result<f64> {
    clustering_error(&predicted.labels, truth)
}

/// Neighborhoods from the largest `|dᵢᵀdⱼ|` (self excluded), weighted by the
/// same angular kernel as DSC, symmetrized. `d` holds unit-norm columns.
pub fn tsc_similarity(d: &DenseMatrix, g: usize) -> Result<SimilarityGraph> {
    let n = d.ncols();
    if g == 0 || g >= n {
        return Err(Error::invalid(format!(
            "neighborhood size {g} outside 1..={}",
            n - 1
        )));
    }
    let gram = mat_mul(d.as_ref().transpose(), d.as_ref());
    let mut w = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let col = gram.col_as_slice(i);
        let abs: Vec<f64> = col.iter().map(|v| v.abs()).collect();
        for j in top_indices(&abs, g, Some(i)) {
            w[(i, j)] = angular_weight(col[j]);
        }
    }
    SimilarityGraph {
        w: DenseMatrix::from_mat(w)?,
        symmetrized: false,
    }
    .symmetrize()
}

/// TSC clustering of the normalized columns of `d`.
pub fn run_tsc(
    d: &DataMatrix,
    clusters: usize,
    g: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterLabels> {
    let unit = crate::datamodel::normalize_columns(d)?;
    let graph = tsc_similarity(&unit.data, g)?;
    spectral_cluster(&graph, clusters, restarts, seed)
}

/// Orthonormal basis of the part of subspace `i` orthogonal to the sum of
/// all the others.
pub fn innovation_basis(bases: &[DenseMatrix], i: usize) -> Result<DenseMatrix> {
    let vi = bases
        .get(i)
        .ok_or_else(|| Error::invalid(format!("subspace {i} of {}", bases.len())))?;
    let m1 = vi.nrows();
    if bases.iter().any(|b| b.nrows() != m1) {
        return Err(Error::dim("bases live in different ambient dimensions"));
    }
    let others: Vec<&DenseMatrix> = bases
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i)
        .map(|(_, b)| b)
        .collect();
    let residual = match others.split_first() {
        None => vi.clone(),
        Some((first, rest)) => {
            let mut stacked = (*first).clone();
            for b in rest {
                stacked = stacked.hstack(b)?;
            }
            let k = stacked.nrows().min(stacked.ncols());
            let svd = thin_svd(&stacked, k)?;
            let c = DenseMatrix::from_fn(m1, svd.numerical_rank(), |r, j| svd.u.get(r, j))?;
            let ctv = mat_mul(c.as_ref().transpose(), vi.as_ref());
            let proj = mat_mul(c.as_ref(), ctv.as_ref());
            DenseMatrix::from_fn(m1, vi.ncols(), |r, j| vi.get(r, j) - proj[(r, j)])?
        }
    };
    let svd = thin_svd(&residual, residual.ncols().min(m1))?;
    let keep = svd.s.iter().take_while(|&&s| s > INNOVATION_TOL).count();
    if keep == 0 {
        return Err(Error::NoInnovation(i));
    }
    DenseMatrix::from_fn(m1, keep, |r, j| svd.u.get(r, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use perms::permutations;

    /// Tiny permutation generator so the oracle does not depend on the
    /// assignment code it checks.
    mod perms {
        pub fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
    }

    fn brute_force_error(pred: &[usize], truth: &[usize]) -> f64 {
        let k = pred.iter().chain(truth).max().unwrap() + 1;
        let best = permutations(k)
            .into_iter()
            .map(|perm| {
                pred.iter()
                    .zip(truth)
                    .filter(|(p, t)| perm[**p] == **t)
                    .count()
            })
            .max()
            .unwrap();
        100.0 * (truth.len() - best) as f64 / truth.len() as f64
    }

    #[test]
    fn error_examples() {
        assert_eq!(
            clustering_error(&[1, 1, 0, 0, 2], &[0, 0, 2, 2, 1]).unwrap(),
            0.0
        );
        assert_eq!(
            clustering_error(&[0; 10], &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]).unwrap(),
            50.0
        );
        assert!(clustering_error(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn error_matches_brute_force_on_small_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let m = rng.random_range(1..=8);
            let kp = rng.random_range(1..=3);
            let kt = rng.random_range(1..=3);
            let pred: Vec<usize> = (0..m).map(|_| rng.random_range(0..kp)).collect();
            let truth: Vec<usize> = (0..m).map(|_| rng.random_range(0..kt)).collect();
            let got = clustering_error(&pred, &truth).unwrap();
            assert_eq!(got, brute_force_error(&pred, &truth), "{pred:?} {truth:?}");
        }
    }

    fn block_unit_data() -> DenseMatrix {
        // Two clusters in orthogonal coordinate planes.
        let pts = [
            [1.0, 0.0, 0.0, 0.0],
            [0.6, 0.8, 0.0, 0.0],
            [0.8, 0.6, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.8, 0.6],
            [0.0, 0.0, 0.6, 0.8],
        ];
        DenseMatrix::from_fn(4, 6, |i, j| pts[j][i]).unwrap()
    }

    #[test]
    fn tsc_orthogonal_clusters_are_pure() {
        let d = block_unit_data();
        let g = tsc_similarity(&d, 2).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if (i < 3) != (j < 3) {
                    assert_eq!(g.w.get(i, j), 0.0);
                }
            }
            assert_eq!(g.w.get(i, i), 0.0);
        }
        let labels = spectral_cluster(&g, 2, 3, 0).unwrap();
        assert_eq!(
            clustering_error(&labels.labels, &[0, 0, 0, 1, 1, 1]).unwrap(),
            0.0
        );
    }

    #[test]
    fn tsc_full_neighborhood_and_bounds() {
        let d = block_unit_data();
        let g = tsc_similarity(&d, 5).unwrap();
        for i in 0..6 {
            // Every other point is a neighbor; orthogonal ones get exp(−π).
            for j in 0..6 {
                if i != j {
                    assert!(g.w.get(i, j) > 0.0);
                }
            }
        }
        assert!(tsc_similarity(&d, 6).is_err());
        assert!(tsc_similarity(&d, 0).is_err());
    }

    fn axis_basis(m1: usize, axes: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(m1, axes.len(), |i, j| (i == axes[j]) as u8 as f64).unwrap()
    }

    #[test]
    fn innovation_of_orthogonal_subspace_is_itself() {
        let b = vec![axis_basis(5, &[0, 1]), axis_basis(5, &[2, 3])];
        let inn = innovation_basis(&b, 0).unwrap();
        assert_eq!(inn.ncols(), 2);
        // Principal angles all zero: singular values of VᵀB are all one.
        let s = thin_svd(&b[0].transpose().matmul(&inn).unwrap(), 2)
            .unwrap()
            .s;
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-12), "{s:?}");
    }

    #[test]
    fn nested_subspace_has_no_innovation() {
        let b = vec![axis_basis(5, &[0]), axis_basis(5, &[0, 1])];
        assert!(matches!(
            innovation_basis(&b, 0),
            Err(Error::NoInnovation(0))
        ));
        let inn = innovation_basis(&b, 1).unwrap();
        assert_eq!(inn.ncols(), 1);
        assert!((inn.get(1, 0).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn innovation_is_orthogonal_to_the_others() {
        let s = crate::synthgen::generate_with_bases(&crate::synthgen::SynthConfig {
            ambient_dim: 12,
            clusters: 3,
            subspace_dim: 4,
            intersection_dim: 1,
            points_per_cluster: 3,
            seed: 2,
        })
        .unwrap();
        for i in 0..3 {
            let inn = innovation_basis(&s.bases, i).unwrap();
            assert_eq!(inn.ncols(), 3);
            let gram = inn.transpose().matmul(&inn).unwrap();
            assert!((0..3)
                .all(|a| (0..3).all(|b| (gram.get(a, b) - (a == b) as u8 as f64).abs() < 1e-10)));
            for (k, other) in s.bases.iter().enumerate() {
                if k != i {
                    let cross = other.transpose().matmul(&inn).unwrap();
                    assert!(cross.frobenius_norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn bench_spec_dispatches_on_kind() {
        let probe = r#"
            kind = "probe"
            name = "p"
            clusters = 2
            subspace_dim = 3
            points_per_cluster = 10
            seeds = 1
            top = 4
            [[regimes]]
            ambient_dim = 10
            intersection_dim = 0
        "#;
        let spec = BenchSpec::from_toml(probe).unwrap();
        assert!(matches!(spec, BenchSpec::Probe(_)));
        assert_eq!(BenchSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        assert!(BenchSpec::from_toml(&probe.replace("\"probe\"", "\"other\"")).is_err());
        assert!(BenchSpec::from_toml(&probe.replace("seeds = 1", "seeds = 0")).is_err());
        assert!(BenchSpec::from_toml(&probe.replace("top = 4", "top = 4\nextra = 1")).is_err());
    }
}
