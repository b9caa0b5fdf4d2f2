//! Neighborhood probe: where do the strongest responses of one point land
//! under DSC and under TSC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::DscSection;
use crate::affinity::top_indices;
use crate::datamodel::normalize_columns;
use crate::dirsearch::solve_directions;
use crate::error::{Error, Result};
use crate::numkernel::{mat_mul, thin_svd, DenseMatrix};
use crate::pipeline::prepare;
use crate::seeding::derive_seed;
use crate::synthgen::{generate_with_bases, SynthConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeRegime {
    pub ambient_dim: usize,
    pub intersection_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSuite {
    pub name: String,
    pub regimes: Vec<ProbeRegime>,
    pub clusters: usize,
    pub subspace_dim: usize,
    pub points_per_cluster: usize,
    /// Seeded datasets per regime.
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Responses inspected per point.
    pub top: usize,
    /// Index of the probed point; it belongs to the first cluster.
    #[serde(default)]
    pub point: usize,
    #[serde(default)]
    pub dsc: DscSection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOutcome {
    pub seed: u64,
    /// Indices of the largest `|aᵀx_j|`, self included.
    pub dsc_top: Vec<usize>,
    /// Indices of the largest `|dᵀd_j|`, self excluded.
    pub tsc_top: Vec<usize>,
    pub dsc_pure: bool,
    pub tsc_pure: bool,
    /// Norm of the direction's component in the sum of the other clusters'
    /// subspaces, relative to its norm.
    pub leak: f64,
    pub converged: bool,
    pub iters: usize,
    pub feasibility_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSummary {
    pub regime: ProbeRegime,
    pub outcomes: Vec<ProbeOutcome>,
}

impl ProbeSummary {
    pub fn dsc_pure_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.dsc_pure).count()
    }

    pub fn tsc_impure_count(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.tsc_pure).count()
    }

    pub fn max_leak(&self) -> f64 {
        self.outcomes.iter().map(|o| o.leak).fold(0.0, f64::max)
    }
}

/// Orthonormal basis of the sum of all subspaces except `skip`.
fn others_basis(bases: &[DenseMatrix], skip: usize) -> Result<Option<DenseMatrix>> {
    let mut stacked: Option<DenseMatrix> = None;
    for (_, b) in bases.iter().enumerate().filter(|(k, _)| *k != skip) {
        stacked = Some(match stacked {
            None => b.clone(),
            Some(s) => s.hstack(b)?,
        });
    }
    let Some(s) = stacked else { return Ok(None) };
    let svd = thin_svd(&s, s.nrows().min(s.ncols()))?;
    let r = svd.numerical_rank();
    Ok(Some(DenseMatrix::from_fn(s.nrows(), r, |i, j| {
        svd.u.get(i, j)
    })?))
}

/// Runs DSC's direction search and the TSC inner products on one synthetic
/// dataset and inspects the `top` strongest responses of `point`.
pub fn neighborhood_probe(
    cfg: &SynthConfig,
    dsc: &DscSection,
    top: usize,
    point: usize,
) -> Result<ProbeOutcome> {
    let set = generate_with_bases(cfg)?;
    let labels = set.data.labels.as_ref().expect("synthetic data is labeled");
    let n = set.data.len();
    if point >= n || top == 0 || top >= n {
        return Err(Error::invalid(format!(
            "probe point {point} / top {top} outside {n} points"
        )));
    }
    let own = labels[point];
    let params = dsc.to_params(top, 0)?;
    let projected = prepare(&set.data, params.rank)?;
    let dirs = solve_directions(&projected.x, &params.admm)?;

    let row: Vec<f64> = (0..n).map(|j| dirs.responses.get(point, j)).collect();
    let dsc_top = top_indices(&row, top, None);

    let unit = normalize_columns(&set.data)?;
    let p = unit.data.column(point);
    let inner: Vec<f64> = (0..n)
        .map(|j| {
            unit.data
                .column(j)
                .iter()
                .zip(p)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
        })
        .collect();
    let tsc_top = top_indices(&inner, top, Some(point));

    // Direction back in ambient coordinates.
    let a_reduced = DenseMatrix::from_fn(projected.rank, 1, |i, _| dirs.astar.get(i, point))?;
    let a = mat_mul(projected.q.as_ref(), a_reduced.as_ref());
    let a_norm = a.norm_l2();
    let leak = match others_basis(&set.bases, own)? {
        Some(c) if a_norm > 0.0 => mat_mul(c.as_ref().transpose(), a.as_ref()).norm_l2() / a_norm,
        _ => 0.0,
    };

    let pure = |idx: &[usize]| idx.iter().all(|&j| labels[j] == own);
    Ok(ProbeOutcome {
        seed: cfg.seed,
        dsc_pure: pure(&dsc_top),
        tsc_pure: pure(&tsc_top),
        dsc_top,
        tsc_top,
        leak,
        converged: dirs.converged,
        iters: dirs.iters_used,
        feasibility_gap: dirs.feasibility_gap(&projected.x),
    })
}

impl ProbeSuite {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: ProbeSuite =
            toml::from_str(text).map_err(|e| Error::invalid(format!("probe spec: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self;
        if s.regimes.is_empty() || s.seeds == 0 {
            return Err(Error::invalid(
                "probe needs at least one regime and one seed",
            ));
        }
        if s.point >= s.points_per_cluster {
            return Err(Error::invalid("probed point must lie in the first cluster"));
        }
        for cfg in s.configs() {
            cfg.validate()?;
        }
        s.dsc.to_params(s.top, 0)?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("probe spec serializes")
    }

    fn configs(&self) -> Vec<SynthConfig> {
        self.regimes
            .iter()
            .map(|r| SynthConfig {
                ambient_dim: r.ambient_dim,
                clusters: self.clusters,
                subspace_dim: self.subspace_dim,
                intersection_dim: r.intersection_dim,
                points_per_cluster: self.points_per_cluster,
                seed: 0,
            })
            .collect()
    }
}

/// Probes every regime on `seeds` datasets each, in parallel on the current
/// rayon pool.
pub fn run_probe_suite(suite: &ProbeSuite) -> Result<Vec<ProbeSummary>> {
    suite
        .configs()
        .into_iter()
        .zip(&suite.regimes)
        .enumerate()
        .map(|(ri, (cfg, regime))| {
            let outcomes = (0..suite.seeds)
                .into_par_iter()
                .map(|s| {
                    let seed = derive_seed(derive_seed(suite.seed, ri as u64), s as u64);
                    neighborhood_probe(
                        &SynthConfig {
                            seed,
                            ..cfg.clone()
                        },
                        &suite.dsc,
                        suite.top,
                        suite.point,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProbeSummary {
                regime: regime.clone(),
                outcomes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_regime_is_pure_for_dsc() {
        let cfg = SynthConfig {
            ambient_dim: 16,
            clusters: 3,
            subspace_dim: 4,
            intersection_dim: 0,
            points_per_cluster: 20,
            seed: 4,
        };
        let out = neighborhood_probe(&cfg, &DscSection::default(), 5, 0).unwrap();
        assert!(out.dsc_pure, "{:?}", out.dsc_top);
        assert_eq!(out.dsc_top[0], 0);
        assert!(!out.tsc_top.contains(&0));
        assert!(out.leak < 0.05, "{}", out.leak);
    }

    #[test]
    fn suite_parses_and_rejects() {
        let text = r#"
            name = "p"
            clusters = 2
            subspace_dim = 3
            points_per_cluster = 10
            seeds = 2
            top = 4
            [[regimes]]
            ambient_dim = 10
            intersection_dim = 1
        "#;
        let s = ProbeSuite::from_toml(text).unwrap();
        assert_eq!(ProbeSuite::from_toml(&s.to_toml()).unwrap(), s);
        let res = run_probe_suite(&s).unwrap();
        assert_eq!(res[0].outcomes.len(), 2);
        assert!(ProbeSuite::from_toml(
            &text.replace("intersection_dim = 1", "intersection_dim = 3")
        )
        .is_err());
        assert!(ProbeSuite::from_toml(&text.replace("seeds = 2", "seeds = 0")).is_err());
    }
}
