//! End-to-end DSC: normalize, project, search directions, build the
//! similarity graph, cluster.

use crate::affinity::{angular_weights, default_neighbors, select_neighborhoods, SimilarityGraph};
use crate::datamodel::{normalize_columns, project_to_span, DataMatrix, ProjectedData, RankPolicy};
use crate::dirsearch::{solve_directions, AdmmConfig, DirectionSet};
use crate::error::{Error, Result};
use crate::spectral::{spectral_cluster, ClusterLabels, DEFAULT_RESTARTS};

#[derive(Clone, Debug, PartialEq)]
pub struct DscParams {
    pub admm: AdmmConfig,
    pub rank: RankPolicy,
    /// Neighborhood size; `None` picks [`default_neighbors`] without a known
    /// subspace dimension.
    pub neighbors: Option<usize>,
    pub exclude_self: bool,
    /// Rescale projected points to unit norm before computing angles.
    pub renormalize: bool,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for DscParams {
    fn default() -> Self {
        DscParams {
            admm: AdmmConfig::default(),
            rank: RankPolicy::Energy(0.95),
            neighbors: None,
            exclude_self: false,
            renormalize: false,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DscRun {
    pub labels: ClusterLabels,
    pub directions: DirectionSet,
    pub projected: ProjectedData,
    pub neighbors: usize,
}

/// Unit-normalizes the points and projects them onto their dominant span.
pub fn prepare(d: &DataMatrix, rank: RankPolicy) -> Result<ProjectedData> {
    project_to_span(&normalize_columns(d)?, rank)
}

/// Similarity graph from the top-`g` responses of each direction.
pub fn direction_graph(
    projected: &ProjectedData,
    directions: &DirectionSet,
    g: usize,
    exclude_self: bool,
    renormalize: bool,
) -> Result<SimilarityGraph> {
    let nbrs = select_neighborhoods(&directions.responses, g, exclude_self)?;
    angular_weights(&projected.x, &nbrs, renormalize)?.symmetrize()
}

/// Clusters the columns of `d` into `clusters` groups. A solver that stops
/// at the iteration cap still yields a clustering; see
/// `directions.converged`.
pub fn run_dsc(d: &DataMatrix, clusters: usize, params: &DscParams) -> Result<DscRun> {
    if clusters == 0 || clusters > d.len() {
        return Err(Error::invalid(format!(
            "cluster count {clusters} outside 1..={}",
            d.len()
        )));
    }
    params.admm.validate()?;
    let projected = prepare(d, params.rank)?;
    let g = params
        .neighbors
        .unwrap_or_else(|| default_neighbors(d.len(), clusters, None));
    let directions = solve_directions(&projected.x, &params.admm)?;
    let graph = direction_graph(
        &projected,
        &directions,
        g,
        params.exclude_self,
        params.renormalize,
    )?;
    let labels = spectral_cluster(&graph, clusters, params.restarts, params.seed)?;
    Ok(DscRun {
        labels,
        directions,
        projected,
        neighbors: g,
    })
}
