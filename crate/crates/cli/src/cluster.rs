use std::path::PathBuf;

use clap::ValueEnum;
use dsc_core::affinity::default_neighbors;
use dsc_core::datamodel::{load_matrix, write_labels, InputFormat, RankPolicy};
use dsc_core::dirsearch::{AUpdateMode, AdmmConfig, ResponseNorm};
use dsc_core::evalbench::{clustering_error, tsc_similarity};
use dsc_core::pipeline::{direction_graph, run_dsc, DscParams};
use dsc_core::spectral::{spectral_cluster, DEFAULT_RESTARTS};

use crate::{CliResult, Failure};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algo {
    Dsc,
    Tsc,
}

#[derive(clap::Args, Debug)]
pub struct ClusterArgs {
    /// Dataset: a CSV file or a directory of PGM images.
    #[arg(short, long, env = "DSC_INPUT")]
    input: PathBuf,
    /// `csv` or `pgm-dir`; guessed from the path when omitted.
    #[arg(long, env = "DSC_FORMAT")]
    format: Option<String>,
    /// Predicted labels file.
    #[arg(short, long, env = "DSC_OUTPUT")]
    output: PathBuf,
    /// Number of clusters; defaults to the number of true labels.
    #[arg(short = 'k', long, env = "DSC_CLUSTERS")]
    clusters: Option<usize>,
    #[arg(long, value_enum, env = "DSC_ALGO", default_value = "dsc")]
    algo: Algo,
    /// Response norm exponent, 1 or 2.
    #[arg(long, env = "DSC_P", default_value_t = 2)]
    p: u8,
    #[arg(long, env = "DSC_MU", default_value_t = 3.3)]
    mu: f64,
    #[arg(long, env = "DSC_GAMMA", default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, env = "DSC_MAX_ITERS", default_value_t = 300)]
    max_iters: usize,
    #[arg(long, env = "DSC_TOL", default_value_t = 1e-5)]
    tol: f64,
    /// Direction update: `paper` or `exact`.
    #[arg(long, env = "DSC_A_UPDATE", default_value = "paper")]
    a_update: String,
    /// Projection rank: `exact`, `fixed:R` or `energy:T`.
    #[arg(long, env = "DSC_RANK", default_value = "energy:0.95")]
    rank: String,
    /// Neighborhood size.
    #[arg(short = 'g', long, env = "DSC_NEIGHBORS")]
    neighbors: Option<usize>,
    /// Subspace dimension, used only to pick the default neighborhood size.
    #[arg(long, env = "DSC_SUBSPACE_DIM")]
    subspace_dim: Option<usize>,
    /// Drop each point from its own neighborhood.
    #[arg(long, env = "DSC_EXCLUDE_SELF")]
    exclude_self: bool,
    /// Rescale projected points to unit norm before computing angles.
    #[arg(long, env = "DSC_RENORMALIZE")]
    renormalize: bool,
    #[arg(long, env = "DSC_RESTARTS", default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, env = "DSC_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the similarity graph as an `i,j,weight` edge list.
    #[arg(long, env = "DSC_EDGES")]
    edges: Option<PathBuf>,
}

impl ClusterArgs {
    fn header(&self, format: InputFormat, k: usize, g: usize) -> Vec<String> {
        let algo = match self.algo {
            Algo::Dsc => "dsc",
            Algo::Tsc => "tsc",
        };
        let fmt = match format {
            InputFormat::Csv => "csv",
            InputFormat::PgmDir => "pgm-dir",
        };
        let mut flags = format!(
            "dsc cluster --input {} --format {fmt} --clusters {k} --algo {algo} --neighbors {g} --restarts {} --seed {}",
            self.input.display(),
            self.restarts,
            self.seed
        );
        if let Algo::Dsc = self.algo {
            flags.push_str(&format!(
                " --p {} --mu {} --gamma {} --max-iters {} --tol {} --a-update {} --rank {}",
                self.p, self.mu, self.gamma, self.max_iters, self.tol, self.a_update, self.rank
            ));
            if self.exclude_self {
                flags.push_str(" --exclude-self");
            }
            if self.renormalize {
                flags.push_str(" --renormalize");
            }
        }
        vec![flags]
    }
}

fn guess_format(a: &ClusterArgs) -> CliResult<InputFormat> {
    match &a.format {
        Some(f) => Ok(f.parse()?),
        None if a.input.is_dir() => Ok(InputFormat::PgmDir),
        None => Ok(InputFormat::Csv),
    }
}

pub fn run(a: ClusterArgs) -> CliResult {
    let format = guess_format(&a)?;
    let admm = AdmmConfig {
        norm: ResponseNorm::from_p(a.p)?,
        mu: a.mu,
        gamma: a.gamma,
        max_iters: a.max_iters,
        tol: a.tol,
        a_update: a.a_update.parse::<AUpdateMode>()?,
    };
    admm.validate()?;
    let rank: RankPolicy = a.rank.parse()?;

    let d = load_matrix(&a.input, format)?;
    let k = match (a.clusters, d.cluster_count()) {
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => return Err(Failure::usage("--clusters is required for unlabeled data")),
    };
    if k == 0 || k > d.len() {
        return Err(Failure::usage(format!("--clusters {k} outside 1..={}", d.len())));
    }
    let g = a.neighbors.unwrap_or_else(|| default_neighbors(d.len(), k, a.subspace_dim));

    let (labels, graph) = match a.algo {
        Algo::Dsc => {
            let params = DscParams {
                admm,
                rank,
                neighbors: Some(g),
                exclude_self: a.exclude_self,
                renormalize: a.renormalize,
                restarts: a.restarts,
                seed: a.seed,
            };
            let run = run_dsc(&d, k, &params)?;
            let dirs = &run.directions;
            eprintln!(
                "direction search: {} iterations, converged={}, max residual {:.3e}, feasibility gap {:.3e}, rank {}",
                dirs.iters_used,
                dirs.converged,
                dirs.final_residuals.max(),
                dirs.feasibility_gap(&run.projected.x),
                run.projected.rank
            );
            if !dirs.converged {
                eprintln!("warning: direction search stopped at the iteration cap");
            }
            let graph = match &a.edges {
                Some(_) => Some(direction_graph(&run.projected, dirs, g, a.exclude_self, a.renormalize)?),
                None => None,
            };
            (run.labels, graph)
        }
        Algo::Tsc => {
            let unit = dsc_core::datamodel::normalize_columns(&d)?;
            let graph = tsc_similarity(&unit.data, g)?;
            (spectral_cluster(&graph, k, a.restarts, a.seed)?, Some(graph))
        }
    };

    write_labels(&a.output, &labels.labels, &a.header(format, k, g))?;
    if let (Some(path), Some(graph)) = (&a.edges, &graph) {
        graph.write_edge_list(path)?;
    }
    if let Some(truth) = &d.labels {
        let err = clustering_error(&labels.labels, truth).map_err(|e| Failure::compute(e.to_string()))?;
        println!("clustering error: {err:.2}%");
    }
    Ok(())
}
