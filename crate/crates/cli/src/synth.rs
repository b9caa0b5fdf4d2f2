use std::path::PathBuf;

use dsc_core::datamodel::write_csv;
use dsc_core::synthgen::{add_noise, generate, SynthConfig};

use crate::CliResult;

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Ambient dimension.
    #[arg(long, env = "DSC_M1")]
    m1: usize,
    /// Number of subspaces.
    #[arg(long, env = "DSC_N")]
    n: usize,
    /// Dimension of each subspace.
    #[arg(long, env = "DSC_D")]
    d: usize,
    /// Dimension of the intersection shared by all subspaces.
    #[arg(long, env = "DSC_Y", default_value_t = 0)]
    y: usize,
    #[arg(long, env = "DSC_PER_CLUSTER")]
    per_cluster: usize,
    /// Relative Frobenius norm of the added Gaussian noise.
    #[arg(long, env = "DSC_TAU", default_value_t = 0.0)]
    tau: f64,
    #[arg(long, env = "DSC_SEED", default_value_t = 0)]
    seed: u64,
    /// Output CSV (one point per row, label in the last column).
    #[arg(short, long, env = "DSC_OUTPUT")]
    output: PathBuf,
}

pub fn run(a: SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        ambient_dim: a.m1,
        clusters: a.n,
        subspace_dim: a.d,
        intersection_dim: a.y,
        points_per_cluster: a.per_cluster,
        seed: a.seed,
    };
    let clean = generate(&cfg)?;
    let noisy = add_noise(&clean, a.tau, a.seed)?;
    let diff: f64 = (0..clean.len())
        .flat_map(|j| {
            clean.data.column(j).iter().zip(noisy.data.column(j)).map(|(c, n)| (n - c).powi(2)).collect::<Vec<_>>()
        })
        .sum::<f64>()
        .sqrt();
    let ratio = diff / clean.data.frobenius_norm();
    let header = vec![
        format!(
            "dsc synth --m1 {} --n {} --d {} --y {} --per-cluster {} --tau {} --seed {}",
            a.m1, a.n, a.d, a.y, a.per_cluster, a.tau, a.seed
        ),
        format!("union rank {}", cfg.union_rank()),
        format!("achieved noise ratio {ratio:.6}"),
    ];
    write_csv(&a.output, &noisy, &header)?;
    eprintln!(
        "wrote {} points in {} dimensions to {}",
        noisy.len(),
        noisy.dim(),
        a.output.display()
    );
    Ok(())
}
