use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsc_core::datamodel::{load_matrix, InputFormat};
use dsc_core::evalbench::{run_experiment, run_probe_suite, run_subject_protocol, AlgorithmKind, BenchSpec};

use crate::{CliResult, Failure};

pub const PRESETS: [(&str, &str); 4] = [
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("table1", include_str!("../presets/table1.toml")),
];

#[derive(clap::Args, Debug)]
pub struct BenchArgs {
    /// Built-in preset: fig1, fig2, fig3 or table1.
    #[arg(long, env = "DSC_PRESET", conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<String>,
    /// Bench spec file (TOML); a `run.toml` from an earlier run works too.
    #[arg(long, env = "DSC_SPEC")]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, env = "DSC_OUTPUT")]
    output: PathBuf,
    /// Parallel trials; 0 uses every core.
    #[arg(short, long, env = "DSC_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Override the trial count of a sweep.
    #[arg(long, env = "DSC_TRIALS")]
    trials: Option<usize>,
    /// Labeled dataset for real-data protocols.
    #[arg(long, env = "DSC_DATA")]
    data: Option<PathBuf>,
    /// Print the resolved spec and exit.
    #[arg(long)]
    print_spec: bool,
}

fn load_spec(a: &BenchArgs) -> CliResult<BenchSpec> {
    let text = match (&a.preset, &a.spec) {
        (Some(name), _) => PRESETS
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                Failure::usage(format!("unknown preset `{name}` (available: {})", names.join(", ")))
            })?,
        (None, Some(path)) => {
            fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(Failure::usage("give --preset or --spec")),
    };
    let mut spec = BenchSpec::from_toml(&text)?;
    if let Some(t) = a.trials {
        match &mut spec {
            BenchSpec::Sweep(s) => s.trials = t,
            _ => return Err(Failure::usage("--trials applies only to sweeps")),
        }
        if let BenchSpec::Sweep(s) = &spec {
            s.validate()?;
        }
    }
    Ok(spec)
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn run(a: BenchArgs) -> CliResult {
    let spec = load_spec(&a)?;
    if a.print_spec {
        print!("{}", spec.to_toml());
        return Ok(());
    }
    fs::create_dir_all(&a.output).map_err(|e| Failure::usage(format!("{}: {e}", a.output.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    let mut resolved = spec.to_toml();
    if let Some(d) = &a.data {
        writeln!(resolved, "# data = {:?}", d.display().to_string()).unwrap();
    }
    write(&a.output.join("run.toml"), &resolved)?;

    match &spec {
        BenchSpec::Sweep(s) => {
            let res = pool.install(|| run_experiment(s))?;
            res.write_all(&a.output)?;
            // write_all stores the sweep body alone; keep the tagged form.
            write(&a.output.join("run.toml"), &resolved)?;
            for row in &res.summary {
                println!(
                    "{:<16} {:<4} mean {:>7.3}%  std {:>7.3}%  trials {}  failures {}",
                    row.point.label(),
                    row.algorithm,
                    row.mean_error_pct,
                    row.std_error_pct,
                    row.trials,
                    row.failures
                );
            }
            if s.algorithms.contains(&AlgorithmKind::Dsc) {
                let capped = res
                    .records
                    .iter()
                    .filter(|r| r.algorithm == AlgorithmKind::Dsc && !r.converged)
                    .count();
                if capped > 0 {
                    eprintln!("note: {capped} DSC trials stopped at the iteration cap");
                }
            }
            if !res.failures.is_empty() {
                eprintln!("warning: {} trial failures, see failures.csv", res.failures.len());
            }
        }
        BenchSpec::Probe(p) => {
            let res = pool.install(|| run_probe_suite(p))?;
            let mut csv = String::from(
                "ambient_dim,intersection_dim,seed,dsc_pure,tsc_pure,leak,iters,converged,feasibility_gap,dsc_top,tsc_top\n",
            );
            for s in &res {
                for o in &s.outcomes {
                    let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
                    writeln!(
                        csv,
                        "{},{},{},{},{},{:.6e},{},{},{:.3e},{},{}",
                        s.regime.ambient_dim,
                        s.regime.intersection_dim,
                        o.seed,
                        o.dsc_pure,
                        o.tsc_pure,
                        o.leak,
                        o.iters,
                        o.converged,
                        o.feasibility_gap,
                        join(&o.dsc_top),
                        join(&o.tsc_top)
                    )
                    .unwrap();
                }
                println!(
                    "M1={:<3} y={:<2} DSC pure {}/{}  TSC impure {}/{}  max leak {:.4}",
                    s.regime.ambient_dim,
                    s.regime.intersection_dim,
                    s.dsc_pure_count(),
                    s.outcomes.len(),
                    s.tsc_impure_count(),
                    s.outcomes.len(),
                    s.max_leak()
                );
            }
            write(&a.output.join("probe.csv"), &csv)?;
        }
        BenchSpec::Real(p) => {
            let path = a
                .data
                .as_ref()
                .ok_or_else(|| Failure::usage("real-data protocols need --data"))?;
            let format = if path.is_dir() { InputFormat::PgmDir } else { InputFormat::Csv };
            let d = load_matrix(path, format)?;
            let runs = pool.install(|| run_subject_protocol(&d, p))?;
            let mut csv = String::from("combination,subjects,points,rank,error_pct,iters,converged,seconds\n");
            for (i, r) in runs.iter().enumerate() {
                let subjects: Vec<String> = r.subjects.iter().map(|s| s.to_string()).collect();
                writeln!(
                    csv,
                    "{i},{},{},{},{:.4},{},{},{:.3}",
                    subjects.join(" "),
                    r.points,
                    r.rank,
                    r.error_pct,
                    r.iters,
                    r.converged,
                    r.seconds
                )
                .unwrap();
            }
            write(&a.output.join("subjects.csv"), &csv)?;
            let mean = runs.iter().map(|r| r.error_pct).sum::<f64>() / runs.len() as f64;
            println!("mean DSC error over {} combinations: {mean:.2}%", runs.len());
        }
    }
    eprintln!("outputs in {}", a.output.display());
    Ok(())
}
