//! Random-subject protocol on labeled real data (one label per subject).

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::clustering_error;
use super::experiment::DscSection;
use crate::affinity::default_neighbors;
use crate::datamodel::{DataMatrix, RankPolicy};
use crate::error::{Error, Result};
use crate::pipeline::run_dsc;
use crate::seeding::{derive_seed, stream_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectProtocol {
    pub name: String,
    pub subjects: usize,
    /// Random subject combinations drawn.
    pub combinations: usize,
    /// Projection rank, lowered to the size of the selected data if needed.
    pub projection_rank: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dsc: DscSection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRun {
    /// Original labels of the selected subjects, ascending.
    pub subjects: Vec<usize>,
    pub points: usize,
    pub rank: usize,
    pub error_pct: f64,
    pub iters: usize,
    pub converged: bool,
    pub seconds: f64,
}

impl SubjectProtocol {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: SubjectProtocol =
            toml::from_str(text).map_err(|e| Error::invalid(format!("subject protocol: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self;
        if p.subjects < 2 || p.combinations == 0 || p.projection_rank == 0 {
            return Err(Error::invalid(
                "need at least two subjects, one combination and a positive projection rank",
            ));
        }
        p.dsc.to_params(3, 0)?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("protocol serializes")
    }
}

/// For each combination: draw `subjects` distinct labels, keep their
/// points, relabel them `0..subjects`, cluster with DSC at a fixed
/// projection rank and score the result.
pub fn run_subject_protocol(d: &DataMatrix, protocol: &SubjectProtocol) -> Result<Vec<SubjectRun>> {
    let labels = d
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("subject protocol needs labeled data"))?;
    let distinct: Vec<usize> = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if distinct.len() < protocol.subjects {
        return Err(Error::invalid(format!(
            "{} subjects requested but the data has {}",
            protocol.subjects,
            distinct.len()
        )));
    }
    let mut runs = Vec::with_capacity(protocol.combinations);
    for c in 0..protocol.combinations {
        let mut rng = stream_rng(protocol.seed, c as u64);
        let mut chosen: Vec<usize> = sample(&mut rng, distinct.len(), protocol.subjects)
            .into_iter()
            .map(|i| distinct[i])
            .collect();
        chosen.sort_unstable();
        let columns: Vec<usize> = (0..labels.len())
            .filter(|&j| chosen.contains(&labels[j]))
            .collect();
        let mut subset = d.select(&columns)?;
        subset.labels = Some(
            columns
                .iter()
                .map(|&j| chosen.binary_search(&labels[j]).unwrap())
                .collect(),
        );
        let rank = protocol.projection_rank.min(subset.dim()).min(subset.len());
        let mut params = protocol.dsc.to_params(
            default_neighbors(subset.len(), protocol.subjects, None),
            derive_seed(protocol.seed, c as u64),
        )?;
        params.rank = RankPolicy::Fixed(rank);
        let start = Instant::now();
        let run = run_dsc(&subset, protocol.subjects, &params)?;
        let seconds = start.elapsed().as_secs_f64();
        runs.push(SubjectRun {
            error_pct: clustering_error(&run.labels.labels, subset.labels.as_ref().unwrap())?,
            subjects: chosen,
            points: subset.len(),
            rank,
            iters: run.directions.iters_used,
            converged: run.directions.converged,
            seconds,
        });
    }
    Ok(runs)
}
