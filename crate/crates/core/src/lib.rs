pub mod affinity;
pub mod datamodel;
pub mod dirsearch;
pub mod error;
pub mod evalbench;
pub mod numkernel;
pub mod pipeline;
pub mod seeding;
pub mod spectral;
pub mod synthgen;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testkit;
