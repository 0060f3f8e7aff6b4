//! Local causal structure learning around a single target variable from
//! observational data that may contain latent confounders.
//!
//! The library learns the direct causes and effects of a target by walking
//! outward through MAG Markov blankets: each pivot's blanket is discovered
//! by total conditioning, a local skeleton with V-structures is learned over
//! it, and only the information valid around the pivot (its incident edges
//! and the V-structures containing it) is merged into a growing fragment,
//! which is then closed under the complete orientation rules. Three stop
//! rules end the walk as soon as the target's neighborhood is settled,
//! typically after a small fraction of the conditional-independence tests a
//! global learner would spend.
//!
//! Two interchangeable CI backends drive everything: an m-separation oracle
//! over a (projected) MAG, and a Fisher-z partial-correlation test over a
//! Gaussian dataset.

pub mod ci;
pub mod driver;
pub mod error;
pub mod eval;
pub mod graph;
pub mod local;
pub mod mmb;
pub mod msep;
pub mod orient;
pub mod project;
pub mod simgen;

#[cfg(test)]
pub(crate) mod testutil;

pub use ci::{CiBackend, CiDecision, Dataset, FisherZBackend, OracleBackend};
pub use driver::{run_mmb_by_mmb, LocalResult, StopRule};
pub use error::{Error, Result};
pub use graph::{parse_net, write_net, Dag, Mag, Mark, MixedGraph, Pag};
pub use mmb::{tc_mmb, MmbResult};
pub use project::{graph_mmb, latent_project, pag_from_mag};
