//! Shared fixtures for the unit-test modules.

use crate::graph::{parse_net, Dag, Mag};
use crate::project::latent_project;

/// 12-node network with two hideable confounders; the running example
/// throughout the crate's tests. Matches `networks/demo12.net`.
pub fn demo_dag() -> Dag {
    let text = "\
node V1\nnode V2\nnode V3\nnode V4\nnode V5\nnode V6\n\
node V7\nnode V8\nnode V9\nnode V10\nnode V11\nnode V12\n\
V11 -> V3\nV1 -> V3\nV1 -> V4\nV2 -> V4\nV2 -> V7\nV3 -> V10\n\
V4 -> V5\nV7 -> V8\nV5 -> V10\nV6 -> V5\nV6 -> V8\nV12 -> V8\nV8 -> V9\n";
    Dag::new(parse_net(text).unwrap()).unwrap()
}

/// The demo DAG projected over its observed margin (V1 and V6 hidden).
pub fn demo_mag() -> Mag {
    let dag = demo_dag();
    let g = dag.graph();
    let latents = vec![g.require("V1").unwrap(), g.require("V6").unwrap()];
    latent_project(&dag, &latents).unwrap()
}
