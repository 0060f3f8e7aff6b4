//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate node `{0}`")]
    DuplicateNode(String),

    #[error("self-loop on `{0}`")]
    SelfLoop(String),

    #[error("duplicate edge `{0}`-`{1}`")]
    DuplicateEdge(String, String),

    #[error("not a DAG: {0}")]
    NotADag(String),

    #[error("not a MAG: {0}")]
    NotAMag(String),

    #[error("undirected edge `{0}`-`{1}` rejected: selection bias is not modeled")]
    SelectionBiasEdge(String, String),

    #[error("graph too large for exhaustive path enumeration ({nodes} nodes, limit {limit})")]
    GraphTooLarge { nodes: usize, limit: usize },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("degenerate conditioning set")]
    DegenerateConditioningSet,

    #[error("insufficient sample size: n={n} cannot support a conditioning set of size {z}")]
    InsufficientSampleSize { n: usize, z: usize },

    #[error("inconsistent orientation: rule {rule} wants {wanted:?} at `{node}` on edge `{a}`-`{b}` but {found:?} is set")]
    InconsistentOrientation {
        rule: &'static str,
        a: String,
        b: String,
        node: String,
        wanted: crate::graph::Mark,
        found: crate::graph::Mark,
    },

    #[error("parse error at line {line}: {msg}")]
    NetParse { line: usize, msg: String },

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
