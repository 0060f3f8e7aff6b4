//! Synthetic-data generation: linear-Gaussian parameterization of a network
//! structure, ancestral sampling of the observed margin, random DAG
//! instances for the property suites, and the experiment spec file.
//!
//! All randomness flows through `ChaCha8Rng`. Substreams are derived from
//! the master seed with `set_stream`, packing (target, sample-size,
//! repetition, role) into the 64-bit stream id, so repetitions are
//! independent and reproducible regardless of execution order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::ci::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Dag, Mark, MixedGraph};

/// Linear-Gaussian structural causal model over a DAG.
#[derive(Debug, Clone)]
pub struct Scm {
    pub dag: Dag,
    /// Weight per directed edge `(parent, child)`.
    pub weights: BTreeMap<(usize, usize), f64>,
    pub noise_std: Vec<f64>,
    pub seed: u64,
}

/// Role tag for substream derivation.
#[derive(Debug, Clone, Copy)]
pub enum StreamRole {
    Weights = 0,
    Data = 1,
    Design = 2,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent substream seed from the master seed and the
/// (target, sample-size, repetition, role) coordinates.
pub fn derive_seed(master: u64, target: u64, size: u64, rep: u64, role: StreamRole) -> u64 {
    let mut state = master;
    for id in [target, size, rep, role as u64] {
        state = splitmix64(&mut state) ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    }
    splitmix64(&mut state)
}

/// Draws edge weights uniformly from [-1, -0.5] ∪ [0.5, 1] (fair-coin sign,
/// uniform magnitude) and fixes all noise standard deviations at 1.
pub fn parameterize(dag: &Dag, seed: u64) -> Scm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = BTreeMap::new();
    for (a, b, ma, _) in dag.graph().edges() {
        let (p, c) = if ma == Mark::Tail { (a, b) } else { (b, a) };
        let magnitude = rng.random_range(0.5..=1.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        weights.insert((p, c), sign * magnitude);
    }
    let noise_std = vec![1.0; dag.graph().n()];
    Scm {
        dag: dag.clone(),
        weights,
        noise_std,
        seed,
    }
}

/// Ancestral sampling in topological order; returns only the `observed`
/// columns, in the order given.
pub fn sample(scm: &Scm, n: usize, observed: &[usize], seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidQuery("sample size must be positive".into()));
    }
    let g = scm.dag.graph();
    let p_all = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = observed.iter().map(|&v| g.name(v).to_string()).collect();
    let mut data = vec![0.0f64; n * observed.len()];
    let mut row = vec![0.0f64; p_all];
    for r in 0..n {
        for &v in scm.dag.topological_order() {
            let mut val: f64 = rng.sample::<f64, _>(StandardNormal) * scm.noise_std[v];
            for pa in g.parents_of(v) {
                val += scm.weights[&(pa, v)] * row[pa];
            }
            row[v] = val;
        }
        for (j, &v) in observed.iter().enumerate() {
            data[r * observed.len() + j] = row[v];
        }
    }
    Dataset::new(names, data, n)
}

/// Random DAG: a uniformly random topological order with each forward pair
/// made an edge with probability `mean_degree / (n_nodes - 1)`.
pub fn random_dag(n_nodes: usize, mean_degree: f64, seed: u64) -> Result<Dag> {
    if n_nodes < 2 {
        return Err(Error::InvalidQuery("need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_nodes).collect();
    for i in (1..n_nodes).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let p_edge = (mean_degree / (n_nodes as f64 - 1.0)).clamp(0.0, 1.0);
    let mut g = MixedGraph::new((1..=n_nodes).map(|i| format!("X{i}")))?;
    for i in 0..n_nodes {
        for j in i + 1..n_nodes {
            if rng.random_bool(p_edge) {
                g.add_edge(order[i], order[j], Mark::Tail, Mark::Arrow)?;
            }
        }
    }
    Dag::new(g)
}

/// Picks up to `k` latent nodes uniformly among nodes with at least two
/// children, so that hiding them actually induces confounding.
pub fn choose_latents(dag: &Dag, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let g = dag.graph();
    let mut candidates: Vec<usize> = (0..g.n()).filter(|&v| g.children_of(v).len() >= 2).collect();
    let take = k.min(candidates.len());
    for i in 0..take {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
    }
    let mut chosen: Vec<usize> = candidates[..take].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Experiment configuration read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Path to the network file, relative to the spec file's directory.
    pub network: String,
    /// Explicit latent node names; mutually exclusive with `n_latents`.
    #[serde(default)]
    pub latents: Vec<String>,
    /// Number of latents chosen among multi-child nodes.
    pub n_latents: Option<usize>,
    /// One or more targets; `target = "X"` is accepted as shorthand.
    #[serde(default)]
    pub targets: Vec<String>,
    pub target: Option<String>,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: ExperimentSpec = toml::from_str(&text)?;
        if let Some(t) = spec.target.take() {
            spec.targets.push(t);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidSpec("no target given".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidSpec("no sample sizes given".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidSpec("repetitions must be positive".into()));
        }
        if !self.latents.is_empty() && self.n_latents.is_some() {
            return Err(Error::InvalidSpec(
                "give either `latents` or `n_latents`, not both".into(),
            ));
        }
        if self.targets.iter().any(|t| self.latents.contains(t)) {
            return Err(Error::InvalidSpec("a target cannot be latent".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) || self.alpha <= 0.0 {
            return Err(Error::InvalidSpec("alpha must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Resolves the network path relative to `base` (the spec file's dir).
    pub fn network_path(&self, base: &Path) -> PathBuf {
        let p = Path::new(&self.network);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_live_in_the_prescribed_band() {
        let dag = random_dag(10, 2.5, 7).unwrap();
        let scm = parameterize(&dag, 99);
        assert!(!scm.weights.is_empty());
        for w in scm.weights.values() {
            assert!((0.5..=1.0).contains(&w.abs()), "weight {w} out of range");
        }
    }

    #[test]
    fn parameterize_is_deterministic() {
        let dag = random_dag(8, 2.0, 3).unwrap();
        let a = parameterize(&dag, 42);
        let b = parameterize(&dag, 42);
        assert_eq!(a.weights, b.weights);
        assert!(a.noise_std.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn weight_sign_mass_is_balanced() {
        let mut g = MixedGraph::new(vec!["a", "b"]).unwrap();
        g.add_edge(0, 1, Mark::Tail, Mark::Arrow).unwrap();
        let dag = Dag::new(g).unwrap();
        let mut positive = 0usize;
        let trials = 100_000;
        for seed in 0..trials {
            let scm = parameterize(&dag, seed as u64);
            if scm.weights[&(0, 1)] > 0.0 {
                positive += 1;
            }
        }
        let frac = positive as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.01, "positive mass {frac}");
    }

    #[test]
    fn chain_correlation_matches_analytic_value() {
        let mut g = MixedGraph::new(vec!["x", "y"]).unwrap();
        g.add_edge(0, 1, Mark::Tail, Mark::Arrow).unwrap();
        let dag = Dag::new(g).unwrap();
        let mut scm = parameterize(&dag, 1);
        scm.weights.insert((0, 1), 0.8);
        let ds = sample(&scm, 100_000, &[0, 1], 5).unwrap();
        let cov = ds.covariance();
        let corr = cov[(0, 1)] / (cov[(0, 0)] * cov[(1, 1)]).sqrt();
        let expected = 0.8 / (1.0f64 + 0.64).sqrt();
        assert!((corr - expected).abs() < 0.01, "corr {corr} vs {expected}");
    }

    #[test]
    fn sample_respects_observed_columns_and_n() {
        let dag = random_dag(6, 2.0, 11).unwrap();
        let scm = parameterize(&dag, 11);
        let ds = sample(&scm, 1, &[0, 2, 4], 3).unwrap();
        assert_eq!(ds.n_rows(), 1);
        assert_eq!(ds.names(), &["X1".to_string(), "X3".into(), "X5".into()]);
    }

    #[test]
    fn mean_degree_zero_gives_edgeless_dag() {
        let dag = random_dag(9, 0.0, 1).unwrap();
        assert_eq!(dag.graph().edge_count(), 0);
    }

    #[test]
    fn expected_edge_count_matches_binomial_mean() {
        let n = 10usize;
        let mean_degree = 2.0;
        let mut total = 0usize;
        let draws = 1000;
        for seed in 0..draws {
            total += random_dag(n, mean_degree, seed as u64).unwrap().graph().edge_count();
        }
        let avg = total as f64 / draws as f64;
        let expected = n as f64 * mean_degree / 2.0;
        assert!(
            (avg - expected).abs() / expected < 0.05,
            "avg {avg} vs expected {expected}"
        );
    }

    #[test]
    fn latent_choice_requires_multiple_children() {
        let mut g = MixedGraph::new(vec!["a", "b", "c", "d"]).unwrap();
        g.add_edge(0, 1, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(0, 2, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(1, 3, Mark::Tail, Mark::Arrow).unwrap();
        let dag = Dag::new(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let chosen = choose_latents(&dag, 3, &mut rng);
        assert_eq!(chosen, vec![0]);
    }

    #[test]
    fn spec_validation_catches_conflicts() {
        let spec = ExperimentSpec {
            network: "net".into(),
            latents: vec!["a".into()],
            n_latents: Some(2),
            targets: vec!["t".into()],
            target: None,
            sample_sizes: vec![100],
            repetitions: 1,
            seed: 0,
            alpha: 0.05,
        };
        assert!(spec.validate().is_err());
    }
}
