//! Scoring against the equivalence-class truth, result/truth JSON schemas,
//! the nTest comparator, and the repetition-sweep experiment harness.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{CiBackend, FisherZBackend};
use crate::driver::{run_mmb_by_mmb, LocalResult, StopRule};
use crate::error::{Error, Result};
use crate::graph::{parse_net, Dag, Mark, MixedGraph, Pag};
use crate::local::learn_skeleton;
use crate::project::{latent_project, pag_from_mag};
use crate::simgen::{choose_latents, derive_seed, parameterize, sample, ExperimentSpec, StreamRole};

/// Evaluation record for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub distance: f64,
    pub n_tests: u64,
    /// Set when the prediction had no target-incident edges; precision and
    /// f1 are then zero by convention.
    pub empty_prediction: bool,
}

/// Per-edge comparison against the truth PAG. A predicted edge is true iff
/// it exists in the truth and both endpoint marks match.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeJudgment {
    pub a: String,
    pub b: String,
    pub predicted: (Mark, Mark),
    pub truth: Option<(Mark, Mark)>,
    pub verdict: bool,
}

/// Target-incident edges of a graph as name-keyed mark pairs.
fn target_edges_by_name(g: &MixedGraph, target: usize) -> BTreeMap<(String, String), (Mark, Mark)> {
    let mut out = BTreeMap::new();
    for v in g.neighbors(target) {
        let (a, b) = (target.min(v), target.max(v));
        out.insert(
            (g.name(a).to_string(), g.name(b).to_string()),
            (g.mark_at(a, b).unwrap(), g.mark_at(b, a).unwrap()),
        );
    }
    out
}

/// Judges every predicted target-incident edge against the truth PAG.
pub fn judge_target_edges(
    predicted: &BTreeMap<(String, String), (Mark, Mark)>,
    truth: &Pag,
    target_name: &str,
) -> Result<Vec<EdgeJudgment>> {
    let tg = truth.graph();
    let t = tg.require(target_name)?;
    let truth_edges = target_edges_by_name(tg, t);
    Ok(predicted
        .iter()
        .map(|((a, b), &marks)| {
            let truth_marks = truth_edges.get(&(a.clone(), b.clone())).copied();
            EdgeJudgment {
                a: a.clone(),
                b: b.clone(),
                predicted: marks,
                truth: truth_marks,
                verdict: truth_marks == Some(marks),
            }
        })
        .collect())
}

fn metrics_from_counts(
    true_edges: usize,
    predicted: usize,
    truth_total: usize,
    n_tests: u64,
) -> Metrics {
    let empty_prediction = predicted == 0;
    let precision = if predicted == 0 {
        0.0
    } else {
        true_edges as f64 / predicted as f64
    };
    let recall = if truth_total == 0 {
        0.0
    } else {
        true_edges as f64 / truth_total as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let distance = ((1.0 - recall).powi(2) + (1.0 - precision).powi(2)).sqrt();
    Metrics {
        precision,
        recall,
        f1,
        distance,
        n_tests,
        empty_prediction,
    }
}

/// Scores a run against the truth PAG restricted to the target: precision
/// over predicted target-incident edges, recall over the truth's, both
/// requiring exact endpoint marks.
pub fn score_local(pred: &LocalResult, truth: &Pag) -> Result<Metrics> {
    let pg = pred.p.graph();
    let target_name = pg.name(pred.target).to_string();
    let predicted = target_edges_by_name(pg, pred.target);
    let judgments = judge_target_edges(&predicted, truth, &target_name)?;
    let true_edges = judgments.iter().filter(|j| j.verdict).count();
    let t_truth = truth.graph().require(&target_name)?;
    let truth_total = truth.graph().degree(t_truth);
    Ok(metrics_from_counts(
        true_edges,
        predicted.len(),
        truth_total,
        pred.n_tests,
    ))
}

/// Scores an edge list parsed from a result file (CLI `eval`).
pub fn score_edge_list(
    edges: &[(String, String, Mark, Mark)],
    n_tests: u64,
    truth: &Pag,
    target_name: &str,
) -> Result<Metrics> {
    let t = truth.graph().require(target_name)?;
    let mut predicted = BTreeMap::new();
    for (a, b, ma, mb) in edges {
        if a == target_name || b == target_name {
            let (ka, kb, m) = if a <= b {
                (a.clone(), b.clone(), (*ma, *mb))
            } else {
                (b.clone(), a.clone(), (*mb, *ma))
            };
            predicted.insert((ka, kb), m);
        }
    }
    let judgments = judge_target_edges(&predicted, truth, target_name)?;
    let true_edges = judgments.iter().filter(|j| j.verdict).count();
    Ok(metrics_from_counts(
        true_edges,
        predicted.len(),
        truth.graph().degree(t),
        n_tests,
    ))
}

/// Runs the PC-style skeleton pass over all variables and reports the CI
/// calls it consumed; the frugality comparator.
pub fn global_skeleton_tests<B: CiBackend>(backend: &mut B) -> Result<u64> {
    let all: Vec<usize> = (0..backend.num_vars()).collect();
    learn_skeleton(backend, &all)?;
    Ok(backend.n_tests())
}

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJson {
    pub a: String,
    pub b: String,
    pub mark_at_a: Mark,
    pub mark_at_b: Mark,
}

/// `result.json`: the fragment around the target plus the classified
/// adjacency, the stop rule, the CI-call count and the pivot trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultJson {
    pub target: String,
    pub parents: Vec<String>,
    pub children: Vec<String>,
    pub ambiguous: Vec<String>,
    pub bidirected: Vec<String>,
    pub edges: Vec<EdgeJson>,
    pub stop_rule: StopRule,
    pub n_tests: u64,
    pub trace: Vec<String>,
}

impl ResultJson {
    pub fn from_local_result(r: &LocalResult) -> Self {
        let g = r.p.graph();
        let names = |vs: &[usize]| vs.iter().map(|&v| g.name(v).to_string()).collect();
        ResultJson {
            target: g.name(r.target).to_string(),
            parents: names(&r.parents),
            children: names(&r.children),
            ambiguous: names(&r.ambiguous),
            bidirected: names(&r.spouses_or_confounded),
            edges: g
                .edges()
                .into_iter()
                .map(|(a, b, ma, mb)| EdgeJson {
                    a: g.name(a).to_string(),
                    b: g.name(b).to_string(),
                    mark_at_a: ma,
                    mark_at_b: mb,
                })
                .collect(),
            stop_rule: r.stop_rule,
            n_tests: r.n_tests,
            trace: names(&r.trace),
        }
    }
}

/// `pag.json`: the equivalence-class reference graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthJson {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeJson>,
}

impl TruthJson {
    pub fn from_pag(p: &Pag) -> Self {
        let g = p.graph();
        TruthJson {
            nodes: g.names().to_vec(),
            edges: g
                .edges()
                .into_iter()
                .map(|(a, b, ma, mb)| EdgeJson {
                    a: g.name(a).to_string(),
                    b: g.name(b).to_string(),
                    mark_at_a: ma,
                    mark_at_b: mb,
                })
                .collect(),
        }
    }

    pub fn to_pag(&self) -> Result<Pag> {
        let mut g = MixedGraph::new(self.nodes.iter().cloned())?;
        for e in &self.edges {
            let a = g.require(&e.a)?;
            let b = g.require(&e.b)?;
            g.add_edge(a, b, e.mark_at_a, e.mark_at_b)?;
        }
        Ok(Pag::new(g))
    }
}

// ---------------------------------------------------------------------------
// Experiment harness
// ---------------------------------------------------------------------------

/// Fully loaded experiment: structure, latent choice and sweep parameters.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub dag: Dag,
    pub latents: Vec<usize>,
    pub observed: Vec<usize>,
    pub targets: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub alpha: f64,
}

/// Loads the network file and resolves latent/target names. Explicit latents
/// are taken verbatim; `n_latents` picks them among multi-child nodes with a
/// dedicated substream of the master seed.
pub fn resolve_experiment(spec: &ExperimentSpec, base_dir: &Path) -> Result<ResolvedExperiment> {
    spec.validate()?;
    let text = std::fs::read_to_string(spec.network_path(base_dir))?;
    let dag = Dag::new(parse_net(&text)?)?;
    let g = dag.graph();

    let latents: Vec<usize> = if let Some(k) = spec.n_latents {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0, 0, 0, StreamRole::Design));
        choose_latents(&dag, k, &mut rng)
    } else {
        let mut ids = Vec::new();
        for name in &spec.latents {
            ids.push(g.require(name)?);
        }
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let observed: Vec<usize> = (0..g.n()).filter(|v| !latents.contains(v)).collect();
    let mut targets = Vec::new();
    for name in &spec.targets {
        let t = g.require(name)?;
        if latents.contains(&t) {
            return Err(Error::InvalidSpec(format!("target `{name}` is latent")));
        }
        targets.push(t);
    }
    Ok(ResolvedExperiment {
        dag,
        latents,
        observed,
        targets,
        sample_sizes: spec.sample_sizes.clone(),
        repetitions: spec.repetitions,
        seed: spec.seed,
        alpha: spec.alpha,
    })
}

/// One aggregate row of the sweep report.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub target: String,
    pub size: usize,
    pub repetitions: usize,
    pub failed: usize,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub distance_mean: f64,
    pub distance_std: f64,
    pub ntest_mean: f64,
    pub ntest_std: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One repetition: re-parameterize, sample the observed margin, run the
/// sequential algorithm on a fresh backend, and score against the truth.
pub fn run_repetition(
    exp: &ResolvedExperiment,
    truth: &Pag,
    target_pos: usize,
    size_idx: usize,
    rep: usize,
) -> Result<Metrics> {
    let wseed = derive_seed(
        exp.seed,
        target_pos as u64,
        size_idx as u64,
        rep as u64,
        StreamRole::Weights,
    );
    let dseed = derive_seed(
        exp.seed,
        target_pos as u64,
        size_idx as u64,
        rep as u64,
        StreamRole::Data,
    );
    let scm = parameterize(&exp.dag, wseed);
    let n = exp.sample_sizes[size_idx];
    let data = sample(&scm, n, &exp.observed, dseed)?;
    let mut backend = FisherZBackend::new(data, exp.alpha)?;
    let target = exp.targets[target_pos];
    let target_obs = exp
        .observed
        .iter()
        .position(|&v| v == target)
        .expect("target observed");
    let all: Vec<usize> = (0..exp.observed.len()).collect();
    let result = run_mmb_by_mmb(&mut backend, &all, target_obs)?;
    score_local(&result, truth)
}

/// Full sweep: repetitions x sample sizes per target, repetitions run in
/// parallel on independent substreams, aggregated in repetition order.
pub fn run_bench(exp: &ResolvedExperiment) -> Result<BenchReport> {
    let mag = latent_project(&exp.dag, &exp.latents)?;
    let (truth, _) = pag_from_mag(&mag)?;
    let mut rows = Vec::new();
    for (target_pos, &target) in exp.targets.iter().enumerate() {
        for size_idx in 0..exp.sample_sizes.len() {
            let per_rep: Vec<Result<Metrics>> = (0..exp.repetitions)
                .into_par_iter()
                .map(|rep| run_repetition(exp, &truth, target_pos, size_idx, rep))
                .collect();
            let mut ok = Vec::new();
            let mut failed = 0usize;
            for r in per_rep {
                match r {
                    Ok(m) => ok.push(m),
                    Err(e) => {
                        log::warn!("repetition failed: {e}");
                        failed += 1;
                    }
                }
            }
            let (p_m, p_s) = mean_std(&ok.iter().map(|m| m.precision).collect::<Vec<_>>());
            let (r_m, r_s) = mean_std(&ok.iter().map(|m| m.recall).collect::<Vec<_>>());
            let (f_m, f_s) = mean_std(&ok.iter().map(|m| m.f1).collect::<Vec<_>>());
            let (d_m, d_s) = mean_std(&ok.iter().map(|m| m.distance).collect::<Vec<_>>());
            let (t_m, t_s) = mean_std(&ok.iter().map(|m| m.n_tests as f64).collect::<Vec<_>>());
            rows.push(BenchRow {
                target: exp.dag.graph().name(target).to_string(),
                size: exp.sample_sizes[size_idx],
                repetitions: exp.repetitions,
                failed,
                precision_mean: p_m,
                precision_std: p_s,
                recall_mean: r_m,
                recall_std: r_s,
                f1_mean: f_m,
                f1_std: f_s,
                distance_mean: d_m,
                distance_std: d_s,
                ntest_mean: t_m,
                ntest_std: t_s,
            });
        }
    }
    Ok(BenchReport { rows })
}

impl BenchReport {
    /// Deterministic CSV rendering with Table-style headers.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "target,size,repetitions,failed,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,distance_mean,distance_std,ntest_mean,ntest_std\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.2},{:.2}\n",
                r.target,
                r.size,
                r.repetitions,
                r.failed,
                r.precision_mean,
                r.precision_std,
                r.recall_mean,
                r.recall_std,
                r.f1_mean,
                r.f1_std,
                r.distance_mean,
                r.distance_std,
                r.ntest_mean,
                r.ntest_std
            ));
        }
        out
    }
}
