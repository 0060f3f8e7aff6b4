//! Shared helpers for the integration suites: random instance generation and
//! the brute-force Markov-equivalence-class oracle. The oracle is
//! definitional (full m-separation fingerprints over all conditioning sets)
//! and never calls the orientation machinery it is used to check.

use mmbx_core::graph::{Dag, Mag, Mark, MixedGraph, Pag};
use mmbx_core::msep::m_separated;
use mmbx_core::project::latent_project;
use mmbx_core::simgen::{choose_latents, random_dag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random DAG-with-latents instance and its observed-margin MAG.
pub struct Instance {
    #[allow(dead_code)]
    pub dag: Dag,
    #[allow(dead_code)]
    pub latents: Vec<usize>,
    pub mag: Mag,
    /// Target as an index into the MAG's (observed) node space.
    pub target: usize,
}

/// Deterministic random instance: 8-15 nodes, mean degree in [1, 3], up to
/// `max_latents` latents among multi-child nodes, uniform observed target.
pub fn random_instance(seed: u64, max_latents: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(8..=15);
    let mean_degree = rng.random_range(1.0..=3.0);
    let dag = random_dag(n, mean_degree, rng.random()).unwrap();
    let k = rng.random_range(0..=max_latents);
    let latents = choose_latents(&dag, k, &mut rng);
    let mag = latent_project(&dag, &latents).unwrap();
    let target = rng.random_range(0..mag.graph().n());
    Instance {
        dag,
        latents,
        mag,
        target,
    }
}

/// Random ancestral mixed graph (directed and bidirected edges, no directed
/// or almost-directed cycle) for m-separation equivalence checks. The walk
/// formulation of m-separation coincides with the path definition only on
/// ancestral graphs, which is also the domain the library queries.
pub fn random_mixed_graph(seed: u64, max_nodes: usize) -> MixedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=max_nodes);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut g = MixedGraph::new((0..n).map(|i| format!("m{i}"))).unwrap();
    let mut bidirected = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !rng.random_bool(0.3) {
                continue;
            }
            let (a, b) = (order[i], order[j]);
            if rng.random_bool(0.35) {
                bidirected.push((a, b));
            } else {
                g.add_edge(a, b, Mark::Tail, Mark::Arrow).unwrap();
            }
        }
    }
    // A bidirected edge is only legal when neither endpoint is an ancestor
    // of the other; candidates violating that fall back to forward directed
    // edges. Fallbacks extend ancestry, so decide them to a fixpoint before
    // committing any bidirected edge.
    let mut undecided = bidirected;
    loop {
        let mut still = Vec::new();
        let mut changed = false;
        for (a, b) in undecided {
            let anc_b = mmbx_core::msep::ancestor_set(&g, &[b]);
            if anc_b[a] {
                g.add_edge(a, b, Mark::Tail, Mark::Arrow).unwrap();
                changed = true;
            } else {
                still.push((a, b));
            }
        }
        undecided = still;
        if !changed {
            break;
        }
    }
    for (a, b) in undecided {
        g.add_edge(a, b, Mark::Arrow, Mark::Arrow).unwrap();
    }
    debug_assert!(ancestral(&g));
    g
}

fn directed_part_acyclic(g: &MixedGraph) -> bool {
    let n = g.n();
    let mut indeg = vec![0usize; n];
    for v in 0..n {
        indeg[v] = g.parents_of(v).len();
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        seen += 1;
        for c in g.children_of(v) {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                queue.push(c);
            }
        }
    }
    seen == n
}

fn ancestral(g: &MixedGraph) -> bool {
    if !directed_part_acyclic(g) {
        return false;
    }
    for (a, b, ma, mb) in g.edges() {
        if ma == Mark::Arrow && mb == Mark::Arrow {
            let anc_a = mmbx_core::msep::ancestor_set(g, &[a]);
            let anc_b = mmbx_core::msep::ancestor_set(g, &[b]);
            if anc_a[b] || anc_b[a] {
                return false;
            }
        }
    }
    true
}

/// All m-separation queries over non-adjacent pairs: `(x, y, z-bitmask)`.
fn query_list(g: &MixedGraph) -> Vec<(usize, usize, u32)> {
    let n = g.n();
    let mut queries = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if g.has_edge(x, y) {
                continue;
            }
            let others: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
            for mask in 0..(1u32 << others.len()) {
                queries.push((x, y, mask));
            }
        }
    }
    queries
}

fn run_query(g: &MixedGraph, x: usize, y: usize, mask: u32) -> bool {
    let others: Vec<usize> = (0..g.n()).filter(|&v| v != x && v != y).collect();
    let z: Vec<usize> = others
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &v)| v)
        .collect();
    m_separated(g, x, y, &z).unwrap()
}

/// Enumerates every ancestral graph with the same skeleton and identical
/// m-separation relations as `mag`. (Non-maximal candidates are excluded
/// automatically: a non-adjacent pair joined by an inducing path cannot be
/// separated, while the maximal base separates it.)
pub fn equivalence_class(mag: &Mag) -> Vec<MixedGraph> {
    let base = mag.graph();
    let edges = base.edges();
    let m = edges.len();
    assert!(m <= 12, "equivalence enumeration capped at 12 edges, got {m}");
    let queries = query_list(base);
    let base_bits: Vec<bool> = queries
        .iter()
        .map(|&(x, y, mask)| run_query(base, x, y, mask))
        .collect();

    let mut members = Vec::new();
    let total = 3usize.pow(m as u32);
    'candidates: for code in 0..total {
        let mut g = MixedGraph::new(base.names().iter().cloned()).unwrap();
        let mut digits = code;
        for &(a, b, _, _) in &edges {
            let (ma, mb) = match digits % 3 {
                0 => (Mark::Tail, Mark::Arrow),
                1 => (Mark::Arrow, Mark::Tail),
                _ => (Mark::Arrow, Mark::Arrow),
            };
            digits /= 3;
            g.add_edge(a, b, ma, mb).unwrap();
        }
        if !ancestral(&g) {
            continue;
        }
        for (q, &(x, y, mask)) in queries.iter().enumerate() {
            if run_query(&g, x, y, mask) != base_bits[q] {
                continue 'candidates;
            }
        }
        members.push(g);
    }
    assert!(!members.is_empty(), "the base MAG must be in its own class");
    members
}

/// The invariant-mark PAG computed by brute force: each endpoint keeps its
/// mark iff every class member agrees on it, and becomes a circle otherwise.
pub fn invariant_mark_pag(mag: &Mag) -> Pag {
    let members = equivalence_class(mag);
    let base = mag.graph();
    let mut out = MixedGraph::new(base.names().iter().cloned()).unwrap();
    for (a, b, _, _) in base.edges() {
        let mut ma = members[0].mark_at(a, b).unwrap();
        let mut mb = members[0].mark_at(b, a).unwrap();
        for g in &members[1..] {
            if g.mark_at(a, b).unwrap() != ma {
                ma = Mark::Circle;
            }
            if g.mark_at(b, a).unwrap() != mb {
                mb = Mark::Circle;
            }
        }
        out.add_edge(a, b, ma, mb).unwrap();
    }
    Pag::new(out)
}

/// Random MAG with a bounded edge count, built by latent projection so that
/// bidirected edges occur naturally.
pub fn random_small_mag(seed: u64, max_obs: usize, max_edges: usize) -> Option<Mag> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=max_obs + 2);
    let mean_degree = rng.random_range(1.0..=2.6);
    let dag = random_dag(n, mean_degree, rng.random()).ok()?;
    let k = rng.random_range(0..=2);
    let latents = choose_latents(&dag, k, &mut rng);
    let mag = latent_project(&dag, &latents).ok()?;
    if mag.graph().n() > max_obs || mag.graph().edge_count() > max_edges {
        return None;
    }
    Some(mag)
}

/// Target-incident edge marks, keyed by the neighbor's node name.
pub fn target_restriction(p: &Pag, target: usize) -> Vec<(String, Mark, Mark)> {
    let g = p.graph();
    g.neighbors(target)
        .map(|v| {
            (
                g.name(v).to_string(),
                g.mark_at(target, v).unwrap(),
                g.mark_at(v, target).unwrap(),
            )
        })
        .collect()
}
