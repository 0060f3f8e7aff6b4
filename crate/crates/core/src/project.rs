//! Latent projection (DAG to MAG), graph-level MAG Markov blankets, and the
//! MAG-to-PAG reference construction used as the global ground truth.

use std::collections::{BTreeSet, VecDeque};

use crate::error::Result;
use crate::graph::{Dag, Mag, Mark, MixedGraph, Pag};
use crate::msep::{ancestor_set, find_inducing_path};
use crate::orient::{rule_closure, MagKnowledge, RuleTrace};

/// Projects a DAG with latent nodes onto its observed margin.
///
/// Over the observed nodes, `a` and `b` are adjacent iff an inducing path
/// relative to the latents connects them; the edge is directed `a -> b` when
/// `a` is an ancestor of `b` in the DAG, `b -> a` in the converse case, and
/// bidirected otherwise. Observed nodes keep their relative input order.
pub fn latent_project(dag: &Dag, latents: &[usize]) -> Result<Mag> {
    let g = dag.graph();
    let mut is_latent = vec![false; g.n()];
    for &l in latents {
        is_latent[l] = true;
    }
    let observed: Vec<usize> = (0..g.n()).filter(|&v| !is_latent[v]).collect();

    let mut proj = MixedGraph::new(observed.iter().map(|&v| g.name(v).to_string()))?;
    let anc: Vec<Vec<bool>> = (0..g.n()).map(|v| ancestor_set(g, &[v])).collect();

    for (i, &a) in observed.iter().enumerate() {
        for (j, &b) in observed.iter().enumerate().skip(i + 1) {
            if find_inducing_path(g, a, b, latents).is_none() {
                continue;
            }
            let (ma, mb) = if anc[b][a] {
                (Mark::Tail, Mark::Arrow)
            } else if anc[a][b] {
                (Mark::Arrow, Mark::Tail)
            } else {
                (Mark::Arrow, Mark::Arrow)
            };
            proj.add_edge(i, j, ma, mb)?;
        }
    }
    // The inducing-path construction yields a maximal ancestral graph; edge
    // types and acyclicity are still validated.
    Mag::new_ancestral_unchecked_maximality(proj)
}

/// Nodes reachable from `x` using bidirected edges only, including `x`.
pub fn district(g: &MixedGraph, x: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    seen.insert(x);
    let mut queue = VecDeque::from([x]);
    while let Some(v) = queue.pop_front() {
        for s in g.spouses_of(v) {
            if seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    seen
}

/// MAG Markov blanket of `t`: parents, children, children's parents, the
/// districts of `t` and of its children, and the parents of every node of
/// those districts; `t` itself excluded.
pub fn graph_mmb(mag: &Mag, t: usize) -> BTreeSet<usize> {
    let g = mag.graph();
    let mut mmb: BTreeSet<usize> = BTreeSet::new();
    let children = g.children_of(t);
    mmb.extend(g.parents_of(t));
    mmb.extend(children.iter().copied());
    for &c in &children {
        mmb.extend(g.parents_of(c));
    }
    let mut dist_nodes: BTreeSet<usize> = district(g, t);
    for &c in &children {
        dist_nodes.extend(district(g, c));
    }
    for &d in &dist_nodes {
        mmb.insert(d);
        mmb.extend(g.parents_of(d));
    }
    mmb.remove(&t);
    mmb
}

/// Unshielded triples `(a, c, b)` with `a < b`, both adjacent to `c` and
/// `a`, `b` non-adjacent.
pub fn unshielded_triples(g: &MixedGraph) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for c in 0..g.n() {
        let nbrs: Vec<usize> = g.neighbors(c).collect();
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if !g.has_edge(a, b) {
                    out.push((a, c, b));
                }
            }
        }
    }
    out
}

/// Builds the Markov-equivalence-class PAG of a MAG: copy the skeleton with
/// circle marks, orient every unshielded collider of the MAG, then close
/// under the orientation rules with the MAG as the knowledge source.
pub fn pag_from_mag(mag: &Mag) -> Result<(Pag, RuleTrace)> {
    let g = mag.graph();
    let mut skel = MixedGraph::new(g.names().iter().cloned())?;
    for (a, b, _, _) in g.edges() {
        skel.add_edge(a, b, Mark::Circle, Mark::Circle)?;
    }
    for (a, c, b) in unshielded_triples(g) {
        let collider = g.mark_at(c, a) == Some(Mark::Arrow) && g.mark_at(c, b) == Some(Mark::Arrow);
        if collider {
            skel.set_mark_at(c, a, Mark::Arrow);
            skel.set_mark_at(c, b, Mark::Arrow);
        }
    }
    rule_closure(&Pag::new(skel), &MagKnowledge { mag })
}
