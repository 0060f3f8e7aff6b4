//! Local structure learning over a Markov-blanket scope: PC-stable skeleton
//! search, V-structure orientation, and selection of the information that is
//! guaranteed valid around the pivot (its incident edges and the
//! V-structures containing it). Everything else learned locally may be
//! spurious and is discarded.

use std::collections::BTreeMap;

use itertools::Itertools;

use crate::ci::CiBackend;
use crate::error::{Error, Result};
use crate::graph::{Mark, MixedGraph};

/// Separating sets found during skeleton learning, keyed by unordered pair.
pub type SepsetCache = BTreeMap<(usize, usize), Vec<usize>>;

pub fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Skeleton + V-structure fragment over one scope.
#[derive(Debug, Clone)]
pub struct LocalStructure {
    /// Nodes are the backend's full variable set; edges lie within `scope`.
    pub graph: MixedGraph,
    /// Sorted scope the structure was learned over.
    pub scope: Vec<usize>,
    pub sepsets: SepsetCache,
    /// Detected V-structures `(a, c, b)` with collider `c` and `a < b`.
    pub vstructs: Vec<(usize, usize, usize)>,
}

/// PC-stable skeleton over `scope`: start from the complete circle-circle
/// graph; at each level l, test every adjacent pair against size-l subsets
/// of either endpoint's neighborhood (snapshotted at level start, so the
/// outcome is order-independent), deleting separated pairs at level end and
/// recording the first separating set found.
pub fn learn_skeleton<B: CiBackend>(backend: &mut B, scope: &[usize]) -> Result<LocalStructure> {
    let mut scope: Vec<usize> = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    if scope.is_empty() {
        return Err(Error::InvalidQuery("scope must be non-empty".into()));
    }
    if scope.iter().any(|&v| v >= backend.num_vars()) {
        return Err(Error::InvalidQuery("scope index out of range".into()));
    }

    let names: Vec<String> = backend.var_names().to_vec();
    let mut graph = MixedGraph::new(names)?;
    for (i, &a) in scope.iter().enumerate() {
        for &b in &scope[i + 1..] {
            graph.add_edge(a, b, Mark::Circle, Mark::Circle)?;
        }
    }
    let mut sepsets = SepsetCache::new();

    let mut level = 0usize;
    loop {
        let snapshot: Vec<Vec<usize>> = (0..graph.n())
            .map(|v| graph.neighbors(v).collect())
            .collect();
        let mut any_side_large_enough = false;
        let mut removals: Vec<(usize, usize)> = Vec::new();

        for (i, &a) in scope.iter().enumerate() {
            'pair: for &b in &scope[i + 1..] {
                if !graph.has_edge(a, b) {
                    continue;
                }
                for (u, v) in [(a, b), (b, a)] {
                    let cands: Vec<usize> = snapshot[u]
                        .iter()
                        .copied()
                        .filter(|&w| w != v)
                        .collect();
                    if cands.len() < level {
                        continue;
                    }
                    any_side_large_enough = true;
                    for subset in cands.iter().copied().combinations(level) {
                        if backend.ci_query(u, v, &subset)?.independent {
                            sepsets.insert(pair_key(a, b), subset);
                            removals.push((a, b));
                            continue 'pair;
                        }
                    }
                }
            }
        }
        for (a, b) in removals {
            graph.remove_edge(a, b);
        }
        if !any_side_large_enough {
            break;
        }
        level += 1;
    }

    Ok(LocalStructure {
        graph,
        scope,
        sepsets,
        vstructs: Vec::new(),
    })
}

/// Orients unshielded triples a-c-b as colliders at c and records them. A
/// triple qualifies when c is outside the recorded separating set of (a, b)
/// and the dependence half of the V-structure definition holds: a and b stay
/// dependent given that set extended by c. The second check is vacuous under
/// a faithful oracle (S could not separate across a non-collider outside it)
/// but screens out noise-driven colliders on finite samples; it costs one CI
/// query per candidate triple.
pub fn orient_v_structures<B: CiBackend>(
    mut ls: LocalStructure,
    backend: &mut B,
) -> Result<LocalStructure> {
    let mut vstructs = Vec::new();
    for (a, c, b) in crate::project::unshielded_triples(&ls.graph) {
        let sep = ls.sepsets.get(&pair_key(a, b)).ok_or_else(|| {
            Error::InvalidQuery(format!(
                "missing separating set for non-adjacent pair ({}, {})",
                ls.graph.name(a),
                ls.graph.name(b)
            ))
        })?;
        if sep.contains(&c) {
            continue;
        }
        let mut extended = sep.clone();
        extended.push(c);
        if backend.ci_query(a, b, &extended)?.independent {
            continue;
        }
        vstructs.push((a, c, b));
        for wing in [a, b] {
            match ls.graph.mark_at(c, wing) {
                Some(Mark::Circle) => ls.graph.set_mark_at(c, wing, Mark::Arrow),
                Some(Mark::Arrow) => {}
                Some(Mark::Tail) => log::warn!(
                    "collider at {} on edge to {} conflicts with a determined tail; keeping tail",
                    ls.graph.name(c),
                    ls.graph.name(wing)
                ),
                None => unreachable!("triple edges exist"),
            }
        }
    }
    ls.vstructs = vstructs;
    Ok(ls)
}

/// Edge set selected from a local structure for merging into the fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedInfo {
    /// `(a, b, mark_at_a, mark_at_b)` with `a < b`.
    pub edges: Vec<(usize, usize, Mark, Mark)>,
}

/// Selects the information guaranteed valid around `pivot`: every edge
/// incident to the pivot, plus both edges of every V-structure containing
/// the pivot (as collider or wing). Marks are assembled from scratch so that
/// only arrowheads belonging to pivot-containing V-structures survive; an
/// arrowhead a foreign V-structure put on a selected edge is dropped back to
/// a circle.
pub fn select_pivot_info(ls: &LocalStructure, pivot: usize) -> Result<SelectedInfo> {
    if !ls.scope.contains(&pivot) {
        return Err(Error::InvalidQuery(format!(
            "pivot {} outside scope",
            ls.graph.name(pivot)
        )));
    }
    let mut picked: BTreeMap<(usize, usize), (Mark, Mark)> = BTreeMap::new();
    for v in ls.graph.neighbors(pivot) {
        picked.insert(pair_key(pivot, v), (Mark::Circle, Mark::Circle));
    }
    let mut arrow_at = Vec::new();
    for &(a, c, b) in &ls.vstructs {
        if pivot == a || pivot == b || pivot == c {
            picked.entry(pair_key(a, c)).or_insert((Mark::Circle, Mark::Circle));
            picked.entry(pair_key(b, c)).or_insert((Mark::Circle, Mark::Circle));
            arrow_at.push((a, c));
            arrow_at.push((b, c));
        }
    }
    for (wing, c) in arrow_at {
        let key = pair_key(wing, c);
        let marks = picked.get_mut(&key).expect("edge inserted above");
        if key.0 == c {
            marks.0 = Mark::Arrow;
        } else {
            marks.1 = Mark::Arrow;
        }
    }
    Ok(SelectedInfo {
        edges: picked
            .into_iter()
            .map(|((a, b), (ma, mb))| (a, b, ma, mb))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::OracleBackend;
    use crate::graph::Mag;
    use crate::mmb::tc_mmb;

    fn demo_backend() -> OracleBackend {
        let dag = crate::testutil::demo_dag();
        let g = dag.graph();
        let latents = vec![g.require("V1").unwrap(), g.require("V6").unwrap()];
        OracleBackend::from_dag(&dag, &latents).unwrap()
    }

    fn scope_of(backend: &mut OracleBackend, target: &str) -> (usize, Vec<usize>) {
        let t = backend
            .var_names()
            .iter()
            .position(|n| n == target)
            .unwrap();
        let obs: Vec<usize> = (0..backend.num_vars()).collect();
        let r = tc_mmb(backend, &obs, t).unwrap();
        (t, r.mmb_plus.iter().copied().collect())
    }

    #[test]
    fn skeleton_over_blanket_of_v5() {
        let mut b = demo_backend();
        let (t, scope) = scope_of(&mut b, "V5");
        let ls = learn_skeleton(&mut b, &scope).unwrap();
        let g = &ls.graph;
        let id = |s: &str| g.require(s).unwrap();

        for adj in ["V4", "V8", "V10"] {
            assert!(g.has_edge(t, id(adj)), "expected V5-{adj}");
        }
        for non in ["V3", "V7", "V12"] {
            assert!(!g.has_edge(t, id(non)), "unexpected V5-{non}");
        }
        // The spurious edge among blanket members survives: its separating
        // set lies outside the scope.
        assert!(g.has_edge(id("V4"), id("V7")));
    }

    #[test]
    fn v_structures_over_blanket_of_v5() {
        let mut b = demo_backend();
        let (t, scope) = scope_of(&mut b, "V5");
        let ls = orient_v_structures(learn_skeleton(&mut b, &scope).unwrap(), &mut b).unwrap();
        let g = &ls.graph;
        let id = |s: &str| g.require(s).unwrap();
        let (v3, v4, v5, v7, v8) = (id("V3"), id("V4"), id("V5"), id("V7"), id("V8"));

        // Collider at the target.
        assert_eq!(g.mark_at(v5, v4), Some(Mark::Arrow));
        assert_eq!(g.mark_at(v5, v8), Some(Mark::Arrow));
        // Collider at a child-side node.
        assert_eq!(g.mark_at(v8, v5), Some(Mark::Arrow));
        assert_eq!(g.mark_at(v8, v7), Some(Mark::Arrow));
        // The locally wrong collider is also oriented inside the local
        // structure; selection discards it later.
        assert_eq!(g.mark_at(v4, v3), Some(Mark::Arrow));
        assert_eq!(g.mark_at(v4, v7), Some(Mark::Arrow));
        assert!(ls
            .vstructs
            .iter()
            .any(|&(a, c, bb)| (a, c, bb) == (v3.min(v7), v4, v3.max(v7))));
        assert_eq!(t, v5);
    }

    #[test]
    fn selection_keeps_pivot_edges_and_pivot_v_structures_only() {
        let mut b = demo_backend();
        let (t, scope) = scope_of(&mut b, "V5");
        let ls = orient_v_structures(learn_skeleton(&mut b, &scope).unwrap(), &mut b).unwrap();
        let sel = select_pivot_info(&ls, t).unwrap();
        let g = &ls.graph;
        let id = |s: &str| g.require(s).unwrap();
        let names: Vec<(String, String, Mark, Mark)> = sel
            .edges
            .iter()
            .map(|&(a, bb, ma, mb)| (g.name(a).to_string(), g.name(bb).to_string(), ma, mb))
            .collect();

        let has = |a: &str, b: &str, ma: Mark, mb: Mark| {
            let (x, y, mx, my) = if id(a) <= id(b) {
                (a, b, ma, mb)
            } else {
                (b, a, mb, ma)
            };
            names
                .iter()
                .any(|(na, nb, qa, qb)| na == x && nb == y && *qa == mx && *qb == my)
        };
        assert!(has("V4", "V5", Mark::Circle, Mark::Arrow));
        assert!(has("V5", "V8", Mark::Arrow, Mark::Arrow));
        assert!(has("V5", "V10", Mark::Circle, Mark::Arrow));
        assert!(has("V3", "V10", Mark::Circle, Mark::Arrow));
        assert!(has("V7", "V8", Mark::Circle, Mark::Arrow));
        assert!(has("V12", "V8", Mark::Circle, Mark::Arrow));
        assert_eq!(sel.edges.len(), 6);
        // Dropped: V3-V4 and V4-V7 carry only non-pivot V-structure info.
        assert!(!names.iter().any(|(a, b, _, _)| (a == "V3" && b == "V4")
            || (a == "V4" && b == "V7")));
    }

    #[test]
    fn empty_selection_for_isolated_pivot() {
        let g = MixedGraph::new(vec!["a", "b", "c"]).unwrap();
        let mut b = OracleBackend::from_mag(Mag::new(g).unwrap());
        let ls = orient_v_structures(learn_skeleton(&mut b, &[0, 1, 2]).unwrap(), &mut b).unwrap();
        let sel = select_pivot_info(&ls, 0).unwrap();
        assert!(sel.edges.is_empty());
    }

    #[test]
    fn singleton_scope_has_no_edges() {
        let g = MixedGraph::new(vec!["a", "b"]).unwrap();
        let mut b = OracleBackend::from_mag(Mag::new(g).unwrap());
        let ls = learn_skeleton(&mut b, &[1]).unwrap();
        assert_eq!(ls.graph.edge_count(), 0);
        assert_eq!(b.n_tests(), 0);
    }

    #[test]
    fn skeleton_is_scope_order_invariant() {
        let mut b1 = demo_backend();
        let (_, scope) = scope_of(&mut b1, "V5");
        let ls1 = learn_skeleton(&mut b1, &scope).unwrap();

        let mut b2 = demo_backend();
        let mut rev: Vec<usize> = scope.clone();
        rev.reverse();
        let ls2 = learn_skeleton(&mut b2, &rev).unwrap();
        assert_eq!(ls1.graph, ls2.graph);
        assert_eq!(ls1.sepsets, ls2.sepsets);
    }
}
