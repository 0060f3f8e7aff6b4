//! Ancestry, m-separation and inducing paths on mixed graphs.
//!
//! `m_separated` runs in polynomial time via reachability over
//! (node, entered-with-arrowhead) states with the collider-ancestor set
//! precomputed. `m_separated_bruteforce` enumerates simple paths and applies
//! the blocking definition literally; it is the test oracle for the
//! reachability version and is capped at small graphs.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{Mark, MixedGraph};

/// Maximum node count accepted by the brute-force path enumerators.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Boolean mask of `An(seeds) ∪ seeds`: nodes with a directed path into a seed.
pub fn ancestor_set(g: &MixedGraph, seeds: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; g.n()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if !mask[s] {
            mask[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for p in g.parents_of(v) {
            if !mask[p] {
                mask[p] = true;
                queue.push_back(p);
            }
        }
    }
    mask
}

/// Ancestors of `x` including `x` itself.
pub fn ancestors(g: &MixedGraph, x: usize) -> Result<BTreeSet<usize>> {
    if x >= g.n() {
        return Err(Error::UnknownNode(format!("index {x}")));
    }
    let mask = ancestor_set(g, &[x]);
    Ok((0..g.n()).filter(|&v| mask[v]).collect())
}

fn check_query(g: &MixedGraph, x: usize, y: usize, z: &[usize]) -> Result<()> {
    let n = g.n();
    if x >= n || y >= n || z.iter().any(|&v| v >= n) {
        return Err(Error::InvalidQuery("node index out of range".into()));
    }
    if x == y {
        return Err(Error::InvalidQuery("x and y must differ".into()));
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(Error::InvalidQuery(
            "conditioning set must not contain x or y".into(),
        ));
    }
    Ok(())
}

/// True iff `x` and `y` are m-separated given `z`.
///
/// A path m-connects iff every non-collider on it is outside `z` and every
/// collider has a descendant in `z`. Connectivity is decided by BFS over
/// states `(node, entered-with-arrowhead)`; a vertex `v` entered with mark
/// `mu` may be left along an edge with mark `nu` at `v` iff
/// `mu == Arrow && nu == Arrow` (collider, needs `v ∈ An(z)`) or otherwise
/// `v ∉ z`.
pub fn m_separated(g: &MixedGraph, x: usize, y: usize, z: &[usize]) -> Result<bool> {
    check_query(g, x, y, z)?;
    let n = g.n();
    let anc_z = ancestor_set(g, z);
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }

    // state id: node * 2 + (entered with arrowhead at node).
    let mut seen = vec![false; n * 2];
    let mut queue: VecDeque<(usize, bool)> = VecDeque::new();
    for w in g.neighbors(x) {
        if w == y {
            return Ok(false);
        }
        let mw = g.mark_at(w, x).expect("edge exists");
        let sid = w * 2 + usize::from(mw == Mark::Arrow);
        if !seen[sid] {
            seen[sid] = true;
            queue.push_back((w, mw == Mark::Arrow));
        }
    }
    while let Some((v, entered_arrow)) = queue.pop_front() {
        for u in g.neighbors(v) {
            let nu = g.mark_at(v, u).expect("edge exists");
            let collider = entered_arrow && nu == Mark::Arrow;
            let passable = if collider { anc_z[v] } else { !in_z[v] };
            if !passable {
                continue;
            }
            if u == y {
                return Ok(false);
            }
            if u == x {
                continue;
            }
            let mu = g.mark_at(u, v).expect("edge exists");
            let sid = u * 2 + usize::from(mu == Mark::Arrow);
            if !seen[sid] {
                seen[sid] = true;
                queue.push_back((u, mu == Mark::Arrow));
            }
        }
    }
    Ok(true)
}

/// Literal path-enumeration version of [`m_separated`]; test oracle only.
pub fn m_separated_bruteforce(g: &MixedGraph, x: usize, y: usize, z: &[usize]) -> Result<bool> {
    check_query(g, x, y, z)?;
    if g.n() > BRUTE_FORCE_LIMIT {
        return Err(Error::GraphTooLarge {
            nodes: g.n(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let anc_z = ancestor_set(g, z);
    let mut in_z = vec![false; g.n()];
    for &v in z {
        in_z[v] = true;
    }

    fn path_connects(g: &MixedGraph, path: &[usize], anc_z: &[bool], in_z: &[bool]) -> bool {
        for i in 1..path.len() - 1 {
            let (prev, v, next) = (path[i - 1], path[i], path[i + 1]);
            let collider = g.mark_at(v, prev) == Some(Mark::Arrow)
                && g.mark_at(v, next) == Some(Mark::Arrow);
            if collider {
                if !anc_z[v] {
                    return false;
                }
            } else if in_z[v] {
                return false;
            }
        }
        true
    }

    fn dfs(
        g: &MixedGraph,
        y: usize,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        anc_z: &[bool],
        in_z: &[bool],
    ) -> bool {
        let v = *path.last().unwrap();
        if v == y {
            return path_connects(g, path, anc_z, in_z);
        }
        for u in g.neighbors(v) {
            if on_path[u] {
                continue;
            }
            path.push(u);
            on_path[u] = true;
            let found = dfs(g, y, path, on_path, anc_z, in_z);
            on_path[u] = false;
            path.pop();
            if found {
                return true;
            }
        }
        false
    }

    let mut on_path = vec![false; g.n()];
    on_path[x] = true;
    let mut path = vec![x];
    Ok(!dfs(g, y, &mut path, &mut on_path, &anc_z, &in_z))
}

/// Searches for an inducing path between `x` and `y` relative to `latents`:
/// every non-endpoint vertex is latent or a collider on the path, and every
/// collider is an ancestor of `x` or `y`. Returns the first path found in
/// deterministic DFS order.
pub fn find_inducing_path(
    g: &MixedGraph,
    x: usize,
    y: usize,
    latents: &[usize],
) -> Option<Vec<usize>> {
    let n = g.n();
    debug_assert!(x < n && y < n && x != y);
    let anc_xy = ancestor_set(g, &[x, y]);
    let mut latent = vec![false; n];
    for &l in latents {
        latent[l] = true;
    }

    // Extending [.., u, v] by w checks the inner-vertex condition for v.
    fn inner_ok(
        g: &MixedGraph,
        u: usize,
        v: usize,
        w: usize,
        latent: &[bool],
        anc_xy: &[bool],
    ) -> bool {
        let collider =
            g.mark_at(v, u) == Some(Mark::Arrow) && g.mark_at(v, w) == Some(Mark::Arrow);
        if collider {
            anc_xy[v]
        } else {
            latent[v]
        }
    }

    fn dfs(
        g: &MixedGraph,
        y: usize,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        latent: &[bool],
        anc_xy: &[bool],
    ) -> bool {
        let v = *path.last().unwrap();
        if v == y {
            return true;
        }
        for w in g.neighbors(v) {
            if on_path[w] {
                continue;
            }
            if path.len() >= 2 {
                let u = path[path.len() - 2];
                if !inner_ok(g, u, v, w, latent, anc_xy) {
                    continue;
                }
            }
            path.push(w);
            on_path[w] = true;
            if dfs(g, y, path, on_path, latent, anc_xy) {
                return true;
            }
            on_path[w] = false;
            path.pop();
        }
        false
    }

    let mut on_path = vec![false; n];
    on_path[x] = true;
    let mut path = vec![x];
    if dfs(g, y, &mut path, &mut on_path, &latent, &anc_xy) {
        Some(path)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MixedGraph;

    fn chain3() -> MixedGraph {
        let mut g = MixedGraph::new(vec!["x", "y", "z"]).unwrap();
        g.add_edge(0, 1, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(1, 2, Mark::Tail, Mark::Arrow).unwrap();
        g
    }

    #[test]
    fn chain_blocking() {
        let g = chain3();
        assert!(!m_separated(&g, 0, 2, &[]).unwrap());
        assert!(m_separated(&g, 0, 2, &[1]).unwrap());
        assert!(m_separated_bruteforce(&g, 0, 2, &[1]).unwrap());
    }

    #[test]
    fn collider_opens_when_conditioned() {
        let mut g = MixedGraph::new(vec!["a", "c", "b", "d"]).unwrap();
        g.add_edge(0, 1, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(2, 1, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(1, 3, Mark::Tail, Mark::Arrow).unwrap();
        assert!(m_separated(&g, 0, 2, &[]).unwrap());
        assert!(!m_separated(&g, 0, 2, &[1]).unwrap());
        // Conditioning on a descendant of the collider also opens the path.
        assert!(!m_separated(&g, 0, 2, &[3]).unwrap());
    }

    #[test]
    fn edgeless_graph_is_separated() {
        let g = MixedGraph::new(vec!["x", "y"]).unwrap();
        assert!(m_separated(&g, 0, 1, &[]).unwrap());
        assert!(m_separated_bruteforce(&g, 0, 1, &[]).unwrap());
    }

    #[test]
    fn query_preconditions() {
        let g = chain3();
        assert!(m_separated(&g, 0, 0, &[]).is_err());
        assert!(m_separated(&g, 0, 1, &[0]).is_err());
        assert!(m_separated(&g, 0, 9, &[]).is_err());
    }

    #[test]
    fn brute_force_rejects_large_graphs() {
        let g = MixedGraph::new((0..13).map(|i| format!("n{i}"))).unwrap();
        assert!(matches!(
            m_separated_bruteforce(&g, 0, 1, &[]),
            Err(Error::GraphTooLarge { .. })
        ));
    }

    #[test]
    fn ancestors_reflexive_and_transitive() {
        let g = chain3();
        let a = ancestors(&g, 2).unwrap();
        assert_eq!(a.into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        let single = MixedGraph::new(vec!["t"]).unwrap();
        assert_eq!(ancestors(&single, 0).unwrap().len(), 1);
    }

    #[test]
    fn inducing_path_through_latent_confounder() {
        // v3 <- v1 -> v4 with v1 latent: inducing path exists between v3, v4.
        let mut g = MixedGraph::new(vec!["v1", "v3", "v4"]).unwrap();
        g.add_edge(0, 1, Mark::Tail, Mark::Arrow).unwrap();
        g.add_edge(0, 2, Mark::Tail, Mark::Arrow).unwrap();
        let p = find_inducing_path(&g, 1, 2, &[0]).unwrap();
        assert_eq!(p, vec![1, 0, 2]);
        // Without the latent status, v1 is a non-collider and the path fails.
        assert!(find_inducing_path(&g, 1, 2, &[]).is_none());
    }
}
