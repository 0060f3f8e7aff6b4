//! Closure under the complete orientation rules for PAGs without selection
//! bias: R1-R4 plus the tail rules R8-R10. R5-R7 orient undirected edges,
//! which cannot occur here, and are omitted.
//!
//! The rules consult an [`OrientationKnowledge`] source for two questions the
//! partially oriented graph cannot answer by itself: whether two nodes are
//! definitely non-adjacent in the underlying graph, and whether a node lies
//! in the separating set of a non-adjacent pair (R4). When closing a full
//! PAG the graph itself is the knowledge source; when closing the accumulated
//! fragment around a target, only adjacency facts established so far may be
//! used, since an edge absent from the fragment can still exist in the truth.

use crate::error::{Error, Result};
use crate::graph::{Mag, Mark, MixedGraph, Pag};

/// Answers non-adjacency and collider-status queries during rule closure.
pub trait OrientationKnowledge {
    /// True only if `a` and `b` are known to be non-adjacent in the
    /// underlying graph. "Unknown" must be reported as `false`.
    fn non_adjacent(&self, a: usize, b: usize) -> bool;

    /// True only if `b` is certified to be a non-collider between `a` and
    /// `c` in every member of the equivalence class. On a graph whose
    /// unshielded colliders are all oriented this is just non-adjacency of
    /// `a` and `c` (anything unoriented is a non-collider); on a fragment it
    /// requires a recorded separating set of `(a, c)` containing `b`, since
    /// an absent arrowhead may simply not have been imported yet.
    fn unshielded_noncollider(&self, a: usize, b: usize, c: usize) -> bool;

    /// Whether `beta` belongs to the separating set of the non-adjacent pair
    /// `(theta, gamma)`. `alpha` is the penultimate vertex of the
    /// discriminating path. `None` when the answer is unknown; R4 then does
    /// not fire on that path.
    fn sepset_contains(
        &self,
        theta: usize,
        gamma: usize,
        beta: usize,
        alpha: usize,
    ) -> Option<bool>;
}

/// Complete-graph knowledge backed by the source MAG. The R4 decision reads
/// whether `beta` is a collider on the discriminating path in the MAG:
/// `beta` is in every separating set of `(theta, gamma)` iff it is not.
pub struct MagKnowledge<'a> {
    pub mag: &'a Mag,
}

impl OrientationKnowledge for MagKnowledge<'_> {
    fn non_adjacent(&self, a: usize, b: usize) -> bool {
        !self.mag.graph().has_edge(a, b)
    }

    fn sepset_contains(
        &self,
        _theta: usize,
        gamma: usize,
        beta: usize,
        alpha: usize,
    ) -> Option<bool> {
        let g = self.mag.graph();
        let collider = g.mark_at(beta, alpha) == Some(Mark::Arrow)
            && g.mark_at(beta, gamma) == Some(Mark::Arrow);
        Some(!collider)
    }
}

/// One mark change performed by the closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleEvent {
    pub rule: &'static str,
    /// Edge endpoints.
    pub a: usize,
    pub b: usize,
    /// The endpoint whose mark changed.
    pub endpoint: usize,
    pub old: Mark,
    pub new: Mark,
}

pub type RuleTrace = Vec<RuleEvent>;

/// True iff no edge incident to `t` carries a circle mark at either end.
pub fn marks_determined_at(p: &Pag, t: usize) -> bool {
    let g = p.graph();
    g.neighbors(t).all(|v| {
        g.mark_at(t, v) != Some(Mark::Circle) && g.mark_at(v, t) != Some(Mark::Circle)
    })
}

struct Closure<'a, K: OrientationKnowledge> {
    g: MixedGraph,
    k: &'a K,
    trace: RuleTrace,
    changed: bool,
}

impl<K: OrientationKnowledge> Closure<'_, K> {
    /// Upgrades the mark at `node` on edge `node`-`other`. Only
    /// circle-to-tail and circle-to-arrow transitions are permitted.
    fn orient(&mut self, rule: &'static str, node: usize, other: usize, new: Mark) -> Result<()> {
        let old = self
            .g
            .mark_at(node, other)
            .expect("rule fired on a missing edge");
        if old == new {
            return Ok(());
        }
        if old != Mark::Circle {
            return Err(Error::InconsistentOrientation {
                rule,
                a: self.g.name(node).to_string(),
                b: self.g.name(other).to_string(),
                node: self.g.name(node).to_string(),
                wanted: new,
                found: old,
            });
        }
        self.g.set_mark_at(node, other, new);
        self.trace.push(RuleEvent {
            rule,
            a: node.min(other),
            b: node.max(other),
            endpoint: node,
            old,
            new,
        });
        self.changed = true;
        Ok(())
    }

    /// R1: a *-> b o-* c with a, c non-adjacent orients b -> c.
    fn rule1(&mut self) -> Result<()> {
        for b in 0..self.g.n() {
            let nbrs: Vec<usize> = self.g.neighbors(b).collect();
            for &a in &nbrs {
                if self.g.mark_at(b, a) != Some(Mark::Arrow) {
                    continue;
                }
                for &c in &nbrs {
                    if c == a || self.g.mark_at(b, c) != Some(Mark::Circle) {
                        continue;
                    }
                    if self.k.non_adjacent(a, c) {
                        self.orient("R1", b, c, Mark::Tail)?;
                        self.orient("R1", c, b, Mark::Arrow)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// R2: a -> b *-> c or a *-> b -> c, with a *-o c, puts an arrowhead at c.
    fn rule2(&mut self) -> Result<()> {
        for a in 0..self.g.n() {
            let a_nbrs: Vec<usize> = self.g.neighbors(a).collect();
            for &c in &a_nbrs {
                if self.g.mark_at(c, a) != Some(Mark::Circle) {
                    continue;
                }
                for &b in &a_nbrs {
                    if b == c || !self.g.has_edge(b, c) {
                        continue;
                    }
                    let case1 = self.g.is_directed_edge(a, b)
                        && self.g.mark_at(c, b) == Some(Mark::Arrow);
                    let case2 = self.g.mark_at(b, a) == Some(Mark::Arrow)
                        && self.g.is_directed_edge(b, c);
                    if case1 || case2 {
                        self.orient("R2", c, a, Mark::Arrow)?;
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    /// R3: a *-> b <-* c, a *-o d o-* c, a, c non-adjacent, d *-o b puts an
    /// arrowhead at b on the d-b edge.
    fn rule3(&mut self) -> Result<()> {
        for b in 0..self.g.n() {
            let b_nbrs: Vec<usize> = self.g.neighbors(b).collect();
            for &d in &b_nbrs {
                if self.g.mark_at(b, d) != Some(Mark::Circle) {
                    continue;
                }
                for (i, &a) in b_nbrs.iter().enumerate() {
                    if a == d || self.g.mark_at(b, a) != Some(Mark::Arrow) {
                        continue;
                    }
                    for &c in &b_nbrs[i + 1..] {
                        if c == d || c == a || self.g.mark_at(b, c) != Some(Mark::Arrow) {
                            continue;
                        }
                        if !self.k.non_adjacent(a, c) {
                            continue;
                        }
                        let d_circles = self.g.mark_at(d, a) == Some(Mark::Circle)
                            && self.g.mark_at(d, c) == Some(Mark::Circle);
                        if d_circles {
                            self.orient("R3", b, d, Mark::Arrow)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// R4: discriminating path <theta, ..., alpha, beta, gamma> for beta with
    /// beta o-* gamma. If beta is in the separating set of (theta, gamma),
    /// orient beta -> gamma; otherwise orient alpha <-> beta <-> gamma.
    fn rule4(&mut self) -> Result<()> {
        for beta in 0..self.g.n() {
            let b_nbrs: Vec<usize> = self.g.neighbors(beta).collect();
            for &gamma in &b_nbrs {
                if self.g.mark_at(beta, gamma) != Some(Mark::Circle) {
                    continue;
                }
                for &alpha in &b_nbrs {
                    if alpha == gamma
                        || !self.g.is_directed_edge(alpha, gamma)
                        || self.g.mark_at(alpha, beta) != Some(Mark::Arrow)
                    {
                        continue;
                    }
                    if let Some(theta) = self.discriminating_theta(alpha, beta, gamma) {
                        match self.k.sepset_contains(theta, gamma, beta, alpha) {
                            Some(true) => {
                                self.orient("R4", beta, gamma, Mark::Tail)?;
                                self.orient("R4", gamma, beta, Mark::Arrow)?;
                                // Marks changed; rescan from the top.
                                return Ok(());
                            }
                            Some(false) => {
                                self.orient("R4", alpha, beta, Mark::Arrow)?;
                                self.orient("R4", beta, alpha, Mark::Arrow)?;
                                self.orient("R4", beta, gamma, Mark::Arrow)?;
                                self.orient("R4", gamma, beta, Mark::Arrow)?;
                                return Ok(());
                            }
                            None => continue,
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Extends <..., alpha, beta, gamma> backwards through colliders that are
    /// parents of gamma until a node non-adjacent to gamma is found.
    fn discriminating_theta(&self, alpha: usize, beta: usize, gamma: usize) -> Option<usize> {
        fn dfs<K: OrientationKnowledge>(
            c: &Closure<'_, K>,
            current: usize,
            gamma: usize,
            on_path: &mut Vec<bool>,
        ) -> Option<usize> {
            let nbrs: Vec<usize> = c.g.neighbors(current).collect();
            for d in nbrs {
                if on_path[d] || d == gamma {
                    continue;
                }
                // The edge d-current must point into current.
                if c.g.mark_at(current, d) != Some(Mark::Arrow) {
                    continue;
                }
                if c.k.non_adjacent(d, gamma) {
                    return Some(d);
                }
                // d can only continue the path as a collider that is a
                // parent of gamma.
                let collider_at_d = c.g.mark_at(d, current) == Some(Mark::Arrow);
                if collider_at_d && c.g.is_directed_edge(d, gamma) {
                    on_path[d] = true;
                    let found = dfs(c, d, gamma, on_path);
                    on_path[d] = false;
                    if found.is_some() {
                        return found;
                    }
                }
            }
            None
        }
        let mut on_path = vec![false; self.g.n()];
        on_path[alpha] = true;
        on_path[beta] = true;
        dfs(self, alpha, gamma, &mut on_path)
    }

    /// R8: a -> b -> c (or a -o b -> c) with a o-> c orients the tail at a.
    fn rule8(&mut self) -> Result<()> {
        for a in 0..self.g.n() {
            let a_nbrs: Vec<usize> = self.g.neighbors(a).collect();
            for &c in &a_nbrs {
                let circle_arrow = self.g.mark_at(a, c) == Some(Mark::Circle)
                    && self.g.mark_at(c, a) == Some(Mark::Arrow);
                if !circle_arrow {
                    continue;
                }
                for &b in &a_nbrs {
                    if b == c || !self.g.has_edge(b, c) {
                        continue;
                    }
                    let a_to_b = self.g.is_directed_edge(a, b)
                        || (self.g.mark_at(a, b) == Some(Mark::Tail)
                            && self.g.mark_at(b, a) == Some(Mark::Circle));
                    if a_to_b && self.g.is_directed_edge(b, c) {
                        self.orient("R8", a, c, Mark::Tail)?;
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    /// Potentially-directed step from u to v: no arrowhead at u, no tail at v.
    fn pd_edge(&self, u: usize, v: usize) -> bool {
        self.g.mark_at(u, v).is_some_and(|m| m != Mark::Arrow)
            && self.g.mark_at(v, u).is_some_and(|m| m != Mark::Tail)
    }

    /// Uncovered potentially-directed path from `from` to `to` with a fixed
    /// first hop, at least `min_edges` edges long. Consecutive-triple
    /// non-adjacency uses the knowledge source.
    fn uncovered_pd_path(&self, from: usize, first: usize, to: usize, min_edges: usize) -> bool {
        fn dfs<K: OrientationKnowledge>(
            c: &Closure<'_, K>,
            prev: usize,
            current: usize,
            to: usize,
            len: usize,
            min_edges: usize,
            on_path: &mut Vec<bool>,
        ) -> bool {
            if current == to {
                return len >= min_edges;
            }
            let nbrs: Vec<usize> = c.g.neighbors(current).collect();
            for v in nbrs {
                if on_path[v] || !c.pd_edge(current, v) || !c.k.non_adjacent(prev, v) {
                    continue;
                }
                on_path[v] = true;
                if dfs(c, current, v, to, len + 1, min_edges, on_path) {
                    on_path[v] = false;
                    return true;
                }
                on_path[v] = false;
            }
            false
        }
        if !self.pd_edge(from, first) {
            return false;
        }
        if first == to {
            return 1 >= min_edges;
        }
        let mut on_path = vec![false; self.g.n()];
        on_path[from] = true;
        on_path[first] = true;
        dfs(self, from, first, to, 1, min_edges, &mut on_path)
    }

    /// R9: a o-> c with an uncovered potentially-directed path
    /// <a, b, ..., c>, b non-adjacent to c, orients the tail at a.
    fn rule9(&mut self) -> Result<()> {
        for a in 0..self.g.n() {
            let a_nbrs: Vec<usize> = self.g.neighbors(a).collect();
            for &c in &a_nbrs {
                let circle_arrow = self.g.mark_at(a, c) == Some(Mark::Circle)
                    && self.g.mark_at(c, a) == Some(Mark::Arrow);
                if !circle_arrow {
                    continue;
                }
                let fired = a_nbrs.iter().any(|&b| {
                    b != c
                        && self.k.non_adjacent(b, c)
                        && self.uncovered_pd_path(a, b, c, 3)
                });
                if fired {
                    self.orient("R9", a, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }

    /// R10: a o-> c, b -> c <- d, uncovered potentially-directed paths from a
    /// to b and to d whose first hops mu, omega are distinct and
    /// non-adjacent, orients the tail at a.
    fn rule10(&mut self) -> Result<()> {
        for a in 0..self.g.n() {
            let a_nbrs: Vec<usize> = self.g.neighbors(a).collect();
            for &c in &a_nbrs {
                let circle_arrow = self.g.mark_at(a, c) == Some(Mark::Circle)
                    && self.g.mark_at(c, a) == Some(Mark::Arrow);
                if !circle_arrow {
                    continue;
                }
                let parents: Vec<usize> = self
                    .g
                    .parents_of(c)
                    .into_iter()
                    .filter(|&p| p != a)
                    .collect();
                let mut fired = false;
                'pairs: for (i, &b) in parents.iter().enumerate() {
                    for &d in &parents[i + 1..] {
                        for &mu in &a_nbrs {
                            if mu == c || !self.pd_edge(a, mu) {
                                continue;
                            }
                            for &omega in &a_nbrs {
                                if omega == c || omega == mu || !self.pd_edge(a, omega) {
                                    continue;
                                }
                                if !self.k.non_adjacent(mu, omega) {
                                    continue;
                                }
                                let p1 = self.uncovered_pd_path(a, mu, b, 1)
                                    && self.uncovered_pd_path(a, omega, d, 1);
                                let p2 = self.uncovered_pd_path(a, mu, d, 1)
                                    && self.uncovered_pd_path(a, omega, b, 1);
                                if p1 || p2 {
                                    fired = true;
                                    break 'pairs;
                                }
                            }
                        }
                    }
                }
                if fired {
                    self.orient("R10", a, c, Mark::Tail)?;
                }
            }
        }
        Ok(())
    }
}

/// Applies the rule set to a fixed point. Mark changes are monotone
/// (circle to arrow or circle to tail); a rule demanding the opposite of an
/// already-determined mark is an error.
pub fn rule_closure<K: OrientationKnowledge>(p: &Pag, k: &K) -> Result<(Pag, RuleTrace)> {
    let mut c = Closure {
        g: p.graph().clone(),
        k,
        trace: Vec::new(),
        changed: true,
    };
    while c.changed {
        c.changed = false;
        c.rule1()?;
        c.rule2()?;
        c.rule3()?;
        c.rule4()?;
        c.rule8()?;
        c.rule9()?;
        c.rule10()?;
    }
    Ok((Pag::new(c.g), c.trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct GraphKnowledge<'a>(&'a MixedGraph);
    impl OrientationKnowledge for GraphKnowledge<'_> {
        fn non_adjacent(&self, a: usize, b: usize) -> bool {
            !self.0.has_edge(a, b)
        }
        fn sepset_contains(&self, _: usize, _: usize, _: usize, _: usize) -> Option<bool> {
            None
        }
    }

    fn pag(edges: &[(usize, usize, Mark, Mark)], n: usize) -> Pag {
        let mut g = MixedGraph::new((0..n).map(|i| format!("n{i}"))).unwrap();
        for &(a, b, ma, mb) in edges {
            g.add_edge(a, b, ma, mb).unwrap();
        }
        Pag::new(g)
    }

    #[test]
    fn r1_orients_into_directed_edge() {
        // 0 *-> 1 o-o 2 with 0, 2 non-adjacent gives 1 -> 2.
        let p = pag(
            &[
                (0, 1, Mark::Circle, Mark::Arrow),
                (1, 2, Mark::Circle, Mark::Circle),
            ],
            3,
        );
        let skeleton = p.graph().clone();
        let (out, trace) = rule_closure(&p, &GraphKnowledge(&skeleton)).unwrap();
        assert_eq!(out.graph().mark_at(1, 2), Some(Mark::Tail));
        assert_eq!(out.graph().mark_at(2, 1), Some(Mark::Arrow));
        assert!(trace.iter().all(|e| e.rule == "R1"));
    }

    #[test]
    fn all_circle_graph_without_unshielded_triples_is_fixed() {
        // A triangle of circles: every triple is shielded, nothing fires.
        let p = pag(
            &[
                (0, 1, Mark::Circle, Mark::Circle),
                (1, 2, Mark::Circle, Mark::Circle),
                (0, 2, Mark::Circle, Mark::Circle),
            ],
            3,
        );
        let skeleton = p.graph().clone();
        let (out, trace) = rule_closure(&p, &GraphKnowledge(&skeleton)).unwrap();
        assert!(trace.is_empty());
        assert_eq!(out.graph(), p.graph());
    }

    #[test]
    fn inconsistent_orientation_is_reported() {
        // R1 wants an arrowhead at 2 on the 1-2 edge, but a tail is set.
        let p = pag(
            &[
                (0, 1, Mark::Circle, Mark::Arrow),
                (1, 2, Mark::Circle, Mark::Tail),
            ],
            3,
        );
        let skeleton = p.graph().clone();
        let err = rule_closure(&p, &GraphKnowledge(&skeleton)).unwrap_err();
        assert!(matches!(err, Error::InconsistentOrientation { .. }));
    }

    #[test]
    fn closure_is_idempotent_and_monotone() {
        let p = pag(
            &[
                (0, 1, Mark::Circle, Mark::Arrow),
                (1, 2, Mark::Circle, Mark::Circle),
                (3, 1, Mark::Circle, Mark::Arrow),
            ],
            4,
        );
        let skeleton = p.graph().clone();
        let k = GraphKnowledge(&skeleton);
        let (once, _) = rule_closure(&p, &k).unwrap();
        let (twice, trace) = rule_closure(&once, &k).unwrap();
        assert!(trace.is_empty());
        assert_eq!(once.graph(), twice.graph());
        assert!(once.graph().circle_count() <= p.graph().circle_count());
    }
}
