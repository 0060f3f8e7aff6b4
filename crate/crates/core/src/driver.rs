//! The sequential driver: waitlist/donelist management, per-pivot local
//! learning with substructure reuse, accumulation of the valid fragment, rule
//! closure, and the three stop rules.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ci::CiBackend;
use crate::error::{Error, Result};
use crate::graph::{Mark, MixedGraph, Pag};
use crate::local::{
    learn_skeleton, orient_v_structures, pair_key, select_pivot_info, LocalStructure, SepsetCache,
};
use crate::mmb::{tc_mmb, MmbResult};
use crate::orient::{marks_determined_at, rule_closure, OrientationKnowledge};

/// Which stop rule ended the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StopRule {
    R1,
    R2,
    R3,
}

impl std::fmt::Display for StopRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopRule::R1 => write!(f, "R1"),
            StopRule::R2 => write!(f, "R2"),
            StopRule::R3 => write!(f, "R3"),
        }
    }
}

/// Output of one run: the accumulated fragment and the target's adjacency
/// partitioned by endpoint marks.
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub p: Pag,
    pub target: usize,
    /// Neighbors v with v -> target fully determined.
    pub parents: Vec<usize>,
    /// Neighbors v with target -> v fully determined.
    pub children: Vec<usize>,
    /// Neighbors whose edge carries a circle at either end.
    pub ambiguous: Vec<usize>,
    /// Neighbors v with v <-> target.
    pub spouses_or_confounded: Vec<usize>,
    pub stop_rule: StopRule,
    pub n_tests: u64,
    /// Pivot order.
    pub trace: Vec<usize>,
    /// Mark conflicts resolved during merging (finite-sample only).
    pub conflicts: Vec<String>,
}

/// Adjacency facts established during a run: pairs with a recorded
/// separating set, and pairs resolved by a pivoted node's completed
/// adjacency. Unknown pairs are treated as possibly adjacent, so closure
/// rules stay sound on the growing fragment.
struct RunKnowledge<'a> {
    nonadj: &'a BTreeSet<(usize, usize)>,
    sepsets: &'a SepsetCache,
}

impl OrientationKnowledge for RunKnowledge<'_> {
    fn non_adjacent(&self, a: usize, b: usize) -> bool {
        self.nonadj.contains(&pair_key(a, b))
    }

    fn sepset_contains(
        &self,
        theta: usize,
        gamma: usize,
        beta: usize,
        _alpha: usize,
    ) -> Option<bool> {
        self.sepsets
            .get(&pair_key(theta, gamma))
            .map(|s| s.contains(&beta))
    }
}

struct Driver<'a, B: CiBackend> {
    backend: &'a mut B,
    observed: Vec<usize>,
    target: usize,
    waitlist: VecDeque<usize>,
    donelist: Vec<usize>,
    done: BTreeSet<usize>,
    queued: BTreeSet<usize>,
    p: Pag,
    stored: BTreeMap<usize, (MmbResult, LocalStructure)>,
    sepsets: SepsetCache,
    nonadj: BTreeSet<(usize, usize)>,
    conflicts: Vec<String>,
}

impl<B: CiBackend> Driver<'_, B> {
    fn merge_selected(&mut self, edges: &[(usize, usize, Mark, Mark)]) {
        for &(a, b, ma, mb) in edges {
            if !self.p.graph().has_edge(a, b) {
                self.p
                    .graph_mut()
                    .add_edge(a, b, ma, mb)
                    .expect("fresh edge");
                continue;
            }
            for (node, other, new) in [(a, b, ma), (b, a, mb)] {
                let old = self.p.graph().mark_at(node, other).expect("edge exists");
                match (old, new) {
                    (o, n) if o == n => {}
                    (Mark::Circle, n) => self.p.graph_mut().set_mark_at(node, other, n),
                    (_, Mark::Circle) => {}
                    (o, n) => {
                        // Earlier pivots conditioned on more targeted
                        // information; the fragment's mark wins.
                        self.conflicts.push(format!(
                            "mark conflict at {} on edge {}-{}: fragment has {o:?}, new local info wants {n:?}",
                            self.p.graph().name(node),
                            self.p.graph().name(a),
                            self.p.graph().name(b),
                        ));
                    }
                }
            }
        }
    }

    /// Algorithm branch selection for the pivot's local structure:
    /// (a) substructure of a stored structure whose scope covers this one,
    /// (b) substructure of the fragment when the whole blanket is done,
    /// (c) fresh skeleton + V-structure learning.
    fn local_structure_for(&mut self, x: usize, mmb_x: &MmbResult) -> Result<LocalStructure> {
        let scope: Vec<usize> = mmb_x.mmb_plus.iter().copied().collect();

        // (a): the covering structure's confirmed V-structures restrict
        // verbatim (in-scope triples keep their adjacency and sepsets), so
        // no CI queries are spent here.
        for &y in &self.donelist {
            let (mmb_y, ls_y) = &self.stored[&y];
            if mmb_x.mmb_plus.is_subset(&mmb_y.mmb_plus) {
                log::debug!(
                    "pivot {}: reusing substructure of stored local structure of {}",
                    self.p.graph().name(x),
                    self.p.graph().name(y)
                );
                let in_scope: BTreeSet<usize> = scope.iter().copied().collect();
                let mut graph = ls_y.graph.restricted_to(&scope).circles_like();
                let vstructs: Vec<(usize, usize, usize)> = ls_y
                    .vstructs
                    .iter()
                    .copied()
                    .filter(|&(a, c, b)| {
                        in_scope.contains(&a) && in_scope.contains(&b) && in_scope.contains(&c)
                    })
                    .collect();
                for &(a, c, b) in &vstructs {
                    graph.set_mark_at(c, a, Mark::Arrow);
                    graph.set_mark_at(c, b, Mark::Arrow);
                }
                let sepsets = restrict_sepsets(&ls_y.sepsets, &scope);
                return Ok(LocalStructure {
                    graph,
                    scope,
                    sepsets,
                    vstructs,
                });
            }
        }

        // (b)
        if mmb_x.mmb.iter().all(|v| self.done.contains(v)) {
            let graph = self.p.graph().restricted_to(&scope).circles_like();
            if let Some(sepsets) = sepsets_covering(&graph, &scope, &self.sepsets) {
                log::debug!(
                    "pivot {}: reusing substructure of the fragment",
                    self.p.graph().name(x)
                );
                let ls = LocalStructure {
                    graph,
                    scope,
                    sepsets,
                    vstructs: Vec::new(),
                };
                return orient_v_structures(ls, self.backend);
            }
            log::debug!(
                "pivot {}: fragment substructure lacks a separating set; learning afresh",
                self.p.graph().name(x)
            );
        }

        // (c)
        let ls = learn_skeleton(self.backend, &scope)?;
        orient_v_structures(ls, self.backend)
    }

    fn run(&mut self) -> Result<(StopRule, Vec<usize>)> {
        let mut trace = Vec::new();
        loop {
            let x = self
                .waitlist
                .pop_front()
                .expect("stop rule R2 fires before exhaustion");
            self.queued.remove(&x);
            trace.push(x);

            let mmb_x = tc_mmb(self.backend, &self.observed, x)?;
            let ls = self.local_structure_for(x, &mmb_x)?;
            let sel = select_pivot_info(&ls, x)?;

            for (&pair, sep) in &ls.sepsets {
                self.nonadj.insert(pair);
                self.sepsets.entry(pair).or_insert_with(|| sep.clone());
            }
            self.merge_selected(&sel.edges);
            self.stored.insert(x, (mmb_x, ls));

            // The pivot's adjacency is now exact: record its non-edges.
            let adj_x: BTreeSet<usize> = self.p.graph().neighbors(x).collect();
            for &v in &self.observed {
                if v != x && !adj_x.contains(&v) {
                    self.nonadj.insert(pair_key(x, v));
                }
            }

            let knowledge = RunKnowledge {
                nonadj: &self.nonadj,
                sepsets: &self.sepsets,
            };
            let (closed, _rule_trace) = rule_closure(&self.p, &knowledge)?;
            self.p = closed;

            self.donelist.push(x);
            self.done.insert(x);
            for v in adj_x {
                if !self.done.contains(&v) && !self.queued.contains(&v) {
                    self.waitlist.push_back(v);
                    self.queued.insert(v);
                }
            }

            if self.done.contains(&self.target) && marks_determined_at(&self.p, self.target) {
                return Ok((StopRule::R1, trace));
            }
            if self.waitlist.is_empty() {
                return Ok((StopRule::R2, trace));
            }
            if self.done.contains(&self.target) && self.circle_paths_blocked() {
                return Ok((StopRule::R3, trace));
            }
            debug_assert!(trace.len() <= self.observed.len(), "pivot loop must terminate");
        }
    }

    /// Stop rule R3: every path leaving the target along an edge that still
    /// carries a circle is blocked by an arrowhead at the far node before it
    /// reaches a waitlist node through a non-arrowhead entry.
    fn circle_paths_blocked(&self) -> bool {
        let g = self.p.graph();
        let t = self.target;
        let mut open = BTreeSet::new();
        let mut stack = Vec::new();
        for v in g.neighbors(t) {
            let undetermined = g.mark_at(t, v) == Some(Mark::Circle)
                || g.mark_at(v, t) == Some(Mark::Circle);
            if !undetermined {
                continue;
            }
            if g.mark_at(v, t) == Some(Mark::Arrow) {
                continue; // blocked at entry
            }
            if self.queued.contains(&v) {
                return false;
            }
            if open.insert(v) {
                stack.push(v);
            }
        }
        while let Some(u) = stack.pop() {
            for w in g.neighbors(u) {
                if w == t || open.contains(&w) {
                    continue;
                }
                if g.mark_at(w, u) == Some(Mark::Arrow) {
                    continue; // blocked
                }
                if self.queued.contains(&w) {
                    return false;
                }
                open.insert(w);
                stack.push(w);
            }
        }
        true
    }
}

fn restrict_sepsets(cache: &SepsetCache, scope: &[usize]) -> SepsetCache {
    let in_scope: BTreeSet<usize> = scope.iter().copied().collect();
    cache
        .iter()
        .filter(|((a, b), _)| in_scope.contains(a) && in_scope.contains(b))
        .map(|(&k, v)| (k, v.clone()))
        .collect()
}

/// Sepsets for every non-adjacent in-scope pair of `graph`, or `None` if any
/// is missing from the global cache.
fn sepsets_covering(
    graph: &MixedGraph,
    scope: &[usize],
    global: &SepsetCache,
) -> Option<SepsetCache> {
    let mut out = SepsetCache::new();
    for (i, &a) in scope.iter().enumerate() {
        for &b in &scope[i + 1..] {
            if graph.has_edge(a, b) {
                continue;
            }
            let sep = global.get(&pair_key(a, b))?;
            out.insert(pair_key(a, b), sep.clone());
        }
    }
    Some(out)
}

/// Runs the sequential algorithm for `target` over `observed` and returns
/// the fragment plus the target's classified adjacency.
pub fn run_mmb_by_mmb<B: CiBackend>(
    backend: &mut B,
    observed: &[usize],
    target: usize,
) -> Result<LocalResult> {
    if !observed.contains(&target) {
        return Err(Error::InvalidQuery(format!(
            "target index {target} not among observed variables"
        )));
    }
    let names: Vec<String> = backend.var_names().to_vec();
    let p = Pag::new(MixedGraph::new(names)?);
    let mut driver = Driver {
        backend,
        observed: observed.to_vec(),
        target,
        waitlist: VecDeque::from([target]),
        donelist: Vec::new(),
        done: BTreeSet::new(),
        queued: BTreeSet::from([target]),
        p,
        stored: BTreeMap::new(),
        sepsets: SepsetCache::new(),
        nonadj: BTreeSet::new(),
        conflicts: Vec::new(),
    };
    let (stop_rule, trace) = driver.run()?;

    let g = driver.p.graph();
    let mut parents = Vec::new();
    let mut children = Vec::new();
    let mut ambiguous = Vec::new();
    let mut spouses = Vec::new();
    for v in g.neighbors(target) {
        let mv = g.mark_at(v, target).expect("edge exists");
        let mt = g.mark_at(target, v).expect("edge exists");
        match (mv, mt) {
            (Mark::Tail, Mark::Arrow) => parents.push(v),
            (Mark::Arrow, Mark::Tail) => children.push(v),
            (Mark::Arrow, Mark::Arrow) => spouses.push(v),
            _ => ambiguous.push(v),
        }
    }
    Ok(LocalResult {
        n_tests: driver.backend.n_tests(),
        p: driver.p,
        target,
        parents,
        children,
        ambiguous,
        spouses_or_confounded: spouses,
        stop_rule,
        trace,
        conflicts: driver.conflicts,
    })
}
