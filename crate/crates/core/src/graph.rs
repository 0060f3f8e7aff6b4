//! Mixed-graph representation shared by DAGs, MAGs and PAGs.
//!
//! A mixed graph stores at most one edge per unordered pair of nodes; each
//! edge carries one mark per endpoint (tail, arrow or circle). Node
//! identifiers are strings externally and dense indices internally; index
//! order is input order, which makes every traversal in the crate
//! deterministic.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge-endpoint mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Tail,
    Arrow,
    Circle,
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mark::Tail => write!(f, "tail"),
            Mark::Arrow => write!(f, "arrow"),
            Mark::Circle => write!(f, "circle"),
        }
    }
}

/// Graph over named nodes with marked edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// adj[a][b] = (mark at a, mark at b); stored symmetrically.
    adj: Vec<BTreeMap<usize, (Mark, Mark)>>,
}

impl MixedGraph {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut g = MixedGraph {
            names: Vec::new(),
            index: HashMap::new(),
            adj: Vec::new(),
        };
        for name in names {
            g.add_node(name.into())?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, name: String) -> Result<usize> {
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateNode(name));
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.adj.push(BTreeMap::new());
        Ok(id)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn add_edge(&mut self, a: usize, b: usize, mark_a: Mark, mark_b: Mark) -> Result<()> {
        if a == b {
            return Err(Error::SelfLoop(self.names[a].clone()));
        }
        if self.adj[a].contains_key(&b) {
            return Err(Error::DuplicateEdge(
                self.names[a].clone(),
                self.names[b].clone(),
            ));
        }
        self.adj[a].insert(b, (mark_a, mark_b));
        self.adj[b].insert(a, (mark_b, mark_a));
        Ok(())
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.adj[a].remove(&b);
        self.adj[b].remove(&a);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains_key(&b)
    }

    /// Mark at `a`'s end of the edge `a`-`b`, if the edge exists.
    pub fn mark_at(&self, a: usize, b: usize) -> Option<Mark> {
        self.adj[a].get(&b).map(|&(ma, _)| ma)
    }

    /// Overwrites the mark at `a`'s end of the existing edge `a`-`b`.
    pub fn set_mark_at(&mut self, a: usize, b: usize, mark: Mark) {
        if let Some(e) = self.adj[a].get_mut(&b) {
            e.0 = mark;
        }
        if let Some(e) = self.adj[b].get_mut(&a) {
            e.1 = mark;
        }
    }

    /// Neighbors of `a` in ascending index order.
    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[a].keys().copied()
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adj[a].len()
    }

    /// All edges as `(a, b, mark_at_a, mark_at_b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, Mark, Mark)> {
        let mut out = Vec::new();
        for a in 0..self.n() {
            for (&b, &(ma, mb)) in &self.adj[a] {
                if a < b {
                    out.push((a, b, ma, mb));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|m| m.len()).sum::<usize>() / 2
    }

    /// True iff the edge `p` -> `c` exists with a tail at `p` and an arrow at `c`.
    pub fn is_directed_edge(&self, p: usize, c: usize) -> bool {
        matches!(self.adj[p].get(&c), Some(&(Mark::Tail, Mark::Arrow)))
    }

    /// True iff the edge `a` <-> `b` exists (arrowheads at both ends).
    pub fn is_bidirected_edge(&self, a: usize, b: usize) -> bool {
        matches!(self.adj[a].get(&b), Some(&(Mark::Arrow, Mark::Arrow)))
    }

    pub fn parents_of(&self, v: usize) -> Vec<usize> {
        self.neighbors(v)
            .filter(|&u| self.is_directed_edge(u, v))
            .collect()
    }

    pub fn children_of(&self, v: usize) -> Vec<usize> {
        self.neighbors(v)
            .filter(|&u| self.is_directed_edge(v, u))
            .collect()
    }

    pub fn spouses_of(&self, v: usize) -> Vec<usize> {
        self.neighbors(v)
            .filter(|&u| self.is_bidirected_edge(v, u))
            .collect()
    }

    /// Copy with the same node set but only edges whose endpoints are both in `keep`.
    pub fn restricted_to(&self, keep: &[usize]) -> MixedGraph {
        let mut mask = vec![false; self.n()];
        for &k in keep {
            mask[k] = true;
        }
        let mut g = MixedGraph {
            names: self.names.clone(),
            index: self.index.clone(),
            adj: vec![BTreeMap::new(); self.n()],
        };
        for (a, b, ma, mb) in self.edges() {
            if mask[a] && mask[b] {
                g.adj[a].insert(b, (ma, mb));
                g.adj[b].insert(a, (mb, ma));
            }
        }
        g
    }

    /// Copy with the same adjacencies but every mark reset to a circle.
    pub fn circles_like(&self) -> MixedGraph {
        let mut g = self.clone();
        for adj in &mut g.adj {
            for marks in adj.values_mut() {
                *marks = (Mark::Circle, Mark::Circle);
            }
        }
        g
    }

    /// Number of circle marks over all edge endpoints.
    pub fn circle_count(&self) -> usize {
        self.edges()
            .iter()
            .map(|&(_, _, ma, mb)| {
                usize::from(ma == Mark::Circle) + usize::from(mb == Mark::Circle)
            })
            .sum()
    }

    fn check_directed_acyclic(&self) -> Result<Vec<usize>> {
        // Kahn's algorithm over directed edges only; bidirected edges do not
        // contribute to in-degree.
        let n = self.n();
        let mut indeg = vec![0usize; n];
        for v in 0..n {
            indeg[v] = self.parents_of(v).len();
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(v);
            for c in self.children_of(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::NotADag("directed cycle detected".into()));
        }
        Ok(order)
    }
}

/// Directed acyclic graph: every edge is tail -> arrow and a topological order exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    g: MixedGraph,
    topo: Vec<usize>,
}

impl Dag {
    pub fn new(g: MixedGraph) -> Result<Self> {
        for (a, b, ma, mb) in g.edges() {
            let directed = (ma == Mark::Tail && mb == Mark::Arrow)
                || (ma == Mark::Arrow && mb == Mark::Tail);
            if !directed {
                return Err(Error::NotADag(format!(
                    "edge {}-{} is not directed",
                    g.name(a),
                    g.name(b)
                )));
            }
        }
        let topo = g.check_directed_acyclic()?;
        Ok(Dag { g, topo })
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.g
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }
}

/// Maximal ancestral graph without undirected edges (no selection bias).
#[derive(Debug, Clone, PartialEq)]
pub struct Mag {
    g: MixedGraph,
}

impl Mag {
    /// Validates edge types, ancestrality (no directed or almost-directed
    /// cycle) and maximality (no inducing path between non-adjacent nodes).
    pub fn new(g: MixedGraph) -> Result<Self> {
        for (a, b, ma, mb) in g.edges() {
            match (ma, mb) {
                (Mark::Tail, Mark::Arrow) | (Mark::Arrow, Mark::Tail) | (Mark::Arrow, Mark::Arrow) => {}
                (Mark::Tail, Mark::Tail) => {
                    return Err(Error::SelectionBiasEdge(
                        g.name(a).to_string(),
                        g.name(b).to_string(),
                    ))
                }
                _ => {
                    return Err(Error::NotAMag(format!(
                        "circle mark on edge {}-{}",
                        g.name(a),
                        g.name(b)
                    )))
                }
            }
        }
        g.check_directed_acyclic()
            .map_err(|_| Error::NotAMag("directed cycle".into()))?;
        // Almost-directed cycle: a <-> b with a an ancestor of b (or vice versa).
        for (a, b, ma, mb) in g.edges() {
            if ma == Mark::Arrow && mb == Mark::Arrow {
                let anc_a = crate::msep::ancestor_set(&g, &[a]);
                let anc_b = crate::msep::ancestor_set(&g, &[b]);
                if anc_b[a] || anc_a[b] {
                    return Err(Error::NotAMag(format!(
                        "almost-directed cycle through {} <-> {}",
                        g.name(a),
                        g.name(b)
                    )));
                }
            }
        }
        // Maximality: non-adjacent pairs must not be connected by an inducing
        // path relative to the empty set.
        for x in 0..g.n() {
            for y in x + 1..g.n() {
                if !g.has_edge(x, y) && crate::msep::find_inducing_path(&g, x, y, &[]).is_some() {
                    return Err(Error::NotAMag(format!(
                        "inducing path between non-adjacent {} and {}",
                        g.name(x),
                        g.name(y)
                    )));
                }
            }
        }
        Ok(Mag { g })
    }

    /// Construction that skips the maximality scan. Used where maximality
    /// holds by construction (latent projection); still validates edge types
    /// and ancestrality.
    pub(crate) fn new_ancestral_unchecked_maximality(g: MixedGraph) -> Result<Self> {
        for (a, b, ma, mb) in g.edges() {
            if (ma, mb) == (Mark::Tail, Mark::Tail) {
                return Err(Error::SelectionBiasEdge(
                    g.name(a).to_string(),
                    g.name(b).to_string(),
                ));
            }
        }
        g.check_directed_acyclic()
            .map_err(|_| Error::NotAMag("directed cycle".into()))?;
        Ok(Mag { g })
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.g
    }
}

/// Partial ancestral graph; marks may be circles. Invariants relating it to
/// a MAG equivalence class are enforced only in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Pag {
    g: MixedGraph,
}

impl Pag {
    pub fn new(g: MixedGraph) -> Self {
        Pag { g }
    }

    /// Edgeless PAG over the given node names.
    pub fn empty_like(g: &MixedGraph) -> Self {
        Pag {
            g: MixedGraph {
                names: g.names.clone(),
                index: g.index.clone(),
                adj: vec![BTreeMap::new(); g.n()],
            },
        }
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.g
    }

    pub fn graph_mut(&mut self) -> &mut MixedGraph {
        &mut self.g
    }

    pub fn into_graph(self) -> MixedGraph {
        self.g
    }
}

/// Parses the text graph format: one edge per line (`A -> B` or `A <-> B`),
/// optional `node X` lines for isolated nodes, `#` comments. The node index
/// order is first-appearance order.
pub fn parse_net(text: &str) -> Result<MixedGraph> {
    let mut g = MixedGraph::new(Vec::<String>::new())?;
    let intern = |g: &mut MixedGraph, name: &str| -> usize {
        match g.index_of(name) {
            Some(i) => i,
            None => g.add_node(name.to_string()).expect("fresh name"),
        }
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| Error::NetParse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        match toks.as_slice() {
            ["node", name] => {
                intern(&mut g, name);
            }
            [a, op, b] => {
                let (ma, mb) = match *op {
                    "->" => (Mark::Tail, Mark::Arrow),
                    "<->" => (Mark::Arrow, Mark::Arrow),
                    _ => return Err(err(&format!("unknown edge operator `{op}`"))),
                };
                let ia = intern(&mut g, a);
                let ib = intern(&mut g, b);
                g.add_edge(ia, ib, ma, mb)
                    .map_err(|e| err(&e.to_string()))?;
            }
            _ => return Err(err("expected `node X`, `A -> B` or `A <-> B`")),
        }
    }
    Ok(g)
}

/// Renders a graph in the text format read by [`parse_net`]. Only tail/arrow
/// marks are expressible; circle marks are rejected.
pub fn write_net(g: &MixedGraph) -> Result<String> {
    let mut out = String::new();
    for v in 0..g.n() {
        if g.degree(v) == 0 {
            out.push_str(&format!("node {}\n", g.name(v)));
        }
    }
    for (a, b, ma, mb) in g.edges() {
        match (ma, mb) {
            (Mark::Tail, Mark::Arrow) => out.push_str(&format!("{} -> {}\n", g.name(a), g.name(b))),
            (Mark::Arrow, Mark::Tail) => out.push_str(&format!("{} -> {}\n", g.name(b), g.name(a))),
            (Mark::Arrow, Mark::Arrow) => {
                out.push_str(&format!("{} <-> {}\n", g.name(a), g.name(b)))
            }
            _ => {
                return Err(Error::NetParse {
                    line: 0,
                    msg: format!("edge {}-{} has marks not expressible in the net format", g.name(a), g.name(b)),
                })
            }
        }
    }
    Ok(out)
}
