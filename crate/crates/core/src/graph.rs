//! Directed graphs, cycles and their enumeration.
//!
//! Self-loops are never stored. Cycles are kept in canonical rotation,
//! starting from their smallest vertex, so that two rotations of the same
//! cycle compare equal.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of simple cycles enumerated.
pub const DEFAULT_CYCLE_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct DirectedGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    succ: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for DirectedGraph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        DirectedGraph::new(r.n, r.edges.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<DirectedGraph> for GraphRepr {
    fn from(g: DirectedGraph) -> Self {
        GraphRepr { n: g.n, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl DirectedGraph {
    /// Builds a graph on `n` vertices. Self-loops are dropped.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph must have at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) out of range for n={n}")));
            }
            if a != b {
                set.insert((a, b));
            }
        }
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in &set {
            succ[a].push(b);
        }
        Ok(DirectedGraph { n, edges: set, succ })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (0..n).map(move |j| (i, j))))
    }

    /// The directed cycle 0 -> 1 -> ... -> n-1 -> 0.
    pub fn directed_cycle(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Path 0 - 1 - ... - len with arcs in both directions.
    pub fn segment(len: usize) -> Result<Self> {
        Self::new(len + 1, (0..len).flat_map(|i| [(i, i + 1), (i + 1, i)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a, b))
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    fn reaches_all(&self, forward: bool) -> bool {
        let mut pred = vec![Vec::new(); self.n];
        if !forward {
            for &(a, b) in &self.edges {
                pred[b].push(a);
            }
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            let next = if forward { &self.succ[v] } else { &pred[v] };
            for &w in next {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.reaches_all(true) && self.reaches_all(false)
    }

    /// True when the arcs of the graph are exactly one Hamiltonian cycle.
    pub fn is_hamiltonian_cycle(&self) -> bool {
        self.n >= 2
            && self.edges.len() == self.n
            && self.succ.iter().all(|s| s.len() == 1)
            && self.is_strongly_connected()
    }
}

pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    g.is_strongly_connected()
}

/// A simple directed cycle, stored from its smallest vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Cycle(Vec<usize>);

impl TryFrom<Vec<usize>> for Cycle {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Cycle::new(v)
    }
}

impl From<Cycle> for Vec<usize> {
    fn from(c: Cycle) -> Self {
        c.0
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl Cycle {
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("a cycle needs at least 2 vertices".into()));
        }
        let distinct: BTreeSet<_> = vertices.iter().collect();
        if distinct.len() != vertices.len() {
            return Err(Error::InvalidInput("cycle vertices must be distinct".into()));
        }
        let start = (0..vertices.len()).min_by_key(|&k| vertices[k]).unwrap();
        vertices.rotate_left(start);
        Ok(Cycle(vertices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn max_vertex(&self) -> usize {
        *self.0.iter().max().unwrap()
    }

    /// Consecutive arcs `(a_l, a_{l+1})`, indices modulo the length.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.0.len();
        (0..n).map(move |l| (self.0[l], self.0[(l + 1) % n]))
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    pub fn position(&self, v: usize) -> Option<usize> {
        self.0.iter().position(|&x| x == v)
    }

    pub fn is_admissible(&self, g: &DirectedGraph) -> bool {
        self.max_vertex() < g.n() && self.arcs().all(|(a, b)| g.has_edge(a, b))
    }

    /// Number of forward steps along the cycle from `x` to `y`.
    pub fn cyclic_distance(&self, x: usize, y: usize) -> Result<usize> {
        let px = self.position(x).ok_or(Error::VertexNotOnCycle(x))?;
        let py = self.position(y).ok_or(Error::VertexNotOnCycle(y))?;
        let n = self.len();
        Ok((py + n - px) % n)
    }
}

pub fn cyclic_distance(cycle: &Cycle, x: usize, y: usize) -> Result<usize> {
    cycle.cyclic_distance(x, y)
}

// Johnson's circuit search restricted to vertices >= s.
struct CircuitSearch<'a> {
    g: &'a DirectedGraph,
    s: usize,
    blocked: Vec<bool>,
    b_sets: Vec<Vec<usize>>,
    stack: Vec<usize>,
    out: &'a mut Vec<Cycle>,
    budget: usize,
}

impl CircuitSearch<'_> {
    fn unblock(&mut self, u: usize) {
        self.blocked[u] = false;
        while let Some(w) = self.b_sets[u].pop() {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }

    fn circuit(&mut self, v: usize) -> Result<bool> {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for &w in self.g.successors(v) {
            if w < self.s {
                continue;
            }
            if w == self.s {
                if self.stack.len() >= 2 {
                    if self.out.len() >= self.budget {
                        return Err(Error::CycleBudgetExceeded(self.budget));
                    }
                    self.out.push(Cycle(self.stack.clone()));
                }
                found = true;
            } else if !self.blocked[w] && self.circuit(w)? {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in self.g.successors(v) {
                if w >= self.s && !self.b_sets[w].contains(&v) {
                    self.b_sets[w].push(v);
                }
            }
        }
        self.stack.pop();
        Ok(found)
    }
}

/// All simple directed cycles of length >= 2, in lexicographic order of
/// their canonical form.
pub fn enumerate_simple_cycles(g: &DirectedGraph, max_count: usize) -> Result<Vec<Cycle>> {
    if max_count == 0 {
        return Err(Error::InvalidInput("max_count must be positive".into()));
    }
    let n = g.n();
    let mut out = Vec::new();
    for s in 0..n {
        let mut search = CircuitSearch {
            g,
            s,
            blocked: vec![false; n],
            b_sets: vec![Vec::new(); n],
            stack: Vec::with_capacity(n),
            out: &mut out,
            budget: max_count,
        };
        search.circuit(s)?;
    }
    out.sort();
    Ok(out)
}

/// All Hamiltonian cycles admissible for `g`, sorted. Exact backtracking.
pub fn enumerate_hamiltonian_cycles(g: &DirectedGraph) -> Vec<Cycle> {
    let n = g.n();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut path = vec![0usize];
    let mut used = vec![false; n];
    used[0] = true;
    fn extend(g: &DirectedGraph, path: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Cycle>) {
        let n = g.n();
        let last = *path.last().unwrap();
        if path.len() == n {
            if g.has_edge(last, 0) {
                out.push(Cycle(path.clone()));
            }
            return;
        }
        for &w in g.successors(last) {
            if !used[w] {
                used[w] = true;
                path.push(w);
                extend(g, path, used, out);
                path.pop();
                used[w] = false;
            }
        }
    }
    extend(g, &mut path, &mut used, &mut out);
    out.sort();
    out
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=16).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("hypercube dimension {dim} outside 1..=16")))
    }
}

/// The discrete `dim`-cube with every undirected edge as two arcs.
pub fn hypercube_graph(dim: usize) -> Result<DirectedGraph> {
    check_dim(dim)?;
    let n = 1usize << dim;
    DirectedGraph::new(n, (0..n).flat_map(|v| (0..dim).map(move |b| (v, v ^ (1 << b)))))
}

/// Reflected Gray code order, a Hamiltonian cycle of the hypercube.
pub fn gray_code_cycle(dim: usize) -> Result<Cycle> {
    check_dim(dim)?;
    Cycle::new((0..1usize << dim).map(|k| k ^ (k >> 1)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyc(v: &[usize]) -> Cycle {
        Cycle::new(v.to_vec()).unwrap()
    }

    #[test]
    fn strong_connectivity() {
        assert!(DirectedGraph::directed_cycle(3).unwrap().is_strongly_connected());
        assert!(!DirectedGraph::new(3, [(0, 1), (1, 2)]).unwrap().is_strongly_connected());
        assert!(DirectedGraph::segment(2).unwrap().is_strongly_connected());
    }

    #[test]
    fn self_loops_dropped_and_range_checked() {
        let g = DirectedGraph::new(2, [(0, 0), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(DirectedGraph::new(2, [(0, 2)]).is_err());
    }

    #[test]
    fn cycle_canonical_rotation() {
        let c = cyc(&[2, 0, 1]);
        assert_eq!(c.vertices(), &[0, 1, 2]);
        assert!(Cycle::new(vec![1, 1]).is_err());
        assert!(Cycle::new(vec![1]).is_err());
    }

    #[test]
    fn simple_cycles_of_small_graphs() {
        let s2 = DirectedGraph::segment(2).unwrap();
        assert_eq!(enumerate_simple_cycles(&s2, 10).unwrap(), vec![cyc(&[0, 1]), cyc(&[1, 2])]);

        let k3 = DirectedGraph::complete(3).unwrap();
        let got = enumerate_simple_cycles(&k3, 10).unwrap();
        let mut want = vec![cyc(&[0, 1]), cyc(&[0, 2]), cyc(&[1, 2]), cyc(&[0, 1, 2]), cyc(&[0, 2, 1])];
        want.sort();
        assert_eq!(got, want);

        let c3 = DirectedGraph::directed_cycle(3).unwrap();
        assert_eq!(enumerate_simple_cycles(&c3, 10).unwrap(), vec![cyc(&[0, 1, 2])]);
    }

    #[test]
    fn cycle_budget() {
        let k3 = DirectedGraph::complete(3).unwrap();
        assert_eq!(enumerate_simple_cycles(&k3, 4).unwrap_err(), Error::CycleBudgetExceeded(4));
        assert!(enumerate_simple_cycles(&k3, 0).is_err());
    }

    #[test]
    fn hamiltonian_cycles() {
        assert!(enumerate_hamiltonian_cycles(&DirectedGraph::segment(2).unwrap()).is_empty());
        assert_eq!(
            enumerate_hamiltonian_cycles(&DirectedGraph::complete(3).unwrap()),
            vec![cyc(&[0, 1, 2]), cyc(&[0, 2, 1])]
        );
        assert_eq!(
            enumerate_hamiltonian_cycles(&DirectedGraph::directed_cycle(3).unwrap()),
            vec![cyc(&[0, 1, 2])]
        );
    }

    #[test]
    fn hypercube_and_gray_code() {
        let g1 = hypercube_graph(1).unwrap();
        assert_eq!(g1.n(), 2);
        assert!(g1.has_edge(0, 1) && g1.has_edge(1, 0));
        assert_eq!(gray_code_cycle(1).unwrap(), cyc(&[0, 1]));
        assert_eq!(gray_code_cycle(2).unwrap().vertices(), &[0b00, 0b01, 0b11, 0b10]);
        let c3 = gray_code_cycle(3).unwrap();
        assert_eq!(c3.len(), 8);
        assert!(c3.arcs().all(|(a, b)| (a ^ b).count_ones() == 1));
        assert!(c3.is_admissible(&hypercube_graph(3).unwrap()));
        assert!(hypercube_graph(0).is_err());
        assert!(gray_code_cycle(17).is_err());
    }

    #[test]
    fn cyclic_distances() {
        let c = cyc(&[0, 1, 2]);
        assert_eq!(c.cyclic_distance(0, 0).unwrap(), 0);
        assert_eq!(c.cyclic_distance(0, 2).unwrap(), 2);
        assert_eq!(c.cyclic_distance(2, 0).unwrap(), 1);
        assert_eq!(c.cyclic_distance(0, 5).unwrap_err(), Error::VertexNotOnCycle(5));
    }

    #[test]
    fn json_formats() {
        let g: DirectedGraph = serde_json::from_str(r#"{"n":3,"edges":[[0,1],[1,2],[2,0]]}"#).unwrap();
        assert_eq!(g, DirectedGraph::directed_cycle(3).unwrap());
        let c: Cycle = serde_json::from_str("[2,0,1]").unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), "[0,1,2]");
        assert!(serde_json::from_str::<DirectedGraph>(r#"{"n":2,"edges":[[0,3]]}"#).is_err());
    }
}
