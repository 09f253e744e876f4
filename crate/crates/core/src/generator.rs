//! Markov generators with a prescribed invariant measure, cycle generators
//! and barycentric cycle decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cycle, DirectedGraph};
use crate::linalg::{max_abs, Lu, Matrix};

/// Absolute tolerance (relative to the largest rate when that exceeds 1)
/// for invariance and normalization checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
const ROW_SUM_TOL: f64 = 1e-12;

/// A strictly positive probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector {
    weights: Vec<f64>,
    pi_min: f64,
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbabilityVector::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.weights
    }
}

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::NotPositive);
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        let pi_min = weights.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ProbabilityVector { weights, pi_min })
    }

    /// Rescales positive weights to sum to one.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::NotPositive);
        }
        let sum: f64 = weights.iter().sum();
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(vec![1.0 / n as f64; n]).expect("uniform weights")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    /// `sum_{x != y} pi(x) pi(y)`.
    pub fn off_diagonal_mass(&self) -> f64 {
        1.0 - self.weights.iter().map(|p| p * p).sum::<f64>()
    }

    pub fn l1_distance(&self, other: &ProbabilityVector) -> f64 {
        self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// A Markov generator: nonnegative off-diagonal rates, zero row sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorRepr", into = "GeneratorRepr")]
pub struct Generator {
    rates: Matrix,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct GeneratorRepr {
    pub n: usize,
    pub rates: Vec<Vec<f64>>,
}

impl TryFrom<GeneratorRepr> for Generator {
    type Error = Error;
    fn try_from(r: GeneratorRepr) -> Result<Self> {
        Generator::new(rows_to_matrix(r.n, &r.rates)?)
    }
}

impl From<Generator> for GeneratorRepr {
    fn from(g: Generator) -> Self {
        GeneratorRepr { n: g.n(), rates: matrix_to_rows(&g.rates) }
    }
}

pub(crate) fn rows_to_matrix(n: usize, rows: &[Vec<f64>]) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!("expected a {n}x{n} matrix")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl Generator {
    /// Validates a full rate matrix. Row sums must vanish to within `1e-12`
    /// times the largest rate (or absolutely when rates are below 1).
    pub fn new(rates: Matrix) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 || rates.ncols() != n {
            return Err(Error::InvalidInput("rate matrix must be square and nonempty".into()));
        }
        if rates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("rates must be finite".into()));
        }
        let scale = max_abs(&rates).max(1.0);
        for i in 0..n {
            for j in 0..n {
                if i != j && rates[(i, j)] < 0.0 {
                    return Err(Error::InvalidInput(format!("negative rate at ({i},{j})")));
                }
            }
            let s: f64 = rates.row(i).iter().sum();
            if s.abs() > ROW_SUM_TOL * scale {
                return Err(Error::InvalidInput(format!("row {i} sums to {s:e}")));
            }
        }
        Ok(Generator { rates })
    }

    /// Builds a generator from its off-diagonal part; the diagonal is set
    /// to minus the row sums.
    pub fn from_off_diagonal(mut rates: Matrix) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 || rates.ncols() != n {
            return Err(Error::InvalidInput("rate matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            rates[(i, i)] = 0.0;
            let s: f64 = rates.row(i).iter().sum();
            rates[(i, i)] = -s;
        }
        Self::new(rates)
    }

    pub fn n(&self) -> usize {
        self.rates.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rates
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[(x, y)]
    }

    /// `L(x) = -L(x,x)`.
    pub fn exit_rate(&self, x: usize) -> f64 {
        -self.rates[(x, x)]
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n()).map(|x| self.exit_rate(x)).fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: f64) -> Generator {
        Generator { rates: &self.rates * alpha }
    }

    /// `L[f](x) = sum_y L(x,y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(&self.rates, f)
    }

    /// Graph of strictly positive off-diagonal rates.
    pub fn support_graph(&self) -> DirectedGraph {
        let n = self.n();
        let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && self.rates[(i, j)] > 0.0);
        DirectedGraph::new(n, edges.collect::<Vec<_>>()).expect("support graph")
    }

    pub fn is_irreducible(&self) -> bool {
        self.support_graph().is_strongly_connected()
    }

    /// `sum_x pi(x) L(x)`.
    pub fn equilibrium_jump_rate(&self, pi: &ProbabilityVector) -> f64 {
        (0..self.n()).map(|x| pi.weights()[x] * self.exit_rate(x)).sum()
    }

    /// Scaled `max_y |(pi L)(y)|`.
    pub fn invariance_residual(&self, pi: &ProbabilityVector) -> f64 {
        let n = self.n();
        let scale = max_abs(&self.rates).max(1.0);
        (0..n)
            .map(|y| (0..n).map(|x| pi.weights()[x] * self.rates[(x, y)]).sum::<f64>().abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn check_invariant(&self, pi: &ProbabilityVector) -> Result<()> {
        if pi.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: pi.len() });
        }
        let r = self.invariance_residual(pi);
        if r > MEMBERSHIP_TOL {
            return Err(Error::NotInvariant(r));
        }
        Ok(())
    }

    /// Checks membership in the set of normalized generators leaving `pi`
    /// invariant (irreducibility not required).
    pub fn check_normalized_invariant(&self, pi: &ProbabilityVector) -> Result<()> {
        self.check_invariant(pi)?;
        let rate = self.equilibrium_jump_rate(pi);
        if (rate - 1.0).abs() > MEMBERSHIP_TOL {
            return Err(Error::NotNormalized(rate));
        }
        Ok(())
    }
}

/// The generator moving around `cycle` with rates `1/(n pi(a_l))`.
pub fn cycle_generator(pi: &ProbabilityVector, cycle: &Cycle) -> Result<Generator> {
    let n = pi.len();
    if cycle.max_vertex() >= n {
        return Err(Error::VertexNotOnCycle(cycle.max_vertex()));
    }
    let len = cycle.len() as f64;
    let mut m = Matrix::zeros(n, n);
    for (a, b) in cycle.arcs() {
        let r = 1.0 / (len * pi.weights()[a]);
        m[(a, b)] = r;
        m[(a, a)] = -r;
    }
    Ok(Generator { rates: m })
}

/// Solves `pi A = 0` with one equation replaced by the normalization.
/// Works for any generator with a single closed class.
pub(crate) fn stationary_vector(rates: &Matrix) -> Result<Vec<f64>> {
    let n = rates.nrows();
    let mut a = rates.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    Ok(Lu::factor(&a)?.solve(&rhs))
}

pub fn invariant_measure(l: &Generator) -> Result<ProbabilityVector> {
    if !l.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let mut v = stationary_vector(l.matrix()).map_err(|_| Error::NotIrreducible)?;
    if v.iter().any(|p| *p <= 0.0) {
        return Err(Error::NotIrreducible);
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= s);
    ProbabilityVector::new(v)
}

pub fn normalize(l: &Generator, pi: &ProbabilityVector) -> Result<Generator> {
    l.check_invariant(pi)?;
    let rate = l.equilibrium_jump_rate(pi);
    if rate <= 0.0 {
        return Err(Error::ZeroGenerator);
    }
    Ok(l.scaled(1.0 / rate))
}

/// A barycentric combination of cycle generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CycleDecomposition {
    terms: Vec<DecompositionTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub cycle: Cycle,
    pub weight: f64,
}

impl CycleDecomposition {
    pub fn new(terms: Vec<(Cycle, f64)>) -> Result<Self> {
        if terms.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("decomposition weights must be nonnegative".into()));
        }
        let total: f64 = terms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("decomposition weights sum to {total}")));
        }
        Ok(CycleDecomposition {
            terms: terms.into_iter().map(|(cycle, weight)| DecompositionTerm { cycle, weight }).collect(),
        })
    }

    pub fn terms(&self) -> &[DecompositionTerm] {
        &self.terms
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

/// `sum_A p(A) L_A`.
pub fn combine(d: &CycleDecomposition, pi: &ProbabilityVector) -> Result<Generator> {
    let n = pi.len();
    let mut m = Matrix::zeros(n, n);
    for t in d.terms() {
        m += cycle_generator(pi, &t.cycle)?.matrix() * t.weight;
    }
    Ok(Generator { rates: m })
}

const FLOW_EPS: f64 = 1e-15;

/// Greedy cycle peeling of the edge flow `Q(x,y) = pi(x) L(x,y)`.
pub fn decompose_into_cycles(l: &Generator, pi: &ProbabilityVector) -> Result<CycleDecomposition> {
    l.check_normalized_invariant(pi)?;
    let n = l.n();
    let mut flow = Matrix::from_fn(n, n, |x, y| if x == y { 0.0 } else { pi.weights()[x] * l.rate(x, y) });
    let mut terms: Vec<(Cycle, f64)> = Vec::new();

    loop {
        let start = (0..n).find(|&x| (0..n).any(|y| flow[(x, y)] > FLOW_EPS));
        let Some(start) = start else { break };

        // Walk along the heaviest outgoing arc until a vertex repeats.
        let mut path = vec![start];
        let mut pos = vec![usize::MAX; n];
        pos[start] = 0;
        let cycle_vertices = loop {
            let cur = *path.last().unwrap();
            let next = (0..n)
                .filter(|&y| flow[(cur, y)] > FLOW_EPS)
                .max_by(|&a, &b| flow[(cur, a)].total_cmp(&flow[(cur, b)]));
            match next {
                None => {
                    // Dead end from round-off: drop the residual inflow.
                    for x in 0..n {
                        flow[(x, cur)] = 0.0;
                    }
                    break None;
                }
                Some(y) if pos[y] != usize::MAX => break Some(path[pos[y]..].to_vec()),
                Some(y) => {
                    pos[y] = path.len();
                    path.push(y);
                }
            }
        };
        let Some(cv) = cycle_vertices else { continue };
        let cycle = Cycle::new(cv)?;
        let m = cycle.arcs().map(|(a, b)| flow[(a, b)]).fold(f64::INFINITY, f64::min);
        for (a, b) in cycle.arcs() {
            flow[(a, b)] = if flow[(a, b)] - m <= FLOW_EPS { 0.0 } else { flow[(a, b)] - m };
        }
        let w = m * cycle.len() as f64;
        match terms.iter_mut().find(|(c, _)| *c == cycle) {
            Some(t) => t.1 += w,
            None => terms.push((cycle, w)),
        }
    }

    let total: f64 = terms.iter().map(|t| t.1).sum();
    if total <= 0.0 {
        return Err(Error::ZeroGenerator);
    }
    terms.iter_mut().for_each(|t| t.1 /= total);
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    CycleDecomposition::new(terms)
}

/// Every strictly positive off-diagonal rate sits on an edge of `g`.
pub fn is_compatible(l: &Generator, g: &DirectedGraph) -> bool {
    let n = l.n();
    n == g.n() && (0..n).all(|x| (0..n).all(|y| x == y || l.rate(x, y) <= 0.0 || g.has_edge(x, y)))
}
