//! A short cycle with fast trees beats every Hamiltonian generator, the
//! closed-form minimizers on the three-vertex segment, and a probe of the
//! Hamiltonian minimizers near the uniform measure.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::eigentime::{chunk_seed, inverse_speed, spectrum};
use crate::error::{Error, Result};
use crate::generator::{cycle_generator, invariant_measure, normalize, Generator, ProbabilityVector};
use crate::graph::{enumerate_hamiltonian_cycles, enumerate_simple_cycles, Cycle, DirectedGraph, DEFAULT_CYCLE_BUDGET};
use crate::linalg::{match_multisets, max_abs_diff, Matrix, C64};
use crate::optimizer::{frank_wolfe_minimize, OptimizeOptions};

fn check_trees(g: &DirectedGraph, cycle: &Cycle, tree_edges: &[(usize, usize)]) -> Result<()> {
    let n = g.n();
    let mut out = vec![None; n];
    for &(a, b) in tree_edges {
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidTrees(format!("arc ({a},{b}) out of range")));
        }
        if cycle.contains(a) {
            return Err(Error::InvalidTrees(format!("vertex {a} lies on the cycle")));
        }
        if !g.has_edge(a, b) {
            return Err(Error::InvalidTrees(format!("arc ({a},{b}) is not an edge")));
        }
        if out[a].replace(b).is_some() {
            return Err(Error::InvalidTrees(format!("vertex {a} has two tree arcs")));
        }
    }
    for v in (0..n).filter(|v| !cycle.contains(*v)) {
        let mut cur = v;
        for _ in 0..=n {
            if cycle.contains(cur) {
                break;
            }
            cur = out[cur].ok_or_else(|| Error::InvalidTrees(format!("vertex {cur} has no tree arc")))?;
        }
        if !cycle.contains(cur) {
            return Err(Error::InvalidTrees(format!("tree arcs from {v} never reach the cycle")));
        }
    }
    Ok(())
}

/// Rate 1 along `short_cycle`, rate `r` on every tree arc.
pub fn build_cycle_tree_generator(g: &DirectedGraph, short_cycle: &Cycle, tree_edges: &[(usize, usize)], r: f64) -> Result<Generator> {
    let n = g.n();
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidInput("r must be positive".into()));
    }
    if short_cycle.max_vertex() >= n || !short_cycle.is_admissible(g) {
        return Err(Error::InvalidInput(format!("cycle {short_cycle} is not admissible")));
    }
    if short_cycle.len() >= n {
        return Err(Error::InvalidInput("cycle must miss at least one vertex".into()));
    }
    check_trees(g, short_cycle, tree_edges)?;
    let mut m = Matrix::zeros(n, n);
    for (a, b) in short_cycle.arcs() {
        m[(a, b)] = 1.0;
    }
    for &(a, b) in tree_edges {
        m[(a, b)] = r;
    }
    Generator::from_off_diagonal(m)
}

/// Tree arcs toward `cycle` along shortest paths, smallest successor first.
pub fn default_tree_edges(g: &DirectedGraph, cycle: &Cycle) -> Result<Vec<(usize, usize)>> {
    let n = g.n();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for &v in cycle.vertices() {
        dist[v] = 0;
        queue.push_back(v);
    }
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in g.edges() {
        preds[b].push(a);
    }
    while let Some(v) = queue.pop_front() {
        for &u in &preds[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let mut edges = Vec::new();
    for v in (0..n).filter(|v| !cycle.contains(*v)) {
        if dist[v] == usize::MAX {
            return Err(Error::InvalidTrees(format!("vertex {v} cannot reach the cycle")));
        }
        let next = g.successors(v).iter().copied().filter(|&w| dist[w] + 1 == dist[v]).min().unwrap();
        edges.push((v, next));
    }
    Ok(edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedF {
    pub value: f64,
    /// Multiplicity of the eigenvalue `r` in the spectrum.
    pub multiplicity: usize,
    /// Worst pairing distance between the spectrum and the union of the
    /// pure-cycle spectrum with `r` repeated `multiplicity` times.
    pub split_error: f64,
}

/// `sum 1/lambda` over the nonzero spectrum of `L_r`.
pub fn extended_f(l_r: &Generator, short_cycle: &Cycle, r: f64) -> Result<ExtendedF> {
    let spec = spectrum(l_r)?;
    let value = spec.inverse_power_sum(1)?;
    let multiplicity = spec.values().iter().filter(|z| (**z - C64::new(r, 0.0)).norm() <= 1e-6 * r.max(1.0)).count();

    let k = short_cycle.len();
    let mut expected: Vec<C64> = (1..k)
        .map(|j| {
            let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / k as f64);
            C64::new(1.0, 0.0) - w
        })
        .collect();
    expected.extend(std::iter::repeat_n(C64::new(r, 0.0), l_r.n() - k));
    let split_error = match_multisets(spec.values(), &expected).unwrap_or(f64::INFINITY);
    Ok(ExtendedF { value, multiplicity, split_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianValue {
    pub cycle: Cycle,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub graph: DirectedGraph,
    pub short_cycle: Cycle,
    pub tree_edges: Vec<(usize, usize)>,
    pub r: f64,
    pub eps: f64,
    pub pi_r_eps: ProbabilityVector,
    pub generator: Generator,
    pub f_perturbed: f64,
    pub hamiltonian_values: Vec<HamiltonianValue>,
    /// `(N/2) sum_{x != y} pi(x) pi(y)` at `pi_r_eps`.
    pub hamiltonian_formula: f64,
    pub margin: f64,
    pub extended: ExtendedF,
    pub predicted_margin: f64,
}

/// `Z^{-1} (L_r + eps L_G)` with `L_G` the unit-rate generator on all edges
/// and `Z` its equilibrium jump rate.
pub fn perturbed_generator(g: &DirectedGraph, l_r: &Generator, eps: f64) -> Result<(Generator, ProbabilityVector)> {
    let n = g.n();
    let mut m = l_r.matrix().clone();
    for (a, b) in g.edges() {
        m[(a, b)] += eps;
    }
    for x in 0..n {
        m[(x, x)] = 0.0;
    }
    let raw = Generator::from_off_diagonal(m)?;
    let pi = invariant_measure(&raw)?;
    Ok((normalize(&raw, &pi)?, pi))
}

pub const R_GRID: [f64; 8] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];
pub const EPS_GRID: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

fn try_point(g: &DirectedGraph, cycle: &Cycle, trees: &[(usize, usize)], hams: &[Cycle], r: f64, eps: f64) -> Result<CounterexampleReport> {
    let l_r = build_cycle_tree_generator(g, cycle, trees, r)?;
    let (l, pi) = perturbed_generator(g, &l_r, eps)?;
    let f_perturbed = inverse_speed(&l, &pi)?;
    let hamiltonian_values = hams
        .iter()
        .map(|h| Ok(HamiltonianValue { cycle: h.clone(), f: inverse_speed(&cycle_generator(&pi, h)?, &pi)? }))
        .collect::<Result<Vec<_>>>()?;
    let n = g.n() as f64;
    let hamiltonian_formula = n / 2.0 * pi.off_diagonal_mass();
    let min_h = hamiltonian_values.iter().map(|h| h.f).fold(f64::INFINITY, f64::min);
    let k = cycle.len() as f64;
    Ok(CounterexampleReport {
        graph: g.clone(),
        short_cycle: cycle.clone(),
        tree_edges: trees.to_vec(),
        r,
        eps,
        pi_r_eps: pi,
        generator: l,
        f_perturbed,
        hamiltonian_values,
        hamiltonian_formula,
        margin: min_h - f_perturbed,
        extended: extended_f(&l_r, cycle, r)?,
        predicted_margin: (k - 1.0) * (n - k) / (2.0 * k),
    })
}

/// Searches `r` and `eps` on geometric grids for a generator compatible
/// with `g` that beats every Hamiltonian cycle generator at its own
/// invariant measure. Candidate short cycles are tried longest first.
pub fn find_counterexample(g: &DirectedGraph) -> Result<CounterexampleReport> {
    if !g.is_strongly_connected() {
        return Err(Error::NotIrreducible);
    }
    if g.is_hamiltonian_cycle() {
        return Err(Error::Precondition("graph is itself a Hamiltonian cycle".into()));
    }
    let hams = enumerate_hamiltonian_cycles(g);
    if hams.is_empty() {
        return Err(Error::Precondition("graph is not Hamiltonian".into()));
    }
    let mut short: Vec<Cycle> = enumerate_simple_cycles(g, DEFAULT_CYCLE_BUDGET)?.into_iter().filter(|c| c.len() < g.n()).collect();
    short.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    for cycle in &short {
        let trees = default_tree_edges(g, cycle)?;
        for &r in &R_GRID {
            for &eps in &EPS_GRID {
                let Ok(rep) = try_point(g, cycle, &trees, &hams, r, eps) else { continue };
                if rep.margin > 0.0 {
                    return Ok(rep);
                }
            }
        }
    }
    Err(Error::SearchExhausted)
}

/// `|F(L_{r,eps}) - extended F(L_r)|` along a sequence of `eps`.
pub fn perturbation_limit_probe(g: &DirectedGraph, short_cycle: &Cycle, r: f64, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    let trees = default_tree_edges(g, short_cycle)?;
    let l_r = build_cycle_tree_generator(g, short_cycle, &trees, r)?;
    let limit = extended_f(&l_r, short_cycle, r)?.value;
    eps.iter()
        .map(|&e| {
            let (l, pi) = perturbed_generator(g, &l_r, e)?;
            Ok((e, (inverse_speed(&l, &pi)? - limit).abs()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S2ClosedForm {
    pub generator: Generator,
    pub f_min: f64,
    pub branch: String,
    pub relabeled: bool,
    /// Weight on the two-cycle (0,1) in the original labels.
    pub p: f64,
}

fn segment_mixture(pi: &ProbabilityVector, p: f64) -> Result<Generator> {
    let a = cycle_generator(pi, &Cycle::new(vec![0, 1])?)?;
    let b = cycle_generator(pi, &Cycle::new(vec![1, 2])?)?;
    Generator::from_off_diagonal(a.matrix() * p + b.matrix() * (1.0 - p))
}

/// Minimizer of `F` on the segment `0 - 1 - 2` for a measure on three vertices.
pub fn s2_closed_form(pi: &[f64]) -> Result<S2ClosedForm> {
    if pi.len() != 3 {
        return Err(Error::NotLength3(pi.len()));
    }
    let pv = ProbabilityVector::new(pi.to_vec())?;
    let (x, z) = (pi[0], pi[2]);
    let relabeled = (x - 0.5).abs() < (z - 0.5).abs();
    let (x, z) = if relabeled { (z, x) } else { (x, z) };
    let degenerate = ((x - 0.5).abs() - (z - 0.5).abs()).abs() <= 1e-12;
    let sx = (x * (1.0 - x)).sqrt();
    let sz = (z * (1.0 - z)).sqrt();
    let (p_rel, f_min) = if degenerate { (0.5, 8.0 * x * (1.0 - x)) } else { (sx / (sx + sz), 2.0 * (sx + sz).powi(2)) };
    let p = if relabeled { 1.0 - p_rel } else { p_rel };
    Ok(S2ClosedForm {
        generator: segment_mixture(&pv, p)?,
        f_min,
        branch: if degenerate { "degenerate" } else { "generic" }.into(),
        relabeled,
        p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrial {
    pub pi: ProbabilityVector,
    pub l1_distance: f64,
    pub f_min: f64,
    pub hamiltonian: Option<Cycle>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Probe {
    pub trials: Vec<ProbeTrial>,
    pub successes: usize,
    pub success_fraction: f64,
}

/// A measure at L1 distance at most `size` from uniform.
pub fn perturbed_uniform(n: usize, size: f64, seed: u64) -> Result<ProbabilityVector> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    let norm: f64 = d.iter().map(|v| v.abs()).sum();
    let target = size * rng.random::<f64>();
    let scale = if norm > 0.0 { target / norm } else { 0.0 };
    ProbabilityVector::from_unnormalized(d.iter().map(|v| 1.0 / n as f64 + v * scale).collect())
}

pub const PROBE_ENTRY_TOL: f64 = 1e-8;

/// Runs the optimizer at random measures near uniform and records whether
/// each minimizer is a Hamiltonian cycle generator.
pub fn theorem2_probe(g: &DirectedGraph, perturbation_size: f64, trials: usize, seed: u64) -> Result<Theorem2Probe> {
    if !(0.0..=0.05).contains(&perturbation_size) {
        return Err(Error::InvalidInput("perturbation size must lie in [0, 0.05]".into()));
    }
    let hams = enumerate_hamiltonian_cycles(g);
    if hams.is_empty() {
        return Err(Error::Precondition("graph is not Hamiltonian".into()));
    }
    let n = g.n();
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let pi = perturbed_uniform(n, perturbation_size, chunk_seed(seed, t as u64))?;
        let l1_distance = pi.weights().iter().map(|p| (p - 1.0 / n as f64).abs()).sum();
        let opts = OptimizeOptions { seed: chunk_seed(seed ^ 0x7E57, t as u64), ..OptimizeOptions::default() };
        let rep = frank_wolfe_minimize(g, &pi, &opts)?;
        let mut best: Option<(Cycle, f64)> = None;
        for h in &hams {
            let dev = max_abs_diff(rep.minimizer.matrix(), cycle_generator(&pi, h)?.matrix());
            if best.as_ref().is_none_or(|b| dev < b.1) {
                best = Some((h.clone(), dev));
            }
        }
        let (cycle, dev) = best.expect("nonempty");
        out.push(ProbeTrial {
            pi,
            l1_distance,
            f_min: rep.f_min,
            hamiltonian: (dev <= PROBE_ENTRY_TOL).then_some(cycle),
            max_deviation: dev,
        });
    }
    let successes = out.iter().filter(|t| t.hamiltonian.is_some()).count();
    Ok(Theorem2Probe { success_fraction: if trials == 0 { 1.0 } else { successes as f64 / trials as f64 }, trials: out, successes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_leaf() -> DirectedGraph {
        DirectedGraph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)]).unwrap()
    }

    #[test]
    fn cycle_tree_generator() {
        let g = triangle_leaf();
        let c = Cycle::new(vec![0, 1, 2]).unwrap();
        let l = build_cycle_tree_generator(&g, &c, &[(3, 0)], 10.0).unwrap();
        assert_eq!(l.matrix().row(3).iter().copied().collect::<Vec<_>>(), vec![10.0, 0.0, 0.0, -10.0]);
        let e = extended_f(&l, &c, 10.0).unwrap();
        assert!((e.value - 1.1).abs() < 1e-10);
        assert_eq!(e.multiplicity, 1);
        assert!(e.split_error < 1e-6);
        assert!(matches!(build_cycle_tree_generator(&g, &c, &[], 10.0), Err(Error::InvalidTrees(_))));
        assert!(matches!(build_cycle_tree_generator(&g, &c, &[(3, 0), (2, 3)], 10.0), Err(Error::InvalidTrees(_))));
        assert_eq!(default_tree_edges(&g, &c).unwrap(), vec![(3, 0)]);
    }

    #[test]
    fn counterexample_on_triangle_leaf() {
        let rep = find_counterexample(&triangle_leaf()).unwrap();
        assert!(rep.margin > 0.0);
        assert!(rep.f_perturbed < rep.hamiltonian_formula);
        assert!(rep.pi_r_eps.weights()[3] < 0.25);
        let hc = DirectedGraph::directed_cycle(4).unwrap();
        assert!(matches!(find_counterexample(&hc), Err(Error::Precondition(_))));
    }

    #[test]
    fn s2_examples() {
        let u = s2_closed_form(&[1.0 / 3.0; 3]).unwrap();
        assert_eq!(u.branch, "degenerate");
        assert!((u.f_min - 16.0 / 9.0).abs() < 1e-14);
        let row: Vec<f64> = u.generator.matrix().row(1).iter().copied().collect();
        for (a, b) in row.iter().zip([0.75, -1.5, 0.75]) {
            assert!((a - b).abs() < 1e-14);
        }
        let d = s2_closed_form(&[0.4, 0.2, 0.4]).unwrap();
        assert_eq!(d.branch, "degenerate");
        assert!((d.f_min - 1.92).abs() < 1e-14);
        let gnr = s2_closed_form(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(gnr.branch, "generic");
        assert!(!gnr.relabeled);
        assert!((gnr.f_min - 1.62).abs() < 1e-14);
        assert!((gnr.p - 4.0 / 9.0).abs() < 1e-14);
        let swapped = s2_closed_form(&[0.5, 0.3, 0.2]).unwrap();
        assert!(swapped.relabeled);
        assert!((swapped.p - 5.0 / 9.0).abs() < 1e-14);
        assert!((swapped.f_min - 1.62).abs() < 1e-14);
        assert_eq!(s2_closed_form(&[0.5, 0.5]).unwrap_err(), Error::NotLength3(2));
        assert_eq!(s2_closed_form(&[0.5, 0.5, 0.0]).unwrap_err(), Error::NotPositive);
    }

    #[test]
    fn closed_form_matches_its_generator() {
        for pi in [[0.2, 0.3, 0.5], [1.0 / 3.0; 3], [0.1, 0.6, 0.3]] {
            let s = s2_closed_form(&pi).unwrap();
            let pv = ProbabilityVector::new(pi.to_vec()).unwrap();
            assert!((inverse_speed(&s.generator, &pv).unwrap() - s.f_min).abs() < 1e-12);
        }
    }

    #[test]
    fn probe_at_zero_size() {
        let p = theorem2_probe(&DirectedGraph::complete(3).unwrap(), 0.0, 2, 1).unwrap();
        assert_eq!(p.success_fraction, 1.0);
        assert!(matches!(theorem2_probe(&DirectedGraph::segment(2).unwrap(), 0.01, 1, 1), Err(Error::Precondition(_))));
    }
}
