//! Minimization of `F` over the generators compatible with a graph, through
//! the weights of the cycle generators spanning that polytope.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivatives::{f_of, DerivativeContext};
use crate::eigentime::chunk_seed;
use crate::error::{Error, Result};
use crate::generator::{cycle_generator, CycleDecomposition, Generator, ProbabilityVector};
use crate::graph::{enumerate_simple_cycles, Cycle, DirectedGraph, DEFAULT_CYCLE_BUDGET};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub cycle_budget: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { tol: 1e-8, max_iters: 10_000, restarts: 8, seed: 0, cycle_budget: DEFAULT_CYCLE_BUDGET }
    }
}

/// Weights over an enumerated cycle list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub cycles: Vec<Cycle>,
    pub weights: Vec<f64>,
}

impl SimplexPoint {
    pub fn decomposition(&self) -> Result<CycleDecomposition> {
        CycleDecomposition::new(
            self.cycles.iter().cloned().zip(self.weights.iter().copied()).filter(|(_, w)| *w > 0.0).collect(),
        )
    }

    pub fn weight_of(&self, c: &Cycle) -> f64 {
        self.cycles.iter().position(|d| d == c).map_or(0.0, |i| self.weights[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCertificate {
    pub cycle: Cycle,
    pub h: f64,
    /// Every arc of the cycle carries positive rate in the generator.
    pub below: bool,
    /// `|H_A - F|` for cycles below the generator, `max(0, H_A - F)` otherwise.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub f: f64,
    pub cycles: Vec<CycleCertificate>,
    pub max_gap: f64,
    pub max_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub minimizer: Generator,
    pub weights: SimplexPoint,
    pub f_min: f64,
    pub certificate: StationarityReport,
    pub iterations: usize,
    pub converged: bool,
}

/// The cycle polytope of a graph at a fixed measure.
pub(crate) struct Polytope<'a> {
    pub pi: &'a ProbabilityVector,
    pub cycles: Vec<Cycle>,
    mats: Vec<Matrix>,
}

impl<'a> Polytope<'a> {
    pub fn new(g: &DirectedGraph, pi: &'a ProbabilityVector, budget: usize) -> Result<Self> {
        if g.n() != pi.len() {
            return Err(Error::DimensionMismatch { expected: g.n(), found: pi.len() });
        }
        if !g.is_strongly_connected() {
            return Err(Error::NotIrreducible);
        }
        let cycles = enumerate_simple_cycles(g, budget)?;
        Self::from_cycles(pi, cycles)
    }

    pub fn from_cycles(pi: &'a ProbabilityVector, cycles: Vec<Cycle>) -> Result<Self> {
        let mats = cycles.iter().map(|c| cycle_generator(pi, c).map(|l| l.matrix().clone())).collect::<Result<_>>()?;
        Ok(Polytope { pi, cycles, mats })
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn generator(&self, w: &[f64]) -> Generator {
        let n = self.pi.len();
        let mut m = Matrix::zeros(n, n);
        for (k, wk) in w.iter().enumerate() {
            if *wk != 0.0 {
                m += &self.mats[k] * *wk;
            }
        }
        Generator::from_off_diagonal(m).expect("combination of cycle generators")
    }

    /// `F` at the weights, `+inf` where the generator is reducible.
    pub fn f(&self, w: &[f64]) -> f64 {
        f_of(&self.generator(w), self.pi).unwrap_or(f64::INFINITY)
    }

    fn h_values(&self, l: &Generator) -> Result<(f64, Vec<f64>)> {
        let ctx = DerivativeContext::new(l, self.pi)?;
        let h = ctx.h_matrix();
        Ok((ctx.f_value(), self.cycles.iter().map(|c| ctx.h_cycle(&h, c)).collect()))
    }
}

const PRESAMPLE: usize = 32;
const LINE_TOL: f64 = 1e-10;
const SNAP: f64 = 1e-9;

/// Minimizes `phi` on `[0, tmax]`: a uniform presample followed by golden
/// section inside the bracket around the best sample.
fn line_search(phi: impl Fn(f64) -> f64 + Sync, tmax: f64) -> (f64, f64) {
    let samples: Vec<(f64, f64)> = (0..=PRESAMPLE)
        .into_par_iter()
        .map(|i| {
            let t = if i == PRESAMPLE { tmax } else { tmax * i as f64 / PRESAMPLE as f64 };
            (t, phi(t))
        })
        .collect();
    let k = (0..samples.len()).min_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1)).unwrap();
    let (mut best_t, mut best_f) = samples[k];
    let mut lo = samples[k.saturating_sub(1)].0;
    let mut hi = samples[(k + 1).min(PRESAMPLE)].0;
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while hi - lo > LINE_TOL {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = phi(d);
        }
    }
    for (t, f) in [(c, fc), (d, fd)] {
        if f < best_f {
            best_t = t;
            best_f = f;
        }
    }
    (best_t, best_f)
}

struct Run {
    weights: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

fn away_step_frank_wolfe(p: &Polytope<'_>, mut w: Vec<f64>, opts: &OptimizeOptions) -> Result<Run> {
    let mut f = p.f(&w);
    if !f.is_finite() {
        return Err(Error::NotIrreducible);
    }
    let m = p.len();
    for it in 0..opts.max_iters {
        let (f_ctx, h) = p.h_values(&p.generator(&w))?;
        f = f_ctx;
        let fw = (0..m).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap();
        let gap = h[fw] - f;
        if gap <= opts.tol {
            return Ok(Run { weights: w, f, iterations: it, converged: true });
        }
        let away = (0..m).filter(|&k| w[k] > 0.0).min_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap();
        let away_gain = f - h[away];

        let fw_move = |w: &[f64], t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = w.iter().map(|x| x * (1.0 - t)).collect();
            v[fw] += t;
            v
        };
        let away_move = |w: &[f64], t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = w.iter().map(|x| x * (1.0 + t)).collect();
            v[away] -= t;
            if v[away] < 1e-15 {
                v[away] = 0.0;
            }
            v
        };

        let mut candidates: Vec<(bool, f64)> = vec![(true, gap), (false, away_gain)];
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut moved = false;
        for (toward, gain) in candidates {
            if gain <= 0.0 {
                continue;
            }
            let (t, ft) = if toward {
                line_search(|t| p.f(&fw_move(&w, t)), 1.0)
            } else {
                let tmax = if w[away] >= 1.0 { continue } else { w[away] / (1.0 - w[away]) };
                line_search(|t| p.f(&away_move(&w, t)), tmax)
            };
            if ft < f && t > 0.0 {
                w = if toward { fw_move(&w, t) } else { away_move(&w, t) };
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                f = ft;
                moved = true;
                break;
            }
        }
        if !moved {
            return Ok(Run { weights: w, f, iterations: it + 1, converged: gap <= opts.tol });
        }
    }
    let (f_end, h) = p.h_values(&p.generator(&w))?;
    let gap = h.iter().copied().fold(f64::NEG_INFINITY, f64::max) - f_end;
    Ok(Run { weights: w, f: f_end, iterations: opts.max_iters, converged: gap <= opts.tol })
}

fn dirichlet(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let v: Vec<f64> = (0..m).map(|_| crate::eigentime::exponential(&mut rng, 1.0) + 1e-12).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn finish(p: &Polytope<'_>, run: Run) -> Result<OptimizeReport> {
    let mut w = run.weights;
    let snapped: Vec<f64> = w.iter().map(|x| if *x < SNAP { 0.0 } else { *x }).collect();
    let s: f64 = snapped.iter().sum();
    let snapped: Vec<f64> = snapped.into_iter().map(|x| x / s).collect();
    if p.f(&snapped).is_finite() {
        w = snapped;
    }
    let minimizer = p.generator(&w);
    let certificate = stationarity_check(&minimizer, p.pi, &p.cycles)?;
    let f_min = certificate.f;
    Ok(OptimizeReport {
        minimizer,
        weights: SimplexPoint { cycles: p.cycles.clone(), weights: w },
        f_min,
        certificate,
        iterations: run.iterations,
        converged: run.converged,
    })
}

pub(crate) fn minimize_on(p: &Polytope<'_>, opts: &OptimizeOptions) -> Result<OptimizeReport> {
    let m = p.len();
    let mut starts = vec![vec![1.0 / m as f64; m]];
    starts.extend((0..opts.restarts as u64).map(|k| dirichlet(m, chunk_seed(opts.seed, k))));
    let runs = starts.into_par_iter().map(|w| away_step_frank_wolfe(p, w, opts)).collect::<Vec<_>>();
    let mut best: Option<Run> = None;
    let mut iterations = 0;
    for r in runs {
        let r = r?;
        iterations += r.iterations;
        if best.as_ref().is_none_or(|b| r.f < b.f - 1e-13 || (r.converged && !b.converged && r.f <= b.f + 1e-13)) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = iterations;
    finish(p, best)
}

/// Away-step Frank-Wolfe from the uniform weights plus seeded restarts.
/// A run that hits `max_iters` is returned with `converged = false`.
pub fn frank_wolfe_minimize(g: &DirectedGraph, pi: &ProbabilityVector, opts: &OptimizeOptions) -> Result<OptimizeReport> {
    let p = Polytope::new(g, pi, opts.cycle_budget)?;
    minimize_on(&p, opts)
}

const MAX_GRID_POINTS: u128 = 20_000_000;
pub const MAX_BRUTE_FORCE_CYCLES: usize = 6;

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(total - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Exhaustive scan of the weight grid `k / resolution`, followed by a
/// derivative-free pattern search from the best grid point.
pub fn brute_force_minimize(g: &DirectedGraph, pi: &ProbabilityVector, resolution: usize) -> Result<OptimizeReport> {
    if resolution < 10 {
        return Err(Error::InvalidInput("grid resolution must be at least 10".into()));
    }
    let p = Polytope::new(g, pi, MAX_BRUTE_FORCE_CYCLES)
        .map_err(|e| if let Error::CycleBudgetExceeded(_) = e { Error::TooManyCycles(MAX_BRUTE_FORCE_CYCLES + 1) } else { e })?;
    let m = p.len();
    if binomial((resolution + m - 1) as u128, (m - 1) as u128) > MAX_GRID_POINTS {
        return Err(Error::InvalidInput(format!("grid of resolution {resolution} over {m} cycles is too large")));
    }
    let grid = compositions(resolution, m);
    let best = grid
        .par_iter()
        .map(|k| {
            let w: Vec<f64> = k.iter().map(|&x| x as f64 / resolution as f64).collect();
            (p.f(&w), w)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let (mut f, mut w) = best;
    if !f.is_finite() {
        return Err(Error::NotIrreducible);
    }

    // Pattern search: move mass between pairs of cycles.
    let mut step = 1.0 / resolution as f64;
    let mut evals = 0;
    while step > 1e-12 {
        let mut improved = false;
        for i in 0..m {
            for j in 0..m {
                if i == j || w[j] <= 0.0 {
                    continue;
                }
                let s = step.min(w[j]);
                let mut v = w.clone();
                v[i] += s;
                v[j] -= s;
                if v[j] < 1e-15 {
                    v[j] = 0.0;
                }
                let fv = p.f(&v);
                evals += 1;
                if fv < f {
                    f = fv;
                    w = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    finish(&p, Run { weights: w, f, iterations: evals, converged: true })
}

/// First-order conditions at `l`: `H_A = F` on cycles below `l` and
/// `H_A <= F` on all others.
pub fn stationarity_check(l: &Generator, pi: &ProbabilityVector, cycles: &[Cycle]) -> Result<StationarityReport> {
    let ctx = DerivativeContext::new(l, pi)?;
    let h = ctx.h_matrix();
    let f = ctx.f_value();
    let scale = crate::linalg::max_abs(l.matrix()).max(1.0);
    let mut certs = Vec::with_capacity(cycles.len());
    for c in cycles {
        if c.max_vertex() >= l.n() {
            return Err(Error::VertexNotOnCycle(c.max_vertex()));
        }
        let hv = ctx.h_cycle(&h, c);
        let below = c.arcs().all(|(a, b)| l.rate(a, b) > 1e-12 * scale);
        let gap = if below { (hv - f).abs() } else { (hv - f).max(0.0) };
        certs.push(CycleCertificate { cycle: c.clone(), h: hv, below, gap });
    }
    let max_gap = certs.iter().map(|c| c.gap).fold(0.0, f64::max);
    let max_h = certs.iter().map(|c| c.h).fold(f64::NEG_INFINITY, f64::max);
    Ok(StationarityReport { f, cycles: certs, max_gap, max_h })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNeighborhood {
    pub eps1: f64,
    pub eps2: f64,
    pub eps: f64,
}

/// Radii `pi^4 ln(1 + 1/(N pi^2))` and `pi^12 / 56` at `pi = pi_min`.
pub fn epsilon_neighborhood(n: usize, pi_min: f64) -> Result<EpsilonNeighborhood> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least two vertices".into()));
    }
    if !(pi_min > 0.0 && pi_min <= 1.0 / n as f64 * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!("pi_min must lie in (0, 1/{n}]")));
    }
    let p2 = pi_min * pi_min;
    let eps1 = p2 * p2 * (1.0 / (n as f64 * p2)).ln_1p();
    let eps2 = pi_min.powi(12) / 56.0;
    Ok(EpsilonNeighborhood { eps1, eps2, eps: eps1.min(eps2) })
}

const WEDGE_RESOLUTION: usize = 40;

/// Best of the multi-start optimizer and, for at most six cycles, the
/// brute-force oracle.
pub fn f_wedge(g: &DirectedGraph, pi: &ProbabilityVector) -> Result<f64> {
    let fw = frank_wolfe_minimize(g, pi, &OptimizeOptions::default())?;
    let mut best = fw.f_min;
    if fw.weights.cycles.len() <= MAX_BRUTE_FORCE_CYCLES {
        best = best.min(brute_force_minimize(g, pi, WEDGE_RESOLUTION)?.f_min);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2() -> DirectedGraph {
        DirectedGraph::segment(2).unwrap()
    }

    #[test]
    fn k3_uniform_reaches_hamiltonian_vertex() {
        let u = ProbabilityVector::uniform(3);
        let r = frank_wolfe_minimize(&DirectedGraph::complete(3).unwrap(), &u, &OptimizeOptions::default()).unwrap();
        assert!((r.f_min - 1.0).abs() < 1e-8, "{}", r.f_min);
        assert!(r.converged);
        let nonzero: Vec<_> = r.weights.weights.iter().filter(|w| **w > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
    }

    #[test]
    fn s2_uniform_mixture() {
        let u = ProbabilityVector::uniform(3);
        let r = frank_wolfe_minimize(&s2(), &u, &OptimizeOptions::default()).unwrap();
        assert!((r.f_min - 16.0 / 9.0).abs() < 1e-8);
        let a = Cycle::new(vec![0, 1]).unwrap();
        assert!((r.weights.weight_of(&a) - 0.5).abs() < 1e-4);
        assert!(r.certificate.max_gap < 1e-6);
    }

    #[test]
    fn brute_force_on_s2_and_cycle() {
        let u = ProbabilityVector::uniform(3);
        let r = brute_force_minimize(&s2(), &u, 1000).unwrap();
        assert!((r.f_min - 16.0 / 9.0).abs() < 1e-4);
        let r = brute_force_minimize(&DirectedGraph::directed_cycle(3).unwrap(), &u, 10).unwrap();
        assert!((r.f_min - 1.0).abs() < 1e-12);
        assert!(matches!(brute_force_minimize(&DirectedGraph::complete(4).unwrap(), &ProbabilityVector::uniform(4), 10), Err(Error::TooManyCycles(_))));
    }

    #[test]
    fn stationarity_of_hamiltonian_vertex() {
        let u = ProbabilityVector::uniform(4);
        let g = DirectedGraph::complete(4).unwrap();
        let cycles = enumerate_simple_cycles(&g, 100).unwrap();
        let a = Cycle::new(vec![0, 1, 2, 3]).unwrap();
        let l = cycle_generator(&u, &a).unwrap();
        let r = stationarity_check(&l, &u, &cycles).unwrap();
        assert!(r.max_gap < 1e-12);
        for c in &r.cycles {
            if c.cycle != a {
                assert!(r.f - c.h >= 3.0 / 8.0 - 1e-10);
            }
        }
    }

    #[test]
    fn interior_point_is_not_stationary() {
        let u = ProbabilityVector::uniform(3);
        let g = DirectedGraph::complete(3).unwrap();
        let p = Polytope::new(&g, &u, 100).unwrap();
        let l = p.generator(&[0.1, 0.4, 0.1, 0.2, 0.2]);
        assert!(stationarity_check(&l, &u, &p.cycles).unwrap().max_gap > 1e-3);
        // The symmetric walk is stationary although F = 4/3 exceeds the minimum 1.
        let l = p.generator(&[0.2; 5]);
        assert!(stationarity_check(&l, &u, &p.cycles).unwrap().max_gap < 1e-12);
    }

    #[test]
    fn epsilon_values() {
        let e = epsilon_neighborhood(3, 1.0 / 3.0).unwrap();
        assert!((e.eps1 - 4f64.ln() / 81.0).abs() < 1e-15);
        assert!((e.eps2 - 3f64.powi(-12) / 56.0).abs() < 1e-22);
        assert_eq!(e.eps, e.eps2);
        assert!(epsilon_neighborhood(3, 0.5).is_err());
        assert!(epsilon_neighborhood(1, 0.5).is_err());
    }
}
