//! Discrete-time kernels, their inverse communication speed, and the maps
//! `K = I + L/l` and `L = k(K - I)` relating them to generators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivatives::f_of;
use crate::eigentime::chunk_seed;
use crate::error::{Error, Result};
use crate::generator::{matrix_to_rows, rows_to_matrix, Generator, ProbabilityVector, MEMBERSHIP_TOL};
use crate::graph::DirectedGraph;
use crate::linalg::{eigenvalues, max_abs_diff, Lu, Matrix, C64};
use crate::optimizer::{f_wedge, frank_wolfe_minimize, OptimizeOptions, Polytope, MAX_BRUTE_FORCE_CYCLES};

/// A row-stochastic matrix; diagonal entries are holding probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel {
    entries: Matrix,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    n: usize,
    #[serde(alias = "rates")]
    entries: Vec<Vec<f64>>,
}

impl TryFrom<KernelRepr> for Kernel {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        Kernel::new(rows_to_matrix(r.n, &r.entries)?)
    }
}

impl From<Kernel> for KernelRepr {
    fn from(k: Kernel) -> Self {
        KernelRepr { n: k.n(), entries: matrix_to_rows(&k.entries) }
    }
}

impl Kernel {
    pub fn new(entries: Matrix) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidInput("kernel must be square and nonempty".into()));
        }
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("kernel entries must be finite and nonnegative".into()));
        }
        for i in 0..n {
            let s: f64 = entries.row(i).iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("kernel row {i} sums to {s}")));
            }
        }
        Ok(Kernel { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn is_irreducible(&self) -> bool {
        let n = self.n();
        let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && self.entries[(i, j)] > 0.0);
        DirectedGraph::new(n, edges.collect::<Vec<_>>()).map(|g| g.is_strongly_connected()).unwrap_or(false)
    }

    pub fn check_invariant(&self, pi: &ProbabilityVector) -> Result<()> {
        let n = self.n();
        if pi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: pi.len() });
        }
        let w = pi.weights();
        let r = (0..n)
            .map(|y| ((0..n).map(|x| w[x] * self.entries[(x, y)]).sum::<f64>() - w[y]).abs())
            .fold(0.0, f64::max);
        if r > MEMBERSHIP_TOL {
            return Err(Error::NotInvariant(r));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        max_abs_diff(&self.entries, &Matrix::identity(self.n(), self.n())) == 0.0
    }
}

/// Entry `(x, y)` is the expected number of steps to reach `y` from `x`.
pub fn discrete_hitting_times(k: &Kernel) -> Result<Matrix> {
    if !k.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let n = k.n();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|y| {
            let idx: Vec<usize> = (0..n).filter(|&i| i != y).collect();
            let a = Matrix::from_fn(n - 1, n - 1, |i, j| {
                let d = if i == j { 1.0 } else { 0.0 };
                d - k.entries[(idx[i], idx[j])]
            });
            let h = Lu::factor(&a).map_err(|_| Error::NotIrreducible)?.solve(&vec![1.0; n - 1]);
            let mut col = h;
            col.insert(y, 0.0);
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_fn(n, n, |x, y| cols[y][x]))
}

/// `sum_{x,y} pi(x) pi(y) E_x[tau_y]` for the kernel.
pub fn frak_f(k: &Kernel, pi: &ProbabilityVector) -> Result<f64> {
    k.check_invariant(pi)?;
    Ok(crate::eigentime::pi_average(pi, &discrete_hitting_times(k)?))
}

/// Eigenvalues of `K` other than the one closest to 1.
pub fn kernel_spectrum(k: &Kernel) -> Result<Vec<C64>> {
    let mut ev = eigenvalues(k.matrix())?;
    let one = C64::new(1.0, 0.0);
    ev.sort_by(|a, b| (a - one).norm().total_cmp(&(b - one).norm()));
    if ev.len() >= 2 && (ev[1] - one).norm() < 1e-8 {
        return Err(Error::SpectrumAmbiguous((ev[1] - one).norm()));
    }
    ev.remove(0);
    Ok(ev)
}

/// `sum 1/(1 - theta)` over the spectrum of `K` without the eigenvalue 1.
pub fn frak_f_spectral(k: &Kernel) -> Result<f64> {
    let s: C64 = kernel_spectrum(k)?.iter().map(|t| (C64::new(1.0, 0.0) - t).inv()).sum();
    if s.im.abs() > 1e-8 * s.re.abs().max(1.0) {
        return Err(Error::Consistency { what: "imaginary part of spectral sum", residual: s.im.abs() });
    }
    Ok(s.re)
}

/// `tr (I - K + Pi)^{-1}` with `Pi` the matrix whose rows are `pi`.
pub fn hunter_trace(k: &Kernel, pi: &ProbabilityVector) -> Result<f64> {
    k.check_invariant(pi)?;
    let n = k.n();
    let w = pi.weights();
    let a = Matrix::from_fn(n, n, |i, j| (if i == j { 1.0 } else { 0.0 }) - k.entries[(i, j)] + w[j]);
    Ok(Lu::factor(&a)?.inverse().trace())
}

/// `K = I + L / l` with `l = max_x L(x)`.
pub fn phi_map(l: &Generator) -> Result<(Kernel, f64)> {
    let lmax = l.max_exit_rate();
    if lmax <= 0.0 {
        return Err(Error::ZeroGenerator);
    }
    let n = l.n();
    let mut m = Matrix::identity(n, n) + l.matrix() / lmax;
    // Rows attaining the maximum get an exact zero on the diagonal.
    for x in 0..n {
        if l.exit_rate(x) == lmax {
            m[(x, x)] = 0.0;
        } else {
            m[(x, x)] = m[(x, x)].max(0.0);
        }
        let off: f64 = (0..n).filter(|&y| y != x).map(|y| m[(x, y)]).sum();
        m[(x, x)] = (1.0 - off).max(0.0);
    }
    Ok((Kernel::new(m)?, lmax))
}

/// `L = k (K - I)` with `k = 1 / sum_x pi(x) (1 - K(x,x))`.
pub fn psi_map(k: &Kernel, pi: &ProbabilityVector) -> Result<(Generator, f64)> {
    k.check_invariant(pi)?;
    let n = k.n();
    let w = pi.weights();
    let jump: f64 = (0..n).map(|x| w[x] * (1.0 - k.entries[(x, x)])).sum();
    if k.is_identity() || jump <= 0.0 {
        return Err(Error::IdentityKernel);
    }
    let kk = 1.0 / jump;
    let mut m = (&k.entries - Matrix::identity(n, n)) * kk;
    for x in 0..n {
        m[(x, x)] = 0.0;
    }
    Ok((Generator::from_off_diagonal(m)?, kk))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeComparison {
    pub f_wedge: f64,
    pub frak_f_wedge: f64,
    pub gap: f64,
    /// The kernel attaining `frak_f_wedge`.
    pub kernel: Kernel,
}

/// `l(L) F(L)`: the value of the best kernel with the same off-diagonal
/// pattern as `L` up to holding.
fn discrete_objective(p: &Polytope<'_>, w: &[f64]) -> (f64, f64) {
    let l = p.generator(w);
    match f_of(&l, p.pi) {
        Ok(f) => (l.max_exit_rate() * f, f),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

fn pattern_search(p: &Polytope<'_>, mut w: Vec<f64>, best_f: &mut f64) -> (f64, Vec<f64>) {
    let m = p.len();
    let (mut j, f) = discrete_objective(p, &w);
    *best_f = best_f.min(f);
    let mut step: f64 = 0.05;
    while step > 1e-10 {
        let mut improved = false;
        for a in 0..m {
            for b in 0..m {
                if a == b || w[b] <= 0.0 {
                    continue;
                }
                let s = step.min(w[b]);
                let mut v = w.clone();
                v[a] += s;
                v[b] -= s;
                if v[b] < 1e-15 {
                    v[b] = 0.0;
                }
                let (jv, fv) = discrete_objective(p, &v);
                *best_f = best_f.min(fv);
                if jv < j {
                    j = jv;
                    w = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (j, w)
}

/// Continuous and discrete infima over kernels compatible with `g`.
///
/// Any `pi`-invariant kernel `K` satisfies `frak_f(K) = k F(L) >= l F(L)`
/// for `L = psi_map(K)`, with equality for `phi_map(L)`, so the discrete
/// infimum is the minimum of `max_x L(x) F(L)` over normalized `L`. That
/// nonsmooth objective is searched by pattern search over cycle weights
/// from the continuous optimum, the uniform weights and seeded restarts,
/// plus a grid when the graph has at most six cycles.
pub fn compare_wedges(g: &DirectedGraph, pi: &ProbabilityVector) -> Result<WedgeComparison> {
    let opts = OptimizeOptions::default();
    let fw = frank_wolfe_minimize(g, pi, &opts)?;
    let mut f_best = f_wedge(g, pi)?.min(fw.f_min);
    let p = Polytope::from_cycles(pi, fw.weights.cycles.clone())?;
    let m = p.len();

    let mut starts = vec![fw.weights.weights.clone(), vec![1.0 / m as f64; m]];
    for k in 0..8u64 {
        let mut rng = <rand_xoshiro::Xoshiro256PlusPlus as rand::SeedableRng>::seed_from_u64(chunk_seed(opts.seed ^ 0xD15C, k));
        let v: Vec<f64> = (0..m).map(|_| crate::eigentime::exponential(&mut rng, 1.0) + 1e-12).collect();
        let s: f64 = v.iter().sum();
        starts.push(v.into_iter().map(|x| x / s).collect());
    }
    if m <= MAX_BRUTE_FORCE_CYCLES {
        let res = 24;
        let grid = compositions(res, m);
        let best = grid
            .par_iter()
            .map(|k| {
                let w: Vec<f64> = k.iter().map(|&x| x as f64 / res as f64).collect();
                (discrete_objective(&p, &w).0, w)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        starts.push(best.1);
    }
    let results: Vec<(f64, Vec<f64>, f64)> = starts
        .into_par_iter()
        .map(|w| {
            let mut fb = f64::INFINITY;
            let (j, w) = pattern_search(&p, w, &mut fb);
            (j, w, fb)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (j, w, fb) in results {
        f_best = f_best.min(fb);
        if best.as_ref().is_none_or(|b| j < b.0) {
            best = Some((j, w));
        }
    }
    let (_, w) = best.expect("at least one start");
    let (kernel, _) = phi_map(&p.generator(&w))?;
    let frak = frak_f(&kernel, pi)?;
    Ok(WedgeComparison { f_wedge: f_best, frak_f_wedge: frak, gap: frak - f_best, kernel })
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for k in 0..=total {
        for mut rest in compositions(total - k, parts - 1) {
            rest.insert(0, k);
            out.push(rest);
        }
    }
    out
}
