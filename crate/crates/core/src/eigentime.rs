//! Hitting-time moments, the inverse communication speed and the spectral
//! identities it satisfies.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{matrix_to_rows, Generator, ProbabilityVector};
use crate::linalg::{eigenvalues, Lu, Matrix, C64};

/// Tolerance on `|pi . rhs|` accepted by [`poisson_solve`].
pub const CENTERING_TOL: f64 = 1e-9;
const AMBIGUITY_TOL: f64 = 1e-8;
const IMAG_TOL: f64 = 1e-8;

/// Factorizations of `L` with row and column `y` removed, one per anchor.
///
/// Solving `L g = r, g(y) = 0` only needs the rows `x != y`; the remaining
/// equation holds automatically when `r` is centered.
pub struct PoissonSolver<'a> {
    l: &'a Generator,
    pi: &'a ProbabilityVector,
    factors: Vec<Lu>,
}

impl<'a> PoissonSolver<'a> {
    pub fn new(l: &'a Generator, pi: &'a ProbabilityVector) -> Result<Self> {
        let n = l.n();
        if pi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: pi.len() });
        }
        if !l.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        let factors = (0..n)
            .into_par_iter()
            .map(|y| Lu::factor(&reduced(l.matrix(), y)).map_err(|_| Error::NotIrreducible))
            .collect::<Result<Vec<_>>>()?;
        Ok(PoissonSolver { l, pi, factors })
    }

    pub fn generator(&self) -> &Generator {
        self.l
    }

    pub fn pi(&self) -> &ProbabilityVector {
        self.pi
    }

    pub fn n(&self) -> usize {
        self.l.n()
    }

    /// Solves using the rows `x != anchor` only; no centering check.
    pub fn solve_unchecked(&self, rhs: &[f64], anchor: usize) -> Vec<f64> {
        let n = self.n();
        let r: Vec<f64> = (0..n).filter(|&x| x != anchor).map(|x| rhs[x]).collect();
        let s = self.factors[anchor].solve(&r);
        let mut g = Vec::with_capacity(n);
        g.extend_from_slice(&s[..anchor]);
        g.push(0.0);
        g.extend_from_slice(&s[anchor..]);
        g
    }

    pub fn solve(&self, rhs: &[f64], anchor: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rhs.len() });
        }
        if anchor >= n {
            return Err(Error::VertexNotOnCycle(anchor));
        }
        let scale = rhs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let c = self.pi.mean(rhs);
        if c.abs() > CENTERING_TOL * scale {
            return Err(Error::NotCentered(c));
        }
        Ok(self.solve_unchecked(rhs, anchor))
    }

    /// `phi_y = E_.[tau_y]`, solving `L phi = 1_y / pi(y) - 1` at anchor `y`.
    pub fn phi(&self, y: usize) -> Vec<f64> {
        let rhs: Vec<f64> = (0..self.n()).map(|x| if x == y { 1.0 / self.pi.weights()[y] - 1.0 } else { -1.0 }).collect();
        self.solve_unchecked(&rhs, y)
    }

    /// All expected hitting times; entry `(x, y)` is `E_x[tau_y]`.
    pub fn hitting_matrix(&self) -> Matrix {
        let n = self.n();
        let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(|y| self.phi(y)).collect();
        Matrix::from_fn(n, n, |x, y| cols[y][x])
    }

    /// The auxiliary solution of `L g = phi_y - pi[phi_y]`, anchored at `y`.
    pub fn phi_aux(&self, phi_y: &[f64], y: usize) -> Vec<f64> {
        let c = self.pi.mean(phi_y);
        let rhs: Vec<f64> = phi_y.iter().map(|v| v - c).collect();
        self.solve_unchecked(&rhs, y)
    }
}

fn reduced(m: &Matrix, y: usize) -> Matrix {
    let n = m.nrows();
    let idx: Vec<usize> = (0..n).filter(|&i| i != y).collect();
    Matrix::from_fn(n - 1, n - 1, |i, j| m[(idx[i], idx[j])])
}

/// Solves `L g = rhs` with `g(anchor) = 0`.
pub fn poisson_solve(l: &Generator, pi: &ProbabilityVector, rhs: &[f64], anchor: usize) -> Result<Vec<f64>> {
    PoissonSolver::new(l, pi)?.solve(rhs, anchor)
}

/// Matrix of `E_x[tau_y]`.
pub fn expected_hitting_times(l: &Generator, pi: &ProbabilityVector) -> Result<Matrix> {
    Ok(PoissonSolver::new(l, pi)?.hitting_matrix())
}

pub(crate) fn pi_average(pi: &ProbabilityVector, m: &Matrix) -> f64 {
    let w = pi.weights();
    let n = w.len();
    (0..n).map(|x| w[x] * (0..n).map(|y| w[y] * m[(x, y)]).sum::<f64>()).sum()
}

/// `F(L) = sum_{x,y} pi(x) pi(y) E_x[tau_y]`.
pub fn inverse_speed(l: &Generator, pi: &ProbabilityVector) -> Result<f64> {
    l.check_invariant(pi)?;
    Ok(pi_average(pi, &expected_hitting_times(l, pi)?))
}

/// Nonzero eigenvalues of `-L`, with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<C64>,
}

impl Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.values.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(Spectrum::from_values(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect()))
    }
}

impl Spectrum {
    pub fn from_values(mut values: Vec<C64>) -> Self {
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Spectrum { values }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sum 1/lambda^k`, real part after checking the imaginary residue.
    pub fn inverse_power_sum(&self, k: i32) -> Result<f64> {
        let s: C64 = self.values.iter().map(|z| z.powi(-k)).sum();
        if s.im.abs() > IMAG_TOL * s.re.abs().max(1.0) {
            return Err(Error::Consistency { what: "imaginary part of spectral sum", residual: s.im.abs() });
        }
        Ok(s.re)
    }

    /// Largest distance between a value and the conjugate it is paired with.
    pub fn conjugation_defect(&self) -> f64 {
        let conj: Vec<C64> = self.values.iter().map(|z| z.conj()).collect();
        crate::linalg::match_multisets(&self.values, &conj).unwrap_or(f64::INFINITY)
    }
}

pub fn spectrum(l: &Generator) -> Result<Spectrum> {
    let mut ev = eigenvalues(&(-l.matrix()))?;
    ev.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    if ev.len() >= 2 && ev[1].norm() < AMBIGUITY_TOL {
        return Err(Error::SpectrumAmbiguous(ev[1].norm()));
    }
    ev.remove(0);
    Ok(Spectrum::from_values(ev))
}

/// `sum 1/lambda` over the nonzero spectrum of `-L`.
pub fn eigentime_spectral(l: &Generator) -> Result<f64> {
    spectrum(l)?.inverse_power_sum(1)
}

/// Entry `(x, y)` is `E_x[tau_y^2]`, from two nested Poisson solves.
pub fn second_moment_hitting(l: &Generator, pi: &ProbabilityVector) -> Result<Matrix> {
    let s = PoissonSolver::new(l, pi)?;
    Ok(second_moments_with(&s))
}

fn second_moments_with(s: &PoissonSolver<'_>) -> Matrix {
    let n = s.n();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|y| {
            let phi = s.phi(y);
            let aux = s.phi_aux(&phi, y);
            let c = s.pi().mean(&phi);
            (0..n).map(|x| 2.0 * (c * phi[x] - aux[x])).collect()
        })
        .collect();
    Matrix::from_fn(n, n, |x, y| cols[y][x])
}

/// `h_L(x, y) = -aux_x(y)`, the solution of `L g = phi_x - pi[phi_x]`
/// anchored at `x`, evaluated at `y`.
pub fn h_matrix(l: &Generator, pi: &ProbabilityVector) -> Result<Matrix> {
    Ok(h_matrix_with(&PoissonSolver::new(l, pi)?))
}

pub(crate) fn h_matrix_with(s: &PoissonSolver<'_>) -> Matrix {
    let n = s.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let phi = s.phi(x);
            s.phi_aux(&phi, x).into_iter().map(|v| -v).collect()
        })
        .collect();
    Matrix::from_fn(n, n, |x, y| rows[x][y])
}

/// `h_L` from its moment definition `1/2 E_y[tau_x^2] - pi[phi_x] phi_x(y)`,
/// with second moments from the first-step system `u = 2 phi_x` off `x`.
pub fn h_matrix_from_moments(l: &Generator, pi: &ProbabilityVector) -> Result<Matrix> {
    let s = PoissonSolver::new(l, pi)?;
    let n = s.n();
    let mut h = Matrix::zeros(n, n);
    for x in 0..n {
        let phi = s.phi(x);
        let rhs: Vec<f64> = phi.iter().map(|v| -2.0 * v).collect();
        let m2 = s.solve_unchecked(&rhs, x);
        let c = pi.mean(&phi);
        for y in 0..n {
            h[(x, y)] = 0.5 * m2[y] - c * phi[y];
        }
    }
    Ok(h)
}

/// Both sides of `sum pi pi h_L = sum 1/lambda^2`.
pub fn spectral_second_identity(l: &Generator, pi: &ProbabilityVector) -> Result<(f64, f64)> {
    let lhs = pi_average(pi, &h_matrix(l, pi)?);
    let rhs = spectrum(l)?.inverse_power_sum(2)?;
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeIdentities {
    pub lhs3: f64,
    pub rhs3: f64,
    pub lhs4: f64,
    pub rhs4: f64,
    /// `pi(y) E_y[T_y] - 1 = 1/L(y) - 1`, the amount by which `lhs4`
    /// exceeds `rhs4` for a generator whose exit rate at `y` is not 1.
    pub holding_correction: f64,
}

pub fn return_time_identities(l: &Generator, pi: &ProbabilityVector, y: usize) -> Result<ReturnTimeIdentities> {
    let n = l.n();
    if y >= n {
        return Err(Error::VertexNotOnCycle(y));
    }
    let s = PoissonSolver::new(l, pi)?;
    let phi = s.phi(y);
    let w = pi.weights();
    let lhs3 = pi.mean(&phi);
    let ly = l.exit_rate(y);
    let ret = 1.0 / ly + (0..n).filter(|&z| z != y).map(|z| l.rate(y, z) / ly * phi[z]).sum::<f64>();
    let lhs4 = lhs3 + w[y] * ret;
    let rhs3 = eigentime_spectral(l)?;
    Ok(ReturnTimeIdentities { lhs3, rhs3, lhs4, rhs4: 1.0 + rhs3, holding_correction: w[y] * ret - 1.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub expectations: Vec<Vec<f64>>,
    pub second_moments: Vec<Vec<f64>>,
    pub kemeny: f64,
    pub f_value: f64,
    pub h_matrix: Vec<Vec<f64>>,
}

pub fn hitting_report(l: &Generator, pi: &ProbabilityVector) -> Result<HittingReport> {
    l.check_invariant(pi)?;
    let s = PoissonSolver::new(l, pi)?;
    let e = s.hitting_matrix();
    let kemeny = pi.mean(&e.row(0).iter().copied().collect::<Vec<_>>());
    Ok(HittingReport {
        f_value: pi_average(pi, &e),
        kemeny,
        expectations: matrix_to_rows(&e),
        second_moments: matrix_to_rows(&second_moments_with(&s)),
        h_matrix: matrix_to_rows(&h_matrix_with(&s)),
    })
}

/// Spread of `sum_y pi(y) E_x[tau_y]` over starting states `x`.
pub fn kemeny_spread(pi: &ProbabilityVector, e: &Matrix) -> f64 {
    let k: Vec<f64> = (0..e.nrows()).map(|x| pi.mean(&e.row(x).iter().copied().collect::<Vec<_>>())).collect();
    let max = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = k.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub samples: u64,
    pub mean: f64,
    pub second_moment: f64,
    pub std_error: f64,
    pub second_moment_std_error: f64,
}

const CHUNK: u64 = 1 << 14;
const STEP_LIMIT: u64 = 1 << 32;

/// Seed of chunk `k`, so results do not depend on the thread count.
pub(crate) fn chunk_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// Monte Carlo estimate of `E_x[tau_y]` and `E_x[tau_y^2]`.
pub fn simulate_hitting(l: &Generator, x: usize, y: usize, samples: u64, seed: u64) -> Result<SimulationRecord> {
    let n = l.n();
    if x >= n || y >= n {
        return Err(Error::InvalidInput(format!("vertices must be below {n}")));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be positive".into()));
    }
    if !l.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    if x == y {
        return Ok(SimulationRecord { samples, mean: 0.0, second_moment: 0.0, std_error: 0.0, second_moment_std_error: 0.0 });
    }

    // Cumulative jump distributions per state.
    let jumps: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let total = l.exit_rate(i);
            let mut acc = 0.0;
            (0..n)
                .filter(|&j| j != i && l.rate(i, j) > 0.0)
                .map(|j| {
                    acc += l.rate(i, j) / total;
                    (j, acc)
                })
                .collect()
        })
        .collect();

    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<Result<[f64; 4]>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(chunk_seed(seed, k));
            let count = CHUNK.min(samples - k * CHUNK);
            let mut acc = [0.0; 4];
            for _ in 0..count {
                let mut state = x;
                let mut t = 0.0;
                let mut steps = 0u64;
                while state != y {
                    t += exponential(&mut rng, l.exit_rate(state));
                    let u: f64 = rng.random();
                    let row = &jumps[state];
                    state = row.iter().find(|(_, c)| u < *c).unwrap_or(row.last().unwrap()).0;
                    steps += 1;
                    if steps > STEP_LIMIT {
                        return Err(Error::NotConverged(steps as usize));
                    }
                }
                let t2 = t * t;
                acc[0] += t;
                acc[1] += t2;
                acc[2] += t2 * t;
                acc[3] += t2 * t2;
            }
            Ok(acc)
        })
        .collect();

    let mut tot = [0.0; 4];
    for s in sums {
        let s = s?;
        for i in 0..4 {
            tot[i] += s[i];
        }
    }
    let m = samples as f64;
    let mean = tot[0] / m;
    let m2 = tot[1] / m;
    let m4 = tot[3] / m;
    let denom = if samples > 1 { m - 1.0 } else { 1.0 };
    let var1 = ((m2 - mean * mean) * m / denom).max(0.0);
    let var2 = ((m4 - m2 * m2) * m / denom).max(0.0);
    Ok(SimulationRecord {
        samples,
        mean,
        second_moment: m2,
        std_error: (var1 / m).sqrt(),
        second_moment_std_error: (var2 / m).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::cycle_generator;
    use crate::graph::{cyclic_distance, Cycle};

    fn uniform_cycle3() -> (Generator, ProbabilityVector) {
        let u = ProbabilityVector::uniform(3);
        (cycle_generator(&u, &Cycle::new(vec![0, 1, 2]).unwrap()).unwrap(), u)
    }

    fn srw3() -> Generator {
        Generator::new(Matrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.5, 0.5, -1.0, 0.5, 0.5, 0.5, -1.0])).unwrap()
    }

    #[test]
    fn poisson_examples() {
        let (l, u) = uniform_cycle3();
        assert!(poisson_solve(&l, &u, &[0.0; 3], 1).unwrap().iter().all(|v| *v == 0.0));
        let g = poisson_solve(&l, &u, &[-1.0, -1.0, 2.0], 2).unwrap();
        for (a, b) in g.iter().zip([2.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(matches!(poisson_solve(&l, &u, &[1.0, 0.0, 0.0], 0), Err(Error::NotCentered(_))));
    }

    #[test]
    fn hitting_times_on_cycle_are_distances() {
        let (l, u) = uniform_cycle3();
        let c = Cycle::new(vec![0, 1, 2]).unwrap();
        let e = expected_hitting_times(&l, &u).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert!((e[(x, y)] - cyclic_distance(&c, x, y).unwrap() as f64).abs() < 1e-13);
            }
        }
        let e = expected_hitting_times(&srw3(), &u).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let want = if x == y { 0.0 } else { 2.0 };
                assert!((e[(x, y)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn inverse_speed_examples() {
        let (l, u) = uniform_cycle3();
        assert!((inverse_speed(&l, &u).unwrap() - 1.0).abs() < 1e-14);
        assert!((inverse_speed(&srw3(), &u).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        let pi = ProbabilityVector::new(vec![0.5, 0.25, 0.25]).unwrap();
        let la = cycle_generator(&pi, &Cycle::new(vec![0, 1, 2]).unwrap()).unwrap();
        assert!((inverse_speed(&la, &pi).unwrap() - 15.0 / 16.0).abs() < 1e-14);
        assert!(matches!(inverse_speed(&la, &u), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn spectra() {
        let (l, _) = uniform_cycle3();
        let s = spectrum(&l).unwrap();
        let h = 3f64.sqrt() / 2.0;
        assert!((s.values()[0] - C64::new(1.5, -h)).norm() < 1e-12);
        assert!((s.values()[1] - C64::new(1.5, h)).norm() < 1e-12);
        assert!((eigentime_spectral(&l).unwrap() - 1.0).abs() < 1e-12);
        let s = spectrum(&srw3()).unwrap();
        assert!(s.values().iter().all(|z| (z - C64::new(1.5, 0.0)).norm() < 1e-12));
        assert!((eigentime_spectral(&srw3()).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        let s2 = spectrum(&srw3().scaled(3.0)).unwrap();
        assert!(s2.values().iter().all(|z| (z - C64::new(4.5, 0.0)).norm() < 1e-12));
        let json = serde_json::to_value(spectrum(&l).unwrap()).unwrap();
        let pairs: Vec<[f64; 2]> = serde_json::from_value(json).unwrap();
        assert!(pairs[0][1] < 0.0 && pairs[1][1] > 0.0 && (pairs[0][0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn near_reducible_spectrum_is_rejected() {
        let mut m = Matrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(1, 2)] = 1e-12;
        m[(2, 1)] = 1e-12;
        let l = Generator::from_off_diagonal(m).unwrap();
        assert!(matches!(spectrum(&l), Err(Error::SpectrumAmbiguous(_))));
    }

    #[test]
    fn second_moments_on_cycle() {
        let (l, u) = uniform_cycle3();
        let c = Cycle::new(vec![0, 1, 2]).unwrap();
        let m2 = second_moment_hitting(&l, &u).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let r = cyclic_distance(&c, x, y).unwrap() as f64;
                assert!((m2[(x, y)] - (r * r + r)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn second_moments_of_random_walk() {
        let m2 = second_moment_hitting(&srw3(), &ProbabilityVector::uniform(3)).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let want = if x == y { 0.0 } else { 8.0 };
                assert!((m2[(x, y)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_on_uniform_cycles() {
        for n in 3..=6 {
            let u = ProbabilityVector::uniform(n);
            let c = Cycle::new((0..n).collect()).unwrap();
            let l = cycle_generator(&u, &c).unwrap();
            let h = h_matrix(&l, &u).unwrap();
            let h2 = h_matrix_from_moments(&l, &u).unwrap();
            for x in 0..n {
                for y in 0..n {
                    let r = cyclic_distance(&c, y, x).unwrap() as f64;
                    let want = 0.5 * (r * r - (n as f64 - 2.0) * r);
                    assert!((h[(x, y)] - want).abs() < 1e-11, "n={n} x={x} y={y}");
                    assert!((h2[(x, y)] - want).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn second_spectral_identity() {
        let (l, u) = uniform_cycle3();
        let (a, b) = spectral_second_identity(&l, &u).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - 1.0 / 3.0).abs() < 1e-12);
        let (a, b) = spectral_second_identity(&srw3(), &u).unwrap();
        assert!((a - 8.0 / 9.0).abs() < 1e-12 && (b - 8.0 / 9.0).abs() < 1e-12);
        let (a2, b2) = spectral_second_identity(&srw3().scaled(2.0), &u).unwrap();
        assert!((a2 - a / 4.0).abs() < 1e-12 && (b2 - b / 4.0).abs() < 1e-12);
    }

    #[test]
    fn return_times_on_cycle() {
        let (l, u) = uniform_cycle3();
        for y in 0..3 {
            let r = return_time_identities(&l, &u, y).unwrap();
            assert!((r.lhs3 - 1.0).abs() < 1e-12 && (r.rhs3 - 1.0).abs() < 1e-12);
            assert!((r.lhs4 - 2.0).abs() < 1e-12 && (r.rhs4 - 2.0).abs() < 1e-12);
            assert!(r.holding_correction.abs() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let (l, _) = uniform_cycle3();
        assert_eq!(simulate_hitting(&l, 1, 1, 10, 3).unwrap().mean, 0.0);
        let a = simulate_hitting(&l, 0, 2, 50_000, 7).unwrap();
        let b = simulate_hitting(&l, 0, 2, 50_000, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - 2.0).abs() < 4.0 * a.std_error);
        assert!((a.second_moment - 6.0).abs() < 4.0 * a.second_moment_std_error);
    }
}
