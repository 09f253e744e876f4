//! First and second directional derivatives of `F` on the set of normalized
//! generators with a fixed invariant measure.
//!
//! Along the segment `t -> (1 - t) L + t L~` the derivative at `t = 0` is
//! `F(L) - H_{L~}(L)`, where `H_{L~}(L) = sum_y pi(y) pi[psi_y]` and `psi_y`
//! solves `L psi = L~ phi_y` with `psi_y(y) = 0`. The second derivative
//! along the segment toward `L_A` is `2F - 4H_A + 2H_{A,A}`; the mixed
//! derivative for two directions is the symmetrization
//! `2F - 2H_A - 2H_{A'} + H_{A',A} + H_{A,A'}`, where `H_{X,Y}` averages
//! the solution `Psi_y` of `L Psi = L_X psi_y^Y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigentime::{pi_average, PoissonSolver};
use crate::error::{Error, Result};
use crate::generator::{combine, cycle_generator, CycleDecomposition, Generator, ProbabilityVector};
use crate::graph::Cycle;
use crate::linalg::{mat_vec, Matrix};

const CLOSED_FORM_TOL: f64 = 1e-8;

/// A direction in the set of normalized `pi`-invariant generators.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    Cycle(Cycle),
    Matrix(Generator),
    Decomposition(CycleDecomposition),
}

impl Direction {
    fn to_generator(&self, pi: &ProbabilityVector) -> Result<Generator> {
        let g = match self {
            Direction::Cycle(c) => {
                if c.max_vertex() >= pi.len() {
                    return Err(Error::DirectionInvalid);
                }
                cycle_generator(pi, c)?
            }
            Direction::Matrix(m) => m.clone(),
            Direction::Decomposition(d) => {
                if d.terms().iter().any(|t| t.cycle.max_vertex() >= pi.len()) {
                    return Err(Error::DirectionInvalid);
                }
                combine(d, pi)?
            }
        };
        if g.n() != pi.len() || g.check_normalized_invariant(pi).is_err() {
            return Err(Error::DirectionInvalid);
        }
        Ok(g)
    }
}

/// Poisson data shared by all derivative computations at a fixed `L`.
pub struct DerivativeContext<'a> {
    solver: PoissonSolver<'a>,
    /// `phi[y][x] = E_x[tau_y]`.
    phi: Vec<Vec<f64>>,
    f_value: f64,
}

impl<'a> DerivativeContext<'a> {
    pub fn new(l: &'a Generator, pi: &'a ProbabilityVector) -> Result<Self> {
        l.check_invariant(pi)?;
        let solver = PoissonSolver::new(l, pi)?;
        let n = l.n();
        let phi: Vec<Vec<f64>> = (0..n).into_par_iter().map(|y| solver.phi(y)).collect();
        let f_value = (0..n).map(|y| pi.weights()[y] * pi.mean(&phi[y])).sum();
        Ok(DerivativeContext { solver, phi, f_value })
    }

    pub fn f_value(&self) -> f64 {
        self.f_value
    }

    pub fn phi(&self, y: usize) -> &[f64] {
        &self.phi[y]
    }

    pub fn m_bound(&self) -> f64 {
        self.phi.iter().flatten().copied().fold(0.0, f64::max)
    }

    fn pi(&self) -> &ProbabilityVector {
        self.solver.pi()
    }

    fn n(&self) -> usize {
        self.solver.n()
    }

    /// Solves `L g = M v` anchored at `y`. `M` must leave `pi` invariant so
    /// that the right-hand side is centered.
    fn solve_image(&self, m: &Matrix, v: &[f64], y: usize) -> Vec<f64> {
        self.solver.solve_unchecked(&mat_vec(m, v), y)
    }

    /// `psi_y` for the direction `m`.
    pub fn psi(&self, m: &Matrix, y: usize) -> Vec<f64> {
        self.solve_image(m, &self.phi[y], y)
    }

    /// `sum_y pi(y) pi[psi_y]`.
    pub fn h_direction(&self, m: &Matrix) -> f64 {
        let w = self.pi().weights();
        (0..self.n()).map(|y| w[y] * self.pi().mean(&self.psi(m, y))).sum()
    }

    /// `sum_y pi(y) pi[Psi_y]` with `L Psi_y = X psi_y^Y`.
    pub fn h_pair(&self, x: &Matrix, y_dir: &Matrix) -> f64 {
        let w = self.pi().weights();
        (0..self.n())
            .into_par_iter()
            .map(|y| {
                let psi = self.psi(y_dir, y);
                let big = self.solve_image(x, &psi, y);
                w[y] * self.pi().mean(&big)
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// Closed form of `psi_y` along a cycle:
    /// `(1/n) sum_l (phi_y(a_{l+1}) - phi_y(a_l)) (phi_{a_l}(x) - phi_{a_l}(y))`.
    pub fn psi_closed_form(&self, a: &Cycle, y: usize) -> Vec<f64> {
        let n = a.len() as f64;
        let mut out = vec![0.0; self.n()];
        for (al, an) in a.arcs() {
            let c = self.phi[y][an] - self.phi[y][al];
            let pa = &self.phi[al];
            for (x, o) in out.iter_mut().enumerate() {
                *o += c * (pa[x] - pa[y]) / n;
            }
        }
        out
    }

    /// Closed form of `Psi_y` for the pair `(A', A)`.
    pub fn big_psi_closed_form(&self, a2: &Cycle, a: &Cycle, y: usize) -> Vec<f64> {
        let scale = (a.len() * a2.len()) as f64;
        let mut out = vec![0.0; self.n()];
        for (al, an) in a.arcs() {
            let c = self.phi[y][an] - self.phi[y][al];
            for (bk, bn) in a2.arcs() {
                let d = self.phi[al][bn] - self.phi[al][bk];
                let pb = &self.phi[bk];
                for (x, o) in out.iter_mut().enumerate() {
                    *o += c * d * (pb[x] - pb[y]) / scale;
                }
            }
        }
        out
    }

    /// `H_{A',A}` expressed through `h_L` and hitting times.
    pub fn h_pair_closed_form(&self, h: &Matrix, a2: &Cycle, a: &Cycle) -> f64 {
        let scale = (a.len() * a2.len()) as f64;
        let mut s = 0.0;
        for (al, an) in a.arcs() {
            for (bk, bn) in a2.arcs() {
                s += (h[(bk, an)] - h[(bk, al)]) * (self.phi[al][bn] - self.phi[al][bk]);
            }
        }
        s / scale
    }

    pub fn h_matrix(&self) -> Matrix {
        let n = self.n();
        let rows: Vec<Vec<f64>> =
            (0..n).into_par_iter().map(|x| self.solver.phi_aux(&self.phi[x], x).into_iter().map(|v| -v).collect()).collect();
        Matrix::from_fn(n, n, |x, y| rows[x][y])
    }

    fn cycle_matrix(&self, a: &Cycle) -> Result<Matrix> {
        if a.max_vertex() >= self.n() {
            return Err(Error::VertexNotOnCycle(a.max_vertex()));
        }
        Ok(cycle_generator(self.pi(), a)?.matrix().clone())
    }

    /// `psi_y` for a cycle direction, checked against its closed form.
    pub fn psi_cycle(&self, a: &Cycle, y: usize) -> Result<Vec<f64>> {
        let la = self.cycle_matrix(a)?;
        let solved = self.psi(&la, y);
        let closed = self.psi_closed_form(a, y);
        check_close("psi closed form", &solved, &closed)?;
        Ok(solved)
    }

    /// `H_A(L) = (1/n) sum_l h_L(a_l, a_{l+1})`.
    pub fn h_cycle(&self, h: &Matrix, a: &Cycle) -> f64 {
        a.arcs().map(|(x, y)| h[(x, y)]).sum::<f64>() / a.len() as f64
    }

    /// `H_{A',A}` by nested solves, checked against both closed forms.
    pub fn h_pair_cycles(&self, h: &Matrix, a2: &Cycle, a: &Cycle) -> Result<f64> {
        let la = self.cycle_matrix(a)?;
        let la2 = self.cycle_matrix(a2)?;
        let w = self.pi().weights();
        let mut total = 0.0;
        for y in 0..self.n() {
            let psi = self.psi(&la, y);
            let big = self.solve_image(&la2, &psi, y);
            check_close("Psi closed form", &big, &self.big_psi_closed_form(a2, a, y))?;
            total += w[y] * self.pi().mean(&big);
        }
        let closed = self.h_pair_closed_form(h, a2, a);
        let scale = total.abs().max(closed.abs()).max(1.0);
        if (total - closed).abs() > CLOSED_FORM_TOL * scale {
            return Err(Error::Consistency { what: "H_{A',A} closed form", residual: (total - closed).abs() });
        }
        Ok(total)
    }
}

fn check_close(what: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    let scale = a.iter().chain(b).fold(1.0_f64, |m, v| m.max(v.abs()));
    let r = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if r > CLOSED_FORM_TOL * scale {
        return Err(Error::Consistency { what, residual: r });
    }
    Ok(())
}

/// `psi_y` for the cycle direction `A`, from the Poisson solve; verified
/// against the closed form.
pub fn psi_solve(l: &Generator, pi: &ProbabilityVector, a: &Cycle, y: usize) -> Result<Vec<f64>> {
    if y >= l.n() {
        return Err(Error::VertexNotOnCycle(y));
    }
    DerivativeContext::new(l, pi)?.psi_cycle(a, y)
}

pub fn h_cycle(l: &Generator, pi: &ProbabilityVector, a: &Cycle) -> Result<f64> {
    if a.max_vertex() >= l.n() {
        return Err(Error::VertexNotOnCycle(a.max_vertex()));
    }
    let ctx = DerivativeContext::new(l, pi)?;
    Ok(ctx.h_cycle(&ctx.h_matrix(), a))
}

/// `H_{L~}(L) = sum_{x != y} pi(x) L~(x,y) h_L(x,y)`.
pub fn h_general(h: &Matrix, pi: &ProbabilityVector, dir: &Generator) -> f64 {
    let n = dir.n();
    let w = pi.weights();
    let mut s = 0.0;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                s += w[x] * dir.rate(x, y) * h[(x, y)];
            }
        }
    }
    s
}

/// `D_{L~} F(L) = F(L) - H_{L~}(L)`.
pub fn directional_derivative(l: &Generator, pi: &ProbabilityVector, direction: &Direction) -> Result<f64> {
    let dir = direction.to_generator(pi)?;
    let ctx = DerivativeContext::new(l, pi)?;
    let h = ctx.h_matrix();
    let hv = match direction {
        Direction::Cycle(a) => ctx.h_cycle(&h, a),
        _ => h_general(&h, pi, &dir),
    };
    Ok(ctx.f_value() - hv)
}

/// Mixed second derivative of `F` in the directions `L_A` and `L_{A'}`.
pub fn second_directional(l: &Generator, pi: &ProbabilityVector, a: &Cycle, a2: &Cycle) -> Result<f64> {
    let ctx = DerivativeContext::new(l, pi)?;
    second_with(&ctx, &ctx.h_matrix(), a, a2)
}

fn second_with(ctx: &DerivativeContext<'_>, h: &Matrix, a: &Cycle, a2: &Cycle) -> Result<f64> {
    let ha = ctx.h_cycle(h, a);
    let ha2 = ctx.h_cycle(h, a2);
    let h21 = ctx.h_pair_cycles(h, a2, a)?;
    let h12 = if a == a2 { h21 } else { ctx.h_pair_cycles(h, a, a2)? };
    Ok(2.0 * ctx.f_value() - 2.0 * ha - 2.0 * ha2 + h21 + h12)
}

/// Mixed second derivative for two general directions.
pub fn second_directional_general(l: &Generator, pi: &ProbabilityVector, u: &Direction, v: &Direction) -> Result<f64> {
    let gu = u.to_generator(pi)?;
    let gv = v.to_generator(pi)?;
    let ctx = DerivativeContext::new(l, pi)?;
    let (mu, mv) = (gu.matrix(), gv.matrix());
    Ok(2.0 * ctx.f_value() - 2.0 * ctx.h_direction(mu) - 2.0 * ctx.h_direction(mv) + ctx.h_pair(mu, mv) + ctx.h_pair(mv, mu))
}

/// `M(L) = max_{x,y} E_x[tau_y]`.
pub fn m_bound(l: &Generator, pi: &ProbabilityVector) -> Result<f64> {
    let s = PoissonSolver::new(l, pi)?;
    Ok(s.hitting_matrix().iter().copied().fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub f_value: f64,
    pub h_cycle: f64,
    pub first: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<f64>,
    pub m_bound: f64,
}

pub fn derivative_report(l: &Generator, pi: &ProbabilityVector, a: &Cycle, a2: Option<&Cycle>) -> Result<DerivativeReport> {
    let ctx = DerivativeContext::new(l, pi)?;
    if a.max_vertex() >= l.n() {
        return Err(Error::VertexNotOnCycle(a.max_vertex()));
    }
    let h = ctx.h_matrix();
    let hc = ctx.h_cycle(&h, a);
    let second = a2.map(|b| second_with(&ctx, &h, a, b)).transpose()?;
    Ok(DerivativeReport { f_value: ctx.f_value(), h_cycle: hc, first: ctx.f_value() - hc, second, m_bound: ctx.m_bound() })
}

/// `(1 - t) L + t L~`.
pub fn segment_point(l: &Generator, dir: &Generator, t: f64) -> Result<Generator> {
    Generator::new(l.matrix() * (1.0 - t) + dir.matrix() * t)
}

/// `F` at a point given by its full matrix, bypassing validation of the
/// invariant measure.
pub fn f_of(l: &Generator, pi: &ProbabilityVector) -> Result<f64> {
    Ok(pi_average(pi, &PoissonSolver::new(l, pi)?.hitting_matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyc(v: &[usize]) -> Cycle {
        Cycle::new(v.to_vec()).unwrap()
    }

    #[test]
    fn psi_anchoring_and_h_identity() {
        let u = ProbabilityVector::uniform(3);
        let a = cyc(&[0, 1, 2]);
        let l = cycle_generator(&u, &a).unwrap();
        for y in 0..3 {
            assert_eq!(psi_solve(&l, &u, &a, y).unwrap()[y], 0.0);
        }
        let ctx = DerivativeContext::new(&l, &u).unwrap();
        let la = cycle_generator(&u, &a).unwrap();
        assert!((ctx.h_direction(la.matrix()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h_cycle_examples() {
        let u = ProbabilityVector::uniform(3);
        let l = cycle_generator(&u, &cyc(&[0, 1, 2])).unwrap();
        assert!((h_cycle(&l, &u, &cyc(&[0, 1, 2])).unwrap() - 1.0).abs() < 1e-12);
        assert!((h_cycle(&l, &u, &cyc(&[0, 1])).unwrap() - 0.5).abs() < 1e-12);
        for n in 3..=6 {
            let u = ProbabilityVector::uniform(n);
            let a = Cycle::new((0..n).collect()).unwrap();
            let l = cycle_generator(&u, &a).unwrap();
            assert!((h_cycle(&l, &u, &a).unwrap() - (n as f64 - 1.0) / 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn first_derivative_examples() {
        let u = ProbabilityVector::uniform(3);
        let a = cyc(&[0, 1, 2]);
        let l = cycle_generator(&u, &a).unwrap();
        assert!(directional_derivative(&l, &u, &Direction::Cycle(a)).unwrap().abs() < 1e-12);
        let d = directional_derivative(&l, &u, &Direction::Cycle(cyc(&[0, 1]))).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let m = Direction::Matrix(cycle_generator(&u, &cyc(&[0, 1])).unwrap());
        assert!((directional_derivative(&l, &u, &m).unwrap() - 0.5).abs() < 1e-12);
        let bad = Direction::Matrix(l.scaled(2.0));
        assert_eq!(directional_derivative(&l, &u, &bad).unwrap_err(), Error::DirectionInvalid);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let pi = ProbabilityVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let d = CycleDecomposition::new(vec![(cyc(&[0, 1, 2]), 0.3), (cyc(&[0, 2, 1]), 0.2), (cyc(&[0, 1]), 0.5)]).unwrap();
        let l = combine(&d, &pi).unwrap();
        let a = cyc(&[1, 2]);
        let la = cycle_generator(&pi, &a).unwrap();
        let s = 1e-3;
        let f = |t: f64| f_of(&segment_point(&l, &la, t).unwrap(), &pi).unwrap();
        let fd = (f(s) - 2.0 * f(0.0) + f(-s)) / (s * s);
        let exact = second_directional(&l, &pi, &a, &a).unwrap();
        assert!((fd - exact).abs() <= 1e-3 * exact.abs().max(1.0), "fd {fd} exact {exact}");
    }

    #[test]
    fn m_bound_examples() {
        let u = ProbabilityVector::uniform(3);
        let l = cycle_generator(&u, &cyc(&[0, 1, 2])).unwrap();
        assert!((m_bound(&l, &u).unwrap() - 2.0).abs() < 1e-12);
        assert!((m_bound(&l.scaled(4.0), &u).unwrap() - 0.5).abs() < 1e-12);
    }
}
