//! Dense linear algebra helpers.
//!
//! Linear solves go through a small LU factorization with partial pivoting.
//! Eigenvalues of nonsymmetric matrices come from nalgebra's real Schur form
//! after Parlett-Reinsch balancing.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type C64 = Complex<f64>;

/// LU factorization `P A = L U` with partial pivoting, stored in place.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= 1e-14 * scale {
                return Err(Error::SingularMatrix);
            }
            if piv != k {
                lu.swap_rows(piv, k);
                perm.swap(piv, k);
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// All eigenvalues of a real square matrix, with multiplicity.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m = a.clone();
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Greedy nearest-neighbour matching of two multisets of complex numbers.
/// Returns the worst matched distance, or `None` when sizes differ.
pub fn match_multisets(a: &[C64], b: &[C64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        used[j] = true;
        worst = worst.max(d);
    }
    Some(worst)
}

pub fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    let x = DVector::from_column_slice(v);
    (a * x).iter().copied().collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = Matrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let back = mat_vec(&a, &x);
        for (u, v) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert!((u - v).abs() < 1e-14);
        }
        let inv = lu.inverse();
        assert!(max_abs_diff(&(a * inv), &Matrix::identity(3, 3)) < 1e-14);
    }

    #[test]
    fn lu_detects_singular() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(Lu::factor(&a).unwrap_err(), Error::SingularMatrix);
    }

    #[test]
    fn eigenvalues_of_rotation_block() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn multiset_matching() {
        let a = [C64::new(1.0, 0.0), C64::new(2.0, 1.0)];
        let b = [C64::new(2.0, 1.0 + 1e-9), C64::new(1.0, 0.0)];
        assert!(match_multisets(&a, &b).unwrap() < 1e-8);
        assert!(match_multisets(&a, &b[..1]).is_none());
    }
}
