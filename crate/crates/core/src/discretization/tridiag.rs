use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Symmetric tridiagonal matrix; represents `-D^2 + q(y)` on a uniform grid
/// with second-order central differences and homogeneous Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub diagonal: Vec<f64>,
    /// Sub/super-diagonal, length `n - 1`.
    pub off_diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    /// `-D^2 + diag(potential)`.
    pub fn helmholtz(grid: &Grid, potential: &[f64]) -> Result<Self> {
        grid.check_len(potential.len())?;
        let inv_h2 = 1.0 / (grid.h * grid.h);
        Ok(Self {
            diagonal: potential.iter().map(|q| 2.0 * inv_h2 + q).collect(),
            off_diagonal: vec![-inv_h2; grid.n.saturating_sub(1)],
        })
    }

    /// `-D^2 + constant`.
    pub fn shifted_laplacian(grid: &Grid, shift: f64) -> Self {
        Self::helmholtz(grid, &vec![shift; grid.n]).expect("length matches grid")
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = x[i] * self.diagonal[i];
                if i > 0 {
                    v += x[i - 1] * self.off_diagonal[i - 1];
                }
                if i + 1 < n {
                    v += x[i + 1] * self.off_diagonal[i];
                }
                v
            })
            .collect()
    }

    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = x[i] * self.diagonal[i];
                if i > 0 {
                    v += x[i - 1] * self.off_diagonal[i - 1];
                }
                if i + 1 < n {
                    v += x[i + 1] * self.off_diagonal[i];
                }
                v
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence via the LDL^T
    /// pivots).
    pub fn sturm_count(&self, x: f64) -> usize {
        let n = self.len();
        let mut count = 0;
        let mut q = self.diagonal[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e = self.off_diagonal[i - 1];
            let q_safe = if q.abs() < f64::MIN_POSITIVE.sqrt() {
                f64::MIN_POSITIVE.sqrt().copysign(q)
            } else {
                q
            };
            q = (self.diagonal[i] - x) - e * e / q_safe;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off_diagonal[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off_diagonal[i].abs() } else { 0.0 };
            lo = lo.min(self.diagonal[i] - left - right);
            hi = hi.max(self.diagonal[i] + left + right);
        }
        (lo, hi)
    }

    pub fn inf_norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin_bounds();
        lo.abs().max(hi.abs())
    }

    /// Smallest eigenvalue by Sturm-sequence bisection.
    pub fn smallest_eigenvalue(&self) -> f64 {
        let (mut lo, mut hi) = self.gershgorin_bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        lo -= 1e-3 * scale;
        hi += 1e-3 * scale;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn to_complex(&self) -> ComplexTridiagonal {
        let off: Vec<Complex64> = self.off_diagonal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        ComplexTridiagonal {
            sub: off.clone(),
            diagonal: self.diagonal.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            sup: off,
        }
    }
}

/// Solves `op psi = f` for a symmetric positive definite tridiagonal `op` by
/// elimination without pivoting.
pub fn helmholtz_solve(op: &TridiagonalOperator, f: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = op.len();
    if f.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: f.len() });
    }
    let tiny = f64::EPSILON * op.inf_norm() * 1e-6;
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![ZERO; n];
    let mut denom = op.diagonal[0];
    if denom.abs() <= tiny {
        return Err(Error::SingularOperator { pivot: 0 });
    }
    if n > 1 {
        c_prime[0] = op.off_diagonal[0] / denom;
    }
    d_prime[0] = f[0] / denom;
    for i in 1..n {
        let e = op.off_diagonal[i - 1];
        denom = op.diagonal[i] - e * c_prime[i - 1];
        if denom.abs() <= tiny {
            return Err(Error::SingularOperator { pivot: i });
        }
        if i + 1 < n {
            c_prime[i] = op.off_diagonal[i] / denom;
        }
        d_prime[i] = (f[i] - d_prime[i - 1] * e) / denom;
    }
    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= next * c_prime[i];
    }
    Ok(x)
}

/// Real right-hand-side variant of [`helmholtz_solve`].
pub fn helmholtz_solve_real(op: &TridiagonalOperator, f: &[f64]) -> Result<Vec<f64>> {
    let fc: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(helmholtz_solve(op, &fc)?.into_iter().map(|z| z.re).collect())
}

/// General complex tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTridiagonal {
    pub sub: Vec<Complex64>,
    pub diagonal: Vec<Complex64>,
    pub sup: Vec<Complex64>,
}

impl ComplexTridiagonal {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diagonal[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    pub fn inf_norm(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                self.diagonal[i].norm()
                    + if i > 0 { self.sub[i - 1].norm() } else { 0.0 }
                    + if i + 1 < n { self.sup[i].norm() } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }

    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self)
    }
}

/// LU factorization with partial pivoting of a complex tridiagonal matrix
/// (the upper factor gains a second super-diagonal when rows are swapped).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    pub fn new(m: &ComplexTridiagonal) -> Result<Self> {
        let n = m.len();
        let mut dl = m.sub.clone();
        let mut d = m.diagonal.clone();
        let mut du = m.sup.clone();
        let mut du2 = vec![ZERO; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] == ZERO {
                    return Err(Error::SingularOperator { pivot: i });
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == ZERO {
            return Err(Error::SingularOperator { pivot: n - 1 });
        }
        Ok(Self { dl, d, du, du2, swapped })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.dl[i] * x[i];
            } else {
                let xi = x[i];
                x[i + 1] -= self.dl[i] * xi;
            }
        }
        if n == 0 {
            return;
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
    }
}

/// Solver for `(M + u v^T) x = b` with `M` tridiagonal and possibly singular
/// on its own (the projected operators have `M` with a near-null vector that
/// `u v^T` removes). The tridiagonal part is regularized at one index,
/// `M0 = M + tau e_m e_m^T`, and the resulting rank-two correction is folded
/// back in with a 2x2 capacitance system.
#[derive(Debug, Clone)]
pub struct TridiagonalPlusRankOne {
    lu: TridiagonalLu,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    pivot_index: usize,
    tau: Complex64,
    m0_inv_u: Vec<Complex64>,
    m0_inv_em: Vec<Complex64>,
    capacitance_inv: [[Complex64; 2]; 2],
}

impl TridiagonalPlusRankOne {
    /// `tau` should be of the size of a typical entry of `M` times the grid
    /// spacing so that `M0` stays well conditioned.
    pub fn new(m: &ComplexTridiagonal, u: Vec<Complex64>, v: Vec<Complex64>, tau: f64) -> Result<Self> {
        let n = m.len();
        if u.len() != n || v.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: u.len().min(v.len()) });
        }
        let pivot_index = (0..n)
            .max_by(|&i, &j| (u[i].norm() * v[i].norm()).total_cmp(&(u[j].norm() * v[j].norm())))
            .unwrap_or(0);
        let tau = Complex64::new(tau, 0.0);
        let mut m0 = m.clone();
        m0.diagonal[pivot_index] += tau;
        let lu = m0.factor()?;
        let m0_inv_u = lu.solve(&u);
        let mut em = vec![ZERO; n];
        em[pivot_index] = Complex64::new(1.0, 0.0);
        let m0_inv_em = lu.solve(&em);
        // S = I + V^T M0^{-1} U with U = [u, -tau e_m], V = [v, e_m].
        let s00 = Complex64::new(1.0, 0.0) + dot(&v, &m0_inv_u);
        let s01 = -tau * dot(&v, &m0_inv_em);
        let s10 = m0_inv_u[pivot_index];
        let s11 = Complex64::new(1.0, 0.0) - tau * m0_inv_em[pivot_index];
        let det = s00 * s11 - s01 * s10;
        if det.norm() < 1e-300 {
            return Err(Error::SingularT);
        }
        let capacitance_inv = [[s11 / det, -s01 / det], [-s10 / det, s00 / det]];
        Ok(Self { lu, u, v, pivot_index, tau, m0_inv_u, m0_inv_em, capacitance_inv })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut y = self.lu.solve(b);
        let w0 = dot(&self.v, &y);
        let w1 = y[self.pivot_index];
        let t0 = self.capacitance_inv[0][0] * w0 + self.capacitance_inv[0][1] * w1;
        let t1 = self.capacitance_inv[1][0] * w0 + self.capacitance_inv[1][1] * w1;
        let tau_t1 = self.tau * t1;
        for ((yi, zu), zm) in y.iter_mut().zip(&self.m0_inv_u).zip(&self.m0_inv_em) {
            *yi -= zu * t0 - zm * tau_t1;
        }
        y
    }

    pub fn rank_one_parts(&self) -> (&[Complex64], &[Complex64]) {
        (&self.u, &self.v)
    }
}

/// Bilinear (unconjugated) dot product.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
