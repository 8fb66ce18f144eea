//! Discrete operators of the projected equation
//! `-psi'' + alpha~^2 psi + (U''/U) psi + P psi = eps phi + (U''/U - U''/(U-c)) phi`
//! with `phi = phi~ + psi`, and its solution by a direct solve or by the
//! Neumann series `psi = sum_k (T^{-1} R)^k phi~`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretization::tridiag::{helmholtz_solve, ComplexTridiagonal, TridiagonalOperator, TridiagonalPlusRankOne};
use crate::discretization::{inner_product, norm, to_complex, Grid, NormKind};
use crate::error::{Error, Result};
use crate::neutral_modes::{potential, NeutralMode, Normalization};
use crate::profiles::{eval_profile, ShearProfile};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Direct,
    Neumann { max_terms: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedCertificate {
    pub method: Method,
    pub terms: usize,
    /// H1 norms of the Neumann terms.
    pub term_norms: Vec<f64>,
    /// Largest ratio of successive term norms after the first.
    pub contraction_ratio: f64,
}

/// Regularization weight for the rank-one solver: of the size of the
/// mass-matrix scale so that the auxiliary tridiagonal stays well posed.
fn regularization(grid: &Grid) -> f64 {
    1.0 / grid.h
}

#[derive(Debug, Clone)]
pub struct RayleighOperators {
    pub grid: Grid,
    pub mode: NeutralMode,
    pub profile: ShearProfile,
    /// `U''/U` at the nodes (cell averages of the continuous extension).
    pub potential: Vec<f64>,
    /// `U` at the nodes.
    pub velocity: Vec<f64>,
    /// `-D^2 + alpha~^2`; `K` is its inverse.
    pub k_inverse: TridiagonalOperator,
    /// `L = -D^2 + alpha~^2 + U''/U`.
    pub l_op: TridiagonalOperator,
    /// `P f = w (f, phi~) phi~`; the zero set of `G` does not depend on `w`.
    pub projection_weight: f64,
    phi_c: Vec<Complex64>,
    phi_weighted: Vec<Complex64>,
    l_plus_p: TridiagonalPlusRankOne,
}

impl RayleighOperators {
    pub fn new(profile: &ShearProfile, mode: &NeutralMode) -> Result<Self> {
        Self::with_projection_weight(profile, mode, 1.0)
    }

    /// [`RayleighOperators::new`] with `P` scaled by `weight`. A weight of
    /// the size of `alpha~^2` keeps `L + P - eps` away from singular when
    /// `eps` is not small compared with 1, e.g. for rescaled profiles.
    pub fn with_projection_weight(profile: &ShearProfile, mode: &NeutralMode, weight: f64) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(Error::InvalidRange(format!("projection weight must be positive, got {weight}")));
        }
        if mode.normalization != Normalization::L2Unit {
            return Err(Error::InvalidRange("the projection needs an L2-normalized neutral mode".into()));
        }
        let grid = mode.grid.clone();
        let v = potential(profile, &grid)?;
        let velocity: Vec<f64> = grid.nodes.iter().map(|&y| eval_profile(profile, y, 0)).collect::<Result<_>>()?;
        let k_inverse = TridiagonalOperator::shifted_laplacian(&grid, mode.alpha_sq);
        let l_op = TridiagonalOperator::helmholtz(&grid, &v.iter().map(|q| q + mode.alpha_sq).collect::<Vec<_>>())?;
        let phi_c = to_complex(&mode.phi);
        let phi_weighted: Vec<Complex64> = phi_c.iter().map(|p| p * (grid.h * weight)).collect();
        let l_plus_p = TridiagonalPlusRankOne::new(&l_op.to_complex(), phi_c.clone(), phi_weighted.clone(), regularization(&grid))
            .map_err(|_| Error::SingularT)?;
        Ok(Self {
            grid,
            mode: mode.clone(),
            profile: profile.clone(),
            potential: v,
            velocity,
            k_inverse,
            l_op,
            projection_weight: weight,
            phi_c,
            phi_weighted,
            l_plus_p,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn phi(&self) -> &[Complex64] {
        &self.phi_c
    }

    fn check(&self, f: &[Complex64]) -> Result<()> {
        self.grid.check_len(f.len())
    }

    pub fn apply_k(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(f)?;
        helmholtz_solve(&self.k_inverse, f)
    }

    /// `P f = w (f, phi~) phi~`.
    pub fn apply_p(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(f)?;
        let s = inner_product(f, &self.phi_c, &self.grid, NormKind::L2)? * self.projection_weight;
        Ok(self.phi_c.iter().map(|p| p * s).collect())
    }

    /// `U''/U - U''/(U - c) = -c (U''/U) / (U - c)` at the nodes.
    pub fn coefficient_difference(&self, c: Complex64) -> Result<Vec<Complex64>> {
        if c == ZERO {
            return Ok(vec![ZERO; self.n()]);
        }
        self.velocity
            .iter()
            .zip(&self.potential)
            .zip(&self.grid.nodes)
            .map(|((u, v), y)| {
                let d = Complex64::new(*u, 0.0) - c;
                if d == ZERO {
                    Err(Error::DivergentCoefficient { y: *y })
                } else {
                    Ok(-c * v / d)
                }
            })
            .collect()
    }

    /// `R_{eps,c} f = K((eps + U''/U - U''/(U - c)) f)`.
    pub fn apply_r(&self, eps: f64, c: Complex64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(f)?;
        let d = self.coefficient_difference(c)?;
        let g: Vec<Complex64> = f.iter().zip(&d).map(|(f, d)| f * (d + eps)).collect();
        self.apply_k(&g)
    }

    /// `T f = f + K((U''/U) f + P f)`.
    pub fn apply_t(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let p = self.apply_p(f)?;
        let g: Vec<Complex64> = f.iter().zip(&self.potential).zip(&p).map(|((f, v), p)| f * v + p).collect();
        let kg = self.apply_k(&g)?;
        Ok(f.iter().zip(&kg).map(|(a, b)| a + b).collect())
    }

    /// `T^{-1} b = (L + P)^{-1} K^{-1} b`.
    pub fn solve_t(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(b)?;
        Ok(self.l_plus_p.solve(&self.k_inverse.apply(b)))
    }

    /// `(L + P)^{-1} f`, i.e. `T^{-1} K f`.
    pub fn solve_l_plus_p(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(f)?;
        Ok(self.l_plus_p.solve(f))
    }

    /// Tridiagonal part of `L - eps - (U''/U - U''/(U-c))`.
    fn projected_tridiagonal(&self, eps: f64, d: &[Complex64]) -> ComplexTridiagonal {
        let mut t = self.l_op.to_complex();
        for (diag, d) in t.diagonal.iter_mut().zip(d) {
            *diag -= d + eps;
        }
        t
    }

    /// Solves the projected equation for `psi`.
    pub fn solve_projected(&self, eps: f64, c: Complex64, method: Method) -> Result<(Vec<Complex64>, ProjectedCertificate)> {
        let d = self.coefficient_difference(c)?;
        let forcing: Vec<Complex64> = self.phi_c.iter().zip(&d).map(|(p, d)| p * (d + eps)).collect();
        match method {
            Method::Direct => {
                let solver = TridiagonalPlusRankOne::new(
                    &self.projected_tridiagonal(eps, &d),
                    self.phi_c.clone(),
                    self.phi_weighted.clone(),
                    regularization(&self.grid),
                )?;
                let psi = solver.solve(&forcing);
                Ok((psi, ProjectedCertificate { method, terms: 0, term_norms: vec![], contraction_ratio: 0.0 }))
            }
            Method::Neumann { max_terms } => {
                let mut term = self.l_plus_p.solve(&forcing);
                let mut psi = term.clone();
                let mut norms = vec![norm(&term, &self.grid, NormKind::H1)?];
                let mut ratio = 0.0f64;
                while norms.last().copied().unwrap_or(0.0) >= 1e-12 && norms.len() < max_terms.max(1) {
                    let g: Vec<Complex64> = term.iter().zip(&d).map(|(t, d)| t * (d + eps)).collect();
                    term = self.l_plus_p.solve(&g);
                    let nk = norm(&term, &self.grid, NormKind::H1)?;
                    let prev = *norms.last().unwrap();
                    let r = nk / prev;
                    ratio = ratio.max(r);
                    norms.push(nk);
                    if norms.len() >= 4 && r >= 1.0 {
                        return Err(Error::NeumannDiverging { ratio: r });
                    }
                    if !nk.is_finite() {
                        return Err(Error::NeumannDiverging { ratio: f64::INFINITY });
                    }
                    psi.iter_mut().zip(&term).for_each(|(p, t)| *p += t);
                }
                let last = *norms.last().unwrap();
                if last >= 1e-12 {
                    return Err(if ratio >= 1.0 {
                        Error::NeumannDiverging { ratio }
                    } else {
                        Error::NotConverged { iterations: norms.len(), residual: last }
                    });
                }
                Ok((psi, ProjectedCertificate { method, terms: norms.len(), term_norms: norms, contraction_ratio: ratio }))
            }
        }
    }

    /// Discrete L2 norm of `(L + P) psi - (eps + U''/U - U''/(U-c))(phi~ + psi)`.
    pub fn projected_residual(&self, eps: f64, c: Complex64, psi: &[Complex64]) -> Result<f64> {
        self.check(psi)?;
        let d = self.coefficient_difference(c)?;
        let lpsi = self.l_op.apply(psi);
        let p = self.apply_p(psi)?;
        let r: Vec<Complex64> = (0..self.n())
            .map(|i| lpsi[i] + p[i] - (self.phi_c[i] + psi[i]) * (d[i] + eps))
            .collect();
        norm(&r, &self.grid, NormKind::L2)
    }

    /// `M^{-1} f` for the H1 Gram matrix `M = h (I - D^2)`.
    fn h1_gram_inverse(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let m = TridiagonalOperator::shifted_laplacian(&self.grid, 1.0);
        Ok(helmholtz_solve(&m, f)?.into_iter().map(|z| z / self.grid.h).collect())
    }

    fn h1_gram(&self, f: &[Complex64]) -> Vec<Complex64> {
        let m = TridiagonalOperator::shifted_laplacian(&self.grid, 1.0);
        m.apply(f).into_iter().map(|z| z * self.grid.h).collect()
    }

    /// `||A||_{H1 -> H1}` by power iteration on `A* A` with the H1 adjoint
    /// `A* = M^{-1} A^H M`.
    fn h1_operator_norm<F, G>(&self, apply: F, apply_adjoint_euclid: G, iterations: usize) -> Result<f64>
    where
        F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
        G: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    {
        let n = self.n();
        let mut x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) / n as f64;
                Complex64::new((7.0 * t).sin() + 0.3 * (31.0 * t).cos() + 1.0, 0.0)
            })
            .collect();
        let mut estimate = 0.0;
        for it in 0..iterations {
            let nx = norm(&x, &self.grid, NormKind::H1)?;
            x.iter_mut().for_each(|v| *v /= nx);
            let ax = apply(&x)?;
            let next_estimate = norm(&ax, &self.grid, NormKind::H1)?;
            let z = self.h1_gram_inverse(&apply_adjoint_euclid(&self.h1_gram(&ax))?)?;
            x = z;
            if it > 3 && (next_estimate - estimate).abs() <= 1e-6 * next_estimate {
                return Ok(next_estimate);
            }
            estimate = next_estimate;
        }
        Ok(estimate)
    }

    /// `||R_{eps,c}||_{H1 -> H1}`.
    pub fn r_norm_probe(&self, eps: f64, c: Complex64) -> Result<f64> {
        let d = self.coefficient_difference(c)?;
        let apply = |f: &[Complex64]| self.apply_r(eps, c, f);
        let adjoint = |f: &[Complex64]| -> Result<Vec<Complex64>> {
            let kf = self.apply_k(f)?;
            Ok(kf.iter().zip(&d).map(|(v, d)| v * (d + eps).conj()).collect())
        };
        self.h1_operator_norm(apply, adjoint, 200)
    }

    /// `1 / ||T^{-1}||_{H1 -> H1}`, a lower bound surrogate for the
    /// smallest singular value of `T`.
    pub fn t_inverse_floor(&self) -> Result<f64> {
        let apply = |f: &[Complex64]| self.solve_t(f);
        let adjoint = |f: &[Complex64]| -> Result<Vec<Complex64>> { Ok(self.k_inverse.apply(&self.l_plus_p_adjoint(f))) };
        Ok(1.0 / self.h1_operator_norm(apply, adjoint, 200)?)
    }

    /// `(L + P)^{-H} f`; `L + P` is real symmetric.
    fn l_plus_p_adjoint(&self, f: &[Complex64]) -> Vec<Complex64> {
        let conj: Vec<Complex64> = f.iter().map(|z| z.conj()).collect();
        self.l_plus_p.solve(&conj).into_iter().map(|z| z.conj()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neutral_modes::solve_neutral;
    use std::f64::consts::PI;

    fn ops(n: usize) -> RayleighOperators {
        let p = ShearProfile::sine(2.0).unwrap();
        let m = solve_neutral(&p, &Grid::channel(n).unwrap()).unwrap();
        RayleighOperators::new(&p, &m).unwrap()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn projection_examples() {
        let o = ops(1000);
        let phi = o.phi().to_vec();
        assert!(max_diff(&o.apply_p(&phi).unwrap(), &phi) < 1e-12);
        let mode2: Vec<Complex64> = o.grid.nodes.iter().map(|y| Complex64::new((PI * (y + 1.0)).sin(), 0.0)).collect();
        assert!(o.apply_p(&mode2).unwrap().iter().all(|z| z.norm() < 1e-6));
        assert!(o.apply_p(&phi[..3]).is_err());
    }

    #[test]
    fn r_examples() {
        let o = ops(2000);
        let phi = o.phi().to_vec();
        assert!(o.apply_r(0.0, ZERO, &phi).unwrap().iter().all(|z| z.norm() == 0.0));
        let r = o.apply_r(1e-2, ZERO, &phi).unwrap();
        let expect: Vec<Complex64> = phi.iter().map(|p| p * (1e-2 / 4.0)).collect();
        assert!(max_diff(&r, &expect) < 1e-6);
    }

    #[test]
    fn t_identities() {
        let o = ops(2000);
        let phi = o.phi().to_vec();
        let kphi = o.apply_k(&phi).unwrap();
        assert!(max_diff(&o.apply_t(&phi).unwrap(), &kphi) < 1e-8);
        assert!(max_diff(&o.solve_t(&kphi).unwrap(), &phi) < 1e-8);
        let b: Vec<Complex64> = o.grid.nodes.iter().map(|y| Complex64::new(y.exp(), y.cos())).collect();
        let back = o.apply_t(&o.solve_t(&b).unwrap()).unwrap();
        assert!(max_diff(&back, &b) < 1e-10 * max_diff(&b, &vec![ZERO; b.len()]));
        assert!(o.solve_t(&vec![ZERO; o.n()]).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn t_inverse_k_is_self_adjoint() {
        let o = ops(500);
        let f: Vec<Complex64> = o.grid.nodes.iter().map(|y| Complex64::new((3.0 * y).sin() + 0.2, 0.0)).collect();
        let g: Vec<Complex64> = o.grid.nodes.iter().map(|y| Complex64::new(y * y - 0.1 * y, 0.0)).collect();
        let tf = o.solve_t(&o.apply_k(&f).unwrap()).unwrap();
        let tg = o.solve_t(&o.apply_k(&g).unwrap()).unwrap();
        let lhs = inner_product(&tf, &g, &o.grid, NormKind::L2).unwrap();
        let rhs = inner_product(&f, &tg, &o.grid, NormKind::L2).unwrap();
        assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn projected_solution_at_zero_is_zero() {
        let o = ops(400);
        let (psi, _) = o.solve_projected(0.0, ZERO, Method::Direct).unwrap();
        assert!(psi.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn neumann_diverges_for_large_eps() {
        let o = ops(1000);
        // Measured onset of divergence lies between eps = 2.5 and 3.
        let c = Complex64::new(0.0, 3.0 / (2.0 * PI));
        assert!(matches!(
            o.solve_projected(3.0, c, Method::Neumann { max_terms: 200 }),
            Err(Error::NeumannDiverging { .. })
        ));
    }
}
