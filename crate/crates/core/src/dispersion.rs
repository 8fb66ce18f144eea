//! The reduced equation `G(c, eps) = (psi, phi~) = 0`, its root `c(eps)`
//! with a winding-number certificate, and an independent eigenvalue oracle
//! from the generalized pencil `A phi = c B phi`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::tridiag::{ComplexTridiagonal, TridiagonalOperator};
use crate::discretization::{inner_product, norm, NormKind};
use crate::error::{Error, Result};
use crate::lyapunov_schmidt::{Method, RayleighOperators};
use crate::neutral_modes::NeutralMode;
use crate::singular_limits::{fit_slope, SpectralCoefficientLambda};

pub const DEFAULT_WINDING_SAMPLES: usize = 256;
const MAX_WINDING_SAMPLES: usize = 8192;
const SECANT_MAX_ITERATIONS: usize = 60;
const PENCIL_MAX_ITERATIONS: usize = 50;
const PENCIL_REFRESH: usize = 10;
const PENCIL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub eps: f64,
    pub c: Complex64,
    pub g_residual: f64,
    pub winding: i64,
    pub iterations: usize,
    pub pencil_c: Option<Complex64>,
    /// `alpha Im c` with `alpha^2 = alpha~^2 - eps`.
    pub growth_rate: f64,
    /// Smallest `|G|` on the certificate circle.
    pub min_g_on_circle: f64,
    pub certificate_radius: f64,
    /// Why the point failed, if it did; failed points keep NaN values.
    pub failure: Option<String>,
}

impl DispersionPoint {
    fn failed(eps: f64, reason: String) -> Self {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        Self {
            eps,
            c: nan,
            g_residual: f64::NAN,
            winding: 0,
            iterations: 0,
            pencil_c: None,
            growth_rate: f64::NAN,
            min_g_on_circle: f64::NAN,
            certificate_radius: f64::NAN,
            failure: Some(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn pencil_gap(&self) -> Option<f64> {
        self.pencil_c.map(|p| (p - self.c).norm())
    }
}

/// `G(c, eps) = (psi, phi~)` with `psi` from the direct projected solve.
pub fn eval_g(ops: &RayleighOperators, eps: f64, c: Complex64) -> Result<Complex64> {
    if !(c.im > 0.0) {
        return Err(Error::InvalidRange(format!("G needs Im c > 0, got {c}")));
    }
    eval_g_unchecked(ops, eps, c)
}

fn eval_g_unchecked(ops: &RayleighOperators, eps: f64, c: Complex64) -> Result<Complex64> {
    let (psi, _) = ops.solve_projected(eps, c, Method::Direct)?;
    inner_product(&psi, ops.phi(), &ops.grid, NormKind::L2)
}

/// `c~(eps) = -eps / lambda`.
pub fn predict_c(lambda: &SpectralCoefficientLambda, eps: f64) -> Result<Complex64> {
    predict_c_from(lambda.as_complex, eps)
}

pub fn predict_c_from(lambda: Complex64, eps: f64) -> Result<Complex64> {
    if !(lambda.im > 0.0) {
        return Err(Error::ImagNotPositive { imag: lambda.im });
    }
    if eps == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(-eps / lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    pub winding: i64,
    pub min_abs_g: f64,
    pub samples: usize,
}

/// Winding number of `G(., eps)` around the circle `|c - center| = radius`.
pub fn winding_number(ops: &RayleighOperators, eps: f64, center: Complex64, radius: f64, n_samples: usize) -> Result<Winding> {
    winding_of(|c| eval_g(ops, eps, c), center, radius, n_samples)
}

/// Argument principle for any function sampled on a circle in the upper
/// half-plane.
pub fn winding_of<F>(g: F, center: Complex64, radius: f64, n_samples: usize) -> Result<Winding>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if !(radius > 0.0) || center.im - radius <= 0.0 {
        return Err(Error::InvalidRange(format!("circle ({center}, {radius}) must lie in Im c > 0")));
    }
    let step = 2.0 * std::f64::consts::PI / n_samples.max(1) as f64;
    if n_samples < 64 {
        return Err(Error::PhaseUnwrapAmbiguous { jump: step });
    }
    let values: Vec<Complex64> = (0..n_samples)
        .into_par_iter()
        .map(|k| g(center + Complex64::from_polar(radius, k as f64 * step)))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for k in 0..n_samples {
        let jump = (values[(k + 1) % n_samples] / values[k]).arg();
        if jump.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::PhaseUnwrapAmbiguous { jump });
        }
        total += jump;
    }
    let min_abs_g = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    Ok(Winding { winding: (total / (2.0 * std::f64::consts::PI)).round() as i64, min_abs_g, samples: n_samples })
}

/// [`winding_number`] starting at `n_samples`, doubling on ambiguous phase.
pub fn winding_number_adaptive(ops: &RayleighOperators, eps: f64, center: Complex64, radius: f64, n_samples: usize) -> Result<Winding> {
    let mut n = n_samples.max(64);
    loop {
        match winding_number(ops, eps, center, radius, n) {
            Err(Error::PhaseUnwrapAmbiguous { .. }) if n < MAX_WINDING_SAMPLES => n *= 2,
            other => return other,
        }
    }
}

/// Complex secant iteration started at `start` and `start (1 + 1e-3)`,
/// stopping once `|g| <= tol (scale + |c|)`.
pub(crate) fn secant_root<F>(g: F, start: Complex64, tol: f64, scale: f64) -> Result<(Complex64, Complex64, usize)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut c0 = start;
    let mut c1 = start * Complex64::new(1.0 + 1e-3, 0.0);
    let mut g0 = g(c0)?;
    let mut g1 = g(c1)?;
    for it in 1..=SECANT_MAX_ITERATIONS {
        if g1.norm() <= tol * (scale + c1.norm()) {
            return Ok((c1, g1, it));
        }
        let dg = g1 - g0;
        if dg.norm() == 0.0 {
            break;
        }
        let mut next = c1 - g1 * (c1 - c0) / dg;
        if !(next.im > 0.0) {
            next = Complex64::new(next.re, 0.5 * c1.im);
        }
        c0 = c1;
        g0 = g1;
        c1 = next;
        g1 = g(c1)?;
    }
    Err(Error::NotConverged { iterations: SECANT_MAX_ITERATIONS, residual: g1.norm() })
}

/// Root of the reduced equation near `c~(eps)`, certified by a winding
/// number of 1 on the disk `D(c~, eps / (2 |lambda|))`.
pub fn solve_reduced(ops: &RayleighOperators, lambda: &SpectralCoefficientLambda, eps: f64, tol: f64) -> Result<DispersionPoint> {
    let start = predict_c(lambda, eps)?;
    solve_reduced_from(ops, lambda, eps, tol, start)
}

/// [`solve_reduced`] with the secant iteration started at `start`.
pub fn solve_reduced_from(
    ops: &RayleighOperators,
    lambda: &SpectralCoefficientLambda,
    eps: f64,
    tol: f64,
    start: Complex64,
) -> Result<DispersionPoint> {
    if !(eps > 0.0) {
        return Err(Error::InvalidRange(format!("eps must be positive, got {eps}")));
    }
    let center = predict_c(lambda, eps)?;
    let radius = eps / (2.0 * lambda.as_complex.norm());
    let (c, g, iterations) = secant_root(|c| eval_g(ops, eps, c), start, tol, eps)?;
    let w = winding_number_adaptive(ops, eps, center, radius, DEFAULT_WINDING_SAMPLES)?;
    if w.winding != 1 || (c - center).norm() >= radius {
        return Err(Error::WindingMismatch { winding: if w.winding != 1 { w.winding } else { 0 } });
    }
    let alpha = (ops.mode.alpha_sq - eps).max(0.0).sqrt();
    Ok(DispersionPoint {
        eps,
        c,
        g_residual: g.norm(),
        winding: w.winding,
        iterations,
        pencil_c: None,
        growth_rate: alpha * c.im,
        min_g_on_circle: w.min_abs_g,
        certificate_radius: radius,
        failure: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PencilOptions {
    /// Treat convergence onto the real axis as failure.
    pub reject_real: bool,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self { reject_real: true }
    }
}

/// The pencil `A - sigma B` with `B = -D^2 + alpha~^2 - eps` and
/// `A = diag(U) B + diag(U'')`, which is tridiagonal.
struct Pencil<'a> {
    ops: &'a RayleighOperators,
    b: TridiagonalOperator,
    u_second: Vec<f64>,
    a_norm: f64,
    b_norm: f64,
}

impl<'a> Pencil<'a> {
    fn new(ops: &'a RayleighOperators, eps: f64) -> Self {
        let b = TridiagonalOperator {
            diagonal: ops.k_inverse.diagonal.iter().map(|d| d - eps).collect(),
            off_diagonal: ops.k_inverse.off_diagonal.clone(),
        };
        let u_second: Vec<f64> = ops.velocity.iter().zip(&ops.potential).map(|(u, v)| u * v).collect();
        let u_max = ops.velocity.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let b_norm = b.inf_norm();
        let a_norm = u_max * b_norm + u_second.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self { ops, b, u_second, a_norm, b_norm }
    }

    fn shifted(&self, sigma: Complex64) -> ComplexTridiagonal {
        let n = self.b.len();
        let scale: Vec<Complex64> = self.ops.velocity.iter().map(|u| Complex64::new(*u, 0.0) - sigma).collect();
        ComplexTridiagonal {
            sub: (0..n.saturating_sub(1)).map(|i| scale[i + 1] * self.b.off_diagonal[i]).collect(),
            diagonal: (0..n).map(|i| scale[i] * self.b.diagonal[i] + self.u_second[i]).collect(),
            sup: (0..n.saturating_sub(1)).map(|i| scale[i] * self.b.off_diagonal[i]).collect(),
        }
    }

    fn apply_a(&self, v: &[Complex64]) -> Vec<Complex64> {
        let bv = self.b.apply(v);
        bv.iter()
            .zip(v)
            .zip(self.ops.velocity.iter().zip(&self.u_second))
            .map(|((bv, v), (u, us))| bv * u + v * us)
            .collect()
    }
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn pencil_iterate(p: &Pencil, shift: Complex64, start: &[Complex64]) -> Result<(Complex64, Vec<Complex64>)> {
    let mut sigma = shift;
    let mut lu = p.shifted(sigma).factor()?;
    let mut v = start.to_vec();
    let mut residual = f64::INFINITY;
    for it in 1..=PENCIL_MAX_ITERATIONS {
        let mut w = p.b.apply(&v);
        lu.solve_in_place(&mut w);
        let scale = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(scale.is_finite() && scale > 0.0) {
            break;
        }
        w.iter_mut().for_each(|z| *z /= scale);
        let aw = p.apply_a(&w);
        let bw = p.b.apply(&w);
        let c = dot_conj(&w, &aw) / dot_conj(&w, &bw);
        let r: f64 = aw.iter().zip(&bw).map(|(a, b)| (a - c * b).norm_sqr()).sum::<f64>().sqrt();
        residual = r / (p.a_norm + c.norm() * p.b_norm);
        v = w;
        if residual <= PENCIL_TOL {
            return Ok((c, v));
        }
        if it % PENCIL_REFRESH == 0 {
            sigma = c;
            lu = p.shifted(sigma).factor()?;
        }
    }
    Err(Error::NotConverged { iterations: PENCIL_MAX_ITERATIONS, residual })
}

/// Eigenvalue of the pencil nearest `shift` by shift-invert iteration.
/// The eigenvector is L2-normalized with `(phi, phi~) > 0`.
pub fn pencil_eigenvalue(
    ops: &RayleighOperators,
    eps: f64,
    shift: Complex64,
    options: PencilOptions,
) -> Result<(Complex64, Vec<Complex64>)> {
    let pencil = Pencil::new(ops, eps);
    let attempt = |s: Complex64| -> Result<(Complex64, Vec<Complex64>)> {
        let (c, v) = pencil_iterate(&pencil, s, ops.phi())?;
        if options.reject_real && c.im.abs() < 1e-10 {
            return Err(Error::ConvergedToRealAxis { re: c.re, im: c.im });
        }
        Ok((c, v))
    };
    let (c, mut v) = match attempt(shift) {
        Err(Error::ConvergedToRealAxis { .. }) => attempt(shift * Complex64::new(1.0, 0.5))?,
        other => other?,
    };
    let s = inner_product(&v, ops.phi(), &ops.grid, NormKind::L2)?;
    let nv = norm(&v, &ops.grid, NormKind::L2)?;
    let phase = if s.norm() > 0.0 { s.conj() / s.norm() } else { Complex64::new(1.0, 0.0) };
    v.iter_mut().for_each(|z| *z = *z * phase / nv);
    Ok((c, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    pub warm_start: bool,
    /// Solve points concurrently; only honored without warm starts.
    pub parallel: bool,
    pub tol: f64,
    pub pencil: bool,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { warm_start: true, parallel: false, tol: 1e-10, pencil: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<DispersionPoint>,
    /// Least-squares slope of `Im c` against `eps` over the accepted points.
    pub slope: f64,
    /// `Im(-1/lambda)`.
    pub slope_target: f64,
    pub slope_relative_deviation: f64,
}

fn solve_point(ops: &RayleighOperators, lambda: &SpectralCoefficientLambda, eps: f64, start: Option<Complex64>, options: &CurveOptions) -> DispersionPoint {
    let solved = match start {
        Some(s) => solve_reduced_from(ops, lambda, eps, options.tol, s),
        None => solve_reduced(ops, lambda, eps, options.tol),
    };
    match solved {
        Ok(mut p) => {
            if options.pencil {
                match pencil_eigenvalue(ops, eps, p.c, PencilOptions::default()) {
                    Ok((pc, _)) => p.pencil_c = Some(pc),
                    Err(e) => p.failure = Some(format!("pencil oracle: {e}")),
                }
            }
            p
        }
        Err(e) => DispersionPoint::failed(eps, e.to_string()),
    }
}

/// Solves the reduced equation along an increasing `eps` grid.
pub fn continue_curve(ops: &RayleighOperators, lambda: &SpectralCoefficientLambda, eps_grid: &[f64], options: &CurveOptions) -> Result<Curve> {
    if eps_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidRange("eps grid must be increasing".into()));
    }
    let points: Vec<DispersionPoint> = if !options.warm_start && options.parallel {
        eps_grid.par_iter().map(|&e| solve_point(ops, lambda, e, None, options)).collect()
    } else {
        let mut out: Vec<DispersionPoint> = Vec::with_capacity(eps_grid.len());
        for &e in eps_grid {
            let start = if options.warm_start {
                out.iter().rev().find(|p| p.is_ok()).map(|p| p.c * (e / p.eps))
            } else {
                None
            };
            out.push(solve_point(ops, lambda, e, start, options));
        }
        out
    };
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter(|p| p.is_ok()).map(|p| (p.eps, p.c.im)).unzip();
    let slope = if x.len() >= 2 { fit_slope(&x, &y) } else { f64::NAN };
    let slope_target = (-1.0 / lambda.as_complex).im;
    Ok(Curve { points, slope, slope_target, slope_relative_deviation: (slope - slope_target).abs() / slope_target.abs() })
}

/// Largest `eps` in `[eps_lo, eps_hi]` (log-bisection, `steps` halvings)
/// for which the reduced root is certified; `None` if `eps_lo` fails.
pub fn certified_eps_limit(
    ops: &RayleighOperators,
    lambda: &SpectralCoefficientLambda,
    eps_lo: f64,
    eps_hi: f64,
    steps: usize,
) -> Option<f64> {
    let ok = |e: f64| solve_reduced(ops, lambda, e, 1e-10).is_ok();
    if !ok(eps_lo) {
        return None;
    }
    if ok(eps_hi) {
        return Some(eps_hi);
    }
    let (mut lo, mut hi) = (eps_lo.ln(), eps_hi.ln());
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if ok(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo.exp())
}

/// Stream function `Re`/`Im` samples of `phi(y) e^{i alpha x}` at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFunctionSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major `field[j * x.len() + i] = phi(y_j) e^{i alpha x_i}`.
    pub field: Vec<Complex64>,
    pub alpha: f64,
    pub growth_rate: f64,
    pub phase_speed: f64,
}

/// Samples `Psi(x, y) = (phi~ + psi)(y) e^{i alpha x}` over one wavelength.
pub fn assemble_unstable_mode(mode: &NeutralMode, psi: &[Complex64], alpha: f64, c: Complex64, nx: usize) -> Result<StreamFunctionSample> {
    mode.grid.check_len(psi.len())?;
    if !(alpha > 0.0) || nx == 0 {
        return Err(Error::InvalidRange(format!("alpha = {alpha}, nx = {nx}")));
    }
    let wavelength = 2.0 * std::f64::consts::PI / alpha;
    let x: Vec<f64> = (0..nx).map(|i| wavelength * i as f64 / nx as f64).collect();
    let mut field = Vec::with_capacity(nx * psi.len());
    for (p, q) in mode.phi.iter().zip(psi) {
        let phi = q + p;
        field.extend(x.iter().map(|&xi| phi * Complex64::from_polar(1.0, alpha * xi)));
    }
    Ok(StreamFunctionSample {
        x,
        y: mode.grid.nodes.clone(),
        field,
        alpha,
        growth_rate: alpha * c.im,
        phase_speed: c.re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use crate::neutral_modes::solve_neutral;
    use crate::profiles::ShearProfile;
    use crate::singular_limits::lambda_limit;
    use std::f64::consts::PI;

    fn setup(n: usize) -> (RayleighOperators, SpectralCoefficientLambda) {
        let p = ShearProfile::sine(2.0).unwrap();
        let m = solve_neutral(&p, &Grid::channel(n).unwrap()).unwrap();
        let l = lambda_limit(&p, &m, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        (RayleighOperators::new(&p, &m).unwrap(), l)
    }

    #[test]
    fn prediction_examples() {
        let c = predict_c_from(Complex64::new(0.0, 2.0 * PI), 1e-2).unwrap();
        assert!((c - Complex64::new(0.0, 1e-2 / (2.0 * PI))).norm() < 1e-15);
        let c = predict_c_from(Complex64::new(1.0, 1.0), 1.0).unwrap();
        assert!((c - Complex64::new(-0.5, 0.5)).norm() < 1e-15);
        assert_eq!(predict_c_from(Complex64::new(0.0, 1.0), 0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(predict_c_from(Complex64::new(0.0, -1.0), 1.0).is_err());
    }

    #[test]
    fn g_is_holomorphic_and_reflection_symmetric() {
        let (ops, _) = setup(4000);
        let c = Complex64::new(1e-2, 1e-2);
        let d = 1e-6;
        let gx = (eval_g(&ops, 1e-2, c + d).unwrap() - eval_g(&ops, 1e-2, c - d).unwrap()) / (2.0 * d);
        let iy = Complex64::new(0.0, d);
        let gy = (eval_g(&ops, 1e-2, c + iy).unwrap() - eval_g(&ops, 1e-2, c - iy).unwrap()) / (2.0 * d);
        assert!((gy - Complex64::new(0.0, 1.0) * gx).norm() <= 1e-6 * gx.norm());
        let g = eval_g(&ops, 1e-2, c).unwrap();
        let gr = eval_g(&ops, 1e-2, -c.conj()).unwrap();
        assert!((gr - g.conj()).norm() < 1e-10 * g.norm());
    }

    #[test]
    fn winding_away_from_root_is_zero() {
        let (ops, l) = setup(4000);
        let eps = 5e-2;
        let center = predict_c(&l, eps).unwrap();
        let r = eps / (2.0 * l.as_complex.norm());
        let w = winding_number(&ops, eps, center + Complex64::new(0.0, 10.0 * r), r, 64).unwrap();
        assert_eq!(w.winding, 0);
        assert!(matches!(winding_number(&ops, eps, center, r, 4), Err(Error::PhaseUnwrapAmbiguous { .. })));
    }

    #[test]
    fn neutral_pencil_limit() {
        let (ops, _) = setup(400);
        let (c, _) = pencil_eigenvalue(&ops, 0.0, Complex64::new(0.0, 1e-3), PencilOptions { reject_real: false }).unwrap();
        assert!(c.norm() < 1e-8, "{c}");
    }

    #[test]
    fn assembled_mode_metadata() {
        let (ops, _) = setup(100);
        let zero = vec![Complex64::new(0.0, 0.0); 100];
        let s = assemble_unstable_mode(&ops.mode, &zero, 1.5, Complex64::new(0.0, 0.2 / 1.5), 8).unwrap();
        assert!((s.growth_rate - 0.2).abs() < 1e-15);
        assert!((s.field[8 * 3] - Complex64::new(ops.mode.phi[3], 0.0)).norm() < 1e-15);
        assert!(assemble_unstable_mode(&ops.mode, &zero[..5], 1.5, Complex64::new(0.0, 0.1), 8).is_err());
    }

    #[test]
    fn empty_curve() {
        let (ops, l) = setup(100);
        let curve = continue_curve(&ops, &l, &[], &CurveOptions::default()).unwrap();
        assert!(curve.points.is_empty());
    }
}
