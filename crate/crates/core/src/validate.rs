//! Fixed-grid invariant suite over every module, with a fault-injection
//! hook that flips the sign of `Im lambda`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::discretization::quadrature::{near_singular_integral, pv_integral};
use crate::discretization::{helmholtz_solve, Grid, TridiagonalOperator};
use crate::dispersion::{eval_g, pencil_eigenvalue, predict_c, predict_c_from, solve_reduced, PencilOptions};
use crate::error::Result;
use crate::lyapunov_schmidt::{Method, RayleighOperators};
use crate::neutral_modes::{line_eigenvalue_limit, solve_neutral};
use crate::profiles::{check_assumptions, continuous_ratio, rescale_profile, ShearProfile};
use crate::singular_limits::{lambda_limit, plemelj_limit_check};
use crate::vortex_sheet::{build_cutoffs, coupling_norms, inner_helmholtz, solve_sheet_reduced, z_norm, SheetSetup, DEFAULT_H_XI};

/// Width-extrapolated ground state of the square well `mu tan 2mu = sqrt(w^2 - mu^2)`, `w = pi/4`.
pub const SQUARE_WELL_ALPHA0: f64 = 0.631_470_376_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Base channel grid size.
    pub n: usize,
    /// Negates `Im lambda` after it is computed.
    pub flip_lambda_sign: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { n: 2000, flip_lambda_sign: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub options: ValidateOptions,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        self.checks
            .iter()
            .map(|c| format!("{:<4}  {:<width$}  {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

struct Suite {
    checks: Vec<CheckOutcome>,
}

impl Suite {
    fn run<F: FnOnce() -> Result<(bool, String)>>(&mut self, name: &str, f: F) {
        let (passed, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        self.checks.push(CheckOutcome { name: name.into(), passed, detail });
    }
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn run_validation(options: ValidateOptions) -> ValidationReport {
    let mut s = Suite { checks: Vec::new() };
    let n = options.n.max(50);
    let sine = ShearProfile::sine(2.0).expect("valid beta");
    let sheet = ShearProfile::sheet_base();
    let grid = Grid::channel(n).expect("valid n");

    s.run("profiles: sine ratio is beta^2", || {
        let worst = [-0.9, -0.3, 0.2, 0.7].iter().map(|&y| continuous_ratio(&sine, y).map(|r| (r - 4.0).abs())).collect::<Result<Vec<_>>>()?;
        let worst = worst.into_iter().fold(0.0, f64::max);
        Ok((worst < 1e-12, format!("max deviation {worst:.3e}")))
    });
    s.run("profiles: rescaled ratio is k^2 times base", || {
        let r = rescale_profile(&sheet, 8.0)?;
        let d = (continuous_ratio(&r, 0.1)? - 64.0 * continuous_ratio(&sheet, 0.8)?).abs();
        Ok((d < 1e-10, format!("deviation {d:.3e}")))
    });
    s.run("profiles: sine assumptions", || {
        let a = check_assumptions(&sine, 1001)?;
        Ok((a.pass, format!("sign changes {}, |U'(a)| {:.6}", a.sign_changes, a.abs_u_prime_at_a)))
    });
    s.run("discretization: near-singular integral", || {
        let c = 1e-3;
        let v = near_singular_integral(|y| Complex64::new(1.0, 0.0) / Complex64::new(y, -c), 0.0, c, (-1.0, 1.0))?;
        let d = (v - Complex64::new(0.0, 2.0 * (1.0 / c).atan())).norm();
        Ok((d < 1e-8, format!("error {d:.3e}")))
    });
    s.run("discretization: principal value", || {
        let v = pv_integral(|_| Complex64::new(1.0, 0.0), 0.0, (-1.0, 2.0))?;
        let d = (v - Complex64::new(2f64.ln(), 0.0)).norm();
        Ok((d < 1e-8, format!("error {d:.3e}")))
    });
    s.run("discretization: tridiagonal solve", || {
        let op = TridiagonalOperator::shifted_laplacian(&grid, 1.5);
        let f: Vec<Complex64> = (0..grid.n).map(|i| Complex64::new((i as f64).sin(), (0.5 * i as f64).cos())).collect();
        let x = helmholtz_solve(&op, &f)?;
        let scale = op.inf_norm() * x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let r = sup_diff(&op.apply(&x), &f) / scale;
        Ok((r < 1e-12, format!("relative residual {r:.3e}")))
    });

    let mode = solve_neutral(&sine, &grid);
    let ratio = (2000.0 / n as f64).powi(2).max(1.0);
    s.run("neutral: closed form for Sine(2)", || {
        let m = mode.clone()?;
        let da = (m.alpha_sq - (4.0 - PI * PI / 4.0)).abs();
        let dphi = m.phi.iter().zip(&grid.nodes).map(|(p, y)| (p - (PI * y / 2.0).cos()).abs()).fold(0.0, f64::max);
        Ok((da <= 1e-5 * ratio && dphi <= 1e-4 * ratio, format!("alpha~^2 error {da:.3e}, phi error {dphi:.3e}")))
    });
    s.run("neutral: positive and even", || {
        let m = mode.clone()?;
        let k = m.phi.len();
        let asym = (0..k).map(|i| (m.phi[i] - m.phi[k - 1 - i]).abs()).fold(0.0, f64::max);
        Ok((m.phi.iter().all(|p| *p > 0.0) && asym < 1e-10, format!("asymmetry {asym:.3e}")))
    });
    s.run("neutral: line limit for the sheet", || {
        let l = line_eigenvalue_limit(&sheet, &[8.0, 16.0, 32.0], 1.0 / 32.0)?;
        let d = (l.alpha0 - SQUARE_WELL_ALPHA0).abs();
        Ok((d <= 1e-3 && l.monotone, format!("alpha0 {:.7}, oracle error {d:.3e}, monotone {}", l.alpha0, l.monotone)))
    });

    let lambda = mode.clone().and_then(|m| {
        let mut l = lambda_limit(&sine, &m, &[1e-1, 1e-2, 1e-3, 1e-4])?;
        if options.flip_lambda_sign {
            l.imag = -l.imag;
            l.as_complex = l.as_complex.conj();
        }
        Ok(l)
    });
    s.run("singular limits: lambda for Sine(2)", || {
        let l = lambda.clone()?;
        let d = (l.imag - 2.0 * PI).abs() / (2.0 * PI);
        Ok((d <= 0.01 && l.c.abs() <= 1e-6, format!("Im lambda {:.6}, |C| {:.3e}", l.imag, l.c.abs())))
    });
    s.run("singular limits: instability sign", || {
        let l = lambda.clone()?;
        let c = predict_c_from(l.as_complex, 1e-2)?;
        Ok((c.im > 0.0, format!("Im c~(1e-2) {:.6e}", c.im)))
    });
    s.run("singular limits: Plemelj constant function", || {
        let seq: Vec<(f64, f64)> = (1..=8).map(|k| (10f64.powi(-k), 10f64.powi(-k))).collect();
        let chk = plemelj_limit_check(|_| 1.0, (-1.0, 1.0), &seq, &[])?;
        let d = chk.finest_discrepancy();
        Ok((d <= 1e-3, format!("finest discrepancy {d:.3e}")))
    });

    let ops = mode.clone().and_then(|m| RayleighOperators::new(&sine, &m));
    s.run("lyapunov-schmidt: Neumann equals direct", || {
        let o = ops.as_ref().map_err(Clone::clone)?;
        let c = predict_c(&lambda.clone()?, 1e-2)?;
        let (d, _) = o.solve_projected(1e-2, c, Method::Direct)?;
        let (nm, cert) = o.solve_projected(1e-2, c, Method::Neumann { max_terms: 100 })?;
        let diff = sup_diff(&d, &nm);
        Ok((diff <= 1e-8, format!("difference {diff:.3e}, {} terms, ratio {:.3e}", cert.terms, cert.contraction_ratio)))
    });
    s.run("lyapunov-schmidt: projected residual", || {
        let o = ops.as_ref().map_err(Clone::clone)?;
        let c = Complex64::new(0.0, 1e-2);
        let (psi, _) = o.solve_projected(1e-2, c, Method::Direct)?;
        let r = o.projected_residual(1e-2, c, &psi)?;
        Ok((r <= 1e-10, format!("residual {r:.3e}")))
    });

    let n_d = 4 * n;
    let dispersion_ops = Grid::channel(n_d).and_then(|g| solve_neutral(&sine, &g)).and_then(|m| RayleighOperators::new(&sine, &m));
    let eps_d = 2.0 * PI * 3.0 * 2.0 * 2.0 / (n_d as f64 + 1.0);
    s.run("dispersion: reflection symmetry of G", || {
        let o = dispersion_ops.as_ref().map_err(Clone::clone)?;
        let c = Complex64::new(1e-2, 1e-2);
        let g = eval_g(o, eps_d, c)?;
        let d = (eval_g(o, eps_d, -c.conj())? - g.conj()).norm() / g.norm();
        Ok((d <= 1e-10, format!("relative defect {d:.3e}")))
    });
    s.run("dispersion: certified root and pencil", || {
        let o = dispersion_ops.as_ref().map_err(Clone::clone)?;
        let l = lambda.clone()?;
        let p = solve_reduced(o, &l, eps_d, 1e-10)?;
        let (pc, _) = pencil_eigenvalue(o, eps_d, p.c, PencilOptions::default())?;
        let gap = (pc - p.c).norm();
        Ok((p.winding == 1 && p.c.im > 0.0 && gap <= 1e-6, format!("eps {eps_d:.3e}, Im c {:.6e}, pencil gap {gap:.3e}", p.c.im)))
    });

    s.run("vortex sheet: cutoffs", || {
        let p = build_cutoffs(16.0, 32.0)?;
        let refused = build_cutoffs(16.0, 4.0).is_err();
        Ok((p.sampled_in[0] <= 5.0 && refused, format!("max |chi_in'| {:.4}", p.sampled_in[0])))
    });
    s.run("vortex sheet: lattice kernel", || {
        let g = Grid::new(799, (-8.0, 8.0))?;
        let f: Vec<Complex64> = g.nodes.iter().map(|x| Complex64::new((-x * x).exp(), 0.0)).collect();
        let psi = inner_helmholtz(0.63, &f, &g)?;
        let lhs = TridiagonalOperator::shifted_laplacian(&g, 0.63 * 0.63).apply(&psi);
        let r = (1..g.n - 1).map(|i| (lhs[i] - f[i]).norm()).fold(0.0, f64::max);
        Ok((r <= 1e-10, format!("interior residual {r:.3e}")))
    });
    s.run("vortex sheet: Z norm of the sine mode", || {
        let f: Vec<Complex64> = grid.nodes.iter().map(|y| Complex64::new((PI * (y + 1.0) / 2.0).sin(), 0.0)).collect();
        let z = z_norm(&f, &grid, 10.0, 10.0)?;
        let d = (z - (PI / 2.0 + 10.0)).abs();
        Ok((d <= 1e-3 * ratio, format!("error {d:.3e}")))
    });
    s.run("vortex sheet: glued root at k = 8", || {
        let setup = SheetSetup::new(&sheet, 8.0, 32.0, DEFAULT_H_XI)?;
        let eps = 0.02 * 64.0;
        let g = solve_sheet_reduced(&setup, eps, 1e-10)?;
        let predicted = eps / (64.0 * setup.lambda0.imag);
        let q = g.c.im / predicted;
        let ok = g.winding == Some(1) && g.assembled_residual <= 1e-6 && q > 0.25 && q < 4.0;
        Ok((ok, format!("Im c {:.6e}, residual {:.3e}, Im c / prediction {q:.4}", g.c.im, g.assembled_residual)))
    });
    s.run("vortex sheet: coupling norms decay in L", || {
        let a = coupling_norms(&SheetSetup::new(&sheet, 16.0, 8.0, DEFAULT_H_XI)?, 0.02 * 256.0)?;
        let b = coupling_norms(&SheetSetup::new(&sheet, 16.0, 16.0, DEFAULT_H_XI)?, 0.02 * 256.0)?;
        let sb = (b.b / a.b).ln() / 2f64.ln();
        let sc = (b.c / a.c).ln() / 2f64.ln();
        Ok((sb < 0.0 && sc < 0.0, format!("slopes B {sb:.3}, C {sc:.3}")))
    });

    ValidationReport { options, checks: s.checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes_and_fault_is_caught() {
        let clean = run_validation(ValidateOptions { n: 250, flip_lambda_sign: false });
        assert!(clean.all_passed(), "{}", clean.table());
        let faulty = run_validation(ValidateOptions { n: 250, flip_lambda_sign: true });
        assert!(!faulty.all_passed());
        let sign = faulty.checks.iter().find(|c| c.name.contains("instability sign")).unwrap();
        assert!(!sign.passed && sign.detail.contains("Im lambda"), "{}", sign.detail);
    }
}
