//! Inner-outer gluing for the rescaled profile `U(y) = U0(k y)`.
//!
//! The channel mode is written as `phi = chi_in phi_in + chi_out phi_out`
//! with `phi_in(y) = (Phi0 + Psi)(k y)`. On the lattice the split is exact:
//! the inner and outer equations are coupled through discrete commutators
//! `[D^2, chi]`, so the assembled vector satisfies the channel's discrete
//! Rayleigh equation whenever the inner reduced equation `(Psi, Phi0) = 0`
//! holds.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::tridiag::{helmholtz_solve, TridiagonalOperator};
use crate::discretization::{inner_product, norm, Grid, NormKind};
use crate::dispersion::{predict_c_from, secant_root, solve_reduced, winding_of, DEFAULT_WINDING_SAMPLES};
use crate::error::{Error, Result};
use crate::lyapunov_schmidt::RayleighOperators;
use crate::neutral_modes::{line_eigenvalue_limit, solve_neutral, solve_truncated_line, LineLimit, NeutralMode, Normalization};
use crate::profiles::{rescale_profile, ShearProfile};
use crate::singular_limits::{fit_slope, lambda_limit, SpectralCoefficientLambda};

pub const DEFAULT_L: f64 = 32.0;
/// Inner lattice spacing. Puts `xi = 0` on a node and the kinks of the
/// sheet base profile at cell midpoints for every `k` divisible by 4.
pub const DEFAULT_H_XI: f64 = 4.0 / 513.0;
pub const DEFAULT_OUT_BAND: (f64, f64) = (2.5, 3.5);
const LINE_WIDTHS: [f64; 3] = [8.0, 16.0, 32.0];
const LAMBDA_TAUS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const BLOCK_MAX_ITERATIONS: usize = 200;
const BLOCK_TOL: f64 = 1e-13;
const BOUND_SAMPLES: usize = 10_000;
const PROBE_ITERATIONS: usize = 60;

fn smoothstep(t: f64, order: usize) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return if order == 0 && t >= 1.0 { 1.0 } else { 0.0 };
    }
    match order {
        0 => t * t * t * (10.0 - 15.0 * t + 6.0 * t * t),
        1 => 30.0 * t * t * (1.0 - t) * (1.0 - t),
        _ => 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    }
}

/// Cutoffs with quintic smoothstep transitions. `chi_in` falls from 1 to 0
/// on `4 <= |xi| <= L_eff` and `chi_out` rises on `out_band`, where
/// `xi = k y` and `L_eff = min(L, k)` keeps the inner support in the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub k: f64,
    pub l: f64,
    pub l_eff: f64,
    pub out_band: (f64, f64),
    /// Sampled `max |chi_in^(l)|`, `max |chi_out^(l)|` for `l = 1, 2`.
    pub sampled_in: [f64; 2],
    pub sampled_out: [f64; 2],
}

impl CutoffPair {
    fn in_xi(&self, xi: f64, order: usize) -> f64 {
        let w = self.l_eff - 4.0;
        let t = (xi.abs() - 4.0) / w;
        let sign = if xi < 0.0 && order == 1 { -1.0 } else { 1.0 };
        match order {
            0 => 1.0 - smoothstep(t, 0),
            _ => -sign * smoothstep(t, order) / w.powi(order as i32),
        }
    }

    fn out_xi(&self, xi: f64, order: usize) -> f64 {
        let (a, b) = self.out_band;
        let t = (xi.abs() - a) / (b - a);
        let sign = if xi < 0.0 && order == 1 { -1.0 } else { 1.0 };
        sign * smoothstep(t, order) / (b - a).powi(order as i32)
    }

    /// `chi_in^(order)(y)` for `order <= 2`.
    pub fn chi_in(&self, y: f64, order: usize) -> f64 {
        self.k.powi(order as i32) * self.in_xi(self.k * y, order)
    }

    /// `chi_out^(order)(y)` for `order <= 2`.
    pub fn chi_out(&self, y: f64, order: usize) -> f64 {
        self.k.powi(order as i32) * self.out_xi(self.k * y, order)
    }
}

pub fn build_cutoffs(k: f64, l: f64) -> Result<CutoffPair> {
    build_cutoffs_with(k, l, DEFAULT_OUT_BAND)
}

/// [`build_cutoffs`] with the `chi_out` transition placed on `out_band`
/// (in `xi` units, inside `[2, 4]`).
pub fn build_cutoffs_with(k: f64, l: f64, out_band: (f64, f64)) -> Result<CutoffPair> {
    if !(k >= 1.0) || !(l > 1.0) {
        return Err(Error::InvalidRange(format!("cutoffs need k >= 1 and L > 1, got k = {k}, L = {l}")));
    }
    let (a, b) = out_band;
    if !(2.0 <= a && a < b && b <= 4.0) {
        return Err(Error::InvalidRange(format!("chi_out band {out_band:?} must lie in [2, 4]")));
    }
    let l_eff = l.min(k);
    if l_eff <= 4.0 {
        return Err(Error::BoundViolation(format!("L_eff = {l_eff} leaves no room for the chi_in transition")));
    }
    let mut pair = CutoffPair { k, l, l_eff, out_band, sampled_in: [0.0; 2], sampled_out: [0.0; 2] };
    for i in 0..=BOUND_SAMPLES {
        let y = -1.0 + 2.0 * i as f64 / BOUND_SAMPLES as f64;
        for order in 1..=2 {
            pair.sampled_in[order - 1] = pair.sampled_in[order - 1].max(pair.chi_in(y, order).abs());
            pair.sampled_out[order - 1] = pair.sampled_out[order - 1].max(pair.chi_out(y, order).abs());
        }
    }
    for order in 1..=2 {
        let bound_in = (10.0 * k / l_eff).powi(order as i32);
        let bound_out = (10.0 * k).powi(order as i32);
        if pair.sampled_in[order - 1] > bound_in || pair.sampled_out[order - 1] > bound_out {
            return Err(Error::BoundViolation(format!(
                "derivative {order}: |chi_in| = {} (bound {bound_in}), |chi_out| = {} (bound {bound_out})",
                pair.sampled_in[order - 1],
                pair.sampled_out[order - 1]
            )));
        }
    }
    Ok(pair)
}

/// Solves `(-D^2 + alpha0^2) psi = f` on the infinite lattice `grid.h Z`
/// for `f` supported on the grid, by the two-pass exponential recursion
/// for the lattice kernel `rho^|j| h^2 / (2 sinh theta)`,
/// `cosh theta = 1 + alpha0^2 h^2 / 2`.
pub fn inner_helmholtz(alpha0: f64, f: &[Complex64], grid: &Grid) -> Result<Vec<Complex64>> {
    grid.check_len(f.len())?;
    if !(alpha0 > 0.0) {
        return Err(Error::InvalidRange(format!("alpha0 must be positive, got {alpha0}")));
    }
    let h = grid.h;
    let theta = (1.0 + 0.5 * alpha0 * alpha0 * h * h).acosh();
    let rho = (-theta).exp();
    let scale = h * h / (2.0 * theta.sinh());
    let n = f.len();
    let mut left = vec![Complex64::new(0.0, 0.0); n];
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        acc = acc * rho + f[i];
        left[i] = acc;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    acc = Complex64::new(0.0, 0.0);
    for i in (0..n).rev() {
        acc = acc * rho + f[i];
        out[i] = (left[i] + acc - f[i]) * scale;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerNeutral {
    /// `alpha0` extrapolated in the width.
    pub alpha0: f64,
    pub limit_table: Vec<(f64, f64)>,
    /// The mode on `(-half_width, half_width)`, H1-normalized.
    pub mode: NeutralMode,
}

/// Ground state of the line problem at spacing `h`: the width-extrapolated
/// `alpha0` and the truncated mode on `(-half_width, half_width)`.
pub fn solve_inner_neutral(base: &ShearProfile, half_width: f64, h: f64) -> Result<InnerNeutral> {
    if !(half_width >= 8.0) {
        return Err(Error::InvalidRange(format!("inner half-width must be >= 8, got {half_width}")));
    }
    let limit: LineLimit = line_eigenvalue_limit(base, &LINE_WIDTHS, h)?;
    let grid = crate::neutral_modes::line_grid(half_width, h)?;
    let mode = solve_truncated_line(base, half_width, &grid)?;
    Ok(InnerNeutral { alpha0: limit.alpha0, limit_table: limit.table, mode })
}

/// `sqrt(L/k) ||f'|| + sqrt(k L) ||f||` with difference quotients and the
/// trapezoid rule, zero boundary values included.
pub fn z_norm(f: &[Complex64], grid: &Grid, k: f64, l: f64) -> Result<f64> {
    grid.check_len(f.len())?;
    let h = grid.h;
    let l2 = f.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let mut d2 = 0.0;
    let mut prev = Complex64::new(0.0, 0.0);
    for z in f.iter().chain(std::iter::once(&Complex64::new(0.0, 0.0))) {
        d2 += (z - prev).norm_sqr() / h;
        prev = *z;
    }
    Ok((l / k).sqrt() * d2.sqrt() + (k * l).sqrt() * l2.sqrt())
}

/// Sparse map given by `(row, col, value)` triplets.
#[derive(Debug, Clone)]
struct Coupling {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        for &(r, c, v) in &self.entries {
            y[r] += x[c] * v;
        }
        y
    }

    fn apply_transpose(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.cols];
        for &(r, c, v) in &self.entries {
            y[c] += x[r] * v;
        }
        y
    }
}

/// Everything the glued solve needs at fixed `(k, L)`.
#[derive(Debug, Clone)]
pub struct SheetSetup {
    pub k: f64,
    pub cutoffs: CutoffPair,
    /// Inner truncation `Xi`.
    pub xi_max: f64,
    pub inner_grid: Grid,
    /// `Phi0` with `||Phi0||_H1 = 1`.
    pub phi0: Vec<Complex64>,
    pub phi0_mode: NeutralMode,
    /// Width-extrapolated `alpha0`.
    pub alpha0: f64,
    /// Discrete eigenvalue of the truncated inner problem.
    pub alpha0_sq: f64,
    pub inner: RayleighOperators,
    pub lambda0: SpectralCoefficientLambda,
    pub channel: RayleighOperators,
    /// Channel node `i` sits at inner node `i + offset`.
    pub offset: usize,
    /// `chi_out` commutator, channel -> inner, `xi` units.
    b_forcing: Coupling,
    /// `chi_in` commutator, inner -> channel, `y` units.
    c_forcing: Coupling,
    chi_in_nodes: Vec<f64>,
    chi_out_nodes: Vec<f64>,
}

impl SheetSetup {
    pub fn new(base: &ShearProfile, k: f64, l: f64, h_xi: f64) -> Result<Self> {
        Self::with_cutoffs(base, build_cutoffs(k, l)?, h_xi)
    }

    pub fn with_cutoffs(base: &ShearProfile, cutoffs: CutoffPair, h_xi: f64) -> Result<Self> {
        if !base.is_line() {
            return Err(Error::InvalidProfile("the sheet construction needs a line profile".into()));
        }
        if !(h_xi > 0.0 && h_xi < 0.5) {
            return Err(Error::InvalidRange(format!("inner spacing {h_xi} must lie in (0, 0.5)")));
        }
        let k = cutoffs.k;
        let cells = (2.0 * k / h_xi).round() as usize;
        let channel_grid = Grid::channel(cells - 1)?;
        let h = channel_grid.h * k;
        let n = channel_grid.n;
        let target = (2.0 * cutoffs.l_eff).max(16.0).max(k + h);
        let offset = ((target - k) / h).ceil().max(1.0) as usize;
        let xi_max = k + offset as f64 * h;
        let inner_grid = Grid::new(n + 2 * offset, (-xi_max, xi_max))?;
        let limit = line_eigenvalue_limit(base, &LINE_WIDTHS, h)?;
        let phi0_mode = solve_truncated_line(base, xi_max, &inner_grid)?;
        let alpha0_sq = phi0_mode.alpha_sq;
        if xi_max < 8.0 / alpha0_sq.sqrt() {
            return Err(Error::InvalidRange(format!("inner truncation {xi_max} is below 8 / alpha0")));
        }
        let l2_mode = phi0_mode.renormalized(Normalization::L2Unit)?;
        let inner = RayleighOperators::new(base, &l2_mode)?;
        let lambda0 = lambda_limit(base, &l2_mode, &LAMBDA_TAUS)?;
        let channel_profile = rescale_profile(base, k)?;
        let channel_mode = solve_neutral(&channel_profile, &channel_grid)?;
        let channel = RayleighOperators::new(&channel_profile, &channel_mode)?;

        let y_at = |i: isize| -1.0 + (i + 1) as f64 * channel_grid.h;
        let chi_in_nodes: Vec<f64> = (-1..=n as isize).map(|i| cutoffs.chi_in(y_at(i), 0)).collect();
        let chi_out_nodes: Vec<f64> = (-1..=n as isize).map(|i| cutoffs.chi_out(y_at(i), 0)).collect();
        let (mut b_entries, mut c_entries) = (Vec::new(), Vec::new());
        let hy2 = channel_grid.h * channel_grid.h;
        for i in 0..n {
            let (lo, mid, hi) = (chi_out_nodes[i], chi_out_nodes[i + 1], chi_out_nodes[i + 2]);
            let j = i + offset;
            if i > 0 && lo != mid {
                b_entries.push((j, i - 1, (lo - mid) / (h * h)));
            }
            if i + 1 < n && hi != mid {
                b_entries.push((j, i + 1, (hi - mid) / (h * h)));
            }
            let (lo, mid, hi) = (chi_in_nodes[i], chi_in_nodes[i + 1], chi_in_nodes[i + 2]);
            if lo != mid {
                c_entries.push((i, j - 1, (lo - mid) / hy2));
            }
            if hi != mid {
                c_entries.push((i, j + 1, (hi - mid) / hy2));
            }
        }
        let n_in = inner_grid.n;
        Ok(Self {
            k,
            cutoffs,
            xi_max,
            inner_grid,
            phi0: phi0_mode.phi.iter().map(|p| Complex64::new(*p, 0.0)).collect(),
            phi0_mode,
            alpha0: limit.alpha0,
            alpha0_sq,
            inner,
            lambda0,
            channel,
            offset,
            b_forcing: Coupling { rows: n_in, cols: n, entries: b_entries },
            c_forcing: Coupling { rows: n, cols: n_in, entries: c_entries },
            chi_in_nodes: chi_in_nodes[1..=n].to_vec(),
            chi_out_nodes: chi_out_nodes[1..=n].to_vec(),
        })
    }

    pub fn alpha_tilde_sq(&self) -> f64 {
        self.channel.mode.alpha_sq
    }

    pub fn l_eff(&self) -> f64 {
        self.cutoffs.l_eff
    }

    /// `delta = eps/k^2 - (alpha~^2/k^2 - alpha0^2)`.
    pub fn delta(&self, eps: f64) -> f64 {
        let k2 = self.k * self.k;
        eps / k2 - (self.alpha_tilde_sq() / k2 - self.alpha0_sq)
    }

    /// `e^{-alpha0 Xi}`, the size of the kernel tail at the truncation.
    pub fn tail_bound(&self) -> f64 {
        (-self.alpha0_sq.sqrt() * self.xi_max).exp()
    }

    fn outer_operator(&self, eps: f64) -> Result<TridiagonalOperator> {
        let shift = self.alpha_tilde_sq() - eps;
        if !(eps < 0.5 * self.alpha_tilde_sq()) {
            return Err(Error::InvalidRange(format!("outer solve needs eps < alpha~^2 / 2, got {eps}")));
        }
        Ok(TridiagonalOperator::shifted_laplacian(&self.channel.grid, shift))
    }

    /// `B phi_out = T^{-1} K [D^2, chi_out] phi_out` on the inner lattice.
    fn apply_b(&self, phi_out: &[Complex64]) -> Vec<Complex64> {
        let f = self.b_forcing.apply(phi_out);
        let kf = inner_helmholtz(self.alpha0_sq.sqrt(), &f, &self.inner_grid).expect("inner grid");
        self.inner.solve_l_plus_p(&self.inner.k_inverse.apply(&kf)).expect("inner grid")
    }

    /// `C Upsilon`: the outer solve driven by `[D^2, chi_in] Upsilon`.
    fn apply_c(&self, outer: &TridiagonalOperator, upsilon: &[Complex64]) -> Result<Vec<Complex64>> {
        helmholtz_solve(outer, &self.c_forcing.apply(upsilon))
    }

    fn inner_multiplier(&self, delta: f64, c: Complex64) -> Result<Vec<Complex64>> {
        Ok(self.inner.coefficient_difference(c)?.into_iter().map(|d| d + delta).collect())
    }

    /// `phi = chi_in (Phi0 + Psi)(k .) + chi_out phi_out` on the channel grid.
    pub fn assemble(&self, psi: &[Complex64], phi_out: &[Complex64]) -> Result<Vec<Complex64>> {
        self.inner_grid.check_len(psi.len())?;
        self.channel.grid.check_len(phi_out.len())?;
        Ok((0..self.channel.n())
            .map(|i| {
                let j = i + self.offset;
                (self.phi0[j] + psi[j]) * self.chi_in_nodes[i] + phi_out[i] * self.chi_out_nodes[i]
            })
            .collect())
    }

    /// Relative residual of the channel's discrete Rayleigh equation at
    /// `alpha^2 = alpha~^2 - eps`.
    pub fn channel_residual(&self, phi: &[Complex64], eps: f64, c: Complex64) -> Result<f64> {
        let ops = &self.channel;
        let base = TridiagonalOperator::shifted_laplacian(&ops.grid, self.alpha_tilde_sq() - eps).apply(phi);
        let w: Vec<Complex64> = ops
            .velocity
            .iter()
            .zip(&ops.potential)
            .zip(phi)
            .map(|((u, v), p)| {
                let d = Complex64::new(*u, 0.0) - c;
                if d.norm() == 0.0 {
                    Err(Error::DivergentCoefficient { y: 0.0 })
                } else {
                    Ok(p * (u * v) / d)
                }
            })
            .collect::<Result<_>>()?;
        let sup = |v: &[Complex64]| v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let r: Vec<Complex64> = base.iter().zip(&w).map(|(a, b)| a + b).collect();
        Ok(sup(&r) / sup(&base).max(sup(&w)).max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluedSolution {
    pub k: f64,
    pub l: f64,
    pub l_eff: f64,
    pub eps: f64,
    pub delta: f64,
    pub c: Complex64,
    /// Inner correction on the inner lattice.
    pub psi: Vec<Complex64>,
    /// Outer part on the channel grid.
    pub phi_out: Vec<Complex64>,
    pub assembled: Vec<Complex64>,
    pub psi_h1: f64,
    pub phiout_z: f64,
    /// `G = (Psi, Phi0)`.
    pub g: Complex64,
    pub assembled_residual: f64,
    pub block_iterations: usize,
    pub block_contraction: f64,
    /// `(psi_h1 + phiout_z) / (eps/k^2 + |alpha~^2/k^2 - alpha0^2| + |c| + L_eff^{-1/2})`.
    pub multiscale_constant: f64,
    pub winding: Option<i64>,
    pub certificate_radius: Option<f64>,
    pub secant_iterations: usize,
}

/// Fixed-point iteration for `Psi = A(Phi0 + Psi) + B phi_out`,
/// `phi_out = C(Phi0 + Psi)` with `A = (L0 + P0)^{-1} (delta + U''/U - U''/(U - c))`.
pub fn solve_block_system(setup: &SheetSetup, eps: f64, delta: f64, c: Complex64) -> Result<GluedSolution> {
    let outer = setup.outer_operator(eps)?;
    let m = setup.inner_multiplier(delta, c)?;
    let n_in = setup.inner_grid.n;
    let n_out = setup.channel.n();
    let mut psi = vec![Complex64::new(0.0, 0.0); n_in];
    let mut phi_out = vec![Complex64::new(0.0, 0.0); n_out];
    let mut previous_update = f64::INFINITY;
    let mut ratio = 0.0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let full: Vec<Complex64> = setup.phi0.iter().zip(&psi).map(|(a, b)| a + b).collect();
        let forced: Vec<Complex64> = full.iter().zip(&m).map(|(f, m)| f * m).collect();
        let mut next_psi = setup.inner.solve_l_plus_p(&forced)?;
        for (p, b) in next_psi.iter_mut().zip(setup.apply_b(&phi_out)) {
            *p += b;
        }
        let next_out = setup.apply_c(&outer, &full)?;
        let d_psi: Vec<Complex64> = next_psi.iter().zip(&psi).map(|(a, b)| a - b).collect();
        let d_out: Vec<Complex64> = next_out.iter().zip(&phi_out).map(|(a, b)| a - b).collect();
        let update = norm(&d_psi, &setup.inner_grid, NormKind::H1)? + z_norm(&d_out, &setup.channel.grid, setup.k, setup.l_eff())?;
        psi = next_psi;
        phi_out = next_out;
        if iterations > 1 {
            ratio = update / previous_update;
        }
        if update <= BLOCK_TOL {
            break;
        }
        if !update.is_finite() || (iterations > 4 && ratio >= 1.0) {
            return Err(Error::BlockNotContracting { ratio });
        }
        if iterations >= BLOCK_MAX_ITERATIONS {
            return Err(Error::BlockNotContracting { ratio });
        }
        previous_update = update;
    }
    let psi_h1 = norm(&psi, &setup.inner_grid, NormKind::H1)?;
    let phiout_z = z_norm(&phi_out, &setup.channel.grid, setup.k, setup.l_eff())?;
    let g = inner_product(&psi, &setup.phi0, &setup.inner_grid, NormKind::L2)?;
    let assembled = setup.assemble(&psi, &phi_out)?;
    let assembled_residual = if c == Complex64::new(0.0, 0.0) && eps == 0.0 {
        setup.channel_residual(&assembled, 0.0, Complex64::new(0.0, 1e-300)).unwrap_or(f64::NAN)
    } else {
        setup.channel_residual(&assembled, eps, c)?
    };
    let k2 = setup.k * setup.k;
    let scale = eps / k2 + (setup.alpha_tilde_sq() / k2 - setup.alpha0_sq).abs() + c.norm() + setup.l_eff().powf(-0.5);
    Ok(GluedSolution {
        k: setup.k,
        l: setup.cutoffs.l,
        l_eff: setup.l_eff(),
        eps,
        delta,
        c,
        psi,
        phi_out,
        assembled,
        psi_h1,
        phiout_z,
        g,
        assembled_residual,
        block_iterations: iterations,
        block_contraction: ratio,
        multiscale_constant: (psi_h1 + phiout_z) / scale,
        winding: None,
        certificate_radius: None,
        secant_iterations: 0,
    })
}

/// Inner prediction `c~ = -delta / lambda0`.
pub fn sheet_prediction(setup: &SheetSetup, eps: f64) -> Result<Complex64> {
    predict_c_from(setup.lambda0.as_complex, setup.delta(eps))
}

/// Root of `G(delta, c) = (Psi, Phi0)` near `-delta / lambda0`, certified by
/// winding number 1 on `D(c~, delta / (2 |lambda0|))`.
pub fn solve_sheet_reduced(setup: &SheetSetup, eps: f64, tol: f64) -> Result<GluedSolution> {
    let delta = setup.delta(eps);
    if !(delta > 0.0) {
        return Err(Error::InvalidRange(format!("delta = {delta} must be positive")));
    }
    let center = sheet_prediction(setup, eps)?;
    let radius = delta / (2.0 * setup.lambda0.as_complex.norm());
    let g = |c: Complex64| -> Result<Complex64> {
        if !(c.im > 0.0) {
            return Err(Error::InvalidRange(format!("G needs Im c > 0, got {c}")));
        }
        Ok(solve_block_system(setup, eps, delta, c)?.g)
    };
    let (c, _, iterations) = secant_root(g, center, tol, delta)?;
    let mut n = DEFAULT_WINDING_SAMPLES;
    let w = loop {
        match winding_of(g, center, radius, n) {
            Err(Error::PhaseUnwrapAmbiguous { .. }) if n < 4096 => n *= 2,
            other => break other?,
        }
    };
    if w.winding != 1 || (c - center).norm() >= radius {
        return Err(Error::WindingMismatch { winding: if w.winding != 1 { w.winding } else { 0 } });
    }
    let mut solution = solve_block_system(setup, eps, delta, c)?;
    solution.winding = Some(w.winding);
    solution.certificate_radius = Some(radius);
    solution.secant_iterations = iterations;
    Ok(solution)
}

/// Power iteration for `sup |A x|_1 / |x|_2` with Gram matrices
/// (tridiagonal, symmetric positive definite) for both norms.
fn gram_norm<F, G>(apply: F, apply_transpose: G, gram_out: &TridiagonalOperator, gram_in: &TridiagonalOperator, start: Vec<Complex64>) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    G: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let mut x = start;
    let mut sigma_sq = 0.0;
    for _ in 0..PROBE_ITERATIONS {
        let ax = apply(&x)?;
        let num = crate::discretization::tridiag::dot(&ax, &gram_out.apply(&ax)).re;
        let den = crate::discretization::tridiag::dot(&x, &gram_in.apply(&x)).re;
        sigma_sq = num / den;
        let z = helmholtz_solve(gram_in, &apply_transpose(&gram_out.apply(&ax))?)?;
        let s = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(s > 0.0) {
            return Ok(0.0);
        }
        x = z.into_iter().map(|v| v / s).collect();
    }
    Ok(sigma_sq.sqrt())
}

fn h1_gram(grid: &Grid) -> TridiagonalOperator {
    let mut g = TridiagonalOperator::shifted_laplacian(grid, 1.0);
    g.diagonal.iter_mut().for_each(|d| *d *= grid.h);
    g.off_diagonal.iter_mut().for_each(|d| *d *= grid.h);
    g
}

/// Gram matrix of the Hilbert norm `(L/k) |f'|^2 + k L |f|^2`, which is
/// equivalent to the Z norm within a factor `sqrt 2`.
fn z_gram(grid: &Grid, k: f64, l: f64) -> TridiagonalOperator {
    let mut g = TridiagonalOperator::shifted_laplacian(grid, k * k);
    let s = grid.h * l / k;
    g.diagonal.iter_mut().for_each(|d| *d *= s);
    g.off_diagonal.iter_mut().for_each(|d| *d *= s);
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingNorms {
    pub l: f64,
    /// `||B||_{Z -> H1}`.
    pub b: f64,
    /// `||C||_{H1 -> Z}`.
    pub c: f64,
}

/// Power-iteration estimates of the coupling operators `B` and `C`.
pub fn coupling_norms(setup: &SheetSetup, eps: f64) -> Result<CouplingNorms> {
    let outer = setup.outer_operator(eps)?;
    let gin = h1_gram(&setup.inner_grid);
    let gz = z_gram(&setup.channel.grid, setup.k, setup.l_eff());
    let alpha0 = setup.alpha0_sq.sqrt();
    let b = gram_norm(
        |x| Ok(setup.apply_b(x)),
        |y| {
            let s = setup.inner.solve_l_plus_p(y)?;
            let kk = inner_helmholtz(alpha0, &setup.inner.k_inverse.apply(&s), &setup.inner_grid)?;
            Ok(setup.b_forcing.apply_transpose(&kk))
        },
        &gin,
        &gz,
        vec![Complex64::new(1.0, 0.0); setup.channel.n()],
    )?;
    let c = gram_norm(
        |x| setup.apply_c(&outer, x),
        |y| Ok(setup.c_forcing.apply_transpose(&helmholtz_solve(&outer, y)?)),
        &gz,
        &gin,
        vec![Complex64::new(1.0, 0.0); setup.inner_grid.n],
    )?;
    Ok(CouplingNorms { l: setup.l_eff(), b, c })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingScan {
    pub k: f64,
    pub rows: Vec<CouplingNorms>,
    pub slope_b: f64,
    pub slope_c: f64,
}

/// Coupling norms at fixed `k` over several `L`, with log-log slopes.
pub fn coupling_scan(base: &ShearProfile, k: f64, ls: &[f64], eps: f64, h_xi: f64) -> Result<CouplingScan> {
    let rows: Vec<CouplingNorms> = ls
        .par_iter()
        .map(|&l| coupling_norms(&SheetSetup::new(base, k, l, h_xi)?, eps))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.l.ln()).collect();
    let yb: Vec<f64> = rows.iter().map(|r| r.b.ln()).collect();
    let yc: Vec<f64> = rows.iter().map(|r| r.c.ln()).collect();
    Ok(CouplingScan { k, slope_b: fit_slope(&x, &yb), slope_c: fit_slope(&x, &yc), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetScanRow {
    pub k: f64,
    pub alpha_tilde: f64,
    pub alpha_ratio: f64,
    pub eps: f64,
    pub im_c_channel: f64,
    pub im_c_glued: f64,
    pub c_channel: Complex64,
    pub c_glued: Complex64,
    /// `alpha Im c` with `alpha^2 = alpha~^2 - eps`.
    pub growth_rate: f64,
    pub psi_h1: f64,
    pub phiout_z: f64,
    pub residual: f64,
    pub multiscale_constant: f64,
    pub xi_max: f64,
    pub lambda0: Complex64,
    pub certificate_radius: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetScan {
    pub eps_hat: f64,
    pub l: f64,
    pub h_xi: f64,
    pub alpha0: f64,
    pub rows: Vec<SheetScanRow>,
}

fn scan_row(base: &ShearProfile, k: f64, eps_hat: f64, l: f64, h_xi: f64) -> SheetScanRow {
    let eps = eps_hat * k * k;
    let mut row = SheetScanRow {
        k,
        alpha_tilde: f64::NAN,
        alpha_ratio: f64::NAN,
        eps,
        im_c_channel: f64::NAN,
        im_c_glued: f64::NAN,
        c_channel: Complex64::new(f64::NAN, f64::NAN),
        c_glued: Complex64::new(f64::NAN, f64::NAN),
        growth_rate: f64::NAN,
        psi_h1: f64::NAN,
        phiout_z: f64::NAN,
        residual: f64::NAN,
        multiscale_constant: f64::NAN,
        xi_max: f64::NAN,
        lambda0: Complex64::new(f64::NAN, f64::NAN),
        certificate_radius: f64::NAN,
        failure: None,
    };
    let setup = match SheetSetup::new(base, k, l, h_xi) {
        Ok(s) => s,
        Err(e) => {
            row.failure = Some(format!("setup: {e}"));
            return row;
        }
    };
    let alpha_tilde_sq = setup.alpha_tilde_sq();
    row.alpha_tilde = alpha_tilde_sq.sqrt();
    row.alpha_ratio = row.alpha_tilde / k;
    row.xi_max = setup.xi_max;
    row.lambda0 = setup.lambda0.as_complex;
    let mut failures = Vec::new();
    let channel = RayleighOperators::with_projection_weight(&setup.channel.profile, &setup.channel.mode, alpha_tilde_sq);
    let solved = channel.and_then(|ops| {
        let lam = lambda_limit(&ops.profile, &ops.mode, &LAMBDA_TAUS)?;
        solve_reduced(&ops, &lam, eps, 1e-10)
    });
    match solved {
        Ok(p) => {
            row.c_channel = p.c;
            row.im_c_channel = p.c.im;
        }
        Err(e) => failures.push(format!("channel: {e}")),
    }
    match solve_sheet_reduced(&setup, eps, 1e-10) {
        Ok(s) => {
            row.c_glued = s.c;
            row.im_c_glued = s.c.im;
            row.growth_rate = (alpha_tilde_sq - eps).sqrt() * s.c.im;
            row.psi_h1 = s.psi_h1;
            row.phiout_z = s.phiout_z;
            row.residual = s.assembled_residual;
            row.multiscale_constant = s.multiscale_constant;
            row.certificate_radius = s.certificate_radius.unwrap_or(f64::NAN);
        }
        Err(e) => failures.push(format!("glued: {e}")),
    }
    if !failures.is_empty() {
        row.failure = Some(failures.join("; "));
    }
    row
}

/// Channel and glued solves for each `k` at `eps = eps_hat k^2`.
pub fn scaling_scan(base: &ShearProfile, k_list: &[f64], eps_hat: f64, l: f64, h_xi: f64, parallel: bool) -> Result<SheetScan> {
    let limit = line_eigenvalue_limit(base, &LINE_WIDTHS, h_xi)?;
    if !(eps_hat > 0.0 && eps_hat < 0.5 * limit.alpha0_sq) {
        return Err(Error::InvalidRange(format!("eps_hat = {eps_hat} must lie in (0, alpha0^2 / 2)")));
    }
    if k_list.is_empty() || k_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidRange("k list must be non-empty and increasing".into()));
    }
    let rows = if parallel {
        k_list.par_iter().map(|&k| scan_row(base, k, eps_hat, l, h_xi)).collect()
    } else {
        k_list.iter().map(|&k| scan_row(base, k, eps_hat, l, h_xi)).collect()
    };
    Ok(SheetScan { eps_hat, l, h_xi, alpha0: limit.alpha0, rows })
}
