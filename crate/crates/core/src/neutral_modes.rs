//! Neutral modes: the ground state of `-D^2 + U''/U`, on the channel and on
//! truncated line domains.

use serde::{Deserialize, Serialize};

use crate::discretization::{inner_product_real, norm_real, Grid, NormKind, TridiagonalOperator};
use crate::error::{Error, Result};
use crate::profiles::{check_assumptions, ShearProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    L2Unit,
    H1Unit,
}

impl Normalization {
    pub fn norm_kind(self) -> NormKind {
        match self {
            Normalization::L2Unit => NormKind::L2,
            Normalization::H1Unit => NormKind::H1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutralMode {
    /// Maximal eigenvalue (`alpha~^2` on the channel, `beta_A^2` on a line).
    pub alpha_sq: f64,
    pub phi: Vec<f64>,
    pub grid: Grid,
    /// `||(A + alpha_sq) phi|| / (||A||_inf ||phi||)` for the discrete operator `A`.
    pub residual: f64,
    pub normalization: Normalization,
}

impl NeutralMode {
    /// Copy renormalized in another norm.
    pub fn renormalized(&self, normalization: Normalization) -> Result<Self> {
        let s = norm_real(&self.phi, &self.grid, normalization.norm_kind())?;
        Ok(Self { phi: self.phi.iter().map(|v| v / s).collect(), normalization, ..self.clone() })
    }
}

/// Node values of `U''/U`, averaged over each grid cell so that curvature
/// jumps of piecewise profiles are resolved to second order.
pub fn potential(profile: &ShearProfile, grid: &Grid) -> Result<Vec<f64>> {
    let half = 0.5 * grid.h;
    let (lo, hi) = grid.interval;
    grid.nodes
        .iter()
        .map(|&y| Ok(-profile.ratio_average((y - half).max(lo), (y + half).min(hi))?))
        .collect()
}

/// Discrete operator `-D^2 + diag(U''/U)`.
pub fn rayleigh_operator(profile: &ShearProfile, grid: &Grid) -> Result<TridiagonalOperator> {
    TridiagonalOperator::helmholtz(grid, &potential(profile, grid)?)
}

/// Gradient-form quotient `(sum (dphi)^2 / h^2 + sum V phi^2) / sum phi^2`.
fn discrete_quotient(potential: &[f64], phi: &[f64], h: f64) -> f64 {
    let n = phi.len();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { phi[i as usize] };
    let grad: f64 = (-1..n as isize).map(|i| (at(i + 1) - at(i)).powi(2)).sum::<f64>() / (h * h);
    let pot: f64 = potential.iter().zip(phi).map(|(v, p)| v * p * p).sum();
    let mass: f64 = phi.iter().map(|p| p * p).sum();
    (grad + pot) / mass
}

/// Ground state of the symmetric tridiagonal `op`: Sturm bisection for the
/// eigenvalue, inverse iteration for the vector. Returns `(lambda_min, phi)`
/// with `phi` positive and unnormalized.
fn ground_state(op: &TridiagonalOperator, potential: &[f64], h: f64) -> Result<(f64, Vec<f64>)> {
    let lambda = op.smallest_eigenvalue();
    let scale = op.inf_norm().max(1.0);
    let shift = lambda - 1e-10 * scale;
    let shifted = TridiagonalOperator {
        diagonal: op.diagonal.iter().map(|d| d - shift).collect(),
        off_diagonal: op.off_diagonal.clone(),
    };
    let mut phi = vec![1.0; op.len()];
    for _ in 0..4 {
        phi = crate::discretization::tridiag::helmholtz_solve_real(&shifted, &phi)?;
        let m = phi.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        phi.iter_mut().for_each(|v| *v /= m);
    }
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((discrete_quotient(potential, &phi, h), phi))
}

fn relative_residual(op: &TridiagonalOperator, phi: &[f64], eigenvalue: f64) -> f64 {
    let r = op.apply_real(phi);
    let num = r.iter().zip(phi).map(|(a, p)| (a - eigenvalue * p).powi(2)).sum::<f64>().sqrt();
    let den = op.inf_norm() * phi.iter().map(|p| p * p).sum::<f64>().sqrt();
    num / den
}

fn solve_mode(profile: &ShearProfile, grid: &Grid, normalization: Normalization) -> Result<(f64, NeutralMode)> {
    let v = potential(profile, grid)?;
    let op = TridiagonalOperator::helmholtz(grid, &v)?;
    let (lambda, phi) = ground_state(&op, &v, grid.h)?;
    let s = norm_real(&phi, grid, normalization.norm_kind())?;
    let phi: Vec<f64> = phi.iter().map(|p| p / s).collect();
    let residual = relative_residual(&op, &phi, lambda);
    Ok((lambda, NeutralMode { alpha_sq: -lambda, phi, grid: grid.clone(), residual, normalization }))
}

/// Maximal `alpha~^2` with `-phi'' + (U''/U) phi = -alpha~^2 phi` on the
/// channel, L2-normalized with `phi > 0`.
pub fn solve_neutral(profile: &ShearProfile, grid: &Grid) -> Result<NeutralMode> {
    if profile.is_line() {
        return Err(Error::InvalidProfile("channel solve needs a profile on (-1, 1)".into()));
    }
    let report = check_assumptions(profile, 1001)?;
    if !report.pass {
        return Err(Error::InvalidProfile(format!(
            "assumptions fail: {} sign changes, min ratio {}",
            report.sign_changes, report.min_ratio
        )));
    }
    let (_, mode) = solve_mode(profile, grid, Normalization::L2Unit)?;
    if mode.alpha_sq <= 0.0 {
        return Err(Error::NoUnstableNeutralMode { alpha_sq: mode.alpha_sq });
    }
    Ok(mode)
}

/// `int |phi'|^2 + int (U''/U) phi^2` for an L2-unit `phi`.
pub fn rayleigh_quotient(phi: &[f64], profile: &ShearProfile, grid: &Grid) -> Result<f64> {
    grid.check_len(phi.len())?;
    let mass = norm_real(phi, grid, NormKind::L2)?;
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidRange(format!("rayleigh quotient needs a unit vector, got norm {mass}")));
    }
    let v = potential(profile, grid)?;
    let grad = inner_product_real(phi, phi, grid, NormKind::H1)? - inner_product_real(phi, phi, grid, NormKind::L2)?;
    let pot: f64 = v.iter().zip(phi).map(|(v, p)| v * p * p).sum::<f64>() * grid.h;
    Ok(grad + pot)
}

/// Grid on `(-A, A)` with spacing as close to `h` as possible and, when
/// `1/h` is an integer, nodes on the lattice `h Z` so that grids for
/// different widths are nested.
pub fn line_grid(half_width: f64, h: f64) -> Result<Grid> {
    let cells = (2.0 * half_width / h).round() as usize;
    Grid::new(cells.saturating_sub(1), (-half_width, half_width))
}

/// Maximal `beta_A^2` of `-Psi'' + M Psi = -beta^2 Psi` on `(-A, A)` with
/// Dirichlet data, `M = U0''/U0`; H1-normalized.
pub fn solve_truncated_line(profile: &ShearProfile, half_width: f64, grid: &Grid) -> Result<NeutralMode> {
    if !profile.is_line() {
        return Err(Error::OutOfDomain { y: half_width, lo: profile.domain.0, hi: profile.domain.1 });
    }
    let (s_lo, s_hi) = profile.ratio_support();
    if half_width < 4.0 || -half_width >= s_lo || half_width <= s_hi {
        return Err(Error::InvalidRange(format!("truncation half-width {half_width} must be >= 4")));
    }
    if grid.interval != (-half_width, half_width) {
        return Err(Error::InvalidRange(format!("grid interval {:?} does not match A = {half_width}", grid.interval)));
    }
    let (_, mode) = solve_mode(profile, grid, Normalization::H1Unit)?;
    if mode.alpha_sq <= 0.0 {
        return Err(Error::NoBoundState { beta_sq: mode.alpha_sq });
    }
    Ok(mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineLimit {
    pub alpha0: f64,
    pub alpha0_sq: f64,
    /// `(A, beta_A^2)`.
    pub table: Vec<(f64, f64)>,
    pub monotone: bool,
    /// The mode on the widest domain.
    pub mode: NeutralMode,
}

/// `beta_A^2` for increasing `A` at fixed spacing `h`, extrapolated to
/// `A = infinity` by Aitken's delta-squared on the last three entries.
pub fn line_eigenvalue_limit(profile: &ShearProfile, widths: &[f64], h: f64) -> Result<LineLimit> {
    if !profile.is_line() {
        return Err(Error::OutOfDomain { y: widths.last().copied().unwrap_or(0.0), lo: profile.domain.0, hi: profile.domain.1 });
    }
    if widths.len() < 3 || widths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotConverging(format!("widths {widths:?} must be strictly increasing with at least 3 entries")));
    }
    let mut table = Vec::with_capacity(widths.len());
    let mut last = None;
    for &a in widths {
        let grid = line_grid(a, h)?;
        let mode = solve_truncated_line(profile, a, &grid)?;
        table.push((a, mode.alpha_sq));
        last = Some(mode);
    }
    let values: Vec<f64> = table.iter().map(|t| t.1).collect();
    let floor = 1e-13 * values.last().unwrap().abs().max(1.0);
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= -floor);
    if diffs.windows(2).any(|d| d[1].abs() > floor && d[1].abs() >= d[0].abs()) {
        return Err(Error::NotConverging(format!("successive differences {diffs:?} do not decrease")));
    }
    let k = values.len();
    let (x0, x1, x2) = (values[k - 3], values[k - 2], values[k - 1]);
    let denom = (x2 - x1) - (x1 - x0);
    let limit = if denom.abs() > floor && (x2 - x1).abs() > floor {
        x2 - (x2 - x1).powi(2) / denom
    } else {
        x2
    };
    Ok(LineLimit { alpha0: limit.sqrt(), alpha0_sq: limit, table, monotone, mode: last.unwrap() })
}
