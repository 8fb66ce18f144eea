//! The Plemelj-Sochocki limit `lambda = lim Gamma(c)` as `c -> 0` in the
//! upper half-plane, and diagnostics of the near-singular coefficient
//! `1/(U - c)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::quadrature::{near_singular_integral_with, pv_integral_with, NearSingularOptions};
use crate::discretization::{fourier_sine_coefficient, Grid, GridInterpolant};
use crate::error::{Error, Result};
use crate::neutral_modes::NeutralMode;
use crate::profiles::{continuous_ratio, eval_profile, ShearProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoefficientLambda {
    /// Principal-value part (extrapolated `Re Gamma`).
    #[serde(rename = "C")]
    pub c: f64,
    pub imag: f64,
    pub as_complex: Complex64,
    pub extrapolation_error: f64,
    /// Measured convergence order of `Gamma(i tau)` in `tau`.
    pub order: f64,
    /// `pi h(a) / |U'(a)|`.
    pub imag_cf: f64,
    /// `-p.v. int U'' phi^2 / U^2`.
    pub c_cf: f64,
    pub imag_discrepancy: f64,
    pub c_discrepancy: f64,
    /// `(tau, Gamma(i tau))`.
    pub table: Vec<(f64, Complex64)>,
}

/// Monotone stretch of `U` around `a`, clipped to where `U` varies.
fn local_monotone_range(profile: &ShearProfile) -> Result<(f64, f64)> {
    let (lo, hi) = profile.ratio_support();
    let lo = lo.max(profile.domain.0);
    let hi = hi.min(profile.domain.1);
    let slope = eval_profile(profile, profile.a, 1)?;
    let steps = 4096;
    let walk = |end: f64| -> Result<f64> {
        let dy = (end - profile.a) / steps as f64;
        let mut y = profile.a;
        for _ in 0..steps {
            let next = y + dy;
            if eval_profile(profile, next, 1)? * slope <= 0.0 {
                return Ok(y);
            }
            y = next;
        }
        Ok(end)
    };
    Ok((walk(lo)?, walk(hi)?))
}

/// The point `a'` near `a` with `U(a') = Re c`.
pub fn shifted_crossing(profile: &ShearProfile, c: Complex64) -> Result<f64> {
    let target = c.re;
    if target == 0.0 {
        return Ok(profile.a);
    }
    let (mut lo, mut hi) = local_monotone_range(profile)?;
    let f = |y: f64| eval_profile(profile, y, 0).map(|u| u - target);
    let (mut f_lo, f_hi) = (f(lo)?, f(hi)?);
    if !(f_lo * f_hi < 0.0) {
        return Err(Error::NoCrossing { c_r: target });
    }
    let mut y = profile.a;
    for _ in 0..200 {
        let fy = f(y)?;
        if fy.abs() <= 1e-12 * (1.0 + target.abs()) * 1e-1 || hi - lo < 1e-15 {
            return Ok(y);
        }
        if (fy < 0.0) == (f_lo < 0.0) {
            lo = y;
            f_lo = fy;
        } else {
            hi = y;
        }
        let d = eval_profile(profile, y, 1)?;
        let newton = y - fy / d;
        y = if d != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(y)
}

/// `h = (-U''/U) phi~^2` evaluated from the interpolated neutral mode.
struct Weight<'a> {
    profile: &'a ShearProfile,
    phi: GridInterpolant,
}

impl<'a> Weight<'a> {
    fn new(profile: &'a ShearProfile, mode: &NeutralMode) -> Self {
        Self { profile, phi: GridInterpolant::new(&mode.grid, &mode.phi) }
    }

    fn eval(&self, y: f64) -> f64 {
        let p = self.phi.eval(y);
        continuous_ratio(self.profile, y).unwrap_or(0.0) * p * p
    }
}

fn integration_range(profile: &ShearProfile, mode: &NeutralMode) -> (f64, f64) {
    let (lo, hi) = profile.ratio_support();
    (lo.max(mode.grid.interval.0), hi.min(mode.grid.interval.1))
}

/// `Gamma(c) = int h / (U - c)` with `h = (-U''/U) phi~^2`.
pub fn gamma(profile: &ShearProfile, mode: &NeutralMode, c: Complex64) -> Result<Complex64> {
    if !(c.im > 0.0) {
        return Err(Error::InvalidRange(format!("Gamma needs Im c > 0, got {c}")));
    }
    let weight = Weight::new(profile, mode);
    let a_prime = shifted_crossing(profile, c).unwrap_or(profile.a);
    let slope = eval_profile(profile, a_prime, 1)?.abs().max(1e-300);
    let options = NearSingularOptions { base_panels: 8, breakpoints: profile.seams() };
    near_singular_integral_with(
        |y| {
            let u = eval_profile(profile, y, 0).unwrap_or(0.0);
            (Complex64::new(u, 0.0) - c).inv() * weight.eval(y)
        },
        a_prime,
        c.im / slope,
        integration_range(profile, mode),
        &options,
    )
}

fn check_tau_sequence(taus: &[f64]) -> Result<()> {
    let bad = taus.len() < 2
        || taus.windows(2).any(|w| !(w[1] < w[0]))
        || taus.iter().any(|t| !(*t > 0.0))
        || taus[0] / taus[taus.len() - 1] < 100.0 * (1.0 - 1e-12)
        || taus[taus.len() - 1] < 1e-5 * (1.0 - 1e-12);
    if bad {
        return Err(Error::InvalidRange(format!(
            "tau sequence {taus:?} must decrease over at least two decades with smallest >= 1e-5"
        )));
    }
    Ok(())
}

/// `Gamma(i tau)` along the imaginary axis, extrapolated to `tau = 0`, with
/// the closed-form cross-checks of both parts.
pub fn lambda_limit(profile: &ShearProfile, mode: &NeutralMode, taus: &[f64]) -> Result<SpectralCoefficientLambda> {
    check_tau_sequence(taus)?;
    let values: Vec<Complex64> = taus
        .par_iter()
        .map(|&t| gamma(profile, mode, Complex64::new(0.0, t)))
        .collect::<Result<_>>()?;
    let k = values.len();
    let ratio = taus[k - 2] / taus[k - 1];
    let order = if k >= 3 {
        let d1 = (values[k - 2] - values[k - 3]).norm();
        let d2 = (values[k - 1] - values[k - 2]).norm();
        let r = taus[k - 3] / taus[k - 2];
        if d1 > 0.0 && d2 > 0.0 && d1 > d2 {
            ((d1 / d2).ln() / r.ln()).clamp(0.5, 4.0)
        } else {
            1.0
        }
    } else {
        1.0
    };
    let last = values[k - 1];
    let correction = (last - values[k - 2]) / (ratio.powf(order) - 1.0);
    let lambda = last + correction;

    let weight = Weight::new(profile, mode);
    let a = profile.a;
    let slope_a = eval_profile(profile, a, 1)?;
    let imag_cf = std::f64::consts::PI * weight.eval(a) / slope_a.abs();
    let range = integration_range(profile, mode);
    let c_cf = pv_integral_with(
        |y| {
            let d = y - a;
            let u = eval_profile(profile, y, 0).unwrap_or(0.0);
            let factor = if d.abs() <= profile.tol_a() || u == 0.0 { 1.0 / slope_a } else { d / u };
            Complex64::new(weight.eval(y) * factor, 0.0)
        },
        a,
        range,
        &profile.seams(),
    )?
    .re;

    if !(lambda.im > 0.0) {
        return Err(Error::ImagNotPositive { imag: lambda.im });
    }
    Ok(SpectralCoefficientLambda {
        c: lambda.re,
        imag: lambda.im,
        as_complex: lambda,
        extrapolation_error: correction.norm(),
        order,
        imag_cf,
        c_cf,
        imag_discrepancy: (lambda.im - imag_cf).abs(),
        c_discrepancy: (lambda.re - c_cf).abs(),
        table: taus.iter().copied().zip(values).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlemeljCheck {
    /// `-i pi f(0) + p.v. int f(x)/x`.
    pub target: Complex64,
    /// `(delta, eps, int f(x) / (x + delta + i eps))`.
    pub values: Vec<(f64, f64, Complex64)>,
    pub discrepancies: Vec<f64>,
    /// Least-squares slope of `log discrepancy` against `log eps`.
    pub observed_exponent: f64,
}

impl PlemeljCheck {
    pub fn finest_discrepancy(&self) -> f64 {
        self.discrepancies.last().copied().unwrap_or(f64::NAN)
    }
}

/// Least-squares slope of `y` against `x` (with intercept).
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Compares `int f(x)/(x + delta + i eps) dx` along a sequence
/// `(delta, eps) -> (0, 0+)` with its distributional limit. `kinks` lists
/// points where `f` is not smooth.
pub fn plemelj_limit_check<F: Fn(f64) -> f64 + Sync>(
    f: F,
    interval: (f64, f64),
    sequence: &[(f64, f64)],
    kinks: &[f64],
) -> Result<PlemeljCheck> {
    let (a, b) = interval;
    if !(a < 0.0 && b > 0.0) {
        return Err(Error::InvalidRange(format!("0 must lie inside [{a}, {b}]")));
    }
    if sequence.is_empty() || sequence.iter().any(|(_, e)| !(*e > 0.0)) {
        return Err(Error::InvalidRange("sequence needs eps > 0".into()));
    }
    let fc = |x: f64| Complex64::new(f(x), 0.0);
    let mut breaks = kinks.to_vec();
    breaks.push(0.0);
    let target = Complex64::new(0.0, -std::f64::consts::PI * f(0.0)) + pv_integral_with(fc, 0.0, interval, kinks)?;
    let options = NearSingularOptions { base_panels: 8, breakpoints: breaks };
    let values: Vec<(f64, f64, Complex64)> = sequence
        .par_iter()
        .map(|&(delta, eps)| {
            let shift = Complex64::new(delta, eps);
            near_singular_integral_with(|x| fc(x) / (shift + x), -delta, eps, interval, &options).map(|v| (delta, eps, v))
        })
        .collect::<Result<_>>()?;
    let discrepancies: Vec<f64> = values.iter().map(|(_, _, v)| (v - target).norm()).collect();
    let logs: Vec<(f64, f64)> = values
        .iter()
        .zip(&discrepancies)
        .filter(|(_, d)| **d > 0.0)
        .map(|((_, e, _), d)| (e.ln(), d.ln()))
        .collect();
    let observed_exponent = if logs.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
        fit_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(PlemeljCheck { target, values, discrepancies, observed_exponent })
}

/// `sup |1/(U - c) - 1/(U'(a')(y - a') - i c_I)|` and the same for the
/// imaginary part, over the grid nodes.
pub fn approximation_defect(profile: &ShearProfile, c: Complex64, grid: &Grid) -> Result<(f64, f64)> {
    if !(c.im > 0.0) {
        return Err(Error::InvalidRange(format!("approximation defect needs Im c > 0, got {c}")));
    }
    let a_prime = shifted_crossing(profile, c)?;
    let slope = eval_profile(profile, a_prime, 1)?;
    let mut sup_abs = 0.0f64;
    let mut sup_imag = 0.0f64;
    for &y in &grid.nodes {
        let u = eval_profile(profile, y, 0)?;
        let exact = (Complex64::new(u, 0.0) - c).inv();
        let linear = Complex64::new(slope * (y - a_prime), -c.im).inv();
        let d = exact - linear;
        sup_abs = sup_abs.max(d.norm());
        sup_imag = sup_imag.max(d.im.abs());
    }
    Ok((sup_abs, sup_imag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineCoefficientTable {
    /// `(m, |coef|, |coef| / ln(1 + m))`.
    pub rows: Vec<(usize, f64, f64)>,
    pub max_ratio: f64,
}

impl SineCoefficientTable {
    pub fn ratio_at(&self, m: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == m).map(|r| r.2)
    }

    /// Largest normalized ratio over `m_lo <= m <= m_hi`.
    pub fn max_ratio_between(&self, m_lo: usize, m_hi: usize) -> f64 {
        self.rows.iter().filter(|r| r.0 >= m_lo && r.0 <= m_hi).map(|r| r.2).fold(0.0, f64::max)
    }
}

/// Sine coefficients of `1/(U - c)` for `m = 1..=m_max`.
pub fn sine_coefficient_growth(profile: &ShearProfile, c: Complex64, m_max: usize, grid: &Grid) -> Result<SineCoefficientTable> {
    if m_max == 0 {
        return Err(Error::InvalidRange("m_max must be >= 1".into()));
    }
    if !(c.im > 0.0) {
        return Err(Error::InvalidRange(format!("sine coefficients need Im c > 0, got {c}")));
    }
    let f: Vec<Complex64> = grid
        .nodes
        .iter()
        .map(|&y| eval_profile(profile, y, 0).map(|u| (Complex64::new(u, 0.0) - c).inv()))
        .collect::<Result<_>>()?;
    let rows: Vec<(usize, f64, f64)> = (1..=m_max)
        .into_par_iter()
        .map(|m| {
            fourier_sine_coefficient(&f, m, grid).map(|v| {
                let a = v.norm();
                (m, a, a / (1.0 + m as f64).ln())
            })
        })
        .collect::<Result<_>>()?;
    let max_ratio = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(SineCoefficientTable { rows, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neutral_modes::solve_neutral;
    use std::f64::consts::PI;

    fn sine_mode(beta: f64, n: usize) -> (ShearProfile, NeutralMode) {
        let p = ShearProfile::sine(beta).unwrap();
        let m = solve_neutral(&p, &Grid::channel(n).unwrap()).unwrap();
        (p, m)
    }

    #[test]
    fn crossing_examples() {
        let p = ShearProfile::sine(2.0).unwrap();
        let a = shifted_crossing(&p, Complex64::new(0.1, 0.05)).unwrap();
        assert!((a + (0.1f64).asin() / 2.0).abs() < 1e-12);
        assert_eq!(shifted_crossing(&p, Complex64::new(0.0, 0.3)).unwrap(), 0.0);
        assert!(matches!(shifted_crossing(&p, Complex64::new(10.0, 1.0)), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn gamma_near_axis_and_symmetry() {
        let (p, m) = sine_mode(2.0, 2000);
        let g = gamma(&p, &m, Complex64::new(0.0, 1e-2)).unwrap();
        assert!((g.im - 2.0 * PI).abs() < 0.02 * 2.0 * PI);
        assert!(g.re.abs() < 1e-2);
        let c = Complex64::new(0.05, 0.05);
        let g1 = gamma(&p, &m, c).unwrap();
        let g2 = gamma(&p, &m, Complex64::new(-c.re, c.im)).unwrap();
        assert!((g2 + g1.conj()).norm() < 1e-8 * g1.norm());
    }

    #[test]
    fn gamma_smooth_regime_matches_simpson() {
        let (p, m) = sine_mode(2.0, 2000);
        let c = Complex64::new(0.0, 1.0);
        let g = gamma(&p, &m, c).unwrap();
        let w = Weight::new(&p, &m);
        let s = crate::discretization::simpson(
            |y| (Complex64::new(-(2.0 * y).sin(), 0.0) - c).inv() * w.eval(y),
            (-1.0, 1.0),
            20000,
        );
        assert!((g - s).norm() < 1e-9);
    }

    #[test]
    fn lambda_rejects_short_tau_range() {
        let (p, m) = sine_mode(2.0, 200);
        assert!(lambda_limit(&p, &m, &[1.0]).is_err());
        assert!(lambda_limit(&p, &m, &[1e-1, 1e-2]).is_err());
    }

    #[test]
    fn plemelj_constant_function() {
        let seq: Vec<(f64, f64)> = (1..=6).map(|k| (10f64.powi(-k), 10f64.powi(-k))).collect();
        let chk = plemelj_limit_check(|_| 1.0, (-1.0, 1.0), &seq, &[]).unwrap();
        assert!((chk.target - Complex64::new(0.0, -PI)).norm() < 1e-12);
        assert!(chk.finest_discrepancy() < 1e-5);
    }

    #[test]
    fn linear_profile_defect_vanishes() {
        let p = ShearProfile::linear();
        let g = Grid::channel(101).unwrap();
        let (sa, si) = approximation_defect(&p, Complex64::new(0.1, 0.01), &g).unwrap();
        assert!(sa < 1e-9 && si < 1e-9, "{sa} {si}");
    }

    #[test]
    fn smooth_coefficients_decay() {
        let p = ShearProfile::sine(2.0).unwrap();
        let g = Grid::channel(2000).unwrap();
        let t = sine_coefficient_growth(&p, Complex64::new(0.0, 1.0), 64, &g).unwrap();
        // Nonzero boundary values limit the decay to 1/m.
        assert!(t.rows[63].1 < 0.02 * t.rows[0].1);
        assert!(t.rows[32..].iter().all(|r| r.0 as f64 * r.1 < 1.0));
        assert!(sine_coefficient_growth(&p, Complex64::new(0.0, 1.0), 0, &g).is_err());
    }
}
