//! Analytic shear-velocity profiles `U(y)` with exact derivatives.
//!
//! Three families are provided: the sine profile `U(y) = -sin(beta y)` on the
//! channel `(-1, 1)`, whose neutral problem has a closed-form spectrum; the
//! sheet base profile on the whole line, `-sin(pi y / 4)` on `[-2, 2]` and
//! `+-1` outside; and the rescaled family `U(y) = U0(k y)` built from any line
//! profile. Custom profiles are finite trigonometric series, so every
//! derivative is still evaluated in closed form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order any family evaluates.
pub const MAX_DERIVATIVE_ORDER: usize = 3;

/// Finite series `c0 + c1 y + sum a_j sin(w_j y) + sum b_j cos(w_j y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub constant: f64,
    pub linear: f64,
    /// `(amplitude, angular frequency)` pairs.
    pub sines: Vec<(f64, f64)>,
    pub cosines: Vec<(f64, f64)>,
}

impl SeriesCoefficients {
    fn eval(&self, y: f64, order: usize) -> f64 {
        let mut value = match order {
            0 => self.constant + self.linear * y,
            1 => self.linear,
            _ => 0.0,
        };
        for &(amp, w) in &self.sines {
            let (s, c) = (w * y).sin_cos();
            let wn = w.powi(order as i32);
            value += amp
                * wn
                * match order % 4 {
                    0 => s,
                    1 => c,
                    2 => -s,
                    _ => -c,
                };
        }
        for &(amp, w) in &self.cosines {
            let (s, c) = (w * y).sin_cos();
            let wn = w.powi(order as i32);
            value += amp
                * wn
                * match order % 4 {
                    0 => c,
                    1 => -s,
                    2 => -c,
                    _ => s,
                };
        }
        value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `U(y) = -sin(beta y)` on `(-1, 1)`.
    Sine { beta: f64 },
    /// `U0(y) = -sin(pi y / 4)` on `[-2, 2]`, `1` for `y < -2`, `-1` for `y > 2`.
    SheetBase,
    /// `U(y) = U0(k y)` on `(-1, 1)` for a line profile `U0`.
    Rescaled { base: Box<ShearProfile>, k: f64 },
    Custom(SeriesCoefficients),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub family: Family,
    /// The single zero (and inflection point) of `U`.
    pub a: f64,
    /// Open domain; line profiles use infinite endpoints.
    pub domain: (f64, f64),
    pub derivative_order_available: usize,
    /// Global smoothness class `C^m` of the profile. The sheet profile is only
    /// `C^1`: its second derivative jumps at `|y| = 2` and the evaluator
    /// returns the one-sided value from the interior piece there.
    pub smoothness: usize,
}

/// Outcome of [`check_assumptions`]; failures are reported, not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub sign_changes: usize,
    pub min_ratio: f64,
    pub abs_u_prime_at_a: f64,
    pub pass: bool,
}

const SHEET_HALF_WIDTH: f64 = 2.0;
const SHEET_OMEGA: f64 = PI / 4.0;

impl ShearProfile {
    pub fn sine(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidProfile(format!("beta must be positive, got {beta}")));
        }
        Ok(Self {
            family: Family::Sine { beta },
            a: 0.0,
            domain: (-1.0, 1.0),
            derivative_order_available: MAX_DERIVATIVE_ORDER,
            smoothness: usize::MAX,
        })
    }

    pub fn sheet_base() -> Self {
        Self {
            family: Family::SheetBase,
            a: 0.0,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
            derivative_order_available: MAX_DERIVATIVE_ORDER,
            smoothness: 1,
        }
    }

    /// The linear profile `U(y) = y` on `(-1, 1)`.
    pub fn linear() -> Self {
        Self::custom(
            SeriesCoefficients { constant: 0.0, linear: 1.0, sines: vec![], cosines: vec![] },
            (-1.0, 1.0),
        )
        .expect("linear profile has a single zero")
    }

    /// Builds a custom series profile on a bounded domain; the zero is located
    /// by bracketing on a sample grid followed by bisection.
    pub fn custom(coefficients: SeriesCoefficients, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidProfile("custom profiles need a bounded domain".into()));
        }
        let samples = 4096;
        let step = (hi - lo) / samples as f64;
        let mut bracket = None;
        let mut prev = coefficients.eval(lo, 0);
        for i in 1..=samples {
            let y = lo + i as f64 * step;
            let cur = coefficients.eval(y, 0);
            if prev == 0.0 && i > 1 {
                bracket = Some((y - step, y - step));
                break;
            }
            if prev * cur < 0.0 {
                bracket = Some((y - step, y));
                break;
            }
            prev = cur;
        }
        let (mut l, mut r) =
            bracket.ok_or_else(|| Error::InvalidProfile("custom profile has no zero".into()))?;
        let fl = coefficients.eval(l, 0);
        for _ in 0..200 {
            if r - l <= f64::EPSILON * (1.0 + l.abs()) {
                break;
            }
            let m = 0.5 * (l + r);
            let fm = coefficients.eval(m, 0);
            if fm == 0.0 {
                l = m;
                r = m;
                break;
            }
            if (fm < 0.0) == (fl < 0.0) {
                l = m;
            } else {
                r = m;
            }
        }
        Ok(Self {
            family: Family::Custom(coefficients),
            a: 0.5 * (l + r),
            domain,
            derivative_order_available: MAX_DERIVATIVE_ORDER,
            smoothness: usize::MAX,
        })
    }

    pub fn is_line(&self) -> bool {
        self.domain.0.is_infinite() || self.domain.1.is_infinite()
    }

    /// Length scale used for the removable-singularity threshold at `a`.
    fn length_scale(&self) -> f64 {
        if self.is_line() {
            2.0 * SHEET_HALF_WIDTH
        } else {
            self.domain.1 - self.domain.0
        }
    }

    /// Half-width below which the ratio switches to its limit at `a`.
    pub fn tol_a(&self) -> f64 {
        1e-6 * self.length_scale()
    }

    /// Interval outside which `U'' = 0` (so `-U''/U` vanishes).
    pub fn ratio_support(&self) -> (f64, f64) {
        match &self.family {
            Family::SheetBase => (-SHEET_HALF_WIDTH, SHEET_HALF_WIDTH),
            Family::Rescaled { base, k } => {
                let (lo, hi) = base.ratio_support();
                ((lo / k).max(self.domain.0), (hi / k).min(self.domain.1))
            }
            _ => self.domain,
        }
    }

    /// Points where the second derivative may jump.
    pub fn seams(&self) -> Vec<f64> {
        match &self.family {
            Family::SheetBase => vec![-SHEET_HALF_WIDTH, SHEET_HALF_WIDTH],
            Family::Rescaled { base, k } => base
                .seams()
                .into_iter()
                .map(|s| s / k)
                .filter(|s| *s > self.domain.0 && *s < self.domain.1)
                .collect(),
            _ => vec![],
        }
    }

    fn eval_unchecked(&self, y: f64, order: usize) -> f64 {
        match &self.family {
            Family::Sine { beta } => {
                let (s, c) = (beta * y).sin_cos();
                let bn = beta.powi(order as i32);
                -bn * match order {
                    0 => s,
                    1 => c,
                    2 => -s,
                    _ => -c,
                }
            }
            Family::SheetBase => {
                if y < -SHEET_HALF_WIDTH {
                    if order == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if y > SHEET_HALF_WIDTH {
                    if order == 0 {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    let (s, c) = (SHEET_OMEGA * y).sin_cos();
                    let wn = SHEET_OMEGA.powi(order as i32);
                    -wn * match order {
                        0 => s,
                        1 => c,
                        2 => -s,
                        _ => -c,
                    }
                }
            }
            Family::Rescaled { base, k } => k.powi(order as i32) * base.eval_unchecked(k * y, order),
            Family::Custom(coefficients) => coefficients.eval(y, order),
        }
    }

    /// Continuous extension of `-U''/U`; see [`continuous_ratio`].
    pub fn ratio(&self, y: f64) -> Result<f64> {
        continuous_ratio(self, y)
    }

    /// Average of `-U''/U` over `[lo, hi]`, splitting at curvature seams so
    /// that piecewise-smooth profiles are integrated to full order.
    pub fn ratio_average(&self, lo: f64, hi: f64) -> Result<f64> {
        const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let mut cuts = vec![lo];
        cuts.extend(self.seams().into_iter().filter(|s| *s > lo && *s < hi));
        cuts.push(hi);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            let mid = 0.5 * (l + r);
            let half = 0.5 * (r - l);
            for (x, wt) in NODES.iter().zip(WEIGHTS.iter()) {
                total += wt * half * continuous_ratio(self, mid + half * x)?;
            }
        }
        Ok(total / (hi - lo))
    }
}

/// Evaluates `d^order U / dy^order` from the analytic family definition.
pub fn eval_profile(profile: &ShearProfile, y: f64, order: usize) -> Result<f64> {
    let (lo, hi) = profile.domain;
    if !(y >= lo && y <= hi) {
        return Err(Error::OutOfDomain { y, lo, hi });
    }
    if order > profile.derivative_order_available {
        return Err(Error::UnsupportedOrder { order, available: profile.derivative_order_available });
    }
    Ok(profile.eval_unchecked(y, order))
}

/// `-U''(y)/U(y)`, replaced by its limit `-U'''(a)/U'(a)` within `tol_a` of the zero.
pub fn continuous_ratio(profile: &ShearProfile, y: f64) -> Result<f64> {
    let (lo, hi) = profile.domain;
    if !(y >= lo && y <= hi) {
        return Err(Error::OutOfDomain { y, lo, hi });
    }
    if (y - profile.a).abs() <= profile.tol_a() {
        let slope = profile.eval_unchecked(profile.a, 1);
        if slope == 0.0 {
            return Err(Error::RatioUndefined);
        }
        return Ok(-profile.eval_unchecked(profile.a, 3) / slope);
    }
    let u = profile.eval_unchecked(y, 0);
    let upp = profile.eval_unchecked(y, 2);
    if upp == 0.0 {
        return Ok(0.0);
    }
    Ok(-upp / u)
}

/// Returns `U0(k y)` on `(-1, 1)` for a line profile `U0`.
pub fn rescale_profile(base: &ShearProfile, k: f64) -> Result<ShearProfile> {
    if !base.is_line() {
        return Err(Error::InvalidProfile("only line profiles can be rescaled".into()));
    }
    if !(k.is_finite() && k >= 1.0) {
        return Err(Error::InvalidProfile(format!("rescaling factor must be >= 1, got {k}")));
    }
    Ok(ShearProfile {
        a: base.a / k,
        domain: (-1.0, 1.0),
        derivative_order_available: base.derivative_order_available,
        smoothness: base.smoothness,
        family: Family::Rescaled { base: Box::new(base.clone()), k },
    })
}

/// Samples the profile and reports the sign structure of `U`, the minimum of
/// the continuous ratio and `|U'(a)|`.
pub fn check_assumptions(profile: &ShearProfile, n_samples: usize) -> Result<AssumptionReport> {
    if n_samples < 64 {
        return Err(Error::InvalidRange(format!("need at least 64 samples, got {n_samples}")));
    }
    let (lo, hi) = if profile.is_line() {
        let (s_lo, s_hi) = profile.ratio_support();
        let pad = s_hi - s_lo;
        (s_lo - pad, s_hi + pad)
    } else {
        profile.domain
    };
    let step = (hi - lo) / n_samples as f64;
    let mut sign_changes = 0;
    let mut last_sign = 0.0_f64;
    let mut min_ratio = f64::INFINITY;
    for i in 0..n_samples {
        let y = lo + (i as f64 + 0.5) * step;
        let u = profile.eval_unchecked(y, 0);
        if u != 0.0 {
            let s = u.signum();
            if last_sign != 0.0 && s != last_sign {
                sign_changes += 1;
            }
            last_sign = s;
        }
        min_ratio = min_ratio.min(continuous_ratio(profile, y)?);
    }
    let abs_u_prime_at_a = profile.eval_unchecked(profile.a, 1).abs();
    let pass = sign_changes == 1 && min_ratio >= -1e-12 && abs_u_prime_at_a > 0.0;
    Ok(AssumptionReport { sign_changes, min_ratio, abs_u_prime_at_a, pass })
}
