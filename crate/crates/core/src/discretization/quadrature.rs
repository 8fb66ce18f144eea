use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

const GL_ORDER: usize = 20;
/// Depth cap for dyadic refinement toward a near-singular point.
pub const MAX_DEPTH: usize = 30;
const NEAR_SINGULAR_RTOL: f64 = 1e-9;
const NEAR_SINGULAR_FAIL: f64 = 1e-6;
const PV_RTOL: f64 = 1e-13;
const PV_MAX_DEPTH: usize = 60;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Returns `(int f, int |f|)` over one panel.
fn panel<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64) -> (Complex64, f64) {
    let (nodes, weights) = gl20();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for (t, w) in nodes.iter().zip(weights) {
        let v = f(mid + half * t);
        acc += v * w;
        abs += v.norm() * w;
    }
    (acc * half, abs * half)
}

/// Panels of `[lo, hi]`: `base` uniform panels, with the panel touching a
/// focused end split dyadically `depth` times toward that end.
fn graded_panels(lo: f64, hi: f64, base: usize, focus_lo: bool, focus_hi: bool, depth: usize, out: &mut Vec<(f64, f64)>) {
    if focus_lo && focus_hi {
        let mid = 0.5 * (lo + hi);
        let half_base = base.div_ceil(2).max(1);
        graded_panels(lo, mid, half_base, true, false, depth, out);
        graded_panels(mid, hi, half_base, false, true, depth, out);
        return;
    }
    let base = base.max(1);
    let w = (hi - lo) / base as f64;
    for j in 0..base {
        let l = lo + j as f64 * w;
        let r = if j + 1 == base { hi } else { lo + (j + 1) as f64 * w };
        if focus_lo && j == 0 {
            let mut edges: Vec<f64> = (0..=depth).rev().map(|d| l + (r - l) * 0.5f64.powi(d as i32)).collect();
            edges.insert(0, l);
            for e in edges.windows(2) {
                out.push((e[0], e[1]));
            }
        } else if focus_hi && j + 1 == base {
            let mut edges: Vec<f64> = (0..=depth).map(|d| r - (r - l) * 0.5f64.powi(d as i32)).collect();
            edges.push(r);
            for e in edges.windows(2) {
                out.push((e[0], e[1]));
            }
        } else {
            out.push((l, r));
        }
    }
}

/// One evaluation of the composite rule on a mesh graded toward every focus
/// point; returns `(int f, int |f|)`.
fn graded_integral<F: Fn(f64) -> Complex64>(
    f: &F,
    focus: &[f64],
    interval: (f64, f64),
    base_panels: usize,
    depth: usize,
) -> (Complex64, f64) {
    let (a, b) = interval;
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = focus.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(&inner);
    cuts.push(b);
    let is_focus = |x: f64| focus.contains(&x);
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let share = ((base_panels as f64) * (r - l) / (b - a)).ceil() as usize;
        graded_panels(l, r, share.max(1), is_focus(l), is_focus(r), depth, &mut panels);
    }
    panels.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(s, sa), (l, r)| {
        let (v, va) = panel(f, *l, *r);
        (s + v, sa + va)
    })
}

/// Options for [`near_singular_integral_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct NearSingularOptions {
    /// Uniform panels across the interval before grading.
    pub base_panels: usize,
    /// Extra points (kinks of `f`) toward which the mesh is also graded.
    pub breakpoints: Vec<f64>,
}

impl Default for NearSingularOptions {
    fn default() -> Self {
        Self { base_panels: 8, breakpoints: Vec::new() }
    }
}

/// `int f` for an integrand that is smooth but sharply peaked (width about
/// `c_i`) near `a_prime`.
pub fn near_singular_integral<F: Fn(f64) -> Complex64>(
    f: F,
    a_prime: f64,
    c_i: f64,
    interval: (f64, f64),
) -> Result<Complex64> {
    near_singular_integral_with(f, a_prime, c_i, interval, &NearSingularOptions::default())
}

pub fn near_singular_integral_with<F: Fn(f64) -> Complex64>(
    f: F,
    a_prime: f64,
    c_i: f64,
    interval: (f64, f64),
    options: &NearSingularOptions,
) -> Result<Complex64> {
    let (a, b) = interval;
    if !(a < b) || !(c_i > 0.0) {
        return Err(Error::InvalidRange(format!("near-singular integral on [{a}, {b}] with c_i = {c_i}")));
    }
    let mut focus = options.breakpoints.clone();
    focus.push(a_prime.clamp(a, b));
    // Start once the innermost panel is no wider than the peak.
    let span = (b - a) / options.base_panels.max(1) as f64;
    let start = ((span / c_i).log2().ceil().max(2.0) as usize).min(MAX_DEPTH - 2);
    let (mut prev, _) = graded_integral(&f, &focus, interval, options.base_panels, start);
    let mut difference = f64::INFINITY;
    for depth in start + 1..=MAX_DEPTH {
        let (cur, abs) = graded_integral(&f, &focus, interval, options.base_panels, depth);
        difference = (cur - prev).norm();
        let scale = abs.max(f64::MIN_POSITIVE);
        if difference <= NEAR_SINGULAR_RTOL * scale {
            return Ok(cur);
        }
        prev = cur;
        if depth == MAX_DEPTH && difference <= NEAR_SINGULAR_FAIL * scale {
            return Ok(cur);
        }
    }
    Err(Error::NoConvergence { difference })
}

/// Principal value `p.v. int f(x) / (x - x0) dx` over `interval` by
/// singularity subtraction.
pub fn pv_integral<F: Fn(f64) -> Complex64>(f: F, x0: f64, interval: (f64, f64)) -> Result<Complex64> {
    pv_integral_with(f, x0, interval, &[])
}

/// [`pv_integral`] with additional kinks of `f` to grade toward.
pub fn pv_integral_with<F: Fn(f64) -> Complex64>(
    f: F,
    x0: f64,
    interval: (f64, f64),
    breakpoints: &[f64],
) -> Result<Complex64> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(Error::InvalidRange(format!("p.v. integral on [{a}, {b}]")));
    }
    let margin = 1e-9 * (b - a);
    if !(x0 - a > margin && b - x0 > margin) {
        return Err(Error::SingularityOnBoundary { x0, lo: a, hi: b });
    }
    let f0 = f(x0);
    let g = |x: f64| {
        let d = x - x0;
        if d == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            (f(x) - f0) / d
        }
    };
    let mut focus = breakpoints.to_vec();
    focus.push(x0);
    let (mut prev, _) = graded_integral(&g, &focus, interval, 8, 8);
    let mut depth = 8;
    while depth < PV_MAX_DEPTH {
        depth += 4;
        let (cur, abs) = graded_integral(&g, &focus, interval, 8, depth);
        let done = (cur - prev).norm() <= PV_RTOL * abs.max(f64::MIN_POSITIVE);
        prev = cur;
        if done {
            break;
        }
    }
    Ok(prev + f0 * ((b - x0) / (x0 - a)).ln())
}

/// Adaptive integral of a smooth function (no near-singularity).
pub fn smooth_integral<F: Fn(f64) -> Complex64>(f: F, interval: (f64, f64)) -> Complex64 {
    fn recurse<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64, whole: Complex64, tol: f64, depth: usize) -> Complex64 {
        let mid = 0.5 * (lo + hi);
        let (left, _) = panel(f, lo, mid);
        let (right, _) = panel(f, mid, hi);
        let both = left + right;
        if depth == 0 || (both - whole).norm() <= tol {
            both
        } else {
            recurse(f, lo, mid, left, 0.5 * tol, depth - 1) + recurse(f, mid, hi, right, 0.5 * tol, depth - 1)
        }
    }
    let (lo, hi) = interval;
    let (whole, abs) = panel(&f, lo, hi);
    recurse(&f, lo, hi, whole, 1e-14 * abs.max(1e-300), 40)
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, interval: (f64, f64), panels: usize) -> Complex64 {
    let n = (panels.max(2) + 1) & !1;
    let (a, b) = interval;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m38: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((m38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn pv_closed_forms() {
        let v = pv_integral(|_| re(1.0), 0.0, (-1.0, 2.0)).unwrap();
        assert!((v.re - 2f64.ln()).abs() < 1e-12);
        let v = pv_integral(re, 0.0, (-1.0, 2.0)).unwrap();
        assert!((v.re - 3.0).abs() < 1e-12);
        let v = pv_integral(|x| re((PI * x / 2.0).cos().powi(2)), 0.0, (-1.0, 1.0)).unwrap();
        assert!(v.norm() < 1e-12);
        assert!(matches!(pv_integral(re, 2.0, (-1.0, 2.0)), Err(Error::SingularityOnBoundary { .. })));
    }

    #[test]
    fn pv_of_odd_part_vanishes() {
        let f = |x: f64| re(x.exp());
        let g = |x: f64| re((-x).exp());
        let a = pv_integral(f, 0.0, (-1.0, 1.0)).unwrap();
        let b = pv_integral(g, 0.0, (-1.0, 1.0)).unwrap();
        assert!((a + b).norm() < 1e-10);
    }

    #[test]
    fn near_singular_matches_closed_form() {
        let c = 1e-3;
        let v = near_singular_integral(|y| Complex64::new(y, -c).inv(), 0.0, c, (-1.0, 1.0)).unwrap();
        let exact = (Complex64::new(1.0, -c) / Complex64::new(-1.0, -c)).ln();
        assert!((v - exact).norm() < 1e-10, "{v} vs {exact}");
        assert!((v.im - 2.0 * (1.0 / c).atan()).abs() < 1e-10);
        assert!((v.im - (PI - 2.0 * c)).abs() < 1e-6);
    }

    #[test]
    fn near_singular_smooth_case_matches_simpson() {
        let f = |y: f64| Complex64::new(y, -1.0).inv();
        let v = near_singular_integral(f, 0.0, 1.0, (-1.0, 1.0)).unwrap();
        let s = simpson(f, (-1.0, 1.0), 4000);
        assert!((v - s).norm() < 1e-9);
    }

    #[test]
    fn near_singular_independent_of_seed_panels() {
        let c = 1e-4;
        let f = |y: f64| Complex64::new(y.sin() - 0.01, -c).inv() * y.cos();
        let a = (0.01f64).asin();
        let p = near_singular_integral_with(f, a, c, (-1.0, 1.0), &NearSingularOptions { base_panels: 4, breakpoints: vec![] }).unwrap();
        let q = near_singular_integral_with(f, a, c, (-1.0, 1.0), &NearSingularOptions { base_panels: 11, breakpoints: vec![] }).unwrap();
        assert!((p - q).norm() < 1e-8);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let v = simpson(|x| re(x * x * x + x * x), (0.0, 1.0), 2);
        assert!((v.re - (0.25 + 1.0 / 3.0)).abs() < 1e-15);
    }
}
