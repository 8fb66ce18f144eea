use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of interior nodes; Dirichlet values at the endpoints are
/// implicitly zero and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub interval: (f64, f64),
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, interval: (f64, f64)) -> Result<Self> {
        let (lo, hi) = interval;
        if n == 0 || !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidRange(format!("grid with n = {n} on [{lo}, {hi}]")));
        }
        let h = (hi - lo) / (n + 1) as f64;
        let nodes = (1..=n).map(|i| lo + i as f64 * h).collect();
        Ok(Self { n, interval, h, nodes })
    }

    /// Grid on `(-1, 1)`.
    pub fn channel(n: usize) -> Result<Self> {
        Self::new(n, (-1.0, 1.0))
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::ShapeMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    H1,
}

/// `(f, g) = int f conj(g)`, trapezoid rule with zero boundary values. The
/// `H1` part adds the product of the cell differences `(f_{i+1} - f_i) / h`
/// over all `n + 1` cells, i.e. central differences at the cell midpoints.
pub fn inner_product(f: &[Complex64], g: &[Complex64], grid: &Grid, norm_kind: NormKind) -> Result<Complex64> {
    grid.check_len(f.len())?;
    grid.check_len(g.len())?;
    let h = grid.h;
    let mut acc: Complex64 = f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<Complex64>() * h;
    if norm_kind == NormKind::H1 {
        let mut d = Complex64::new(0.0, 0.0);
        let at = |v: &[Complex64], i: isize| -> Complex64 {
            if i < 0 || i as usize >= v.len() {
                Complex64::new(0.0, 0.0)
            } else {
                v[i as usize]
            }
        };
        for i in -1..grid.n as isize {
            let df = at(f, i + 1) - at(f, i);
            let dg = at(g, i + 1) - at(g, i);
            d += df * dg.conj();
        }
        acc += d / h;
    }
    Ok(acc)
}

/// Real-valued counterpart of [`inner_product`] for real vectors.
pub fn inner_product_real(f: &[f64], g: &[f64], grid: &Grid, norm_kind: NormKind) -> Result<f64> {
    grid.check_len(f.len())?;
    grid.check_len(g.len())?;
    let h = grid.h;
    let mut acc: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * h;
    if norm_kind == NormKind::H1 {
        acc += dirichlet_gradient_sq(f, g) / h;
    }
    Ok(acc)
}

/// `sum (f_{i+1} - f_i)(g_{i+1} - g_i)` over all cells including the two
/// boundary cells.
fn dirichlet_gradient_sq(f: &[f64], g: &[f64]) -> f64 {
    let n = f.len();
    let at = |v: &[f64], i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
    (-1..n as isize).map(|i| (at(f, i + 1) - at(f, i)) * (at(g, i + 1) - at(g, i))).sum()
}

pub fn norm(f: &[Complex64], grid: &Grid, kind: NormKind) -> Result<f64> {
    Ok(inner_product(f, f, grid, kind)?.re.max(0.0).sqrt())
}

pub fn norm_real(f: &[f64], grid: &Grid, kind: NormKind) -> Result<f64> {
    Ok(inner_product_real(f, f, grid, kind)?.max(0.0).sqrt())
}

/// `int f(y) sin(m pi (y + 1) / 2) dy` on `(-1, 1)` by the trapezoid rule.
pub fn fourier_sine_coefficient(f: &[Complex64], m: usize, grid: &Grid) -> Result<Complex64> {
    grid.check_len(f.len())?;
    if grid.interval != (-1.0, 1.0) {
        return Err(Error::InvalidRange("sine coefficients need a grid on (-1, 1)".into()));
    }
    if m == 0 {
        return Err(Error::InvalidRange("sine mode index must be >= 1".into()));
    }
    let w = m as f64 * std::f64::consts::PI / 2.0;
    Ok(f.iter().zip(&grid.nodes).map(|(v, y)| v * (w * (y + 1.0)).sin()).sum::<Complex64>() * grid.h)
}

pub fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled(grid: &Grid, f: impl Fn(f64) -> f64) -> Vec<Complex64> {
        grid.nodes.iter().map(|&y| Complex64::new(f(y), 0.0)).collect()
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::channel(99).unwrap();
        assert!((g.h * 100.0 - 2.0).abs() < 1e-15);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(g.nodes[0] > -1.0 && g.nodes[98] < 1.0);
        assert!(Grid::channel(0).is_err());
    }

    #[test]
    fn cosine_norms() {
        let g = Grid::channel(2000).unwrap();
        let f = sampled(&g, |y| (PI * y / 2.0).cos());
        let l2 = inner_product(&f, &f, &g, NormKind::L2).unwrap().re;
        assert!((l2 - 1.0).abs() < 1e-5);
        let h1 = inner_product(&f, &f, &g, NormKind::H1).unwrap().re;
        assert!((h1 - (1.0 + PI * PI / 4.0)).abs() < 1e-5);
    }

    #[test]
    fn sine_modes_orthogonal() {
        let g = Grid::channel(500).unwrap();
        let f = sampled(&g, |y| (PI * (y + 1.0) / 2.0).sin());
        let s = sampled(&g, |y| (PI * (y + 1.0)).sin());
        assert!(inner_product(&f, &s, &g, NormKind::L2).unwrap().norm() < 1e-12);
        assert!(inner_product(&f, &s[..10], &g, NormKind::L2).is_err());
    }

    #[test]
    fn sine_coefficients() {
        let g = Grid::channel(2000).unwrap();
        let f = sampled(&g, |y| (PI * (y + 1.0) / 2.0).sin());
        assert!((fourier_sine_coefficient(&f, 1, &g).unwrap().re - 1.0).abs() < 1e-6);
        assert!(fourier_sine_coefficient(&f, 2, &g).unwrap().norm() < 1e-6);
        assert!(fourier_sine_coefficient(&f, 0, &g).is_err());
    }

    #[test]
    fn sine_mode_norm_converges_second_order() {
        // The trapezoid rule is exact for sine modes; the H1 cell differences
        // carry the O(h^2) error.
        let err = |n: usize| {
            let g = Grid::channel(n).unwrap();
            let f = sampled(&g, |y| (PI * (y + 1.0) / 2.0).sin());
            (inner_product(&f, &f, &g, NormKind::H1).unwrap().re - (1.0 + PI * PI / 4.0)).abs()
        };
        let order = (err(99) / err(199)).log2();
        assert!(order >= 1.9, "observed {order}");
    }
}
