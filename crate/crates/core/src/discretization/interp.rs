use crate::discretization::Grid;

/// Piecewise-cubic Lagrange interpolant of interior-node data, including the
/// implicit zero Dirichlet values at both endpoints.
#[derive(Debug, Clone)]
pub struct GridInterpolant {
    lo: f64,
    hi: f64,
    h: f64,
    /// Values at `lo + i h` for `i = 0..=n + 1`.
    values: Vec<f64>,
}

impl GridInterpolant {
    pub fn new(grid: &Grid, interior: &[f64]) -> Self {
        let mut values = Vec::with_capacity(interior.len() + 2);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Self { lo: grid.interval.0, hi: grid.interval.1, h: grid.h, values }
    }

    /// Evaluates at `y`; zero outside the interval.
    pub fn eval(&self, y: f64) -> f64 {
        if !(y > self.lo && y < self.hi) {
            return 0.0;
        }
        let last = self.values.len() - 1;
        let s = (y - self.lo) / self.h;
        let cell = (s.floor() as usize).min(last - 1);
        let start = cell.saturating_sub(1).min(last.saturating_sub(3));
        let mut acc = 0.0;
        for j in start..start + 4 {
            let mut basis = 1.0;
            for m in start..start + 4 {
                if m != j {
                    basis *= (s - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += basis * self.values[j];
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cosine_to_fourth_order() {
        let err = |n: usize| {
            let g = Grid::channel(n).unwrap();
            let v: Vec<f64> = g.nodes.iter().map(|y| (std::f64::consts::FRAC_PI_2 * y).cos()).collect();
            let it = GridInterpolant::new(&g, &v);
            (0..997)
                .map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 997.0)
                .map(|y| (it.eval(y) - (std::f64::consts::FRAC_PI_2 * y).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(49), err(99));
        assert!(e1 < 1e-5);
        assert!((e1 / e2).log2() > 3.5);
    }

    #[test]
    fn exact_at_nodes_and_zero_outside() {
        let g = Grid::channel(10).unwrap();
        let v: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 + 1.0).collect();
        let it = GridInterpolant::new(&g, &v);
        for (y, val) in g.nodes.iter().zip(&v) {
            assert!((it.eval(*y) - val).abs() < 1e-12);
        }
        assert_eq!(it.eval(-1.5), 0.0);
    }
}
