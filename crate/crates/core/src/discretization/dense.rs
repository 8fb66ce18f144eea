use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::discretization::tridiag::ComplexTridiagonal;
use crate::error::{Error, Result};

/// Dense complex matrix with a cached LU factorization. Used as an
/// independent reference for the structured solvers at small sizes.
#[derive(Debug, Clone)]
pub struct DenseComplexOperator {
    pub matrix: DMatrix<Complex64>,
    lu: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl DenseComplexOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidRange("matrix has non-finite entries".into()));
        }
        Ok(Self { matrix, lu: None })
    }

    pub fn from_tridiagonal(t: &ComplexTridiagonal) -> Self {
        let n = t.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = t.diagonal[i];
            if i + 1 < n {
                m[(i + 1, i)] = t.sub[i];
                m[(i, i + 1)] = t.sup[i];
            }
        }
        Self { matrix: m, lu: None }
    }

    /// Adds `u v^T`.
    pub fn add_rank_one(&mut self, u: &[Complex64], v: &[Complex64]) {
        let uu = DVector::from_column_slice(u);
        let vv = DVector::from_column_slice(v);
        self.matrix += uu * vv.transpose();
        self.lu = None;
    }

    pub fn is_factorized(&self) -> bool {
        self.lu.is_some()
    }

    pub fn factorize(&mut self) {
        if self.lu.is_none() {
            self.lu = Some(self.matrix.clone().lu());
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (&self.matrix * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let rhs = DVector::from_column_slice(b);
        let x = match &self.lu {
            Some(lu) => lu.solve(&rhs),
            None => self.matrix.clone().lu().solve(&rhs),
        };
        x.map(|v| v.as_slice().to_vec()).ok_or(Error::SingularT)
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.matrix.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorization_reproduces_action() {
        let t = ComplexTridiagonal {
            sub: vec![Complex64::new(1.0, 1.0); 4],
            diagonal: vec![Complex64::new(4.0, -1.0); 5],
            sup: vec![Complex64::new(-1.0, 0.5); 4],
        };
        let mut d = DenseComplexOperator::from_tridiagonal(&t);
        d.add_rank_one(&[Complex64::new(1.0, 0.0); 5], &[Complex64::new(0.2, 0.0); 5]);
        d.factorize();
        assert!(d.is_factorized());
        let x: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let back = d.solve(&d.apply(&x)).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(d.smallest_singular_value() > 0.0);
    }
}
