//! Grids, finite-difference operators, inner products and singular
//! quadrature.

pub mod dense;
pub mod grid;
pub mod interp;
pub mod quadrature;
pub mod tridiag;

pub use dense::DenseComplexOperator;
pub use grid::{fourier_sine_coefficient, inner_product, inner_product_real, norm, norm_real, to_complex, Grid, NormKind};
pub use interp::GridInterpolant;
pub use quadrature::{near_singular_integral, pv_integral, simpson};
pub use tridiag::{helmholtz_solve, ComplexTridiagonal, TridiagonalLu, TridiagonalOperator, TridiagonalPlusRankOne};
