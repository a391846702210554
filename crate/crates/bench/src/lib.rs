//! Fixtures shared by the benchmarks.

use jostdet_core::schrodinger::GridSpec;
use jostdet_core::{CMatrix, Complex64, OperatorFunction, Potential, Quadrature, Scheme, SemiSeparableKernel};

/// Kernel `x_<(1 - x_>)` on `(0, 1)` lifted to `d` channels with a fixed coupling.
pub fn green_kernel(d: usize) -> SemiSeparableKernel {
    let iv = (0.0, 1.0);
    let mut c = CMatrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                c[(i, j)] = Complex64::new(0.1, 0.05 * (i as f64 - j as f64));
            }
        }
    }
    let lift =
        |f: fn(f64) -> f64, m: CMatrix| OperatorFunction::new(d, d, iv, move |x| m.scale(Complex64::new(f(x), 0.0)));
    let f1 = lift(|x| 1.0 - x, c.clone());
    let g1 = lift(|x| x, CMatrix::identity(d));
    let f2 = lift(|x| x, c);
    let g2 = lift(|x| 1.0 - x, CMatrix::identity(d));
    SemiSeparableKernel::new(f1, g1, f2, g2, iv).expect("valid kernel")
}

pub fn grid(nodes: usize) -> Quadrature {
    Quadrature::new(0.0, 1.0, 16, nodes / 16, Scheme::GaussLegendre).expect("valid grid")
}

/// Two-channel gaussian well with Hermitian coupling.
pub fn coupled_gaussian() -> Potential {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new(-1.0, 0.0);
    m[(0, 1)] = Complex64::new(0.4, 0.3);
    m[(1, 0)] = Complex64::new(0.4, -0.3);
    m[(1, 1)] = Complex64::new(-0.6, 0.0);
    let profile = Potential::gaussian(1.0, 1.0, 0.0).expect("valid profile");
    Potential::matrix_coupled(m, &profile).expect("valid potential")
}

pub fn potential_grid(v: &Potential) -> Quadrature {
    v.grid(&GridSpec::default()).expect("truncatable").0
}
