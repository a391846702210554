use num_complex::Complex64;

use super::jost::{jost_function, JostRoute};
use super::potential::{Domain, Potential};
use super::SpectralPoint;
use crate::error::{Error, Result};
use crate::kernel::{OperatorFunction, SemiSeparableKernel};
use crate::numerics::{det, polar_factor, CMatrix, C1, CI};
use crate::quadrature::Quadrature;
use crate::reduction::{det1_semiseparable, det2_semiseparable};

fn polar_parts(v: &Potential, x: f64) -> (CMatrix, CMatrix) {
    polar_factor(&v.eval(x)).expect("square finite potential value")
}

fn check_domain(v: &Potential, grid: &Quadrature, want: Domain) -> Result<()> {
    if v.domain() != want {
        return Err(Error::Contract(format!("kernel for {want:?} requested on a {:?} potential", v.domain())));
    }
    if want == Domain::HalfLine && grid.interval().0.abs() > 1e-12 {
        return Err(Error::Contract(format!("half-line grid must start at 0, not {}", grid.interval().0)));
    }
    Ok(())
}

fn factor(
    interval: (f64, f64),
    rows: usize,
    cols: usize,
    v: &Potential,
    f: impl Fn(f64, &CMatrix, &CMatrix) -> CMatrix + Send + Sync + 'static,
) -> OperatorFunction {
    let v = v.clone();
    OperatorFunction::new(rows, cols, interval, move |x| {
        let (u, w) = polar_parts(&v, x);
        f(x, &u, &w)
    })
}

/// `K(z,x,x') = -u(x) (i/2k) e^{ik|x-x'|} v(x')` on the grid interval.
pub fn build_k_fullline(v: &Potential, z: SpectralPoint, grid: &Quadrature) -> Result<SemiSeparableKernel> {
    check_domain(v, grid, Domain::FullLine)?;
    z.require_off_spectrum()?;
    let k = z.k();
    let c = CI / (2.0 * k);
    let d = v.d();
    let iv = grid.interval();
    let f1 = factor(iv, d, d, v, move |x, u, _| u.scale(-(CI * k * x).exp()));
    let g1 = factor(iv, d, d, v, move |x, _, w| w.scale(c * (-CI * k * x).exp()));
    let f2 = factor(iv, d, d, v, move |x, u, _| u.scale(-(-CI * k * x).exp()));
    let g2 = factor(iv, d, d, v, move |x, _, w| w.scale(c * (CI * k * x).exp()));
    Ok(SemiSeparableKernel::new(f1, g1, f2, g2, iv)?.with_breakpoints(v.breakpoints().to_vec()))
}

/// Kernel of the first-order system, acting on `ℂ^{2d}`-valued functions with `d`-dimensional factors.
pub fn build_ktilde_system(v: &Potential, z: SpectralPoint, grid: &Quadrature) -> Result<SemiSeparableKernel> {
    check_domain(v, grid, Domain::FullLine)?;
    let k = z.k();
    let c = CI / (2.0 * k);
    let d = v.d();
    let iv = grid.interval();
    let stacked = move |u: &CMatrix, s: Complex64, phase: Complex64| {
        CMatrix::vstack(&[&u.scale(-phase), &u.scale(-phase * s * CI * k)])
    };
    let padded = move |w: &CMatrix, phase: Complex64| CMatrix::hstack(&[&w.scale(c * phase), &CMatrix::zeros(d, d)]);
    let f1 = factor(iv, 2 * d, d, v, move |x, u, _| stacked(u, C1, (CI * k * x).exp()));
    let g1 = factor(iv, d, 2 * d, v, move |x, _, w| padded(w, (-CI * k * x).exp()));
    let f2 = factor(iv, 2 * d, d, v, move |x, u, _| stacked(u, -C1, (-CI * k * x).exp()));
    let g2 = factor(iv, d, 2 * d, v, move |x, _, w| padded(w, (CI * k * x).exp()));
    Ok(SemiSeparableKernel::new(f1, g1, f2, g2, iv)?.with_breakpoints(v.breakpoints().to_vec()))
}

/// Dirichlet half-line kernel `-u(x) k^{-1} sin(k x_<) e^{ik x_>} v(x')`.
pub fn build_k_halfline(v: &Potential, z: SpectralPoint, grid: &Quadrature) -> Result<SemiSeparableKernel> {
    check_domain(v, grid, Domain::HalfLine)?;
    z.require_off_spectrum()?;
    let k = z.k();
    let d = v.d();
    let iv = grid.interval();
    let f1 = factor(iv, d, d, v, move |x, u, _| u.scale(-(CI * k * x).exp()));
    let g1 = factor(iv, d, d, v, move |x, _, w| w.scale((k * x).sin() / k));
    let f2 = factor(iv, d, d, v, move |x, u, _| u.scale(-(k * x).sin() / k));
    let g2 = factor(iv, d, d, v, move |x, _, w| w.scale((CI * k * x).exp()));
    Ok(SemiSeparableKernel::new(f1, g1, f2, g2, iv)?.with_breakpoints(v.breakpoints().to_vec()))
}

/// `(det(I - K(z)), det ℱ(z))`, the first by reduction and the second from the Jost solution.
pub fn fredholm_jost_check(v: &Potential, z: SpectralPoint, grid: &Quadrature) -> Result<(Complex64, Complex64)> {
    let k = build_k_fullline(v, z, grid)?;
    let lhs = det1_semiseparable(&k, C1, grid)?.value;
    let rhs = det(&jost_function(v, z, grid, JostRoute::PlusIntegral)?)?;
    Ok((lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstOrderCheck {
    /// `det₂(I - K̃(z))`
    pub system: Complex64,
    /// `det₂(I - K(z))`
    pub kernel: Complex64,
    /// `det ℱ(z) · exp(-(i/2k) ∫ tr V)`
    pub jost: Complex64,
}

impl FirstOrderCheck {
    pub fn spread(&self) -> f64 {
        let (a, b, c) = (self.system, self.kernel, self.jost);
        (a - b).norm().max((a - c).norm()).max((b - c).norm())
    }
}

pub fn first_order_check(v: &Potential, z: SpectralPoint, grid: &Quadrature) -> Result<FirstOrderCheck> {
    z.require_off_spectrum()?;
    let kt = build_ktilde_system(v, z, grid)?;
    let system = det2_semiseparable(&kt, C1, grid)?.value;
    let kernel = det2_semiseparable(&build_k_fullline(v, z, grid)?, C1, grid)?.value;
    let f = det(&jost_function(v, z, grid, JostRoute::PlusIntegral)?)?;
    let jost = f * (-CI / (2.0 * z.k()) * v.trace_integral(grid)).exp();
    Ok(FirstOrderCheck { system, kernel, jost })
}
