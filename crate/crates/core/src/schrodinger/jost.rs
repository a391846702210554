use num_complex::Complex64;

use super::potential::{Domain, Potential};
use super::SpectralPoint;
use crate::error::{Error, Result};
use crate::numerics::{cexpm1, CMatrix, Lu, CI};
use crate::quadrature::Quadrature;

/// Which Jost solution: `f₊ ~ e^{ikx}` at `+∞` or `f₋ ~ e^{-ikx}` at `-∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// Evaluation routes for the Jost function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JostRoute {
    /// `I - (2ik)^{-1} ∫ e^{-ikx} V f₊`
    PlusIntegral,
    /// `I - (2ik)^{-1} ∫ f₋(z̄)* V e^{ikx}`
    MinusIntegral,
    /// `(2ik)^{-1} W(f₋(z̄)*, f₊)` at an interior node
    Wronskian,
}

impl JostRoute {
    pub const ALL: [JostRoute; 3] = [JostRoute::PlusIntegral, JostRoute::MinusIntegral, JostRoute::Wronskian];

    pub fn name(&self) -> &'static str {
        match self {
            JostRoute::PlusIntegral => "plus_integral",
            JostRoute::MinusIntegral => "minus_integral",
            JostRoute::Wronskian => "wronskian",
        }
    }
}

impl std::str::FromStr for JostRoute {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus_integral" | "plus" => Ok(Self::PlusIntegral),
            "minus_integral" | "minus" => Ok(Self::MinusIntegral),
            "wronskian" => Ok(Self::Wronskian),
            other => Err(Error::Parse(format!("unknown Jost route '{other}'"))),
        }
    }
}

/// Jost solution on a grid, stored as `m(x) = e^{∓ikx} f(x)`.
#[derive(Clone, Debug)]
pub struct JostData {
    pub side: Side,
    pub z: SpectralPoint,
    pub grid: Quadrature,
    pub m: Vec<CMatrix>,
    /// `∫ V m` over the grid.
    pub integral: CMatrix,
    /// `m` at the endpoint opposite to the boundary data.
    pub far: CMatrix,
    pub residual: f64,
}

impl JostData {
    fn phase(&self, x: f64) -> Complex64 {
        let s = match self.side {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        };
        (CI * self.z.k() * (s * x)).exp()
    }

    /// `f(x_i)`
    pub fn f(&self, i: usize) -> CMatrix {
        self.m[i].scale(self.phase(self.grid.nodes()[i]))
    }

    pub fn f_samples(&self) -> Vec<CMatrix> {
        (0..self.m.len()).map(|i| self.f(i)).collect()
    }

    /// `m'` at every node by panelwise spectral differentiation.
    pub fn m_derivative(&self) -> Vec<CMatrix> {
        let q = &self.grid;
        let n = q.n_per_panel();
        let d = self.m[0].rows();
        let mut out = vec![CMatrix::zeros(d, d); q.len()];
        for p in 0..q.panels() {
            let r = q.panel_range(p);
            let dm = q.diff_matrix(p);
            for i in 0..n {
                let mut acc = CMatrix::zeros(d, d);
                for j in 0..n {
                    acc.axpy(Complex64::new(dm[i * n + j], 0.0), &self.m[r.start + j]);
                }
                out[r.start + i] = acc;
            }
        }
        out
    }
}

/// `(e^{2ikt} - 1) / (2ik)`
fn free_kernel(k: Complex64, t: f64) -> Complex64 {
    let w = 2.0 * CI * k;
    cexpm1(w * t) / w
}

/// Solves `m₊(x) = I + ∫_x^b D(y-x) V m₊ dy` or `m₋(x) = I + ∫_a^x D(x-y) V m₋ dy`, `D(t) = (e^{2ikt}-1)/(2ik)`.
///
/// The tail beyond the current panel enters through `Ψ = ∫ e^{2ik|y-e|} V m` and
/// `Θ = ∫ D(|y-e|) V m` carried from edge to edge, both bounded for `Im k ≥ 0`.
fn solve_modified(
    vs: &[CMatrix],
    grid: &Quadrature,
    k: Complex64,
    side: Side,
) -> Result<(Vec<CMatrix>, CMatrix, CMatrix, f64)> {
    let n = grid.n_per_panel();
    let d = vs[0].rows();
    let sgn = match side {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    let order: Vec<usize> = match side {
        Side::Plus => (0..grid.panels()).rev().collect(),
        Side::Minus => (0..grid.panels()).collect(),
    };
    let nodes = grid.nodes();
    let weights = grid.weights();
    let eye = CMatrix::identity(d);
    let mut m = vec![CMatrix::zeros(d, d); grid.len()];
    let mut psi = CMatrix::zeros(d, d);
    let mut theta = CMatrix::zeros(d, d);
    let mut integral = CMatrix::zeros(d, d);
    let mut residual = 0.0f64;
    for p in order {
        let (lo, hi) = grid.panel_bounds(p);
        let (edge, next) = match side {
            Side::Plus => (hi, lo),
            Side::Minus => (lo, hi),
        };
        let s = match side {
            Side::Plus => grid.backward_matrix(p),
            Side::Minus => grid.forward_matrix(p),
        };
        let r = grid.panel_range(p);
        let mut sys = CMatrix::identity(n * d);
        let mut rhs = CMatrix::zeros(n * d, d);
        for i in 0..n {
            let xi = nodes[r.start + i];
            for j in 0..n {
                let c = -free_kernel(k, sgn * (nodes[r.start + j] - xi)) * s[i * n + j];
                let v = &vs[r.start + j];
                for a in 0..d {
                    for b in 0..d {
                        sys[(i * d + a, j * d + b)] += c * v[(a, b)];
                    }
                }
            }
            let mut b = eye.clone();
            b.axpy(free_kernel(k, sgn * (edge - xi)), &psi);
            b += &theta;
            rhs.set_block(i * d, 0, &b);
        }
        let sol = Lu::new(&sys)?.solve(&rhs)?;
        let defect = (&(&sys * &sol) - &rhs).max_abs() / (1.0 + rhs.max_abs());
        residual = residual.max(defect);
        let width = hi - lo;
        let mut new_psi = psi.scale((2.0 * CI * k * width).exp());
        let mut new_theta = psi.scale(free_kernel(k, width));
        new_theta += &theta;
        for j in 0..n {
            let g = r.start + j;
            m[g] = sol.submatrix(j * d, 0, d, d);
            let vm = &vs[g] * &m[g];
            let t = sgn * (nodes[g] - next);
            new_psi.axpy((2.0 * CI * k * t).exp() * weights[g], &vm);
            new_theta.axpy(free_kernel(k, t) * weights[g], &vm);
            integral.axpy(Complex64::new(weights[g], 0.0), &vm);
        }
        psi = new_psi;
        theta = new_theta;
    }
    let far = &eye + &theta;
    Ok((m, integral, far, residual))
}

fn check_grid(v: &Potential, grid: &Quadrature) -> Result<()> {
    if v.domain() == Domain::HalfLine && grid.interval().0 < -1e-12 {
        return Err(Error::Contract(format!("half-line grid starts at {}", grid.interval().0)));
    }
    Ok(())
}

/// Jost solution `f₊` or `f₋` with free boundary data at the end of the grid.
pub fn jost_solution(v: &Potential, z: SpectralPoint, side: Side, grid: &Quadrature) -> Result<JostData> {
    check_grid(v, grid)?;
    let vs = v.samples(grid);
    let (m, integral, far, residual) = solve_modified(&vs, grid, z.k(), side)?;
    Ok(JostData { side, z, grid: grid.clone(), m, integral, far, residual })
}

fn require_full_line(v: &Potential) -> Result<()> {
    if v.domain() != Domain::FullLine {
        return Err(Error::Contract("full-line Jost function requested for a half-line potential".into()));
    }
    Ok(())
}

/// Jost function on the line by the chosen route.
pub fn jost_function(v: &Potential, z: SpectralPoint, grid: &Quadrature, route: JostRoute) -> Result<CMatrix> {
    require_full_line(v)?;
    let k = z.k();
    let inv = (2.0 * CI * k).inv();
    let d = v.d();
    match route {
        JostRoute::PlusIntegral => {
            let plus = jost_solution(v, z, Side::Plus, grid)?;
            let mut f = CMatrix::identity(d);
            f.axpy(-inv, &plus.integral);
            Ok(f)
        }
        JostRoute::MinusIntegral => {
            let minus = jost_solution(v, z.conj(), Side::Minus, grid)?;
            let vs = v.samples(grid);
            let mut f = CMatrix::identity(d);
            for (i, w) in grid.weights().iter().enumerate() {
                f.axpy(-inv * w, &(&minus.m[i].adjoint() * &vs[i]));
            }
            Ok(f)
        }
        JostRoute::Wronskian => {
            let plus = jost_solution(v, z, Side::Plus, grid)?;
            let minus = jost_solution(v, z.conj(), Side::Minus, grid)?;
            let i = grid.len() / 2;
            let (dp, dm) = (plus.m_derivative(), minus.m_derivative());
            let mm = minus.m[i].adjoint();
            let dmm = dm[i].adjoint();
            let mut f = &mm * &plus.m[i];
            let w = &(&mm * &dp[i]) - &(&dmm * &plus.m[i]);
            f.axpy(inv, &w);
            Ok(f)
        }
    }
}

/// All three Jost function routes and their largest pairwise entry difference.
#[derive(Clone, Debug)]
pub struct JostRoutes {
    pub plus_integral: CMatrix,
    pub minus_integral: CMatrix,
    pub wronskian: CMatrix,
    pub spread: f64,
}

impl JostRoutes {
    pub fn get(&self, route: JostRoute) -> &CMatrix {
        match route {
            JostRoute::PlusIntegral => &self.plus_integral,
            JostRoute::MinusIntegral => &self.minus_integral,
            JostRoute::Wronskian => &self.wronskian,
        }
    }
}

/// Evaluates every route; disagreement above `tol` is an [`Error::Inconsistent`] listing all values.
pub fn jost_function_routes(v: &Potential, z: SpectralPoint, grid: &Quadrature, tol: f64) -> Result<JostRoutes> {
    let plus_integral = jost_function(v, z, grid, JostRoute::PlusIntegral)?;
    let minus_integral = jost_function(v, z, grid, JostRoute::MinusIntegral)?;
    let wronskian = jost_function(v, z, grid, JostRoute::Wronskian)?;
    let spread = (&plus_integral - &minus_integral)
        .max_abs()
        .max((&plus_integral - &wronskian).max_abs())
        .max((&minus_integral - &wronskian).max_abs());
    if !(spread <= tol) {
        return Err(Error::Inconsistent(format!(
            "Jost function routes differ by {spread:.3e} at z = {}: plus_integral {:?}, minus_integral {:?}, wronskian {:?}",
            z.z(),
            plus_integral,
            minus_integral,
            wronskian
        )));
    }
    Ok(JostRoutes { plus_integral, minus_integral, wronskian, spread })
}

/// Dirichlet Jost function `f₊(z, 0)` on the half-line.
pub fn half_line_jost_function(v: &Potential, z: SpectralPoint, grid: &Quadrature) -> Result<CMatrix> {
    if v.domain() != Domain::HalfLine {
        return Err(Error::Contract("half-line Jost function requested for a full-line potential".into()));
    }
    if grid.interval().0.abs() > 1e-12 {
        return Err(Error::Contract(format!("half-line grid must start at 0, not {}", grid.interval().0)));
    }
    Ok(jost_solution(v, z, Side::Plus, grid)?.far)
}
