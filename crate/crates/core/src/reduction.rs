//! Determinants of `I - αK` for semi-separable `K` by reduction to small
//! determinants, plus the Nyström oracle and the resolvent kernel.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{diagonal_value, DiagonalConvention, FactorSamples, SemiSeparableKernel};
use crate::numerics::{det, det2_matrix, inverse, CMatrix, Lu, C0};
use crate::quadrature::{gauss_legendre, Quadrature, Scheme};

pub const NYSTROM_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Successive-iterate tolerance for Picard iteration (relative).
    pub picard: f64,
    pub max_iter: usize,
    /// Cross-route spread above which a warning is attached.
    pub consistency: f64,
    /// Allowed mismatch between the two branch traces for det₁.
    pub trace: f64,
    /// RK4 steps between consecutive propagator points.
    pub ode_substeps: usize,
    /// Condition number above which `U22(b,a)` counts as singular.
    pub resolvent_condition: f64,
    /// Scale-aware threshold for "I - αK not invertible".
    pub singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            picard: 1e-14,
            max_iter: 200,
            consistency: 1e-6,
            trace: 1e-7,
            ode_substeps: 4,
            resolvent_condition: 1e12,
            singular: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    Fhat1,
    Fhat2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum VolterraMethod {
    #[default]
    BackSubstitution,
    PicardIteration,
}

#[derive(Clone, Debug)]
pub struct VolterraSolution {
    pub which: Which,
    pub alpha: Complex64,
    /// `F̂_j` at each grid node.
    pub samples: Vec<CMatrix>,
    pub grid: Quadrature,
    pub method: VolterraMethod,
    pub iterations_used: usize,
    pub residual: f64,
}

/// Panel grid with edges on the kernel's breakpoints and at most `panels` equal pieces otherwise.
pub fn default_grid(k: &SemiSeparableKernel, n_per_panel: usize, panels: usize) -> Result<Quadrature> {
    let (a, b) = k.interval();
    Quadrature::with_breakpoints(
        a,
        b,
        k.breakpoints(),
        n_per_panel,
        (b - a) / panels.max(1) as f64,
        Scheme::GaussLegendre,
    )
}

fn sigma(which: Which) -> f64 {
    match which {
        Which::Fhat1 => -1.0,
        Which::Fhat2 => 1.0,
    }
}

fn panel_order(grid: &Quadrature, which: Which) -> Vec<usize> {
    match which {
        Which::Fhat1 => (0..grid.panels()).rev().collect(),
        Which::Fhat2 => (0..grid.panels()).collect(),
    }
}

fn inner_matrix(grid: &Quadrature, p: usize, which: Which) -> Vec<f64> {
    match which {
        Which::Fhat1 => grid.backward_matrix(p),
        Which::Fhat2 => grid.forward_matrix(p),
    }
}

/// `∫_a^{x_i} B Y` (Fhat2) or `∫_{x_i}^b B Y` (Fhat1) at every node.
fn accumulate(grid: &Quadrature, bs: &[CMatrix], y: &[CMatrix], which: Which) -> Vec<CMatrix> {
    let m = grid.n_per_panel();
    let by: Vec<CMatrix> = bs.iter().zip(y).map(|(b, y)| b * y).collect();
    let mut out = vec![CMatrix::zeros(by[0].rows(), by[0].cols()); grid.len()];
    let mut acc = CMatrix::zeros(by[0].rows(), by[0].cols());
    for p in panel_order(grid, which) {
        let r = grid.panel_range(p);
        let s = inner_matrix(grid, p, which);
        for i in 0..m {
            let mut v = acc.clone();
            for j in 0..m {
                v.axpy(Complex64::new(s[i * m + j], 0.0), &by[r.start + j]);
            }
            out[r.start + i] = v;
        }
        for j in r {
            acc.axpy(Complex64::new(grid.weights()[j], 0.0), &by[j]);
        }
    }
    out
}

fn defect(
    grid: &Quadrature,
    cs: &[CMatrix],
    bs: &[CMatrix],
    f: &[CMatrix],
    y: &[CMatrix],
    alpha: Complex64,
    which: Which,
) -> f64 {
    let phi = accumulate(grid, bs, y, which);
    let sa = alpha * sigma(which);
    (0..grid.len())
        .map(|i| {
            let mut r = &y[i] - &f[i];
            r.axpy(-sa, &(&cs[i] * &phi[i]));
            r.max_abs()
        })
        .fold(0.0, f64::max)
}

/// Solves `F̂1 = F1 - α∫_x^b H F̂1` or `F̂2 = F2 + α∫_a^x H F̂2` on the grid.
pub fn solve_volterra(
    k: &SemiSeparableKernel,
    alpha: Complex64,
    grid: &Quadrature,
    which: Which,
    method: VolterraMethod,
) -> Result<VolterraSolution> {
    let s = k.sample(grid)?;
    solve_volterra_sampled(&s, alpha, grid, which, method, &Tolerances::default())
}

pub fn solve_volterra_sampled(
    s: &FactorSamples,
    alpha: Complex64,
    grid: &Quadrature,
    which: Which,
    method: VolterraMethod,
    tol: &Tolerances,
) -> Result<VolterraSolution> {
    let f = match which {
        Which::Fhat1 => &s.f1,
        Which::Fhat2 => &s.f2,
    };
    let n = grid.len();
    let cs: Vec<CMatrix> = (0..n).map(|i| s.c(i)).collect();
    let bs: Vec<CMatrix> = (0..n).map(|i| s.b(i)).collect();
    let done = |samples: Vec<CMatrix>, iterations_used: usize| {
        let residual = defect(grid, &cs, &bs, f, &samples, alpha, which);
        VolterraSolution { which, alpha, samples, grid: grid.clone(), method, iterations_used, residual }
    };
    if alpha == C0 {
        return Ok(done(f.clone(), 0));
    }
    match method {
        VolterraMethod::BackSubstitution => {
            let y = back_substitution(grid, &cs, &bs, f, alpha, which)?;
            Ok(done(y, 0))
        }
        VolterraMethod::PicardIteration => {
            let sa = alpha * sigma(which);
            let mut y = f.clone();
            let mut change = f64::INFINITY;
            for it in 1..=tol.max_iter {
                let phi = accumulate(grid, &bs, &y, which);
                let next: Vec<CMatrix> = (0..n)
                    .map(|i| {
                        let mut v = f[i].clone();
                        v.axpy(sa, &(&cs[i] * &phi[i]));
                        v
                    })
                    .collect();
                let scale = next.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
                change = next.iter().zip(&y).map(|(a, b)| (a - b).max_abs()).fold(0.0, f64::max);
                y = next;
                if !change.is_finite() {
                    break;
                }
                if change <= tol.picard * (1.0 + scale) {
                    return Ok(done(y, it));
                }
            }
            Err(Error::Convergence { iterations: tol.max_iter, residual: change })
        }
    }
}

fn back_substitution(
    grid: &Quadrature,
    cs: &[CMatrix],
    bs: &[CMatrix],
    f: &[CMatrix],
    alpha: Complex64,
    which: Which,
) -> Result<Vec<CMatrix>> {
    let m = grid.n_per_panel();
    let d = f[0].rows();
    let ncol = f[0].cols();
    let r = bs[0].rows();
    let sa = alpha * sigma(which);
    let mut out = vec![CMatrix::zeros(d, ncol); grid.len()];
    let mut acc = CMatrix::zeros(r, ncol);
    for p in panel_order(grid, which) {
        let range = grid.panel_range(p);
        let s = inner_matrix(grid, p, which);
        let mut sys = CMatrix::identity(m * d);
        let mut rhs = CMatrix::zeros(m * d, ncol);
        for i in 0..m {
            let gi = range.start + i;
            for j in 0..m {
                let h = &cs[gi] * &bs[range.start + j];
                let c = -sa * s[i * m + j];
                for u in 0..d {
                    for v in 0..d {
                        sys[(i * d + u, j * d + v)] += c * h[(u, v)];
                    }
                }
            }
            let mut b = f[gi].clone();
            b.axpy(sa, &(&cs[gi] * &acc));
            rhs.set_block(i * d, 0, &b);
        }
        let lu = Lu::new(&sys)?;
        if lu.is_singular() {
            return Err(Error::Singular(format!("Volterra panel system {p} is singular")));
        }
        let y = lu.solve(&rhs)?;
        for i in 0..m {
            let gi = range.start + i;
            out[gi] = y.submatrix(i * d, 0, d, ncol);
            acc.axpy(Complex64::new(grid.weights()[gi], 0.0), &(&bs[gi] * &out[gi]));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PropagatorRoute {
    /// Block partial integrals of `G_k F̂_j`.
    ClosedForm,
    /// RK4 for `u' = αA(x)u` from the identity at `a`.
    Ode,
}

/// Propagator values at `a`, every grid node, and `b`.
///
/// `ClosedForm` stores `U(x;α)`; `Ode` stores `U(x,a;α)`.
#[derive(Clone, Debug)]
pub struct PropagatorU {
    pub alpha: Complex64,
    pub route: PropagatorRoute,
    pub points: Vec<f64>,
    pub values: Vec<CMatrix>,
}

impl PropagatorU {
    pub fn at_a(&self) -> &CMatrix {
        &self.values[0]
    }

    pub fn at_b(&self) -> &CMatrix {
        self.values.last().unwrap()
    }

    /// `U(x_i, x_j; α)` between stored points.
    pub fn between(&self, i: usize, j: usize) -> Result<CMatrix> {
        Ok(&self.values[i] * &inverse(&self.values[j])?)
    }
}

fn cumulative_forward(grid: &Quadrature, vals: &[CMatrix]) -> (Vec<CMatrix>, CMatrix) {
    let m = grid.n_per_panel();
    let mut out = Vec::with_capacity(vals.len());
    let mut acc = CMatrix::zeros(vals[0].rows(), vals[0].cols());
    for p in 0..grid.panels() {
        let r = grid.panel_range(p);
        let s = grid.forward_matrix(p);
        for i in 0..m {
            let mut v = acc.clone();
            for j in 0..m {
                v.axpy(Complex64::new(s[i * m + j], 0.0), &vals[r.start + j]);
            }
            out.push(v);
        }
        for j in r {
            acc.axpy(Complex64::new(grid.weights()[j], 0.0), &vals[j]);
        }
    }
    (out, acc)
}

fn quad_sum(grid: &Quadrature, vals: &[CMatrix]) -> CMatrix {
    let mut acc = CMatrix::zeros(vals[0].rows(), vals[0].cols());
    for (v, w) in vals.iter().zip(grid.weights()) {
        acc.axpy(Complex64::new(*w, 0.0), v);
    }
    acc
}

fn assemble_u(
    n1: usize,
    n2: usize,
    alpha: Complex64,
    i11: &CMatrix,
    i12: &CMatrix,
    i21: &CMatrix,
    i22: &CMatrix,
) -> CMatrix {
    let mut u = CMatrix::identity(n1 + n2);
    for r in 0..n1 {
        for c in 0..n1 {
            u[(r, c)] -= alpha * i11[(r, c)];
        }
        for c in 0..n2 {
            u[(r, n1 + c)] = alpha * i12[(r, c)];
        }
    }
    for r in 0..n2 {
        for c in 0..n1 {
            u[(n1 + r, c)] = alpha * i21[(r, c)];
        }
        for c in 0..n2 {
            u[(n1 + r, n1 + c)] -= alpha * i22[(r, c)];
        }
    }
    u
}

/// `U(x;α)` from the two Volterra solutions.
pub fn propagator_closed_form(
    s: &FactorSamples,
    grid: &Quadrature,
    fh1: &VolterraSolution,
    fh2: &VolterraSolution,
) -> PropagatorU {
    let alpha = fh1.alpha;
    let (n1, n2) = (s.f1[0].cols(), s.f2[0].cols());
    let n = grid.len();
    let g1f1: Vec<CMatrix> = (0..n).map(|i| &s.g1[i] * &fh1.samples[i]).collect();
    let g2f1: Vec<CMatrix> = (0..n).map(|i| &s.g2[i] * &fh1.samples[i]).collect();
    let g1f2: Vec<CMatrix> = (0..n).map(|i| &s.g1[i] * &fh2.samples[i]).collect();
    let g2f2: Vec<CMatrix> = (0..n).map(|i| &s.g2[i] * &fh2.samples[i]).collect();
    let (c11, t11) = cumulative_forward(grid, &g1f1);
    let (c21, t21) = cumulative_forward(grid, &g2f1);
    let (c12, t12) = cumulative_forward(grid, &g1f2);
    let (c22, t22) = cumulative_forward(grid, &g2f2);
    let (a, b) = grid.interval();
    let mut points = vec![a];
    let z = |r, c| CMatrix::zeros(r, c);
    let mut values = vec![assemble_u(n1, n2, alpha, &t11, &z(n1, n2), &t21, &z(n2, n2))];
    for i in 0..n {
        points.push(grid.nodes()[i]);
        values.push(assemble_u(n1, n2, alpha, &(&t11 - &c11[i]), &c12[i], &(&t21 - &c21[i]), &c22[i]));
    }
    points.push(b);
    values.push(assemble_u(n1, n2, alpha, &z(n1, n1), &t12, &z(n2, n1), &t22));
    PropagatorU { alpha, route: PropagatorRoute::ClosedForm, points, values }
}

fn rk4_step(k: &SemiSeparableKernel, alpha: Complex64, x: f64, h: f64, u: &CMatrix) -> Result<CMatrix> {
    let a0 = k.block_a(x)?.scale(alpha);
    let am = k.block_a(x + 0.5 * h)?.scale(alpha);
    let a1 = k.block_a(x + h)?.scale(alpha);
    let hc = Complex64::new(h, 0.0);
    let k1 = &a0 * u;
    let mut t = u.clone();
    t.axpy(0.5 * hc, &k1);
    let k2 = &am * &t;
    let mut t = u.clone();
    t.axpy(0.5 * hc, &k2);
    let k3 = &am * &t;
    let mut t = u.clone();
    t.axpy(hc, &k3);
    let k4 = &a1 * &t;
    let mut out = u.clone();
    out.axpy(hc / 6.0, &k1);
    out.axpy(hc / 3.0, &k2);
    out.axpy(hc / 3.0, &k3);
    out.axpy(hc / 6.0, &k4);
    Ok(out)
}

/// `U(x1, x0; α)` by RK4 with `steps` equal steps (either direction).
pub fn propagate_ode(k: &SemiSeparableKernel, alpha: Complex64, x0: f64, x1: f64, steps: usize) -> Result<CMatrix> {
    let r = k.n1() + k.n2();
    let mut u = CMatrix::identity(r);
    if x0 == x1 || alpha == C0 {
        return Ok(u);
    }
    let steps = steps.max(1);
    let h = (x1 - x0) / steps as f64;
    for s in 0..steps {
        u = rk4_step(k, alpha, x0 + h * s as f64, h, &u)?;
    }
    Ok(u)
}

pub fn propagator_ode(
    k: &SemiSeparableKernel,
    alpha: Complex64,
    grid: &Quadrature,
    substeps: usize,
) -> Result<PropagatorU> {
    let (a, b) = grid.interval();
    let mut points = vec![a];
    points.extend_from_slice(grid.nodes());
    points.push(b);
    let r = k.n1() + k.n2();
    let mut values = Vec::with_capacity(points.len());
    let mut u = CMatrix::identity(r);
    values.push(u.clone());
    for w in points.windows(2) {
        let h = (w[1] - w[0]) / substeps.max(1) as f64;
        for s in 0..substeps.max(1) {
            u = if alpha == C0 { u } else { rk4_step(k, alpha, w[0] + h * s as f64, h, &u)? };
        }
        values.push(u.clone());
    }
    Ok(PropagatorU { alpha, route: PropagatorRoute::Ode, points, values })
}

pub fn propagator(
    k: &SemiSeparableKernel,
    alpha: Complex64,
    grid: &Quadrature,
    route: PropagatorRoute,
) -> Result<PropagatorU> {
    match route {
        PropagatorRoute::ClosedForm => {
            let s = k.sample(grid)?;
            let tol = Tolerances::default();
            let f1 = solve_volterra_sampled(&s, alpha, grid, Which::Fhat1, VolterraMethod::BackSubstitution, &tol)?;
            let f2 = solve_volterra_sampled(&s, alpha, grid, Which::Fhat2, VolterraMethod::BackSubstitution, &tol)?;
            Ok(propagator_closed_form(&s, grid, &f1, &f2))
        }
        PropagatorRoute::Ode => propagator_ode(k, alpha, grid, Tolerances::default().ode_substeps),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DetKind {
    Det1,
    Det2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Route {
    ReducedH1,
    ReducedH2,
    PropagatorA,
    PropagatorB,
    Nystrom,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::ReducedH1 => "reduced_h1",
            Route::ReducedH2 => "reduced_h2",
            Route::PropagatorA => "propagator_a",
            Route::PropagatorB => "propagator_b",
            Route::Nystrom => "nystrom",
        }
    }
}

pub const REDUCTION_ROUTES: [Route; 4] = [Route::ReducedH1, Route::PropagatorA, Route::ReducedH2, Route::PropagatorB];

#[derive(Clone, Debug)]
pub struct DetResult {
    pub value: Complex64,
    pub kind: DetKind,
    pub route: Route,
    pub alpha: Complex64,
    pub grid_nodes: usize,
    pub cross_route_spread: f64,
    /// Every computed route value, canonical first.
    pub routes: Vec<(Route, Complex64)>,
    /// `(∫tr F1G1, ∫tr F2G2)`.
    pub traces: (Complex64, Complex64),
    /// False when the branch traces disagree beyond tolerance (det₁ only).
    pub reliable: bool,
    pub warnings: Vec<String>,
}

impl DetResult {
    pub fn route_value(&self, route: Route) -> Option<Complex64> {
        self.routes.iter().find(|(r, _)| *r == route).map(|(_, v)| *v)
    }
}

/// Largest pairwise deviation relative to the largest value (floored by `floor`).
pub fn spread(values: &[Complex64], floor: f64) -> f64 {
    let scale = values.iter().map(|v| v.norm()).fold(floor, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            worst = worst.max((values[i] - values[j]).norm());
        }
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Intermediate data shared by the det₁ and det₂ routes.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub alpha: Complex64,
    pub grid_nodes: usize,
    pub fhat1: VolterraSolution,
    pub fhat2: VolterraSolution,
    pub u: PropagatorU,
    pub trace1: Complex64,
    pub trace2: Complex64,
    /// `det(I - α∫G1F̂1)`, `det U(a)`, `det(I - α∫G2F̂2)`, `det U(b)`.
    pub reduced: [Complex64; 4],
}

pub fn reduce(
    k: &SemiSeparableKernel,
    alpha: Complex64,
    grid: &Quadrature,
    method: VolterraMethod,
    tol: &Tolerances,
) -> Result<Reduction> {
    let s = k.sample(grid)?;
    let fhat1 = solve_volterra_sampled(&s, alpha, grid, Which::Fhat1, method, tol)?;
    let fhat2 = solve_volterra_sampled(&s, alpha, grid, Which::Fhat2, method, tol)?;
    let n = grid.len();
    let g1f1: Vec<CMatrix> = (0..n).map(|i| &s.g1[i] * &fhat1.samples[i]).collect();
    let g2f2: Vec<CMatrix> = (0..n).map(|i| &s.g2[i] * &fhat2.samples[i]).collect();
    let h1 = &CMatrix::identity(k.n1()) - &quad_sum(grid, &g1f1).scale(alpha);
    let h2 = &CMatrix::identity(k.n2()) - &quad_sum(grid, &g2f2).scale(alpha);
    let u = propagator_closed_form(&s, grid, &fhat1, &fhat2);
    let tr = |f: &[CMatrix], g: &[CMatrix]| -> Complex64 {
        (0..n).map(|i| (&f[i] * &g[i]).trace() * grid.weights()[i]).sum()
    };
    let trace1 = tr(&s.f1, &s.g1);
    let trace2 = tr(&s.f2, &s.g2);
    let reduced = [det(&h1)?, det(u.at_a())?, det(&h2)?, det(u.at_b())?];
    Ok(Reduction { alpha, grid_nodes: n, fhat1, fhat2, u, trace1, trace2, reduced })
}

fn finish(
    red: &Reduction,
    kind: DetKind,
    values: [Complex64; 4],
    tol: &Tolerances,
    mut warnings: Vec<String>,
    reliable: bool,
) -> DetResult {
    let floor = tol.singular * (red.alpha * red.trace1).exp().norm();
    let sp = spread(&values, floor);
    if sp > tol.consistency {
        warnings.push(format!("cross-route spread {sp:.3e} exceeds {:.1e}", tol.consistency));
    }
    DetResult {
        value: values[0],
        kind,
        route: Route::ReducedH1,
        alpha: red.alpha,
        grid_nodes: red.grid_nodes,
        cross_route_spread: sp,
        routes: REDUCTION_ROUTES.iter().cloned().zip(values).collect(),
        traces: (red.trace1, red.trace2),
        reliable,
        warnings,
    }
}

pub fn det2_from_reduction(red: &Reduction, tol: &Tolerances) -> DetResult {
    let e1 = (red.alpha * red.trace1).exp();
    let e2 = (red.alpha * red.trace2).exp();
    let r = red.reduced;
    finish(red, DetKind::Det2, [r[0] * e1, r[1] * e1, r[2] * e2, r[3] * e2], tol, Vec::new(), true)
}

pub fn det1_from_reduction(red: &Reduction, tol: &Tolerances) -> DetResult {
    let mismatch = (red.trace1 - red.trace2).norm();
    let mut warnings = Vec::new();
    let reliable = mismatch <= tol.trace * (1.0 + red.trace1.norm());
    if !reliable {
        warnings.push(format!(
            "branch traces differ by {mismatch:.3e}; the kernel is not trace-consistent and det₁ is unreliable"
        ));
    }
    finish(red, DetKind::Det1, red.reduced, tol, warnings, reliable)
}

/// All four reduction routes for `det₂(I - αK)`; canonical value from the ℋ₁ reduction.
pub fn det2_semiseparable(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<DetResult> {
    let tol = Tolerances::default();
    Ok(det2_from_reduction(&reduce(k, alpha, grid, VolterraMethod::BackSubstitution, &tol)?, &tol))
}

/// All four reduction routes for `det(I - αK)`.
pub fn det1_semiseparable(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<DetResult> {
    let tol = Tolerances::default();
    Ok(det1_from_reduction(&reduce(k, alpha, grid, VolterraMethod::BackSubstitution, &tol)?, &tol))
}

/// Identity check `det₁ = det₂ · exp(-α trK)`; returns the absolute defect.
pub fn det_bridge_defect(d1: &DetResult, d2: &DetResult) -> f64 {
    (d1.value - d2.value * (-d1.alpha * d1.traces.0).exp()).norm()
}

fn check_size(n: usize, d: usize) -> Result<()> {
    if n * d > NYSTROM_LIMIT {
        return Err(Error::Size { order: n * d, limit: NYSTROM_LIMIT });
    }
    Ok(())
}

fn weighted_matrix(
    grid: &Quadrature,
    d: usize,
    alpha: Complex64,
    mut entry: impl FnMut(usize, usize) -> Option<CMatrix>,
) -> CMatrix {
    let n = grid.len();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let mut m = CMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            if let Some(kij) = entry(i, j) {
                let c = alpha * sw[i] * sw[j];
                for u in 0..d {
                    for v in 0..d {
                        m[(i * d + u, j * d + v)] = c * kij[(u, v)];
                    }
                }
            }
        }
    }
    m
}

/// Block `(i,j)` is `α √w_i K(x_i, x_j) √w_j`.
pub fn nystrom_matrix(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<CMatrix> {
    check_size(grid.len(), k.d())?;
    let s = k.sample(grid)?;
    Ok(nystrom_from_samples(&s, k.convention, alpha, grid))
}

pub(crate) fn nystrom_from_samples(
    s: &FactorSamples,
    convention: DiagonalConvention,
    alpha: Complex64,
    grid: &Quadrature,
) -> CMatrix {
    let d = s.f1[0].rows();
    weighted_matrix(grid, d, alpha, |i, j| {
        Some(if j < i {
            &s.f1[i] * &s.g1[j]
        } else if i < j {
            &s.f2[i] * &s.g2[j]
        } else {
            diagonal_value(convention, || &s.f1[i] * &s.g1[i], || &s.f2[i] * &s.g2[i], d)
        })
    })
}

pub fn det2_nystrom(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<DetResult> {
    let m = nystrom_matrix(k, alpha, grid)?;
    let value = det2_matrix(&m)?;
    let s = k.sample(grid)?;
    let tr = |f: &[CMatrix], g: &[CMatrix]| -> Complex64 {
        (0..grid.len()).map(|i| (&f[i] * &g[i]).trace() * grid.weights()[i]).sum()
    };
    Ok(DetResult {
        value,
        kind: DetKind::Det2,
        route: Route::Nystrom,
        alpha,
        grid_nodes: grid.len(),
        cross_route_spread: 0.0,
        routes: vec![(Route::Nystrom, value)],
        traces: (tr(&s.f1, &s.g1), tr(&s.f2, &s.g2)),
        reliable: true,
        warnings: Vec::new(),
    })
}

/// `Σ w_i tr K(x_i, x_i)` under the kernel's diagonal convention.
pub fn nystrom_trace(k: &SemiSeparableKernel, grid: &Quadrature) -> Result<Complex64> {
    let s = k.sample(grid)?;
    let d = k.d();
    Ok((0..grid.len())
        .map(|i| {
            diagonal_value(k.convention, || &s.f1[i] * &s.g1[i], || &s.f2[i] * &s.g2[i], d).trace() * grid.weights()[i]
        })
        .sum())
}

/// Largest jump `‖F1G1 - F2G2‖` across the diagonal at the grid nodes, relative to the kernel size.
pub fn diagonal_jump(k: &SemiSeparableKernel, grid: &Quadrature) -> Result<f64> {
    let s = k.sample(grid)?;
    let mut jump: f64 = 0.0;
    let mut size: f64 = 0.0;
    for i in 0..grid.len() {
        let l = &s.f1[i] * &s.g1[i];
        let u = &s.f2[i] * &s.g2[i];
        jump = jump.max((&l - &u).max_abs());
        size = size.max(l.max_abs()).max(u.max_abs());
    }
    Ok(if size == 0.0 { 0.0 } else { jump / size })
}

/// True when the diagonal jump `J = F1G1 - F2G2` is nilpotent at every node.
///
/// The Average-convention Nyström error is first order in the panel width for a
/// non-nilpotent jump and second order otherwise.
pub fn jump_is_nilpotent(k: &SemiSeparableKernel, grid: &Quadrature) -> Result<bool> {
    let s = k.sample(grid)?;
    let d = k.d();
    for i in 0..grid.len() {
        let l = &s.f1[i] * &s.g1[i];
        let j = &l - &(&s.f2[i] * &s.g2[i]);
        let scale = l.max_abs().max(j.max_abs()).max(f64::MIN_POSITIVE);
        let mut p = j.clone();
        for _ in 1..d {
            p = &p * &j;
        }
        if p.max_abs() > 1e-12 * scale.powi(d as i32) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Nyström oracle on `grid` and its refinement, combined by one Richardson step.
#[derive(Clone, Debug)]
pub struct RefinedNystrom {
    pub coarse: Complex64,
    pub fine: Complex64,
    pub extrapolated: Complex64,
    /// Assumed convergence order of the raw oracle.
    pub order: u32,
    pub nodes: (usize, usize),
}

pub fn det2_nystrom_refined(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<RefinedNystrom> {
    let fine_grid = grid.refined();
    check_size(fine_grid.len(), k.d())?;
    let coarse = det2_nystrom(k, alpha, grid)?.value;
    let fine = det2_nystrom(k, alpha, &fine_grid)?.value;
    let order = if jump_is_nilpotent(k, grid)? { 2 } else { 1 };
    let f = (1u32 << order) as f64;
    let extrapolated = (fine * f - coarse) / (f - 1.0);
    Ok(RefinedNystrom { coarse, fine, extrapolated, order, nodes: (grid.len(), fine_grid.len()) })
}

/// `det₂` of the discretized `αH_a` and `αH_b` (strictly block-triangular).
pub fn det2_volterra_is_one(
    k: &SemiSeparableKernel,
    alpha: Complex64,
    grid: &Quadrature,
) -> Result<(Complex64, Complex64)> {
    let (ha, hb) = volterra_matrices(k, alpha, grid)?;
    Ok((det2_matrix(&ha)?, det2_matrix(&hb)?))
}

/// Nyström matrices of `αH_a` (lower) and `αH_b` (upper), zero on the diagonal.
pub fn volterra_matrices(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<(CMatrix, CMatrix)> {
    check_size(grid.len(), k.d())?;
    let s = k.sample(grid)?;
    let d = k.d();
    let h = |i: usize, j: usize| &(&s.f1[i] * &s.g1[j]) - &(&s.f2[i] * &s.g2[j]);
    let ha = weighted_matrix(grid, d, alpha, |i, j| (j < i).then(|| h(i, j)));
    let hb = weighted_matrix(grid, d, alpha, |i, j| (i < j).then(|| h(i, j)));
    Ok((ha, hb))
}

/// Resolvent kernel `L(x,x';α)` with `(I - αK)^{-1} = I + αL`.
#[derive(Clone, Debug)]
pub struct Resolvent {
    kernel: SemiSeparableKernel,
    pub alpha: Complex64,
    grid: Quadrature,
    /// `U(x_i, a)` and its inverse at the grid nodes.
    u: Vec<CMatrix>,
    u_inv: Vec<CMatrix>,
    pub p: CMatrix,
}

impl Resolvent {
    pub fn new(k: &SemiSeparableKernel, alpha: Complex64, grid: &Quadrature) -> Result<Self> {
        Self::with_tolerances(k, alpha, grid, &Tolerances::default())
    }

    pub fn with_tolerances(
        k: &SemiSeparableKernel,
        alpha: Complex64,
        grid: &Quadrature,
        tol: &Tolerances,
    ) -> Result<Self> {
        if alpha == C0 {
            return Err(Error::ResolventTrivial);
        }
        let red = reduce(k, alpha, grid, VolterraMethod::BackSubstitution, tol)?;
        let floor = tol.singular * (alpha * red.trace1).exp().norm().max(f64::MIN_POSITIVE);
        let d2 = red.reduced[0] * (alpha * red.trace1).exp();
        if d2.norm() < floor {
            return Err(Error::Singular(format!("I - αK is not invertible at α = {alpha} (det₂ = {d2:.3e})")));
        }
        let prop = propagator_ode(k, alpha, grid, tol.ode_substeps)?;
        let (n1, n2) = (k.n1(), k.n2());
        let ub = prop.at_b();
        let u22 = ub.submatrix(n1, n1, n2, n2);
        let u21 = ub.submatrix(n1, 0, n2, n1);
        let lu = Lu::new(&u22)?;
        let u22_inv = if lu.is_singular() { None } else { lu.solve(&CMatrix::identity(n2)).ok() };
        let condition = u22_inv.as_ref().map_or(f64::INFINITY, |inv| u22.norm_inf() * inv.norm_inf());
        let u22_inv = match u22_inv {
            Some(inv) if condition <= tol.resolvent_condition => inv,
            _ => return Err(Error::ResolventSingular { condition }),
        };
        let mut p = CMatrix::zeros(n1 + n2, n1 + n2);
        p.set_block(n1, 0, &(&u22_inv * &u21));
        p.set_block(n1, n1, &CMatrix::identity(n2));
        let u: Vec<CMatrix> = prop.values[1..=grid.len()].to_vec();
        let u_inv = u.iter().map(inverse).collect::<Result<Vec<_>>>()?;
        Ok(Resolvent { kernel: k.clone(), alpha, grid: grid.clone(), u, u_inv, p })
    }

    pub fn grid(&self) -> &Quadrature {
        &self.grid
    }

    fn interp(&self, vals: &[CMatrix], x: f64) -> Result<CMatrix> {
        let (a, b) = self.grid.interval();
        let p = self.grid.panel_of(x).ok_or(Error::Domain { x, a, b })?;
        let r = self.grid.panel_range(p);
        let nodes = &self.grid.nodes()[r.clone()];
        if let Some(i) = nodes.iter().position(|&t| t == x) {
            return Ok(vals[r.start + i].clone());
        }
        // barycentric Lagrange on the panel nodes
        let m = nodes.len();
        let mut lam = vec![1.0; m];
        for j in 0..m {
            for q in 0..m {
                if q != j {
                    lam[j] /= nodes[j] - nodes[q];
                }
            }
        }
        let mut num = CMatrix::zeros(vals[0].rows(), vals[0].cols());
        let mut den = 0.0;
        for j in 0..m {
            let c = lam[j] / (x - nodes[j]);
            num.axpy(Complex64::new(c, 0.0), &vals[r.start + j]);
            den += c;
        }
        Ok(num.scale(Complex64::new(1.0 / den, 0.0)))
    }

    fn u_at(&self, x: f64) -> Result<(CMatrix, CMatrix)> {
        if let Some(i) = self.grid.nodes().iter().position(|&t| t == x) {
            return Ok((self.u[i].clone(), self.u_inv[i].clone()));
        }
        let u = self.interp(&self.u, x)?;
        let inv = inverse(&u)?;
        Ok((u, inv))
    }

    /// `L(x, x')` for `x ≠ x'`; on the diagonal the average of both branches.
    pub fn eval(&self, x: f64, xp: f64) -> Result<CMatrix> {
        let c = self.kernel.block_c(x)?;
        let b = self.kernel.block_b(xp)?;
        let (ux, _) = self.u_at(x)?;
        let (_, upinv) = self.u_at(xp)?;
        let r = self.p.rows();
        let lower = || &(&(&c * &ux) * &(&(&CMatrix::identity(r) - &self.p) * &upinv)) * &b;
        let upper = || -&(&(&(&c * &ux) * &(&self.p * &upinv)) * &b);
        Ok(if xp < x {
            lower()
        } else if x < xp {
            upper()
        } else {
            diagonal_value(DiagonalConvention::Average, lower, upper, self.kernel.d())
        })
    }

    /// Defect of `L - K - α∫K L` at `(x, x')`, the integral split at both points.
    pub fn identity_defect_at(&self, x: f64, xp: f64, n_per_panel: usize) -> Result<CMatrix> {
        let (t, w) = gauss_legendre(n_per_panel);
        let mut cuts: Vec<f64> = self.grid.edges().to_vec();
        cuts.push(x);
        cuts.push(xp);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let d = self.kernel.d();
        let mut integral = CMatrix::zeros(d, d);
        for seg in cuts.windows(2) {
            let (mid, half) = (0.5 * (seg[0] + seg[1]), 0.5 * (seg[1] - seg[0]));
            for (ti, wi) in t.iter().zip(&w) {
                let y = mid + half * ti;
                let kk = self.kernel.eval_kernel(x, y)?;
                let ll = self.eval(y, xp)?;
                integral.axpy(Complex64::new(half * wi, 0.0), &(&kk * &ll));
            }
        }
        let mut e = self.eval(x, xp)?;
        e -= &self.kernel.eval_kernel(x, xp)?;
        e.axpy(-self.alpha, &integral);
        Ok(e)
    }

    /// `|α| (Σ w_i w_j ‖E(x_i,x_j)‖²)^{1/2}` over the resolvent grid, bounding
    /// `‖(I - αK)(I + αL) - I‖`.
    pub fn identity_defect(&self) -> Result<f64> {
        let nodes = self.grid.nodes();
        let w = self.grid.weights();
        let m = self.grid.n_per_panel();
        let mut acc = 0.0;
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                if i == j {
                    continue;
                }
                let e = self.identity_defect_at(nodes[i], nodes[j], m)?;
                acc += w[i] * w[j] * e.norm_fro().powi(2);
            }
        }
        Ok(self.alpha.norm() * acc.sqrt())
    }
}

pub fn resolvent_kernel(
    k: &SemiSeparableKernel,
    alpha: Complex64,
    grid: &Quadrature,
    x: f64,
    xp: f64,
) -> Result<CMatrix> {
    Resolvent::new(k, alpha, grid)?.eval(x, xp)
}
