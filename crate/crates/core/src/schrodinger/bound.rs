use num_complex::Complex64;
use rayon::prelude::*;

use super::jost::{half_line_jost_function, jost_function, JostRoute};
use super::potential::{Domain, GridSpec, Potential};
use super::SpectralPoint;
use crate::error::{Error, Result};
use crate::numerics::{det, herm_eigs, inverse, CMatrix};
use crate::quadrature::Quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundStateMethod {
    JostZeros,
    BirmanSchwinger,
    DirectDiag,
}

impl BoundStateMethod {
    pub const ALL: [BoundStateMethod; 3] =
        [BoundStateMethod::JostZeros, BoundStateMethod::BirmanSchwinger, BoundStateMethod::DirectDiag];

    pub fn name(&self) -> &'static str {
        match self {
            BoundStateMethod::JostZeros => "jost_zeros",
            BoundStateMethod::BirmanSchwinger => "birman_schwinger",
            BoundStateMethod::DirectDiag => "direct_diag",
        }
    }
}

impl std::str::FromStr for BoundStateMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jost_zeros" | "jostzeros" => Ok(Self::JostZeros),
            "birman_schwinger" | "birmanschwinger" => Ok(Self::BirmanSchwinger),
            "direct_diag" | "directdiag" => Ok(Self::DirectDiag),
            other => Err(Error::Parse(format!("unknown bound-state method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundStateOptions {
    pub grid: GridSpec,
    /// Coarser grid for the dense Birman–Schwinger eigenproblem.
    pub bs_grid: GridSpec,
    /// Birman–Schwinger spectral parameter `λ` in `(H₀ + λ)^{-1}`.
    pub lambda: f64,
    /// Second `λ` for the sensitivity check.
    pub lambda_check: f64,
    /// Eigenvalues of the finite-difference Hamiltonian below `-lambda_cut` are counted.
    pub lambda_cut: f64,
    pub kappa_min: f64,
    pub kappa_points: usize,
    /// Allowed `|Im det ℱ| / (1 + |det ℱ|)` on the negative axis.
    pub residue_tol: f64,
    /// Zeros closer than this to `κ = 0` make the count inconclusive.
    pub resonance_kappa: f64,
    /// Box padding beyond the truncated support for the finite-difference count.
    pub pad: f64,
    pub step: f64,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions {
            grid: GridSpec::default(),
            bs_grid: GridSpec { n_per_panel: 16, max_panel: 2.0, truncation_tol: 1e-10 },
            lambda: 1e-6,
            lambda_check: 1e-5,
            lambda_cut: 1e-8,
            kappa_min: 1e-4,
            kappa_points: 400,
            residue_tol: 1e-8,
            resonance_kappa: 1e-6,
            pad: 100.0,
            step: 2.5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundStateCount {
    pub method: BoundStateMethod,
    pub count: usize,
    pub inconclusive: bool,
    /// Located energies (zero search only).
    pub energies: Vec<f64>,
    pub notes: Vec<String>,
}

impl BoundStateCount {
    fn new(method: BoundStateMethod, count: usize) -> Self {
        BoundStateCount { method, count, inconclusive: false, energies: Vec::new(), notes: Vec::new() }
    }

    fn flag(&mut self, note: String) {
        self.inconclusive = true;
        self.notes.push(note);
    }
}

pub fn count_bound_states(
    v: &Potential,
    method: BoundStateMethod,
    opts: &BoundStateOptions,
) -> Result<BoundStateCount> {
    v.require_hermitian("bound-state counting")?;
    let (grid, _) = v.grid(&opts.grid)?;
    if v.max_norm(&grid)? == 0.0 {
        return Ok(BoundStateCount::new(method, 0));
    }
    match method {
        BoundStateMethod::JostZeros => jost_zeros(v, &grid, opts),
        BoundStateMethod::BirmanSchwinger => birman_schwinger(v, &v.grid(&opts.bs_grid)?.0, opts),
        BoundStateMethod::DirectDiag => direct_diag(v, &grid, opts),
    }
}

/// Counts by all methods; differing counts give [`Error::Inconsistent`] naming each.
pub fn count_bound_states_all(v: &Potential, opts: &BoundStateOptions) -> Result<Vec<BoundStateCount>> {
    let counts = BoundStateMethod::ALL.iter().map(|&m| count_bound_states(v, m, opts)).collect::<Result<Vec<_>>>()?;
    if counts.iter().any(|c| c.count != counts[0].count) {
        let list: Vec<String> = counts.iter().map(|c| format!("{} = {}", c.method.name(), c.count)).collect();
        return Err(Error::Inconsistent(format!("bound-state counts differ: {}", list.join(", "))));
    }
    Ok(counts)
}

fn jost_det(v: &Potential, grid: &Quadrature, kappa: f64) -> Result<Complex64> {
    let z = SpectralPoint::from_k(Complex64::new(0.0, kappa))?;
    let f = match v.domain() {
        Domain::FullLine => jost_function(v, z, grid, JostRoute::PlusIntegral)?,
        Domain::HalfLine => half_line_jost_function(v, z, grid)?,
    };
    det(&f)
}

fn jost_zeros(v: &Potential, grid: &Quadrature, opts: &BoundStateOptions) -> Result<BoundStateCount> {
    let kmax = 1.0 + v.max_norm(grid)?.sqrt();
    let n = opts.kappa_points.max(2);
    let (l0, l1) = (opts.kappa_min.ln(), kmax.ln());
    let kappas: Vec<f64> = (0..n).map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()).collect();
    let values = kappas.par_iter().map(|&k| jost_det(v, grid, k)).collect::<Result<Vec<_>>>()?;
    let mut out = BoundStateCount::new(BoundStateMethod::JostZeros, 0);
    let worst = values.iter().map(|d| d.im.abs() / (1.0 + d.norm())).fold(0.0, f64::max);
    if worst > opts.residue_tol {
        out.flag(format!("imaginary part of det F up to {worst:.3e} on the negative axis"));
    }
    let g: Vec<f64> = values.iter().map(|d| d.re).collect();
    let eval = |k: f64| jost_det(v, grid, k).map(|d| d.re);
    for i in 0..n - 1 {
        if g[i] == 0.0 || g[i].signum() != g[i + 1].signum() && g[i + 1] != 0.0 {
            let kz = bisect(&eval, kappas[i], kappas[i + 1], g[i])?;
            out.count += 1;
            out.energies.push(-kz * kz);
            if i == 0 || kz < opts.resonance_kappa {
                out.flag(format!("zero at kappa = {kz:.3e} next to the threshold"));
            }
        }
    }
    for i in 1..n - 1 {
        let local_min = g[i].abs() <= g[i - 1].abs() && g[i].abs() <= g[i + 1].abs();
        let same = g[i - 1].signum() == g[i].signum() && g[i].signum() == g[i + 1].signum();
        if local_min && same {
            let (kz, gz, crossed) = golden_min(&eval, kappas[i - 1], kappas[i + 1], g[i].signum())?;
            let scale = g[i - 1].abs().max(g[i + 1].abs());
            if crossed {
                out.count += 2;
                out.flag(format!("pair of close zeros near kappa = {kz:.3e}"));
            } else if gz.abs() < 1e-6 * scale {
                out.flag(format!("near-double zero of det F at kappa = {kz:.3e}"));
            }
        }
    }
    out.energies.sort_by(f64::total_cmp);
    Ok(out)
}

fn bisect(f: &impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, mut flo: f64) -> Result<f64> {
    if flo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Golden-section minimum of `|f|` on `[a, b]`; also reports whether `f` changed sign.
fn golden_min(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, sign: f64) -> Result<(f64, f64, bool)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc.signum() != sign || fd.signum() != sign {
            let x = if fc.signum() != sign { c } else { d };
            return Ok((x, 0.0, true));
        }
        if fc.abs() < fd.abs() {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        if b - a <= 1e-12 * b {
            break;
        }
    }
    let (x, fx) = if fc.abs() < fd.abs() { (c, fc) } else { (d, fd) };
    Ok((x, fx, false))
}

/// `v(x)`, `sign V(x)` (with `+1` on the kernel) from the Hermitian eigen-decomposition.
fn sqrt_and_sign(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let e = herm_eigs(m)?;
    let scale = e.values.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let n = e.values.len();
    let build = |f: &dyn Fn(f64) -> f64| {
        CMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| e.vectors[(i, k)] * f(e.values[k]) * e.vectors[(j, k)].conj()).sum()
        })
    };
    let tiny = 1e-14 * scale;
    let v = build(&|l| if l.abs() <= tiny { 0.0 } else { l.abs().sqrt() });
    let j = build(&|l| if l < -tiny { -1.0 } else { 1.0 });
    Ok((v, j))
}

fn free_resolvent(domain: Domain, kappa: f64, x: f64, y: f64) -> f64 {
    match domain {
        Domain::FullLine => (-kappa * (x - y).abs()).exp() / (2.0 * kappa),
        Domain::HalfLine => ((-kappa * (x - y).abs()).exp_m1() - (-kappa * (x + y)).exp_m1()) / (2.0 * kappa),
    }
}

fn positive_count(m: &CMatrix) -> Result<usize> {
    Ok(herm_eigs(m)?.values.iter().filter(|&&l| l > 0.0).count())
}

/// `n₊(J + v R₀(-λ) v) - n₊(J)` on the Nyström grid.
fn birman_schwinger_at(v: &Potential, grid: &Quadrature, lambda: f64) -> Result<usize> {
    let kappa = lambda.sqrt();
    let d = v.d();
    let n = grid.len();
    let mut vs = Vec::with_capacity(n);
    let mut js = Vec::with_capacity(n);
    for m in v.samples(grid) {
        let (s, j) = sqrt_and_sign(&m)?;
        vs.push(s);
        js.push(j);
    }
    let (x, w) = (grid.nodes(), grid.weights());
    let mut big = CMatrix::zeros(n * d, n * d);
    let mut base = 0;
    for i in 0..n {
        base += positive_count(&js[i])?;
        for j in 0..n {
            let r = free_resolvent(v.domain(), kappa, x[i], x[j]) * (w[i] * w[j]).sqrt();
            let mut block = (&vs[i] * &vs[j]).scale(Complex64::new(r, 0.0));
            if i == j {
                block += &js[i];
            }
            big.set_block(i * d, j * d, &block);
        }
    }
    let total = positive_count(&big)?;
    Ok(total.saturating_sub(base))
}

fn birman_schwinger(v: &Potential, grid: &Quadrature, opts: &BoundStateOptions) -> Result<BoundStateCount> {
    let count = birman_schwinger_at(v, grid, opts.lambda)?;
    let mut out = BoundStateCount::new(BoundStateMethod::BirmanSchwinger, count);
    let check = birman_schwinger_at(v, grid, opts.lambda_check)?;
    if check != count {
        out.flag(format!("count {count} at lambda = {:e} but {check} at {:e}", opts.lambda, opts.lambda_check));
    }
    Ok(out)
}

/// Negative inertia of the Dirichlet finite-difference Hamiltonian shifted by `lambda_cut`.
fn direct_diag(v: &Potential, grid: &Quadrature, opts: &BoundStateOptions) -> Result<BoundStateCount> {
    let (a, b) = grid.interval();
    let lo = match v.domain() {
        Domain::FullLine => a - opts.pad,
        Domain::HalfLine => 0.0,
    };
    let hi = b + opts.pad;
    let cells = ((hi - lo) / opts.step).ceil() as usize;
    let h = (hi - lo) / cells as f64;
    let d = v.d();
    let diag = 2.0 / (h * h) + opts.lambda_cut;
    let off2 = 1.0 / (h * h * h * h);
    let mut count = 0;
    if d == 1 {
        let mut prev = f64::INFINITY;
        for j in 1..cells {
            let x = lo + j as f64 * h;
            let mut p = diag + v.eval(x)[(0, 0)].re;
            if prev.is_finite() {
                p -= off2 / prev;
            }
            if p < 0.0 {
                count += 1;
            }
            prev = p;
        }
    } else {
        let mut prev: Option<CMatrix> = None;
        for j in 1..cells {
            let x = lo + j as f64 * h;
            let mut p = v.eval(x);
            for i in 0..d {
                p[(i, i)] += diag;
            }
            if let Some(q) = &prev {
                p.axpy(Complex64::new(-off2, 0.0), &inverse(q)?);
            }
            let sym = CMatrix::from_fn(d, d, |r, c| 0.5 * (p[(r, c)] + p[(c, r)].conj()));
            count += herm_eigs(&sym)?.values.iter().filter(|&&l| l < 0.0).count();
            prev = Some(sym);
        }
    }
    Ok(BoundStateCount::new(BoundStateMethod::DirectDiag, count))
}

/// `∫₀^∞ x tr V₋(x) dx` with `V₋ = (|V| - V)/2`.
pub fn bargmann_bound(v: &Potential, grid: &Quadrature) -> Result<f64> {
    v.require_hermitian("the Bargmann bound")?;
    if v.domain() != Domain::HalfLine {
        return Err(Error::Contract("the Bargmann bound is stated on the half-line".into()));
    }
    let mut total = 0.0;
    for (&x, &w) in grid.nodes().iter().zip(grid.weights()) {
        let neg: f64 = herm_eigs(&v.eval(x))?.values.iter().map(|&l| (-l).max(0.0)).sum();
        total += w * x * neg;
    }
    Ok(total)
}
