use std::path::Path;
use std::time::Instant;

use jostdet_core::numerics::det;
use jostdet_core::reduction::{
    default_grid, det1_from_reduction, det2_from_reduction, det2_nystrom, nystrom_trace, reduce, Tolerances,
    NYSTROM_LIMIT, REDUCTION_ROUTES,
};
use jostdet_core::schrodinger::{
    bargmann_bound, build_k_fullline, build_k_halfline, count_bound_states, first_order_check, fredholm_jost_check,
    half_line_jost_function, jost_function_routes, BoundStateMethod, JostRoute,
};
use jostdet_core::{Complex64, Domain, Potential, Quadrature, SemiSeparableKernel, SpectralPoint, VolterraMethod};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, JobConfig};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// Row key, e.g. the parameter value.
    pub key: String,
    pub value: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn at_most(name: &str, key: &str, value: f64, tol: f64) -> Self {
        Check { name: name.into(), key: key.into(), value, tol, passed: value <= tol, note: None }
    }

    fn failed(name: &str, key: &str, note: String) -> Self {
        Check { name: name.into(), key: key.into(), value: f64::NAN, tol: 0.0, passed: false, note: Some(note) }
    }
}

#[derive(Clone, Debug, Default)]
pub struct JobOutput {
    pub table: Table,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

/// Runtime settings shared by every row.
pub struct Context<'a> {
    pub config: &'a JobConfig,
    pub base: &'a Path,
    /// Write zero instead of measured wall times.
    pub fixed_timing: bool,
}

impl Context<'_> {
    fn elapsed_ms(&self, t: Instant) -> f64 {
        if self.fixed_timing {
            0.0
        } else {
            t.elapsed().as_secs_f64() * 1e3
        }
    }
}

fn complex_cols(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}

fn push_c(row: &mut Vec<Cell>, z: Complex64) {
    row.push(Cell::Num(z.re));
    row.push(Cell::Num(z.im));
}

fn key(z: Complex64) -> String {
    format!("{:.17e}{:+.17e}i", z.re, z.im)
}

fn max_pairwise(values: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            worst = worst.max((values[i] - values[j]).norm());
        }
    }
    worst
}

type RowResult = Result<(Vec<Cell>, Vec<Check>), String>;

/// Evaluate one row per parameter in parallel; failed rows are kept as NaN rows with a failed check.
fn sweep(
    params: &[Complex64],
    width: usize,
    what: &str,
    f: impl Fn(Complex64) -> RowResult + Sync,
) -> (Vec<Vec<Cell>>, Vec<Check>) {
    let results: Vec<(Complex64, RowResult)> = params.par_iter().map(|&p| (p, f(p))).collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut checks = Vec::new();
    for (p, r) in results {
        match r {
            Ok((row, c)) => {
                rows.push(row);
                checks.extend(c);
            }
            Err(msg) => {
                let mut row = Vec::with_capacity(width);
                push_c(&mut row, p);
                row.resize(width, Cell::Num(f64::NAN));
                rows.push(row);
                checks.push(Check::failed(what, &key(p), msg));
            }
        }
    }
    (rows, checks)
}

fn config_err(e: jostdet_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn kernel_grid(ctx: &Context, k: &SemiSeparableKernel, level: usize) -> Result<Quadrature, CliError> {
    let g = &ctx.config.grid;
    default_grid(k, g.nodes_per_panel(), g.panels() << level).map_err(config_err)
}

fn potential_grid(ctx: &Context, v: &Potential, level: usize) -> Result<Quadrature, CliError> {
    let mut spec = ctx.config.grid.spec(&ctx.config.tolerances);
    spec.max_panel /= (1usize << level) as f64;
    Ok(v.grid(&spec).map_err(config_err)?.0)
}

fn spectral_points(params: &[Complex64], off_spectrum: bool) -> Result<Vec<SpectralPoint>, CliError> {
    params
        .iter()
        .map(|&z| {
            let p = SpectralPoint::new(z).map_err(config_err)?;
            if off_spectrum && !p.off_spectrum() {
                return Err(CliError::Config(format!("z = {z} lies on [0, ∞)")));
            }
            Ok(p)
        })
        .collect()
}

fn check_nystrom_size(n: usize, d: usize) -> Result<(), CliError> {
    if n * d > NYSTROM_LIMIT {
        return Err(CliError::Config(format!("Nyström matrix of order {} exceeds {NYSTROM_LIMIT}", n * d)));
    }
    Ok(())
}

pub fn run(command: Command, ctx: &Context) -> Result<JobOutput, CliError> {
    match command {
        Command::Det2 | Command::Det1 => determinant(command, ctx),
        Command::Tb2 => tb2(ctx),
        Command::Tb3 => tb3(ctx),
        Command::BoundStates => bound_states(ctx),
        Command::Bargmann => bargmann(ctx),
        Command::Converge => converge(ctx),
    }
}

fn determinant(command: Command, ctx: &Context) -> Result<JobOutput, CliError> {
    let cfg = ctx.config;
    let k = cfg.kernel.as_ref().expect("validated").build(ctx.base)?;
    let alphas = cfg.alpha.as_ref().expect("validated").expand()?;
    let grid = kernel_grid(ctx, &k, 0)?;
    if cfg.oracle {
        check_nystrom_size(grid.len(), k.d())?;
    }
    let tol = cfg.tolerances.reduction();
    let mut header: Vec<String> = complex_cols("alpha").into();
    for r in REDUCTION_ROUTES {
        header.extend(complex_cols(r.name()));
    }
    if cfg.oracle {
        header.extend(complex_cols("nystrom"));
    }
    header.extend(["cross_route_spread", "grid_nodes", "wall_time_ms"].map(String::from));
    let width = header.len();
    let det1 = command == Command::Det1;
    let (rows, checks) = sweep(&alphas, width, "evaluation", |alpha| {
        let t = Instant::now();
        let red = reduce(&k, alpha, &grid, VolterraMethod::BackSubstitution, &tol).map_err(|e| e.to_string())?;
        let d = if det1 { det1_from_reduction(&red, &tol) } else { det2_from_reduction(&red, &tol) };
        let mut row = Vec::with_capacity(width);
        push_c(&mut row, alpha);
        for r in REDUCTION_ROUTES {
            push_c(&mut row, d.route_value(r).expect("all reduction routes"));
        }
        if cfg.oracle {
            let n2 = det2_nystrom(&k, alpha, &grid).map_err(|e| e.to_string())?.value;
            let v = if det1 { n2 * (-alpha * nystrom_trace(&k, &grid).map_err(|e| e.to_string())?).exp() } else { n2 };
            push_c(&mut row, v);
        }
        row.push(Cell::Num(d.cross_route_spread));
        row.push(Cell::Int(grid.len() as u64));
        row.push(Cell::Num(ctx.elapsed_ms(t)));
        let kk = key(alpha);
        let mut checks = vec![Check::at_most("cross_route_spread", &kk, d.cross_route_spread, tol.consistency)];
        if det1 {
            let mismatch = (d.traces.0 - d.traces.1).norm();
            let mut c = Check::at_most("trace_consistency", &kk, mismatch, tol.trace * (1.0 + d.traces.0.norm()));
            c.note = d.warnings.iter().find(|w| w.contains("trace")).cloned();
            checks.push(c);
        }
        Ok((row, checks))
    });
    Ok(JobOutput { table: Table { header, rows }, checks, notes: Vec::new() })
}

fn tb2(ctx: &Context) -> Result<JobOutput, CliError> {
    let cfg = ctx.config;
    let v = cfg.potential.as_ref().expect("validated").build(ctx.base)?;
    let zs = cfg.z.as_ref().expect("validated").expand()?;
    let points = spectral_points(&zs, true)?;
    let grid = potential_grid(ctx, &v, 0)?;
    let tol = cfg.tolerances.reduction();
    let ident = cfg.tolerances.identity();
    let half = v.domain() == Domain::HalfLine;
    let names: Vec<&str> =
        if half { vec!["fredholm", "jost"] } else { vec!["fredholm", "plus_integral", "minus_integral", "wronskian"] };
    let mut header: Vec<String> = complex_cols("z").into();
    for n in &names {
        header.extend(complex_cols(n));
    }
    header.extend(["cross_route_spread", "grid_nodes", "wall_time_ms"].map(String::from));
    let width = header.len();
    let (rows, checks) = sweep(&zs, width, "evaluation", |z| {
        let t = Instant::now();
        let p = points[zs.iter().position(|&q| q == z).expect("listed")];
        let err = |e: jostdet_core::Error| e.to_string();
        let (values, jost_spread) = if half {
            let k = build_k_halfline(&v, p, &grid).map_err(err)?;
            let lhs =
                jostdet_core::reduction::det1_semiseparable(&k, Complex64::new(1.0, 0.0), &grid).map_err(err)?.value;
            let rhs = det(&half_line_jost_function(&v, p, &grid).map_err(err)?).map_err(err)?;
            (vec![lhs, rhs], 0.0)
        } else {
            let (lhs, _) = fredholm_jost_check(&v, p, &grid).map_err(err)?;
            let routes = jost_function_routes(&v, p, &grid, f64::INFINITY).map_err(err)?;
            let dets =
                JostRoute::ALL.iter().map(|&r| det(routes.get(r))).collect::<Result<Vec<_>, _>>().map_err(err)?;
            let mut values = vec![lhs];
            values.extend(dets.iter().copied());
            (values, max_pairwise(&dets))
        };
        let spread = max_pairwise(&values);
        let mut row = Vec::with_capacity(width);
        push_c(&mut row, z);
        for &c in &values {
            push_c(&mut row, c);
        }
        row.push(Cell::Num(spread));
        row.push(Cell::Int(grid.len() as u64));
        row.push(Cell::Num(ctx.elapsed_ms(t)));
        let kk = key(z);
        let mut checks = vec![Check::at_most("fredholm_vs_jost", &kk, (values[0] - values[1]).norm(), ident)];
        if !half {
            checks.push(Check::at_most("jost_routes", &kk, jost_spread, tol.consistency));
        }
        Ok((row, checks))
    });
    Ok(JobOutput { table: Table { header, rows }, checks, notes: Vec::new() })
}

fn tb3(ctx: &Context) -> Result<JobOutput, CliError> {
    let cfg = ctx.config;
    let v = cfg.potential.as_ref().expect("validated").build(ctx.base)?;
    if v.domain() != Domain::FullLine {
        return Err(CliError::Config("tb3 needs a full-line potential".into()));
    }
    let zs = cfg.z.as_ref().expect("validated").expand()?;
    let points = spectral_points(&zs, true)?;
    let grid = potential_grid(ctx, &v, 0)?;
    let ident = cfg.tolerances.identity();
    let mut header: Vec<String> = complex_cols("z").into();
    for n in ["system", "kernel", "jost"] {
        header.extend(complex_cols(n));
    }
    header.extend(["cross_route_spread", "grid_nodes", "wall_time_ms"].map(String::from));
    let width = header.len();
    let (rows, checks) = sweep(&zs, width, "evaluation", |z| {
        let t = Instant::now();
        let p = points[zs.iter().position(|&q| q == z).expect("listed")];
        let c = first_order_check(&v, p, &grid).map_err(|e| e.to_string())?;
        let mut row = Vec::with_capacity(width);
        push_c(&mut row, z);
        for x in [c.system, c.kernel, c.jost] {
            push_c(&mut row, x);
        }
        row.push(Cell::Num(c.spread()));
        row.push(Cell::Int(grid.len() as u64));
        row.push(Cell::Num(ctx.elapsed_ms(t)));
        Ok((row, vec![Check::at_most("first_order_spread", &key(z), c.spread(), ident)]))
    });
    Ok(JobOutput { table: Table { header, rows }, checks, notes: Vec::new() })
}

fn hermitian_potential(ctx: &Context) -> Result<Potential, CliError> {
    let v = ctx.config.potential.as_ref().expect("validated").build(ctx.base)?;
    if !v.is_hermitian() {
        return Err(CliError::Config("bound-state counting needs a Hermitian potential".into()));
    }
    Ok(v)
}

fn bound_states(ctx: &Context) -> Result<JobOutput, CliError> {
    let v = hermitian_potential(ctx)?;
    let spec = ctx.config.grid.spec(&ctx.config.tolerances);
    let opts = ctx.config.bound_states.options(spec);
    let header: Vec<String> =
        ["method", "count", "inconclusive", "ground_energy", "wall_time_ms"].map(String::from).into();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut counts = Vec::new();
    for m in BoundStateMethod::ALL {
        let t = Instant::now();
        match count_bound_states(&v, m, &opts) {
            Ok(r) => {
                let ground = r.energies.iter().copied().fold(f64::NAN, f64::min);
                rows.push(vec![
                    Cell::Text(m.name().into()),
                    Cell::Int(r.count as u64),
                    Cell::Bool(r.inconclusive),
                    Cell::Num(ground),
                    Cell::Num(ctx.elapsed_ms(t)),
                ]);
                if r.inconclusive {
                    checks.push(Check::failed("conclusive", m.name(), r.notes.join("; ")));
                }
                notes.extend(r.notes.iter().map(|n| format!("{}: {n}", m.name())));
                counts.push(r.count);
            }
            Err(e) => {
                rows.push(vec![
                    Cell::Text(m.name().into()),
                    Cell::Num(f64::NAN),
                    Cell::Bool(true),
                    Cell::Num(f64::NAN),
                    Cell::Num(ctx.elapsed_ms(t)),
                ]);
                checks.push(Check::failed("evaluation", m.name(), e.to_string()));
            }
        }
    }
    let lo = counts.iter().min().copied().unwrap_or(0);
    let hi = counts.iter().max().copied().unwrap_or(0);
    checks.push(Check::at_most("method_agreement", "all", (hi - lo) as f64, 0.0));
    Ok(JobOutput { table: Table { header, rows }, checks, notes })
}

fn bargmann(ctx: &Context) -> Result<JobOutput, CliError> {
    let v = hermitian_potential(ctx)?;
    if v.domain() != Domain::HalfLine {
        return Err(CliError::Config("the Bargmann bound needs a half-line potential".into()));
    }
    let grid = potential_grid(ctx, &v, 0)?;
    let opts = ctx.config.bound_states.options(ctx.config.grid.spec(&ctx.config.tolerances));
    let t = Instant::now();
    let bound = bargmann_bound(&v, &grid).map_err(config_err)?;
    let header: Vec<String> = ["bound", "count", "satisfied", "grid_nodes", "wall_time_ms"].map(String::from).into();
    let (row, check) = match count_bound_states(&v, BoundStateMethod::DirectDiag, &opts) {
        Ok(r) => {
            let n = r.count as f64;
            let c = Check::at_most("count_within_bound", "direct_diag", n - bound, 0.0);
            (
                vec![
                    Cell::Num(bound),
                    Cell::Int(r.count as u64),
                    Cell::Bool(n <= bound),
                    Cell::Int(grid.len() as u64),
                    Cell::Num(ctx.elapsed_ms(t)),
                ],
                c,
            )
        }
        Err(e) => (
            vec![
                Cell::Num(bound),
                Cell::Num(f64::NAN),
                Cell::Bool(false),
                Cell::Int(grid.len() as u64),
                Cell::Num(ctx.elapsed_ms(t)),
            ],
            Check::failed("evaluation", "direct_diag", e.to_string()),
        ),
    };
    Ok(JobOutput { table: Table { header, rows: vec![row] }, checks: vec![check], notes: Vec::new() })
}

/// Differences below this are treated as converged in the monotonicity check.
const CONVERGED: f64 = 1e-13;

fn converge(ctx: &Context) -> Result<JobOutput, CliError> {
    let cfg = ctx.config;
    let levels = cfg.levels.unwrap_or(4);
    let tol = cfg.tolerances.reduction();
    // one kernel per parameter: α-sweeps share K, z-sweeps rebuild it
    enum Source {
        Kernel(Box<SemiSeparableKernel>),
        Potential(Potential, Vec<SpectralPoint>),
    }
    let (params, source, label) = match (&cfg.kernel, &cfg.potential) {
        (Some(k), _) => {
            (cfg.alpha.as_ref().expect("validated").expand()?, Source::Kernel(Box::new(k.build(ctx.base)?)), "alpha")
        }
        (None, Some(p)) => {
            let v = p.build(ctx.base)?;
            let zs = cfg.z.as_ref().expect("validated").expand()?;
            let pts = spectral_points(&zs, true)?;
            (zs, Source::Potential(v, pts), "z")
        }
        _ => unreachable!("validated"),
    };
    let mut grids = Vec::new();
    for level in 0..levels {
        let (g, d) = match &source {
            Source::Kernel(k) => (kernel_grid(ctx, k, level)?, k.d()),
            Source::Potential(v, _) => (potential_grid(ctx, v, level)?, v.d()),
        };
        if g.len() * d > NYSTROM_LIMIT {
            break;
        }
        grids.push(g);
    }
    let mut notes = Vec::new();
    if grids.len() < levels {
        notes.push(format!("stopped after {} levels at the Nyström size limit {NYSTROM_LIMIT}", grids.len()));
    }
    if grids.is_empty() {
        return Err(CliError::Config(format!("the coarsest grid already exceeds the Nyström limit {NYSTROM_LIMIT}")));
    }
    let mut header: Vec<String> = complex_cols(label).into();
    header.push("level".into());
    header.extend(complex_cols("route"));
    header.extend(complex_cols("oracle"));
    header.extend(["abs_diff", "cross_route_spread", "grid_nodes", "wall_time_ms"].map(String::from));
    let width = header.len();
    let alpha_one = Complex64::new(1.0, 0.0);
    let eval = |p: Complex64, g: &Quadrature| -> Result<(Complex64, Complex64, f64), jostdet_core::Error> {
        let (k, alpha) = match &source {
            Source::Kernel(k) => ((**k).clone(), p),
            Source::Potential(v, pts) => {
                let sp = pts[params.iter().position(|&q| q == p).expect("listed")];
                let k = if v.domain() == Domain::HalfLine {
                    build_k_halfline(v, sp, g)?
                } else {
                    build_k_fullline(v, sp, g)?
                };
                (k, alpha_one)
            }
        };
        let d = det2_from_reduction(&reduce(&k, alpha, g, VolterraMethod::BackSubstitution, &tol)?, &tol);
        let oracle = det2_nystrom(&k, alpha, g)?.value;
        Ok((d.value, oracle, d.cross_route_spread))
    };
    type Rows = Result<Vec<Vec<Cell>>, String>;
    let per_param: Vec<(Complex64, Rows)> = params
        .par_iter()
        .map(|&p| {
            let mut rows = Vec::new();
            for (level, g) in grids.iter().enumerate() {
                let t = Instant::now();
                let (route, oracle, spread) = match eval(p, g) {
                    Ok(x) => x,
                    Err(e) => return (p, Err(e.to_string())),
                };
                let mut row = Vec::with_capacity(width);
                push_c(&mut row, p);
                row.push(Cell::Int(level as u64));
                push_c(&mut row, route);
                push_c(&mut row, oracle);
                row.push(Cell::Num((route - oracle).norm()));
                row.push(Cell::Num(spread));
                row.push(Cell::Int(g.len() as u64));
                row.push(Cell::Num(ctx.elapsed_ms(t)));
                rows.push(row);
            }
            (p, Ok(rows))
        })
        .collect();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (p, r) in per_param {
        let kk = key(p);
        match r {
            Ok(block) => {
                let diffs: Vec<f64> = block
                    .iter()
                    .map(|row| match row[7] {
                        Cell::Num(x) => x,
                        _ => f64::NAN,
                    })
                    .collect();
                // the first step may be pre-asymptotic
                let worst_rise = diffs
                    .windows(2)
                    .skip(1)
                    .filter(|w| w[1] > CONVERGED)
                    .map(|w| w[1] - w[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut c = Check::at_most("monotone_refinement", &kk, worst_rise.max(0.0), 0.0);
                if diffs.len() < 3 {
                    c.note = Some("fewer than three levels; nothing to compare".into());
                }
                checks.push(c);
                for row in block {
                    checks.push(Check::at_most(
                        "cross_route_spread",
                        &format!(
                            "{kk}@{}",
                            match row[2] {
                                Cell::Int(l) => l,
                                _ => 0,
                            }
                        ),
                        match row[8] {
                            Cell::Num(s) => s,
                            _ => f64::NAN,
                        },
                        tol.consistency,
                    ));
                    rows.push(row);
                }
            }
            Err(msg) => {
                let mut row = Vec::with_capacity(width);
                push_c(&mut row, p);
                row.resize(width, Cell::Num(f64::NAN));
                rows.push(row);
                checks.push(Check::failed("evaluation", &kk, msg));
            }
        }
    }
    Ok(JobOutput { table: Table { header, rows }, checks, notes })
}

/// Tolerances actually in force, for the summary.
pub fn effective_tolerances(cfg: &JobConfig) -> (Tolerances, f64, f64) {
    let spec = cfg.grid.spec(&cfg.tolerances);
    (cfg.tolerances.reduction(), cfg.tolerances.identity(), spec.truncation_tol)
}
