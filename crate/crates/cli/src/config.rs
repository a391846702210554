use std::path::{Path, PathBuf};

use jostdet_core::numerics::CMatrix;
use jostdet_core::reduction::Tolerances;
use jostdet_core::schrodinger::{BoundStateOptions, GridSpec};
use jostdet_core::{Complex64, Domain, OperatorFunction, Potential, SemiSeparableKernel};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Det2,
    Det1,
    Tb2,
    Tb3,
    #[value(name = "bound_states", alias = "bound-states")]
    BoundStates,
    Bargmann,
    Converge,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Det2 => "det2",
            Command::Det1 => "det1",
            Command::Tb2 => "tb2",
            Command::Tb3 => "tb3",
            Command::BoundStates => "bound_states",
            Command::Bargmann => "bargmann",
            Command::Converge => "converge",
        }
    }
}

/// A complex number written as `1.5`, `[re, im]` or `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
    Named {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl ComplexSpec {
    pub fn value(&self) -> Complex64 {
        match *self {
            ComplexSpec::Real(x) => Complex64::new(x, 0.0),
            ComplexSpec::Pair([re, im]) => Complex64::new(re, im),
            ComplexSpec::Named { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: ComplexSpec,
    pub stop: ComplexSpec,
    pub num: usize,
}

/// `scale · base^t` for `num` equally spaced exponents `t` in `[start, stop]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Logspace {
    pub start: f64,
    pub stop: f64,
    pub num: usize,
    #[serde(default = "default_base")]
    pub base: f64,
    #[serde(default = "default_scale")]
    pub scale: ComplexSpec,
}

fn default_base() -> f64 {
    10.0
}

fn default_scale() -> ComplexSpec {
    ComplexSpec::Real(1.0)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ParamList {
    Values(Vec<ComplexSpec>),
    Single(ComplexSpec),
    Linspace { linspace: Linspace },
    Logspace { logspace: Logspace },
}

fn spaced(num: usize) -> impl Iterator<Item = f64> {
    (0..num).map(move |i| if num == 1 { 0.0 } else { i as f64 / (num - 1) as f64 })
}

impl ParamList {
    pub fn expand(&self) -> Result<Vec<Complex64>, CliError> {
        let out: Vec<Complex64> = match self {
            ParamList::Values(v) => v.iter().map(ComplexSpec::value).collect(),
            ParamList::Single(c) => vec![c.value()],
            ParamList::Linspace { linspace: l } => {
                let (a, b) = (l.start.value(), l.stop.value());
                spaced(l.num).map(|t| a + (b - a) * t).collect()
            }
            ParamList::Logspace { logspace: l } => {
                if !(l.base > 0.0) {
                    return Err(CliError::Config(format!("logspace base must be positive, got {}", l.base)));
                }
                let s = l.scale.value();
                spaced(l.num).map(|t| s * l.base.powf(l.start + (l.stop - l.start) * t)).collect()
            }
        };
        if out.is_empty() {
            return Err(CliError::Config("empty parameter list".into()));
        }
        if let Some(bad) = out.iter().find(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(CliError::Config(format!("non-finite parameter {bad}")));
        }
        Ok(out)
    }
}

/// Matrix written as nested rows of numbers or `[re, im]` pairs.
#[derive(Clone, Debug, Deserialize)]
pub struct MatrixSpec(pub Vec<Vec<ComplexSpec>>);

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || self.0.iter().any(|r| r.len() != cols) {
            return Err(CliError::Config("matrix must be a non-empty rectangular array".into()));
        }
        let data = self.0.iter().flatten().map(ComplexSpec::value).collect();
        CMatrix::from_vec(rows, cols, data).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `F1 = F2 = G1 = G2 = 1`.
    RankOne {
        #[serde(default = "unit_interval")]
        interval: [f64; 2],
    },
    /// Dirichlet Green's function of `-d²/dx²` on `(0, 1)`: `x_<(1 - x_>)`.
    Green,
    Constant {
        f1: MatrixSpec,
        g1: MatrixSpec,
        f2: MatrixSpec,
        g2: MatrixSpec,
        #[serde(default = "unit_interval")]
        interval: [f64; 2],
    },
    /// Four sampled factor files with columns `x, Re M11, Im M11, ...`.
    Csv {
        d: usize,
        n1: usize,
        n2: usize,
        f1: PathBuf,
        g1: PathBuf,
        f2: PathBuf,
        g2: PathBuf,
        #[serde(default = "default_degree")]
        degree: usize,
    },
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_degree() -> usize {
    3
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl KernelSpec {
    pub fn build(&self, base: &Path) -> Result<SemiSeparableKernel, CliError> {
        let cfg = |e: jostdet_core::Error| CliError::Config(e.to_string());
        match self {
            KernelSpec::RankOne { interval } => {
                let iv = (interval[0], interval[1]);
                let one = || OperatorFunction::scalar(iv, |_| Complex64::new(1.0, 0.0));
                SemiSeparableKernel::new(one(), one(), one(), one(), iv).map_err(cfg)
            }
            KernelSpec::Green => {
                let iv = (0.0, 1.0);
                let f1 = OperatorFunction::scalar(iv, |x| Complex64::new(1.0 - x, 0.0));
                let g1 = OperatorFunction::scalar(iv, |x| Complex64::new(x, 0.0));
                let f2 = OperatorFunction::scalar(iv, |x| Complex64::new(x, 0.0));
                let g2 = OperatorFunction::scalar(iv, |x| Complex64::new(1.0 - x, 0.0));
                SemiSeparableKernel::new(f1, g1, f2, g2, iv).map_err(cfg)
            }
            KernelSpec::Constant { f1, g1, f2, g2, interval } => {
                let iv = (interval[0], interval[1]);
                let c = |m: &MatrixSpec| -> Result<OperatorFunction, CliError> {
                    Ok(OperatorFunction::constant(m.to_matrix()?, iv))
                };
                SemiSeparableKernel::new(c(f1)?, c(g1)?, c(f2)?, c(g2)?, iv).map_err(cfg)
            }
            KernelSpec::Csv { d, n1, n2, f1, g1, f2, g2, degree } => {
                let load = |p: &PathBuf, r: usize, c: usize| {
                    let path = resolve(base, p);
                    OperatorFunction::from_csv(&path, r, c, *degree).map_err(|e| match e {
                        jostdet_core::Error::Io(m) => CliError::Io(m),
                        other => CliError::Config(format!("{}: {other}", path.display())),
                    })
                };
                let (f1, g1) = (load(f1, *d, *n1)?, load(g1, *n1, *d)?);
                let (f2, g2) = (load(f2, *d, *n2)?, load(g2, *n2, *d)?);
                let (a, b) = f1.interval();
                SemiSeparableKernel::new(f1, g1, f2, g2, (a, b)).map_err(cfg)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    FullLine,
    HalfLine,
}

impl From<DomainSpec> for Domain {
    fn from(d: DomainSpec) -> Self {
        match d {
            DomainSpec::FullLine => Domain::FullLine,
            DomainSpec::HalfLine => Domain::HalfLine,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `-depth` on `[center - width/2, center + width/2]`.
    SquareWell {
        depth: f64,
        width: f64,
        #[serde(default)]
        center: f64,
        domain: Option<DomainSpec>,
    },
    /// `amplitude · exp(-(x - center)² / (2σ²))`.
    Gaussian {
        amplitude: f64,
        sigma: f64,
        #[serde(default)]
        center: f64,
        domain: Option<DomainSpec>,
    },
    /// `amplitude · exp(-rate x)` on the half-line.
    Exponential {
        amplitude: f64,
        rate: f64,
    },
    MatrixDiag {
        entries: Vec<PotentialSpec>,
    },
    MatrixCoupled {
        d: usize,
        amplitude: MatrixSpec,
        profile: Box<PotentialSpec>,
    },
    Csv {
        path: PathBuf,
        d: usize,
        domain: DomainSpec,
        #[serde(default = "yes")]
        hermitian: bool,
    },
}

fn yes() -> bool {
    true
}

impl PotentialSpec {
    pub fn build(&self, base: &Path) -> Result<Potential, CliError> {
        let cfg = |e: jostdet_core::Error| CliError::Config(e.to_string());
        let with = |v: Potential, d: &Option<DomainSpec>| match d {
            Some(d) => v.with_domain((*d).into()).map_err(cfg),
            None => Ok(v),
        };
        match self {
            PotentialSpec::SquareWell { depth, width, center, domain } => {
                with(Potential::square_well(*depth, *width, *center).map_err(cfg)?, domain)
            }
            PotentialSpec::Gaussian { amplitude, sigma, center, domain } => {
                with(Potential::gaussian(*amplitude, *sigma, *center).map_err(cfg)?, domain)
            }
            PotentialSpec::Exponential { amplitude, rate } => Potential::exponential(*amplitude, *rate).map_err(cfg),
            PotentialSpec::MatrixDiag { entries } => {
                let parts = entries.iter().map(|e| e.build(base)).collect::<Result<Vec<_>, _>>()?;
                Potential::matrix_diag(&parts).map_err(cfg)
            }
            PotentialSpec::MatrixCoupled { d, amplitude, profile } => {
                let m = amplitude.to_matrix()?;
                if m.shape() != (*d, *d) {
                    return Err(CliError::Config(format!("amplitude is {}x{}, expected {d}x{d}", m.rows(), m.cols())));
                }
                Potential::matrix_coupled(m, &profile.build(base)?).map_err(cfg)
            }
            PotentialSpec::Csv { path, d, domain, hermitian } => {
                let path = resolve(base, path);
                Potential::from_csv(&path, *d, (*domain).into(), *hermitian).map_err(|e| match e {
                    jostdet_core::Error::Io(m) => CliError::Io(m),
                    other => CliError::Config(format!("{}: {other}", path.display())),
                })
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Panels for kernels on a finite interval.
    pub panels: Option<usize>,
    pub nodes_per_panel: Option<usize>,
    /// Largest panel length for potentials.
    pub max_panel: Option<f64>,
    pub truncation_tol: Option<f64>,
}

impl GridConfig {
    pub fn panels(&self) -> usize {
        self.panels.unwrap_or(8)
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.nodes_per_panel.unwrap_or(16)
    }

    pub fn spec(&self, tol: &ToleranceConfig) -> GridSpec {
        let d = GridSpec::default();
        GridSpec {
            n_per_panel: self.nodes_per_panel.unwrap_or(d.n_per_panel),
            max_panel: self.max_panel.unwrap_or(d.max_panel),
            truncation_tol: tol.truncation.or(self.truncation_tol).unwrap_or(d.truncation_tol),
        }
    }
}

/// Tolerance overrides; unset fields keep the library defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub consistency: Option<f64>,
    pub trace: Option<f64>,
    pub picard: Option<f64>,
    pub singular: Option<f64>,
    pub resolvent_condition: Option<f64>,
    pub truncation: Option<f64>,
    /// Agreement required between Fredholm, Jost and first-order determinants.
    pub identity: Option<f64>,
}

pub const ENV_PREFIX: &str = "JOSTDET_TOL_";

impl ToleranceConfig {
    /// Apply `JOSTDET_TOL_<NAME>` variables from `vars` on top of the config file.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
        for (key, raw) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            let value: f64 =
                raw.trim().parse().map_err(|_| CliError::Config(format!("{key}={raw} is not a number")))?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(CliError::Config(format!("{key} must be positive and finite, got {value}")));
            }
            let slot = match name.to_ascii_lowercase().as_str() {
                "consistency" => &mut self.consistency,
                "trace" => &mut self.trace,
                "picard" => &mut self.picard,
                "singular" => &mut self.singular,
                "resolvent_condition" => &mut self.resolvent_condition,
                "truncation" => &mut self.truncation,
                "identity" => &mut self.identity,
                _ => return Err(CliError::Config(format!("unknown tolerance variable {key}"))),
            };
            *slot = Some(value);
        }
        Ok(())
    }

    pub fn reduction(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            consistency: self.consistency.unwrap_or(d.consistency),
            trace: self.trace.unwrap_or(d.trace),
            picard: self.picard.unwrap_or(d.picard),
            singular: self.singular.unwrap_or(d.singular),
            resolvent_condition: self.resolvent_condition.unwrap_or(d.resolvent_condition),
            ..d
        }
    }

    pub fn identity(&self) -> f64 {
        self.identity.unwrap_or(1e-6)
    }

    fn validate(&self) -> Result<(), CliError> {
        let all = [
            ("consistency", self.consistency),
            ("trace", self.trace),
            ("picard", self.picard),
            ("singular", self.singular),
            ("resolvent_condition", self.resolvent_condition),
            ("truncation", self.truncation),
            ("identity", self.identity),
        ];
        for (name, v) in all {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::Config(format!("tolerance {name} must be positive and finite, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundStateConfig {
    pub kappa_points: Option<usize>,
    pub kappa_min: Option<f64>,
    pub lambda: Option<f64>,
    pub pad: Option<f64>,
    pub step: Option<f64>,
}

impl BoundStateConfig {
    pub fn options(&self, grid: GridSpec) -> BoundStateOptions {
        let d = BoundStateOptions::default();
        BoundStateOptions {
            grid,
            kappa_points: self.kappa_points.unwrap_or(d.kappa_points),
            kappa_min: self.kappa_min.unwrap_or(d.kappa_min),
            lambda: self.lambda.unwrap_or(d.lambda),
            pad: self.pad.unwrap_or(d.pad),
            step: self.step.unwrap_or(d.step),
            ..d
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<Command>,
    pub kernel: Option<KernelSpec>,
    pub potential: Option<PotentialSpec>,
    pub alpha: Option<ParamList>,
    pub z: Option<ParamList>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub bound_states: BoundStateConfig,
    /// Add a Nyström column to det1/det2 tables.
    #[serde(default)]
    pub oracle: bool,
    /// Grid doublings for `converge`.
    pub levels: Option<usize>,
    pub output: Option<PathBuf>,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid job file: {e}")))
    }

    /// Check the combination of inputs against `command`.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!(
                    "job file is for '{}', invoked as '{}'",
                    c.name(),
                    command.name()
                )));
            }
        }
        self.tolerances.validate()?;
        let needs = |what: &str| CliError::Config(format!("'{}' requires {what}", command.name()));
        let forbid = |what: &str| CliError::Config(format!("'{}' does not take {what}", command.name()));
        match command {
            Command::Det2 | Command::Det1 => {
                if self.kernel.is_none() {
                    return Err(needs("a kernel"));
                }
                if self.potential.is_some() {
                    return Err(forbid("a potential"));
                }
                if self.alpha.is_none() {
                    return Err(needs("an alpha list"));
                }
                if self.z.is_some() {
                    return Err(forbid("a z list"));
                }
            }
            Command::Tb2 | Command::Tb3 => {
                if self.potential.is_none() {
                    return Err(needs("a potential"));
                }
                if self.kernel.is_some() {
                    return Err(forbid("a kernel"));
                }
                if self.z.is_none() {
                    return Err(needs("a z list"));
                }
                if self.alpha.is_some() {
                    return Err(forbid("an alpha list"));
                }
            }
            Command::BoundStates | Command::Bargmann => {
                if self.potential.is_none() {
                    return Err(needs("a potential"));
                }
                if self.kernel.is_some() {
                    return Err(forbid("a kernel"));
                }
                if self.z.is_some() || self.alpha.is_some() {
                    return Err(forbid("a parameter list"));
                }
            }
            Command::Converge => match (&self.kernel, &self.potential) {
                (Some(_), None) if self.alpha.is_some() && self.z.is_none() => {}
                (None, Some(_)) if self.z.is_some() && self.alpha.is_none() => {}
                _ => return Err(needs("either a kernel with an alpha list or a potential with a z list")),
            },
        }
        if let Some(n) = self.grid.nodes_per_panel {
            if n < 2 {
                return Err(CliError::Config(format!("nodes_per_panel must be at least 2, got {n}")));
            }
        }
        if self.grid.panels == Some(0) {
            return Err(CliError::Config("panels must be positive".into()));
        }
        if let Some(l) = self.levels {
            if l == 0 || l > 12 {
                return Err(CliError::Config(format!("levels must be in 1..=12, got {l}")));
            }
        }
        Ok(())
    }
}
