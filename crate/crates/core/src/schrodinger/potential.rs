use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::OperatorFunction;
use crate::numerics::{herm_eigs, trace_norm, CMatrix, C0, HERMITIAN_TOL};
use crate::quadrature::{truncate_interval, Envelope, Quadrature, Scheme, TruncationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    FullLine,
    HalfLine,
}

impl Domain {
    pub fn interval(&self) -> (f64, f64) {
        match self {
            Domain::FullLine => (f64::NEG_INFINITY, f64::INFINITY),
            Domain::HalfLine => (0.0, f64::INFINITY),
        }
    }
}

/// Integrability class: `‖V‖₁ ∈ L¹` or `‖V‖₁ ∈ L¹((1+x)dx)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightClass {
    L1,
    L1Weighted,
}

/// Panel layout used when a potential is discretized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_per_panel: usize,
    pub max_panel: f64,
    pub truncation_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_per_panel: 16, max_panel: 0.5, truncation_tol: 1e-12 }
    }
}

/// Matrix potential `V(x)` with a decay majorant of `‖V(x)‖₁`.
#[derive(Clone, Debug)]
pub struct Potential {
    v: OperatorFunction,
    domain: Domain,
    envelope: Envelope,
    hermitian: bool,
    breakpoints: Vec<f64>,
}

const CHECK_POINTS: usize = 257;

impl Potential {
    /// Wraps `v`, verifying the Hermitian flag and the envelope on a sample of points.
    pub fn new(v: OperatorFunction, domain: Domain, envelope: Envelope, hermitian: bool) -> Result<Self> {
        if v.rows() != v.cols() {
            return Err(Error::Dimension(format!("potential must be square, got {}x{}", v.rows(), v.cols())));
        }
        let p = Potential { v, domain, envelope, hermitian, breakpoints: Vec::new() };
        p.verify()?;
        Ok(p)
    }

    fn verify(&self) -> Result<()> {
        let (a, b) = self.truncate(1e-6)?.truncated;
        let mut xs: Vec<f64> = (0..CHECK_POINTS).map(|i| a + (b - a) * i as f64 / (CHECK_POINTS - 1) as f64).collect();
        xs.extend(self.breakpoints.iter().filter(|&&x| x >= a && x <= b));
        for x in xs {
            let m = self.eval(x);
            if !m.is_finite() {
                return Err(Error::Contract(format!("potential not finite at x = {x}")));
            }
            let scale = m.norm_fro();
            if self.hermitian && m.hermitian_defect() > HERMITIAN_TOL * scale.max(1.0) {
                return Err(Error::Contract(format!(
                    "potential flagged Hermitian but ‖V − V*‖ = {:.3e} at x = {x}",
                    m.hermitian_defect()
                )));
            }
            let norm = trace_norm(&m);
            let env = self.envelope.eval(x);
            if norm > env * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::Contract(format!("envelope {env:.6e} below ‖V‖₁ = {norm:.6e} at x = {x}")));
            }
        }
        Ok(())
    }

    pub fn zero(d: usize, domain: Domain) -> Self {
        let (lo, hi) = domain.interval();
        Potential {
            v: OperatorFunction::zero(d, d, (lo, hi)),
            domain,
            envelope: Envelope::Zero,
            hermitian: true,
            breakpoints: Vec::new(),
        }
    }

    /// `-depth` on `[center - width/2, center + width/2]`, zero elsewhere.
    pub fn square_well(depth: f64, width: f64, center: f64) -> Result<Self> {
        if !(width > 0.0) || !depth.is_finite() || !center.is_finite() {
            return Err(Error::Contract(format!("invalid square well (depth {depth}, width {width})")));
        }
        let (lo, hi) = (center - 0.5 * width, center + 0.5 * width);
        let v = OperatorFunction::scalar(Domain::FullLine.interval(), move |x| {
            if x >= lo && x <= hi {
                Complex64::new(-depth, 0.0)
            } else {
                C0
            }
        });
        let mut p = Potential::new(v, Domain::FullLine, Envelope::Compact { amplitude: depth.abs(), lo, hi }, true)?;
        p.breakpoints = vec![lo, hi];
        Ok(p)
    }

    /// `amplitude · exp(-(x - center)² / (2σ²))`
    pub fn gaussian(amplitude: f64, sigma: f64, center: f64) -> Result<Self> {
        if !(sigma > 0.0) || !amplitude.is_finite() {
            return Err(Error::Contract(format!("invalid gaussian (amplitude {amplitude}, sigma {sigma})")));
        }
        let v = OperatorFunction::scalar(Domain::FullLine.interval(), move |x| {
            let u = (x - center) / sigma;
            Complex64::new(amplitude * (-0.5 * u * u).exp(), 0.0)
        });
        Potential::new(v, Domain::FullLine, Envelope::Gaussian { amplitude: amplitude.abs(), sigma, center }, true)
    }

    /// `amplitude · exp(-rate |x|)`, on the half-line unless moved with [`Potential::with_domain`].
    pub fn exponential(amplitude: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !amplitude.is_finite() {
            return Err(Error::Contract(format!("invalid exponential (amplitude {amplitude}, rate {rate})")));
        }
        let v = OperatorFunction::scalar(Domain::FullLine.interval(), move |x| {
            Complex64::new(amplitude * (-rate * x.abs()).exp(), 0.0)
        });
        let mut p = Potential::new(
            v,
            Domain::HalfLine,
            Envelope::Exponential { amplitude: amplitude.abs(), rate, center: 0.0 },
            true,
        )?;
        p.breakpoints = vec![0.0];
        Ok(p)
    }

    /// Block-diagonal potential from scalar or matrix parts on a common domain.
    pub fn matrix_diag(parts: &[Potential]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Contract("matrix_diag needs at least one part".into()))?;
        if parts.iter().any(|p| p.domain != first.domain) {
            return Err(Error::Contract("matrix_diag parts live on different domains".into()));
        }
        let d: usize = parts.iter().map(|p| p.d()).sum();
        let owned: Arc<Vec<Potential>> = Arc::new(parts.to_vec());
        let inner = owned.clone();
        let v = OperatorFunction::new(d, d, Domain::FullLine.interval(), move |x| {
            let mut m = CMatrix::zeros(d, d);
            let mut off = 0;
            for p in inner.iter() {
                m.set_block(off, off, &p.eval(x));
                off += p.d();
            }
            m
        });
        let envelope = Envelope::Sum(parts.iter().map(|p| p.envelope.clone()).collect());
        let hermitian = parts.iter().all(|p| p.hermitian);
        let mut out = Potential::new(v, first.domain, envelope, hermitian)?;
        out.breakpoints = owned.iter().flat_map(|p| p.breakpoints.iter().cloned()).collect();
        Ok(out)
    }

    /// `V(x) = M · p(x)` with a scalar profile `p`.
    pub fn matrix_coupled(amplitude: CMatrix, profile: &Potential) -> Result<Self> {
        if !amplitude.is_square() {
            return Err(Error::Dimension(format!("coupling matrix is {}x{}", amplitude.rows(), amplitude.cols())));
        }
        if profile.d() != 1 {
            return Err(Error::Dimension(format!("profile must be scalar, got d = {}", profile.d())));
        }
        let d = amplitude.rows();
        let scale = trace_norm(&amplitude);
        let hermitian =
            profile.hermitian && amplitude.hermitian_defect() <= HERMITIAN_TOL * amplitude.norm_fro().max(1.0);
        let prof = profile.clone();
        let m = amplitude.clone();
        let v = OperatorFunction::new(d, d, Domain::FullLine.interval(), move |x| m.scale(prof.eval(x)[(0, 0)]));
        let envelope = match &profile.envelope {
            Envelope::Zero => Envelope::Zero,
            Envelope::Compact { amplitude, lo, hi } => {
                Envelope::Compact { amplitude: amplitude * scale, lo: *lo, hi: *hi }
            }
            Envelope::Exponential { amplitude, rate, center } => {
                Envelope::Exponential { amplitude: amplitude * scale, rate: *rate, center: *center }
            }
            Envelope::Gaussian { amplitude, sigma, center } => {
                Envelope::Gaussian { amplitude: amplitude * scale, sigma: *sigma, center: *center }
            }
            other => {
                let inner = other.clone();
                Envelope::custom(move |x| scale * inner.eval(x))
            }
        };
        let mut out = Potential::new(v, profile.domain, envelope, hermitian)?;
        out.breakpoints = profile.breakpoints.clone();
        Ok(out)
    }

    /// Tabulated `d×d` potential from CSV (see [`OperatorFunction::from_csv`]); zero outside the samples.
    pub fn from_csv(path: impl AsRef<Path>, d: usize, domain: Domain, hermitian: bool) -> Result<Self> {
        let v = OperatorFunction::from_csv(path, d, d, 3)?;
        Self::from_sampled(v, domain, hermitian)
    }

    pub fn from_sampled(v: OperatorFunction, domain: Domain, hermitian: bool) -> Result<Self> {
        let xs = v
            .sample_points()
            .ok_or_else(|| Error::Contract("from_sampled expects a sampled function".into()))?
            .to_vec();
        let (mut lo, hi) = v.interval();
        if domain == Domain::HalfLine {
            lo = lo.max(0.0);
        }
        let mut amplitude = 0.0f64;
        for &x in &xs {
            amplitude = amplitude.max(trace_norm(&v.eval(x)?));
        }
        for w in xs.windows(2) {
            for t in [0.25, 0.5, 0.75] {
                amplitude = amplitude.max(trace_norm(&v.eval(w[0] + t * (w[1] - w[0]))?));
            }
        }
        let envelope =
            if amplitude == 0.0 { Envelope::Zero } else { Envelope::Compact { amplitude: amplitude * 1.5, lo, hi } };
        let mut p = Potential::new(v, domain, envelope, hermitian)?;
        p.breakpoints = vec![lo, hi];
        Ok(p)
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        self.domain = domain;
        self.verify()?;
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.v.rows()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn weight_class(&self) -> WeightClass {
        match self.domain {
            Domain::FullLine => WeightClass::L1,
            Domain::HalfLine => WeightClass::L1Weighted,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `V(x)`, zero where the underlying function is not defined.
    pub fn eval(&self, x: f64) -> CMatrix {
        let (lo, hi) = self.v.interval();
        if x < lo || x > hi {
            return CMatrix::zeros(self.d(), self.d());
        }
        self.v.eval_unchecked(x)
    }

    pub fn samples(&self, grid: &Quadrature) -> Vec<CMatrix> {
        grid.nodes().iter().map(|&x| self.eval(x)).collect()
    }

    /// Finite interval carrying all but `tol` of the (weighted, on the half-line) envelope mass.
    pub fn truncate(&self, tol: f64) -> Result<TruncationReport> {
        match self.weight_class() {
            WeightClass::L1 => truncate_interval(&self.envelope, self.domain.interval(), tol),
            WeightClass::L1Weighted => {
                let weighted = match &self.envelope {
                    Envelope::Zero => Envelope::Zero,
                    c @ Envelope::Compact { .. } => c.clone(),
                    other => {
                        let inner = other.clone();
                        Envelope::custom(move |x| (1.0 + x.abs()) * inner.eval(x))
                    }
                };
                truncate_interval(&weighted, self.domain.interval(), tol)
            }
        }
    }

    /// Gauss–Legendre grid on the truncated interval with panel edges on the breakpoints.
    pub fn grid(&self, spec: &GridSpec) -> Result<(Quadrature, TruncationReport)> {
        let report = self.truncate(spec.truncation_tol)?;
        let (a, b) = report.truncated;
        let q = Quadrature::with_breakpoints(
            a,
            b,
            &self.breakpoints,
            spec.n_per_panel,
            spec.max_panel,
            Scheme::GaussLegendre,
        )?;
        Ok((q, report))
    }

    /// `∫ tr V` over the grid.
    pub fn trace_integral(&self, grid: &Quadrature) -> Complex64 {
        grid.nodes().iter().zip(grid.weights()).map(|(&x, &w)| self.eval(x).trace() * w).sum()
    }

    /// Largest `‖V(x)‖` over the grid nodes.
    pub fn max_norm(&self, grid: &Quadrature) -> Result<f64> {
        let mut best = 0.0f64;
        for &x in grid.nodes() {
            let m = self.eval(x);
            let n = if self.hermitian {
                herm_eigs(&m)?.values.iter().fold(0.0f64, |acc, l| acc.max(l.abs()))
            } else {
                trace_norm(&m)
            };
            best = best.max(n);
        }
        Ok(best)
    }

    pub(crate) fn require_hermitian(&self, what: &str) -> Result<()> {
        if !self.hermitian {
            return Err(Error::Contract(format!("{what} requires a Hermitian potential")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_well_values_and_truncation() {
        let p = Potential::square_well(2.0, 1.0, 0.5).unwrap();
        assert_eq!(p.eval(0.5)[(0, 0)], Complex64::new(-2.0, 0.0));
        assert_eq!(p.eval(1.5)[(0, 0)], C0);
        let r = p.truncate(1e-10).unwrap();
        assert_eq!(r.truncated, (0.0, 1.0));
    }

    #[test]
    fn exponential_lives_on_half_line() {
        let p = Potential::exponential(-1.0, 1.0).unwrap();
        assert_eq!(p.domain(), Domain::HalfLine);
        assert_eq!(p.weight_class(), WeightClass::L1Weighted);
        let r = p.truncate(1e-8).unwrap();
        assert_eq!(r.truncated.0, 0.0);
        // ∫_b^∞ (1+x)e^{-x} = (2+b)e^{-b}
        let b = r.truncated.1;
        assert!((2.0 + b) * (-b).exp() <= 1e-8 * 1.001);
    }

    #[test]
    fn envelope_must_dominate() {
        let v = OperatorFunction::scalar((f64::NEG_INFINITY, f64::INFINITY), |x| {
            Complex64::new(-2.0 * (-x * x).exp(), 0.0)
        });
        let env = Envelope::Gaussian { amplitude: 1.0, sigma: 1.0, center: 0.0 };
        assert!(matches!(Potential::new(v, Domain::FullLine, env, true), Err(Error::Contract(_))));
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let m = CMatrix::from_fn(2, 2, |i, j| Complex64::new(0.0, if i < j { 1.0 } else { 0.0 }));
        let v = OperatorFunction::new(2, 2, (f64::NEG_INFINITY, f64::INFINITY), move |x| {
            m.scale(Complex64::new((-x * x).exp(), 0.0))
        });
        let env = Envelope::Gaussian { amplitude: 2.0, sigma: 1.0 / 2f64.sqrt(), center: 0.0 };
        assert!(Potential::new(v.clone(), Domain::FullLine, env.clone(), true).is_err());
        assert!(Potential::new(v, Domain::FullLine, env, false).is_ok());
    }

    #[test]
    fn coupled_and_diagonal_families() {
        let g = Potential::gaussian(1.0, 1.0, 0.0).unwrap();
        let m = CMatrix::from_real(2, 2, &[-1.0, 0.5, 0.5, -2.0]).unwrap();
        let c = Potential::matrix_coupled(m.clone(), &g).unwrap();
        assert!(c.is_hermitian());
        assert!((&c.eval(0.3) - &m.scale(g.eval(0.3)[(0, 0)])).max_abs() < 1e-15);
        let s = Potential::square_well(1.0, 2.0, 0.0).unwrap();
        let dg = Potential::matrix_diag(&[s, g]).unwrap();
        assert_eq!(dg.d(), 2);
        assert_eq!(dg.eval(0.0)[(0, 1)], C0);
        assert_eq!(dg.breakpoints(), &[-1.0, 1.0]);
    }

    #[test]
    fn grid_respects_breakpoints() {
        let p = Potential::square_well(1.0, 1.0, 0.0).unwrap();
        let (q, _) = p.grid(&GridSpec::default()).unwrap();
        assert_eq!(q.interval(), (-0.5, 0.5));
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
